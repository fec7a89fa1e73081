use crate::error::{Error, Result};

/// Additive split `window = trend + seasonal + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Classical additive decomposition.
///
/// The trend is a centered moving average (2×m for even `m`, m-point for odd
/// `m`); the half-season it cannot reach at each end is filled by extending a
/// least-squares line through the nearest season of interior trend values.
/// Seasonal effects are month-of-cycle means of the detrended interior,
/// re-centered to sum to zero.
pub fn decompose(window: &[f64], season_length: usize) -> Result<Decomposition> {
    let m = season_length.max(1);
    let n = window.len();
    if n < 2 * m || n < 2 {
        return Err(Error::InsufficientContext {
            required: (2 * m).max(2),
            actual: n,
        });
    }

    let half = m / 2;
    let mut trend = vec![0.0; n];
    for (t, slot) in trend.iter_mut().enumerate().take(n - half).skip(half) {
        *slot = if m.is_multiple_of(2) {
            let inner: f64 = window[t + 1 - half..t + half].iter().sum();
            (0.5 * window[t - half] + inner + 0.5 * window[t + half]) / m as f64
        } else {
            window[t - half..=t + half].iter().sum::<f64>() / m as f64
        };
    }
    if half > 0 {
        let interior = half..n - half;
        let k = m.min(interior.len());
        let (a, b) = line_fit(&trend[half..half + k], half);
        for (t, slot) in trend.iter_mut().enumerate().take(half) {
            *slot = a + b * t as f64;
        }
        let tail_start = n - half - k;
        let (a, b) = line_fit(&trend[tail_start..n - half], tail_start);
        for (t, slot) in trend.iter_mut().enumerate().skip(n - half) {
            *slot = a + b * t as f64;
        }
    }

    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for t in half..n - half {
        sums[t % m] += window[t] - trend[t];
        counts[t % m] += 1;
    }
    let mut effects: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let centre = effects.iter().sum::<f64>() / m as f64;
    effects.iter_mut().for_each(|e| *e -= centre);

    let seasonal: Vec<f64> = (0..n).map(|t| effects[t % m]).collect();
    let residual = (0..n)
        .map(|t| window[t] - trend[t] - seasonal[t])
        .collect();
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
    })
}

/// Least-squares line through `values` placed at positions `offset..`.
fn line_fit(values: &[f64], offset: usize) -> (f64, f64) {
    let k = values.len() as f64;
    if values.len() < 2 {
        return (values.first().copied().unwrap_or(0.0), 0.0);
    }
    let xs = (0..values.len()).map(|i| (offset + i) as f64);
    let x_mean = xs.clone().sum::<f64>() / k;
    let y_mean = values.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.zip(values) {
        sxy += (x - x_mean) * (y - y_mean);
        sxx += (x - x_mean).powi(2);
    }
    let slope = sxy / sxx;
    (y_mean - slope * x_mean, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_sine_has_no_residual() {
        let amplitude = 3.0;
        let x: Vec<f64> = (0..36)
            .map(|t| amplitude * (2.0 * PI * t as f64 / 12.0).sin())
            .collect();
        let d = decompose(&x, 12).unwrap();
        let worst = d.residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        assert!(worst < 1e-6 * amplitude, "{worst}");
    }

    #[test]
    fn ramp_has_no_seasonal() {
        let slope = 0.4;
        let x: Vec<f64> = (0..36).map(|t| 50.0 + slope * t as f64).collect();
        let d = decompose(&x, 12).unwrap();
        let worst = d.seasonal.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        assert!(worst < 1e-9 * slope * 36.0, "{worst}");
        for (t, v) in d.trend.iter().enumerate() {
            assert!((v - x[t]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_series() {
        let d = decompose(&[7.5; 36], 12).unwrap();
        assert!(d.trend.iter().all(|v| (v - 7.5).abs() < 1e-12));
        assert!(d.seasonal.iter().all(|v| v.abs() < 1e-12));
        assert!(d.residual.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn components_sum_to_window() {
        let x: Vec<f64> = (0..40).map(|t| ((t * 7919) % 13) as f64 + 0.1 * t as f64).collect();
        let d = decompose(&x, 12).unwrap();
        for t in 0..x.len() {
            assert!((d.trend[t] + d.seasonal[t] + d.residual[t] - x[t]).abs() < 1e-12);
        }
        let season_sum: f64 = d.seasonal[..12].iter().sum();
        assert!(season_sum.abs() < 1e-12);
    }

    #[test]
    fn short_window_rejected() {
        assert!(matches!(
            decompose(&[1.0; 23], 12),
            Err(Error::InsufficientContext { required: 24, actual: 23 })
        ));
    }
}
