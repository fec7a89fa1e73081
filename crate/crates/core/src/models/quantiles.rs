use crate::error::{Error, Result};

use super::{Forecast, QuantileBand};

pub const MIN_RESIDUALS: usize = 10;

/// Linear-interpolation sample quantile (the common "type 7" definition).
/// `sorted` must be ascending and non-empty.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Adds bands at `levels`: the mean path plus the empirical residual
/// quantile scaled by √h at lead time h.
pub fn quantiles_from_residuals(
    point: &Forecast,
    residuals: &[f64],
    levels: &[f64],
) -> Result<Forecast> {
    if residuals.len() < MIN_RESIDUALS {
        return Err(Error::Quantile(format!(
            "need at least {MIN_RESIDUALS} residuals, got {}",
            residuals.len()
        )));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::Quantile("residuals must be finite".into()));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);

    let bands = levels
        .iter()
        .map(|&level| {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::Quantile(format!("level {level} outside (0, 1)")));
            }
            let offset = empirical_quantile(&sorted, level);
            let values = point
                .mean
                .iter()
                .enumerate()
                .map(|(i, m)| m + offset * ((i + 1) as f64).sqrt())
                .collect();
            Ok(QuantileBand { level, values })
        })
        .collect::<Result<Vec<_>>>()?;
    point.clone().with_quantiles(bands)
}
