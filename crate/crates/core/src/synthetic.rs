//! Seeded synthetic CPI-like dataset for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::catalog::{bundled_variables, CATEGORIES};
use crate::error::Result;
use crate::series::{Dataset, Month, MonthlySeries, SeriesId};

/// Nine targets plus every catalogued regressor over `start..=end`.
/// Targets are trend + seasonality + AR(1) noise rounded to one decimal;
/// regressors are seasonal random walks rounded to three decimals.
pub fn synthetic_dataset(seed: u64, start: Month, end: Month) -> Result<Dataset> {
    let n = (end.months_since(start) + 1).max(1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::new();
    for (k, name) in CATEGORIES.iter().enumerate() {
        let growth = 0.12 + 0.02 * k as f64;
        let amplitude = 0.2 + 0.35 * k as f64;
        let noise = 0.1 + 0.15 * k as f64;
        let mut ar = 0.0;
        let values = (0..n)
            .map(|t| {
                ar = 0.6 * ar + noise * rng.sample::<f64, _>(StandardNormal);
                let season = amplitude * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin();
                round(60.0 + growth * t as f64 + season + ar, 1)
            })
            .collect();
        series.push(MonthlySeries::new(SeriesId::target(*name)?, start, values)?);
    }
    for v in bundled_variables() {
        let drift = rng.random_range(-0.05..0.15);
        let amplitude = rng.random_range(0.0..2.0);
        let mut level = 100.0;
        let values = (0..n)
            .map(|t| {
                level += drift + 0.5 * rng.sample::<f64, _>(StandardNormal);
                let season = amplitude * (2.0 * std::f64::consts::PI * t as f64 / 12.0).cos();
                round((level + season).max(1.0), 3)
            })
            .collect();
        series.push(MonthlySeries::new(SeriesId::regressor(v.id)?, start, values)?);
    }
    Dataset::new(series)
}

fn round(v: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (v * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let start = Month::new(1986, 1).unwrap();
        let end = Month::new(2024, 12).unwrap();
        let a = synthetic_dataset(7, start, end).unwrap();
        let b = synthetic_dataset(7, start, end).unwrap();
        assert_eq!(a.len(), 39);
        assert_eq!(a.targets().count(), 9);
        assert_eq!(a.get("target_meat").unwrap().len(), 468);
        assert_eq!(a.get("target_meat"), b.get("target_meat"));
        assert!(a.iter().all(|s| s.values().iter().all(|v| *v > 0.0)));
    }
}
