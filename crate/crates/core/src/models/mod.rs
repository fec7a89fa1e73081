//! In-process statistical forecasters.

mod arima;
mod ets;
mod naive;
mod optim;
mod quantiles;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Month;

pub use arima::{ArimaOrder, SearchBudget};
pub use ets::EtsKind;
pub use optim::{Minimum, NelderMead};
pub use quantiles::{empirical_quantile, quantiles_from_residuals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Naive,
    SeasonalNaive,
    AutoEts,
    AutoArima,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Naive,
        Family::SeasonalNaive,
        Family::AutoEts,
        Family::AutoArima,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Naive => "naive",
            Family::SeasonalNaive => "seasonal_naive",
            Family::AutoEts => "auto_ets",
            Family::AutoArima => "auto_arima",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub family: Family,
    #[serde(default = "default_season")]
    pub season_length: usize,
    #[serde(default)]
    pub budget: SearchBudget,
}

fn default_season() -> usize {
    12
}

impl ForecasterSpec {
    pub fn new(family: Family) -> Self {
        ForecasterSpec {
            family,
            season_length: 12,
            budget: SearchBudget::default(),
        }
    }

    pub fn with_season_length(mut self, season_length: usize) -> Self {
        self.season_length = season_length;
        self
    }

    /// Smallest context the family accepts.
    pub fn min_context(&self) -> usize {
        let m = self.season_length.max(1);
        match self.family {
            Family::Naive => 1,
            Family::SeasonalNaive => m,
            Family::AutoEts | Family::AutoArima => (2 * m).max(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBand {
    pub level: f64,
    pub values: Vec<f64>,
}

/// Point path for the `horizon` months after `origin`, with optional
/// quantile bands sorted by level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub origin: Month,
    pub mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantiles: Vec<QuantileBand>,
}

impl Forecast {
    pub fn new(origin: Month, mean: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Input("forecast horizon must be at least 1".into()));
        }
        if let Some(i) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite forecast at step {}", i + 1)));
        }
        Ok(Forecast {
            origin,
            mean,
            quantiles: Vec::new(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn months(&self) -> Vec<Month> {
        (1..=self.horizon() as i64)
            .map(|k| self.origin.add_months(k))
            .collect()
    }

    pub fn band(&self, level: f64) -> Option<&[f64]> {
        self.quantiles
            .iter()
            .find(|b| (b.level - level).abs() < 1e-12)
            .map(|b| b.values.as_slice())
    }

    /// Attaches bands after checking levels, lengths, finiteness and
    /// per-step monotonicity in level.
    pub fn with_quantiles(mut self, mut bands: Vec<QuantileBand>) -> Result<Self> {
        bands.sort_by(|a, b| a.level.total_cmp(&b.level));
        for (i, b) in bands.iter().enumerate() {
            if !(b.level > 0.0 && b.level < 1.0) {
                return Err(Error::Quantile(format!("level {} outside (0, 1)", b.level)));
            }
            if i > 0 && bands[i - 1].level == b.level {
                return Err(Error::Quantile(format!("duplicate level {}", b.level)));
            }
            if b.values.len() != self.horizon() {
                return Err(Error::Quantile(format!(
                    "band {} has {} values for horizon {}",
                    b.level,
                    b.values.len(),
                    self.horizon()
                )));
            }
            if b.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Quantile(format!("band {} is not finite", b.level)));
            }
            if i > 0 {
                let lower = &bands[i - 1].values;
                if let Some(t) = (0..self.horizon()).find(|&t| lower[t] > b.values[t]) {
                    return Err(Error::Quantile(format!(
                        "bands {} and {} cross at step {}",
                        bands[i - 1].level,
                        b.level,
                        t + 1
                    )));
                }
            }
        }
        self.quantiles = bands;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: String,
    pub aicc: f64,
}

/// A fitted model's forecast plus the diagnostics callers may want.
#[derive(Debug, Clone)]
pub struct Fit {
    pub forecast: Forecast,
    /// Description of the chosen model, e.g. `ETS(A,A,A)`.
    pub model: String,
    /// In-sample one-step errors.
    pub residuals: Vec<f64>,
    /// Every candidate evaluated during automatic selection.
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
}

pub fn fit_predict(
    spec: &ForecasterSpec,
    context: &[f64],
    origin: Month,
    horizon: usize,
) -> Result<Forecast> {
    fit(spec, context, origin, horizon).map(|f| f.forecast)
}

pub fn fit(spec: &ForecasterSpec, context: &[f64], origin: Month, horizon: usize) -> Result<Fit> {
    if spec.season_length == 0 {
        return Err(Error::Input("season_length must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::Input("horizon must be at least 1".into()));
    }
    if let Some(i) = context.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite context value at index {i}")));
    }
    let required = spec.min_context();
    if context.len() < required {
        return Err(Error::InsufficientContext {
            required,
            actual: context.len(),
        });
    }
    let m = spec.season_length;
    match spec.family {
        Family::Naive => naive::seasonal(context, 1, origin, horizon, "Naive"),
        Family::SeasonalNaive => naive::seasonal(context, m, origin, horizon, "SeasonalNaive"),
        Family::AutoEts => ets::auto_ets(context, m, origin, horizon),
        Family::AutoArima => arima::auto_arima(context, m, &spec.budget, origin, horizon),
    }
}

/// Fits, then attaches residual-based bands at `levels`. Falls back to a
/// point forecast with a warning when residuals are too few.
pub fn fit_with_quantiles(
    spec: &ForecasterSpec,
    context: &[f64],
    origin: Month,
    horizon: usize,
    levels: &[f64],
) -> Result<Fit> {
    let mut fitted = fit(spec, context, origin, horizon)?;
    if levels.is_empty() {
        return Ok(fitted);
    }
    match quantiles_from_residuals(&fitted.forecast, &fitted.residuals, levels) {
        Ok(f) => fitted.forecast = f,
        Err(Error::Quantile(msg)) => fitted.warnings.push(format!("no quantile bands: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(fitted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> Month {
        Month::new(2017, 12).unwrap()
    }

    #[test]
    fn naive_repeats_last_value() {
        let f = fit_predict(&ForecasterSpec::new(Family::Naive), &[70.1, 71.5, 72.9], origin(), 3)
            .unwrap();
        assert_eq!(f.mean, vec![72.9, 72.9, 72.9]);
        assert_eq!(f.months()[0], Month::new(2018, 1).unwrap());
    }

    #[test]
    fn validation_errors() {
        let spec = ForecasterSpec::new(Family::AutoEts);
        assert!(matches!(
            fit_predict(&spec, &[1.0; 23], origin(), 3),
            Err(Error::InsufficientContext { required: 24, actual: 23 })
        ));
        assert!(matches!(
            fit_predict(&spec, &[1.0, f64::NAN], origin(), 3),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            fit_predict(&ForecasterSpec::new(Family::Naive), &[1.0], origin(), 0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn crossing_bands_rejected() {
        let f = Forecast::new(origin(), vec![1.0, 2.0]).unwrap();
        let bands = vec![
            QuantileBand { level: 0.1, values: vec![0.0, 2.5] },
            QuantileBand { level: 0.9, values: vec![2.0, 2.4] },
        ];
        assert!(matches!(f.with_quantiles(bands), Err(Error::Quantile(_))));
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("prophet".parse::<Family>().is_err());
    }

    #[test]
    fn spec_from_toml_uses_defaults() {
        let spec: ForecasterSpec = toml::from_str("family = \"auto_arima\"").unwrap();
        assert_eq!(spec.season_length, 12);
        assert_eq!(spec.budget, SearchBudget::default());
    }
}
