use crate::error::Result;
use crate::series::Month;

use super::{Fit, Forecast};

/// Repeats the last `m` observations cyclically; `m = 1` is the naive model.
pub(super) fn seasonal(
    context: &[f64],
    m: usize,
    origin: Month,
    horizon: usize,
    name: &str,
) -> Result<Fit> {
    let n = context.len();
    let last = &context[n - m..];
    let mean = (0..horizon).map(|h| last[h % m]).collect();
    let residuals = (m..n).map(|t| context[t] - context[t - m]).collect();
    Ok(Fit {
        forecast: Forecast::new(origin, mean)?,
        model: name.to_string(),
        residuals,
        candidates: Vec::new(),
        warnings: Vec::new(),
    })
}
