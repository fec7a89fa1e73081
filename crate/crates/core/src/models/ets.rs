//! Additive exponential smoothing with AICc model selection.
//!
//! One-step errors are affine in the initial states for fixed smoothing
//! parameters, so the initial states are concentrated out by least squares
//! and only the smoothing parameters are searched numerically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Month;

use super::optim::{logistic, logit, NelderMead};
use super::{Candidate, Fit, Forecast};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtsKind {
    Simple,
    Holt,
    HoltWinters,
}

impl EtsKind {
    pub fn label(self) -> &'static str {
        match self {
            EtsKind::Simple => "ETS(A,N,N)",
            EtsKind::Holt => "ETS(A,A,N)",
            EtsKind::HoltWinters => "ETS(A,A,A)",
        }
    }

    fn smoothing_params(self) -> usize {
        match self {
            EtsKind::Simple => 1,
            EtsKind::Holt => 2,
            EtsKind::HoltWinters => 3,
        }
    }

    /// Free initial states; seasonal states sum to zero.
    fn initial_states(self, m: usize) -> usize {
        match self {
            EtsKind::Simple => 1,
            EtsKind::Holt => 2,
            EtsKind::HoltWinters => 1 + m,
        }
    }

    fn has_trend(self) -> bool {
        self != EtsKind::Simple
    }

    fn has_season(self) -> bool {
        self == EtsKind::HoltWinters
    }
}

#[derive(Debug, Clone, Copy)]
struct Smoothing {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl Smoothing {
    /// Unconstrained coordinates to 0 < α < 1, 0 < β < α, 0 < γ < 1 − α.
    fn from_free(kind: EtsKind, u: &[f64]) -> Self {
        let alpha = logistic(u[0]);
        let beta = if kind.has_trend() { alpha * logistic(u[1]) } else { 0.0 };
        let gamma = if kind.has_season() {
            (1.0 - alpha) * logistic(u[2])
        } else {
            0.0
        };
        Smoothing { alpha, beta, gamma }
    }

    fn to_free(kind: EtsKind, alpha: f64, beta_frac: f64, gamma_frac: f64) -> Vec<f64> {
        let mut u = vec![logit(alpha)];
        if kind.has_trend() {
            u.push(logit(beta_frac));
        }
        if kind.has_season() {
            u.push(logit(gamma_frac));
        }
        u
    }
}

#[derive(Debug, Clone)]
struct State {
    level: f64,
    trend: f64,
    season: Vec<f64>,
}

/// Runs the error-correction recursions from initial states `x0`
/// (level, trend, first m−1 seasonal states). Returns errors and final state.
fn filter(y: &[f64], kind: EtsKind, m: usize, s: Smoothing, x0: &[f64]) -> (Vec<f64>, State) {
    let mut level = x0[0];
    let mut trend = if kind.has_trend() { x0[1] } else { 0.0 };
    let mut season = vec![0.0; if kind.has_season() { m } else { 1 }];
    if kind.has_season() {
        season[..m - 1].copy_from_slice(&x0[2..m + 1]);
        season[m - 1] = -x0[2..m + 1].iter().sum::<f64>();
    }
    let period = season.len();
    let mut errors = Vec::with_capacity(y.len());
    for (t, &obs) in y.iter().enumerate() {
        let slot = t % period;
        let e = obs - (level + trend + season[slot]);
        level += trend + s.alpha * e;
        trend += s.beta * e;
        if kind.has_season() {
            season[slot] += s.gamma * e;
        }
        errors.push(e);
    }
    (
        errors,
        State {
            level,
            trend,
            season,
        },
    )
}

/// Least-squares initial states for fixed smoothing, with the resulting SSE.
fn concentrate(y: &[f64], kind: EtsKind, m: usize, s: Smoothing) -> (Vec<f64>, f64) {
    let k = kind.initial_states(m);
    let n = y.len();
    let zero = vec![0.0; k];
    let (base, _) = filter(y, kind, m, s, &zero);
    let mut jac = DMatrix::<f64>::zeros(n, k);
    let mut unit = zero.clone();
    for j in 0..k {
        unit[j] = 1.0;
        let (e, _) = filter(y, kind, m, s, &unit);
        for t in 0..n {
            jac[(t, j)] = e[t] - base[t];
        }
        unit[j] = 0.0;
    }
    let rhs = -DVector::from_vec(base);
    let x0 = jac
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map(|v| v.iter().copied().collect::<Vec<_>>())
        .unwrap_or(zero);
    let (e, _) = filter(y, kind, m, s, &x0);
    let sse = e.iter().map(|v| v * v).sum();
    (x0, sse)
}

#[derive(Debug, Clone)]
pub(crate) struct EtsFit {
    pub kind: EtsKind,
    pub aicc: f64,
    errors: Vec<f64>,
    state: State,
}

impl EtsFit {
    fn forecast(&self, horizon: usize, n: usize) -> Vec<f64> {
        let period = self.state.season.len();
        (1..=horizon)
            .map(|h| {
                let season = if self.kind.has_season() {
                    self.state.season[(n + h - 1) % period]
                } else {
                    0.0
                };
                self.state.level + h as f64 * self.state.trend + season
            })
            .collect()
    }
}

fn fit_kind(y: &[f64], kind: EtsKind, m: usize) -> Option<EtsFit> {
    let n = y.len();
    let k = kind.smoothing_params() + kind.initial_states(m) + 1;
    if n <= k + 1 {
        return None;
    }
    let objective = |u: &[f64]| {
        let (_, sse) = concentrate(y, kind, m, Smoothing::from_free(kind, u));
        n as f64 * (sse / n as f64).max(f64::MIN_POSITIVE).ln()
    };
    let nm = NelderMead {
        max_evals: 600,
        f_tol: 1e-10,
        restarts: 2,
    };
    let step = vec![1.0; kind.smoothing_params()];
    let best = [(0.5, 0.1, 0.1), (0.1, 0.1, 0.1), (0.9, 0.5, 0.5)]
        .iter()
        .map(|&(a, b, g)| nm.minimize(objective, &Smoothing::to_free(kind, a, b, g), &step))
        .min_by(|a, b| a.value.total_cmp(&b.value))?;

    let s = Smoothing::from_free(kind, &best.x);
    let (x0, sse) = concentrate(y, kind, m, s);
    let (errors, state) = filter(y, kind, m, s, &x0);
    let sigma2 = (sse / n as f64).max(f64::MIN_POSITIVE);
    let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let kf = k as f64;
    let aicc = -2.0 * loglik + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (n as f64 - kf - 1.0);
    aicc.is_finite().then_some(EtsFit {
        kind,
        aicc,
        errors,
        state,
    })
}

/// Fits every candidate kind and returns them in evaluation order.
pub(crate) fn candidates(y: &[f64], m: usize) -> Vec<EtsFit> {
    let mut kinds = vec![EtsKind::Simple, EtsKind::Holt];
    if m > 1 && y.len() >= 2 * m {
        kinds.push(EtsKind::HoltWinters);
    }
    kinds.into_iter().filter_map(|k| fit_kind(y, k, m)).collect()
}

pub(super) fn auto_ets(context: &[f64], m: usize, origin: Month, horizon: usize) -> Result<Fit> {
    let reference = context[0];
    let y: Vec<f64> = context.iter().map(|v| v - reference).collect();
    let fits = candidates(&y, m);
    let best = fits
        .iter()
        .min_by(|a, b| a.aicc.total_cmp(&b.aicc))
        .ok_or(Error::InsufficientContext {
            required: 4,
            actual: context.len(),
        })?;
    let mean = best
        .forecast(horizon, y.len())
        .into_iter()
        .map(|v| v + reference)
        .collect();
    Ok(Fit {
        forecast: Forecast::new(origin, mean)?,
        model: best.kind.label().to_string(),
        residuals: best.errors.clone(),
        candidates: fits
            .iter()
            .map(|f| Candidate {
                model: f.kind.label().to_string(),
                aicc: f.aicc,
            })
            .collect(),
        warnings: Vec::new(),
    })
}
