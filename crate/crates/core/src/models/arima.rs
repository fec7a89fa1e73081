//! Seasonal ARIMA with stepwise order search.
//!
//! Orders are chosen by AICc. Each candidate is fitted by conditional sum of
//! squares, then refined on the exact Gaussian likelihood from a Kalman
//! filter. AR and MA polynomials are parameterized through partial
//! autocorrelations so every candidate is stationary and invertible.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::complexity::seasonal_strength;
use crate::error::Result;
use crate::series::Month;

use super::naive;
use super::optim::NelderMead;
use super::{Candidate, Fit, Forecast};

const KPSS_CRITICAL_5PCT: f64 = 0.463;
const SEASONAL_STRENGTH_THRESHOLD: f64 = 0.64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    pub max_p: usize,
    pub max_q: usize,
    pub max_seasonal_p: usize,
    pub max_seasonal_q: usize,
    pub max_d: usize,
    pub max_seasonal_d: usize,
    /// Cap on p + q + P + Q.
    pub max_order: usize,
    /// Cap on the number of models fitted by the stepwise search.
    pub max_models: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_p: 3,
            max_q: 3,
            max_seasonal_p: 1,
            max_seasonal_q: 1,
            max_d: 2,
            max_seasonal_d: 1,
            max_order: 5,
            max_models: 94,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub period: usize,
    pub constant: bool,
}

impl ArimaOrder {
    fn arma_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    fn params(&self) -> usize {
        self.arma_params() + usize::from(self.constant)
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.seasonal_p + self.seasonal_d + self.seasonal_q > 0 {
            write!(
                f,
                "({},{},{})[{}]",
                self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period
            )?;
        }
        if self.constant {
            let what = if self.d + self.seasonal_d == 0 { "mean" } else { "drift" };
            write!(f, " with {what}")?;
        }
        Ok(())
    }
}

/// Durbin–Levinson map from partial autocorrelations in (−1, 1) to the
/// coefficients of a stationary AR polynomial `1 − Σ φ_k B^k`.
fn pacf_to_coef(r: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = phi.clone();
        phi.push(rk);
        for j in 0..k {
            phi[j] = prev[j] - rk * prev[k - 1 - j];
        }
    }
    phi
}

fn bounded(u: &[f64]) -> Vec<f64> {
    u.iter()
        .map(|v| v.tanh().clamp(-1.0 + 1e-8, 1.0 - 1e-8))
        .collect()
}

/// Multiplies `1 + Σ a_i B^i` by `1 + Σ b_j B^{s·j}`.
fn poly_mul(a: &[f64], b: &[f64], s: usize) -> Vec<f64> {
    let len = a.len() + s * b.len();
    let mut out = vec![0.0; len];
    let full_a: Vec<f64> = std::iter::once(1.0).chain(a.iter().copied()).collect();
    let full_b: Vec<f64> = std::iter::once(1.0).chain(b.iter().copied()).collect();
    for (i, ai) in full_a.iter().enumerate() {
        for (j, bj) in full_b.iter().enumerate() {
            let k = i + s * j;
            if k > 0 {
                out[k - 1] += ai * bj;
            }
        }
    }
    out
}

/// Expanded AR coefficients (`w_t = Σ φ_k w_{t−k} + …`) and MA coefficients
/// (`… + e_t + Σ θ_k e_{t−k}`) from free parameters.
fn expand(order: &ArimaOrder, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (p, q, sp) = (order.p, order.q, order.seasonal_p);
    let ar = pacf_to_coef(&bounded(&u[..p]));
    let ma = pacf_to_coef(&bounded(&u[p..p + q]));
    let sar = pacf_to_coef(&bounded(&u[p + q..p + q + sp]));
    let sma = pacf_to_coef(&bounded(&u[p + q + sp..order.arma_params()]));

    let neg = |v: Vec<f64>| v.into_iter().map(|c| -c).collect::<Vec<_>>();
    let phi = neg(poly_mul(&neg(ar), &neg(sar), order.period));
    let theta = poly_mul(&neg(ma), &neg(sma), order.period);
    (trim(phi), trim(theta))
}

fn trim(mut v: Vec<f64>) -> Vec<f64> {
    while v.last() == Some(&0.0) {
        v.pop();
    }
    v
}

/// Coefficients of `(1 − B)^d (1 − B^m)^D`, leading 1 included.
fn diff_poly(d: usize, seasonal_d: usize, m: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let factors = std::iter::repeat_n(1, d).chain(std::iter::repeat_n(m, seasonal_d));
    for lag in factors {
        let mut next = vec![0.0; poly.len() + lag];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + lag] -= c;
        }
        poly = next;
    }
    poly
}

fn difference(x: &[f64], poly: &[f64]) -> Vec<f64> {
    let lag = poly.len() - 1;
    (lag..x.len())
        .map(|t| poly.iter().enumerate().map(|(i, c)| c * x[t - i]).sum())
        .collect()
}

fn integrate(x: &[f64], w_forecast: &[f64], poly: &[f64]) -> Vec<f64> {
    let mut ext = x.to_vec();
    for &w in w_forecast {
        let n = ext.len();
        let carried: f64 = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * ext[n - i])
            .sum();
        ext.push(w - carried);
    }
    ext.split_off(x.len())
}

/// KPSS level-stationarity statistic.
fn kpss(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let e: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut cum = 0.0;
    let mut eta = 0.0;
    for v in &e {
        cum += v;
        eta += cum * cum;
    }
    eta /= (n * n) as f64;
    let lags = ((4.0 * (n as f64 / 100.0).powf(0.25)) as usize).min(n - 1);
    let mut s2 = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for l in 1..=lags {
        let w = 1.0 - l as f64 / (lags + 1) as f64;
        let gamma: f64 = (l..n).map(|t| e[t] * e[t - l]).sum::<f64>() / n as f64;
        s2 += 2.0 * w * gamma;
    }
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if s2 <= 1e-20 * scale * scale {
        return 0.0;
    }
    eta / s2
}

struct Kalman {
    /// Σ v²/F.
    weighted_ss: f64,
    /// Σ ln F.
    log_det: f64,
    innovations: Vec<f64>,
    /// Predicted state for the step after the sample.
    state: Vec<f64>,
    phi: Vec<f64>,
}

impl Kalman {
    fn run(w: &[f64], phi: &[f64], theta: &[f64]) -> Option<Kalman> {
        let r = phi.len().max(theta.len() + 1);
        let mut ph = vec![0.0; r];
        ph[..phi.len()].copy_from_slice(phi);
        let mut rv = vec![0.0; r];
        rv[0] = 1.0;
        rv[1..=theta.len()].copy_from_slice(theta);

        let mut p = initial_cov(&ph, &rv)?;
        let mut a = vec![0.0; r];
        let mut tmp = vec![0.0; r * r];
        let mut innovations = Vec::with_capacity(w.len());
        let (mut weighted_ss, mut log_det) = (0.0, 0.0);

        for &y in w {
            let f = p[0];
            if !(f > 0.0 && f.is_finite()) {
                return None;
            }
            let v = y - a[0];
            innovations.push(v);
            weighted_ss += v * v / f;
            log_det += f.ln();

            let col: Vec<f64> = (0..r).map(|i| p[i * r]).collect();
            for i in 0..r {
                a[i] += col[i] * v / f;
            }
            for i in 0..r {
                for j in 0..r {
                    p[i * r + j] -= col[i] * col[j] / f;
                }
            }

            // a ← T a
            let a0 = a[0];
            for i in 0..r {
                let next = if i + 1 < r { a[i + 1] } else { 0.0 };
                a[i] = ph[i] * a0 + next;
            }
            // P ← T P T' + R R'
            for i in 0..r {
                for j in 0..r {
                    let below = if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
                    tmp[i * r + j] = ph[i] * p[j] + below;
                }
            }
            for i in 0..r {
                for j in 0..r {
                    let right = if j + 1 < r { tmp[i * r + j + 1] } else { 0.0 };
                    p[i * r + j] = tmp[i * r] * ph[j] + right + rv[i] * rv[j];
                }
            }
        }
        Some(Kalman {
            weighted_ss,
            log_det,
            innovations,
            state: a,
            phi: ph,
        })
    }

    fn forecast(&self, horizon: usize) -> Vec<f64> {
        let r = self.state.len();
        let mut a = self.state.clone();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            out.push(a[0]);
            let a0 = a[0];
            for i in 0..r {
                let next = if i + 1 < r { a[i + 1] } else { 0.0 };
                a[i] = self.phi[i] * a0 + next;
            }
        }
        out
    }
}

/// Stationary state covariance `Σ_k T^k R R' T'^k`, truncated once terms
/// become negligible.
fn initial_cov(phi: &[f64], rv: &[f64]) -> Option<Vec<f64>> {
    let r = rv.len();
    let mut p = vec![0.0; r * r];
    let mut g = rv.to_vec();
    let mut trace = 0.0;
    for _ in 0..20_000 {
        let norm: f64 = g.iter().map(|v| v * v).sum();
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] += g[i] * g[j];
            }
        }
        trace += norm;
        if norm <= 1e-14 * trace {
            return Some(p);
        }
        let g0 = g[0];
        for i in 0..r {
            let next = if i + 1 < r { g[i + 1] } else { 0.0 };
            g[i] = phi[i] * g0 + next;
        }
    }
    None
}

/// Conditional sum of squares objective, `n ln(SSE / n)` over the usable
/// sample.
fn css_objective(w: &[f64], phi: &[f64], theta: &[f64]) -> f64 {
    let start = phi.len();
    if w.len() <= start {
        return f64::INFINITY;
    }
    let mut e = vec![0.0; w.len()];
    let mut sse = 0.0;
    for t in start..w.len() {
        let mut pred = 0.0;
        for (i, c) in phi.iter().enumerate() {
            pred += c * w[t - 1 - i];
        }
        for (j, c) in theta.iter().enumerate() {
            if t > j {
                pred += c * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
        sse += e[t] * e[t];
    }
    let n = (w.len() - start) as f64;
    n * (sse / n).max(f64::MIN_POSITIVE).ln()
}

/// Concentrated −2 log-likelihood minus the constant terms.
fn ml_objective(k: &Kalman, n: usize) -> f64 {
    let sigma2 = (k.weighted_ss / n as f64).max(f64::MIN_POSITIVE);
    n as f64 * sigma2.ln() + k.log_det
}

struct ArimaFit {
    order: ArimaOrder,
    aicc: f64,
    phi: Vec<f64>,
    theta: Vec<f64>,
    mu: f64,
}

fn fit_order(w: &[f64], order: ArimaOrder) -> Option<ArimaFit> {
    let n = w.len();
    let k = order.params() + 1;
    if n <= k + 1 {
        return None;
    }
    let arma = order.arma_params();
    let mean = w.iter().sum::<f64>() / n as f64;
    let spread = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();

    let split = |u: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let (phi, theta) = expand(&order, u);
        let mu = if order.constant { u[arma] } else { 0.0 };
        (phi, theta, mu)
    };
    let centred = |mu: f64| -> Vec<f64> { w.iter().map(|v| v - mu).collect() };

    let mut start = vec![0.0; arma];
    let mut step = vec![0.2; arma];
    if order.constant {
        start.push(mean);
        step.push((0.1 * spread).max(1e-6 * (1.0 + mean.abs())));
    }
    let nm = NelderMead {
        max_evals: 200 + 100 * start.len(),
        f_tol: 1e-9,
        restarts: 1,
    };

    if !start.is_empty() {
        let css = nm.minimize(
            |u| {
                let (phi, theta, mu) = split(u);
                css_objective(&centred(mu), &phi, &theta)
            },
            &start,
            &step,
        );
        if css.value.is_finite() {
            start = css.x;
        }
        let ml = nm.minimize(
            |u| {
                let (phi, theta, mu) = split(u);
                Kalman::run(&centred(mu), &phi, &theta)
                    .map(|kf| ml_objective(&kf, n))
                    .unwrap_or(f64::INFINITY)
            },
            &start,
            &step,
        );
        start = ml.x;
    }

    let (phi, theta, mu) = split(&start);
    let kf = Kalman::run(&centred(mu), &phi, &theta)?;
    let sigma2 = (kf.weighted_ss / n as f64).max(f64::MIN_POSITIVE);
    let loglik =
        -0.5 * (n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) + kf.log_det);
    let kf_ = k as f64;
    let aicc = -2.0 * loglik + 2.0 * kf_ + 2.0 * kf_ * (kf_ + 1.0) / (n as f64 - kf_ - 1.0);
    aicc.is_finite().then_some(ArimaFit {
        order,
        aicc,
        phi,
        theta,
        mu,
    })
}

fn choose_seasonal_d(x: &[f64], m: usize, budget: &SearchBudget) -> usize {
    if m <= 1 || budget.max_seasonal_d == 0 || x.len() < 2 * m + 2 {
        return 0;
    }
    match seasonal_strength(x, m) {
        Some(s) if s > SEASONAL_STRENGTH_THRESHOLD => 1,
        _ => 0,
    }
}

fn choose_d(x: &[f64], max_d: usize) -> usize {
    let mut d = 0;
    let mut w = x.to_vec();
    while d < max_d && w.len() > 3 && kpss(&w) > KPSS_CRITICAL_5PCT {
        w = difference(&w, &diff_poly(1, 0, 1));
        d += 1;
    }
    d
}

struct Search<'a> {
    w: &'a [f64],
    budget: &'a SearchBudget,
    base: ArimaOrder,
    seasonal: bool,
    visited: HashSet<ArimaOrder>,
    tried: Vec<Candidate>,
}

impl Search<'_> {
    fn admissible(&self, o: &ArimaOrder) -> bool {
        let b = self.budget;
        o.p <= b.max_p
            && o.q <= b.max_q
            && o.seasonal_p <= if self.seasonal { b.max_seasonal_p } else { 0 }
            && o.seasonal_q <= if self.seasonal { b.max_seasonal_q } else { 0 }
            && o.arma_params() <= b.max_order
            && (!o.constant || o.d + o.seasonal_d <= 1)
    }

    fn try_order(&mut self, o: ArimaOrder) -> Option<ArimaFit> {
        if !self.admissible(&o) || self.visited.contains(&o) || self.visited.len() >= self.budget.max_models {
            return None;
        }
        self.visited.insert(o);
        let fit = fit_order(self.w, o)?;
        self.tried.push(Candidate {
            model: o.to_string(),
            aicc: fit.aicc,
        });
        Some(fit)
    }

    fn with(&self, p: usize, q: usize, sp: usize, sq: usize, constant: bool) -> ArimaOrder {
        ArimaOrder {
            p,
            q,
            seasonal_p: sp,
            seasonal_q: sq,
            constant,
            ..self.base
        }
    }

    fn run(&mut self) -> Option<ArimaFit> {
        let c = self.base.constant;
        let s = usize::from(self.seasonal);
        let starts = [
            self.with(2.min(self.budget.max_p), 2.min(self.budget.max_q), s, s, c),
            self.with(0, 0, 0, 0, c),
            self.with(1.min(self.budget.max_p), 0, s, 0, c),
            self.with(0, 1.min(self.budget.max_q), 0, s, c),
        ];
        let mut best: Option<ArimaFit> = None;
        for o in starts {
            if let Some(f) = self.try_order(o) {
                if best.as_ref().is_none_or(|b| f.aicc < b.aicc) {
                    best = Some(f);
                }
            }
        }
        let mut best = best?;
        loop {
            let mut improved = false;
            for o in self.neighbours(&best.order) {
                if let Some(f) = self.try_order(o) {
                    if f.aicc < best.aicc {
                        best = f;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                return Some(best);
            }
        }
    }

    fn neighbours(&self, o: &ArimaOrder) -> Vec<ArimaOrder> {
        let step = |v: usize, d: i32| -> Option<usize> { v.checked_add_signed(d as isize) };
        let mut out = Vec::new();
        let moves: [(i32, i32, i32, i32); 16] = [
            (0, 0, -1, 0),
            (0, 0, 1, 0),
            (0, 0, 0, -1),
            (0, 0, 0, 1),
            (0, 0, -1, -1),
            (0, 0, 1, 1),
            (0, 0, -1, 1),
            (0, 0, 1, -1),
            (-1, 0, 0, 0),
            (1, 0, 0, 0),
            (0, -1, 0, 0),
            (0, 1, 0, 0),
            (-1, -1, 0, 0),
            (1, 1, 0, 0),
            (-1, 1, 0, 0),
            (1, -1, 0, 0),
        ];
        for (dp, dq, dsp, dsq) in moves {
            if let (Some(p), Some(q), Some(sp), Some(sq)) = (
                step(o.p, dp),
                step(o.q, dq),
                step(o.seasonal_p, dsp),
                step(o.seasonal_q, dsq),
            ) {
                out.push(self.with(p, q, sp, sq, o.constant));
            }
        }
        if o.d + o.seasonal_d <= 1 {
            out.push(ArimaOrder {
                constant: !o.constant,
                ..*o
            });
        }
        out
    }
}

pub(super) fn auto_arima(
    context: &[f64],
    m: usize,
    budget: &SearchBudget,
    origin: Month,
    horizon: usize,
) -> Result<Fit> {
    let n = context.len();
    if context.iter().all(|v| *v == context[0]) {
        return Ok(Fit {
            forecast: Forecast::new(origin, vec![context[0]; horizon])?,
            model: "ARIMA(0,0,0) with mean".into(),
            residuals: vec![0.0; n],
            candidates: Vec::new(),
            warnings: Vec::new(),
        });
    }

    let seasonal_d = choose_seasonal_d(context, m, budget);
    let seasonal_w = difference(context, &diff_poly(0, seasonal_d, m));
    let d = choose_d(&seasonal_w, budget.max_d);
    let poly = diff_poly(d, seasonal_d, m);
    let w = difference(context, &poly);

    let base = ArimaOrder {
        p: 0,
        d,
        q: 0,
        seasonal_p: 0,
        seasonal_d,
        seasonal_q: 0,
        period: m,
        constant: d + seasonal_d <= 1,
    };
    let mut search = Search {
        w: &w,
        budget,
        base,
        seasonal: m > 1 && w.len() > 2 * m,
        visited: HashSet::new(),
        tried: Vec::new(),
    };
    let chosen = search.run();
    let candidates = std::mem::take(&mut search.tried);

    let outcome = chosen.and_then(|fit| {
        let centred: Vec<f64> = w.iter().map(|v| v - fit.mu).collect();
        let kf = Kalman::run(&centred, &fit.phi, &fit.theta)?;
        let w_fc: Vec<f64> = kf.forecast(horizon).iter().map(|v| v + fit.mu).collect();
        let mean = integrate(context, &w_fc, &poly);
        mean.iter()
            .all(|v| v.is_finite())
            .then_some((fit.order, mean, kf.innovations))
    });

    match outcome {
        Some((order, mean, residuals)) => Ok(Fit {
            forecast: Forecast::new(origin, mean)?,
            model: order.to_string(),
            residuals,
            candidates,
            warnings: Vec::new(),
        }),
        None => {
            let period = if n >= m { m } else { 1 };
            let mut fit = naive::seasonal(context, period, origin, horizon, "SeasonalNaive")?;
            fit.candidates = candidates;
            fit.warnings.push(format!(
                "auto_arima found no usable model on {n} observations; fell back to seasonal_naive"
            ));
            Ok(fit)
        }
    }
}
