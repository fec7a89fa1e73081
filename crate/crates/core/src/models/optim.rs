//! Derivative-free minimization.

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Restart from the best vertex until a restart no longer improves.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 2000,
            f_tol: 1e-10,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    /// Minimizes `f` from `start` with per-coordinate initial steps `step`.
    /// Non-finite objective values are treated as +infinity.
    pub fn minimize<F>(&self, mut f: F, start: &[f64], step: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut best = Minimum {
            x: start.to_vec(),
            value: eval(start),
            evals: 1,
        };
        if start.is_empty() {
            return best;
        }
        for _ in 0..=self.restarts {
            let budget = self.max_evals.saturating_sub(best.evals);
            if budget == 0 {
                break;
            }
            let run = self.run(&mut eval, &best.x, step, budget);
            let improved = run.value < best.value - self.f_tol.max(1e-12 * best.value.abs());
            let evals = best.evals + run.evals;
            if run.value <= best.value {
                best = Minimum { evals, ..run };
            } else {
                best.evals = evals;
            }
            if !improved {
                break;
            }
        }
        best
    }

    fn run<F>(&self, f: &mut F, start: &[f64], step: &[f64], budget: usize) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = start.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(start.to_vec());
        for i in 0..n {
            let mut v = start.to_vec();
            v[i] += if step[i] != 0.0 { step[i] } else { 0.1 };
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        let mut evals = n + 1;

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        while evals < budget {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            if spread.is_finite() && spread.abs() <= self.f_tol * (1.0 + values[0].abs()) {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = along(-alpha);
            let fr = f(&reflected);
            evals += 1;
            if fr < values[0] {
                let expanded = along(-alpha * gamma);
                let fe = f(&expanded);
                evals += 1;
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
            } else {
                let contracted = if fr < values[n] {
                    along(-alpha * rho)
                } else {
                    along(rho)
                };
                let fc = f(&contracted);
                evals += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = contracted;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let shrunk: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, v)| b + sigma * (v - b))
                            .collect();
                        values[i] = f(&shrunk);
                        simplex[i] = shrunk;
                    }
                    evals += n;
                }
            }
        }
        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            evals,
        }
    }
}

pub(crate) fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub(crate) fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}
