//! Windowed complexity profiling of target series.

mod decompose;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{MonthlySeries, Month};

pub use decompose::{decompose, Decomposition};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexityConfig {
    pub season_length: usize,
    pub window_len: usize,
    pub stride: usize,
    pub bins: usize,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            season_length: 12,
            window_len: 36,
            stride: 12,
            bins: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityMetrics {
    pub trend_strength: f64,
    pub seasonality_strength: f64,
    pub residual_variance: f64,
    pub residual_mad: f64,
    pub shannon_entropy: f64,
}

/// Metric names in report order, with `true` where a higher value means a
/// more complex series.
pub const METRICS: [(&str, bool); 5] = [
    ("trend_strength", false),
    ("seasonality_strength", false),
    ("residual_variance", true),
    ("residual_mad", true),
    ("shannon_entropy", true),
];

impl ComplexityMetrics {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.trend_strength,
            self.seasonality_strength,
            self.residual_variance,
            self.residual_mad,
            self.shannon_entropy,
        ]
    }

    fn from_array(a: [f64; 5]) -> Self {
        ComplexityMetrics {
            trend_strength: a[0],
            seasonality_strength: a[1],
            residual_variance: a[2],
            residual_mad: a[3],
            shannon_entropy: a[4],
        }
    }
}

/// Computes the five metrics for one window.
pub fn metrics(window: &[f64], config: &ComplexityConfig) -> Result<ComplexityMetrics> {
    if let Some(i) = window.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite value at index {i}")));
    }
    let d = decompose(window, config.season_length)?;
    let scale = window.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * scale;
    let snap = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|&v| if v.abs() <= tol { 0.0 } else { v })
            .collect()
    };
    let residual = snap(&d.residual);
    let seasonal = snap(&d.seasonal);

    let var_r = variance(&residual);
    let trend_plus: Vec<f64> = d.trend.iter().zip(&residual).map(|(t, r)| t + r).collect();
    let season_plus: Vec<f64> = seasonal.iter().zip(&residual).map(|(s, r)| s + r).collect();

    Ok(ComplexityMetrics {
        trend_strength: strength(var_r, variance(&trend_plus)),
        seasonality_strength: strength(var_r, variance(&season_plus)),
        residual_variance: var_r,
        residual_mad: residual.iter().map(|r| r.abs()).sum::<f64>() / residual.len() as f64,
        shannon_entropy: entropy_of_differences(window, config.bins, tol),
    })
}

fn strength(var_r: f64, var_total: f64) -> f64 {
    if var_total <= 0.0 {
        return 1.0;
    }
    (1.0 - var_r / var_total).clamp(0.0, 1.0)
}

/// Seasonality strength of a whole series, `None` when it is too short to
/// decompose.
pub(crate) fn seasonal_strength(x: &[f64], season_length: usize) -> Option<f64> {
    let cfg = ComplexityConfig {
        season_length,
        ..ComplexityConfig::default()
    };
    metrics(x, &cfg).ok().map(|m| m.seasonality_strength)
}

/// Sample variance (n − 1 denominator).
fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn entropy_of_differences(window: &[f64], bins: usize, tol: f64) -> f64 {
    let diffs: Vec<f64> = window.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.is_empty() || bins < 2 {
        return 0.0;
    }
    let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= tol {
        return 0.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for d in &diffs {
        let b = (((d - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = diffs.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Start offsets of the rolling windows over a series of length `n`.
pub fn window_offsets(n: usize, config: &ComplexityConfig) -> Vec<usize> {
    if n < config.window_len || config.stride == 0 {
        return Vec::new();
    }
    (0..=n - config.window_len).step_by(config.stride).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub start: Month,
    pub metrics: ComplexityMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub category: String,
    pub windows: Vec<WindowMetrics>,
    pub mean: ComplexityMetrics,
    pub std: ComplexityMetrics,
}

/// Profiles a series over its rolling windows.
pub fn profile(series: &MonthlySeries, config: &ComplexityConfig) -> Result<ComplexityProfile> {
    let offsets = window_offsets(series.len(), config);
    if offsets.is_empty() {
        return Err(Error::InsufficientContext {
            required: config.window_len,
            actual: series.len(),
        });
    }
    let values = series.values();
    let windows = offsets
        .iter()
        .map(|&o| {
            Ok(WindowMetrics {
                start: series.start().add_months(o as i64),
                metrics: metrics(&values[o..o + config.window_len], config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    for (k, (m, s)) in mean.iter_mut().zip(std.iter_mut()).enumerate() {
        let column: Vec<f64> = windows.iter().map(|w| w.metrics.as_array()[k]).collect();
        *m = column.iter().sum::<f64>() / column.len() as f64;
        *s = variance(&column).sqrt();
    }
    Ok(ComplexityProfile {
        category: series.id().name().to_string(),
        windows,
        mean: ComplexityMetrics::from_array(mean),
        std: ComplexityMetrics::from_array(std),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedCategory {
    pub category: String,
    /// Per-metric ranks in [`METRICS`] order; 1 is least complex, ties share
    /// the average rank.
    pub metric_ranks: [f64; 5],
    pub mean_rank: f64,
    /// 1 is least complex, n most complex.
    pub overall_rank: usize,
}

/// Ranks categories by average per-metric complexity rank. Ties on the mean
/// rank are broken by the entropy rank, then by category name.
pub fn overall_rank(profiles: &[ComplexityProfile]) -> Result<Vec<RankedCategory>> {
    if let Some(first) = profiles.first() {
        let schedule: Vec<Month> = first.windows.iter().map(|w| w.start).collect();
        for p in &profiles[1..] {
            let other: Vec<Month> = p.windows.iter().map(|w| w.start).collect();
            if other != schedule {
                return Err(Error::Input(format!(
                    "window schedule of `{}` differs from `{}`",
                    p.category, first.category
                )));
            }
        }
    }

    let n = profiles.len();
    let mut ranks = vec![[0.0; 5]; n];
    for (k, &(_, higher_is_complex)) in METRICS.iter().enumerate() {
        let keyed: Vec<f64> = profiles
            .iter()
            .map(|p| {
                let v = p.mean.as_array()[k];
                if higher_is_complex {
                    v
                } else {
                    -v
                }
            })
            .collect();
        for (i, r) in average_ranks(&keyed).into_iter().enumerate() {
            ranks[i][k] = r;
        }
    }

    let mut out: Vec<RankedCategory> = profiles
        .iter()
        .zip(ranks)
        .map(|(p, metric_ranks)| RankedCategory {
            category: p.category.clone(),
            metric_ranks,
            mean_rank: metric_ranks.iter().sum::<f64>() / 5.0,
            overall_rank: 0,
        })
        .collect();
    out.sort_by(|a, b| {
        a.mean_rank
            .total_cmp(&b.mean_rank)
            .then(a.metric_ranks[4].total_cmp(&b.metric_ranks[4]))
            .then_with(|| a.category.cmp(&b.category))
    });
    for (i, r) in out.iter_mut().enumerate() {
        r.overall_rank = i + 1;
    }
    Ok(out)
}

/// Ascending 1-based ranks; equal values share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub config: ComplexityConfig,
    pub profiles: Vec<ComplexityProfile>,
    pub ranking: Vec<RankedCategory>,
}

impl ComplexityReport {
    pub fn build<'a>(
        series: impl IntoIterator<Item = &'a MonthlySeries>,
        config: ComplexityConfig,
    ) -> Result<Self> {
        let profiles = series
            .into_iter()
            .map(|s| profile(s, &config))
            .collect::<Result<Vec<_>>>()?;
        let ranking = overall_rank(&profiles)?;
        Ok(ComplexityReport {
            config,
            profiles,
            ranking,
        })
    }

    pub fn rank_of(&self, category: &str) -> Option<usize> {
        self.ranking
            .iter()
            .find(|r| r.category == category)
            .map(|r| r.overall_rank)
    }

    /// Plain-text table, one row per category ordered by overall rank.
    pub fn to_text(&self) -> String {
        let header = [
            "Category",
            "Trend Strength (↓)",
            "Seasonality Strength (↓)",
            "Residual Variance (↑)",
            "Residual MAD (↑)",
            "Shannon's Entropy (↑)",
            "Overall Rank",
        ];
        let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for r in &self.ranking {
            let p = self
                .profiles
                .iter()
                .find(|p| p.category == r.category)
                .expect("ranked category has a profile");
            let mut row = vec![display_category(&p.category)];
            for (m, s) in p.mean.as_array().iter().zip(p.std.as_array()) {
                row.push(format!("{m:.3} ± {s:.3}"));
            }
            row.push(r.overall_rank.to_string());
            rows.push(row);
        }
        render_table(&rows)
    }

    /// One row per category with means, stds, per-metric ranks and overall rank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category");
        for (name, _) in METRICS {
            let _ = write!(out, ",{name}_mean,{name}_std,{name}_rank");
        }
        out.push_str(",mean_rank,overall_rank\n");
        for r in &self.ranking {
            let p = self
                .profiles
                .iter()
                .find(|p| p.category == r.category)
                .expect("ranked category has a profile");
            out.push_str(&p.category);
            for k in 0..5 {
                let _ = write!(
                    out,
                    ",{:?},{:?},{:?}",
                    p.mean.as_array()[k],
                    p.std.as_array()[k],
                    r.metric_ranks[k]
                );
            }
            let _ = writeln!(out, ",{:?},{}", r.mean_rank, r.overall_rank);
        }
        out
    }

    /// Per-window metric samples, for plotting.
    pub fn windows_csv(&self) -> String {
        let mut out = String::from("category,window_start");
        for (name, _) in METRICS {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for p in &self.profiles {
            for w in &p.windows {
                let _ = write!(out, "{},{}", p.category, w.start.ref_date());
                for v in w.metrics.as_array() {
                    let _ = write!(out, ",{v:?}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// `target_meat` → `Meat`.
pub fn display_category(id: &str) -> String {
    let bare = id.strip_prefix("target_").unwrap_or(id);
    let mut chars = bare.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect::<String>().replace('_', " "),
        None => String::new(),
    }
}

pub(crate) fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s}{}", " ".repeat(widths[c] - s.chars().count())))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-+-"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SeriesId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cfg() -> ComplexityConfig {
        ComplexityConfig::default()
    }

    fn series(name: &str, values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::new(SeriesId::target(name).unwrap(), Month::new(1986, 1).unwrap(), values).unwrap()
    }

    #[test]
    fn strong_trend() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..36)
            .map(|t| 100.0 + 2.0 * t as f64 + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        assert!(metrics(&x, &cfg()).unwrap().trend_strength > 0.99);
    }

    #[test]
    fn white_noise_has_weak_strengths() {
        let (mut ft, mut fs) = (0.0, 0.0);
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..36).map(|_| rng.sample(StandardNormal)).collect();
            let m = metrics(&x, &cfg()).unwrap();
            ft += m.trend_strength;
            fs += m.seasonality_strength;
        }
        assert!(ft / 100.0 < 0.2, "{}", ft / 100.0);
        assert!(fs / 100.0 < 0.2, "{}", fs / 100.0);
    }

    #[test]
    fn constant_series_metrics() {
        let m = metrics(&[42.0; 36], &cfg()).unwrap();
        assert_eq!(m.shannon_entropy, 0.0);
        assert_eq!(m.trend_strength, 1.0);
        assert_eq!(m.residual_variance, 0.0);
    }

    #[test]
    fn window_counts() {
        let full = (2024 - 1986 + 1) * 12;
        assert_eq!(window_offsets(full, &cfg()).len(), 37);
        assert_eq!(window_offsets(full - 3, &cfg()).len(), 36);
        assert_eq!(window_offsets(36, &cfg()).len(), 1);
        assert!(window_offsets(35, &cfg()).is_empty());
    }

    #[test]
    fn dominance_gives_top_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let calm: Vec<f64> = (0..48).map(|t| 100.0 + 0.5 * t as f64).collect();
        let wild: Vec<f64> = (0..48)
            .map(|_| 100.0 + 10.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let report = ComplexityReport::build(
            [&series("target_calm", calm), &series("target_wild", wild)],
            cfg(),
        )
        .unwrap();
        assert_eq!(report.rank_of("target_wild"), Some(2));
        assert_eq!(report.rank_of("target_calm"), Some(1));
    }

    #[test]
    fn identical_series_get_distinct_ranks() {
        let x: Vec<f64> = (0..48).map(|t| (t as f64 * 0.7).sin() + t as f64).collect();
        let report =
            ComplexityReport::build([&series("target_b", x.clone()), &series("target_a", x)], cfg())
                .unwrap();
        assert_eq!(report.rank_of("target_a"), Some(1));
        assert_eq!(report.rank_of("target_b"), Some(2));
    }

    #[test]
    fn schedule_mismatch_is_rejected() {
        let a = series("target_a", vec![1.0; 48]);
        let b = MonthlySeries::new(
            SeriesId::target("target_b").unwrap(),
            Month::new(1987, 1).unwrap(),
            vec![1.0; 48],
        )
        .unwrap();
        let pa = profile(&a, &cfg()).unwrap();
        let pb = profile(&b, &cfg()).unwrap();
        assert!(matches!(overall_rank(&[pa, pb]), Err(Error::Input(_))));
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn text_table_is_ordered_by_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noisy: Vec<f64> = (0..36).map(|_| rng.sample(StandardNormal)).collect();
        let report = ComplexityReport::build(
            [
                &series("target_vegetables", noisy),
                &series("target_dairy", (0..36).map(|t| t as f64).collect()),
            ],
            cfg(),
        )
        .unwrap();
        let text = report.to_text();
        let dairy = text.find("Dairy").unwrap();
        let veg = text.find("Vegetables").unwrap();
        assert!(dairy < veg);
        assert!(text.starts_with("Category"));
        assert_eq!(report.to_csv().lines().count(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn strengths_are_bounded(xs in proptest::collection::vec(-1e3f64..1e3, 36..60)) {
                let m = metrics(&xs, &cfg()).unwrap();
                prop_assert!((0.0..=1.0).contains(&m.trend_strength));
                prop_assert!((0.0..=1.0).contains(&m.seasonality_strength));
                prop_assert!(m.residual_variance >= 0.0 && m.residual_mad >= 0.0);
                prop_assert!(m.shannon_entropy >= 0.0);
            }

            #[test]
            fn shift_and_scale(
                xs in proptest::collection::vec(-100f64..100.0, 36..48),
                c in -50f64..50.0,
                k in 0.5f64..4.0,
            ) {
                let base = metrics(&xs, &cfg()).unwrap();
                let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
                let moved = metrics(&shifted, &cfg()).unwrap();
                let tol = 1e-6 * (1.0 + base.residual_variance);
                prop_assert!((base.residual_variance - moved.residual_variance).abs() < tol);
                prop_assert!((base.residual_mad - moved.residual_mad).abs() < 1e-6 * (1.0 + base.residual_mad));
                prop_assert!((base.trend_strength - moved.trend_strength).abs() < 1e-6);

                let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
                let grown = metrics(&scaled, &cfg()).unwrap();
                prop_assert!((grown.residual_variance - k * k * base.residual_variance).abs()
                    < 1e-6 * (1.0 + grown.residual_variance));
                prop_assert!((grown.residual_mad - k * base.residual_mad).abs()
                    < 1e-6 * (1.0 + grown.residual_mad));
            }

            #[test]
            fn ranks_are_a_permutation(seeds in proptest::collection::vec(any::<u64>(), 1..8)) {
                let all: Vec<MonthlySeries> = seeds
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(*s);
                        let v = (0..48)
                            .map(|_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal))
                            .collect();
                        series(&format!("target_{i}"), v)
                    })
                    .collect();
                let report = ComplexityReport::build(all.iter(), cfg()).unwrap();
                let mut ranks: Vec<usize> = report.ranking.iter().map(|r| r.overall_rank).collect();
                ranks.sort();
                prop_assert_eq!(ranks, (1..=all.len()).collect::<Vec<_>>());
            }
        }
    }
}
