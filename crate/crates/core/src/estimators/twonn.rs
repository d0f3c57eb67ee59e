//! TwoNN: the ratio `ρ = T_2 / T_1` is Pareto(d) under a locally uniform
//! Poisson model, i.e. `log ρ ~ Exp(d)`.
//!
//! Both forms sort the ratios and drop the `⌈f·n⌉` largest before fitting.
//!
//! * Likelihood form: the retained ratios are the lower order statistics of
//!   the full sample, so the maximizer is the type-II censored exponential
//!   estimate `d̂ = r / (Σ_{j≤r} log ρ_(j) + (n - r) log ρ_(r))`, `r` the
//!   retained count. For `f = 0` this is `[mean log ρ]^{-1}`.
//! * Regression form: with `F̂(ρ_(j)) = j / n`, fit
//!   `-log(1 - F̂) = d · log ρ` through the origin. The top point (`F̂ = 1`)
//!   is always excluded.

use super::{check_discard, usable_points, EstimateError, EstimateParams, IdEstimate, Method, ZeroDistancePolicy};
use crate::knn::NeighborTable;
use crate::stats::slope_through_origin;

/// `log(T_2 / T_1)` for every usable point, ascending.
fn sorted_log_ratios(table: &NeighborTable) -> Result<(Vec<f64>, usize), EstimateError> {
    if table.k() < 2 {
        return Err(EstimateError::KTooLarge { k: 2, needed: 2, available: table.k() });
    }
    let (keep, dropped) = usable_points(table, ZeroDistancePolicy::Drop)?;
    let mut logs: Vec<f64> = keep.iter().map(|&i| (table.dist(i, 2) / table.dist(i, 1)).ln()).collect();
    logs.sort_unstable_by(f64::total_cmp);
    Ok((logs, dropped))
}

fn n_discarded(n: usize, f: f64) -> usize {
    (f * n as f64).ceil() as usize
}

pub fn estimate_twonn_mle(table: &NeighborTable, discard_fraction: f64) -> Result<IdEstimate, EstimateError> {
    check_discard(discard_fraction)?;
    let (logs, dropped) = sorted_log_ratios(table)?;
    let n = logs.len();
    let cut = n_discarded(n, discard_fraction);
    if cut >= n {
        return Err(EstimateError::AllDiscarded(n));
    }
    let r = n - cut;
    let total = logs[..r].iter().sum::<f64>() + cut as f64 * logs[r - 1];
    if total <= 0.0 {
        return Err(EstimateError::DegenerateRatios);
    }
    let value = r as f64 / total;
    Ok(IdEstimate {
        method: Method::TwoNnMle,
        value,
        stderr: value / (r as f64).sqrt(),
        per_point: None,
        params: EstimateParams { k: Some(2), discard_fraction: Some(discard_fraction), ..Default::default() },
        n_used: r,
        n_dropped: dropped,
        boundary: false,
    })
}

pub fn estimate_twonn_regression(table: &NeighborTable, discard_fraction: f64) -> Result<IdEstimate, EstimateError> {
    check_discard(discard_fraction)?;
    let (logs, dropped) = sorted_log_ratios(table)?;
    let n = logs.len();
    let cut = n_discarded(n, discard_fraction);
    if cut >= n {
        return Err(EstimateError::AllDiscarded(n));
    }
    // j = 1..=n is the 1-based rank; keep j ≤ n - cut and j < n.
    let last = (n - cut).min(n - 1);
    if last < 3 {
        return Err(EstimateError::TooFewForRegression(last));
    }
    let x = &logs[..last];
    let y: Vec<f64> = (1..=last).map(|j| -(-(j as f64) / n as f64).ln_1p()).collect();
    let slope = slope_through_origin(x, &y).ok_or(EstimateError::DegenerateRatios)?;
    if slope <= 0.0 || !slope.is_finite() {
        return Err(EstimateError::DegenerateRatios);
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let stderr = (rss / (last - 1) as f64 / sxx).sqrt();
    Ok(IdEstimate {
        method: Method::TwoNnRegression,
        value: slope,
        stderr,
        per_point: None,
        params: EstimateParams { k: Some(2), discard_fraction: Some(discard_fraction), ..Default::default() },
        n_used: last,
        n_dropped: dropped,
        boundary: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn ratio_table(ratios: &[f64]) -> NeighborTable {
        let rows: Vec<[f64; 2]> = ratios.iter().map(|&r| [1.0, r]).collect();
        NeighborTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn line_example() {
        // Points {0, 1, 3}: ratios 3, 2, 1.5 with product 9.
        let t = ratio_table(&[3.0, 2.0, 1.5]);
        let est = estimate_twonn_mle(&t, 0.0).unwrap();
        assert_relative_eq!(est.value, 3.0 / 9f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(est.value, 1.365_358_839_940_256_4, epsilon = 1e-12);
    }

    #[test]
    fn constant_e_ratios() {
        let t = ratio_table(&[E; 10]);
        assert_relative_eq!(estimate_twonn_mle(&t, 0.0).unwrap().value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn censoring_uses_threshold_for_discarded_points() {
        // n = 4, f = 0.25: one discarded; logs 1, 2, 3 kept, 3 used for the censored one.
        let t = ratio_table(&[E, E * E, E.powi(3), E.powi(10)]);
        let est = estimate_twonn_mle(&t, 0.25).unwrap();
        assert_relative_eq!(est.value, 3.0 / 9.0, epsilon = 1e-12);
        assert_eq!(est.n_used, 3);
    }

    #[test]
    fn discard_errors() {
        let t = ratio_table(&[2.0, 3.0]);
        assert_eq!(estimate_twonn_mle(&t, 1.0).unwrap_err(), EstimateError::InvalidDiscard(1.0));
        assert_eq!(estimate_twonn_mle(&t, 0.99).unwrap_err(), EstimateError::AllDiscarded(2));
    }

    #[test]
    fn regression_needs_three_points() {
        let t = ratio_table(&[2.0, 3.0, 4.0]);
        assert_eq!(estimate_twonn_regression(&t, 0.0).unwrap_err(), EstimateError::TooFewForRegression(2));
    }

    #[test]
    fn regression_on_pareto_quantiles() {
        // Midpoint quantiles of Pareto(2): ρ = (1 - p)^{-1/2}, p = (j - 1/2) / n.
        let n = 2000;
        let ratios: Vec<f64> = (1..=n).map(|j| (1.0 - (j as f64 - 0.5) / n as f64).powf(-0.5)).collect();
        let est = estimate_twonn_regression(&ratio_table(&ratios), 0.0).unwrap();
        assert!((est.value - 2.0).abs() < 0.05, "slope {}", est.value);
        // Exact quantiles at the empirical CDF levels recover the slope exactly.
        let exact: Vec<f64> = (1..=n).map(|j| (1.0 - j as f64 / n as f64).max(1e-300).powf(-0.5)).collect();
        let est = estimate_twonn_regression(&ratio_table(&exact), 0.1).unwrap();
        assert_relative_eq!(est.value, 2.0, epsilon = 1e-9);
    }
}
