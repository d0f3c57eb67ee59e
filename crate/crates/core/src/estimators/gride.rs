//! Gride: ratios of non-consecutive neighbor distances, `μ = T_2k / T_k`.
//!
//! Under a locally homogeneous Poisson process in `d` dimensions the volumes
//! `ω_d T_j^d` are arrival times of a unit-rate process, so
//! `T_k^d / T_2k^d = μ^{-d}` is the ratio `G_k / (G_k + G'_k)` of two
//! independent Gamma(k) variables, i.e. Beta(k, k). Changing variables gives
//! the per-sample log density
//!
//! ```text
//! log d + (k-1) log(μ^d - 1) - (d(2k-1) + 1) log μ - log B(k, k)
//! ```
//!
//! For `k = 1` this is the Pareto(d) density used by TwoNN.
//!
//! The pooled log-likelihood is strictly concave in `d`: its derivative
//!
//! ```text
//! n/d + (k-1) Σ log μ / (1 - μ^{-d}) - (2k-1) Σ log μ
//! ```
//!
//! is a sum of decreasing terms and tends to `+∞` as `d → 0`. The maximizer
//! is found by bisection on the sign of that derivative over `(0, d_max]`,
//! run to full double precision.

use serde::{Deserialize, Serialize};

use super::{usable_points, EstimateError, EstimateParams, IdEstimate, Method, ZeroDistancePolicy};
use crate::knn::NeighborTable;
use crate::stats::Summary;

/// Scales `k = 1, 2, …, 32`: ratios `2/1` up to `64/32`.
pub const DEFAULT_GRIDE_SCALES: &[usize] = &[1, 2, 4, 8, 16, 32];

/// `log B(k, k) = 2 log Γ(k) - log Γ(2k)` for integer `k ≥ 1`.
pub fn log_beta_kk(k: usize) -> f64 {
    let log_fact = |m: usize| (2..=m).map(|i| (i as f64).ln()).sum::<f64>();
    2.0 * log_fact(k - 1) - log_fact(2 * k - 1)
}

/// Pooled log-likelihood of the ratios `μ_i` at dimension `d`.
pub fn gride_log_likelihood(ratios: &[f64], k: usize, d: f64) -> f64 {
    let lb = log_beta_kk(k);
    let kf = k as f64;
    ratios
        .iter()
        .map(|&mu| {
            let lm = mu.ln();
            let tail = if k > 1 { (kf - 1.0) * (d * lm + (-(-d * lm).exp_m1()).ln()) } else { 0.0 };
            d.ln() + tail - (d * (2.0 * kf - 1.0) + 1.0) * lm - lb
        })
        .sum()
}

/// Derivative of [`gride_log_likelihood`] with respect to `d`, on `log μ` values.
fn score(log_ratios: &[f64], sum_log: f64, k: usize, d: f64) -> f64 {
    let kf = k as f64;
    let mut s = log_ratios.len() as f64 / d - (2.0 * kf - 1.0) * sum_log;
    if k > 1 {
        let tail: f64 = log_ratios
            .iter()
            .map(|&lm| if lm > 0.0 { lm / -(-d * lm).exp_m1() } else { 1.0 / d })
            .sum();
        s += (kf - 1.0) * tail;
    }
    s
}

/// Maximum-likelihood dimension for ratios `μ_i ≥ 1` at scale `k`.
///
/// Returns `(d̂, observed-information stderr, hit_upper_bound)`.
pub fn gride_mle_from_ratios(ratios: &[f64], k: usize, d_max: f64) -> Result<(f64, f64, bool), EstimateError> {
    if k == 0 {
        return Err(EstimateError::InvalidK(k));
    }
    if !(d_max > 0.0 && d_max.is_finite()) {
        return Err(EstimateError::InvalidDMax(d_max));
    }
    if ratios.is_empty() {
        return Err(EstimateError::NoUsablePoints);
    }
    let logs: Vec<f64> = ratios.iter().map(|m| m.ln().max(0.0)).collect();
    let sum_log: f64 = logs.iter().sum();
    if sum_log <= 0.0 {
        return Err(EstimateError::DegenerateRatios);
    }
    let s = |d: f64| score(&logs, sum_log, k, d);

    let (d_hat, boundary) = if s(d_max) >= 0.0 {
        (d_max, true)
    } else {
        let mut hi = d_max;
        let mut lo = d_max;
        while s(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Err(EstimateError::DegenerateRatios);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if s(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), false)
    };

    let h = 1e-4 * d_hat;
    let info = -(s(d_hat + h) - s(d_hat - h)) / (2.0 * h);
    let stderr = if info > 0.0 { info.sqrt().recip() } else { f64::NAN };
    Ok((d_hat, stderr, boundary))
}

/// Gride estimate at scale `k` from a table with at least `2k` neighbors.
pub fn estimate_gride(table: &NeighborTable, k: usize, d_max: f64) -> Result<IdEstimate, EstimateError> {
    if k == 0 {
        return Err(EstimateError::InvalidK(k));
    }
    if 2 * k > table.k() {
        return Err(EstimateError::KTooLarge { k, needed: 2 * k, available: table.k() });
    }
    let (keep, dropped) = usable_points(table, ZeroDistancePolicy::Drop)?;
    let ratios: Vec<f64> = keep.iter().map(|&i| table.dist(i, 2 * k) / table.dist(i, k)).collect();
    let (value, stderr, boundary) = gride_mle_from_ratios(&ratios, k, d_max)?;
    Ok(IdEstimate {
        method: Method::Gride,
        value,
        stderr,
        per_point: None,
        params: EstimateParams { k: Some(k), d_max: Some(d_max), ..Default::default() },
        n_used: keep.len(),
        n_dropped: dropped,
        boundary,
    })
}

/// Gride estimates at several scales and their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrideMultiscale {
    pub scales: Vec<usize>,
    pub estimates: Vec<IdEstimate>,
    pub average: f64,
}

impl GrideMultiscale {
    /// Collapses to one estimate whose value is the cross-scale average and
    /// whose stderr is the spread of the per-scale values.
    pub fn summary_estimate(&self) -> IdEstimate {
        let spread = Summary::of(self.estimates.iter().map(|e| e.value));
        let first = &self.estimates[0];
        IdEstimate {
            method: Method::Gride,
            value: self.average,
            stderr: spread.stderr,
            per_point: None,
            params: EstimateParams { k: None, d_max: first.params.d_max, ..Default::default() },
            n_used: first.n_used,
            n_dropped: first.n_dropped,
            boundary: self.estimates.iter().any(|e| e.boundary),
        }
    }
}

pub fn gride_multiscale(table: &NeighborTable, scales: &[usize], d_max: f64) -> Result<GrideMultiscale, EstimateError> {
    if scales.is_empty() {
        return Err(EstimateError::InvalidK(0));
    }
    let estimates = scales
        .iter()
        .map(|&k| estimate_gride(table, k, d_max))
        .collect::<Result<Vec<_>, _>>()?;
    let average = estimates.iter().map(|e| e.value).sum::<f64>() / estimates.len() as f64;
    Ok(GrideMultiscale { scales: scales.to_vec(), estimates, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_beta_values() {
        // B(1,1) = 1, B(2,2) = 1/6, B(3,3) = 1/30.
        assert_eq!(log_beta_kk(1), 0.0);
        assert_relative_eq!(log_beta_kk(2), (1.0f64 / 6.0).ln(), epsilon = 1e-14);
        assert_relative_eq!(log_beta_kk(3), (1.0f64 / 30.0).ln(), epsilon = 1e-14);
    }

    #[test]
    fn density_integrates_to_one() {
        // ∫_1^∞ f(μ) dμ with μ = e^t, dμ = e^t dt, by the trapezoid rule.
        for k in 1..=4 {
            for &d in &[0.7, 3.0, 9.0] {
                let h: f64 = 1e-4;
                let mut total = 0.0;
                let mut t = h;
                while t < 60.0 / d {
                    let mu = t.exp();
                    total += gride_log_likelihood(&[mu], k, d).exp() * mu * h;
                    t += h;
                }
                assert!((total - 1.0).abs() < 1e-3, "k={k} d={d} mass {total}");
            }
        }
    }

    #[test]
    fn k1_matches_closed_form() {
        let ratios = [1.3, 2.0, 1.1, 4.5, 1.7];
        let closed = ratios.len() as f64 / ratios.iter().map(|r: &f64| r.ln()).sum::<f64>();
        let (d, _, boundary) = gride_mle_from_ratios(&ratios, 1, 100.0).unwrap();
        assert!(!boundary);
        assert_relative_eq!(d, closed, max_relative = 1e-13);
    }

    #[test]
    fn maximizer_beats_neighbors() {
        let ratios = [1.2, 1.5, 1.05, 2.2, 1.33, 1.8, 1.1];
        let (d, _, _) = gride_mle_from_ratios(&ratios, 3, 1e3).unwrap();
        let l = |x| gride_log_likelihood(&ratios, 3, x);
        assert!(l(d) >= l(d * 1.001));
        assert!(l(d) >= l(d * 0.999));
    }

    #[test]
    fn boundary_flag() {
        let ratios = [1.0001, 1.0002, 1.0001];
        let (d, _, boundary) = gride_mle_from_ratios(&ratios, 1, 5.0).unwrap();
        assert!(boundary);
        assert_eq!(d, 5.0);
    }

    #[test]
    fn errors() {
        let t = NeighborTable::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(estimate_gride(&t, 2, 10.0).unwrap_err(), EstimateError::KTooLarge { k: 2, needed: 4, available: 3 });
        assert_eq!(estimate_gride(&t, 0, 10.0).unwrap_err(), EstimateError::InvalidK(0));
        assert_eq!(estimate_gride(&t, 1, -1.0).unwrap_err(), EstimateError::InvalidDMax(-1.0));
        let flat = NeighborTable::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(estimate_gride(&flat, 1, 10.0).unwrap_err(), EstimateError::DegenerateRatios);
    }

    #[test]
    fn single_scale_average_is_that_estimate() {
        let t = NeighborTable::from_rows(&[[1.0, 2.0], [1.0, 1.5], [1.0, 3.0]]).unwrap();
        let ms = gride_multiscale(&t, &[1], 50.0).unwrap();
        assert_eq!(ms.average, ms.estimates[0].value);
    }
}
