//! Levina–Bickel maximum-likelihood estimator.
//!
//! Per point, with `k ≥ 2` neighbors:
//!
//! ```text
//! d̂(x) = [ 1/(k-1) · Σ_{i<k} log(T_k(x) / T_i(x)) ]^{-1}
//! ```
//!
//! The global value averages the *inverse* local estimates and inverts the
//! result, which is the same as pooling every log-ratio term. The naive
//! arithmetic mean of `d̂(x)` is available through [`MleAggregation`].

use serde::{Deserialize, Serialize};

use super::{usable_points, EstimateError, EstimateParams, IdEstimate, Method, ZeroDistancePolicy};
use crate::knn::NeighborTable;
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MleAggregation {
    /// `[mean_i d̂(x_i)^{-1}]^{-1}`
    #[default]
    InverseMean,
    /// `mean_i d̂(x_i)`
    ArithmeticMean,
}

pub fn estimate_mle(table: &NeighborTable, k: usize) -> Result<IdEstimate, EstimateError> {
    estimate_mle_with(table, k, MleAggregation::InverseMean, ZeroDistancePolicy::Drop)
}

pub fn estimate_mle_with(
    table: &NeighborTable,
    k: usize,
    aggregation: MleAggregation,
    policy: ZeroDistancePolicy,
) -> Result<IdEstimate, EstimateError> {
    if k < 2 {
        return Err(EstimateError::InvalidK(k));
    }
    if k > table.k() {
        return Err(EstimateError::KTooLarge { k, needed: k, available: table.k() });
    }
    let (keep, dropped) = usable_points(table, policy)?;

    // Inverse local estimates: mean log-ratio per point.
    let inverse: Vec<f64> = keep
        .iter()
        .map(|&i| {
            let row = &table.row(i)[..k];
            let tk = row[k - 1];
            row[..k - 1].iter().map(|&ti| (tk / ti).ln()).sum::<f64>() / (k - 1) as f64
        })
        .collect();
    let per_point: Vec<f64> = inverse.iter().map(|v| 1.0 / v).collect();

    let (value, stderr) = match aggregation {
        MleAggregation::InverseMean => {
            let m: Moments = inverse.iter().copied().collect();
            let mean = m.mean();
            if mean <= 0.0 {
                return Err(EstimateError::DegenerateRatios);
            }
            // Delta method: Var(1/m) ≈ Var(m) / m^4.
            (1.0 / mean, m.summary().stderr / (mean * mean))
        }
        MleAggregation::ArithmeticMean => {
            if per_point.iter().any(|v| !v.is_finite()) {
                return Err(EstimateError::DegenerateRatios);
            }
            let s = per_point.iter().copied().collect::<Moments>().summary();
            (s.mean, s.stderr)
        }
    };

    Ok(IdEstimate {
        method: Method::Mle,
        value,
        stderr,
        per_point: Some(per_point),
        params: EstimateParams { k: Some(k), aggregation: Some(aggregation), ..Default::default() },
        n_used: keep.len(),
        n_dropped: dropped,
        boundary: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn unit_log_ratio_gives_one() {
        let t = NeighborTable::from_rows(&[[1.0, E]]).unwrap();
        let est = estimate_mle(&t, 2).unwrap();
        assert_relative_eq!(est.per_point.as_ref().unwrap()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(est.value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fifth_log_ratio_gives_five() {
        let t = NeighborTable::from_rows(&[[1.0, E.powf(0.2)]]).unwrap();
        assert_relative_eq!(estimate_mle(&t, 2).unwrap().per_point.unwrap()[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregations_differ_as_expected() {
        // Local estimates 1 and 5: inverse mean gives 1/((1 + 0.2)/2) = 5/3, arithmetic gives 3.
        let t = NeighborTable::from_rows(&[[1.0, E], [1.0, E.powf(0.2)]]).unwrap();
        assert_relative_eq!(estimate_mle(&t, 2).unwrap().value, 5.0 / 3.0, epsilon = 1e-12);
        let naive = estimate_mle_with(&t, 2, MleAggregation::ArithmeticMean, ZeroDistancePolicy::Drop).unwrap();
        assert_relative_eq!(naive.value, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        let t = NeighborTable::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(estimate_mle(&t, 3).unwrap_err(), EstimateError::KTooLarge { k: 3, needed: 3, available: 2 });
        assert_eq!(estimate_mle(&t, 1).unwrap_err(), EstimateError::InvalidK(1));
        let z = NeighborTable::from_rows(&[[0.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(
            estimate_mle_with(&z, 2, MleAggregation::InverseMean, ZeroDistancePolicy::Error).unwrap_err(),
            EstimateError::ZeroDistance { point: 0 }
        );
        let dropped = estimate_mle(&z, 2).unwrap();
        assert_eq!((dropped.n_used, dropped.n_dropped), (1, 1));
        let flat = NeighborTable::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(estimate_mle(&flat, 2).unwrap_err(), EstimateError::DegenerateRatios);
    }
}
