//! Empirical pointwise dimension.
//!
//! The pointwise dimension at `x` is the small-radius slope of
//! `log μ(B(x, r))` against `log r`. With the empirical measure
//! `μ̂(B(x, r)) = #{j : |x_j - x| ≤ r} / n` (closed ball, `x` itself counted)
//! the slope is fitted by least squares over a geometric radius grid.
//!
//! This estimator uses no neighbor-ratio model, which makes it a reference
//! for the ratio estimators on synthetic data.
//!
//! Default grid ([`default_radius_grid`]): eight radii, geometric between the
//! 2nd and 20th percentile of the distances from `x` to the other points.
//! Each percentile is taken midway between the two order statistics around
//! it. If
//! `x` has exact duplicates the measure has an atom there; the grid is then
//! placed strictly below the nearest positive distance, where the ball count
//! is the atom's multiplicity for every radius and the slope is exactly zero.

use rayon::prelude::*;

use super::{EstimateError, EstimateParams, IdEstimate, Method};
use crate::cloud::PointCloud;
use crate::knn::squared_distance;
use crate::stats::{ols_slope, Summary};

pub const GRID_SIZE: usize = 8;
pub const LOW_PERCENTILE: f64 = 0.02;
pub const HIGH_PERCENTILE: f64 = 0.20;

fn sorted_distances(cloud: &PointCloud, x_index: usize) -> Vec<f64> {
    let x = cloud.row(x_index);
    let mut d: Vec<f64> = cloud
        .rows()
        .enumerate()
        .filter(|&(j, _)| j != x_index)
        .map(|(_, r)| squared_distance(x, r).sqrt())
        .collect();
    d.sort_unstable_by(f64::total_cmp);
    d
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| lo * (ratio * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn grid_from_sorted(dists: &[f64]) -> Vec<f64> {
    let first_positive = dists.iter().copied().find(|&d| d > 0.0);
    match first_positive {
        None => geometric(0.1, 1.0, GRID_SIZE),
        Some(delta) if dists[0] == 0.0 => geometric(0.1 * delta, 0.9 * delta, GRID_SIZE),
        Some(_) => {
            // Midway between consecutive order statistics, so that no grid
            // radius sits exactly on a sample distance.
            let m = dists.len();
            let at = |p: f64| match m {
                1 => dists[0],
                _ => {
                    let i = ((p * m as f64).ceil() as usize).clamp(1, m - 1);
                    0.5 * (dists[i - 1] + dists[i])
                }
            };
            geometric(at(LOW_PERCENTILE), at(HIGH_PERCENTILE), GRID_SIZE)
        }
    }
}

/// The default radius grid around point `x_index`.
pub fn default_radius_grid(cloud: &PointCloud, x_index: usize) -> Result<Vec<f64>, EstimateError> {
    let n = cloud.n_points();
    if x_index >= n {
        return Err(EstimateError::BadQuery { index: x_index, n });
    }
    if n < 2 {
        return Err(EstimateError::EmptyBall);
    }
    Ok(grid_from_sorted(&sorted_distances(cloud, x_index)))
}

fn slope_from_sorted(dists: &[f64], n: usize, radii: &[f64]) -> Result<(f64, Vec<f64>), EstimateError> {
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(EstimateError::InvalidRadii("radii must be positive and finite".into()));
    }
    let mut log_r = Vec::with_capacity(radii.len());
    let mut log_mass = Vec::with_capacity(radii.len());
    let mut used = Vec::with_capacity(radii.len());
    for &r in radii {
        let inside = 1 + dists.partition_point(|&d| d <= r);
        if inside >= 2 {
            log_r.push(r.ln());
            log_mass.push((inside as f64 / n as f64).ln());
            used.push(r);
        }
    }
    if used.len() < 2 {
        return Err(EstimateError::EmptyBall);
    }
    let slope = ols_slope(&log_r, &log_mass)
        .ok_or_else(|| EstimateError::InvalidRadii("usable radii are all equal".into()))?;
    Ok((slope, used))
}

/// Log-count slope at one point. Radii enclosing fewer than two points are dropped.
pub fn estimate_pointwise_dimension(
    cloud: &PointCloud,
    x_index: usize,
    radii: Option<&[f64]>,
) -> Result<IdEstimate, EstimateError> {
    let n = cloud.n_points();
    if x_index >= n {
        return Err(EstimateError::BadQuery { index: x_index, n });
    }
    let dists = sorted_distances(cloud, x_index);
    let grid;
    let radii = match radii {
        Some(r) => r,
        None => {
            grid = grid_from_sorted(&dists);
            &grid
        }
    };
    let (slope, used) = slope_from_sorted(&dists, n, radii)?;
    Ok(IdEstimate {
        method: Method::PointwiseOracle,
        value: slope,
        stderr: 0.0,
        per_point: Some(vec![slope]),
        params: EstimateParams { radii: Some(used), ..Default::default() },
        n_used: 1,
        n_dropped: 0,
        boundary: false,
    })
}

/// Oracle averaged over several query points, each with its default grid.
pub fn pointwise_oracle_mean(cloud: &PointCloud, queries: &[usize]) -> Result<IdEstimate, EstimateError> {
    if queries.is_empty() {
        return Err(EstimateError::EmptyBall);
    }
    let slopes = queries
        .par_iter()
        .map(|&q| estimate_pointwise_dimension(cloud, q, None).map(|e| e.value))
        .collect::<Result<Vec<_>, _>>()?;
    let s = Summary::of(slopes.iter().copied());
    Ok(IdEstimate {
        method: Method::PointwiseOracle,
        value: s.mean,
        stderr: s.stderr,
        per_point: Some(slopes),
        params: EstimateParams::default(),
        n_used: queries.len(),
        n_dropped: 0,
        boundary: false,
    })
}

/// Up to `count` query points spread evenly over the `inner_fraction` of
/// points closest to the centroid.
pub fn interior_queries(cloud: &PointCloud, count: usize, inner_fraction: f64) -> Vec<usize> {
    let n = cloud.n_points();
    let dim = cloud.dim();
    let mut centroid = vec![0.0; dim];
    for r in cloud.rows() {
        for (c, v) in centroid.iter_mut().zip(r) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let mut by_depth: Vec<(f64, usize)> = cloud
        .rows()
        .enumerate()
        .map(|(i, r)| (squared_distance(r, &centroid), i))
        .collect();
    by_depth.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let pool = ((inner_fraction * n as f64).ceil() as usize).clamp(1, n);
    let take = count.min(pool).max(1);
    let mut picked: Vec<usize> = (0..take).map(|i| by_depth[i * pool / take].1).collect();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric(0.01, 0.1, 8);
        assert_eq!(g.len(), 8);
        assert_relative_eq!(g[0], 0.01, epsilon = 1e-16);
        assert_relative_eq!(g[7], 0.1, epsilon = 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn evenly_spaced_line_has_slope_near_one() {
        let n = 10_001;
        let pts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let c = PointCloud::from_flat(1, pts).unwrap();
        let est = estimate_pointwise_dimension(&c, n / 2, None).unwrap();
        assert!((est.value - 1.0).abs() < 0.02, "{}", est.value);
        let radii = est.params.radii.unwrap();
        assert!((radii[0] - 0.01).abs() < 1e-3 && (radii[7] - 0.1).abs() < 1e-3);
    }

    #[test]
    fn identical_points_give_zero() {
        let c = PointCloud::from_flat(2, vec![0.25; 40]).unwrap();
        assert_eq!(estimate_pointwise_dimension(&c, 3, None).unwrap().value, 0.0);
    }

    #[test]
    fn atom_among_other_points_gives_zero() {
        let mut data = vec![1.0; 10];
        data.extend((0..50).map(|i| 2.0 + i as f64));
        let c = PointCloud::from_flat(1, data).unwrap();
        assert_eq!(estimate_pointwise_dimension(&c, 0, None).unwrap().value, 0.0);
    }

    #[test]
    fn small_radii_are_dropped_or_rejected() {
        let c = PointCloud::from_flat(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        // Only radii 1.5 and 2.5 enclose a second point.
        let est = estimate_pointwise_dimension(&c, 0, Some(&[0.1, 0.5, 1.5, 2.5])).unwrap();
        assert_eq!(est.params.radii.unwrap(), vec![1.5, 2.5]);
        assert_eq!(
            estimate_pointwise_dimension(&c, 0, Some(&[0.1, 0.5, 1.5])).unwrap_err(),
            EstimateError::EmptyBall
        );
        assert!(matches!(
            estimate_pointwise_dimension(&c, 0, Some(&[-1.0, 1.5])),
            Err(EstimateError::InvalidRadii(_))
        ));
        assert_eq!(
            estimate_pointwise_dimension(&c, 9, None).unwrap_err(),
            EstimateError::BadQuery { index: 9, n: 4 }
        );
    }

    #[test]
    fn interior_queries_prefer_center() {
        let pts: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let c = PointCloud::from_flat(1, pts).unwrap();
        let q = interior_queries(&c, 5, 0.1);
        assert_eq!(q.len(), 5);
        assert!(q.iter().all(|&i| (45..=55).contains(&i)), "{q:?}");
    }
}
