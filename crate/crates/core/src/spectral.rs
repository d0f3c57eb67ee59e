//! Von Neumann entropy and effective rank of a representation matrix.
//!
//! For data `Z` (`n × D`, optionally column-centered) the Gram matrix
//! `Q = Z Zᵀ` has eigenvalues `λ_i = σ_i²`, the squared singular values of
//! `Z`. With `p_i = λ_i / Σ λ` (the spectrum of `Q / tr Q`):
//!
//! ```text
//! S = -Σ p_i ln p_i                          (nats, 0 ln 0 = 0)
//! effective rank = exp(-Σ q_i ln q_i),  q_i = σ_i / Σ σ
//! ```
//!
//! The spectrum always comes from an SVD of `Z`; `Q` is never formed.
//! Eigenvalues below `1e-12 · λ_max` count as zero and define the numerical
//! rank.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;

pub const EIGEN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Von Neumann entropy in nats.
    pub entropy: f64,
    pub effective_rank: f64,
    /// Numerical rank after the eigenvalue cutoff.
    pub rank: usize,
    pub eigenvalues_retained: usize,
    /// The (centered) matrix was identically zero; entropy is reported as 0.
    pub all_zero: bool,
}

fn data_matrix(cloud: &PointCloud, center: bool) -> DMatrix<f64> {
    let mut z = DMatrix::from_row_slice(cloud.n_points(), cloud.dim(), cloud.data());
    if center {
        for mut col in z.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    z
}

/// Singular values of the (optionally centered) data, descending.
pub fn singular_values(cloud: &PointCloud, center: bool) -> Vec<f64> {
    let z = data_matrix(cloud, center);
    let mut s: Vec<f64> = z.singular_values().iter().copied().collect();
    s.sort_unstable_by(|a, b| b.total_cmp(a));
    s
}

/// Nonzero eigenvalues of `Z Zᵀ` after the relative cutoff.
pub fn retained_eigenvalues(singular: &[f64]) -> Vec<f64> {
    let eig: Vec<f64> = singular.iter().map(|s| s * s).collect();
    let max = eig.iter().copied().fold(0.0, f64::max);
    eig.into_iter().filter(|&l| l > 0.0 && l >= EIGEN_CUTOFF * max).collect()
}

/// Shannon entropy of `weights / Σ weights`, in nats.
pub fn normalized_entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -weights
        .iter()
        .map(|w| w / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

pub fn spectral_summary(cloud: &PointCloud, center: bool) -> SpectralSummary {
    let singular = singular_values(cloud, center);
    let eig = retained_eigenvalues(&singular);
    if eig.is_empty() {
        return SpectralSummary { entropy: 0.0, effective_rank: 1.0, rank: 0, eigenvalues_retained: 0, all_zero: true };
    }
    let sigma: Vec<f64> = eig.iter().map(|l| l.sqrt()).collect();
    SpectralSummary {
        entropy: normalized_entropy(&eig),
        effective_rank: normalized_entropy(&sigma).exp(),
        rank: eig.len(),
        eigenvalues_retained: eig.len(),
        all_zero: false,
    }
}

pub fn von_neumann_entropy(cloud: &PointCloud, center: bool) -> SpectralSummary {
    spectral_summary(cloud, center)
}

pub fn effective_rank(cloud: &PointCloud, center: bool) -> f64 {
    spectral_summary(cloud, center).effective_rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn orthogonal_rows_uniform_spectrum() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..6).map(|j| if i == j { 3.0 } else { 0.0 }).collect()).collect();
        let c = PointCloud::from_rows(&rows).unwrap();
        let s = von_neumann_entropy(&c, false);
        assert_relative_eq!(s.entropy, 4f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(s.effective_rank, 4.0, epsilon = 1e-10);
        assert_eq!(s.rank, 4);
    }

    #[test]
    fn rank_one_has_zero_entropy() {
        let c = PointCloud::from_rows(&[[1.0, 2.0], [2.0, 4.0], [-0.5, -1.0]]).unwrap();
        let s = von_neumann_entropy(&c, false);
        assert_eq!(s.rank, 1);
        assert_eq!(s.entropy, 0.0);
        assert_eq!(s.effective_rank, 1.0);
    }

    #[test]
    fn centering_identical_rows_is_all_zero() {
        let c = PointCloud::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        let s = von_neumann_entropy(&c, true);
        assert!(s.all_zero);
        assert_eq!(s.entropy, 0.0);
        assert!(!von_neumann_entropy(&c, false).all_zero);
    }

    #[test]
    fn entropy_helper() {
        assert_eq!(normalized_entropy(&[0.0, 0.0]), 0.0);
        assert_relative_eq!(normalized_entropy(&[1.0, 1.0]), 2f64.ln(), epsilon = 1e-15);
    }
}
