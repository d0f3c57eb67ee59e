//! Exact Euclidean k-nearest-neighbor tables and pairwise statistics.
//!
//! # Exactness
//!
//! The reported distance between two points is always
//!
//! ```text
//! sqrt( Σ_j (x_j - y_j)^2 )      accumulated left to right in f64
//! ```
//!
//! which is exactly what a naive all-pairs scan computes. To avoid the naive
//! `O(n² D)` sequential cost in high ambient dimension, candidates are first
//! screened with the Gram expansion `|x|² + |y|² - 2 x·y` computed by a
//! blocked matrix product, together with a rounding-error bound `δ` on that
//! expansion. With `τ` the k-th smallest upper bound `approx + δ`, every true
//! neighbor satisfies `approx - δ ≤ τ`; only those candidates are re-scored
//! with the exact formula and sorted by `(distance, index)`.
//!
//! The screen therefore never changes the result, only the amount of work.


use rayon::prelude::*;
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::stats::{Moments, Summary};

#[derive(Debug, Error, PartialEq)]
pub enum KnnError {
    #[error("need more than {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("neighbor count must be positive")]
    ZeroK,
    #[error("neighbor order {order} outside 1..={k}")]
    OrderOutOfRange { order: usize, k: usize },
    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),
    #[error("block size must be positive")]
    ZeroBlock,
    #[error("invalid neighbor table: {0}")]
    InvalidTable(String),
}

/// Sorted nearest-neighbor distances `T_1(x_i) ≤ … ≤ T_K(x_i)`, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    n: usize,
    k: usize,
    dists: Vec<f64>,
    idx: Option<Vec<usize>>,
}

impl NeighborTable {
    /// Table from precomputed distance rows (no indices).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, KnnError> {
        let k = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if k == 0 {
            return Err(KnnError::ZeroK);
        }
        let mut dists = Vec::with_capacity(rows.len() * k);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != k {
                return Err(KnnError::InvalidTable(format!("row {i} has {} entries, expected {k}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(KnnError::InvalidTable(format!("row {i} has a negative or non-finite distance")));
            }
            if r.windows(2).any(|w| w[1] < w[0]) {
                return Err(KnnError::InvalidTable(format!("row {i} is not sorted")));
            }
            dists.extend_from_slice(r);
        }
        Ok(Self { n: rows.len(), k, dists, idx: None })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    /// Maximum neighbor order `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// `[T_1, …, T_K]` for point `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }

    /// Neighbor indices for point `i`, when the table was computed from a cloud.
    pub fn neighbors(&self, i: usize) -> Option<&[usize]> {
        self.idx.as_ref().map(|idx| &idx[i * self.k..(i + 1) * self.k])
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.dists.chunks_exact(self.k)
    }

    /// `T_order(x_i)` with a 1-based order.
    pub fn dist(&self, i: usize, order: usize) -> f64 {
        self.dists[i * self.k + order - 1]
    }

    /// Number of points whose first neighbor sits at distance zero.
    pub fn zero_distance_count(&self) -> usize {
        self.rows().filter(|r| r[0] == 0.0).count()
    }

    /// Set when any `T_1 = 0`, i.e. the cloud has exact duplicates.
    pub fn has_zero_distance(&self) -> bool {
        self.zero_distance_count() > 0
    }

    /// Copy truncated to the first `k` orders.
    pub fn truncated(&self, k: usize) -> Result<Self, KnnError> {
        if k == 0 || k > self.k {
            return Err(KnnError::OrderOutOfRange { order: k, k: self.k });
        }
        let dists = self.rows().flat_map(|r| r[..k].iter().copied()).collect();
        let idx = self.idx.as_ref().map(|idx| {
            idx.chunks_exact(self.k).flat_map(|r| r[..k].iter().copied()).collect()
        });
        Ok(Self { n: self.n, k, dists, idx })
    }
}

/// Squared Euclidean distance, summed left to right.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

#[inline]
fn squared_norm(a: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in a {
        s += x * x;
    }
    s
}

/// Bytes of Gram scratch per query tile.
const TILE_BUDGET: usize = 1 << 25;

/// Exact k-NN distances and indices for every point of `cloud`.
///
/// Ties are broken by ascending point index. Output does not depend on the
/// number of worker threads.
pub fn knn_distances(cloud: &PointCloud, k: usize) -> Result<NeighborTable, KnnError> {
    if k == 0 {
        return Err(KnnError::ZeroK);
    }
    let n = cloud.n_points();
    if n <= k {
        return Err(KnnError::TooFewPoints { n, k });
    }
    let dim = cloud.dim();
    let data = cloud.data();
    let norms: Vec<f64> = cloud.rows().map(squared_norm).collect();
    // |fl(a) - a| for the Gram expansion, per unit of (|x|² + |y|²), with a 4x margin.
    let slack = (4 * dim + 32) as f64 * f64::EPSILON;

    let tile = (TILE_BUDGET / (8 * n)).clamp(1, 256);
    let mut dists = vec![0.0; n * k];
    let mut idx = vec![0usize; n * k];

    dists
        .par_chunks_mut(tile * k)
        .zip(idx.par_chunks_mut(tile * k))
        .enumerate()
        .for_each(|(t, (out_d, out_i))| {
            let start = t * tile;
            let rows = out_d.len() / k;
            let mut gram = vec![0.0; rows * n];
            // SAFETY: A is rows×dim row-major inside `data`, B is the dim×n
            // transposed view of `data` (row stride 1, column stride dim), and
            // C is the rows×n row-major `gram` buffer; all extents are in bounds.
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    dim,
                    n,
                    1.0,
                    data.as_ptr().add(start * dim),
                    dim as isize,
                    1,
                    data.as_ptr(),
                    1,
                    dim as isize,
                    0.0,
                    gram.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
            let mut upper = Vec::with_capacity(n);
            let mut cand: Vec<(f64, usize)> = Vec::new();
            for local in 0..rows {
                let q = start + local;
                let nq = norms[q];
                let g = &gram[local * n..(local + 1) * n];
                upper.clear();
                for r in (0..n).filter(|&r| r != q) {
                    let approx = nq + norms[r] - 2.0 * g[r];
                    upper.push(approx + slack * (nq + norms[r]));
                }
                let (_, tau, _) = upper.select_nth_unstable_by(k - 1, f64::total_cmp);
                let tau = *tau;

                cand.clear();
                let xq = &data[q * dim..(q + 1) * dim];
                for r in (0..n).filter(|&r| r != q) {
                    let approx = nq + norms[r] - 2.0 * g[r];
                    if approx - slack * (nq + norms[r]) <= tau {
                        cand.push((squared_distance(xq, &data[r * dim..(r + 1) * dim]), r));
                    }
                }
                cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                debug_assert!(cand.len() >= k);
                for (j, &(d2, r)) in cand.iter().take(k).enumerate() {
                    out_d[local * k + j] = d2.sqrt();
                    out_i[local * k + j] = r;
                }
            }
        });

    Ok(NeighborTable { n, k, dists, idx: Some(idx) })
}

/// Mean and spread of `T_k` over all points, for each requested order.
pub fn knn_profile(table: &NeighborTable, orders: &[usize]) -> Result<Vec<(usize, Summary)>, KnnError> {
    orders
        .iter()
        .map(|&order| {
            if order == 0 || order > table.k() {
                return Err(KnnError::OrderOutOfRange { order, k: table.k() });
            }
            let s = Summary::of(table.rows().map(|r| r[order - 1]));
            Ok((order, s))
        })
        .collect()
}

/// Statistics of the per-row Euclidean norms.
pub fn norm_profile(cloud: &PointCloud) -> Summary {
    Summary::of(cloud.rows().map(|r| squared_norm(r).sqrt()))
}

/// Cosine similarity over all `n(n-1)/2` unordered pairs of distinct rows.
///
/// Rows are used as-is (no centering). Work is split into `block × block`
/// tiles; each pair's similarity is computed identically for every block size
/// and only the order of the final reduction changes.
pub fn pairwise_cosine_mean(cloud: &PointCloud, block: usize) -> Result<Summary, KnnError> {
    if block == 0 {
        return Err(KnnError::ZeroBlock);
    }
    let n = cloud.n_points();
    if n < 2 {
        return Err(KnnError::TooFewPoints { n, k: 1 });
    }
    let dim = cloud.dim();
    let mut unit = Vec::with_capacity(n * dim);
    for (i, r) in cloud.rows().enumerate() {
        let norm = squared_norm(r).sqrt();
        if norm == 0.0 {
            return Err(KnnError::ZeroNormRow(i));
        }
        unit.extend(r.iter().map(|v| v / norm));
    }
    let unit = &unit;
    let row = |i: usize| &unit[i * dim..(i + 1) * dim];
    let n_blocks = n.div_ceil(block);

    let partials: Vec<Moments> = (0..n_blocks)
        .into_par_iter()
        .map(|bi| {
            let mut m = Moments::new();
            let rows_i = bi * block..((bi + 1) * block).min(n);
            for bj in bi..n_blocks {
                let rows_j = bj * block..((bj + 1) * block).min(n);
                for i in rows_i.clone() {
                    let ui = row(i);
                    for j in rows_j.clone().filter(|&j| j > i) {
                        let dot: f64 = ui.iter().zip(row(j)).map(|(a, b)| a * b).sum();
                        m.push(dot);
                    }
                }
            }
            m
        })
        .collect();
    let mut total = Moments::new();
    for p in &partials {
        total.merge(p);
    }
    Ok(total.summary())
}

/// Orders `(distance, index)` pairs the way the engine does.
