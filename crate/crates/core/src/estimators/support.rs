//! Finite-support detection.
//!
//! A measure supported on finitely many atoms has pointwise dimension zero at
//! every atom. In a sample this shows up as exactly repeated rows, i.e.
//! points with `T_1 = 0`.

use serde::{Deserialize, Serialize};

use crate::knn::NeighborTable;

pub const DEFAULT_DUPLICATE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportVerdict {
    Continuous,
    FiniteSupportSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportDiagnosis {
    /// Fraction of points whose nearest neighbor is at distance zero.
    pub duplicate_fraction: f64,
    pub threshold: f64,
    pub verdict: SupportVerdict,
}

pub fn diagnose_support(table: &NeighborTable) -> SupportDiagnosis {
    diagnose_support_with(table, DEFAULT_DUPLICATE_THRESHOLD)
}

/// `FiniteSupportSuspected` iff the duplicate fraction exceeds `threshold`.
pub fn diagnose_support_with(table: &NeighborTable, threshold: f64) -> SupportDiagnosis {
    let duplicate_fraction = table.zero_distance_count() as f64 / table.n_points().max(1) as f64;
    let verdict = if duplicate_fraction > threshold {
        SupportVerdict::FiniteSupportSuspected
    } else {
        SupportVerdict::Continuous
    };
    SupportDiagnosis { duplicate_fraction, threshold, verdict }
}
