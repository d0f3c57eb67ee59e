//! Intrinsic-dimension estimators built on nearest-neighbor distance ratios.
//!
//! Every estimator here consumes ratios of neighbor distances, so all of them
//! are invariant to a global rescaling of the data and to isometries.
//!
//! | estimator | statistic | module |
//! |-----------|-----------|--------|
//! | MLE (k)   | `log T_k / T_i`, `i < k` | [`mle`] |
//! | TwoNN     | `ρ = T_2 / T_1`, Pareto(d) | [`twonn`] |
//! | Gride (k) | `μ = T_2k / T_k` | [`gride`] |
//! | oracle    | `log μ̂(B(x, r))` vs `log r` | [`pointwise`] |
//!
//! Points whose first neighbor is at distance zero (exact duplicates) break
//! every log-ratio. The default [`ZeroDistancePolicy::Drop`] removes them from
//! the estimator input and reports how many were removed; [`support`] turns
//! the same count into a finite-support diagnosis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knn::{KnnError, NeighborTable};

pub mod gride;
pub mod mle;
pub mod pointwise;
pub mod support;
pub mod twonn;

pub use gride::{estimate_gride, gride_log_likelihood, gride_mle_from_ratios, gride_multiscale, GrideMultiscale, DEFAULT_GRIDE_SCALES};
pub use mle::{estimate_mle, estimate_mle_with, MleAggregation};
pub use pointwise::{default_radius_grid, estimate_pointwise_dimension, interior_queries, pointwise_oracle_mean};
pub use support::{diagnose_support, diagnose_support_with, SupportDiagnosis, SupportVerdict};
pub use twonn::{estimate_twonn_mle, estimate_twonn_regression};

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("k = {k} needs a table with at least {needed} neighbors, table has {available}")]
    KTooLarge { k: usize, needed: usize, available: usize },
    #[error("invalid neighbor count k = {0}")]
    InvalidK(usize),
    #[error("point {point} has a zero neighbor distance")]
    ZeroDistance { point: usize },
    #[error("no points left after removing zero-distance points")]
    NoUsablePoints,
    #[error("discard fraction {0} must lie in [0, 1)")]
    InvalidDiscard(f64),
    #[error("discard fraction removes all {0} points")]
    AllDiscarded(usize),
    #[error("regression needs at least 3 retained points, got {0}")]
    TooFewForRegression(usize),
    #[error("all distance ratios equal one; dimension is unbounded")]
    DegenerateRatios,
    #[error("fewer than two radii enclose at least two points")]
    EmptyBall,
    #[error("invalid radius grid: {0}")]
    InvalidRadii(String),
    #[error("query index {index} outside 0..{n}")]
    BadQuery { index: usize, n: usize },
    #[error("invalid upper bound d_max = {0}")]
    InvalidDMax(f64),
    #[error(transparent)]
    Knn(#[from] KnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mle,
    TwoNnMle,
    TwoNnRegression,
    Gride,
    PointwiseOracle,
}

/// Parameters an estimate was computed with, recorded verbatim.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discard_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<MleAggregation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

/// A global dimension estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdEstimate {
    pub method: Method,
    /// Estimated dimension. Positive for the ratio estimators; the pointwise
    /// oracle may return exactly zero at atoms.
    pub value: f64,
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_point: Option<Vec<f64>>,
    pub params: EstimateParams,
    /// Points that entered the estimate.
    pub n_used: usize,
    /// Points removed by the zero-distance policy.
    pub n_dropped: usize,
    /// Set when a likelihood maximum sits on the search boundary.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroDistancePolicy {
    #[default]
    Drop,
    Error,
}

/// Indices of points with `T_1 > 0`, plus the number dropped.
pub(crate) fn usable_points(
    table: &NeighborTable,
    policy: ZeroDistancePolicy,
) -> Result<(Vec<usize>, usize), EstimateError> {
    let mut keep = Vec::with_capacity(table.n_points());
    for (i, row) in table.rows().enumerate() {
        if row[0] > 0.0 {
            keep.push(i);
        } else if policy == ZeroDistancePolicy::Error {
            return Err(EstimateError::ZeroDistance { point: i });
        }
    }
    if keep.is_empty() {
        return Err(EstimateError::NoUsablePoints);
    }
    let dropped = table.n_points() - keep.len();
    Ok((keep, dropped))
}

pub(crate) fn check_discard(f: f64) -> Result<(), EstimateError> {
    if (0.0..1.0).contains(&f) {
        Ok(())
    } else {
        Err(EstimateError::InvalidDiscard(f))
    }
}

/// An estimator plus its parameters, as accepted on the command line.
///
/// Text forms: `mle:k=20`, `mle:k=20:agg=mean`, `twonn`, `twonn:f=0`,
/// `twonn-reg:f=0.1`, `gride:k=2`, `gride-ms` (default scales) and
/// `gride-ms:scales=1/2/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum EstimatorConfig {
    Mle { k: usize, aggregation: MleAggregation },
    #[serde(rename = "twonn")]
    TwoNn { discard_fraction: f64 },
    #[serde(rename = "twonn-reg")]
    TwoNnRegression { discard_fraction: f64 },
    Gride { k: usize },
    GrideMultiscale { scales: Vec<usize> },
}

pub const DEFAULT_DISCARD_FRACTION: f64 = 0.1;
pub const DEFAULT_MLE_K: usize = 20;

impl EstimatorConfig {
    pub fn twonn() -> Self {
        Self::TwoNn { discard_fraction: DEFAULT_DISCARD_FRACTION }
    }

    pub fn mle(k: usize) -> Self {
        Self::Mle { k, aggregation: MleAggregation::InverseMean }
    }

    /// Largest neighbor order the estimator reads.
    pub fn required_k(&self) -> usize {
        match self {
            Self::Mle { k, .. } => *k,
            Self::TwoNn { .. } | Self::TwoNnRegression { .. } => 2,
            Self::Gride { k } => 2 * k,
            Self::GrideMultiscale { scales } => 2 * scales.iter().copied().max().unwrap_or(1),
        }
    }

    /// Runs the estimator. `ambient_dim` sets the Gride search bound `10 · D`.
    pub fn estimate(&self, table: &NeighborTable, ambient_dim: usize) -> Result<IdEstimate, EstimateError> {
        let d_max = 10.0 * ambient_dim.max(1) as f64;
        match self {
            Self::Mle { k, aggregation } => estimate_mle_with(table, *k, *aggregation, ZeroDistancePolicy::Drop),
            Self::TwoNn { discard_fraction } => estimate_twonn_mle(table, *discard_fraction),
            Self::TwoNnRegression { discard_fraction } => estimate_twonn_regression(table, *discard_fraction),
            Self::Gride { k } => estimate_gride(table, *k, d_max),
            Self::GrideMultiscale { scales } => Ok(gride_multiscale(table, scales, d_max)?.summary_estimate()),
        }
    }
}

impl fmt::Display for EstimatorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mle { k, aggregation: MleAggregation::InverseMean } => write!(f, "mle:k={k}"),
            Self::Mle { k, aggregation: MleAggregation::ArithmeticMean } => write!(f, "mle:k={k}:agg=mean"),
            Self::TwoNn { discard_fraction } if *discard_fraction == DEFAULT_DISCARD_FRACTION => write!(f, "twonn"),
            Self::TwoNn { discard_fraction } => write!(f, "twonn:f={discard_fraction}"),
            Self::TwoNnRegression { discard_fraction } if *discard_fraction == DEFAULT_DISCARD_FRACTION => {
                write!(f, "twonn-reg")
            }
            Self::TwoNnRegression { discard_fraction } => write!(f, "twonn-reg:f={discard_fraction}"),
            Self::Gride { k } => write!(f, "gride:k={k}"),
            Self::GrideMultiscale { scales } if scales.as_slice() == DEFAULT_GRIDE_SCALES => write!(f, "gride-ms"),
            Self::GrideMultiscale { scales } => {
                let s: Vec<String> = scales.iter().map(|s| s.to_string()).collect();
                write!(f, "gride-ms:scales={}", s.join("/"))
            }
        }
    }
}

impl FromStr for EstimatorConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let mut k = None;
        let mut f = None;
        let mut agg = MleAggregation::InverseMean;
        let mut scales = None;
        for part in parts {
            let (key, value) = part.split_once('=').ok_or_else(|| format!("expected key=value in {part:?}"))?;
            let bad = |e: &dyn fmt::Display| format!("bad value for {key}: {e}");
            match key {
                "k" => k = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "f" => f = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                "agg" => {
                    agg = match value {
                        "inverse" => MleAggregation::InverseMean,
                        "mean" => MleAggregation::ArithmeticMean,
                        other => return Err(format!("unknown aggregation {other:?}")),
                    }
                }
                "scales" => {
                    let v: Result<Vec<usize>, _> = value.split('/').map(str::parse).collect();
                    scales = Some(v.map_err(|e| bad(&e))?);
                }
                other => return Err(format!("unknown parameter {other:?}")),
            }
        }
        let config = match name {
            "mle" => Self::Mle { k: k.unwrap_or(DEFAULT_MLE_K), aggregation: agg },
            "twonn" => Self::TwoNn { discard_fraction: f.unwrap_or(DEFAULT_DISCARD_FRACTION) },
            "twonn-reg" => Self::TwoNnRegression { discard_fraction: f.unwrap_or(DEFAULT_DISCARD_FRACTION) },
            "gride" => Self::Gride { k: k.unwrap_or(1) },
            "gride-ms" => Self::GrideMultiscale { scales: scales.unwrap_or_else(|| DEFAULT_GRIDE_SCALES.to_vec()) },
            other => return Err(format!("unknown method {other:?}")),
        };
        if let Self::TwoNn { discard_fraction } | Self::TwoNnRegression { discard_fraction } = &config {
            check_discard(*discard_fraction).map_err(|e| e.to_string())?;
        }
        match &config {
            Self::Mle { k, .. } if *k < 2 => Err("mle needs k >= 2".into()),
            Self::Gride { k } if *k < 1 => Err("gride needs k >= 1".into()),
            Self::GrideMultiscale { scales } if scales.is_empty() || scales.contains(&0) => {
                Err("gride-ms needs positive scales".into())
            }
            _ => Ok(config),
        }
    }
}
