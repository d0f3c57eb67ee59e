//! Intrinsic-dimension estimation and representation-geometry analysis.
//!
//! The crate is organized around a small pipeline:
//!
//! ```text
//! PointCloud ──knn_distances──▶ NeighborTable ──estimators──▶ IdEstimate
//!     │                                                  ▲
//!     └──pushforward (LipschitzNetwork)──▶ LayerStack ───┘──▶ AuditReport
//! ```
//!
//! * [`cloud`]: point clouds, layer stacks and their validation.
//! * [`dump`]: the `NREP` binary layer format, `manifest.json`, CSV ingestion.
//! * [`knn`]: exact k-nearest-neighbor tables plus cosine/norm/NN profiles.
//! * [`estimators`]: MLE, TwoNN (likelihood and regression), Gride, the
//!   empirical pointwise-dimension oracle and finite-support detection.
//! * [`synth`]: ground-truth generators (uniform balls, unions, vocabularies).
//! * [`lipschitz`]: certified Lipschitz networks, pushforward and the
//!   layer-wise monotonicity audit.
//! * [`spectral`]: von Neumann entropy and effective rank.
//! * [`metrics`]: per-layer metric tables.
//! * [`sweep`]: seeded replication harness for the bias and ambient sweeps.
//!
//! All in-memory arithmetic is `f64`; files store `f32`.

pub mod cloud;
pub mod dump;
pub mod error;
pub mod estimators;
pub mod knn;
pub mod lipschitz;
pub mod metrics;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod sweep;
pub mod synth;

#[cfg(doctest)]
mod guide;

pub use cloud::{Layer, LayerStack, PointCloud, ValidationReport};
pub use error::{Error, Result};
pub use estimators::{IdEstimate, Method, SupportDiagnosis, SupportVerdict};
pub use knn::NeighborTable;
