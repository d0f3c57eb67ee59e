//! Compiles the guide's Rust snippets as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/point-clouds.md")]
mod point_clouds {}

#[doc = include_str!("../../../book/src/nearest-neighbors.md")]
mod nearest_neighbors {}

#[doc = include_str!("../../../book/src/estimators.md")]
mod estimators {}

#[doc = include_str!("../../../book/src/pointwise-oracle.md")]
mod pointwise_oracle {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
mod synthetic_data {}

#[doc = include_str!("../../../book/src/lipschitz-audit.md")]
mod lipschitz_audit {}

#[doc = include_str!("../../../book/src/layer-metrics.md")]
mod layer_metrics {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
