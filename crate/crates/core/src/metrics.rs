//! Per-layer geometry table: Gride at several scales, TwoNN, k-NN distance
//! profile, cosine similarity, norms, spectral entropy, effective rank and
//! the pointwise-dimension oracle.
//!
//! CSV schema (one row per layer, header always present):
//!
//! ```text
//! layer,name,relative_depth,gride_mean,gride_k<k>...,twonn,
//! nn_mean_<o>,nn_std_<o>...,cos_mean,cos_std,cos_stderr,
//! norm_mean,norm_std,norm_stderr,entropy,effective_rank,oracle
//! ```
//!
//! with one `gride_k<k>` column per scale and one `nn_mean_<o>,nn_std_<o>`
//! pair per neighbor order, in configuration order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::LayerStack;
use crate::error::Error;
use crate::estimators::{
    estimate_twonn_mle, gride_multiscale, interior_queries, pointwise_oracle_mean, DEFAULT_DISCARD_FRACTION,
    DEFAULT_GRIDE_SCALES,
};
use crate::knn::{knn_distances, knn_profile, norm_profile, pairwise_cosine_mean};
use crate::lipschitz::{DEFAULT_INNER_FRACTION, DEFAULT_ORACLE_QUERIES};
use crate::spectral::spectral_summary;
use crate::stats::Summary;

pub const DEFAULT_NN_ORDERS: &[usize] = &[1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetricsConfig {
    pub gride_scales: Vec<usize>,
    pub nn_orders: Vec<usize>,
    pub twonn_discard: f64,
    pub cosine_block: usize,
    /// Center the data before the spectral metrics.
    pub center_entropy: bool,
    /// Skip the final layer.
    pub exclude_last: bool,
    pub oracle_queries: usize,
    pub inner_fraction: f64,
}

impl Default for LayerMetricsConfig {
    fn default() -> Self {
        Self {
            gride_scales: DEFAULT_GRIDE_SCALES.to_vec(),
            nn_orders: DEFAULT_NN_ORDERS.to_vec(),
            twonn_discard: DEFAULT_DISCARD_FRACTION,
            cosine_block: 256,
            center_entropy: true,
            exclude_last: false,
            oracle_queries: DEFAULT_ORACLE_QUERIES,
            inner_fraction: DEFAULT_INNER_FRACTION,
        }
    }
}

impl LayerMetricsConfig {
    fn required_k(&self) -> usize {
        let gride = 2 * self.gride_scales.iter().copied().max().unwrap_or(1);
        let nn = self.nn_orders.iter().copied().max().unwrap_or(1);
        gride.max(nn).max(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub layer: usize,
    pub name: String,
    pub relative_depth: f64,
    pub gride_mean: f64,
    pub gride: Vec<(usize, f64)>,
    pub twonn: f64,
    pub nn: Vec<(usize, Summary)>,
    pub cosine: Summary,
    pub norm: Summary,
    pub entropy: f64,
    pub effective_rank: f64,
    pub oracle: f64,
}

pub fn layer_metrics(stack: &LayerStack, config: &LayerMetricsConfig) -> Result<Vec<LayerMetrics>, Error> {
    let mut layers: Vec<_> = stack.layers().iter().enumerate().collect();
    if config.exclude_last && layers.len() > 1 {
        layers.pop();
    }
    let queries = interior_queries(&stack.layers()[0].cloud, config.oracle_queries, config.inner_fraction);
    let k = config.required_k();
    layers
        .into_par_iter()
        .map(|(index, layer)| {
            let cloud = &layer.cloud;
            let table = knn_distances(cloud, k)?;
            let d_max = 10.0 * cloud.dim() as f64;
            let gride = gride_multiscale(&table, &config.gride_scales, d_max)?;
            let spectral = spectral_summary(cloud, config.center_entropy);
            Ok(LayerMetrics {
                layer: index,
                name: layer.name.clone(),
                relative_depth: layer.relative_depth,
                gride_mean: gride.average,
                gride: gride.scales.iter().copied().zip(gride.estimates.iter().map(|e| e.value)).collect(),
                twonn: estimate_twonn_mle(&table, config.twonn_discard)?.value,
                nn: knn_profile(&table, &config.nn_orders)?,
                cosine: pairwise_cosine_mean(cloud, config.cosine_block)?,
                norm: norm_profile(cloud),
                entropy: spectral.entropy,
                effective_rank: spectral.effective_rank,
                oracle: pointwise_oracle_mean(cloud, &queries)?.value,
            })
        })
        .collect()
}

pub fn csv_header(config: &LayerMetricsConfig) -> Vec<String> {
    let mut h: Vec<String> = ["layer", "name", "relative_depth", "gride_mean"].map(String::from).to_vec();
    h.extend(config.gride_scales.iter().map(|k| format!("gride_k{k}")));
    h.push("twonn".into());
    for o in &config.nn_orders {
        h.push(format!("nn_mean_{o}"));
        h.push(format!("nn_std_{o}"));
    }
    h.extend(
        [
            "cos_mean", "cos_std", "cos_stderr", "norm_mean", "norm_std", "norm_stderr", "entropy",
            "effective_rank", "oracle",
        ]
        .map(String::from),
    );
    h
}

pub fn csv_record(m: &LayerMetrics) -> Vec<String> {
    let mut r = vec![m.layer.to_string(), m.name.clone(), m.relative_depth.to_string(), m.gride_mean.to_string()];
    r.extend(m.gride.iter().map(|(_, v)| v.to_string()));
    r.push(m.twonn.to_string());
    for (_, s) in &m.nn {
        r.push(s.mean.to_string());
        r.push(s.std.to_string());
    }
    for v in [
        m.cosine.mean,
        m.cosine.std,
        m.cosine.stderr,
        m.norm.mean,
        m.norm.std,
        m.norm.stderr,
        m.entropy,
        m.effective_rank,
        m.oracle,
    ] {
        r.push(v.to_string());
    }
    r
}
