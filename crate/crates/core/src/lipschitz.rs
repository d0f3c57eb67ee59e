//! Lipschitz feedforward networks, pushforward of point clouds, and the
//! layer-wise monotonicity audit.
//!
//! Every layer carries an upper bound on its Lipschitz constant:
//!
//! | layer | bound |
//! |-------|-------|
//! | linear `x ↦ Wx + b` | `‖W‖₂ · (1 + 1e-4)`, `‖W‖₂` by power iteration |
//! | ReLU, tanh | 1 |
//! | residual `x ↦ x + g(x)` | `1 + L(g)` |
//! | RMS norm `x ↦ s · x / sqrt(mean(x²) + ε)` | `|s| / sqrt(ε)` |
//!
//! and a composition is bounded by the product of its layer bounds. A
//! Lipschitz map cannot raise the pointwise dimension of a measure, so the
//! pointwise dimension of `μ_ℓ = (f_ℓ)_# μ_{ℓ-1}` is non-increasing in `ℓ`.
//! The audit checks estimated dimensions against that requirement.
//!
//! Self-attention is not globally Lipschitz and has no layer kind here.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Layer, LayerStack, PointCloud};
use crate::error::Error;
use crate::estimators::{interior_queries, pointwise_oracle_mean, EstimatorConfig};
use crate::knn::{knn_distances, squared_distance};
use crate::rng::{self, Rng};
use crate::synth::random_orthonormal_columns;

pub const POWER_ITERATION_TOL: f64 = 1e-6;
pub const POWER_ITERATION_CAP: usize = 1000;
/// Multiplier applied to power-iteration norms, which approach from below.
pub const NORM_SAFETY: f64 = 1.0 + 1e-4;
pub const DEFAULT_RMS_EPS: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("shape mismatch at layer {layer}: expected input width {expected}, got {got}")]
    ShapeMismatch { layer: usize, expected: usize, got: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Linear { weight: DMatrix<f64>, bias: DVector<f64> },
    Relu,
    Tanh,
    Residual(Vec<LipschitzLayer>),
    RmsNorm { scale: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzLayer {
    pub kind: LayerKind,
    pub lipschitz_bound: f64,
}

/// Largest singular value by power iteration on `WᵀW`.
///
/// The estimate `‖W v‖` for a unit `v` never exceeds the true norm.
pub fn spectral_norm(w: &DMatrix<f64>, rng: &mut Rng) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let mut v = DVector::from_fn(w.ncols(), |_, _| StandardNormal.sample(rng));
    v.normalize_mut();
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let u = w * &v;
        let next = u.norm();
        let back = w.transpose() * u;
        let back_norm = back.norm();
        if back_norm == 0.0 {
            return next;
        }
        v = back / back_norm;
        let converged = (next - sigma).abs() <= POWER_ITERATION_TOL * next;
        sigma = next;
        if converged {
            break;
        }
    }
    (w * &v).norm().max(sigma)
}

impl LipschitzLayer {
    pub fn linear(weight: DMatrix<f64>, bias: DVector<f64>, rng: &mut Rng) -> Result<Self, NetError> {
        if bias.len() != weight.nrows() {
            return Err(NetError::InvalidSpec(format!(
                "bias length {} does not match {} outputs",
                bias.len(),
                weight.nrows()
            )));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(NetError::InvalidSpec("linear weights must be finite".into()));
        }
        let bound = spectral_norm(&weight, rng) * NORM_SAFETY;
        Ok(Self { kind: LayerKind::Linear { weight, bias }, lipschitz_bound: bound })
    }

    pub fn relu() -> Self {
        Self { kind: LayerKind::Relu, lipschitz_bound: 1.0 }
    }

    pub fn tanh() -> Self {
        Self { kind: LayerKind::Tanh, lipschitz_bound: 1.0 }
    }

    pub fn residual(inner: Vec<LipschitzLayer>) -> Self {
        let inner_bound: f64 = inner.iter().map(|l| l.lipschitz_bound).product();
        Self { kind: LayerKind::Residual(inner), lipschitz_bound: 1.0 + inner_bound }
    }

    pub fn rms_norm(scale: f64, eps: f64) -> Result<Self, NetError> {
        if !(eps > 0.0 && eps.is_finite() && scale.is_finite()) {
            return Err(NetError::InvalidSpec("rms_norm needs finite scale and eps > 0".into()));
        }
        Ok(Self { kind: LayerKind::RmsNorm { scale, eps }, lipschitz_bound: scale.abs() / eps.sqrt() })
    }

    /// Output width for an input of width `input`.
    fn output_dim(&self, input: usize, at: usize) -> Result<usize, NetError> {
        match &self.kind {
            LayerKind::Linear { weight, .. } => {
                if weight.ncols() != input {
                    return Err(NetError::ShapeMismatch { layer: at, expected: weight.ncols(), got: input });
                }
                Ok(weight.nrows())
            }
            LayerKind::Residual(inner) => {
                let mut w = input;
                for l in inner {
                    w = l.output_dim(w, at)?;
                }
                if w != input {
                    return Err(NetError::ShapeMismatch { layer: at, expected: input, got: w });
                }
                Ok(input)
            }
            _ => Ok(input),
        }
    }

    /// Applies the layer to one point.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            LayerKind::Linear { weight, bias } => (0..weight.nrows())
                .map(|i| {
                    let mut s = bias[i];
                    for (j, xj) in x.iter().enumerate() {
                        s += weight[(i, j)] * xj;
                    }
                    s
                })
                .collect(),
            LayerKind::Relu => x.iter().map(|v| v.max(0.0)).collect(),
            LayerKind::Tanh => x.iter().map(|v| v.tanh()).collect(),
            LayerKind::Residual(inner) => {
                let mut h = x.to_vec();
                for l in inner {
                    h = l.apply(&h);
                }
                x.iter().zip(h).map(|(a, b)| a + b).collect()
            }
            LayerKind::RmsNorm { scale, eps } => {
                let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
                let f = scale / (ms + eps).sqrt();
                x.iter().map(|v| v * f).collect()
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LayerKind::Linear { .. } => "linear",
            LayerKind::Relu => "relu",
            LayerKind::Tanh => "tanh",
            LayerKind::Residual(_) => "residual",
            LayerKind::RmsNorm { .. } => "rms_norm",
        }
    }
}

/// A composition of certified layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzNetwork {
    input_dim: usize,
    layers: Vec<LipschitzLayer>,
}

impl LipschitzNetwork {
    pub fn new(input_dim: usize, layers: Vec<LipschitzLayer>) -> Result<Self, NetError> {
        let mut w = input_dim;
        for (i, l) in layers.iter().enumerate() {
            w = l.output_dim(w, i)?;
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[LipschitzLayer] {
        &self.layers
    }

    /// Product of the layer bounds.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers.iter().map(|l| l.lipschitz_bound).product()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |h, l| l.apply(&h))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearInit {
    /// Entries `N(0, gain² / fan_in)`.
    #[default]
    Gaussian,
    /// Haar orthonormal columns (or rows, when narrowing), scaled by `gain`.
    Orthogonal,
    /// `gain · I`; requires `out == in`.
    Identity,
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    DEFAULT_RMS_EPS
}

/// JSON description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Linear {
        out: usize,
        #[serde(default)]
        init: LinearInit,
        #[serde(default = "one")]
        gain: f64,
        /// Draw bias entries from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`; otherwise zero.
        #[serde(default)]
        bias: bool,
    },
    Relu,
    Tanh,
    Residual {
        inner: Vec<LayerSpec>,
    },
    RmsNorm {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

/// JSON description of a network:
///
/// ```json
/// {"input_dim": 2, "seed": 3, "layers": [
///   {"kind": "linear", "out": 16, "gain": 1.0, "bias": true},
///   {"kind": "relu"},
///   {"kind": "residual", "inner": [{"kind": "linear", "out": 16, "gain": 0.5}, {"kind": "tanh"}]}
/// ]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    #[serde(default)]
    pub seed: u64,
    pub layers: Vec<LayerSpec>,
}

fn build_layer(spec: &LayerSpec, width: &mut usize, rng: &mut Rng) -> Result<LipschitzLayer, NetError> {
    match spec {
        LayerSpec::Linear { out, init, gain, bias } => {
            let (fan_in, out) = (*width, *out);
            if out == 0 {
                return Err(NetError::InvalidSpec("linear layer needs out >= 1".into()));
            }
            let weight = match init {
                LinearInit::Gaussian => {
                    let sd = gain / (fan_in as f64).sqrt();
                    DMatrix::from_fn(out, fan_in, |_, _| sd * Distribution::<f64>::sample(&StandardNormal, &mut *rng))
                }
                LinearInit::Orthogonal if out >= fan_in => random_orthonormal_columns(out, fan_in, rng) * *gain,
                LinearInit::Orthogonal => random_orthonormal_columns(fan_in, out, rng).transpose() * *gain,
                LinearInit::Identity => {
                    if out != fan_in {
                        return Err(NetError::InvalidSpec(format!("identity init needs out == in ({fan_in})")));
                    }
                    DMatrix::identity(out, out) * *gain
                }
            };
            let b = if *bias {
                let bound = 1.0 / (fan_in as f64).sqrt();
                DVector::from_fn(out, |_, _| rng.random_range(-bound..bound))
            } else {
                DVector::zeros(out)
            };
            *width = out;
            LipschitzLayer::linear(weight, b, rng)
        }
        LayerSpec::Relu => Ok(LipschitzLayer::relu()),
        LayerSpec::Tanh => Ok(LipschitzLayer::tanh()),
        LayerSpec::Residual { inner } => {
            let start = *width;
            let layers = inner
                .iter()
                .map(|s| build_layer(s, width, rng))
                .collect::<Result<Vec<_>, _>>()?;
            if *width != start {
                return Err(NetError::InvalidSpec(format!(
                    "residual branch maps width {start} to {}",
                    *width
                )));
            }
            Ok(LipschitzLayer::residual(layers))
        }
        LayerSpec::RmsNorm { scale, eps } => LipschitzLayer::rms_norm(*scale, *eps),
    }
}

/// Instantiates a network with weights drawn from the spec's seed.
pub fn build_random_net(spec: &NetworkSpec) -> Result<LipschitzNetwork, NetError> {
    if spec.input_dim == 0 {
        return Err(NetError::InvalidSpec("input_dim must be positive".into()));
    }
    let mut rng = rng::seeded(spec.seed);
    let mut width = spec.input_dim;
    let layers = spec
        .layers
        .iter()
        .map(|s| build_layer(s, &mut width, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    LipschitzNetwork::new(spec.input_dim, layers)
}

/// A random network of `depth` layers at constant `width`.
///
/// The first layer is a Gaussian linear projection to `width`; later layers
/// are drawn from linear, ReLU, residual(linear, tanh) and tanh.
/// `orthogonal_only` instead stacks orthogonal linear maps (isometries).
pub fn random_net_spec(input_dim: usize, width: usize, depth: usize, orthogonal_only: bool, seed: u64) -> NetworkSpec {
    let mut rng = rng::seeded(seed);
    let linear = |init, gain, bias| LayerSpec::Linear { out: width, init, gain, bias };
    let layers = (0..depth)
        .map(|i| {
            if orthogonal_only {
                return linear(LinearInit::Orthogonal, 1.0, true);
            }
            if i == 0 {
                return linear(LinearInit::Gaussian, 1.0, true);
            }
            match rng.random_range(0..4u8) {
                0 => linear(LinearInit::Gaussian, 1.0, true),
                1 => LayerSpec::Relu,
                2 => LayerSpec::Residual { inner: vec![linear(LinearInit::Gaussian, 0.5, false), LayerSpec::Tanh] },
                _ => LayerSpec::Tanh,
            }
        })
        .collect();
    NetworkSpec { input_dim, seed, layers }
}

/// Layer stack `μ_0, …, μ_L`: the input followed by each layer's output.
pub fn pushforward(net: &LipschitzNetwork, cloud: &PointCloud) -> Result<LayerStack, NetError> {
    if cloud.dim() != net.input_dim() {
        return Err(NetError::ShapeMismatch { layer: 0, expected: net.input_dim(), got: cloud.dim() });
    }
    let total = net.layers().len();
    let depth = |i: usize| if total == 0 { 0.0 } else { i as f64 / total as f64 };
    let mut layers = vec![Layer { name: "input".into(), relative_depth: 0.0, cloud: cloud.clone() }];
    let mut current = cloud.clone();
    for (i, layer) in net.layers().iter().enumerate() {
        let rows: Vec<Vec<f64>> = current.rows().collect::<Vec<_>>().par_iter().map(|r| layer.apply(r)).collect();
        let next = PointCloud::from_rows(&rows).map_err(|e| NetError::InvalidSpec(format!("layer {i} produced {e}")))?;
        let next = match cloud.labels() {
            Some(l) => next.with_labels(l.to_vec()).expect("row count preserved"),
            None => next,
        };
        layers.push(Layer { name: format!("{}:{}", i + 1, layer.kind_name()), relative_depth: depth(i + 1), cloud: next.clone() });
        current = next;
    }
    LayerStack::new("lipschitz-net", layers).map_err(|e| NetError::InvalidSpec(e.to_string()))
}

/// Largest `‖f(x) - f(y)‖ - bound · ‖x - y‖` over `pairs` random pairs of distinct indices.
///
/// Non-positive means the certified bound held on every sampled pair.
pub fn max_lipschitz_excess(input: &PointCloud, output: &PointCloud, bound: f64, pairs: usize, seed: u64) -> f64 {
    let n = input.n_points();
    let mut rng = rng::seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n);
        if n > 1 {
            while b == a {
                b = rng.random_range(0..n);
            }
        }
        let din = squared_distance(input.row(a), input.row(b)).sqrt();
        let dout = squared_distance(output.row(a), output.row(b)).sqrt();
        worst = worst.max(dout - bound * din);
    }
    worst
}

/// A consecutive-layer increase beyond tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub layer: usize,
    /// `d̂_ℓ - d̂_{ℓ-1}`.
    pub increase: f64,
}

/// Layers `ℓ` with `values[ℓ] > values[ℓ-1] + tolerance`.
pub fn find_violations(values: &[f64], tolerance: f64) -> Vec<Violation> {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + tolerance)
        .map(|(i, w)| Violation { layer: i + 1, increase: w[1] - w[0] })
        .collect()
}

pub const DEFAULT_ORACLE_TOLERANCE: f64 = 0.25;
pub const DEFAULT_ORACLE_QUERIES: usize = 50;
pub const DEFAULT_INNER_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub estimator: EstimatorConfig,
    pub tolerance: f64,
    pub oracle_tolerance: f64,
    pub oracle_queries: usize,
    /// Queries are picked among this fraction of layer-0 points nearest the centroid.
    pub inner_fraction: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::twonn(),
            tolerance: 0.0,
            oracle_tolerance: DEFAULT_ORACLE_TOLERANCE,
            oracle_queries: DEFAULT_ORACLE_QUERIES,
            inner_fraction: DEFAULT_INNER_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLayer {
    pub index: usize,
    pub name: String,
    pub relative_depth: f64,
    pub estimate: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub estimator: String,
    pub tolerance: f64,
    pub oracle_tolerance: f64,
    pub per_layer: Vec<AuditLayer>,
    pub violations: Vec<Violation>,
    pub oracle_violations: Vec<Violation>,
    /// Set when the oracle itself increases: the harness, not the network, is suspect.
    pub oracle_violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network_bound: Option<f64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs the estimator and the pointwise oracle on every layer and flags increases.
pub fn audit_monotonicity(
    stack: &LayerStack,
    config: &AuditConfig,
    network_bound: Option<f64>,
) -> Result<AuditReport, Error> {
    let queries = interior_queries(&stack.layers()[0].cloud, config.oracle_queries, config.inner_fraction);
    let mut per_layer = Vec::with_capacity(stack.len());
    for (index, layer) in stack.layers().iter().enumerate() {
        let table = knn_distances(&layer.cloud, config.estimator.required_k())?;
        let estimate = config.estimator.estimate(&table, layer.cloud.dim())?.value;
        let oracle = pointwise_oracle_mean(&layer.cloud, &queries)?.value;
        per_layer.push(AuditLayer {
            index,
            name: layer.name.clone(),
            relative_depth: layer.relative_depth,
            estimate,
            oracle,
        });
    }
    let est: Vec<f64> = per_layer.iter().map(|l| l.estimate).collect();
    let orc: Vec<f64> = per_layer.iter().map(|l| l.oracle).collect();
    let oracle_violations = find_violations(&orc, config.oracle_tolerance);
    Ok(AuditReport {
        estimator: config.estimator.to_string(),
        tolerance: config.tolerance,
        oracle_tolerance: config.oracle_tolerance,
        violations: find_violations(&est, config.tolerance),
        oracle_violation: !oracle_violations.is_empty(),
        oracle_violations,
        per_layer,
        network_bound,
    })
}
