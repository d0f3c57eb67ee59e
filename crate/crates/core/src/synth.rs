//! Synthetic data with known intrinsic dimension.
//!
//! Random streams (see [`crate::rng`]): component `c` of a dataset draws from
//! ChaCha stream `c` of the dataset seed, the ambient rotation from stream
//! [`ROTATION_STREAM`], and the finite vocabulary uses stream 0 for the
//! embedding table and stream 1 for the token draws.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudError, PointCloud};
use crate::rng::{self, Rng};

pub const ROTATION_STREAM: u64 = u64::MAX;
/// Spacing between consecutive components of a union along the first axis.
pub const DEFAULT_UNION_SPACING: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("ambient dimension {ambient} is smaller than {needed}")]
    AmbientTooSmall { ambient: usize, needed: usize },
    #[error("components {a} and {b} are only {distance} apart; unit balls need more than 2")]
    OverlappingComponents { a: usize, b: usize, distance: f64 },
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` points uniform in the unit `dim`-ball: Gaussian direction times `U^{1/dim}`.
pub fn sample_uniform_ball_with(dim: usize, n: usize, rng: &mut Rng) -> Result<PointCloud, SynthError> {
    if dim == 0 || n == 0 {
        return Err(SynthError::InvalidSpec("ball needs dim >= 1 and n >= 1".into()));
    }
    let mut data = Vec::with_capacity(n * dim);
    let mut dir = vec![0.0; dim];
    for _ in 0..n {
        let norm = loop {
            dir.iter_mut().for_each(|v| *v = gaussian(rng));
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                break norm;
            }
        };
        let u: f64 = rng.random();
        let radius = u.powf(1.0 / dim as f64);
        data.extend(dir.iter().map(|v| v / norm * radius));
    }
    Ok(PointCloud::from_flat(dim, data)?)
}

pub fn sample_uniform_ball(dim: usize, n: usize, seed: u64) -> Result<PointCloud, SynthError> {
    sample_uniform_ball_with(dim, n, &mut rng::stream(seed, 0))
}

/// Haar-distributed `rows × cols` matrix with orthonormal columns (`rows ≥ cols`).
///
/// These are the first `cols` columns of the Q factor of a Gaussian
/// `rows × rows` matrix whose leading columns are the same draws, with the
/// usual sign correction `Q · diag(sign R_ii)`.
pub fn random_orthonormal_columns(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    assert!(rows >= cols && cols >= 1);
    let g = DMatrix::from_fn(rows, cols, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed `dim × dim` orthogonal matrix.
pub fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    random_orthonormal_columns(dim, dim, &mut rng::stream(seed, ROTATION_STREAM))
}

/// Maps each row `x` to `Q x`, where `Q` has `cloud.dim()` columns.
pub fn apply_linear(cloud: &PointCloud, q: &DMatrix<f64>) -> PointCloud {
    assert_eq!(q.ncols(), cloud.dim(), "matrix/cloud dimension mismatch");
    let x = DMatrix::from_row_slice(cloud.n_points(), cloud.dim(), cloud.data());
    let y = x * q.transpose();
    let data: Vec<f64> = y.transpose().as_slice().to_vec();
    let out = PointCloud::from_flat(q.nrows(), data).expect("linear image of a finite cloud is finite");
    match cloud.labels() {
        Some(l) => out.with_labels(l.to_vec()).expect("same length"),
        None => out,
    }
}

fn zero_pad(cloud: &PointCloud, ambient: usize) -> PointCloud {
    let dim = cloud.dim();
    let mut data = Vec::with_capacity(cloud.n_points() * ambient);
    for r in cloud.rows() {
        data.extend_from_slice(r);
        data.extend(std::iter::repeat_n(0.0, ambient - dim));
    }
    let out = PointCloud::from_flat(ambient, data).expect("padding keeps values finite");
    match cloud.labels() {
        Some(l) => out.with_labels(l.to_vec()).expect("same length"),
        None => out,
    }
}

/// Zero-pads to `ambient` columns and optionally applies a random rotation.
///
/// Only the first `cloud.dim()` columns of the `ambient × ambient` rotation
/// act on a zero-padded vector, so just those columns are generated.
pub fn embed_ambient(cloud: &PointCloud, ambient: usize, rotate: bool, seed: u64) -> Result<PointCloud, SynthError> {
    if ambient < cloud.dim() {
        return Err(SynthError::AmbientTooSmall { ambient, needed: cloud.dim() });
    }
    if !rotate {
        return Ok(if ambient == cloud.dim() { cloud.clone() } else { zero_pad(cloud, ambient) });
    }
    let q = random_orthonormal_columns(ambient, cloud.dim(), &mut rng::stream(seed, ROTATION_STREAM));
    Ok(apply_linear(cloud, &q))
}

/// `V` Gaussian embedding vectors in `D` dimensions, then `n` draws with replacement.
pub fn sample_finite_vocabulary(vocab: usize, dim: usize, n: usize, seed: u64) -> Result<PointCloud, SynthError> {
    if vocab == 0 || dim == 0 || n == 0 {
        return Err(SynthError::InvalidSpec("vocabulary needs V, D, n >= 1".into()));
    }
    let mut table_rng = rng::stream(seed, 0);
    let table: Vec<f64> = (0..vocab * dim).map(|_| gaussian(&mut table_rng)).collect();
    let mut draw_rng = rng::stream(seed, 1);
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let t = draw_rng.random_range(0..vocab);
        data.extend_from_slice(&table[t * dim..(t + 1) * dim]);
    }
    Ok(PointCloud::from_flat(dim, data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    UniformBall,
    UnionOfBalls,
    FiniteVocabulary,
}

/// Declarative dataset description, accepted as JSON by the CLI.
///
/// ```json
/// {"kind": "union_of_balls", "intrinsic_dims": [1, 2], "ambient_dim": 3,
///  "n_points": [5000, 5000], "offsets": [[0,0,0], [4,0,0]], "rotate": false, "seed": 7}
/// ```
///
/// `n_points` may be a single number shared by all components. Missing
/// `offsets` place component `c` at `4c` along the first axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    #[serde(default)]
    pub intrinsic_dims: Vec<usize>,
    pub ambient_dim: usize,
    pub n_points: PointCounts,
    #[serde(default)]
    pub offsets: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub rotate: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vocab_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointCounts {
    Shared(usize),
    PerComponent(Vec<usize>),
}

impl PointCounts {
    fn get(&self, c: usize) -> Option<usize> {
        match self {
            Self::Shared(n) => Some(*n),
            Self::PerComponent(v) => v.get(c).copied(),
        }
    }
}

impl ManifoldSpec {
    pub fn uniform_ball(dim: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: ManifoldKind::UniformBall,
            intrinsic_dims: vec![dim],
            ambient_dim: dim,
            n_points: PointCounts::Shared(n),
            offsets: None,
            rotate: false,
            seed,
            vocab_size: None,
        }
    }

    fn offsets(&self) -> Vec<Vec<f64>> {
        match &self.offsets {
            Some(o) => o.clone(),
            None => (0..self.intrinsic_dims.len())
                .map(|c| {
                    let mut v = vec![0.0; self.ambient_dim];
                    v[0] = DEFAULT_UNION_SPACING * c as f64;
                    v
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.ambient_dim == 0 {
            return invalid("ambient_dim must be positive");
        }
        match self.kind {
            ManifoldKind::FiniteVocabulary => {
                if self.vocab_size.unwrap_or(0) == 0 {
                    return invalid("finite_vocabulary needs vocab_size >= 1");
                }
                if self.n_points.get(0).unwrap_or(0) == 0 {
                    return invalid("n_points must be positive");
                }
                return Ok(());
            }
            ManifoldKind::UniformBall if self.intrinsic_dims.len() != 1 => {
                return invalid("uniform_ball takes exactly one intrinsic dimension");
            }
            _ => {}
        }
        if self.intrinsic_dims.is_empty() {
            return invalid("intrinsic_dims is empty");
        }
        for (c, &d) in self.intrinsic_dims.iter().enumerate() {
            if d == 0 {
                return invalid("intrinsic dimensions must be positive");
            }
            if d > self.ambient_dim {
                return Err(SynthError::AmbientTooSmall { ambient: self.ambient_dim, needed: d });
            }
            if self.n_points.get(c).unwrap_or(0) == 0 {
                return invalid(&format!("component {c} needs a positive point count"));
            }
        }
        if self.kind == ManifoldKind::UnionOfBalls {
            let offsets = self.offsets();
            if offsets.len() != self.intrinsic_dims.len() {
                return invalid("one offset per component is required");
            }
            if offsets.iter().any(|o| o.len() != self.ambient_dim || o.iter().any(|v| !v.is_finite())) {
                return invalid("offsets must be finite vectors of length ambient_dim");
            }
            for a in 0..offsets.len() {
                for b in a + 1..offsets.len() {
                    let distance = crate::knn::squared_distance(&offsets[a], &offsets[b]).sqrt();
                    if distance <= 2.0 {
                        return Err(SynthError::OverlappingComponents { a, b, distance });
                    }
                }
            }
        }
        Ok(())
    }

    /// Generates the dataset. Unions carry labels `c0`, `c1`, ...
    pub fn generate(&self) -> Result<PointCloud, SynthError> {
        self.validate()?;
        let cloud = match self.kind {
            ManifoldKind::FiniteVocabulary => {
                let n = self.n_points.get(0).expect("validated");
                let vocab = self.vocab_size.expect("validated");
                return sample_finite_vocabulary(vocab, self.ambient_dim, n, self.seed);
            }
            ManifoldKind::UniformBall => {
                let n = self.n_points.get(0).expect("validated");
                sample_uniform_ball(self.intrinsic_dims[0], n, self.seed)?
            }
            ManifoldKind::UnionOfBalls => return sample_union(self),
        };
        embed_ambient(&cloud, self.ambient_dim, self.rotate, self.seed)
    }
}

/// Concatenates unit balls placed at their offsets, labeled by component.
pub fn sample_union(spec: &ManifoldSpec) -> Result<PointCloud, SynthError> {
    if spec.kind != ManifoldKind::UnionOfBalls {
        return Err(SynthError::InvalidSpec("sample_union needs kind union_of_balls".into()));
    }
    spec.validate()?;
    let ambient = spec.ambient_dim;
    let offsets = spec.offsets();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (c, &d) in spec.intrinsic_dims.iter().enumerate() {
        let n = spec.n_points.get(c).expect("validated");
        let ball = sample_uniform_ball_with(d, n, &mut rng::stream(spec.seed, c as u64))?;
        let placed = zero_pad(&ball, ambient).translated(&offsets[c]);
        data.extend_from_slice(placed.data());
        labels.extend(std::iter::repeat_n(format!("c{c}"), n));
    }
    let cloud = PointCloud::from_flat(ambient, data)?.with_labels(labels)?;
    if spec.rotate {
        let q = random_orthonormal_columns(ambient, ambient, &mut rng::stream(spec.seed, ROTATION_STREAM));
        return Ok(apply_linear(&cloud, &q));
    }
    Ok(cloud)
}
