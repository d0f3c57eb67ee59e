//! Point clouds and layer stacks.
//!
//! A [`PointCloud`] is an `n × D` row-major matrix of finite `f64` values with
//! optional per-point class labels. A [`LayerStack`] is the same `n` samples
//! traced through an ordered sequence of layers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("point cloud must contain at least one point")]
    Empty,
    #[error("ambient dimension must be at least 1")]
    ZeroDim,
    #[error("data length {len} is not a multiple of dimension {dim}")]
    RaggedData { len: usize, dim: usize },
    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRows { row: usize, got: usize, expected: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("label vector has length {got}, expected {expected}")]
    LabelLength { got: usize, expected: usize },
    #[error("point cloud carries no labels")]
    NoLabels,
    #[error("layer stack is empty")]
    EmptyStack,
    #[error("layer {layer} has {got} points, expected {expected}")]
    LayerRowMismatch { layer: usize, got: usize, expected: usize },
    #[error("invalid relative depths: {0}")]
    BadDepths(String),
}

/// Finite `n × D` matrix of representation vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    /// Builds a cloud from row-major data. Rejects empty, ragged or non-finite input.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self, CloudError> {
        if dim == 0 {
            return Err(CloudError::ZeroDim);
        }
        if data.is_empty() {
            return Err(CloudError::Empty);
        }
        if data.len() % dim != 0 {
            return Err(CloudError::RaggedData { len: data.len(), dim });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CloudError::NonFinite { row: pos / dim, col: pos % dim });
        }
        Ok(Self { n: data.len() / dim, dim, data, labels: None })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, CloudError> {
        let first = rows.first().ok_or(CloudError::Empty)?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(CloudError::RaggedRows { row: i, got: r.len(), expected: dim });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(dim, data)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, CloudError> {
        if labels.len() != self.n {
            return Err(CloudError::LabelLength { got: labels.len(), expected: self.n });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Multiplies every coordinate by `c`. Labels are kept.
    pub fn scaled(&self, c: f64) -> Self {
        let data = self.data.iter().map(|v| v * c).collect();
        Self { data, ..self.clone() }
    }

    /// Adds `offset` to every row. Panics if the offset length differs from `dim`.
    pub fn translated(&self, offset: &[f64]) -> Self {
        assert_eq!(offset.len(), self.dim, "offset dimension mismatch");
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            for (v, o) in row.iter_mut().zip(offset) {
                *v += o;
            }
        }
        Self { data, ..self.clone() }
    }

    /// Cloud made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Self { n: indices.len(), dim: self.dim, data, labels }
    }

    pub fn validation_report(&self) -> ValidationReport {
        validate_cloud(self.dim, &self.data)
    }
}

/// Violations found in a raw row-major matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: usize,
    /// Rows containing at least one NaN or infinity.
    pub non_finite: usize,
    /// Rows that bitwise-equal an earlier row.
    pub duplicates: usize,
    /// Rows whose entries are all zero.
    pub zero_rows: usize,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.non_finite == 0 && self.duplicates == 0 && self.zero_rows == 0
    }
}

/// Scans raw row-major data; never fails and never modifies the input.
///
/// Duplicate detection is exact bitwise equality, so `0.0` and `-0.0` differ.
pub fn validate_cloud(dim: usize, data: &[f64]) -> ValidationReport {
    let dim = dim.max(1);
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut report = ValidationReport { rows: 0, non_finite: 0, duplicates: 0, zero_rows: 0 };
    for row in data.chunks(dim) {
        report.rows += 1;
        if row.iter().any(|v| !v.is_finite()) {
            report.non_finite += 1;
        }
        if row.iter().all(|&v| v == 0.0) {
            report.zero_rows += 1;
        }
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let count = seen.entry(key).or_insert(0);
        if *count > 0 {
            report.duplicates += 1;
        }
        *count += 1;
    }
    report
}

/// One cloud per distinct label, in order of first appearance.
///
/// Row order inside each class follows the input.
pub fn split_by_label(cloud: &PointCloud) -> Result<Vec<(String, PointCloud)>, CloudError> {
    let labels = cloud.labels().ok_or(CloudError::NoLabels)?;
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups
            .entry(l.as_str())
            .or_insert_with(|| {
                order.push(l.as_str());
                Vec::new()
            })
            .push(i);
    }
    Ok(order
        .into_iter()
        .map(|l| (l.to_string(), cloud.select(&groups[l])))
        .collect())
}

/// A named layer inside a [`LayerStack`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub relative_depth: f64,
    pub cloud: PointCloud,
}

/// Clouds for layers `0..=L` over the same samples.
///
/// Relative depths must be strictly increasing from 0 to 1. A single-layer
/// stack only needs a depth inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    model: String,
    layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(model: impl Into<String>, layers: Vec<Layer>) -> Result<Self, CloudError> {
        let first = layers.first().ok_or(CloudError::EmptyStack)?;
        let n = first.cloud.n_points();
        for (i, l) in layers.iter().enumerate() {
            if l.cloud.n_points() != n {
                return Err(CloudError::LayerRowMismatch {
                    layer: i,
                    got: l.cloud.n_points(),
                    expected: n,
                });
            }
            if !(0.0..=1.0).contains(&l.relative_depth) {
                return Err(CloudError::BadDepths(format!(
                    "layer {i} depth {} outside [0, 1]",
                    l.relative_depth
                )));
            }
        }
        if layers.len() > 1 {
            let last = layers.last().map(|l| l.relative_depth);
            if first.relative_depth != 0.0 || last != Some(1.0) {
                return Err(CloudError::BadDepths("first depth must be 0 and last 1".into()));
            }
            if layers.windows(2).any(|w| w[1].relative_depth <= w[0].relative_depth) {
                return Err(CloudError::BadDepths("depths must be strictly increasing".into()));
            }
        }
        Ok(Self { model: model.into(), layers })
    }

    /// Stack with evenly spaced depths `l / L` and names `layer_<l>`.
    pub fn from_clouds(model: impl Into<String>, clouds: Vec<PointCloud>) -> Result<Self, CloudError> {
        let last = clouds.len().saturating_sub(1).max(1) as f64;
        let layers = clouds
            .into_iter()
            .enumerate()
            .map(|(i, cloud)| Layer { name: format!("layer_{i}"), relative_depth: i as f64 / last, cloud })
            .collect();
        Self::new(model, layers)
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.layers[0].cloud.n_points()
    }

    pub fn clouds(&self) -> impl Iterator<Item = &PointCloud> {
        self.layers.iter().map(|l| &l.cloud)
    }
}
