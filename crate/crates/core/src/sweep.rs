//! Seeded replication sweeps over synthetic uniform balls.
//!
//! Replicate `r` for setting `s` (a true dimension, or an ambient dimension)
//! draws its data from `derive_seed(seed, [s, r])`, so every cell of a sweep
//! is reproducible on its own. Replicates run in parallel and are gathered in
//! replicate order. Confidence intervals are `mean ± 1.96 · std / sqrt(reps)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::EstimatorConfig;
use crate::knn::knn_distances;
use crate::rng::derive_seed;
use crate::stats::Summary;
use crate::synth::{embed_ambient, sample_uniform_ball};

pub const Z_95: f64 = 1.96;

/// One `(setting, method)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub true_dim: usize,
    pub ambient_dim: usize,
    pub rotate: bool,
    pub method: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std: f64,
    pub reps: usize,
    pub values: Vec<f64>,
}

impl SweepRow {
    fn from_values(true_dim: usize, ambient_dim: usize, rotate: bool, method: &EstimatorConfig, values: Vec<f64>) -> Self {
        let s = Summary::of(values.iter().copied());
        let half = s.half_width(Z_95);
        Self {
            true_dim,
            ambient_dim,
            rotate,
            method: method.to_string(),
            mean: s.mean,
            ci_low: s.mean - half,
            ci_high: s.mean + half,
            std: s.std,
            reps: values.len(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweepConfig {
    pub dims: Vec<usize>,
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<EstimatorConfig>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientSweepConfig {
    pub true_dim: usize,
    pub ambient: Vec<usize>,
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<EstimatorConfig>,
    pub rotate: Vec<bool>,
    pub seed: u64,
}

fn check(reps: usize, methods: &[EstimatorConfig]) -> Result<usize, Error> {
    if reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    Ok(methods.iter().map(EstimatorConfig::required_k).max().unwrap_or(2))
}

/// Per-replicate estimates, indexed `[rep][method]`.
fn replicate<F>(reps: usize, methods: &[EstimatorConfig], k: usize, make: F) -> Result<Vec<Vec<f64>>, Error>
where
    F: Fn(usize) -> Result<crate::cloud::PointCloud, Error> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let cloud = make(r)?;
            let table = knn_distances(&cloud, k)?;
            methods
                .iter()
                .map(|m| Ok(m.estimate(&table, cloud.dim())?.value))
                .collect::<Result<Vec<f64>, Error>>()
        })
        .collect()
}

fn transpose_rows(per_rep: &[Vec<f64>], method: usize) -> Vec<f64> {
    per_rep.iter().map(|r| r[method]).collect()
}

/// Estimated vs true dimension on uniform `d`-balls; rows ordered by dimension, then method.
pub fn sweep_bias(config: &BiasSweepConfig) -> Result<Vec<SweepRow>, Error> {
    let k = check(config.reps, &config.methods)?;
    let mut rows = Vec::with_capacity(config.dims.len() * config.methods.len());
    for &d in &config.dims {
        let per_rep = replicate(config.reps, &config.methods, k, |r| {
            Ok(sample_uniform_ball(d, config.n, derive_seed(config.seed, &[d as u64, r as u64]))?)
        })?;
        for (mi, m) in config.methods.iter().enumerate() {
            rows.push(SweepRow::from_values(d, d, false, m, transpose_rows(&per_rep, mi)));
        }
    }
    Ok(rows)
}

/// Fixed true dimension embedded in growing ambient spaces; rows ordered by
/// ambient dimension, then rotation flag, then method.
pub fn sweep_ambient(config: &AmbientSweepConfig) -> Result<Vec<SweepRow>, Error> {
    let k = check(config.reps, &config.methods)?;
    let d = config.true_dim;
    let mut rows = Vec::new();
    for &ambient in &config.ambient {
        if ambient < d {
            return Err(Error::Config(format!("ambient dimension {ambient} is below true dimension {d}")));
        }
        for &rotate in &config.rotate {
            let per_rep = replicate(config.reps, &config.methods, k, |r| {
                let seed = derive_seed(config.seed, &[ambient as u64, r as u64]);
                let ball = sample_uniform_ball(d, config.n, seed)?;
                Ok(embed_ambient(&ball, ambient, rotate, seed)?)
            })?;
            for (mi, m) in config.methods.iter().enumerate() {
                rows.push(SweepRow::from_values(d, ambient, rotate, m, transpose_rows(&per_rep, mi)));
            }
        }
    }
    Ok(rows)
}

/// `(max - min) / mean` of the row means.
pub fn relative_spread(rows: &[&SweepRow]) -> f64 {
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    (max - min) / avg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BiasSweepConfig {
        BiasSweepConfig {
            dims: vec![2, 4],
            n: 300,
            reps: 3,
            methods: vec![EstimatorConfig::twonn(), EstimatorConfig::mle(5)],
            seed: 9,
        }
    }

    #[test]
    fn shape_and_determinism() {
        let a = sweep_bias(&small()).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].method, "twonn");
        assert_eq!(a[1].method, "mle:k=5");
        assert_eq!(a, sweep_bias(&small()).unwrap());
    }

    #[test]
    fn single_rep_collapses_interval() {
        let rows = sweep_bias(&BiasSweepConfig { reps: 1, ..small() }).unwrap();
        for r in rows {
            assert_eq!(r.ci_low, r.mean);
            assert_eq!(r.ci_high, r.mean);
        }
    }

    #[test]
    fn rejects_empty_config() {
        assert!(sweep_bias(&BiasSweepConfig { reps: 0, ..small() }).is_err());
        assert!(sweep_bias(&BiasSweepConfig { methods: vec![], ..small() }).is_err());
    }
}
