//! Running summary statistics.
//!
//! Accumulation uses Welford updates and Chan's pairwise merge, so partial
//! results from blocks can be combined in a fixed order and give the same
//! answer regardless of how the work was split (up to rounding).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb, nt) = (self.count as f64, other.count as f64, total as f64);
        self.mean += delta * nb / nt;
        self.m2 += other.m2 + delta * delta * na * nb / nt;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2.max(0.0) / (self.count - 1) as f64).sqrt()
        }
    }

    pub fn summary(&self) -> Summary {
        let std = self.std();
        let stderr = if self.count == 0 {
            0.0
        } else {
            std / (self.count as f64).sqrt()
        };
        Summary {
            mean: self.mean,
            std,
            stderr,
            count: self.count,
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Mean, sample standard deviation and standard error (`std / sqrt(count)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub count: u64,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Self {
        values.into_iter().collect::<Moments>().summary()
    }

    /// Normal-approximation confidence half-width, `z * stderr`.
    pub fn half_width(&self, z: f64) -> f64 {
        z * self.stderr
    }
}

/// Least-squares slope of `y` on `x` with an intercept.
///
/// `y` is shifted by its first element before the fit, so a constant `y`
/// yields a slope of exactly zero.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y0 = y[0];
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - x_mean;
        sxy += dx * (yi - y0);
        sxx += dx * dx;
    }
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Least-squares slope of a line through the origin.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> Option<f64> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= 0.0 || x.len() != y.len() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Some(sxy / sxx)
}
