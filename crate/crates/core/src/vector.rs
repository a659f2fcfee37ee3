//! Embeddings and the distance kernels shared by the caches, the store and the re-ranker.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A fixed-dimension, finite, `f32` vector. Used for queries, cache keys and documents.
#[derive(Clone, PartialEq)]
pub struct Embedding(Box<[f32]>);

impl Embedding {
    /// Validates `values` (non-empty, all finite) and wraps them.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEmbedding);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values.into_boxed_slice()))
    }

    /// Like [`Embedding::new`] but borrows the input.
    pub fn from_slice(values: &[f32]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0.into_vec()
    }

    pub fn norm(&self) -> f64 {
        kernels::dot(&self.0, &self.0).sqrt()
    }

    /// Returns the unit-norm copy of this embedding, as expected when cosine similarity
    /// is served through [`DistanceMetric::InnerProduct`]. A zero vector is returned unchanged.
    pub fn normalized(&self) -> Embedding {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        Embedding(self.0.iter().map(|v| (f64::from(*v) / norm) as f32).collect())
    }
}

impl fmt::Debug for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 4;
        write!(f, "Embedding(d={}, [", self.dim())?;
        for (i, v) in self.0.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.dim() > SHOWN {
            write!(f, ", ..")?;
        }
        write!(f, "])")
    }
}

impl TryFrom<Vec<f32>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Self::new(values)
    }
}

impl AsRef<[f32]> for Embedding {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Distance function shared by a cache and the store behind it. Smaller is always more similar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Euclidean distance.
    #[default]
    L2,
    /// Negated dot product. Cosine similarity maps onto this for unit-norm inputs.
    InnerProduct,
}

impl DistanceMetric {
    /// Distance between two equal-length slices. Length is only checked in debug builds.
    #[inline]
    pub fn eval(self, a: &[f32], b: &[f32]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            DistanceMetric::L2 => kernels::l2_squared(a, b).sqrt(),
            DistanceMetric::InnerProduct => -kernels::dot(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::L2 => "l2",
            DistanceMetric::InnerProduct => "inner_product",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "euclidean" => Ok(DistanceMetric::L2),
            "ip" | "inner_product" | "inner-product" | "cosine" => Ok(DistanceMetric::InnerProduct),
            other => Err(crate::error::invalid("metric", format!("unknown metric `{other}`"))),
        }
    }
}

pub fn distance(a: &Embedding, b: &Embedding, metric: DistanceMetric) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(metric.eval(a.as_slice(), b.as_slice()))
}

/// Distances from `query` to every key, in key order.
pub fn batch_distances(query: &Embedding, keys: &[Embedding], metric: DistanceMetric) -> Result<Vec<f64>> {
    if let Some(bad) = keys.iter().find(|k| k.dim() != query.dim()) {
        return Err(Error::DimensionMismatch {
            expected: query.dim(),
            actual: bad.dim(),
        });
    }
    Ok(keys
        .iter()
        .map(|k| metric.eval(query.as_slice(), k.as_slice()))
        .collect())
}

/// Raw distance kernels.
///
/// Components are `f32`; every accumulation happens in `f64`. The default kernels split the
/// input into [`LANES`]-wide chunks with independent accumulators so the compiler can map them
/// onto vector registers; the `_scalar` variants are the straight loops they are tested against.
pub mod kernels {
    pub const LANES: usize = 8;

    #[inline]
    pub fn l2_squared(a: &[f32], b: &[f32]) -> f64 {
        let mut acc = [0.0f64; LANES];
        let ca = a.chunks_exact(LANES);
        let cb = b.chunks_exact(LANES);
        let tail: f64 = ca
            .remainder()
            .iter()
            .zip(cb.remainder())
            .map(|(x, y)| {
                let d = f64::from(*x) - f64::from(*y);
                d * d
            })
            .sum();
        for (x, y) in ca.zip(cb) {
            for i in 0..LANES {
                let d = f64::from(x[i]) - f64::from(y[i]);
                acc[i] += d * d;
            }
        }
        reduce(acc) + tail
    }

    #[inline]
    pub fn dot(a: &[f32], b: &[f32]) -> f64 {
        let mut acc = [0.0f64; LANES];
        let ca = a.chunks_exact(LANES);
        let cb = b.chunks_exact(LANES);
        let tail: f64 = ca
            .remainder()
            .iter()
            .zip(cb.remainder())
            .map(|(x, y)| f64::from(*x) * f64::from(*y))
            .sum();
        for (x, y) in ca.zip(cb) {
            for i in 0..LANES {
                acc[i] += f64::from(x[i]) * f64::from(y[i]);
            }
        }
        reduce(acc) + tail
    }

    pub fn l2_squared_scalar(a: &[f32], b: &[f32]) -> f64 {
        let mut sum = 0.0f64;
        for i in 0..a.len() {
            let d = f64::from(a[i]) - f64::from(b[i]);
            sum += d * d;
        }
        sum
    }

    pub fn dot_scalar(a: &[f32], b: &[f32]) -> f64 {
        let mut sum = 0.0f64;
        for i in 0..a.len() {
            sum += f64::from(a[i]) * f64::from(b[i]);
        }
        sum
    }

    #[inline(always)]
    fn reduce(acc: [f64; LANES]) -> f64 {
        ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
    }
}
