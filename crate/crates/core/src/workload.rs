//! Synthetic query streams and clustered corpora.
//!
//! A workload is a set of well-separated base embeddings ("questions") and a stream of
//! queries, each a base plus a bounded perturbation ("rephrasing"). Bases are drawn either
//! with Zipf-skewed popularity or exactly four times each.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::store::Corpus;
use crate::vector::{kernels, Embedding};
use crate::DocId;

/// Rejection-sampling budget per base embedding.
pub const MAX_ATTEMPTS_PER_BASE: usize = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadMode {
    /// Every base once, then `N - M` further Zipf-distributed draws, shuffled.
    #[default]
    ZipfRephrase,
    /// Every base exactly four times, shuffled. `total_queries` is ignored (it is `4 * M`).
    UniformRepeat4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// Number of distinct bases `M`.
    pub base_count: usize,
    /// Stream length `N`.
    pub total_queries: usize,
    /// Zipf exponent `s`; `0` is uniform.
    pub zipf_exponent: f64,
    /// Maximum norm `epsilon` of the noise added to a base.
    pub perturbation_radius: f64,
    /// Minimum pairwise distance `delta` between bases.
    pub base_separation: f64,
    pub dim: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: WorkloadMode,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_count == 0 {
            return Err(invalid("base_count", "must be at least 1"));
        }
        if self.total_queries == 0 {
            return Err(invalid("total_queries", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(invalid("zipf_exponent", "must be a finite value >= 0"));
        }
        if !(self.perturbation_radius.is_finite() && self.perturbation_radius >= 0.0) {
            return Err(invalid("perturbation_radius", "must be a finite value >= 0"));
        }
        if !(self.base_separation.is_finite() && self.base_separation > 0.0) {
            return Err(invalid("base_separation", "must be a finite value > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub embedding: Embedding,
    /// Index of the base this query was derived from.
    pub base_id: usize,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub bases: Vec<Embedding>,
    pub queries: Vec<Query>,
}

impl Workload {
    /// Occurrences of each base in the stream, indexed by base id.
    pub fn base_frequencies(&self) -> Vec<usize> {
        let mut counts = vec![0; self.bases.len()];
        for q in &self.queries {
            counts[q.base_id] += 1;
        }
        counts
    }
}

/// Finite Zipf distribution over ranks `1..=n`, sampled by inverting its CDF.
#[derive(Debug, Clone)]
pub struct Zipf {
    cdf: Vec<f64>,
    norm: f64,
    exponent: f64,
}

impl Zipf {
    pub fn new(n: usize, exponent: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("base_count", "must be at least 1"));
        }
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(invalid("zipf_exponent", "must be a finite value >= 0"));
        }
        let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
        let norm: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / norm;
                acc
            })
            .collect();
        // guard against the last partial sum landing just under 1
        *cdf.last_mut().expect("n >= 1") = 1.0;
        Ok(Self { cdf, norm, exponent })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Probability of 1-based `rank`.
    pub fn pmf(&self, rank: usize) -> f64 {
        (rank as f64).powf(-self.exponent) / self.norm
    }

    /// A 0-based rank (`0` is the most popular).
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|c| *c <= u).min(self.cdf.len() - 1)
    }
}

fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// A point drawn uniformly from the `dim`-ball of radius `radius`.
pub fn ball_noise(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f32> {
    if radius == 0.0 {
        return vec![0.0; dim];
    }
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / dim as f64);
        return dir.iter().map(|v| (v / norm * r) as f32).collect();
    }
}

fn add(base: &[f32], noise: &[f32]) -> Vec<f32> {
    base.iter().zip(noise).map(|(b, n)| b + n).collect()
}

/// Draws `count` standard-normal embeddings that are pairwise at least `separation` apart.
pub fn separated_bases(rng: &mut impl Rng, count: usize, dim: usize, separation: f64) -> Result<Vec<Embedding>> {
    let min_sq = separation * separation;
    let mut bases: Vec<Vec<f32>> = Vec::with_capacity(count);
    for i in 0..count {
        let mut attempts = 0;
        let candidate = loop {
            if attempts == MAX_ATTEMPTS_PER_BASE {
                return Err(Error::Generation(format!(
                    "could not place base {i} of {count} at separation {separation} in dimension {dim} \
                     after {MAX_ATTEMPTS_PER_BASE} attempts"
                )));
            }
            attempts += 1;
            let c = gaussian(rng, dim);
            if bases.iter().all(|b| kernels::l2_squared(b, &c) >= min_sq) {
                break c;
            }
        };
        bases.push(candidate);
    }
    bases.into_iter().map(Embedding::new).collect()
}

pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bases = separated_bases(&mut rng, spec.base_count, spec.dim, spec.base_separation)?;

    let mut order: Vec<usize> = match spec.mode {
        WorkloadMode::UniformRepeat4 => (0..spec.base_count).flat_map(|b| [b; 4]).collect(),
        WorkloadMode::ZipfRephrase => {
            let zipf = Zipf::new(spec.base_count, spec.zipf_exponent)?;
            let covered = if spec.total_queries >= spec.base_count {
                spec.base_count
            } else {
                0
            };
            let mut order: Vec<usize> = (0..covered).collect();
            order.extend((covered..spec.total_queries).map(|_| zipf.sample(&mut rng)));
            order
        }
    };
    order.shuffle(&mut rng);

    let queries = order
        .into_iter()
        .map(|base_id| {
            let noise = ball_noise(&mut rng, spec.dim, spec.perturbation_radius);
            let embedding = Embedding::new(add(bases[base_id].as_slice(), &noise))?;
            Ok(Query { embedding, base_id })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Workload { bases, queries })
}

/// Documents clustered around workload bases, so each base has its own nearest documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub docs_per_base: usize,
    /// Maximum distance between a document and its base.
    pub doc_radius: f64,
    /// Extra documents drawn from the same standard normal as the bases.
    #[serde(default)]
    pub background_docs: usize,
    pub seed: u64,
}

/// Base `i`'s documents get ids `i * docs_per_base ..`; background documents follow.
pub fn clustered_corpus(bases: &[Embedding], spec: &CorpusSpec) -> Result<Corpus> {
    if spec.docs_per_base == 0 && spec.background_docs == 0 {
        return Err(invalid("docs_per_base", "corpus would be empty"));
    }
    if !(spec.doc_radius.is_finite() && spec.doc_radius >= 0.0) {
        return Err(invalid("doc_radius", "must be a finite value >= 0"));
    }
    let dim = bases
        .first()
        .map(Embedding::dim)
        .ok_or_else(|| invalid("bases", "empty"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut next: DocId = 0;
    for base in bases {
        for _ in 0..spec.docs_per_base {
            let noise = ball_noise(&mut rng, dim, spec.doc_radius);
            data.extend(add(base.as_slice(), &noise));
            ids.push(next);
            next += 1;
        }
    }
    for _ in 0..spec.background_docs {
        data.extend(gaussian(&mut rng, dim));
        ids.push(next);
        next += 1;
    }
    Corpus::from_parts(ids, data, dim)
}
