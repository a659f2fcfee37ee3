//! Building blocks for experiments: cache construction from a declarative description,
//! running a query stream through a retriever, and the lookup-latency microbenchmark.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cache::{ApproximateCache, CacheValue, EvictionPolicy, NoCache};
use crate::error::{invalid, Result};
use crate::flat::{FlatCache, FlatCacheConfig};
use crate::lsh::{LshCache, LshCacheConfig};
use crate::metrics::{LatencySummary, MetricsReport};
use crate::retriever::{RetrievalOutcome, Retriever, RetrieverConfig};
use crate::store::VectorStore;
use crate::vector::{DistanceMetric, Embedding};
use crate::workload::Query;

/// Declarative cache choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CacheSpec {
    None,
    Flat {
        capacity: usize,
        tolerance: f64,
        policy: EvictionPolicy,
    },
    Lsh {
        hash_bits: u32,
        bucket_capacity: usize,
        tolerance: f64,
        policy: EvictionPolicy,
    },
}

impl CacheSpec {
    pub fn kind(&self) -> CacheKind {
        match self {
            CacheSpec::None => CacheKind::None,
            CacheSpec::Flat { .. } => CacheKind::Flat,
            CacheSpec::Lsh { .. } => CacheKind::Lsh,
        }
    }

    /// Builds the cache. `seed` only matters for LSH hyperplanes.
    pub fn build(&self, dim: usize, metric: DistanceMetric, seed: u64) -> Result<Box<dyn ApproximateCache + Send>> {
        Ok(match *self {
            CacheSpec::None => Box::new(NoCache::new(dim, metric)),
            CacheSpec::Flat {
                capacity,
                tolerance,
                policy,
            } => Box::new(FlatCache::new(FlatCacheConfig {
                dim,
                capacity,
                tolerance,
                metric,
                policy,
            })?),
            CacheSpec::Lsh {
                hash_bits,
                bucket_capacity,
                tolerance,
                policy,
            } => Box::new(LshCache::new(LshCacheConfig {
                dim,
                hash_bits,
                bucket_capacity,
                tolerance,
                metric,
                policy,
                seed,
            })?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheKind {
    None,
    Flat,
    Lsh,
}

impl fmt::Display for CacheKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheKind::None => "none",
            CacheKind::Flat => "flat",
            CacheKind::Lsh => "lsh",
        })
    }
}

impl std::str::FromStr for CacheKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(CacheKind::None),
            "flat" => Ok(CacheKind::Flat),
            "lsh" => Ok(CacheKind::Lsh),
            other => Err(invalid("cache", format!("unknown cache kind `{other}`"))),
        }
    }
}

fn key_bits(e: &Embedding) -> Vec<u32> {
    e.as_slice().iter().map(|v| v.to_bits()).collect()
}

/// Result of streaming a workload through one retriever.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcomes: Vec<RetrievalOutcome>,
    pub report: MetricsReport,
    /// Hits whose matched query came from a different base than the incoming one.
    pub cross_base_hits: u64,
}

/// Streams `queries` through a fresh retriever over `cache` and `store`, with shadow oracle
/// queries when `measure_recall` is set.
pub fn run_queries<C, S>(
    cache: C,
    store: S,
    config: RetrieverConfig,
    queries: &[Query],
    measure_recall: bool,
) -> Result<RunResult>
where
    C: ApproximateCache,
    S: VectorStore,
{
    let mut retriever = Retriever::new(cache, store, config)?;
    let mut outcomes = Vec::with_capacity(queries.len());
    // base of every query that was inserted, keyed by its bit pattern
    let mut key_base: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut cross_base_hits = 0;
    for q in queries {
        let outcome = if measure_recall {
            retriever.retrieve_with_oracle(&q.embedding)?
        } else {
            retriever.retrieve(&q.embedding)?
        };
        match &outcome.matched_key {
            Some(key) => {
                if key_base.get(&key_bits(key)).is_some_and(|b| *b != q.base_id) {
                    cross_base_hits += 1;
                }
            }
            None => {
                key_base.insert(key_bits(&q.embedding), q.base_id);
            }
        }
        outcomes.push(outcome);
    }
    let report = MetricsReport::aggregate(&outcomes, retriever.cache().occupancy())?;
    Ok(RunResult {
        outcomes,
        report,
        cross_base_hits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupBenchConfig {
    pub dim: usize,
    pub entry_counts: Vec<usize>,
    /// Timed lookups per entry count.
    pub repetitions: usize,
    /// Signature width for the LSH series; must leave room for the largest entry count.
    pub hash_bits: u32,
    pub bucket_capacity: usize,
    pub seed: u64,
}

impl Default for LookupBenchConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            entry_counts: vec![100, 1_000, 10_000, 100_000],
            repetitions: 2_000,
            hash_bits: 14,
            bucket_capacity: crate::lsh::DEFAULT_BUCKET_CAPACITY,
            seed: 0,
        }
    }
}

/// Lookup cost at one cache fill level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTiming {
    pub cache: CacheKind,
    pub entries: usize,
    pub lookups: usize,
    pub latency: LatencySummary,
    pub distance_ops_mean: f64,
    pub distance_ops_max: u64,
    /// Hyperplane dot products per lookup (LSH only).
    pub hash_dots_per_lookup: f64,
}

fn random_embedding(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    let v: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
    Embedding::new(v).expect("gaussian samples are finite")
}

/// Pre-fills a cache with `n` distinct random keys, then times random lookups that miss
/// (tolerance 0), so every lookup does the full scan its structure requires.
pub fn bench_lookup(kind: CacheKind, config: &LookupBenchConfig) -> Result<Vec<LookupTiming>> {
    if config.repetitions == 0 {
        return Err(invalid("repetitions", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(config.entry_counts.len());
    for &n in &config.entry_counts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ n as u64);
        let row = match kind {
            CacheKind::Flat => {
                let mut cache = FlatCache::new(FlatCacheConfig::new(config.dim, n.max(1), 0.0))?;
                for i in 0..n {
                    cache.insert(
                        random_embedding(&mut rng, config.dim),
                        CacheValue::ids_only(vec![i as u64])?,
                    )?;
                }
                time_lookups(kind, &mut cache, n, config, &mut rng, |_| 0)?
            }
            CacheKind::Lsh => {
                let cfg = LshCacheConfig::new(config.dim, config.hash_bits, 0.0)
                    .with_bucket_capacity(config.bucket_capacity)
                    .with_policy(EvictionPolicy::Lru)
                    .with_seed(config.seed);
                if cfg.theoretical_capacity() < n as u64 {
                    return Err(invalid(
                        "hash_bits",
                        format!("capacity {} cannot hold {n} entries", cfg.theoretical_capacity()),
                    ));
                }
                let mut cache = LshCache::new(cfg)?;
                let budget = n.saturating_mul(20).max(100);
                let mut attempts = 0;
                while cache.len() < n {
                    if attempts == budget {
                        return Err(invalid(
                            "entry_counts",
                            format!("could not reach {n} entries with {} buckets", 1u64 << config.hash_bits),
                        ));
                    }
                    attempts += 1;
                    cache.insert(
                        random_embedding(&mut rng, config.dim),
                        CacheValue::ids_only(vec![attempts as u64])?,
                    )?;
                }
                time_lookups(kind, &mut cache, n, config, &mut rng, |c: &LshCache| {
                    c.hash_dot_products()
                })?
            }
            CacheKind::None => return Err(invalid("cache", "nothing to benchmark without a cache")),
        };
        rows.push(row);
    }
    Ok(rows)
}

fn time_lookups<C: ApproximateCache>(
    kind: CacheKind,
    cache: &mut C,
    entries: usize,
    config: &LookupBenchConfig,
    rng: &mut ChaCha8Rng,
    hash_dots: impl Fn(&C) -> u64,
) -> Result<LookupTiming> {
    let queries: Vec<Embedding> = (0..config.repetitions)
        .map(|_| random_embedding(rng, config.dim))
        .collect();
    // warm-up pass over a slice of the queries
    for q in queries.iter().take(config.repetitions.min(200)) {
        std::hint::black_box(cache.lookup(q)?.is_some());
    }
    let dots_before = hash_dots(cache);
    let mut samples = Vec::with_capacity(queries.len());
    let mut ops = Vec::with_capacity(queries.len());
    for q in &queries {
        let before = cache.distance_computations();
        let t = Instant::now();
        let hit = cache.lookup(q)?.is_some();
        samples.push(t.elapsed());
        std::hint::black_box(hit);
        ops.push(cache.distance_computations() - before);
    }
    let dots = hash_dots(cache) - dots_before;
    Ok(LookupTiming {
        cache: kind,
        entries,
        lookups: queries.len(),
        latency: LatencySummary::from_durations(samples),
        distance_ops_mean: ops.iter().sum::<u64>() as f64 / ops.len() as f64,
        distance_ops_max: ops.iter().copied().max().unwrap_or(0),
        hash_dots_per_lookup: dots as f64 / queries.len() as f64,
    })
}

/// CPU model string for tagging wall-clock results, `"unknown"` when unavailable.
pub fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".to_string())
}
