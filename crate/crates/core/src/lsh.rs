//! Random-hyperplane LSH cache.
//!
//! A query's `L`-bit signature (bit `i` set iff `q . r_i >= 0`, first hyperplane in the most
//! significant bit) selects one of `2^L` buckets. Each bucket is an independent
//! [`FlatCache`] of capacity `b` with its own eviction, so the whole structure behaves as a
//! `b`-way set-associative cache. Buckets are allocated on their first insert.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cache::{ApproximateCache, CacheEntry, CacheHit, CacheValue, EvictionPolicy, Occupancy};
use crate::error::{check_dim, invalid, Result};
use crate::flat::{validate_tolerance, FlatCache, FlatCacheConfig};
use crate::vector::{kernels, DistanceMetric, Embedding};

/// Largest supported signature width.
pub const MAX_HASH_BITS: u32 = 63;

/// Bucket index: the `L`-bit signature packed into the low bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BucketId(pub u64);

/// `L` seeded Gaussian normal vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneSet {
    normals: Vec<f32>,
    dim: usize,
    bits: u32,
    seed: u64,
}

impl HyperplaneSet {
    /// Draws `bits` normals of dimension `dim` with i.i.d. standard normal components from a
    /// ChaCha stream keyed by `seed`. The same arguments always give identical normals.
    pub fn generate(dim: usize, bits: u32, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if bits > MAX_HASH_BITS {
            return Err(invalid("hash_bits", format!("must be <= {MAX_HASH_BITS}, got {bits}")));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut normals = Vec::with_capacity(dim * bits as usize);
        for _ in 0..bits {
            loop {
                let row: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if row.iter().any(|v| *v != 0.0) {
                    normals.extend(row);
                    break;
                }
            }
        }
        Ok(Self {
            normals,
            dim,
            bits,
            seed,
        })
    }

    /// Builds a set from explicit normals (one per hyperplane, first = most significant bit).
    pub fn from_normals(normals: &[Embedding]) -> Result<Self> {
        let dim = normals
            .first()
            .map(Embedding::dim)
            .ok_or_else(|| invalid("normals", "empty"))?;
        if normals.len() > MAX_HASH_BITS as usize {
            return Err(invalid("normals", format!("at most {MAX_HASH_BITS} hyperplanes")));
        }
        let mut flat = Vec::with_capacity(dim * normals.len());
        for n in normals {
            check_dim(dim, n.dim())?;
            if n.as_slice().iter().all(|v| *v == 0.0) {
                return Err(invalid("normals", "zero normal vector"));
            }
            flat.extend_from_slice(n.as_slice());
        }
        Ok(Self {
            normals: flat,
            dim,
            bits: normals.len() as u32,
            seed: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normal(&self, i: usize) -> &[f32] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn hash(&self, query: &Embedding) -> Result<BucketId> {
        check_dim(self.dim, query.dim())?;
        Ok(self.hash_slice(query.as_slice()))
    }

    pub(crate) fn hash_slice(&self, query: &[f32]) -> BucketId {
        let mut code = 0u64;
        for normal in self.normals.chunks_exact(self.dim) {
            let bit = kernels::dot(query, normal) >= 0.0;
            code = (code << 1) | u64::from(bit);
        }
        BucketId(code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshCacheConfig {
    pub dim: usize,
    /// Signature width `L`; `0` puts everything in a single bucket.
    pub hash_bits: u32,
    /// Per-bucket capacity `b`.
    #[serde(default = "default_bucket_capacity")]
    pub bucket_capacity: usize,
    pub tolerance: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
    #[serde(default)]
    pub policy: EvictionPolicy,
    #[serde(default)]
    pub seed: u64,
}

pub const DEFAULT_BUCKET_CAPACITY: usize = 20;

fn default_bucket_capacity() -> usize {
    DEFAULT_BUCKET_CAPACITY
}

impl LshCacheConfig {
    pub fn new(dim: usize, hash_bits: u32, tolerance: f64) -> Self {
        Self {
            dim,
            hash_bits,
            bucket_capacity: DEFAULT_BUCKET_CAPACITY,
            tolerance,
            metric: DistanceMetric::L2,
            policy: EvictionPolicy::Fifo,
            seed: 0,
        }
    }

    pub fn with_bucket_capacity(mut self, b: usize) -> Self {
        self.bucket_capacity = b;
        self
    }

    pub fn with_policy(mut self, policy: EvictionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `2^L * b`.
    pub fn theoretical_capacity(&self) -> u64 {
        (1u64 << self.hash_bits).saturating_mul(self.bucket_capacity as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if self.bucket_capacity == 0 {
            return Err(invalid("bucket_capacity", "must be at least 1"));
        }
        if self.hash_bits > MAX_HASH_BITS {
            return Err(invalid(
                "hash_bits",
                format!("must be <= {MAX_HASH_BITS}, got {}", self.hash_bits),
            ));
        }
        validate_tolerance(self.tolerance)
    }

    fn bucket_config(&self) -> FlatCacheConfig {
        FlatCacheConfig {
            dim: self.dim,
            capacity: self.bucket_capacity,
            tolerance: self.tolerance,
            metric: self.metric,
            policy: self.policy,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LshCache {
    config: LshCacheConfig,
    hyperplanes: HyperplaneSet,
    buckets: HashMap<BucketId, FlatCache>,
    entries: usize,
    distance_ops: u64,
    hash_dots: u64,
}

impl LshCache {
    pub fn new(config: LshCacheConfig) -> Result<Self> {
        config.validate()?;
        let hyperplanes = HyperplaneSet::generate(config.dim, config.hash_bits, config.seed)?;
        Ok(Self::with_hyperplanes_unchecked(config, hyperplanes))
    }

    /// Uses caller-supplied hyperplanes instead of generating them from the seed.
    pub fn with_hyperplanes(config: LshCacheConfig, hyperplanes: HyperplaneSet) -> Result<Self> {
        config.validate()?;
        check_dim(config.dim, hyperplanes.dim())?;
        if hyperplanes.bits() != config.hash_bits {
            return Err(invalid(
                "hash_bits",
                format!(
                    "config says {}, hyperplane set has {}",
                    config.hash_bits,
                    hyperplanes.bits()
                ),
            ));
        }
        Ok(Self::with_hyperplanes_unchecked(config, hyperplanes))
    }

    fn with_hyperplanes_unchecked(config: LshCacheConfig, hyperplanes: HyperplaneSet) -> Self {
        Self {
            config,
            hyperplanes,
            buckets: HashMap::new(),
            entries: 0,
            distance_ops: 0,
            hash_dots: 0,
        }
    }

    pub fn config(&self) -> &LshCacheConfig {
        &self.config
    }

    pub fn hyperplanes(&self) -> &HyperplaneSet {
        &self.hyperplanes
    }

    pub fn hash(&self, query: &Embedding) -> Result<BucketId> {
        self.hyperplanes.hash(query)
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    pub fn allocated_buckets(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket(&self, id: BucketId) -> Option<&FlatCache> {
        self.buckets.get(&id)
    }

    /// Number of hyperplane dot products computed by lookups and inserts.
    pub fn hash_dot_products(&self) -> u64 {
        self.hash_dots
    }

    fn route(&mut self, query: &[f32]) -> BucketId {
        self.hash_dots += u64::from(self.config.hash_bits);
        self.hyperplanes.hash_slice(query)
    }
}

impl ApproximateCache for LshCache {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn metric(&self) -> DistanceMetric {
        self.config.metric
    }

    fn lookup(&mut self, query: &Embedding) -> Result<Option<CacheHit<'_>>> {
        check_dim(self.config.dim, query.dim())?;
        let id = self.route(query.as_slice());
        let Some(bucket) = self.buckets.get_mut(&id) else {
            return Ok(None);
        };
        self.distance_ops += bucket.len() as u64;
        bucket.lookup(query)
    }

    fn insert(&mut self, key: Embedding, value: CacheValue) -> Result<Option<CacheEntry>> {
        check_dim(self.config.dim, key.dim())?;
        if value.has_embeddings() {
            check_dim(self.config.dim, value.dim())?;
        }
        let id = self.route(key.as_slice());
        let bucket_config = self.config.bucket_config();
        let bucket = self
            .buckets
            .entry(id)
            .or_insert_with(|| FlatCache::new_unchecked(bucket_config));
        let before = bucket.len();
        let evicted = bucket.insert(key, value)?;
        self.entries = self.entries + bucket.len() - before;
        Ok(evicted)
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            entries: self.entries,
            buckets: self.buckets.len(),
            capacity: self.config.theoretical_capacity(),
        }
    }

    fn distance_computations(&self) -> u64 {
        self.distance_ops
    }
}
