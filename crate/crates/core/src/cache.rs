//! Types shared by every cache variant.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::{DistanceMetric, Embedding};
use crate::DocId;

/// Victim selection rule applied when a full cache (or bucket) inserts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvictionPolicy {
    /// Evict the entry with the oldest insertion.
    #[default]
    Fifo,
    /// Evict the entry whose last insertion or hit is oldest.
    Lru,
}

impl fmt::Display for EvictionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvictionPolicy::Fifo => "fifo",
            EvictionPolicy::Lru => "lru",
        })
    }
}

impl std::str::FromStr for EvictionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(EvictionPolicy::Fifo),
            "lru" => Ok(EvictionPolicy::Lru),
            other => Err(crate::error::invalid("policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// The documents cached for one key: ids in database rank order plus their embeddings,
/// kept so a later hit can re-rank them against the new query.
#[derive(Clone, PartialEq)]
pub struct CacheValue {
    ids: Vec<DocId>,
    embeddings: Vec<f32>,
    dim: usize,
}

impl CacheValue {
    pub fn new(docs: Vec<(DocId, Embedding)>) -> Result<Self> {
        let dim = docs.first().map_or(0, |(_, e)| e.dim());
        let mut seen = HashSet::with_capacity(docs.len());
        let mut ids = Vec::with_capacity(docs.len());
        let mut embeddings = Vec::with_capacity(docs.len() * dim);
        for (id, e) in docs {
            check_dim(dim, e.dim())?;
            if !seen.insert(id) {
                return Err(Error::DuplicateDocId(id));
            }
            ids.push(id);
            embeddings.extend_from_slice(e.as_slice());
        }
        Ok(Self { ids, embeddings, dim })
    }

    /// A value holding ids only. Hits on such a value cannot be re-ranked.
    pub fn ids_only(ids: Vec<DocId>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::DuplicateDocId(*dup));
        }
        Ok(Self {
            ids,
            embeddings: Vec::new(),
            dim: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[DocId] {
        &self.ids
    }

    /// Document embedding dimension, 0 for id-only values.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_embeddings(&self) -> bool {
        self.dim > 0
    }

    /// Iterates `(id, embedding)` pairs. Empty for id-only values.
    pub fn docs(&self) -> impl Iterator<Item = (DocId, &[f32])> + '_ {
        // id-only values have no embeddings, so the zip is empty
        self.ids
            .iter()
            .copied()
            .zip(self.embeddings.chunks_exact(self.dim.max(1)))
    }
}

impl fmt::Debug for CacheValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CacheValue")
            .field("ids", &self.ids)
            .field("dim", &self.dim)
            .finish()
    }
}

/// An entry removed from a cache.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub key: Embedding,
    pub value: CacheValue,
    pub inserted_seq: u64,
    pub last_used_seq: u64,
}

/// A successful lookup, borrowing the matched entry.
#[derive(Debug, Clone, Copy)]
pub struct CacheHit<'a> {
    pub value: &'a CacheValue,
    pub distance: f64,
    pub key: &'a [f32],
}

/// Entry count relative to capacity. `buckets` is the number of allocated buckets for
/// bucketed caches and 1 for a flat cache.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub entries: usize,
    pub buckets: usize,
    pub capacity: u64,
}

impl Occupancy {
    pub fn relative(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            self.entries as f64 / self.capacity as f64
        }
    }
}

/// Common interface of the approximate caches.
///
/// Caches are single-writer: `lookup` mutates recency state and counters.
pub trait ApproximateCache {
    fn dim(&self) -> usize;

    fn metric(&self) -> DistanceMetric;

    /// Returns the closest cached entry if it lies within the tolerance.
    fn lookup(&mut self, query: &Embedding) -> Result<Option<CacheHit<'_>>>;

    /// Stores `value` under `key`, returning the evicted entry if one had to make room.
    fn insert(&mut self, key: Embedding, value: CacheValue) -> Result<Option<CacheEntry>>;

    fn occupancy(&self) -> Occupancy;

    /// Monotone count of query/key distance evaluations made by lookups.
    fn distance_computations(&self) -> u64;
}

impl<C: ApproximateCache + ?Sized> ApproximateCache for Box<C> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn metric(&self) -> DistanceMetric {
        (**self).metric()
    }

    fn lookup(&mut self, query: &Embedding) -> Result<Option<CacheHit<'_>>> {
        (**self).lookup(query)
    }

    fn insert(&mut self, key: Embedding, value: CacheValue) -> Result<Option<CacheEntry>> {
        (**self).insert(key, value)
    }

    fn occupancy(&self) -> Occupancy {
        (**self).occupancy()
    }

    fn distance_computations(&self) -> u64 {
        (**self).distance_computations()
    }
}

/// A cache that never stores anything. Every lookup misses; the no-cache baseline.
#[derive(Debug, Clone)]
pub struct NoCache {
    dim: usize,
    metric: DistanceMetric,
}

impl NoCache {
    pub fn new(dim: usize, metric: DistanceMetric) -> Self {
        Self { dim, metric }
    }
}

impl ApproximateCache for NoCache {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self) -> DistanceMetric {
        self.metric
    }

    fn lookup(&mut self, query: &Embedding) -> Result<Option<CacheHit<'_>>> {
        check_dim(self.dim, query.dim())?;
        Ok(None)
    }

    fn insert(&mut self, key: Embedding, _value: CacheValue) -> Result<Option<CacheEntry>> {
        check_dim(self.dim, key.dim())?;
        Ok(None)
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            entries: 0,
            buckets: 0,
            capacity: 0,
        }
    }

    fn distance_computations(&self) -> u64 {
        0
    }
}
