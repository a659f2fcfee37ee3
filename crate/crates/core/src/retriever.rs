//! Cache-first document retrieval.
//!
//! A query first goes to the cache. On a hit the cached over-fetched documents are re-ranked
//! against the query and the best `k` are returned without touching the store. On a miss the
//! store is asked for `ceil(rho * k)` neighbors, the whole list is cached under the query, and
//! the first `k` are returned in store order.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cache::{ApproximateCache, CacheValue};
use crate::error::{check_dim, invalid, Error, Result};
use crate::store::{ClockMode, VectorStore};
use crate::vector::{DistanceMetric, Embedding};
use crate::DocId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrieverConfig {
    /// Documents returned per query.
    pub k: usize,
    /// Over-fetch ratio `rho >= 1` between documents fetched (and cached) and returned.
    pub rerank_factor: f64,
}

impl RetrieverConfig {
    pub fn new(k: usize, rerank_factor: f64) -> Self {
        Self { k, rerank_factor }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(self.rerank_factor.is_finite() && self.rerank_factor >= 1.0) {
            return Err(invalid(
                "rerank_factor",
                format!("must be a finite value >= 1, got {}", self.rerank_factor),
            ));
        }
        Ok(())
    }

    /// `ceil(rho * k)`, never below `k`.
    pub fn fetch_count(&self) -> usize {
        // absorb representation error so that e.g. 1.1 * 10 fetches 11, not 12
        let raw = self.rerank_factor * self.k as f64;
        let fetched = (raw - raw * 1e-12).ceil() as usize;
        fetched.max(self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    CacheHit,
    CacheMiss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    pub doc_ids: Vec<DocId>,
    pub source: Source,
    /// Distance to the matched key, on hits.
    pub match_distance: Option<f64>,
    /// The cached query that matched, on hits.
    #[serde(skip)]
    pub matched_key: Option<Embedding>,
    /// Lookup, re-rank and insertion time.
    pub cache_time: Duration,
    /// Store time; zero on hits.
    pub db_time: Duration,
    /// Query/key distance evaluations made by this lookup.
    pub distance_ops: u64,
    /// Exact top-k from the store, when requested with [`Retriever::retrieve_with_oracle`].
    pub oracle_ids: Option<Vec<DocId>>,
}

impl RetrievalOutcome {
    pub fn is_hit(&self) -> bool {
        self.source == Source::CacheHit
    }

    pub fn total_time(&self) -> Duration {
        self.cache_time + self.db_time
    }
}

/// Top `k` of a cached value by distance to `query`, ties broken by ascending id.
/// Id-only values fall back to their stored order.
pub fn rerank(query: &[f32], value: &CacheValue, k: usize, metric: DistanceMetric) -> Vec<DocId> {
    if !value.has_embeddings() {
        return value.ids().iter().take(k).copied().collect();
    }
    let mut scored: Vec<(f64, DocId)> = value.docs().map(|(id, doc)| (metric.eval(query, doc), id)).collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

pub struct Retriever<C, S> {
    cache: C,
    store: S,
    config: RetrieverConfig,
    db_calls: u64,
    insertions: u64,
}

impl<C: ApproximateCache, S: VectorStore> Retriever<C, S> {
    pub fn new(cache: C, store: S, config: RetrieverConfig) -> Result<Self> {
        config.validate()?;
        check_dim(store.dim(), cache.dim())?;
        if cache.metric() != store.metric() {
            return Err(invalid(
                "metric",
                format!("cache uses {}, store uses {}", cache.metric(), store.metric()),
            ));
        }
        Ok(Self {
            cache,
            store,
            config,
            db_calls: 0,
            insertions: 0,
        })
    }

    pub fn config(&self) -> &RetrieverConfig {
        &self.config
    }

    pub fn cache(&self) -> &C {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut C {
        &mut self.cache
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn into_parts(self) -> (C, S) {
        (self.cache, self.store)
    }

    pub fn database_calls(&self) -> u64 {
        self.db_calls
    }

    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    pub fn retrieve(&mut self, query: &Embedding) -> Result<RetrievalOutcome> {
        check_dim(self.store.dim(), query.dim())?;
        let k = self.config.k;
        let metric = self.store.metric();
        let ops_before = self.cache.distance_computations();

        let started = Instant::now();
        if let Some(hit) = self.cache.lookup(query)? {
            let doc_ids = rerank(query.as_slice(), hit.value, k, metric);
            let match_distance = Some(hit.distance);
            let matched_key = Embedding::from_slice(hit.key)?;
            let cache_time = started.elapsed();
            return Ok(RetrievalOutcome {
                doc_ids,
                source: Source::CacheHit,
                match_distance,
                matched_key: Some(matched_key),
                cache_time,
                db_time: Duration::ZERO,
                distance_ops: self.cache.distance_computations() - ops_before,
                oracle_ids: None,
            });
        }
        let mut cache_time = started.elapsed();
        let distance_ops = self.cache.distance_computations() - ops_before;

        let db_started = Instant::now();
        let neighbors = self.store.retrieve_document_indices(query, self.config.fetch_count())?;
        let latency = self.store.latency();
        let db_time = match latency.clock {
            ClockMode::Virtual => latency.delay,
            ClockMode::WallClock => db_started.elapsed(),
        };
        self.db_calls += 1;

        let insert_started = Instant::now();
        let docs = neighbors
            .iter()
            .map(|n| {
                let doc = self.store.document(n.id).ok_or(Error::UnknownDocId(n.id))?;
                Ok((n.id, Embedding::from_slice(doc)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let value = CacheValue::new(docs)?;
        self.cache.insert(query.clone(), value)?;
        self.insertions += 1;
        cache_time += insert_started.elapsed();

        Ok(RetrievalOutcome {
            doc_ids: neighbors.iter().take(k).map(|n| n.id).collect(),
            source: Source::CacheMiss,
            match_distance: None,
            matched_key: None,
            cache_time,
            db_time,
            distance_ops,
            oracle_ids: None,
        })
    }

    /// Like [`Retriever::retrieve`], additionally attaching the store's exact top-k for the
    /// same query. The shadow query is not timed, not counted and leaves the cache untouched.
    pub fn retrieve_with_oracle(&mut self, query: &Embedding) -> Result<RetrievalOutcome> {
        let mut outcome = self.retrieve(query)?;
        let oracle = self.store.retrieve_document_indices(query, self.config.k)?;
        outcome.oracle_ids = Some(oracle.into_iter().map(|n| n.id).collect());
        Ok(outcome)
    }
}
