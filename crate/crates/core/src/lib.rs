//! Approximate embedding-keyed caches for retrieval pipelines.
//!
//! A retrieval pipeline embeds each query and asks a vector database for the nearest
//! documents. When a query lands close enough to one answered before, the documents fetched
//! for that earlier query can be reused and the database call skipped. This crate provides
//! two such caches:
//!
//! * [`FlatCache`]: a fixed-capacity store scanned linearly on every lookup.
//! * [`LshCache`]: random-hyperplane signatures route each query to one small bucket, so a
//!   lookup costs `L + b` vector operations however many entries are stored.
//!
//! [`Retriever`] puts a cache in front of any [`VectorStore`], over-fetching on misses and
//! re-ranking cached documents on hits. [`workload`] and [`metrics`] generate skewed query
//! streams and measure hit rate, k-recall, latency and occupancy.

pub mod cache;
pub mod error;
pub mod experiment;
pub mod flat;
pub mod lsh;
pub mod metrics;
pub mod retriever;
pub mod store;
pub mod vector;
pub mod workload;

/// Document identifier assigned by the vector store.
pub type DocId = u64;

pub use cache::{ApproximateCache, CacheEntry, CacheHit, CacheValue, EvictionPolicy, NoCache, Occupancy};
pub use error::{Error, Result};
pub use flat::{FlatCache, FlatCacheConfig};
pub use lsh::{BucketId, HyperplaneSet, LshCache, LshCacheConfig};
pub use metrics::{k_recall, AveragedReport, LatencySummary, MetricsReport};
pub use retriever::{RetrievalOutcome, Retriever, RetrieverConfig, Source};
pub use store::{BruteForceStore, ClockMode, Corpus, Neighbor, SimulatedLatency, VectorStore};
pub use vector::{batch_distances, distance, DistanceMetric, Embedding};
pub use workload::{generate_workload, Workload, WorkloadMode, WorkloadSpec};
