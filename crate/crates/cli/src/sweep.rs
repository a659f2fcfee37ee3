//! Cartesian sweeps over cache configurations and seeds.

use std::time::Duration;

use anyhow::{bail, Context, Result};
use proximity_core::experiment::{run_queries, CacheKind, CacheSpec, RunResult};
use proximity_core::workload::{clustered_corpus, Query};
use proximity_core::{
    generate_workload, AveragedReport, BruteForceStore, Corpus, EvictionPolicy, RetrieverConfig, SimulatedLatency,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub cache: CacheSpec,
    pub rerank_factor: f64,
    pub k: usize,
}

impl Cell {
    pub fn retriever_config(&self) -> RetrieverConfig {
        RetrieverConfig::new(self.k, self.rerank_factor)
    }
}

/// Expands the sweep lists, cache kind by cache kind in the configured order. A no-cache
/// baseline only varies `rerank_factor` and `k`.
pub fn cells(config: &Config) -> Vec<Cell> {
    let s = &config.sweep;
    let mut specs = Vec::new();
    for kind in &s.caches {
        match kind {
            CacheKind::None => specs.push(CacheSpec::None),
            CacheKind::Flat => {
                for &tolerance in &s.tolerance {
                    for &capacity in &s.capacity {
                        for &policy in &s.policy {
                            specs.push(CacheSpec::Flat {
                                capacity,
                                tolerance,
                                policy,
                            });
                        }
                    }
                }
            }
            CacheKind::Lsh => {
                for &tolerance in &s.tolerance {
                    for &hash_bits in &s.hash_bits {
                        for &bucket_capacity in &s.bucket_capacity {
                            for &policy in &s.policy {
                                specs.push(CacheSpec::Lsh {
                                    hash_bits,
                                    bucket_capacity,
                                    tolerance,
                                    policy,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for cache in specs {
        for &rerank_factor in &s.rerank_factor {
            for &k in &s.k {
                out.push(Cell {
                    index: out.len(),
                    cache,
                    rerank_factor,
                    k,
                });
            }
        }
    }
    out
}

/// The query stream and database for one seed, shared read-only by every cell.
pub struct SeedData {
    pub seed: u64,
    pub queries: Vec<Query>,
    pub store: BruteForceStore,
}

pub fn prepare_seed(config: &Config, seed: u64, corpus: Option<&Corpus>) -> Result<SeedData> {
    let workload = generate_workload(&config.workload_spec(seed)).with_context(|| format!("seed {seed}: workload"))?;
    let corpus = match corpus {
        Some(c) => {
            if c.dim() != config.workload.dim {
                bail!(
                    "corpus dimension {} does not match workload dimension {}",
                    c.dim(),
                    config.workload.dim
                );
            }
            c.clone()
        }
        None => clustered_corpus(&workload.bases, &config.corpus_spec(seed))
            .with_context(|| format!("seed {seed}: corpus"))?,
    };
    let delay = Duration::from_micros(config.store.delay_us);
    let latency = if config.store.virtual_clock {
        SimulatedLatency::virtual_delay(delay)
    } else {
        SimulatedLatency::wall_clock(delay)
    };
    Ok(SeedData {
        seed,
        queries: workload.queries,
        store: BruteForceStore::new(corpus, config.store.metric).with_latency(latency),
    })
}

pub struct CellRun {
    pub cell: Cell,
    pub seed: u64,
    pub result: RunResult,
}

/// Runs one cell against one seed's data.
pub fn run_cell(cell: &Cell, data: &SeedData, measure_recall: bool) -> Result<CellRun> {
    use proximity_core::VectorStore;
    let cache = cell
        .cache
        .build(data.store.dim(), data.store.metric(), data.seed)
        .with_context(|| format!("cell {}: cache", cell.index))?;
    let result = run_queries(
        cache,
        &data.store,
        cell.retriever_config(),
        &data.queries,
        measure_recall,
    )
    .with_context(|| format!("cell {} seed {}", cell.index, data.seed))?;
    Ok(CellRun {
        cell: *cell,
        seed: data.seed,
        result,
    })
}

/// Every (cell, seed) run, ordered by cell and then by the configured seed order whatever
/// the execution order was.
pub fn run_sweep(config: &Config, cells: &[Cell]) -> Result<Vec<CellRun>> {
    let corpus = match &config.corpus.path {
        Some(path) => Some(Corpus::load(path).with_context(|| format!("loading corpus {}", path.display()))?),
        None => None,
    };
    let seeds = &config.sweep.seeds;
    let data: Vec<SeedData> = if config.sweep.parallel {
        seeds
            .par_iter()
            .map(|s| prepare_seed(config, *s, corpus.as_ref()))
            .collect::<Result<_>>()?
    } else {
        seeds
            .iter()
            .map(|s| prepare_seed(config, *s, corpus.as_ref()))
            .collect::<Result<_>>()?
    };
    let jobs: Vec<(&Cell, &SeedData)> = cells.iter().flat_map(|c| data.iter().map(move |d| (c, d))).collect();
    let recall = config.sweep.measure_recall;
    if config.sweep.parallel {
        jobs.par_iter().map(|(c, d)| run_cell(c, d, recall)).collect()
    } else {
        jobs.iter().map(|(c, d)| run_cell(c, d, recall)).collect()
    }
}

/// Seed-averaged report of each cell, in cell order.
pub fn summarize(cells: &[Cell], runs: &[CellRun]) -> Result<Vec<(Cell, AveragedReport, f64)>> {
    cells
        .iter()
        .map(|cell| {
            let mine: Vec<&CellRun> = runs.iter().filter(|r| r.cell.index == cell.index).collect();
            let reports: Vec<_> = mine.iter().map(|r| r.result.report.clone()).collect();
            let cross = mine.iter().map(|r| r.result.cross_base_hits as f64).sum::<f64>() / mine.len().max(1) as f64;
            Ok((*cell, AveragedReport::from_reports(&reports)?, cross))
        })
        .collect()
}

/// Column values describing a cache spec, `None` where a field does not apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFields {
    pub cache: CacheKind,
    pub tolerance: Option<f64>,
    pub capacity: Option<usize>,
    pub hash_bits: Option<u32>,
    pub bucket_capacity: Option<usize>,
    pub policy: Option<EvictionPolicy>,
}

impl From<CacheSpec> for SpecFields {
    fn from(spec: CacheSpec) -> Self {
        match spec {
            CacheSpec::None => SpecFields {
                cache: CacheKind::None,
                tolerance: None,
                capacity: None,
                hash_bits: None,
                bucket_capacity: None,
                policy: None,
            },
            CacheSpec::Flat {
                capacity,
                tolerance,
                policy,
            } => SpecFields {
                cache: CacheKind::Flat,
                tolerance: Some(tolerance),
                capacity: Some(capacity),
                hash_bits: None,
                bucket_capacity: None,
                policy: Some(policy),
            },
            CacheSpec::Lsh {
                hash_bits,
                bucket_capacity,
                tolerance,
                policy,
            } => SpecFields {
                cache: CacheKind::Lsh,
                tolerance: Some(tolerance),
                capacity: None,
                hash_bits: Some(hash_bits),
                bucket_capacity: Some(bucket_capacity),
                policy: Some(policy),
            },
        }
    }
}
