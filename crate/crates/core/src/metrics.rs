//! Hit rate, k-recall, latency and occupancy aggregation.

use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cache::Occupancy;
use crate::error::{invalid, Error, Result};
use crate::retriever::RetrievalOutcome;
use crate::DocId;

/// Fraction of `cache_topk` that also appears in `oracle_topk`.
pub fn k_recall(cache_topk: &[DocId], oracle_topk: &[DocId]) -> Result<f64> {
    if cache_topk.len() != oracle_topk.len() {
        return Err(Error::SizeMismatch {
            left: cache_topk.len(),
            right: oracle_topk.len(),
        });
    }
    if cache_topk.is_empty() {
        return Err(invalid("k", "recall of an empty result is undefined"));
    }
    let oracle: HashSet<DocId> = oracle_topk.iter().copied().collect();
    let shared = cache_topk.iter().filter(|id| oracle.contains(id)).count();
    Ok(shared as f64 / cache_topk.len() as f64)
}

/// Latency distribution in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
}

impl LatencySummary {
    /// Nearest-rank percentiles.
    pub fn from_durations(samples: impl IntoIterator<Item = Duration>) -> Self {
        let mut us: Vec<f64> = samples.into_iter().map(|d| d.as_secs_f64() * 1e6).collect();
        if us.is_empty() {
            return Self::default();
        }
        us.sort_unstable_by(f64::total_cmp);
        let pct = |p: f64| {
            let rank = ((p / 100.0) * us.len() as f64).ceil() as usize;
            us[rank.clamp(1, us.len()) - 1]
        };
        Self {
            mean_us: us.iter().sum::<f64>() / us.len() as f64,
            p50_us: pct(50.0),
            p99_us: pct(99.0),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceOpsSummary {
    pub mean: f64,
    pub max: u64,
}

/// Metrics of one run over a query stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub queries: u64,
    pub hits: u64,
    pub hit_rate: f64,
    pub db_calls: u64,
    /// Mean over the outcomes that carried oracle ids; `None` when none did.
    pub mean_k_recall: Option<f64>,
    pub cache_latency: LatencySummary,
    pub db_latency: LatencySummary,
    pub total_latency: LatencySummary,
    pub occupancy: Occupancy,
    pub relative_occupancy: f64,
    pub distance_ops_per_lookup: DistanceOpsSummary,
}

impl MetricsReport {
    pub fn aggregate(outcomes: &[RetrievalOutcome], occupancy: Occupancy) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(invalid("outcomes", "cannot aggregate an empty run"));
        }
        let queries = outcomes.len() as u64;
        let hits = outcomes.iter().filter(|o| o.is_hit()).count() as u64;

        let mut recall_sum = 0.0;
        let mut recall_n = 0usize;
        for o in outcomes {
            if let Some(oracle) = &o.oracle_ids {
                recall_sum += k_recall(&o.doc_ids, oracle)?;
                recall_n += 1;
            }
        }

        let ops: Vec<u64> = outcomes.iter().map(|o| o.distance_ops).collect();
        Ok(Self {
            queries,
            hits,
            hit_rate: hits as f64 / queries as f64,
            db_calls: queries - hits,
            mean_k_recall: (recall_n > 0).then(|| recall_sum / recall_n as f64),
            cache_latency: LatencySummary::from_durations(outcomes.iter().map(|o| o.cache_time)),
            db_latency: LatencySummary::from_durations(outcomes.iter().map(|o| o.db_time)),
            total_latency: LatencySummary::from_durations(outcomes.iter().map(|o| o.total_time())),
            occupancy,
            relative_occupancy: occupancy.relative(),
            distance_ops_per_lookup: DistanceOpsSummary {
                mean: ops.iter().sum::<u64>() as f64 / ops.len() as f64,
                max: ops.iter().copied().max().unwrap_or(0),
            },
        })
    }
}

/// Field-wise mean of several runs of the same configuration (e.g. one per seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedReport {
    pub runs: usize,
    pub hit_rate: f64,
    pub db_calls: f64,
    pub mean_k_recall: Option<f64>,
    pub cache_latency: LatencySummary,
    pub db_latency: LatencySummary,
    pub total_latency: LatencySummary,
    pub occupancy_entries: f64,
    pub relative_occupancy: f64,
    pub distance_ops_mean: f64,
    pub distance_ops_max: f64,
}

impl AveragedReport {
    pub fn from_reports(reports: &[MetricsReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(invalid("reports", "cannot average zero runs"));
        }
        let n = reports.len() as f64;
        let mean = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let latency = |f: &dyn Fn(&MetricsReport) -> LatencySummary| LatencySummary {
            mean_us: mean(&|r| f(r).mean_us),
            p50_us: mean(&|r| f(r).p50_us),
            p99_us: mean(&|r| f(r).p99_us),
        };
        let recalls: Vec<f64> = reports.iter().filter_map(|r| r.mean_k_recall).collect();
        Ok(Self {
            runs: reports.len(),
            hit_rate: mean(&|r| r.hit_rate),
            db_calls: mean(&|r| r.db_calls as f64),
            mean_k_recall: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
            cache_latency: latency(&|r| r.cache_latency),
            db_latency: latency(&|r| r.db_latency),
            total_latency: latency(&|r| r.total_latency),
            occupancy_entries: mean(&|r| r.occupancy.entries as f64),
            relative_occupancy: mean(&|r| r.relative_occupancy),
            distance_ops_mean: mean(&|r| r.distance_ops_per_lookup.mean),
            distance_ops_max: mean(&|r| r.distance_ops_per_lookup.max as f64),
        })
    }
}
