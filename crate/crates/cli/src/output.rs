//! Result tables. Every table is defined once as an ordered list of named columns and
//! written both as CSV and as JSON lines, so the two formats cannot drift apart.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use proximity_core::experiment::LookupTiming;
use proximity_core::{AveragedReport, LatencySummary};
use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::sweep::{Cell, CellRun, SpecFields};

pub type Row = Vec<(&'static str, Value)>;

/// Columns whose values come from a monotonic clock and differ between identical runs.
/// `db_*` joins them when the store runs in wall-clock mode.
pub const WALL_CLOCK_COLUMNS: &[&str] = &[
    "cache_mean_us",
    "cache_p50_us",
    "cache_p99_us",
    "total_mean_us",
    "total_p50_us",
    "total_p99_us",
];

fn cell_columns(cell: &Cell, config: &Config) -> Row {
    let f = SpecFields::from(cell.cache);
    let w = &config.workload;
    let c = &config.corpus;
    vec![
        ("cell", json!(cell.index)),
        ("cache", json!(f.cache.to_string())),
        ("tolerance", tolerance(f.tolerance)),
        ("capacity", json!(f.capacity)),
        ("hash_bits", json!(f.hash_bits)),
        ("bucket_capacity", json!(f.bucket_capacity)),
        ("policy", json!(f.policy.map(|p| p.to_string()))),
        ("rerank_factor", json!(cell.rerank_factor)),
        ("k", json!(cell.k)),
        ("base_count", json!(w.base_count)),
        ("total_queries", json!(w.total_queries)),
        ("zipf_exponent", json!(w.zipf_exponent)),
        ("perturbation_radius", json!(w.perturbation_radius)),
        ("base_separation", json!(w.base_separation)),
        ("dim", json!(w.dim)),
        ("workload_mode", serde_json::to_value(w.mode).unwrap_or(Value::Null)),
        ("docs_per_base", json!(c.docs_per_base)),
        ("doc_radius", json!(c.doc_radius)),
        ("background_docs", json!(c.background_docs)),
        ("corpus_path", json!(c.path.as_ref().map(|p| p.display().to_string()))),
        ("delay_us", json!(config.store.delay_us)),
        ("virtual_clock", json!(config.store.virtual_clock)),
        ("metric", json!(config.store.metric.name())),
    ]
}

/// JSON has no infinity, and an unbounded tolerance is a legitimate setting.
fn tolerance(t: Option<f64>) -> Value {
    match t {
        Some(t) if t.is_infinite() => json!("inf"),
        other => json!(other),
    }
}

fn latency_columns(row: &mut Row, names: [&'static str; 3], l: &LatencySummary) {
    row.push((names[0], json!(l.mean_us)));
    row.push((names[1], json!(l.p50_us)));
    row.push((names[2], json!(l.p99_us)));
}

pub fn result_row(run: &CellRun, config: &Config) -> Row {
    let r = &run.result.report;
    let mut row = cell_columns(&run.cell, config);
    row.insert(1, ("seed", json!(run.seed)));
    row.extend([
        ("queries", json!(r.queries)),
        ("hits", json!(r.hits)),
        ("hit_rate", json!(r.hit_rate)),
        ("db_calls", json!(r.db_calls)),
        ("mean_k_recall", json!(r.mean_k_recall)),
        ("cross_base_hits", json!(run.result.cross_base_hits)),
        ("occupancy_entries", json!(r.occupancy.entries)),
        ("occupancy_buckets", json!(r.occupancy.buckets)),
        ("occupancy_capacity", json!(r.occupancy.capacity)),
        ("relative_occupancy", json!(r.relative_occupancy)),
        ("distance_ops_mean", json!(r.distance_ops_per_lookup.mean)),
        ("distance_ops_max", json!(r.distance_ops_per_lookup.max)),
    ]);
    latency_columns(&mut row, ["db_mean_us", "db_p50_us", "db_p99_us"], &r.db_latency);
    latency_columns(
        &mut row,
        ["cache_mean_us", "cache_p50_us", "cache_p99_us"],
        &r.cache_latency,
    );
    latency_columns(
        &mut row,
        ["total_mean_us", "total_p50_us", "total_p99_us"],
        &r.total_latency,
    );
    row
}

pub fn summary_row(cell: &Cell, avg: &AveragedReport, cross_base_hits: f64, config: &Config) -> Row {
    let mut row = cell_columns(cell, config);
    row.extend([
        ("runs", json!(avg.runs)),
        ("hit_rate", json!(avg.hit_rate)),
        ("db_calls", json!(avg.db_calls)),
        ("mean_k_recall", json!(avg.mean_k_recall)),
        ("cross_base_hits", json!(cross_base_hits)),
        ("occupancy_entries", json!(avg.occupancy_entries)),
        ("relative_occupancy", json!(avg.relative_occupancy)),
        ("distance_ops_mean", json!(avg.distance_ops_mean)),
        ("distance_ops_max", json!(avg.distance_ops_max)),
    ]);
    latency_columns(&mut row, ["db_mean_us", "db_p50_us", "db_p99_us"], &avg.db_latency);
    latency_columns(
        &mut row,
        ["cache_mean_us", "cache_p50_us", "cache_p99_us"],
        &avg.cache_latency,
    );
    latency_columns(
        &mut row,
        ["total_mean_us", "total_p50_us", "total_p99_us"],
        &avg.total_latency,
    );
    row
}

pub fn occupancy_row(run: &CellRun, config: &Config) -> Row {
    let f = SpecFields::from(run.cell.cache);
    let r = &run.result.report;
    vec![
        ("cell", json!(run.cell.index)),
        ("seed", json!(run.seed)),
        ("cache", json!(f.cache.to_string())),
        ("tolerance", tolerance(f.tolerance)),
        ("capacity", json!(f.capacity)),
        ("hash_bits", json!(f.hash_bits)),
        ("bucket_capacity", json!(f.bucket_capacity)),
        ("policy", json!(f.policy.map(|p| p.to_string()))),
        ("rerank_factor", json!(run.cell.rerank_factor)),
        ("k", json!(run.cell.k)),
        ("total_queries", json!(config.workload.total_queries)),
        ("hit_rate", json!(r.hit_rate)),
        ("entries", json!(r.occupancy.entries)),
        ("allocated_buckets", json!(r.occupancy.buckets)),
        ("theoretical_capacity", json!(r.occupancy.capacity)),
        ("relative_occupancy", json!(r.relative_occupancy)),
    ]
}

pub fn lookup_row(t: &LookupTiming, config: &Config, cpu: &str) -> Row {
    let b = &config.lookup_bench;
    let lsh = t.cache == proximity_core::experiment::CacheKind::Lsh;
    vec![
        ("cache", json!(t.cache.to_string())),
        ("dim", json!(b.dim)),
        ("entries", json!(t.entries)),
        ("lookups", json!(t.lookups)),
        ("hash_bits", json!(lsh.then_some(b.hash_bits))),
        ("bucket_capacity", json!(lsh.then_some(b.bucket_capacity))),
        ("mean_us", json!(t.latency.mean_us)),
        ("p50_us", json!(t.latency.p50_us)),
        ("p99_us", json!(t.latency.p99_us)),
        ("distance_ops_mean", json!(t.distance_ops_mean)),
        ("distance_ops_max", json!(t.distance_ops_max)),
        ("hash_dots_per_lookup", json!(t.hash_dots_per_lookup)),
        ("cpu_model", json!(cpu)),
    ]
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A CSV file and its JSON-lines twin, created before any work starts so an unwritable
/// destination fails fast.
pub struct TableWriter {
    csv: csv::Writer<File>,
    jsonl: Option<BufWriter<File>>,
    header_written: bool,
    paths: Vec<PathBuf>,
}

impl TableWriter {
    pub fn create(dir: &Path, stem: &str, with_jsonl: bool) -> Result<Self> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let csv = csv::Writer::from_path(&csv_path).with_context(|| format!("cannot create {}", csv_path.display()))?;
        let mut paths = vec![csv_path];
        let jsonl = if with_jsonl {
            let p = dir.join(format!("{stem}.jsonl"));
            let f = File::create(&p).with_context(|| format!("cannot create {}", p.display()))?;
            paths.push(p);
            Some(BufWriter::new(f))
        } else {
            None
        };
        Ok(Self {
            csv,
            jsonl,
            header_written: false,
            paths,
        })
    }

    pub fn write(&mut self, row: &Row) -> Result<()> {
        if !self.header_written {
            self.csv.write_record(row.iter().map(|(k, _)| *k))?;
            self.header_written = true;
        }
        self.csv.write_record(row.iter().map(|(_, v)| csv_field(v)))?;
        if let Some(j) = &mut self.jsonl {
            let obj: Map<String, Value> = row.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            serde_json::to_writer(&mut *j, &obj)?;
            j.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<PathBuf>> {
        self.csv.flush()?;
        if let Some(j) = &mut self.jsonl {
            j.flush()?;
        }
        Ok(self.paths)
    }
}
