//! Experiment harness: parameter sweeps, occupancy tables and the lookup microbenchmark,
//! written as CSV and JSON lines.

pub mod config;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use proximity_core::experiment::{bench_lookup, cpu_model, CacheKind, LookupBenchConfig};

use crate::config::{Config, ConfigError};
use crate::output::TableWriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Hit rate, recall, latency and occupancy for every cell of the grid.
    Sweep,
    /// Lookup time against the number of cached entries.
    LookupBench,
    /// Final cache occupancy for every cell of the grid.
    Occupancy,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "proximity", version, about = "Approximate retrieval cache experiments")]
pub struct Args {
    /// TOML configuration file. Built-in defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated seeds, overriding `sweep.seeds`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Accrue the store delay instead of sleeping.
    #[arg(long, conflicts_with = "wall_clock")]
    pub virtual_clock: bool,
    /// Sleep for the store delay on every database call.
    #[arg(long)]
    pub wall_clock: bool,
    #[arg(long, value_enum, default_value_t = Mode::Sweep)]
    pub mode: Mode,
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(args: &Args) -> Result<Config> {
    let mut config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(dir) = &args.out_dir {
        config.output.dir = dir.clone();
    }
    if let Some(seeds) = &args.seeds {
        config.sweep.seeds = seeds.clone();
    }
    if args.virtual_clock {
        config.store.virtual_clock = true;
    }
    if args.wall_clock {
        config.store.virtual_clock = false;
    }
    config.validate().map_err(|(section, key, message)| ConfigError {
        path: None,
        line: None,
        message: format!("{section}.{key} (after command-line overrides): {message}"),
    })?;
    Ok(config)
}

/// Runs the selected mode and returns the files written.
pub fn run(args: &Args) -> Result<Vec<PathBuf>> {
    let config = resolve_config(args)?;
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut written = vec![write_resolved_config(&config, &dir)?];
    written.extend(match args.mode {
        Mode::Sweep => run_sweep_mode(&config, &dir)?,
        Mode::LookupBench => run_lookup_mode(&config, &dir)?,
        Mode::Occupancy => run_occupancy_mode(&config, &dir)?,
    });
    Ok(written)
}

fn write_resolved_config(config: &Config, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("config.resolved.toml");
    let text = toml::to_string(config).context("serializing configuration")?;
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn run_sweep_mode(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut results = TableWriter::create(dir, "results", true)?;
    let mut summary = TableWriter::create(dir, "summary", true)?;
    let cells = sweep::cells(config);
    let runs = sweep::run_sweep(config, &cells)?;
    for run in &runs {
        results.write(&output::result_row(run, config))?;
    }
    for (cell, avg, cross) in sweep::summarize(&cells, &runs)? {
        summary.write(&output::summary_row(&cell, &avg, cross, config))?;
    }
    let mut paths = results.finish()?;
    paths.extend(summary.finish()?);
    Ok(paths)
}

fn run_occupancy_mode(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut table = TableWriter::create(dir, "occupancy", true)?;
    let mut config = config.clone();
    config.sweep.measure_recall = false;
    let cells: Vec<_> = sweep::cells(&config)
        .into_iter()
        .filter(|c| c.cache.kind() != CacheKind::None)
        .collect();
    for run in sweep::run_sweep(&config, &cells)? {
        table.write(&output::occupancy_row(&run, &config))?;
    }
    table.finish()
}

fn run_lookup_mode(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut table = TableWriter::create(dir, "lookup_bench", true)?;
    let b = &config.lookup_bench;
    let bench = LookupBenchConfig {
        dim: b.dim,
        entry_counts: b.entry_counts.clone(),
        repetitions: b.repetitions,
        hash_bits: b.hash_bits,
        bucket_capacity: b.bucket_capacity,
        seed: b.seed,
    };
    let cpu = cpu_model();
    // sequential on purpose: concurrent timings would disturb each other
    for &kind in &b.caches {
        for timing in bench_lookup(kind, &bench).with_context(|| format!("{kind} lookup benchmark"))? {
            table.write(&output::lookup_row(&timing, config, &cpu))?;
        }
    }
    table.finish()
}
