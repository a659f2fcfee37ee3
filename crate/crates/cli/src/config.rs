//! Sweep configuration file.

use std::fmt;
use std::path::{Path, PathBuf};

use proximity_core::experiment::CacheKind;
use proximity_core::lsh::{DEFAULT_BUCKET_CAPACITY, MAX_HASH_BITS};
use proximity_core::workload::CorpusSpec;
use proximity_core::{DistanceMetric, EvictionPolicy, RetrieverConfig, WorkloadMode, WorkloadSpec};
use serde::{Deserialize, Serialize};

/// A configuration problem, with the 1-based line it refers to when one can be found.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = self
            .path
            .as_ref()
            .map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
        match self.line {
            Some(line) => write!(f, "{file}:{line}: {}", self.message),
            None => write!(f, "{file}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub base_count: usize,
    pub total_queries: usize,
    pub zipf_exponent: f64,
    pub perturbation_radius: f64,
    pub base_separation: f64,
    pub dim: usize,
    pub mode: WorkloadMode,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            base_count: 500,
            total_queries: 10_000,
            zipf_exponent: 0.8,
            perturbation_radius: 1.0,
            base_separation: 7.5,
            dim: 64,
            mode: WorkloadMode::ZipfRephrase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub docs_per_base: usize,
    pub doc_radius: f64,
    pub background_docs: usize,
    /// Binary corpus file to use instead of the generated clustered corpus.
    pub path: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            docs_per_base: 16,
            doc_radius: 1.0,
            background_docs: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoreSection {
    /// Simulated latency of one database call, in microseconds.
    pub delay_us: u64,
    /// Accrue the delay instead of sleeping for it.
    pub virtual_clock: bool,
    pub metric: DistanceMetric,
}

impl Default for StoreSection {
    fn default() -> Self {
        Self {
            delay_us: 0,
            virtual_clock: true,
            metric: DistanceMetric::L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub caches: Vec<CacheKind>,
    pub tolerance: Vec<f64>,
    /// Flat cache capacities.
    pub capacity: Vec<usize>,
    /// LSH signature widths.
    pub hash_bits: Vec<u32>,
    pub bucket_capacity: Vec<usize>,
    pub policy: Vec<EvictionPolicy>,
    pub rerank_factor: Vec<f64>,
    pub k: Vec<usize>,
    pub seeds: Vec<u64>,
    pub measure_recall: bool,
    pub parallel: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            caches: vec![CacheKind::None, CacheKind::Flat, CacheKind::Lsh],
            tolerance: vec![0.0, 2.5, 5.0, 7.5, 10.0],
            capacity: vec![300],
            hash_bits: vec![8],
            bucket_capacity: vec![DEFAULT_BUCKET_CAPACITY],
            policy: vec![EvictionPolicy::Lru],
            rerank_factor: vec![4.0],
            k: vec![4],
            seeds: vec![0, 1, 2, 3, 4],
            measure_recall: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LookupBenchSection {
    pub caches: Vec<CacheKind>,
    pub dim: usize,
    pub entry_counts: Vec<usize>,
    pub repetitions: usize,
    pub hash_bits: u32,
    pub bucket_capacity: usize,
    pub seed: u64,
}

impl Default for LookupBenchSection {
    fn default() -> Self {
        Self {
            caches: vec![CacheKind::Flat, CacheKind::Lsh],
            dim: 128,
            entry_counts: vec![100, 1_000, 10_000, 100_000],
            repetitions: 2_000,
            hash_bits: 14,
            bucket_capacity: DEFAULT_BUCKET_CAPACITY,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

/// The whole configuration file. Every section and key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub workload: WorkloadSection,
    pub corpus: CorpusSection,
    pub store: StoreSection,
    pub sweep: SweepSection,
    pub lookup_bench: LookupBenchSection,
    pub output: OutputSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            ..e
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError {
            path: None,
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        config.validate().map_err(|(section, key, message)| ConfigError {
            path: None,
            line: locate(text, section, key),
            message: format!("{section}.{key}: {message}"),
        })?;
        Ok(config)
    }

    /// Checks value ranges, naming the offending `section.key`.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let w = &self.workload;
        let err = |section, key, msg: &str| Err((section, key, msg.to_string()));
        let check = |section, key, r: proximity_core::Result<()>| r.map_err(|e| (section, key, e.to_string()));
        if w.base_count == 0 {
            return err("workload", "base_count", "must be at least 1");
        }
        if w.total_queries == 0 {
            return err("workload", "total_queries", "must be at least 1");
        }
        if w.dim == 0 {
            return err("workload", "dim", "must be at least 1");
        }
        if !(w.zipf_exponent >= 0.0 && w.zipf_exponent.is_finite()) {
            return err("workload", "zipf_exponent", "must be a finite value >= 0");
        }
        if !(w.perturbation_radius >= 0.0 && w.perturbation_radius.is_finite()) {
            return err("workload", "perturbation_radius", "must be a finite value >= 0");
        }
        if !(w.base_separation > 0.0 && w.base_separation.is_finite()) {
            return err("workload", "base_separation", "must be a finite value > 0");
        }

        let c = &self.corpus;
        if c.path.is_none() && c.docs_per_base == 0 && c.background_docs == 0 {
            return err("corpus", "docs_per_base", "the generated corpus would be empty");
        }
        if !(c.doc_radius >= 0.0 && c.doc_radius.is_finite()) {
            return err("corpus", "doc_radius", "must be a finite value >= 0");
        }

        let s = &self.sweep;
        let lists: [(&'static str, bool); 9] = [
            ("caches", s.caches.is_empty()),
            ("tolerance", s.tolerance.is_empty()),
            ("capacity", s.capacity.is_empty() && s.caches.contains(&CacheKind::Flat)),
            (
                "hash_bits",
                s.hash_bits.is_empty() && s.caches.contains(&CacheKind::Lsh),
            ),
            (
                "bucket_capacity",
                s.bucket_capacity.is_empty() && s.caches.contains(&CacheKind::Lsh),
            ),
            ("policy", s.policy.is_empty()),
            ("rerank_factor", s.rerank_factor.is_empty()),
            ("k", s.k.is_empty()),
            ("seeds", s.seeds.is_empty()),
        ];
        if let Some((key, _)) = lists.iter().find(|(_, empty)| *empty) {
            return err("sweep", key, "list must not be empty");
        }
        if s.tolerance.iter().any(|t| t.is_nan() || *t < 0.0) {
            return err("sweep", "tolerance", "values must be >= 0");
        }
        if s.capacity.contains(&0) {
            return err("sweep", "capacity", "values must be at least 1");
        }
        if s.bucket_capacity.contains(&0) {
            return err("sweep", "bucket_capacity", "values must be at least 1");
        }
        if let Some(bits) = s.hash_bits.iter().find(|b| **b > MAX_HASH_BITS) {
            return Err((
                "sweep",
                "hash_bits",
                format!("{bits} exceeds the maximum of {MAX_HASH_BITS}"),
            ));
        }
        for &rho in &s.rerank_factor {
            check("sweep", "rerank_factor", RetrieverConfig::new(1, rho).validate())?;
        }
        if s.k.contains(&0) {
            return err("sweep", "k", "values must be at least 1");
        }
        let mut seeds = s.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return err("sweep", "seeds", "seeds must be distinct");
        }

        let b = &self.lookup_bench;
        if b.caches.contains(&CacheKind::None) {
            return err("lookup_bench", "caches", "only `flat` and `lsh` can be benchmarked");
        }
        if b.dim == 0 {
            return err("lookup_bench", "dim", "must be at least 1");
        }
        if b.entry_counts.is_empty() || b.entry_counts.contains(&0) {
            return err(
                "lookup_bench",
                "entry_counts",
                "must be a nonempty list of positive counts",
            );
        }
        if b.repetitions == 0 {
            return err("lookup_bench", "repetitions", "must be at least 1");
        }
        if b.hash_bits > MAX_HASH_BITS {
            return err("lookup_bench", "hash_bits", "too many hash bits");
        }
        if b.bucket_capacity == 0 {
            return err("lookup_bench", "bucket_capacity", "must be at least 1");
        }
        Ok(())
    }

    pub fn workload_spec(&self, seed: u64) -> WorkloadSpec {
        let w = &self.workload;
        WorkloadSpec {
            base_count: w.base_count,
            total_queries: w.total_queries,
            zipf_exponent: w.zipf_exponent,
            perturbation_radius: w.perturbation_radius,
            base_separation: w.base_separation,
            dim: w.dim,
            seed,
            mode: w.mode,
        }
    }

    pub fn corpus_spec(&self, seed: u64) -> CorpusSpec {
        CorpusSpec {
            docs_per_base: self.corpus.docs_per_base,
            doc_radius: self.corpus.doc_radius,
            background_docs: self.corpus.background_docs,
            // keep document noise independent of query noise
            seed: seed ^ 0x9e37_79b9_7f4a_7c15,
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if the file spells it out.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim().trim_matches('"') == key {
                return Some(i + 1);
            }
        }
    }
    // fall back to the section header
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn syntax_error_has_line() {
        let err = Config::parse("[workload]\nbase_count = 10\ndim = \n").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = Config::parse("[sweep]\nk = [4]\ntolerence = [1.0]\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("tolerence"), "{}", err.message);
    }

    #[test]
    fn range_error_points_at_key() {
        let text = "[workload]\ndim = 8\n\n[sweep]\nseeds = [1]\ntolerance = [1.0, -2.0]\n";
        let err = Config::parse(text).unwrap_err();
        assert_eq!(err.line, Some(6));
        assert!(err.message.starts_with("sweep.tolerance"), "{}", err.message);
        assert_eq!(err.to_string(), format!("<config>:6: {}", err.message));
    }

    #[test]
    fn wrong_type_is_rejected() {
        let err = Config::parse("[sweep]\npolicy = [\"random\"]\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn duplicate_seeds_rejected() {
        assert!(Config::parse("[sweep]\nseeds = [1, 1]\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::parse(&text).unwrap(), c);
    }
}
