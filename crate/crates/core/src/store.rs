//! Vector database interface and an exact brute-force implementation.
//!
//! [`BruteForceStore`] scans the whole corpus per query. At the corpus sizes used by the
//! harness (up to ~1e5 documents) this is fast enough, and because it is exact it doubles as
//! the ground truth for k-recall.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::vector::{DistanceMetric, Embedding};
use crate::DocId;

/// One search result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: DocId,
    pub distance: f64,
}

/// How retrieval cost is accounted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Each database call is charged exactly the configured delay; nothing sleeps.
    #[default]
    Virtual,
    /// Each database call sleeps for the delay and is timed with a monotonic clock.
    WallClock,
}

/// Artificial per-call database latency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedLatency {
    pub delay: Duration,
    pub clock: ClockMode,
}

impl SimulatedLatency {
    pub fn virtual_delay(delay: Duration) -> Self {
        Self {
            delay,
            clock: ClockMode::Virtual,
        }
    }

    pub fn wall_clock(delay: Duration) -> Self {
        Self {
            delay,
            clock: ClockMode::WallClock,
        }
    }
}

/// The database consulted on cache misses.
pub trait VectorStore {
    fn dim(&self) -> usize;

    fn metric(&self) -> DistanceMetric;

    /// The `m` nearest documents to `query`, closest first.
    fn retrieve_document_indices(&self, query: &Embedding, m: usize) -> Result<Vec<Neighbor>>;

    /// Embedding of a stored document, used to fill cache values for re-ranking.
    fn document(&self, id: DocId) -> Option<&[f32]>;

    fn latency(&self) -> SimulatedLatency {
        SimulatedLatency::default()
    }
}

impl<S: VectorStore + ?Sized> VectorStore for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self) -> DistanceMetric {
        (**self).metric()
    }
    fn retrieve_document_indices(&self, query: &Embedding, m: usize) -> Result<Vec<Neighbor>> {
        (**self).retrieve_document_indices(query, m)
    }
    fn document(&self, id: DocId) -> Option<&[f32]> {
        (**self).document(id)
    }
    fn latency(&self) -> SimulatedLatency {
        (**self).latency()
    }
}

impl<S: VectorStore + ?Sized> VectorStore for Arc<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self) -> DistanceMetric {
        (**self).metric()
    }
    fn retrieve_document_indices(&self, query: &Embedding, m: usize) -> Result<Vec<Neighbor>> {
        (**self).retrieve_document_indices(query, m)
    }
    fn document(&self, id: DocId) -> Option<&[f32]> {
        (**self).document(id)
    }
    fn latency(&self) -> SimulatedLatency {
        (**self).latency()
    }
}

/// Documents with unique ids and a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    ids: Vec<DocId>,
    data: Vec<f32>,
    dim: usize,
}

const CORPUS_MAGIC: &[u8; 8] = b"PXCORPUS";
const CORPUS_VERSION: u32 = 1;

impl Corpus {
    pub fn new(docs: Vec<(DocId, Embedding)>) -> Result<Self> {
        let dim = docs
            .first()
            .map(|(_, e)| e.dim())
            .ok_or_else(|| invalid("corpus", "no documents"))?;
        let mut ids = Vec::with_capacity(docs.len());
        let mut data = Vec::with_capacity(docs.len() * dim);
        for (id, e) in docs {
            check_dim(dim, e.dim())?;
            ids.push(id);
            data.extend_from_slice(e.as_slice());
        }
        Self::from_parts(ids, data, dim)
    }

    /// Builds a corpus from an id list and a row-major `(ids.len(), dim)` matrix.
    pub fn from_parts(ids: Vec<DocId>, data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if data.len() != ids.len() * dim {
            return Err(invalid(
                "corpus",
                format!(
                    "{} values do not form {} rows of dimension {dim}",
                    data.len(),
                    ids.len()
                ),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::DuplicateDocId(*dup));
        }
        Ok(Self { ids, data, dim })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[DocId] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (DocId, &[f32])> + '_ {
        self.ids.iter().copied().zip(self.data.chunks_exact(self.dim))
    }

    /// Binary layout, all little-endian: 8-byte magic `PXCORPUS`, `u32` version (1),
    /// `u64` row count N, `u64` dimension d, N `u64` ids, then N*d `f32` values row-major.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CORPUS_MAGIC)?;
        w.write_all(&CORPUS_VERSION.to_le_bytes())?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for id in &self.ids {
            w.write_all(&id.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CORPUS_MAGIC {
            return Err(Error::CorpusFormat("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CORPUS_VERSION {
            return Err(Error::CorpusFormat(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::CorpusFormat("row count".into()))?;
        r.read_exact(&mut b8)?;
        let dim = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::CorpusFormat("dimension".into()))?;
        let values = n
            .checked_mul(dim)
            .ok_or_else(|| Error::CorpusFormat("matrix size overflows".into()))?;
        let mut ids = Vec::new();
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            ids.push(u64::from_le_bytes(b8));
        }
        let mut data = Vec::new();
        for _ in 0..values {
            r.read_exact(&mut b4)?;
            data.push(f32::from_le_bytes(b4));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::CorpusFormat("trailing bytes".into()));
        }
        Self::from_parts(ids, data, dim)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Exact nearest-neighbor search by full scan.
#[derive(Debug, Clone)]
pub struct BruteForceStore {
    corpus: Corpus,
    positions: HashMap<DocId, usize>,
    metric: DistanceMetric,
    latency: SimulatedLatency,
}

impl BruteForceStore {
    pub fn new(corpus: Corpus, metric: DistanceMetric) -> Self {
        let positions = corpus.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        Self {
            corpus,
            positions,
            metric,
            latency: SimulatedLatency::default(),
        }
    }

    pub fn with_latency(mut self, latency: SimulatedLatency) -> Self {
        self.latency = latency;
        self
    }

    pub fn simulated_latency(&mut self, latency: SimulatedLatency) {
        self.latency = latency;
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }
}

impl VectorStore for BruteForceStore {
    fn dim(&self) -> usize {
        self.corpus.dim
    }

    fn metric(&self) -> DistanceMetric {
        self.metric
    }

    fn retrieve_document_indices(&self, query: &Embedding, m: usize) -> Result<Vec<Neighbor>> {
        check_dim(self.corpus.dim, query.dim())?;
        if m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        let q = query.as_slice();
        let mut all: Vec<Neighbor> = self
            .corpus
            .iter()
            .map(|(id, row)| Neighbor {
                id,
                distance: self.metric.eval(q, row),
            })
            .collect();
        let order = |a: &Neighbor, b: &Neighbor| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id));
        if m < all.len() {
            all.select_nth_unstable_by(m - 1, order);
            all.truncate(m);
        }
        all.sort_unstable_by(order);
        if self.latency.clock == ClockMode::WallClock && !self.latency.delay.is_zero() {
            std::thread::sleep(self.latency.delay);
        }
        Ok(all)
    }

    fn document(&self, id: DocId) -> Option<&[f32]> {
        self.positions.get(&id).map(|&i| self.corpus.row(i))
    }

    fn latency(&self) -> SimulatedLatency {
        self.latency
    }
}
