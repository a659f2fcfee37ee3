//! Linear-scan approximate cache.
//!
//! Every lookup computes the distance from the query to each stored key and returns the
//! closest entry when it lies within the tolerance. Keys live in one contiguous row-major
//! buffer so the scan walks memory linearly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cache::{ApproximateCache, CacheEntry, CacheHit, CacheValue, EvictionPolicy, Occupancy};
use crate::error::{check_dim, invalid, Result};
use crate::vector::{DistanceMetric, Embedding};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatCacheConfig {
    pub dim: usize,
    pub capacity: usize,
    /// Maximum query/key distance accepted as a hit. `0` means exact matching.
    pub tolerance: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
    #[serde(default)]
    pub policy: EvictionPolicy,
}

impl FlatCacheConfig {
    pub fn new(dim: usize, capacity: usize, tolerance: f64) -> Self {
        Self {
            dim,
            capacity,
            tolerance,
            metric: DistanceMetric::L2,
            policy: EvictionPolicy::Fifo,
        }
    }

    pub fn with_policy(mut self, policy: EvictionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if self.capacity == 0 {
            return Err(invalid("capacity", "must be at least 1"));
        }
        validate_tolerance(self.tolerance)
    }
}

pub(crate) fn validate_tolerance(tolerance: f64) -> Result<()> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(invalid("tolerance", format!("must be >= 0, got {tolerance}")));
    }
    Ok(())
}

/// Bit pattern of a key, used to detect re-insertion of an identical key.
/// `-0.0` is folded into `0.0` so that keys at distance zero compare equal.
type KeyBits = Box<[u32]>;

fn key_bits(v: &[f32]) -> KeyBits {
    v.iter().map(|x| if *x == 0.0 { 0 } else { x.to_bits() }).collect()
}

#[derive(Debug, Clone)]
struct Slot {
    value: CacheValue,
    inserted_seq: u64,
    last_used_seq: u64,
}

/// Fixed-capacity cache scanned linearly on every lookup.
#[derive(Debug, Clone)]
pub struct FlatCache {
    config: FlatCacheConfig,
    keys: Vec<f32>,
    slots: Vec<Slot>,
    index: HashMap<KeyBits, usize>,
    clock: u64,
    distance_ops: u64,
}

impl FlatCache {
    pub fn new(config: FlatCacheConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::new_unchecked(config))
    }

    pub(crate) fn new_unchecked(config: FlatCacheConfig) -> Self {
        Self {
            config,
            keys: Vec::new(),
            slots: Vec::new(),
            index: HashMap::new(),
            clock: 0,
            distance_ops: 0,
        }
    }

    pub fn config(&self) -> &FlatCacheConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity
    }

    pub fn contains_key(&self, key: &[f32]) -> bool {
        self.index.contains_key(&key_bits(key))
    }

    /// Stored entries in slot order (not insertion order).
    pub fn entries(&self) -> impl Iterator<Item = EntryRef<'_>> + '_ {
        self.keys
            .chunks_exact(self.config.dim)
            .zip(&self.slots)
            .map(|(key, slot)| EntryRef {
                key,
                value: &slot.value,
                inserted_seq: slot.inserted_seq,
                last_used_seq: slot.last_used_seq,
            })
    }

    fn row(&self, slot: usize) -> &[f32] {
        let d = self.config.dim;
        &self.keys[slot * d..(slot + 1) * d]
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// Closest stored key. Ties go to the most recently inserted entry.
    fn nearest(&self, query: &[f32]) -> Option<(usize, f64)> {
        let metric = self.config.metric;
        let mut best: Option<(usize, f64)> = None;
        for (i, key) in self.keys.chunks_exact(self.config.dim).enumerate() {
            let d = metric.eval(query, key);
            best = match best {
                Some((b, bd)) if d > bd || (d == bd && self.slots[i].inserted_seq < self.slots[b].inserted_seq) => {
                    Some((b, bd))
                }
                _ => Some((i, d)),
            };
        }
        best
    }

    fn victim(&self) -> usize {
        let seq = |s: &Slot| match self.config.policy {
            EvictionPolicy::Fifo => s.inserted_seq,
            EvictionPolicy::Lru => s.last_used_seq,
        };
        self.slots
            .iter()
            .enumerate()
            .min_by_key(|(_, s)| seq(s))
            .map(|(i, _)| i)
            .expect("victim requested from an empty cache")
    }

    fn remove_slot(&mut self, slot: usize) -> CacheEntry {
        let d = self.config.dim;
        let last = self.slots.len() - 1;
        let key = self.row(slot).to_vec();
        self.index.remove(&key_bits(&key));
        if slot != last {
            self.keys.copy_within(last * d..(last + 1) * d, slot * d);
            let moved = key_bits(self.row(slot));
            self.index.insert(moved, slot);
        }
        self.keys.truncate(last * d);
        let removed = self.slots.swap_remove(slot);
        CacheEntry {
            key: Embedding::new(key).expect("stored keys are valid embeddings"),
            value: removed.value,
            inserted_seq: removed.inserted_seq,
            last_used_seq: removed.last_used_seq,
        }
    }
}

/// Borrowed view of one stored entry.
#[derive(Debug, Clone, Copy)]
pub struct EntryRef<'a> {
    pub key: &'a [f32],
    pub value: &'a CacheValue,
    pub inserted_seq: u64,
    pub last_used_seq: u64,
}

impl ApproximateCache for FlatCache {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn metric(&self) -> DistanceMetric {
        self.config.metric
    }

    fn lookup(&mut self, query: &Embedding) -> Result<Option<CacheHit<'_>>> {
        check_dim(self.config.dim, query.dim())?;
        self.distance_ops += self.slots.len() as u64;
        let Some((slot, dist)) = self.nearest(query.as_slice()) else {
            return Ok(None);
        };
        if dist > self.config.tolerance {
            return Ok(None);
        }
        let seq = self.tick();
        self.slots[slot].last_used_seq = seq;
        Ok(Some(CacheHit {
            value: &self.slots[slot].value,
            distance: dist,
            key: self.row(slot),
        }))
    }

    fn insert(&mut self, key: Embedding, value: CacheValue) -> Result<Option<CacheEntry>> {
        check_dim(self.config.dim, key.dim())?;
        if value.has_embeddings() {
            check_dim(self.config.dim, value.dim())?;
        }
        let bits = key_bits(key.as_slice());
        let seq = self.tick();
        if let Some(&slot) = self.index.get(&bits) {
            let s = &mut self.slots[slot];
            s.value = value;
            s.inserted_seq = seq;
            s.last_used_seq = seq;
            return Ok(None);
        }
        let evicted = if self.slots.len() >= self.config.capacity {
            let victim = self.victim();
            Some(self.remove_slot(victim))
        } else {
            None
        };
        self.index.insert(bits, self.slots.len());
        self.keys.extend_from_slice(key.as_slice());
        self.slots.push(Slot {
            value,
            inserted_seq: seq,
            last_used_seq: seq,
        });
        Ok(evicted)
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            entries: self.slots.len(),
            buckets: 1,
            capacity: self.config.capacity as u64,
        }
    }

    fn distance_computations(&self) -> u64 {
        self.distance_ops
    }
}
