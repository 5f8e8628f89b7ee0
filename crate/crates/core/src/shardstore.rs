//! Sharded hash tables with phase-checked access disciplines.
//!
//! A [`ShardedMap`] splits its key space over `S` shards owned round-robin by
//! `W` workers. Every access is validated against the current [`Phase`]:
//!
//! * `UpdateOnly`: commutative deltas, aggregated per destination shard by an
//!   [`Updater`] and applied in batches.
//! * `ReadWrite`: per-key atomic operations ([`AtomicOp`]) and plain reads.
//! * `ReadOnly`: lock-free reads, optionally through a per-worker [`SoftCache`].
//! * `LocalOnly`: each worker reads and writes only the shards it owns.
//! * `Sealed`: reads only, no caching.
//!
//! Phase changes take `&mut self`, so every worker borrow has ended before a
//! transition happens; they also fail while aggregated updates are pending.

use std::collections::HashMap;
use std::fmt;
use std::hash::{BuildHasherDefault, Hash, Hasher};
use std::io::{self, Write};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use lru::LruCache;
use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use thiserror::Error;

pub const DEFAULT_AGGREGATION_THRESHOLD: usize = 4096;

const ROUTE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
const TABLE_SEED: u64 = 0xd6e8_feb8_6659_fd93;

/// Multiply-xorshift hasher with a fixed seed and a splitmix64 finaliser.
#[derive(Clone, Copy)]
pub struct MixHasher<const SEED: u64> {
    state: u64,
}

impl<const SEED: u64> Default for MixHasher<SEED> {
    fn default() -> Self {
        MixHasher { state: SEED }
    }
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<const SEED: u64> Hasher for MixHasher<SEED> {
    #[inline]
    fn finish(&self) -> u64 {
        mix64(self.state)
    }

    #[inline]
    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.write_u64(u64::from_le_bytes(buf));
        }
    }

    #[inline]
    fn write_u64(&mut self, i: u64) {
        self.state = (self.state.rotate_left(23) ^ i).wrapping_mul(0x9fb2_1c65_1e98_df25);
    }

    #[inline]
    fn write_u128(&mut self, i: u128) {
        self.write_u64(i as u64);
        self.write_u64((i >> 64) as u64);
    }

    #[inline]
    fn write_u32(&mut self, i: u32) {
        self.write_u64(i as u64);
    }

    #[inline]
    fn write_u8(&mut self, i: u8) {
        self.write_u64(i as u64);
    }

    #[inline]
    fn write_usize(&mut self, i: usize) {
        self.write_u64(i as u64);
    }
}

pub type TableHasher = BuildHasherDefault<MixHasher<TABLE_SEED>>;
pub type FastMap<K, V> = HashMap<K, V, TableHasher>;

/// Stable 64-bit routing hash of a key.
#[inline]
pub fn route_hash<K: Hash + ?Sized>(key: &K) -> u64 {
    let mut h = MixHasher::<ROUTE_SEED>::default();
    key.hash(&mut h);
    h.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    UpdateOnly,
    ReadWrite,
    ReadOnly,
    LocalOnly,
    Sealed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShardError {
    #[error("{op} is not permitted in phase {phase}")]
    WrongPhase { op: &'static str, phase: Phase },
    #[error("phase transition to {to} with {pending} unflushed updates")]
    UnflushedBatches { to: Phase, pending: usize },
    #[error("worker {worker} does not own shard {shard}")]
    NotOwner { worker: usize, shard: usize },
}

/// A shard: its key/value table plus per-shard auxiliary state (e.g. a Bloom
/// filter) that only the shard's apply path touches.
pub struct Shard<K, V, A> {
    pub table: FastMap<K, V>,
    pub aux: A,
}

/// A batch of deltas destined for one shard.
#[derive(Debug, Clone)]
pub struct UpdateBatch<K, D> {
    pub destination_shard: usize,
    pub entries: Vec<(K, D)>,
}

/// Per-key atomic operations available in the `ReadWrite` phase.
#[derive(Debug, Clone)]
pub enum AtomicOp<V> {
    /// Install `new` if the current value equals `expected`. `expected = None`
    /// means "insert if absent".
    CompareAndSwap {
        expected: Option<V>,
        new: V,
    },
    FetchOr(V),
    DeleteIfEqual(V),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomicOutcome<V> {
    /// The operation took effect; carries the previous value.
    Applied(Option<V>),
    /// The operation did not take effect; carries the current value.
    Rejected(V),
    /// The key does not exist and the operation needs it to.
    Absent,
}

impl<V> AtomicOutcome<V> {
    pub fn succeeded(&self) -> bool {
        matches!(self, AtomicOutcome::Applied(_))
    }
}

pub struct ShardedMap<K, V, A = ()> {
    shards: Vec<RwLock<Shard<K, V, A>>>,
    workers: usize,
    phase: Phase,
    aggregation_threshold: usize,
    pending: AtomicUsize,
    batches_applied: AtomicU64,
}

impl<K, V> ShardedMap<K, V, ()>
where
    K: Hash + Eq,
{
    pub fn new(workers: usize, shard_count: usize) -> Self {
        Self::with_aux(workers, shard_count, |_| ())
    }
}

impl<K, V, A> ShardedMap<K, V, A>
where
    K: Hash + Eq,
{
    /// Creates an empty map in the `UpdateOnly` phase.
    pub fn with_aux(workers: usize, shard_count: usize, mut aux: impl FnMut(usize) -> A) -> Self {
        assert!(workers >= 1 && shard_count >= 1);
        let shards = (0..shard_count)
            .map(|i| {
                RwLock::new(Shard {
                    table: FastMap::default(),
                    aux: aux(i),
                })
            })
            .collect();
        ShardedMap {
            shards,
            workers,
            phase: Phase::UpdateOnly,
            aggregation_threshold: DEFAULT_AGGREGATION_THRESHOLD,
            pending: AtomicUsize::new(0),
            batches_applied: AtomicU64::new(0),
        }
    }

    pub fn with_aggregation_threshold(mut self, threshold: usize) -> Self {
        self.aggregation_threshold = threshold.max(1);
        self
    }

    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn aggregation_threshold(&self) -> usize {
        self.aggregation_threshold
    }

    pub fn pending_updates(&self) -> usize {
        self.pending.load(Ordering::Acquire)
    }

    pub fn batches_applied(&self) -> u64 {
        self.batches_applied.load(Ordering::Relaxed)
    }

    #[inline]
    pub fn shard_of(&self, key: &K) -> usize {
        (route_hash(key) % self.shards.len() as u64) as usize
    }

    #[inline]
    pub fn owner_of_shard(&self, shard: usize) -> usize {
        shard % self.workers
    }

    pub fn owned_shards(&self, worker: usize) -> impl Iterator<Item = usize> {
        (worker..self.shards.len()).step_by(self.workers)
    }

    pub fn begin_phase(&mut self, phase: Phase) -> Result<(), ShardError> {
        let pending = self.pending_updates();
        if pending > 0 {
            return Err(ShardError::UnflushedBatches { to: phase, pending });
        }
        self.phase = phase;
        Ok(())
    }

    fn require(&self, op: &'static str, allowed: &[Phase]) -> Result<(), ShardError> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(ShardError::WrongPhase {
                op,
                phase: self.phase,
            })
        }
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.read().table.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Creates a worker-side aggregator. `apply` folds one delta into the
    /// destination shard and must be commutative across deltas.
    pub fn updater<D, F>(&self, apply: F) -> Result<Updater<'_, K, V, A, D, F>, ShardError>
    where
        F: Fn(&mut Shard<K, V, A>, K, D),
    {
        self.require("batched_update", &[Phase::UpdateOnly])?;
        Ok(Updater {
            map: self,
            apply,
            buffers: (0..self.shards.len())
                .map(|s| UpdateBatch {
                    destination_shard: s,
                    entries: Vec::new(),
                })
                .collect(),
            buffered: 0,
        })
    }

    fn apply_batch<D, F>(&self, batch: &mut UpdateBatch<K, D>, apply: &F)
    where
        F: Fn(&mut Shard<K, V, A>, K, D),
    {
        if batch.entries.is_empty() {
            return;
        }
        let n = batch.entries.len();
        {
            let mut shard = self.shards[batch.destination_shard].write();
            for (k, d) in batch.entries.drain(..) {
                apply(&mut shard, k, d);
            }
        }
        self.pending.fetch_sub(n, Ordering::AcqRel);
        self.batches_applied.fetch_add(1, Ordering::Relaxed);
    }

    /// Reads a value. Allowed whenever the table is not being mutated by
    /// aggregated updates.
    pub fn get(&self, key: &K) -> Result<Option<V>, ShardError>
    where
        V: Clone,
    {
        self.with_value(key, V::clone)
    }

    pub fn with_value<R>(&self, key: &K, f: impl FnOnce(&V) -> R) -> Result<Option<R>, ShardError> {
        self.require("get", &[Phase::ReadOnly, Phase::ReadWrite, Phase::Sealed])?;
        let shard = self.shards[self.shard_of(key)].read();
        Ok(shard.table.get(key).map(f))
    }

    pub fn contains_key(&self, key: &K) -> Result<bool, ShardError> {
        Ok(self.with_value(key, |_| ())?.is_some())
    }

    /// Linearizable per-key read-modify-write.
    pub fn atomic_rw(&self, key: K, op: AtomicOp<V>) -> Result<AtomicOutcome<V>, ShardError>
    where
        V: Clone + PartialEq + std::ops::BitOr<Output = V>,
    {
        self.require("atomic_rw", &[Phase::ReadWrite])?;
        let mut shard = self.shards[self.shard_of(&key)].write();
        let table = &mut shard.table;
        Ok(match op {
            AtomicOp::CompareAndSwap { expected, new } => match (table.get_mut(&key), expected) {
                (None, None) => {
                    table.insert(key, new);
                    AtomicOutcome::Applied(None)
                }
                (None, Some(_)) => AtomicOutcome::Absent,
                (Some(cur), Some(exp)) if *cur == exp => {
                    let prev = std::mem::replace(cur, new);
                    AtomicOutcome::Applied(Some(prev))
                }
                (Some(cur), _) => AtomicOutcome::Rejected(cur.clone()),
            },
            AtomicOp::FetchOr(bits) => match table.get_mut(&key) {
                None => AtomicOutcome::Absent,
                Some(cur) => {
                    let prev = cur.clone();
                    *cur = prev.clone() | bits;
                    AtomicOutcome::Applied(Some(prev))
                }
            },
            AtomicOp::DeleteIfEqual(v) => match table.get(&key) {
                None => AtomicOutcome::Absent,
                Some(cur) if *cur == v => AtomicOutcome::Applied(table.remove(&key)),
                Some(cur) => AtomicOutcome::Rejected(cur.clone()),
            },
        })
    }

    /// Read-only lookup served from `cache` when possible. Absent keys are
    /// cached too.
    pub fn cached_get(&self, cache: &mut SoftCache<K, V>, key: &K) -> Result<Option<V>, ShardError>
    where
        K: Clone,
        V: Clone,
    {
        self.require("cached_get", &[Phase::ReadOnly])?;
        if let Some(v) = cache.entries.get(key) {
            cache.hits += 1;
            return Ok(v.clone());
        }
        cache.misses += 1;
        let v = {
            let shard = self.shards[self.shard_of(key)].read();
            shard.table.get(key).cloned()
        };
        cache.entries.put(key.clone(), v.clone());
        Ok(v)
    }

    /// Owner-only view for the `LocalOnly` phase.
    pub fn local_table(&self, worker: usize) -> Result<LocalTable<'_, K, V, A>, ShardError> {
        self.require("local_table", &[Phase::LocalOnly])?;
        assert!(worker < self.workers);
        Ok(LocalTable { map: self, worker })
    }

    /// Unchecked exclusive access for single-threaded setup and teardown.
    pub fn shards_mut(&mut self) -> impl Iterator<Item = &mut Shard<K, V, A>> {
        self.shards.iter_mut().map(|s| s.get_mut())
    }

    pub fn shard_read(&self, shard: usize) -> RwLockReadGuard<'_, Shard<K, V, A>> {
        self.shards[shard].read()
    }

    /// All entries sorted by key.
    pub fn to_sorted_vec(&self) -> Vec<(K, V)>
    where
        K: Ord + Clone,
        V: Clone,
    {
        let mut v: Vec<(K, V)> = self
            .shards
            .iter()
            .flat_map(|s| {
                let g = s.read();
                g.table
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Debug dump as TSV sorted by key.
    pub fn dump_tsv<W: Write>(
        &self,
        w: &mut W,
        mut row: impl FnMut(&K, &V) -> String,
    ) -> io::Result<()>
    where
        K: Ord + Clone,
        V: Clone,
    {
        for (k, v) in self.to_sorted_vec() {
            writeln!(w, "{}", row(&k, &v))?;
        }
        Ok(())
    }

    /// Replaces the per-shard auxiliary state.
    pub fn map_aux<A2>(self, mut f: impl FnMut(A) -> A2) -> ShardedMap<K, V, A2> {
        let shards = self
            .shards
            .into_iter()
            .map(|s| {
                let s = s.into_inner();
                RwLock::new(Shard {
                    table: s.table,
                    aux: f(s.aux),
                })
            })
            .collect();
        ShardedMap {
            shards,
            workers: self.workers,
            phase: self.phase,
            aggregation_threshold: self.aggregation_threshold,
            pending: AtomicUsize::new(0),
            batches_applied: AtomicU64::new(self.batches_applied.into_inner()),
        }
    }

    /// Rebuilds the map with transformed values, preserving routing.
    pub fn map_values<V2>(self, mut f: impl FnMut(V) -> V2) -> ShardedMap<K, V2, A> {
        let shards = self
            .shards
            .into_iter()
            .map(|s| {
                let s = s.into_inner();
                let mut table =
                    FastMap::with_capacity_and_hasher(s.table.len(), Default::default());
                for (k, v) in s.table {
                    table.insert(k, f(v));
                }
                RwLock::new(Shard { table, aux: s.aux })
            })
            .collect();
        ShardedMap {
            shards,
            workers: self.workers,
            phase: self.phase,
            aggregation_threshold: self.aggregation_threshold,
            pending: AtomicUsize::new(0),
            batches_applied: AtomicU64::new(self.batches_applied.into_inner()),
        }
    }
}

/// Worker-side aggregation of fine-grained updates into per-shard batches.
pub struct Updater<'a, K, V, A, D, F>
where
    K: Hash + Eq,
    F: Fn(&mut Shard<K, V, A>, K, D),
{
    map: &'a ShardedMap<K, V, A>,
    apply: F,
    buffers: Vec<UpdateBatch<K, D>>,
    buffered: usize,
}

impl<K, V, A, D, F> Updater<'_, K, V, A, D, F>
where
    K: Hash + Eq,
    F: Fn(&mut Shard<K, V, A>, K, D),
{
    /// Enqueues a delta; the destination batch is applied once it reaches the
    /// aggregation threshold.
    pub fn batched_update(&mut self, key: K, delta: D) {
        let dest = self.map.shard_of(&key);
        self.map.pending.fetch_add(1, Ordering::AcqRel);
        let batch = &mut self.buffers[dest];
        batch.entries.push((key, delta));
        self.buffered += 1;
        if batch.entries.len() >= self.map.aggregation_threshold {
            self.buffered -= batch.entries.len();
            self.map.apply_batch(batch, &self.apply);
        }
    }

    pub fn queued(&self, shard: usize) -> usize {
        self.buffers[shard].entries.len()
    }

    pub fn buffered(&self) -> usize {
        self.buffered
    }

    /// Applies every partially filled batch.
    pub fn flush(&mut self) {
        for batch in &mut self.buffers {
            self.map.apply_batch(batch, &self.apply);
        }
        self.buffered = 0;
    }

    pub fn finish(mut self) {
        self.flush();
    }
}

impl<K, V, A, D, F> Drop for Updater<'_, K, V, A, D, F>
where
    K: Hash + Eq,
    F: Fn(&mut Shard<K, V, A>, K, D),
{
    fn drop(&mut self) {
        if self.buffered > 0 {
            log::warn!("updater dropped with {} unflushed deltas", self.buffered);
        }
    }
}

/// Owner-restricted access during the `LocalOnly` phase.
pub struct LocalTable<'a, K, V, A> {
    map: &'a ShardedMap<K, V, A>,
    worker: usize,
}

impl<'a, K, V, A> LocalTable<'a, K, V, A>
where
    K: Hash + Eq,
{
    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn owned_shards(&self) -> impl Iterator<Item = usize> {
        self.map.owned_shards(self.worker)
    }

    pub fn owns_key(&self, key: &K) -> bool {
        self.map.owner_of_shard(self.map.shard_of(key)) == self.worker
    }

    pub fn shard(&self, shard: usize) -> Result<RwLockWriteGuard<'a, Shard<K, V, A>>, ShardError> {
        if self.map.owner_of_shard(shard) != self.worker {
            return Err(ShardError::NotOwner {
                worker: self.worker,
                shard,
            });
        }
        Ok(self.map.shards[shard].write())
    }

    pub fn get(&self, key: &K) -> Result<Option<V>, ShardError>
    where
        V: Clone,
    {
        let s = self.shard(self.map.shard_of(key))?;
        Ok(s.table.get(key).cloned())
    }

    pub fn insert(&self, key: K, value: V) -> Result<Option<V>, ShardError> {
        let mut s = self.shard(self.map.shard_of(&key))?;
        Ok(s.table.insert(key, value))
    }

    /// Runs `f(shard_index, shard)` over every owned shard.
    pub fn for_each_owned(&self, mut f: impl FnMut(usize, &mut Shard<K, V, A>)) {
        for s in self.owned_shards() {
            let mut g = self.map.shards[s].write();
            f(s, &mut g);
        }
    }
}

/// Worker-private LRU copy of remote entries, valid only while the
/// underlying map stays read-only.
pub struct SoftCache<K: Hash + Eq, V> {
    entries: LruCache<K, Option<V>, TableHasher>,
    pub hits: u64,
    pub misses: u64,
}

pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 16;

impl<K: Hash + Eq, V> SoftCache<K, V> {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        SoftCache {
            entries: LruCache::with_hasher(cap, TableHasher::default()),
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.entries.cap().get()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}
