//! K-mer analysis: canonical k-mer counting with per-side extension tallies,
//! a per-shard Bloom filter gate against singleton (error) k-mers, a
//! Misra–Gries heavy-hitter bypass, and merging of contig-derived k-mers
//! from a previous iteration.
//!
//! Counting sweeps the reads twice. The first sweep pushes every k-mer
//! occurrence through its shard's Bloom filter; an occurrence that finds
//! the filter already set creates a candidate entry. The second sweep adds
//! counts and extension tallies only to candidates. A k-mer seen at least
//! twice is therefore always counted exactly, and a Bloom false positive
//! only admits a singleton that the `epsilon` filter removes at seal time.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, Write};

use crate::contig::Contig;
use crate::kmer::{windows, Kmer, MAX_K};
use crate::seqio::{code_base, complement, MaskedSeq, ReadPair};
use crate::shardstore::{mix64, FastMap, Phase, Shard, ShardedMap};
use crate::workers::Workers;

/// Extension code of one k-mer side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Ext {
    /// No extension (`X`).
    #[default]
    None,
    Base(u8),
    /// More than one candidate base (`F`).
    Fork,
}

impl Ext {
    /// Merge of two independent observations: `None` is the identity,
    /// `Fork` absorbs, and two different bases fork.
    pub fn combine(self, other: Ext) -> Ext {
        match (self, other) {
            (Ext::None, x) | (x, Ext::None) => x,
            (Ext::Base(a), Ext::Base(b)) if a == b => Ext::Base(a),
            _ => Ext::Fork,
        }
    }

    pub fn complement(self) -> Ext {
        match self {
            Ext::Base(b) => Ext::Base(complement(b)),
            x => x,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Ext::None => 'X',
            Ext::Fork => 'F',
            Ext::Base(b) => code_base(b) as char,
        }
    }

    pub fn from_option(b: Option<u8>) -> Ext {
        b.map_or(Ext::None, Ext::Base)
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KmerRecord {
    pub count: u32,
    pub left: [u32; 4],
    pub right: [u32; 4],
    pub hq_left: Ext,
    pub hq_right: Ext,
    /// Seen in the reads of the current iteration.
    pub from_reads: bool,
    pub from_prev_contigs: bool,
    /// Extensions observed in previous-iteration contigs.
    pub contig_left: Ext,
    pub contig_right: Ext,
}

impl KmerRecord {
    #[inline]
    fn observe(&mut self, left: Option<u8>, right: Option<u8>) {
        self.count += 1;
        if let Some(b) = left {
            self.left[b as usize] += 1;
        }
        if let Some(b) = right {
            self.right[b as usize] += 1;
        }
    }

    fn absorb(&mut self, other: &KmerRecord) {
        self.count += other.count;
        for i in 0..4 {
            self.left[i] += other.left[i];
            self.right[i] += other.right[i];
        }
    }

    /// Tallies, high-quality codes and contig codes as seen from the
    /// reverse-complement strand.
    pub fn flipped(&self) -> KmerRecord {
        let rev = |t: [u32; 4]| [t[3], t[2], t[1], t[0]];
        KmerRecord {
            count: self.count,
            left: rev(self.right),
            right: rev(self.left),
            hq_left: self.hq_right.complement(),
            hq_right: self.hq_left.complement(),
            from_reads: self.from_reads,
            from_prev_contigs: self.from_prev_contigs,
            contig_left: self.contig_right.complement(),
            contig_right: self.contig_left.complement(),
        }
    }
}

/// High-quality code of one side: the unique base whose tally exceeds the
/// threshold, `F` if several do, `X` if none does.
pub fn hq_code(tally: &[u32; 4], t_hq_ext: u32) -> Ext {
    let mut code = Ext::None;
    for (b, &n) in tally.iter().enumerate() {
        if n > t_hq_ext {
            code = match code {
                Ext::None => Ext::Base(b as u8),
                _ => Ext::Fork,
            };
        }
    }
    code
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KmerParams {
    pub k: usize,
    pub epsilon: u32,
    pub t_hq_ext: u32,
    pub t_base: f64,
    pub e: f64,
    /// Misra–Gries counter budget; 0 disables the heavy-hitter bypass.
    pub heavy_hitter_capacity: usize,
}

impl Default for KmerParams {
    fn default() -> Self {
        KmerParams {
            k: 21,
            epsilon: 2,
            t_hq_ext: 2,
            t_base: 2.0,
            e: 0.02,
            heavy_hitter_capacity: 256,
        }
    }
}

impl KmerParams {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k.is_multiple_of(2) || self.k > MAX_K || self.k < 3 {
            return Err(format!("k must be odd and in 3..={MAX_K}, got {}", self.k));
        }
        if self.epsilon < 2 {
            return Err(format!("epsilon must be at least 2, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// One k-mer window of a read, canonicalised, with the neighbouring bases in
/// the canonical orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KmerOccurrence {
    pub kmer: Kmer,
    pub left: Option<u8>,
    pub right: Option<u8>,
}

/// Canonical k-mers of a read with their extensions. Windows covering a
/// masked base are skipped, and a masked neighbour counts as no extension.
pub fn extract_kmers(read: &MaskedSeq, k: usize) -> impl Iterator<Item = KmerOccurrence> + '_ {
    let n = read.len();
    let base_at = move |i: usize| -> Option<u8> {
        if read.n_mask.contains(i) {
            None
        } else {
            Some(read.seq.get(i))
        }
    };
    windows(read, k).map(move |(pos, _, (kmer, flipped))| {
        let left = if pos > 0 { base_at(pos - 1) } else { None };
        let right = if pos + k < n { base_at(pos + k) } else { None };
        if flipped {
            KmerOccurrence {
                kmer,
                left: right.map(complement),
                right: left.map(complement),
            }
        } else {
            KmerOccurrence { kmer, left, right }
        }
    })
}

/// Two-probe Bloom filter over canonical k-mers.
pub struct Bloom {
    bits: Vec<u64>,
    nbits: u64,
    inserted: u64,
    capacity: u64,
}

/// Bits per element giving a 1% false-positive rate with two probes.
const BLOOM_BITS_PER_ELEMENT: f64 = 19.0;

impl Bloom {
    pub fn for_elements(expected: u64) -> Self {
        let nbits = ((expected.max(64) as f64) * BLOOM_BITS_PER_ELEMENT).ceil() as u64;
        let words = nbits.div_ceil(64) as usize;
        Bloom {
            bits: vec![0; words],
            nbits: words as u64 * 64,
            inserted: 0,
            capacity: expected.max(64),
        }
    }

    #[inline]
    fn probes(&self, key: Kmer) -> (u64, u64) {
        let lo = key.0 as u64;
        let hi = (key.0 >> 64) as u64;
        let h1 = mix64(lo ^ mix64(hi ^ 0x5851_f42d_4c95_7f2d));
        let h2 = mix64(h1 ^ 0x1405_7b7e_f767_814f);
        (h1 % self.nbits, h2 % self.nbits)
    }

    /// Inserts `key`; returns true if it was (probably) present already.
    #[inline]
    pub fn test_and_set(&mut self, key: Kmer) -> bool {
        let (a, b) = self.probes(key);
        let (wa, ma) = ((a / 64) as usize, 1u64 << (a % 64));
        let (wb, mb) = ((b / 64) as usize, 1u64 << (b % 64));
        let present = self.bits[wa] & ma != 0 && self.bits[wb] & mb != 0;
        if !present {
            self.bits[wa] |= ma;
            self.bits[wb] |= mb;
            self.inserted += 1;
            if self.inserted == self.capacity + 1 {
                log::warn!(
                    "Bloom filter over its design capacity of {}; false-positive rate above 1%",
                    self.capacity
                );
            }
        }
        present
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }
}

/// Misra–Gries frequent-items summary over canonical k-mers.
#[derive(Clone, Debug)]
pub struct HeavyHitterSketch {
    capacity: usize,
    counters: FastMap<Kmer, u64>,
    /// Total amount subtracted from every counter so far; bounds the
    /// undercount of any entry.
    decrements: u64,
    stream_len: u64,
}

impl HeavyHitterSketch {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "heavy-hitter capacity must be at least 1");
        HeavyHitterSketch {
            capacity,
            counters: FastMap::default(),
            decrements: 0,
            stream_len: 0,
        }
    }

    pub fn insert(&mut self, key: Kmer) {
        self.stream_len += 1;
        if let Some(c) = self.counters.get_mut(&key) {
            *c += 1;
        } else if self.counters.len() < self.capacity {
            self.counters.insert(key, 1);
        } else {
            self.decrements += 1;
            self.counters.retain(|_, c| {
                *c -= 1;
                *c > 0
            });
        }
    }

    /// Combines two summaries; the result keeps the same error guarantee
    /// relative to the combined stream.
    pub fn merge(&mut self, other: &HeavyHitterSketch) {
        self.stream_len += other.stream_len;
        self.decrements += other.decrements;
        for (&k, &c) in &other.counters {
            *self.counters.entry(k).or_insert(0) += c;
        }
        if self.counters.len() > self.capacity {
            let mut values: Vec<u64> = self.counters.values().copied().collect();
            values.sort_unstable_by(|a, b| b.cmp(a));
            let cut = values[self.capacity];
            self.decrements += cut;
            self.counters.retain(|_, c| {
                *c = c.saturating_sub(cut);
                *c > 0
            });
        }
    }

    pub fn stream_len(&self) -> u64 {
        self.stream_len
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Upper bound on how far any estimate undercounts the true frequency.
    pub fn error_bound(&self) -> u64 {
        self.decrements
    }

    /// `(kmer, estimated count, error bound)`, sorted by k-mer.
    pub fn entries(&self) -> Vec<(Kmer, u64, u64)> {
        let mut v: Vec<_> = self
            .counters
            .iter()
            .map(|(&k, &c)| (k, c, self.decrements))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn estimate(&self, key: &Kmer) -> Option<u64> {
        self.counters.get(key).copied()
    }

    /// Entries whose estimate alone exceeds `N / capacity`.
    pub fn heavy_keys(&self) -> HashSet<Kmer> {
        let cut = self.stream_len / self.capacity as u64;
        self.counters
            .iter()
            .filter(|(_, &c)| c > cut)
            .map(|(&k, _)| k)
            .collect()
    }
}

pub fn detect_heavy_hitters(
    workers: &Workers,
    blocks: &[Vec<ReadPair>],
    k: usize,
    capacity: usize,
) -> HeavyHitterSketch {
    let sketches = workers.run(|w| {
        let mut s = HeavyHitterSketch::new(capacity);
        for pair in blocks.get(w).into_iter().flatten() {
            for read in [&pair.r1, &pair.r2] {
                for (_, _, (km, _)) in windows(read, k) {
                    s.insert(km);
                }
            }
        }
        s
    });
    let mut merged = HeavyHitterSketch::new(capacity);
    for s in &sketches {
        merged.merge(s);
    }
    merged
}

pub type KmerTable = ShardedMap<Kmer, KmerRecord>;

#[derive(Clone, Debug, Default)]
pub struct CountStats {
    pub occurrences: u64,
    pub candidates: usize,
    pub heavy_hitters: usize,
    pub bloom_inserted: u64,
    pub retained: usize,
}

type Occ = (Option<u8>, Option<u8>);

fn candidate_gate(shard: &mut Shard<Kmer, KmerRecord, Bloom>, km: Kmer, _: ()) {
    if shard.aux.test_and_set(km) {
        shard.table.entry(km).or_default();
    }
}

fn count_if_candidate(shard: &mut Shard<Kmer, KmerRecord, Bloom>, km: Kmer, (l, r): Occ) {
    if let Some(rec) = shard.table.get_mut(&km) {
        rec.observe(l, r);
    }
}

fn seal_record(rec: &mut KmerRecord, params: &KmerParams) {
    rec.from_reads = true;
    rec.hq_left = hq_code(&rec.left, params.t_hq_ext);
    rec.hq_right = hq_code(&rec.right, params.t_hq_ext);
}

/// Counts canonical k-mers of the reads in `blocks` (block `w` is processed by
/// worker `w`). The returned table is in the `ReadOnly` phase and holds every
/// k-mer occurring at least `epsilon` times.
pub fn count_pass(
    workers: &Workers,
    blocks: &[Vec<ReadPair>],
    params: &KmerParams,
    shard_count: usize,
) -> (KmerTable, CountStats) {
    let k = params.k;
    let heavy: HashSet<Kmer> = if params.heavy_hitter_capacity > 0 {
        detect_heavy_hitters(workers, blocks, k, params.heavy_hitter_capacity).heavy_keys()
    } else {
        HashSet::new()
    };
    let total_bases: u64 = blocks
        .iter()
        .flatten()
        .map(|p| (p.r1.len() + p.r2.len()) as u64)
        .sum();
    let per_shard = total_bases.div_ceil(shard_count as u64);
    let mut map: ShardedMap<Kmer, KmerRecord, Bloom> =
        ShardedMap::with_aux(workers.count(), shard_count, |_| {
            Bloom::for_elements(per_shard)
        });

    let reads_of = |w: usize| {
        blocks
            .get(w)
            .into_iter()
            .flatten()
            .flat_map(|p| [&p.r1, &p.r2])
    };

    let occurrences: u64 = workers
        .run(|w| {
            let mut u = map.updater(candidate_gate).expect("update phase");
            let mut n = 0u64;
            for read in reads_of(w) {
                for (_, _, (km, _)) in windows(read, k) {
                    n += 1;
                    if !heavy.contains(&km) {
                        u.batched_update(km, ());
                    }
                }
            }
            u.finish();
            n
        })
        .into_iter()
        .sum();
    // barrier between the sweeps
    map.begin_phase(Phase::UpdateOnly).expect("flushed");

    let heavy_locals: Vec<FastMap<Kmer, KmerRecord>> = workers.run(|w| {
        let mut local: FastMap<Kmer, KmerRecord> = FastMap::default();
        let mut u = map.updater(count_if_candidate).expect("update phase");
        for read in reads_of(w) {
            for occ in extract_kmers(read, k) {
                if heavy.contains(&occ.kmer) {
                    local
                        .entry(occ.kmer)
                        .or_default()
                        .observe(occ.left, occ.right);
                } else {
                    u.batched_update(occ.kmer, (occ.left, occ.right));
                }
            }
        }
        u.finish();
        local
    });

    map.begin_phase(Phase::LocalOnly).expect("flushed");
    let per_worker: Vec<(usize, u64, usize)> = workers.run(|w| {
        let lt = map.local_table(w).expect("local phase");
        let (mut candidates, mut bloom, mut kept) = (0usize, 0u64, 0usize);
        lt.for_each_owned(|_, shard| {
            candidates += shard.table.len();
            bloom += shard.aux.inserted();
        });
        // heavy hitters bypass per-occurrence routing: merge worker-local
        // records straight into the owning shard
        for local in &heavy_locals {
            for (km, rec) in local {
                if lt.owns_key(km) {
                    let mut shard = lt.shard(map.shard_of(km)).expect("owned");
                    shard.table.entry(*km).or_default().absorb(rec);
                }
            }
        }
        lt.for_each_owned(|_, shard| {
            shard.table.retain(|_, rec| rec.count >= params.epsilon);
            for rec in shard.table.values_mut() {
                seal_record(rec, params);
            }
            kept += shard.table.len();
        });
        (candidates, bloom, kept)
    });
    map.begin_phase(Phase::ReadOnly).expect("flushed");

    let stats = CountStats {
        occurrences,
        candidates: per_worker.iter().map(|x| x.0).sum(),
        heavy_hitters: heavy.len(),
        bloom_inserted: per_worker.iter().map(|x| x.1).sum(),
        retained: per_worker.iter().map(|x| x.2).sum(),
    };
    (map.map_aux(|_| ()), stats)
}

#[derive(Clone, Copy, Debug)]
struct ContigKmer {
    left: Ext,
    right: Ext,
    count: u32,
}

fn merge_contig_kmer(shard: &mut Shard<Kmer, KmerRecord, ()>, km: Kmer, d: ContigKmer) {
    let rec = shard.table.entry(km).or_default();
    rec.from_prev_contigs = true;
    rec.contig_left = rec.contig_left.combine(d.left);
    rec.contig_right = rec.contig_right.combine(d.right);
    if !rec.from_reads {
        rec.count = rec.count.max(d.count);
        rec.hq_left = rec.contig_left;
        rec.hq_right = rec.contig_right;
    }
}

/// Statistics of a merge of contig-derived k-mers into a read-derived table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergeStats {
    pub contig_kmers: usize,
    pub added: usize,
    pub conflicts: usize,
}

/// Inserts every k-window of `prev_contigs` as a high-confidence k-mer. K-mers
/// already present keep their read-derived counts and tallies and gain the
/// flag; new ones take the contig's depth as their count. The table is left
/// in the `ReadOnly` phase.
pub fn merge_kmer_sets(
    workers: &Workers,
    table: &mut KmerTable,
    prev_contigs: &[Contig],
    k: usize,
) -> MergeStats {
    let before = table.len();
    table.begin_phase(Phase::UpdateOnly).expect("flushed");
    let nworkers = workers.count();
    let sent: usize = workers
        .run(|w| {
            let mut u = table.updater(merge_contig_kmer).expect("update phase");
            let mut n = 0;
            for c in prev_contigs.iter().skip(w).step_by(nworkers) {
                if c.len() < k {
                    continue;
                }
                let count = c.depth.round().max(1.0) as u32;
                let read = MaskedSeq::unmasked(c.seq.clone());
                for occ in extract_kmers(&read, k) {
                    u.batched_update(
                        occ.kmer,
                        ContigKmer {
                            left: Ext::from_option(occ.left),
                            right: Ext::from_option(occ.right),
                            count,
                        },
                    );
                    n += 1;
                }
            }
            u.finish();
            n
        })
        .into_iter()
        .sum();
    table.begin_phase(Phase::LocalOnly).expect("flushed");
    let conflicts: usize = workers
        .run(|w| {
            let lt = table.local_table(w).expect("local phase");
            let mut n = 0;
            lt.for_each_owned(|_, shard| {
                for rec in shard.table.values() {
                    if rec.from_reads && rec.from_prev_contigs {
                        let clash = |hq: Ext, c: Ext| {
                            matches!((hq, c), (Ext::Base(a), Ext::Base(b)) if a != b)
                                || (hq == Ext::Fork && matches!(c, Ext::Base(_)))
                        };
                        if clash(rec.hq_left, rec.contig_left)
                            || clash(rec.hq_right, rec.contig_right)
                        {
                            n += 1;
                        }
                    }
                }
            });
            n
        })
        .into_iter()
        .sum();
    if conflicts > 0 {
        log::info!("{conflicts} contig-derived k-mers disagree with read-derived extension codes; read codes kept");
    }
    table.begin_phase(Phase::ReadOnly).expect("flushed");
    MergeStats {
        contig_kmers: sent,
        added: table.len() - before,
        conflicts,
    }
}

/// TSV dump: k-mer, count, 4 left tallies, 4 right tallies, left/right codes.
pub fn dump_kmer_tsv<W: Write>(table: &KmerTable, k: usize, w: &mut W) -> io::Result<()> {
    table.dump_tsv(w, |km, r| {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            km.to_string(k),
            r.count,
            r.left[0],
            r.left[1],
            r.left[2],
            r.left[3],
            r.right[0],
            r.right[1],
            r.right[2],
            r.right[3],
            r.hq_left,
            r.hq_right
        )
    })
}

/// Splits reads into `n` contiguous blocks.
pub fn split_blocks(reads: Vec<ReadPair>, n: usize) -> Vec<Vec<ReadPair>> {
    let n = n.max(1);
    let len = reads.len();
    let mut out: Vec<Vec<ReadPair>> = (0..n).map(|_| Vec::new()).collect();
    for (i, r) in reads.into_iter().enumerate() {
        out[(i * n) / len.max(1)].push(r);
    }
    out
}
