//! De Bruijn graph traversal: contigs are maximal paths of k-mers whose
//! extensions are unique and high quality in both directions.
//!
//! Workers seed walks from their own shards in ascending k-mer order and
//! claim k-mers with a compare-and-swap on a separate used-flag table. Two
//! walks that meet on the same path both abort and mark what they claimed as
//! aborted; a single-worker sweep re-walks those paths at the end.

use std::collections::HashSet;

use crate::contig::{renumber, Contig};
use crate::kmer::Kmer;
use crate::kmercount::{Ext, KmerParams, KmerRecord, KmerTable};
use crate::seqio::PackedSeq;
use crate::shardstore::{AtomicOp, AtomicOutcome, Phase, ShardedMap};
use crate::workers::Workers;

const ABORTED: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    Base(u8),
    Fork,
    DeadEnd,
}

/// Contradiction budget for a k-mer of depth `d_kmer`.
pub fn adaptive_threshold(d_kmer: f64, t_base: f64, e: f64) -> f64 {
    t_base.max(e * d_kmer)
}

pub fn can_extend(record: &KmerRecord, side: Side, t_base: f64, e: f64) -> Extension {
    let (tally, contig_code) = match side {
        Side::Left => (&record.left, record.contig_left),
        Side::Right => (&record.right, record.contig_right),
    };
    let total: u32 = tally.iter().sum();
    if record.from_prev_contigs && total == 0 {
        return match contig_code {
            Ext::Base(b) => Extension::Base(b),
            Ext::Fork => Extension::Fork,
            Ext::None => Extension::DeadEnd,
        };
    }
    let m = *tally.iter().max().unwrap();
    if m == 0 {
        return Extension::DeadEnd;
    }
    let c = total - m;
    let unique = tally.iter().filter(|&&t| t == m).count() == 1;
    if unique && c as f64 <= adaptive_threshold(record.count as f64, t_base, e) {
        Extension::Base(tally.iter().position(|&t| t == m).unwrap() as u8)
    } else {
        Extension::Fork
    }
}

/// Record of `x` as read in `x`'s own orientation.
pub fn oriented_record(table: &KmerTable, x: Kmer, k: usize) -> Option<KmerRecord> {
    let (c, flipped) = x.canonical(k);
    let rec = table.get(&c).expect("readable k-mer table")?;
    Some(if flipped { rec.flipped() } else { rec })
}

/// Next k-mer to the right of `x` if the step is unique in both directions.
pub fn step_right(
    table: &KmerTable,
    x: Kmer,
    rec: &KmerRecord,
    params: &KmerParams,
) -> Option<(Kmer, KmerRecord)> {
    let k = params.k;
    let Extension::Base(b) = can_extend(rec, Side::Right, params.t_base, params.e) else {
        return None;
    };
    let y = x.push_right(b, k);
    let ry = oriented_record(table, y, k)?;
    (can_extend(&ry, Side::Left, params.t_base, params.e) == Extension::Base(x.first(k)))
        .then_some((y, ry))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub walks: usize,
    pub aborted_walks: usize,
    pub sweep_walks: usize,
    pub claimed_kmers: usize,
}

/// `Ok((claimed, count sum, closed cycle))` or `Err((claimed prefix, count sum))`.
type WalkResult = Result<(Vec<Kmer>, u64, bool), (Vec<Kmer>, u64)>;

enum Claim {
    Ours,
    Mine,
    Collision,
}

struct Walker<'a> {
    table: &'a KmerTable,
    used: &'a ShardedMap<Kmer, u64>,
    params: &'a KmerParams,
    sweep: bool,
}

struct Walk {
    kmers: Vec<Kmer>,
    counts: u64,
    cycle: bool,
}

impl Walker<'_> {
    fn claim(&self, x: Kmer, id: u64) -> Claim {
        let c = x.canonical(self.params.k).0;
        let cas = |expected| {
            self.used
                .atomic_rw(c, AtomicOp::CompareAndSwap { expected, new: id })
                .expect("used-flag table in read-write phase")
        };
        match cas(None) {
            AtomicOutcome::Applied(_) => Claim::Ours,
            AtomicOutcome::Rejected(cur) if cur == id => Claim::Mine,
            AtomicOutcome::Rejected(ABORTED) if self.sweep => match cas(Some(ABORTED)) {
                AtomicOutcome::Applied(_) => Claim::Ours,
                _ => Claim::Collision,
            },
            _ => Claim::Collision,
        }
    }

    fn release(&self, kmers: &[Kmer], id: u64) {
        for &x in kmers {
            let c = x.canonical(self.params.k).0;
            let _ = self.used.atomic_rw(
                c,
                AtomicOp::CompareAndSwap {
                    expected: Some(id),
                    new: ABORTED,
                },
            );
        }
    }

    /// Extends right from `start`, claiming as it goes. Returns the claimed
    /// k-mers (excluding `start`) and whether the walk closed a cycle, or
    /// `Err` with the claimed prefix on collision.
    fn extend(&self, start: Kmer, rec: KmerRecord, id: u64) -> WalkResult {
        let k = self.params.k;
        let (mut x, mut rx) = (start, rec);
        let (mut path, mut counts) = (Vec::new(), 0u64);
        while let Some((y, ry)) = step_right(self.table, x, &rx, self.params) {
            match self.claim(y, id) {
                Claim::Ours => {}
                Claim::Mine => return Ok((path, counts, y == start)),
                Claim::Collision => return Err((path, counts)),
            }
            debug_assert!(y.canonical(k).0 != start.canonical(k).0 || y == start);
            path.push(y);
            counts += ry.count as u64;
            x = y;
            rx = ry;
        }
        Ok((path, counts, false))
    }

    /// Walks both ways from a claimed seed.
    fn walk(&self, seed: Kmer, id: u64) -> Result<Walk, ()> {
        let k = self.params.k;
        let rec = oriented_record(self.table, seed, k).expect("seed in table");
        let (right, rc_, cycle) = match self.extend(seed, rec.clone(), id) {
            Ok(r) => r,
            Err((claimed, _)) => {
                self.release(&claimed, id);
                self.release(&[seed], id);
                return Err(());
            }
        };
        let mut counts = rec.count as u64 + rc_;
        let mut kmers: Vec<Kmer> = Vec::new();
        if !cycle {
            let rs = seed.revcomp(k);
            match self.extend(rs, rec.flipped(), id) {
                Ok((left, lc, _)) => {
                    counts += lc;
                    kmers.extend(left.iter().rev().map(|x| x.revcomp(k)));
                }
                Err((left, _)) => {
                    self.release(&right, id);
                    self.release(&left, id);
                    self.release(&[seed], id);
                    return Err(());
                }
            }
        }
        kmers.push(seed);
        kmers.extend(right);
        Ok(Walk {
            kmers,
            counts,
            cycle,
        })
    }
}

fn spell(kmers: &[Kmer], k: usize) -> PackedSeq {
    let mut seq = PackedSeq::from_codes(&kmers[0].codes(k));
    for x in &kmers[1..] {
        seq.push(x.last());
    }
    seq
}

/// Orientation whose first k-mer is smaller; cycles are also rotated to start
/// at their smallest oriented k-mer.
fn canonical_walk(mut kmers: Vec<Kmer>, cycle: bool, k: usize) -> Vec<Kmer> {
    let rc_walk = |v: &[Kmer]| -> Vec<Kmer> { v.iter().rev().map(|x| x.revcomp(k)).collect() };
    if cycle {
        let rc = rc_walk(&kmers);
        let (fi, fmin) = kmers
            .iter()
            .enumerate()
            .min_by_key(|(_, x)| **x)
            .map(|(i, x)| (i, *x))
            .unwrap();
        let (ri, rmin) = rc
            .iter()
            .enumerate()
            .min_by_key(|(_, x)| **x)
            .map(|(i, x)| (i, *x))
            .unwrap();
        let (mut v, i) = if rmin < fmin { (rc, ri) } else { (kmers, fi) };
        v.rotate_left(i);
        return v;
    }
    let first = kmers[0];
    let last_rc = kmers[kmers.len() - 1].revcomp(k);
    if last_rc < first {
        kmers = rc_walk(&kmers);
    }
    kmers
}

/// Builds contigs from a `ReadOnly` k-mer table.
pub fn traverse(
    workers: &Workers,
    table: &KmerTable,
    params: &KmerParams,
) -> (Vec<Contig>, TraversalStats) {
    let k = params.k;
    let nw = workers.count();
    let mut used: ShardedMap<Kmer, u64> = ShardedMap::new(nw, table.shard_count());
    used.begin_phase(Phase::ReadWrite).expect("empty map");

    let per_worker = workers.run(|w| {
        let walker = Walker {
            table,
            used: &used,
            params,
            sweep: false,
        };
        let mut seeds: Vec<Kmer> = Vec::new();
        for s in table.owned_shards(w) {
            seeds.extend(table.shard_read(s).table.keys().copied());
        }
        seeds.sort_unstable();
        let mut out = Vec::new();
        let (mut walks, mut aborted) = (0, 0);
        for (i, seed) in seeds.into_iter().enumerate() {
            let id = ((w as u64) << 40) | i as u64;
            if !matches!(walker.claim(seed, id), Claim::Ours) {
                continue;
            }
            walks += 1;
            match walker.walk(seed, id) {
                Ok(walk) => out.push(walk),
                Err(()) => aborted += 1,
            }
        }
        (out, walks, aborted)
    });

    let mut stats = TraversalStats::default();
    let mut walks = Vec::new();
    for (out, n, a) in per_worker {
        walks.extend(out);
        stats.walks += n;
        stats.aborted_walks += a;
    }

    if stats.aborted_walks > 0 {
        let mut pending: Vec<Kmer> = Vec::new();
        for s in 0..used.shard_count() {
            pending.extend(
                used.shard_read(s)
                    .table
                    .iter()
                    .filter(|(_, &v)| v == ABORTED)
                    .map(|(k, _)| *k),
            );
        }
        pending.sort_unstable();
        let walker = Walker {
            table,
            used: &used,
            params,
            sweep: true,
        };
        let base = (nw as u64) << 40;
        for (i, seed) in pending.into_iter().enumerate() {
            let id = base + i as u64;
            if !matches!(walker.claim(seed, id), Claim::Ours) {
                continue;
            }
            stats.sweep_walks += 1;
            walks.push(walker.walk(seed, id).expect("sweep walks cannot collide"));
        }
    }

    let mut contigs: Vec<Contig> = walks
        .into_iter()
        .map(|w| {
            stats.claimed_kmers += w.kmers.len();
            let depth = w.counts as f64 / w.kmers.len() as f64;
            let kmers = canonical_walk(w.kmers, w.cycle, k);
            Contig::new(0, spell(&kmers, k), depth)
        })
        .collect();
    renumber(&mut contigs);
    (contigs, stats)
}

/// Re-checks that every internal step of `contig` is a unique, mutual
/// high-quality extension in `table`.
pub fn verify_contig(table: &KmerTable, contig: &Contig, params: &KmerParams) -> bool {
    let k = params.k;
    let kmers: Vec<Kmer> = (0..contig.kmer_count(k))
        .map(|i| crate::kmer::kmer_at(&contig.seq, i, k))
        .collect();
    let mut seen = HashSet::new();
    for w in kmers.windows(2) {
        let Some(rx) = oriented_record(table, w[0], k) else {
            return false;
        };
        match step_right(table, w[0], &rx, params) {
            Some((y, _)) if y == w[1] => {}
            _ => return false,
        }
        if !seen.insert(w[0].canonical(k).0) {
            return false;
        }
    }
    kmers
        .last()
        .is_some_and(|x| table.get(&x.canonical(k).0).ok().flatten().is_some())
}
