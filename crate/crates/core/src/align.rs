//! Seed-and-extend alignment of reads to contigs, and relocation of read
//! pairs to the worker that owns their contig.
//!
//! Contigs are addressed by their position in the slice the index was built
//! from; the pipeline keeps contig ids equal to positions.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::Arc;

use crate::contig::Contig;
use crate::kmer::{windows, Kmer};
use crate::seqio::{MaskedSeq, PackedSeq, ReadPair};
use crate::shardstore::{Phase, ShardedMap, SoftCache, DEFAULT_CACHE_CAPACITY};
use crate::workers::Workers;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strand {
    Plus,
    Minus,
}

impl Strand {
    pub fn as_char(self) -> char {
        match self {
            Strand::Plus => '+',
            Strand::Minus => '-',
        }
    }

    pub fn flip(self) -> Strand {
        match self {
            Strand::Plus => Strand::Minus,
            Strand::Minus => Strand::Plus,
        }
    }
}

/// One occurrence of a seed in a contig. `strand` is `Minus` when the
/// canonical seed is the reverse complement of the contig window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Posting {
    pub contig: u32,
    pub offset: u32,
    pub strand: Strand,
}

pub type SeedCache = SoftCache<Kmer, Arc<[Posting]>>;

pub struct SeedIndex {
    pub seed_len: usize,
    map: ShardedMap<Kmer, Arc<[Posting]>>,
    contigs: Arc<[PackedSeq]>,
}

impl SeedIndex {
    /// Indexes every `seed_len` window of every contig. Contigs shorter
    /// than `seed_len` are not indexed.
    pub fn build(workers: &Workers, contigs: &[Contig], seed_len: usize) -> Self {
        let nw = workers.count();
        let mut map: ShardedMap<Kmer, Vec<Posting>> = ShardedMap::new(nw, 4 * nw);
        workers.run(|w| {
            let mut u = map
                .updater(|shard, key, p: Posting| shard.table.entry(key).or_default().push(p))
                .expect("update phase");
            for (i, c) in contigs.iter().enumerate().skip(w).step_by(nw) {
                if c.len() < seed_len {
                    continue;
                }
                let masked = MaskedSeq::unmasked(c.seq.clone());
                for (pos, _, (canon, flipped)) in windows(&masked, seed_len) {
                    let strand = if flipped { Strand::Minus } else { Strand::Plus };
                    u.batched_update(
                        canon,
                        Posting {
                            contig: i as u32,
                            offset: pos as u32,
                            strand,
                        },
                    );
                }
            }
            u.finish();
        });
        map.begin_phase(Phase::ReadOnly).expect("flushed");
        let map = map.map_values(|mut v| {
            v.sort_unstable();
            Arc::from(v)
        });
        SeedIndex {
            seed_len,
            map,
            contigs: contigs.iter().map(|c| c.seq.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn postings(&self) -> Vec<(Kmer, Arc<[Posting]>)> {
        self.map.to_sorted_vec()
    }

    pub fn lookup(&self, cache: &mut SeedCache, seed: &Kmer) -> Option<Arc<[Posting]>> {
        self.map.cached_get(cache, seed).expect("sealed index")
    }

    pub fn contig_seq(&self, contig: u32) -> &PackedSeq {
        &self.contigs[contig as usize]
    }

    pub fn contig_count(&self) -> usize {
        self.contigs.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlignFlags {
    pub reaches_contig_start: bool,
    pub reaches_contig_end: bool,
    pub read_fully_aligned: bool,
}

/// Ungapped alignment of a read interval to a contig interval. Read
/// coordinates refer to the read as sequenced; for `Minus` the reverse
/// complement of `read[read_start..read_end]` matches the contig interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlignmentRecord {
    pub read_id: u64,
    pub mate: u8,
    pub contig: u32,
    pub read_start: u32,
    pub read_end: u32,
    pub contig_start: u32,
    pub contig_end: u32,
    pub strand: Strand,
    pub mismatches: u32,
    pub read_len: u32,
    pub contig_len: u32,
    pub flags: AlignFlags,
}

impl AlignmentRecord {
    pub fn aligned_len(&self) -> u32 {
        self.read_end - self.read_start
    }

    pub fn score(&self) -> i64 {
        self.aligned_len() as i64 - 3 * self.mismatches as i64
    }

    /// Contig coordinate where the read's first base would sit if the
    /// alignment were extended over the clipped read ends (for `Minus`, the
    /// read's first base lies at the right).
    pub fn projected_read_start(&self) -> i64 {
        match self.strand {
            Strand::Plus => self.contig_start as i64 - self.read_start as i64,
            Strand::Minus => self.contig_end as i64 + self.read_start as i64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlignParams {
    pub seed_len: usize,
    pub mismatch_rate: f64,
    pub min_seed_hits: usize,
    pub cache_capacity: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            seed_len: 21,
            mismatch_rate: 0.04,
            min_seed_hits: 1,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

fn base_at(read: &MaskedSeq, i: usize) -> Option<u8> {
    (!read.n_mask.contains(i)).then(|| read.seq.get(i))
}

/// Alignments of one read. A record is dropped when a record scoring more
/// than one mismatch better covers most of the same read interval.
pub fn align_read(
    read_id: u64,
    mate: u8,
    read: &MaskedSeq,
    index: &SeedIndex,
    cache: &mut SeedCache,
    params: &AlignParams,
) -> Vec<AlignmentRecord> {
    let s = index.seed_len;
    let len = read.len();
    if len < s {
        return Vec::new();
    }
    let stride = (s / 2).max(1);
    let mut starts: Vec<usize> = (0..=len - s).step_by(stride).collect();
    if *starts.last().unwrap() != len - s {
        starts.push(len - s);
    }
    let wanted: std::collections::HashSet<usize> = starts.into_iter().collect();

    // (contig, strand, diagonal) -> (hits, first seed position in oriented read)
    let mut groups: BTreeMap<(u32, Strand, i64), (usize, usize)> = BTreeMap::new();
    for (pos, _, (canon, flipped)) in windows(read, s) {
        if !wanted.contains(&pos) {
            continue;
        }
        let Some(postings) = index.lookup(cache, &canon) else {
            continue;
        };
        for p in postings.iter() {
            let plus = (p.strand == Strand::Minus) == flipped;
            let (strand, rpos) = if plus {
                (Strand::Plus, pos)
            } else {
                (Strand::Minus, len - s - pos)
            };
            let diag = p.offset as i64 - rpos as i64;
            let g = groups.entry((p.contig, strand, diag)).or_insert((0, rpos));
            g.0 += 1;
            g.1 = g.1.min(rpos);
        }
    }

    let budget = (params.mismatch_rate * len as f64).ceil() as u32;
    let rc = read.revcomp();
    let mut out: Vec<AlignmentRecord> = Vec::new();
    for ((contig, strand, diag), (hits, rpos)) in groups {
        if hits < params.min_seed_hits {
            continue;
        }
        let oriented = if strand == Strand::Plus { read } else { &rc };
        let cseq = index.contig_seq(contig);
        let clen = cseq.len() as i64;
        let lo = 0.max(-diag) as usize;
        let hi = (len as i64).min(clen - diag) as usize;
        let matches = |p: usize| base_at(oriented, p) == Some(cseq.get((p as i64 + diag) as usize));
        let mut mm = 0u32;
        let mut end = rpos + s;
        while end < hi {
            if !matches(end) {
                if mm + 1 > budget {
                    break;
                }
                mm += 1;
            }
            end += 1;
        }
        let mut start = rpos;
        while start > lo {
            if !matches(start - 1) {
                if mm + 1 > budget {
                    break;
                }
                mm += 1;
            }
            start -= 1;
        }
        let (cs, ce) = ((start as i64 + diag) as u32, (end as i64 + diag) as u32);
        let (rs, re) = match strand {
            Strand::Plus => (start, end),
            Strand::Minus => (len - end, len - start),
        };
        out.push(AlignmentRecord {
            read_id,
            mate,
            contig,
            read_start: rs as u32,
            read_end: re as u32,
            contig_start: cs,
            contig_end: ce,
            strand,
            mismatches: mm,
            read_len: len as u32,
            contig_len: clen as u32,
            flags: AlignFlags {
                reaches_contig_start: cs == 0,
                reaches_contig_end: ce as i64 == clen,
                read_fully_aligned: end - start == len,
            },
        });
    }
    // keep records within one mismatch of the best record covering the
    // same part of the read; records on disjoint parts (a read split across
    // two contigs) do not compete
    let keep: Vec<bool> = out
        .iter()
        .map(|r| {
            !out.iter().any(|b| {
                let ov = r.read_end.min(b.read_end) as i64 - r.read_start.max(b.read_start) as i64;
                b.score() > r.score() + 3 && 2 * ov > r.aligned_len() as i64
            })
        })
        .collect();
    let mut out: Vec<AlignmentRecord> = out
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Alignments of a batch, sorted by read id, with per-worker cache hit rates.
pub struct AlignmentSet {
    pub records: Vec<AlignmentRecord>,
    pub hit_rates: Vec<f64>,
}

impl AlignmentSet {
    pub fn mean_hit_rate(&self) -> f64 {
        if self.hit_rates.is_empty() {
            0.0
        } else {
            self.hit_rates.iter().sum::<f64>() / self.hit_rates.len() as f64
        }
    }

    /// TSV: read_id, mate, contig, read interval, contig interval, strand,
    /// mismatches, flags (S = contig start, E = contig end, F = full read).
    pub fn dump_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for r in &self.records {
            let mut flags = String::new();
            if r.flags.reaches_contig_start {
                flags.push('S');
            }
            if r.flags.reaches_contig_end {
                flags.push('E');
            }
            if r.flags.read_fully_aligned {
                flags.push('F');
            }
            if flags.is_empty() {
                flags.push('-');
            }
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.read_id,
                r.mate,
                r.contig,
                r.read_start,
                r.read_end,
                r.contig_start,
                r.contig_end,
                r.strand.as_char(),
                r.mismatches,
                flags
            )?;
        }
        Ok(())
    }

    /// Records grouped per read id (both mates).
    pub fn by_read(&self) -> BTreeMap<u64, Vec<AlignmentRecord>> {
        let mut m: BTreeMap<u64, Vec<AlignmentRecord>> = BTreeMap::new();
        for r in &self.records {
            m.entry(r.read_id).or_default().push(*r);
        }
        m
    }
}

/// Aligns both mates of every pair; worker `w` handles `blocks[w]` with its
/// own cache.
pub fn align_reads(
    workers: &Workers,
    blocks: &[Vec<ReadPair>],
    index: &SeedIndex,
    params: &AlignParams,
) -> AlignmentSet {
    let per_worker = workers.run(|w| {
        let mut cache = SeedCache::new(params.cache_capacity);
        let mut out = Vec::new();
        for pair in blocks.get(w).into_iter().flatten() {
            out.extend(align_read(pair.id, 1, &pair.r1, index, &mut cache, params));
            out.extend(align_read(pair.id, 2, &pair.r2, index, &mut cache, params));
        }
        (out, cache.hit_rate())
    });
    let mut records = Vec::new();
    let mut hit_rates = Vec::new();
    for (r, h) in per_worker {
        records.extend(r);
        hit_rates.push(h);
    }
    records.sort_unstable();
    AlignmentSet { records, hit_rates }
}

/// Contig of the best alignment of a pair: highest score, mate 1 on ties,
/// then the smaller contig id.
pub fn best_contig(records: &[AlignmentRecord]) -> Option<u32> {
    records
        .iter()
        .max_by_key(|r| (r.score(), Reverse(r.mate), Reverse(r.contig)))
        .map(|r| r.contig)
}

/// Moves each aligned pair to worker `contig mod P`; unaligned pairs stay.
pub fn localize_reads(
    blocks: Vec<Vec<ReadPair>>,
    alignments: &AlignmentSet,
    workers: usize,
) -> Vec<Vec<ReadPair>> {
    let by_read = alignments.by_read();
    let mut out: Vec<Vec<ReadPair>> = (0..workers).map(|_| Vec::new()).collect();
    for (w, block) in blocks.into_iter().enumerate() {
        for pair in block {
            let dest = by_read
                .get(&pair.id)
                .and_then(|r| best_contig(r))
                .map_or(w % workers, |c| c as usize % workers);
            out[dest].push(pair);
        }
    }
    for b in out.iter_mut() {
        b.sort_unstable_by_key(|p| p.id);
    }
    out
}

/// Mismatches between the two intervals of a record, recounted base by base.
pub fn recount_mismatches(read: &MaskedSeq, contig: &PackedSeq, r: &AlignmentRecord) -> u32 {
    let sub = MaskedSeq {
        seq: read.seq.subseq(r.read_start as usize, r.read_end as usize),
        n_mask: crate::seqio::NMask::from_positions(
            read.n_mask
                .positions()
                .iter()
                .filter(|&&p| p >= r.read_start && p < r.read_end)
                .map(|&p| p - r.read_start)
                .collect(),
        ),
    };
    let sub = if r.strand == Strand::Minus {
        sub.revcomp()
    } else {
        sub
    };
    (0..sub.len())
        .filter(|&i| base_at(&sub, i) != Some(contig.get(r.contig_start as usize + i)))
        .count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::encode;

    const CONTIG: &str = "GATTACAGGCTTACCGATAGCTTAGGCATCGATCGGATCCTAGGCTAAGCT";

    fn index(k: usize) -> (SeedIndex, Workers) {
        let w = Workers::new(2);
        let c = Contig::new(0, PackedSeq::from_acgt(CONTIG), 5.0);
        (SeedIndex::build(&w, &[c], k), w)
    }

    #[test]
    fn posting_counts() {
        let (idx, _) = index(11);
        let n: usize = idx.postings().iter().map(|(_, p)| p.len()).sum();
        assert_eq!(n, CONTIG.len() - 11 + 1);
        for (seed, ps) in idx.postings() {
            for p in ps.iter() {
                let w = crate::kmer::kmer_at(idx.contig_seq(p.contig), p.offset as usize, 11);
                let w = if p.strand == Strand::Minus {
                    w.revcomp(11)
                } else {
                    w
                };
                assert_eq!(w, seed);
            }
        }
    }

    #[test]
    fn exact_substring_both_strands() {
        let (idx, _) = index(11);
        let mut cache = SeedCache::new(64);
        let read = encode(&CONTIG[5..35]).unwrap();
        let r = align_read(1, 1, &read, &idx, &mut cache, &AlignParams::default());
        assert_eq!(r.len(), 1);
        assert_eq!(
            (r[0].contig_start, r[0].contig_end, r[0].mismatches),
            (5, 35, 0)
        );
        assert!(r[0].flags.read_fully_aligned);

        let rc = read.revcomp();
        let r = align_read(1, 1, &rc, &idx, &mut cache, &AlignParams::default());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].strand, Strand::Minus);
        assert_eq!(
            (
                r[0].contig_start,
                r[0].contig_end,
                r[0].read_start,
                r[0].read_end
            ),
            (5, 35, 0, 30)
        );
        assert_eq!(recount_mismatches(&rc, idx.contig_seq(0), &r[0]), 0);
    }

    #[test]
    fn overhang_reaches_end() {
        let (idx, _) = index(11);
        let mut cache = SeedCache::new(64);
        let text = format!("{}TTTTT", &CONTIG[CONTIG.len() - 25..]);
        let r = align_read(
            1,
            1,
            &encode(&text).unwrap(),
            &idx,
            &mut cache,
            &AlignParams::default(),
        );
        assert_eq!(r.len(), 1);
        assert!(r[0].flags.reaches_contig_end && !r[0].flags.read_fully_aligned);
        assert_eq!(r[0].contig_end as usize, CONTIG.len());
        assert_eq!((r[0].read_start, r[0].read_end), (0, 25));
    }

    #[test]
    fn no_hits() {
        let (idx, _) = index(11);
        let mut cache = SeedCache::new(64);
        let r = align_read(
            1,
            1,
            &encode("CCCCCCCCCCCCCCCCCCCCCC").unwrap(),
            &idx,
            &mut cache,
            &AlignParams::default(),
        );
        assert!(r.is_empty());
    }

    #[test]
    fn localization_rule() {
        let pair = |id| ReadPair {
            id,
            r1: encode("ACGT").unwrap(),
            r2: encode("ACGT").unwrap(),
            library_id: 0,
        };
        let rec = AlignmentRecord {
            read_id: 0,
            mate: 1,
            contig: 7,
            read_start: 0,
            read_end: 4,
            contig_start: 0,
            contig_end: 4,
            strand: Strand::Plus,
            mismatches: 0,
            read_len: 4,
            contig_len: 10,
            flags: AlignFlags::default(),
        };
        let set = AlignmentSet {
            records: vec![rec],
            hit_rates: vec![],
        };
        let out = localize_reads(vec![vec![pair(0)], vec![], vec![pair(5)], vec![]], &set, 4);
        assert_eq!(out[3].len(), 1);
        assert_eq!(out[3][0].id, 0);
        assert_eq!(out[2][0].id, 5);
    }
}
