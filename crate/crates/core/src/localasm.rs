//! Local assembly: gather the reads relevant to each contig and extend the
//! contig ends by mer-walking with an adaptive mer size.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::align::{AlignmentSet, Strand};
use crate::contig::Contig;
use crate::seqio::{revcomp_codes, MaskedSeq, PackedSeq, ReadLibrary, ReadPair};
use crate::workers::Workers;

/// Reads gathered for one contig, each at most once.
#[derive(Clone, Debug, Default)]
pub struct ContigReadSet {
    pub contig: u32,
    /// `(read id, mate)` with the read sequence.
    pub reads: Vec<((u64, u8), MaskedSeq)>,
}

impl ContigReadSet {
    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &MaskedSeq> {
        self.reads.iter().map(|(_, s)| s)
    }
}

/// Per contig, the aligned reads whose mate is not aligned to the same
/// contig, plus unaligned mates whose insert-size projection from an
/// aligned read lands beyond a contig end, at most
/// `insert_size_mean + 3·insert_size_sd` from it.
pub fn gather_reads(
    contigs: &[Contig],
    alignments: &AlignmentSet,
    pairs: &[ReadPair],
    library: &ReadLibrary,
) -> Vec<ContigReadSet> {
    let reach = library.insert_size_mean + 3.0 * library.insert_size_sd;
    let by_read = alignments.by_read();
    let mut sets: Vec<BTreeMap<(u64, u8), MaskedSeq>> = vec![BTreeMap::new(); contigs.len()];
    for pair in pairs {
        let Some(recs) = by_read.get(&pair.id) else {
            continue;
        };
        let on = |mate: u8| -> HashSet<u32> {
            recs.iter()
                .filter(|r| r.mate == mate)
                .map(|r| r.contig)
                .collect()
        };
        let (c1, c2) = (on(1), on(2));
        for r in recs {
            let (own, other) = if r.mate == 1 { (&c1, &c2) } else { (&c2, &c1) };
            debug_assert!(own.contains(&r.contig));
            let c = r.contig as usize;
            if c >= contigs.len() || other.contains(&r.contig) {
                continue;
            }
            sets[c].insert((pair.id, r.mate), pair.mate(r.mate).clone());
            if !other.is_empty() {
                continue;
            }
            // innie pair: the mate lies downstream of this read's 5' end
            let proj = r.projected_read_start() as f64;
            let beyond = match r.strand {
                Strand::Plus => r.contig_len as f64 - proj,
                Strand::Minus => proj,
            };
            if beyond < reach {
                let m = 3 - r.mate;
                sets[c].insert((pair.id, m), pair.mate(m).clone());
            }
        }
    }
    sets.into_iter()
        .enumerate()
        .map(|(i, s)| ContigReadSet {
            contig: i as u32,
            reads: s.into_iter().collect(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WalkParams {
    pub m_init: usize,
    pub shift: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub vote_hq: u32,
    /// Hard cap on bases added to one contig end.
    pub max_extension: usize,
}

impl WalkParams {
    pub fn for_k(k: usize, read_len: usize) -> Self {
        let m_min = (k / 2).max(11);
        let m_max = read_len.saturating_sub(1).max(m_min);
        WalkParams {
            m_init: k.clamp(m_min, m_max),
            shift: 4,
            m_min,
            m_max,
            vote_hq: 2,
            max_extension: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Action {
    Start,
    Accept,
    Up,
    Down,
}

/// Next-base votes for every m-mer of a read set, both strands.
struct MerTallies<'a> {
    reads: &'a [Vec<u8>],
    by_m: HashMap<usize, HashMap<&'a [u8], [u32; 4]>>,
}

impl<'a> MerTallies<'a> {
    fn new(reads: &'a [Vec<u8>]) -> Self {
        MerTallies {
            reads,
            by_m: HashMap::new(),
        }
    }

    fn votes(&mut self, mer: &[u8]) -> [u32; 4] {
        let m = mer.len();
        let reads = self.reads;
        let table = self.by_m.entry(m).or_insert_with(|| {
            let mut t: HashMap<&[u8], [u32; 4]> = HashMap::new();
            for r in reads {
                if r.len() <= m {
                    continue;
                }
                for i in 0..r.len() - m {
                    let next = r[i + m];
                    let w = &r[i..i + m];
                    if next < 4 && w.iter().all(|&c| c < 4) {
                        t.entry(w).or_insert([0; 4])[next as usize] += 1;
                    }
                }
            }
            t
        });
        table.get(mer).copied().unwrap_or([0; 4])
    }
}

/// Codes of each read and its reverse complement; masked bases become 4.
pub fn read_codes<'a>(reads: impl Iterator<Item = &'a MaskedSeq>) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for r in reads {
        let mut codes = r.seq.to_codes();
        for &p in r.n_mask.positions() {
            codes[p as usize] = 4;
        }
        let rc: Vec<u8> = codes
            .iter()
            .rev()
            .map(|&c| if c < 4 { 3 - c } else { 4 })
            .collect();
        out.push(codes);
        out.push(rc);
    }
    out
}

/// Extends `seq` to the right by mer-walking over code vectors as produced
/// by [`read_codes`]. Returns the added bases.
pub fn walk_extension(seq: &[u8], reads: &[Vec<u8>], params: &WalkParams) -> Vec<u8> {
    walk_right(seq, &mut MerTallies::new(reads), params)
}

fn walk_right(seq: &[u8], tallies: &mut MerTallies<'_>, p: &WalkParams) -> Vec<u8> {
    let mut cur = seq.to_vec();
    let mut ext = Vec::new();
    let mut m = p.m_init;
    let mut last = Action::Start;
    let mut shifts = 0;
    let mut visited: HashSet<(Vec<u8>, usize)> = HashSet::new();
    while ext.len() < p.max_extension {
        let votes = if cur.len() >= m {
            tallies.votes(&cur[cur.len() - m..])
        } else {
            [0; 4]
        };
        let hq: Vec<usize> = (0..4).filter(|&b| votes[b] >= p.vote_hq).collect();
        let fork = hq.len() > 1;
        if hq.len() == 1 {
            // a repeated (terminal mer, m) state means the walk is cycling
            if !visited.insert((cur[cur.len() - m..].to_vec(), m)) {
                break;
            }
            cur.push(hq[0] as u8);
            ext.push(hq[0] as u8);
            last = Action::Accept;
            shifts = 0;
            continue;
        }
        shifts += 1;
        if shifts >= 2 {
            break;
        }
        if fork {
            if last == Action::Down || m + p.shift > p.m_max {
                break;
            }
            m += p.shift;
            last = Action::Up;
        } else {
            if last == Action::Up || m < p.m_min + p.shift {
                break;
            }
            m -= p.shift;
            last = Action::Down;
        }
    }
    ext
}

pub fn mer_walk(
    contig: &PackedSeq,
    reads: &ContigReadSet,
    params: &WalkParams,
    direction: Direction,
) -> Vec<u8> {
    let codes = read_codes(reads.sequences());
    let mut tallies = MerTallies::new(&codes);
    match direction {
        Direction::Right => walk_right(&contig.to_codes(), &mut tallies, params),
        Direction::Left => revcomp_codes(&walk_right(
            &revcomp_codes(&contig.to_codes()),
            &mut tallies,
            params,
        )),
    }
}

/// Extends both ends of a contig; the original sequence is kept intact in
/// the middle.
pub fn extend_contig(
    contig: &Contig,
    reads: &ContigReadSet,
    params: &WalkParams,
) -> (Contig, usize, usize) {
    let codes = read_codes(reads.sequences());
    let mut tallies = MerTallies::new(&codes);
    let c = contig.seq.to_codes();
    let right = walk_right(&c, &mut tallies, params);
    let left = revcomp_codes(&walk_right(&revcomp_codes(&c), &mut tallies, params));
    let mut seq = PackedSeq::with_capacity(left.len() + c.len() + right.len());
    seq.extend_codes(left.iter().copied());
    seq.extend_codes(c.iter().copied());
    seq.extend_codes(right.iter().copied());
    (
        Contig::new(contig.id, seq, contig.depth),
        left.len(),
        right.len(),
    )
}

#[derive(Clone, Debug, Default)]
pub struct LocalAsmStats {
    /// Blocks claimed per worker.
    pub blocks_claimed: Vec<usize>,
    pub extended_contigs: usize,
    pub added_bases: usize,
}

/// Extends every contig using its read set. Workers claim blocks of
/// `block_size` contigs from a shared counter until none are left.
pub fn run_local_assembly(
    workers: &Workers,
    contigs: &[Contig],
    read_sets: &[ContigReadSet],
    params: &WalkParams,
    block_size: usize,
) -> (Vec<Contig>, LocalAsmStats) {
    let block = block_size.max(1);
    let nblocks = contigs.len().div_ceil(block);
    let next = AtomicUsize::new(0);
    let empty = ContigReadSet::default();
    let per_worker = workers.run(|_| {
        let mut out = Vec::new();
        let mut claimed = 0;
        loop {
            let b = next.fetch_add(1, Ordering::Relaxed);
            if b >= nblocks {
                break;
            }
            claimed += 1;
            for (i, contig) in contigs.iter().enumerate().skip(b * block).take(block) {
                let reads = read_sets.get(i).unwrap_or(&empty);
                out.push((i, extend_contig(contig, reads, params)));
            }
        }
        (out, claimed)
    });
    let mut stats = LocalAsmStats::default();
    let mut slots: Vec<Option<Contig>> = vec![None; contigs.len()];
    for (out, claimed) in per_worker {
        stats.blocks_claimed.push(claimed);
        for (i, (c, l, r)) in out {
            if l + r > 0 {
                stats.extended_contigs += 1;
                stats.added_bases += l + r;
            }
            slots[i] = Some(c);
        }
    }
    (
        slots
            .into_iter()
            .map(|c| c.expect("every block claimed"))
            .collect(),
        stats,
    )
}
