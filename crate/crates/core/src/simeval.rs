//! Synthetic communities and assembly evaluation.
//!
//! The simulator draws per-genome abundances from a log-normal law and
//! samples innie read pairs with i.i.d. substitution errors. The evaluator
//! reports genome fraction over canonical k-mers, contiguity, a
//! collinear-anchor misassembly count and the fraction of reads that align
//! back to the assembly.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use thiserror::Error;

use crate::align::{align_reads, AlignParams, SeedIndex};
use crate::contig::{n50, Contig};
use crate::kmer::{windows, Kmer};
use crate::seqio::{
    read_fasta, write_fastq_record, MaskedSeq, PackedSeq, ReadLibrary, ReadPair, SeqError,
};
use crate::workers::{chunk_range, Workers};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("genome {name} ({len} bp) is shorter than the largest insert ({insert} bp)")]
    GenomeTooShort {
        name: String,
        len: usize,
        insert: usize,
    },
    #[error("no genomes in profile")]
    NoGenomes,
    #[error("abundance weights must be positive")]
    BadWeights,
    #[error("{0} abundances given for {1} genomes")]
    WeightCount(usize, usize),
    #[error(transparent)]
    Seq(#[from] SeqError),
}

/// Simulation settings as read from configuration.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Reference FASTA files; every record is one genome.
    pub references: Vec<PathBuf>,
    /// Lengths of uniformly random genomes generated from the seed, used
    /// when no references are given.
    pub genome_lengths: Vec<usize>,
    /// Explicit relative abundances, overriding the log-normal draw.
    pub abundances: Vec<f64>,
    pub mu_ln: f64,
    pub sigma_ln: f64,
    pub error_rate: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            references: Vec::new(),
            genome_lengths: vec![50_000],
            abundances: Vec::new(),
            mu_ln: 0.0,
            sigma_ln: 1.0,
            error_rate: 0.01,
            pairs: 10_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    pub name: String,
    pub seq: PackedSeq,
}

/// Genomes with their sampling weights and the read model.
#[derive(Clone, Debug)]
pub struct CommunityProfile {
    pub genomes: Vec<Genome>,
    pub weights: Vec<f64>,
    pub error_rate: f64,
    pub library: ReadLibrary,
    pub pairs: usize,
    pub seed: u64,
}

pub fn random_genome(len: usize, rng: &mut impl Rng) -> PackedSeq {
    let codes: Vec<u8> = (0..len).map(|_| rng.gen_range(0..4u8)).collect();
    PackedSeq::from_codes(&codes)
}

/// Largest insert the simulator will draw.
pub fn max_insert(library: &ReadLibrary) -> usize {
    let hi = library.insert_size_mean + 4.0 * library.insert_size_sd;
    (hi.ceil() as usize).max(2 * library.read_length)
}

fn draw_insert(library: &ReadLibrary, rng: &mut impl Rng) -> usize {
    let lo = 2 * library.read_length;
    let hi = max_insert(library);
    let x = if library.insert_size_sd > 0.0 {
        Normal::new(library.insert_size_mean, library.insert_size_sd)
            .expect("finite sd")
            .sample(rng)
    } else {
        library.insert_size_mean
    };
    (x.round().max(0.0) as usize).clamp(lo, hi)
}

impl CommunityProfile {
    /// Checks every genome against the largest insert.
    pub fn new(
        genomes: Vec<Genome>,
        weights: Vec<f64>,
        error_rate: f64,
        library: ReadLibrary,
        pairs: usize,
        seed: u64,
    ) -> Result<Self, SimError> {
        if genomes.is_empty() {
            return Err(SimError::NoGenomes);
        }
        if weights.len() != genomes.len() {
            return Err(SimError::WeightCount(weights.len(), genomes.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(SimError::BadWeights);
        }
        let insert = max_insert(&library);
        if let Some(g) = genomes.iter().find(|g| g.seq.len() < insert) {
            return Err(SimError::GenomeTooShort {
                name: g.name.clone(),
                len: g.seq.len(),
                insert,
            });
        }
        Ok(CommunityProfile {
            genomes,
            weights,
            error_rate,
            library,
            pairs,
            seed,
        })
    }

    /// Loads or generates the genomes named by `config` and draws
    /// abundances.
    pub fn from_config(config: &SimConfig, library: ReadLibrary) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut genomes = Vec::new();
        if config.references.is_empty() {
            for (i, &len) in config.genome_lengths.iter().enumerate() {
                genomes.push(Genome {
                    name: format!("genome_{i}"),
                    seq: random_genome(len, &mut rng),
                });
            }
        } else {
            for path in &config.references {
                for rec in read_fasta(path)? {
                    genomes.push(Genome {
                        name: rec.id,
                        seq: rec.seq.seq,
                    });
                }
            }
        }
        let weights = if config.abundances.is_empty() {
            let law = LogNormal::new(config.mu_ln, config.sigma_ln.max(0.0))
                .map_err(|_| SimError::BadWeights)?;
            (0..genomes.len()).map(|_| law.sample(&mut rng)).collect()
        } else {
            config.abundances.clone()
        };
        Self::new(
            genomes,
            weights,
            config.error_rate,
            library,
            config.pairs,
            config.seed,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthRecord {
    pub read_id: u64,
    pub genome: usize,
    /// Fragment start on the genome.
    pub position: usize,
    /// Fragment length.
    pub insert: usize,
    /// `false` when mate 1 was read from the reverse strand.
    pub forward: bool,
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub pairs: Vec<ReadPair>,
    pub truth: Vec<TruthRecord>,
}

fn mutate(codes: &mut [u8], rate: f64, rng: &mut impl Rng) {
    if rate <= 0.0 {
        return;
    }
    for c in codes {
        if rng.gen::<f64>() < rate {
            *c = (*c + rng.gen_range(1..4u8)) % 4;
        }
    }
}

/// Pair `id` in isolation; each pair has its own random stream so the
/// output does not depend on how pairs are split across workers.
pub fn simulate_pair(
    profile: &CommunityProfile,
    chooser: &WeightedIndex<f64>,
    id: u64,
) -> (ReadPair, TruthRecord) {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(id + 1);
    let genome = chooser.sample(&mut rng);
    let g = &profile.genomes[genome].seq;
    let insert = draw_insert(&profile.library, &mut rng).min(g.len());
    let position = rng.gen_range(0..=g.len() - insert);
    let forward = rng.gen::<bool>();
    let rl = profile.library.read_length.min(insert);
    let left = g.codes_range(position, position + rl);
    let right: Vec<u8> =
        crate::seqio::revcomp_codes(&g.codes_range(position + insert - rl, position + insert));
    let (mut a, mut b) = if forward {
        (left, right)
    } else {
        (right, left)
    };
    mutate(&mut a, profile.error_rate, &mut rng);
    mutate(&mut b, profile.error_rate, &mut rng);
    let pair = ReadPair {
        id,
        r1: MaskedSeq::unmasked(PackedSeq::from_codes(&a)),
        r2: MaskedSeq::unmasked(PackedSeq::from_codes(&b)),
        library_id: 0,
    };
    let truth = TruthRecord {
        read_id: id,
        genome,
        position,
        insert,
        forward,
    };
    (pair, truth)
}

pub fn simulate_reads(workers: &Workers, profile: &CommunityProfile) -> SimOutput {
    let chooser = WeightedIndex::new(&profile.weights).expect("validated weights");
    let n = profile.pairs;
    let parts = workers.run(|w| {
        chunk_range(n, workers.count(), w)
            .map(|i| simulate_pair(profile, &chooser, i as u64))
            .collect::<Vec<_>>()
    });
    let (pairs, truth) = parts.into_iter().flatten().unzip();
    SimOutput { pairs, truth }
}

pub fn write_reads<W: Write>(pairs: &[ReadPair], r1: &mut W, r2: &mut W) -> io::Result<()> {
    for p in pairs {
        write_fastq_record(r1, &format!("read{}/1", p.id), &p.r1)?;
        write_fastq_record(r2, &format!("read{}/2", p.id), &p.r2)?;
    }
    Ok(())
}

/// Truth TSV: read id, genome name, fragment start, insert, strand.
pub fn write_truth<W: Write>(
    truth: &[TruthRecord],
    genomes: &[Genome],
    w: &mut W,
) -> io::Result<()> {
    writeln!(w, "read_id\tgenome\tposition\tinsert\tstrand")?;
    for t in truth {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            t.read_id,
            genomes[t.genome].name,
            t.position,
            t.insert,
            if t.forward { '+' } else { '-' }
        )?;
    }
    Ok(())
}

/// Distinct canonical k-mers of `seqs`, skipping windows that touch an N.
pub fn kmer_set<'a>(seqs: impl IntoIterator<Item = &'a MaskedSeq>, k: usize) -> HashSet<Kmer> {
    let mut set = HashSet::new();
    for s in seqs {
        set.extend(windows(s, k).map(|(_, _, (c, _))| c));
    }
    set
}

/// Percentage of each reference's distinct canonical k-mers found in the
/// assembly.
pub fn genome_fraction(assembly: &[MaskedSeq], references: &[PackedSeq], k: usize) -> Vec<f64> {
    let asm = kmer_set(assembly, k);
    references
        .iter()
        .map(|r| {
            let m = MaskedSeq::unmasked(r.clone());
            let own = kmer_set(std::iter::once(&m), k);
            if own.is_empty() {
                return 0.0;
            }
            100.0 * own.iter().filter(|x| asm.contains(x)).count() as f64 / own.len() as f64
        })
        .collect()
}

/// Genome fraction over all references together.
pub fn aggregate_fraction(assembly: &[MaskedSeq], references: &[PackedSeq], k: usize) -> f64 {
    let asm = kmer_set(assembly, k);
    let refs: Vec<MaskedSeq> = references
        .iter()
        .map(|r| MaskedSeq::unmasked(r.clone()))
        .collect();
    let all = kmer_set(&refs, k);
    if all.is_empty() {
        return 0.0;
    }
    100.0 * all.iter().filter(|x| asm.contains(x)).count() as f64 / all.len() as f64
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Contiguity {
    pub count: usize,
    pub total: usize,
    pub ge_5k: usize,
    pub ge_25k: usize,
    pub ge_50k: usize,
    pub largest: usize,
    pub n50: usize,
    /// N50 computed against the total reference length (0 when the
    /// assembly covers less than half of it).
    pub ng50: usize,
}

pub fn contiguity(lengths: &[usize], reference_total: usize) -> Contiguity {
    let sum_ge = |t: usize| lengths.iter().filter(|&&l| l >= t).sum();
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut acc = 0;
    let mut ng50 = 0;
    for &l in &sorted {
        acc += l;
        if reference_total > 0 && 2 * acc >= reference_total {
            ng50 = l;
            break;
        }
    }
    Contiguity {
        count: lengths.len(),
        total: lengths.iter().sum(),
        ge_5k: sum_ge(5_000),
        ge_25k: sum_ge(25_000),
        ge_50k: sum_ge(50_000),
        largest: sorted.first().copied().unwrap_or(0),
        n50: n50(lengths),
        ng50,
    }
}

/// Exact match between a scaffold interval and a reference interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Anchor {
    pub q_start: usize,
    pub q_end: usize,
    pub reference: usize,
    pub r_start: usize,
    pub r_end: usize,
    pub reverse: bool,
}

impl Anchor {
    fn len(&self) -> usize {
        self.q_end - self.q_start
    }

    /// Reference coordinate facing the scaffold interval's start.
    fn r_at_q(&self) -> i64 {
        if self.reverse {
            self.r_end as i64
        } else {
            self.r_start as i64
        }
    }
}

const SEED_K: usize = 31;
const MAX_POSTINGS: usize = 16;

/// Forward-strand 31-mer index over the references.
pub struct ReferenceIndex {
    refs: Vec<Vec<u8>>,
    seeds: HashMap<Kmer, Vec<(u32, u32)>>,
}

impl ReferenceIndex {
    pub fn new(references: &[PackedSeq]) -> Self {
        let mut seeds: HashMap<Kmer, Vec<(u32, u32)>> = HashMap::new();
        for (ri, r) in references.iter().enumerate() {
            let m = MaskedSeq::unmasked(r.clone());
            for (pos, fwd, _) in windows(&m, SEED_K) {
                let v = seeds.entry(fwd).or_default();
                if v.len() <= MAX_POSTINGS {
                    v.push((ri as u32, pos as u32));
                }
            }
        }
        ReferenceIndex {
            refs: references.iter().map(|r| r.to_codes()).collect(),
            seeds,
        }
    }

    /// Maximal exact matches of at least `min_len` between `query` (codes,
    /// 4 = N) and the forward references.
    fn mems(&self, query: &[u8], min_len: usize) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        if query.len() < SEED_K {
            return out;
        }
        for i in 0..=query.len() - SEED_K {
            let w = &query[i..i + SEED_K];
            if w.iter().any(|&c| c > 3) {
                continue;
            }
            let Some(hits) = self.seeds.get(&Kmer::from_codes(w)) else {
                continue;
            };
            if hits.len() > MAX_POSTINGS {
                continue;
            }
            for &(ri, rp) in hits {
                let r = &self.refs[ri as usize];
                let rp = rp as usize;
                if i > 0 && rp > 0 && query[i - 1] == r[rp - 1] {
                    continue; // not left-maximal
                }
                let mut l = SEED_K;
                while i + l < query.len() && rp + l < r.len() && query[i + l] == r[rp + l] {
                    l += 1;
                }
                if l >= min_len {
                    out.push((i, ri as usize, rp, l));
                }
            }
        }
        out
    }

    /// Anchors of one scaffold on both reference strands.
    pub fn anchors(&self, scaffold: &MaskedSeq, min_len: usize) -> Vec<Anchor> {
        let mut q = scaffold.seq.to_codes();
        for &p in scaffold.n_mask.positions() {
            q[p as usize] = 4;
        }
        let n = q.len();
        let mut out: Vec<Anchor> = self
            .mems(&q, min_len)
            .into_iter()
            .map(|(i, ri, rp, l)| Anchor {
                q_start: i,
                q_end: i + l,
                reference: ri,
                r_start: rp,
                r_end: rp + l,
                reverse: false,
            })
            .collect();
        let rc: Vec<u8> = q
            .iter()
            .rev()
            .map(|&c| if c > 3 { 4 } else { 3 - c })
            .collect();
        out.extend(
            self.mems(&rc, min_len)
                .into_iter()
                .map(|(i, ri, rp, l)| Anchor {
                    q_start: n - i - l,
                    q_end: n - i,
                    reference: ri,
                    r_start: rp,
                    r_end: rp + l,
                    reverse: true,
                }),
        );
        out.sort_unstable();
        out
    }
}

/// Largest allowed disagreement between scaffold and reference distances
/// of consecutive anchors in one chain.
pub const MAX_CHAIN_DEVIATION: i64 = 1000;

fn chainable(a: &Anchor, b: &Anchor) -> bool {
    if a.reference != b.reference || a.reverse != b.reverse || b.q_start < a.q_start {
        return false;
    }
    let dq = b.q_start as i64 - a.q_start as i64;
    let dr = if a.reverse {
        a.r_at_q() - b.r_at_q()
    } else {
        b.r_at_q() - a.r_at_q()
    };
    dr >= 0 && (dr - dq).abs() <= MAX_CHAIN_DEVIATION
}

/// Heaviest collinear chain (by matched bases) among `anchors`, which must
/// be sorted by scaffold start.
fn best_chain(anchors: &[Anchor]) -> Vec<usize> {
    let n = anchors.len();
    let mut score = vec![0usize; n];
    let mut prev = vec![usize::MAX; n];
    for j in 0..n {
        score[j] = anchors[j].len();
        for i in 0..j {
            if chainable(&anchors[i], &anchors[j]) && score[i] + anchors[j].len() > score[j] {
                score[j] = score[i] + anchors[j].len();
                prev[j] = i;
            }
        }
    }
    let Some(mut j) = (0..n).max_by_key(|&j| (score[j], std::cmp::Reverse(j))) else {
        return Vec::new();
    };
    let mut chain = vec![j];
    while prev[j] != usize::MAX {
        j = prev[j];
        chain.push(j);
    }
    chain.reverse();
    chain
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Correct,
    Misassembled(usize),
    Unaligned,
}

/// Breakpoints in one scaffold: chains are peeled off greedily, each
/// explaining its anchors and every anchor mostly covered by them; every
/// chain after the first is one misassembly.
pub fn scaffold_verdict(anchors: &[Anchor]) -> Verdict {
    if anchors.is_empty() {
        return Verdict::Unaligned;
    }
    let mut left: Vec<Anchor> = anchors.to_vec();
    let mut chains = 0;
    while !left.is_empty() {
        let chain = best_chain(&left);
        let covered: Vec<(usize, usize)> = chain
            .iter()
            .map(|&i| (left[i].q_start, left[i].q_end))
            .collect();
        chains += 1;
        let explained = |a: &Anchor| {
            let hit: usize = covered
                .iter()
                .map(|&(s, e)| e.min(a.q_end).saturating_sub(s.max(a.q_start)))
                .sum();
            2 * hit >= a.len()
        };
        left.retain(|a| !explained(a));
    }
    if chains == 1 {
        Verdict::Correct
    } else {
        Verdict::Misassembled(chains - 1)
    }
}

/// Default minimum anchor length for misassembly detection.
pub const ANCHOR_LEN: usize = 200;

pub fn count_misassemblies(
    assembly: &[MaskedSeq],
    index: &ReferenceIndex,
    anchor_len: usize,
) -> (usize, Vec<Verdict>) {
    let verdicts: Vec<Verdict> = assembly
        .iter()
        .map(|s| scaffold_verdict(&index.anchors(s, anchor_len)))
        .collect();
    let total = verdicts
        .iter()
        .map(|v| match v {
            Verdict::Misassembled(n) => *n,
            _ => 0,
        })
        .sum();
    (total, verdicts)
}

/// Splits sequences at N runs into plain contigs for read alignment.
fn unmasked_pieces(assembly: &[MaskedSeq], min_len: usize) -> Vec<Contig> {
    let mut out = Vec::new();
    for s in assembly {
        let codes = s.seq.to_codes();
        let mut start = 0;
        let cut = |a: usize, b: usize, out: &mut Vec<Contig>| {
            if b - a >= min_len {
                out.push(Contig::new(
                    out.len() as u32,
                    PackedSeq::from_codes(&codes[a..b]),
                    0.0,
                ));
            }
        };
        for &p in s.n_mask.positions() {
            cut(start, p as usize, &mut out);
            start = p as usize + 1;
        }
        cut(start, codes.len(), &mut out);
    }
    out
}

/// Fraction of reads (mates counted separately) with at least one
/// alignment to the assembly.
pub fn mapped_fraction(
    workers: &Workers,
    assembly: &[MaskedSeq],
    pairs: &[ReadPair],
    params: &AlignParams,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let pieces = unmasked_pieces(assembly, params.seed_len);
    let index = SeedIndex::build(workers, &pieces, params.seed_len);
    let nw = workers.count();
    let blocks: Vec<Vec<ReadPair>> = (0..nw)
        .map(|w| pairs[chunk_range(pairs.len(), nw, w)].to_vec())
        .collect();
    let aln = align_reads(workers, &blocks, &index, params);
    let mapped: HashSet<(u64, u8)> = aln.records.iter().map(|r| (r.read_id, r.mate)).collect();
    mapped.len() as f64 / (2 * pairs.len()) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub references: Vec<(String, f64)>,
    pub aggregate_fraction: f64,
    pub contiguity: Contiguity,
    pub misassemblies: usize,
    pub misassembled_scaffolds: usize,
    pub unaligned_scaffolds: usize,
    pub mapped_fraction: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub k_eval: usize,
    pub anchor_len: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            k_eval: 31,
            anchor_len: ANCHOR_LEN,
        }
    }
}

pub fn evaluate(
    workers: &Workers,
    assembly: &[MaskedSeq],
    genomes: &[Genome],
    pairs: Option<&[ReadPair]>,
    params: &EvalParams,
) -> EvalReport {
    let refs: Vec<PackedSeq> = genomes.iter().map(|g| g.seq.clone()).collect();
    let fractions = genome_fraction(assembly, &refs, params.k_eval);
    let index = ReferenceIndex::new(&refs);
    let (misassemblies, verdicts) = count_misassemblies(assembly, &index, params.anchor_len);
    let lens: Vec<usize> = assembly.iter().map(|s| s.len()).collect();
    EvalReport {
        references: genomes
            .iter()
            .map(|g| g.name.clone())
            .zip(fractions)
            .collect(),
        aggregate_fraction: aggregate_fraction(assembly, &refs, params.k_eval),
        contiguity: contiguity(&lens, refs.iter().map(|r| r.len()).sum()),
        misassemblies,
        misassembled_scaffolds: verdicts
            .iter()
            .filter(|v| matches!(v, Verdict::Misassembled(_)))
            .count(),
        unaligned_scaffolds: verdicts
            .iter()
            .filter(|v| **v == Verdict::Unaligned)
            .count(),
        mapped_fraction: pairs
            .map(|p| mapped_fraction(workers, assembly, p, &AlignParams::default())),
    }
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let c = &self.contiguity;
        let mut s = String::new();
        let _ = writeln!(s, "scaffolds            {}", c.count);
        let _ = writeln!(s, "total length         {}", c.total);
        let _ = writeln!(s, "length >= 5k         {}", c.ge_5k);
        let _ = writeln!(s, "length >= 25k        {}", c.ge_25k);
        let _ = writeln!(s, "length >= 50k        {}", c.ge_50k);
        let _ = writeln!(s, "largest              {}", c.largest);
        let _ = writeln!(s, "N50                  {}", c.n50);
        let _ = writeln!(s, "NG50                 {}", c.ng50);
        let _ = writeln!(s, "misassemblies        {}", self.misassemblies);
        let _ = writeln!(s, "misassembled scaffs  {}", self.misassembled_scaffolds);
        let _ = writeln!(s, "unaligned scaffolds  {}", self.unaligned_scaffolds);
        if let Some(m) = self.mapped_fraction {
            let _ = writeln!(s, "reads mapped         {:.2}%", 100.0 * m);
        }
        let _ = writeln!(s, "genome fraction      {:.2}%", self.aggregate_fraction);
        for (name, f) in &self.references {
            let _ = writeln!(s, "  {name:<18} {f:.2}%");
        }
        s
    }

    /// Two-column metric/value TSV.
    pub fn to_tsv(&self) -> String {
        let c = &self.contiguity;
        let mut s = String::from("metric\tvalue\n");
        for (k, v) in [
            ("scaffolds", c.count),
            ("total_length", c.total),
            ("length_ge_5k", c.ge_5k),
            ("length_ge_25k", c.ge_25k),
            ("length_ge_50k", c.ge_50k),
            ("largest", c.largest),
            ("n50", c.n50),
            ("ng50", c.ng50),
            ("misassemblies", self.misassemblies),
            ("misassembled_scaffolds", self.misassembled_scaffolds),
            ("unaligned_scaffolds", self.unaligned_scaffolds),
        ] {
            let _ = writeln!(s, "{k}\t{v}");
        }
        if let Some(m) = self.mapped_fraction {
            let _ = writeln!(s, "mapped_fraction\t{m:.4}");
        }
        let _ = writeln!(s, "genome_fraction\t{:.4}", self.aggregate_fraction);
        for (name, f) in &self.references {
            let _ = writeln!(s, "genome_fraction:{name}\t{f:.4}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn genome(len: usize, seed: u64) -> PackedSeq {
        random_genome(len, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn profile(weights: Vec<f64>, pairs: usize, err: f64) -> CommunityProfile {
        let genomes = (0..weights.len())
            .map(|i| Genome {
                name: format!("g{i}"),
                seq: genome(5_000, i as u64 + 10),
            })
            .collect();
        CommunityProfile::new(
            genomes,
            weights,
            err,
            ReadLibrary::new(300.0, 30.0, 100),
            pairs,
            7,
        )
        .unwrap()
    }

    #[test]
    fn error_free_reads_are_substrings() {
        let p = profile(vec![1.0, 1.0], 200, 0.0);
        let out = simulate_reads(&Workers::new(2), &p);
        for (pair, t) in out.pairs.iter().zip(&out.truth) {
            let g = p.genomes[t.genome].seq.to_acgt();
            let rc = p.genomes[t.genome].seq.revcomp().to_acgt();
            for r in [&pair.r1, &pair.r2] {
                let s = r.decode();
                assert!(g.contains(&s) || rc.contains(&s));
            }
            assert!(t.insert >= 200);
        }
    }

    #[test]
    fn worker_count_does_not_change_reads() {
        let p = profile(vec![1.0, 3.0], 300, 0.01);
        let a = simulate_reads(&Workers::new(1), &p);
        let b = simulate_reads(&Workers::new(3), &p);
        assert_eq!(a.pairs, b.pairs);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn short_genome_rejected() {
        let g = vec![Genome {
            name: "tiny".into(),
            seq: genome(150, 1),
        }];
        let e = CommunityProfile::new(g, vec![1.0], 0.0, ReadLibrary::new(300.0, 30.0, 100), 1, 1);
        assert!(matches!(e, Err(SimError::GenomeTooShort { .. })));
    }

    #[test]
    fn fraction_of_half() {
        let g = genome(2_000, 3);
        let half = MaskedSeq::unmasked(g.subseq(0, 1_000));
        let f = genome_fraction(&[half], std::slice::from_ref(&g), 31)[0];
        // 970 of 1970 windows
        assert!((f - 100.0 * 970.0 / 1970.0).abs() < 0.5, "{f}");
        assert_eq!(genome_fraction(&[], &[g], 31)[0], 0.0);
    }

    #[test]
    fn contiguity_basics() {
        let c = contiguity(&[60_000, 40_000], 100_000);
        assert_eq!(
            (c.n50, c.ge_50k, c.ge_25k, c.total),
            (60_000, 60_000, 100_000, 100_000)
        );
        assert_eq!(contiguity(&[], 0), Contiguity::default());
    }

    #[test]
    fn misassembly_detection() {
        let a = genome(12_000, 4);
        let b = genome(12_000, 5);
        let idx = ReferenceIndex::new(&[a.clone(), b.clone()]);
        let sub = MaskedSeq::unmasked(a.subseq(1_000, 9_000));
        assert_eq!(scaffold_verdict(&idx.anchors(&sub, 200)), Verdict::Correct);
        let rc = MaskedSeq::unmasked(a.subseq(1_000, 9_000).revcomp());
        assert_eq!(scaffold_verdict(&idx.anchors(&rc, 200)), Verdict::Correct);
        let mut chim = a.subseq(0, 5_000);
        chim.extend_codes(b.subseq(0, 5_000).to_codes());
        let chim = MaskedSeq::unmasked(chim);
        assert_eq!(
            scaffold_verdict(&idx.anchors(&chim, 200)),
            Verdict::Misassembled(1)
        );
        // 500 N in place of reference bases
        let codes = a.codes_range(0, 6_000);
        let gapped = MaskedSeq {
            seq: PackedSeq::from_codes(&codes),
            n_mask: crate::seqio::NMask::from_positions((3_000..3_500).collect()),
        };
        assert_eq!(
            scaffold_verdict(&idx.anchors(&gapped, 200)),
            Verdict::Correct
        );
    }
}
