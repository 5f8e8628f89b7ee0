//! End-to-end driver: configuration, the iterative contig generation loop,
//! scaffolding, stage timing and the commands behind the CLI.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use thiserror::Error;

use crate::align::{align_reads, localize_reads, AlignParams, AlignmentSet, SeedIndex};
use crate::contig::{n50, to_fasta, Contig};
use crate::dbg::traverse;
use crate::kmer::MAX_K;
use crate::kmercount::{count_pass, merge_kmer_sets, split_blocks, KmerParams};
use crate::localasm::{gather_reads, run_local_assembly, WalkParams};
use crate::refine::{ContigGraph, PruneParams};
use crate::scaffold::{
    aggregate_links, build_scaffolds, close_gaps, dump_layout_tsv, find_spans, find_splints,
    AnyEnd, GapParams, GapStats, LinkSet, ScaffoldSeq, TraverseParams,
};
use crate::seqio::{
    read_fasta, read_fastq, write_fasta, FastaRecord, MaskedSeq, ReadLibrary, ReadPair, SeqError,
};
use crate::simeval::{
    evaluate, simulate_reads, write_reads, write_truth, CommunityProfile, EvalParams, EvalReport,
    Genome, SimConfig, SimError,
};
use crate::workers::{chunk_range, load_balance, Workers};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config file {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{stage} failed at k={k}: {reason}")]
    Stage {
        stage: &'static str,
        k: usize,
        reason: String,
    },
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    /// Errors the user can fix by editing the command line or config.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            PipelineError::Config { .. } | PipelineError::Invalid(_)
        )
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryConfig {
    pub insert_mean: f64,
    pub insert_sd: f64,
    pub read_len: usize,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            insert_mean: 300.0,
            insert_sd: 30.0,
            read_len: 100,
        }
    }
}

impl LibraryConfig {
    pub fn library(&self) -> ReadLibrary {
        ReadLibrary::new(self.insert_mean, self.insert_sd, self.read_len)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleConfig {
    /// Input FASTQ (one interleaved file or two mate files); empty means the
    /// simulator output in the run directory.
    pub reads: Vec<PathBuf>,
    pub k_schedule: Vec<usize>,
    /// When all three are set they replace `k_schedule` with
    /// `k_min, k_min + k_step, ... <= k_max`.
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub k_step: Option<usize>,
    pub epsilon: u32,
    pub t_hq_ext: u32,
    pub t_base: f64,
    pub e: f64,
    pub heavy_hitter_capacity: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed_len: usize,
    pub mismatch_rate: f64,
    pub cache_capacity: usize,
    pub walk_shift: usize,
    pub vote_hq: u32,
    pub max_extension: usize,
    /// Contigs per local-assembly work block.
    pub block_size: usize,
    /// Shards of every distributed table; 0 means four per worker.
    pub shards: usize,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        let kp = KmerParams::default();
        let pp = PruneParams::default();
        let ap = AlignParams::default();
        AssembleConfig {
            reads: Vec::new(),
            k_schedule: vec![21, 33, 55],
            k_min: None,
            k_max: None,
            k_step: None,
            epsilon: kp.epsilon,
            t_hq_ext: kp.t_hq_ext,
            t_base: kp.t_base,
            e: kp.e,
            heavy_hitter_capacity: kp.heavy_hitter_capacity,
            alpha: pp.alpha,
            beta: pp.beta,
            seed_len: ap.seed_len,
            mismatch_rate: ap.mismatch_rate,
            cache_capacity: ap.cache_capacity,
            walk_shift: 4,
            vote_hq: 2,
            max_extension: 1000,
            block_size: 8,
            shards: 0,
        }
    }
}

impl AssembleConfig {
    /// Ascending odd k values; even entries are raised by one.
    pub fn schedule(&self) -> Result<Vec<usize>, PipelineError> {
        let raw: Vec<usize> = match (self.k_min, self.k_max, self.k_step) {
            (Some(lo), Some(hi), Some(step)) => {
                if step == 0 || lo > hi {
                    return Err(PipelineError::Invalid(format!(
                        "bad k range {lo}..={hi} step {step}"
                    )));
                }
                (lo..=hi).step_by(step).collect()
            }
            _ => self.k_schedule.clone(),
        };
        let mut ks: Vec<usize> = raw
            .into_iter()
            .map(|k| {
                if k % 2 == 0 {
                    warn!("k={k} is even, using {}", k + 1);
                    k + 1
                } else {
                    k
                }
            })
            .collect();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() {
            return Err(PipelineError::Invalid("empty k schedule".into()));
        }
        if let Some(&k) = ks.iter().find(|&&k| !(3..=MAX_K).contains(&k)) {
            return Err(PipelineError::Invalid(format!("k={k} outside 3..={MAX_K}")));
        }
        Ok(ks)
    }

    pub fn kmer_params(&self, k: usize) -> KmerParams {
        KmerParams {
            k,
            epsilon: self.epsilon,
            t_hq_ext: self.t_hq_ext,
            t_base: self.t_base,
            e: self.e,
            heavy_hitter_capacity: self.heavy_hitter_capacity,
        }
    }

    pub fn prune_params(&self) -> PruneParams {
        PruneParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn align_params(&self) -> AlignParams {
        AlignParams {
            seed_len: self.seed_len,
            mismatch_rate: self.mismatch_rate,
            cache_capacity: self.cache_capacity,
            ..AlignParams::default()
        }
    }

    pub fn walk_params(&self, k: usize, read_len: usize) -> WalkParams {
        WalkParams {
            shift: self.walk_shift,
            vote_hq: self.vote_hq,
            max_extension: self.max_extension,
            ..WalkParams::for_k(k, read_len)
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaffoldConfig {
    pub min_support: u32,
    pub long_threshold: usize,
    /// Anchor length for splint and walk gap closure.
    pub anchor_len: usize,
    /// Gap size tolerance; negative means 3 × insert sd + 10.
    pub gap_tolerance: i64,
    pub seed: u64,
}

impl Default for ScaffoldConfig {
    fn default() -> Self {
        ScaffoldConfig {
            min_support: 2,
            long_threshold: 800,
            anchor_len: 21,
            gap_tolerance: -1,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Worker count; 0 means the number of available cores.
    pub threads: usize,
    pub library: LibraryConfig,
    pub simulate: SimConfig,
    pub assemble: AssembleConfig,
    pub scaffold: ScaffoldConfig,
    pub evaluate: EvalParams,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|reason| PipelineError::Config {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Applies a seed to every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.simulate.seed = seed;
        self.scaffold.seed = seed;
    }

    pub fn worker_count(&self) -> usize {
        if self.threads > 0 {
            self.threads
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let ks = self.assemble.schedule()?;
        for &k in &ks {
            self.assemble
                .kmer_params(k)
                .validate()
                .map_err(PipelineError::Invalid)?;
        }
        self.assemble
            .prune_params()
            .validate()
            .map_err(PipelineError::Invalid)?;
        if self.library.insert_mean <= 0.0 || self.library.read_len == 0 {
            return Err(PipelineError::Invalid(
                "library needs a positive insert mean and read length".into(),
            ));
        }
        if self.scaffold.min_support == 0 {
            return Err(PipelineError::Invalid(
                "min_support must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One stage of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub k: usize,
    pub stage: &'static str,
    pub wall: Duration,
    pub items: usize,
    pub hit_rate: Option<f64>,
    /// min/max worker busy time over the stage's parallel sections.
    pub load_balance: f64,
}

/// Contig-generation stages in execution order.
pub const CONTIG_STAGES: [&str; 9] = [
    "localize",
    "kmer_analysis",
    "merge_contig_kmers",
    "traversal",
    "bubbles",
    "hair",
    "prune",
    "alignment",
    "local_assembly",
];

pub const SCAFFOLD_STAGES: [&str; 5] = [
    "alignment",
    "links",
    "components_traversal",
    "gap_closing",
    "output",
];

#[derive(Default)]
pub struct Timings {
    pub stages: Vec<StageTiming>,
}

impl Timings {
    fn time<R>(
        &mut self,
        workers: &Workers,
        k: usize,
        stage: &'static str,
        f: impl FnOnce() -> (R, usize, Option<f64>),
    ) -> R {
        workers.take_busy();
        let t = Instant::now();
        let (r, items, hit_rate) = f();
        let wall = t.elapsed();
        let busy = workers.take_busy();
        self.stages.push(StageTiming {
            k,
            stage,
            wall,
            items,
            hit_rate,
            load_balance: load_balance(&busy),
        });
        r
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "k\tstage\twall_s\titems\thit_rate\tload_balance")?;
        for s in &self.stages {
            let hr = s.hit_rate.map_or("-".to_string(), |h| format!("{h:.4}"));
            writeln!(
                w,
                "{}\t{}\t{:.6}\t{}\t{}\t{:.3}",
                s.k,
                s.stage,
                s.wall.as_secs_f64(),
                s.items,
                hr,
                s.load_balance
            )?;
        }
        Ok(())
    }

    pub fn total(&self, stages: &[&str]) -> Duration {
        self.stages
            .iter()
            .filter(|s| stages.contains(&s.stage))
            .map(|s| s.wall)
            .sum()
    }
}

/// What one iteration left behind.
pub struct IterationOutput {
    pub k: usize,
    pub graph_contigs: Vec<Contig>,
    pub contigs: Vec<Contig>,
    pub alignments: AlignmentSet,
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_at(path))
}

/// Iterative contig generation over the k schedule. Intermediate files are
/// written under `out/iter_{k}/` when `out` is given.
pub fn run_contig_generation(
    config: &PipelineConfig,
    workers: &Workers,
    reads: Vec<ReadPair>,
    out: Option<&Path>,
    timings: &mut Timings,
) -> Result<Vec<Contig>, PipelineError> {
    config.validate()?;
    let ks = config.assemble.schedule()?;
    let nw = workers.count();
    let shards = if config.assemble.shards == 0 {
        4 * nw
    } else {
        config.assemble.shards
    };
    let library = config.library.library();
    let total_reads = reads.len();
    let mut blocks = split_blocks(reads, nw);
    let mut prev: Option<IterationOutput> = None;

    for &k in &ks {
        let params = config.assemble.kmer_params(k);
        blocks = timings.time(workers, k, "localize", || match &prev {
            Some(p) => {
                let b = localize_reads(std::mem::take(&mut blocks), &p.alignments, nw);
                (b, total_reads, None)
            }
            None => (std::mem::take(&mut blocks), 0, None),
        });
        let moved: usize = blocks.iter().map(|b| b.len()).sum();
        if moved != total_reads {
            return Err(PipelineError::Stage {
                stage: "localize",
                k,
                reason: format!("{moved} reads after localization, expected {total_reads}"),
            });
        }

        let mut table = timings.time(workers, k, "kmer_analysis", || {
            let (t, stats) = count_pass(workers, &blocks, &params, shards);
            let n = stats.retained;
            (t, n, None)
        });
        timings.time(workers, k, "merge_contig_kmers", || match &prev {
            Some(p) => {
                let s = merge_kmer_sets(workers, &mut table, &p.contigs, k);
                ((), s.contig_kmers, None)
            }
            None => ((), 0, None),
        });
        let (contigs, _) = timings.time(workers, k, "traversal", || {
            let r = traverse(workers, &table, &params);
            let n = r.0.len();
            (r, n, None)
        });
        info!("k={k}: {} k-mers, {} contigs", table.len(), contigs.len());

        let mut graph = ContigGraph::build(workers, contigs, &table, &params);
        drop(table);
        timings.time(workers, k, "bubbles", || {
            let s = graph.merge_bubbles(workers);
            ((), s.bubbles, None)
        });
        timings.time(workers, k, "hair", || {
            let n = graph.remove_hair();
            ((), n, None)
        });
        let prune = config.assemble.prune_params();
        timings.time(workers, k, "prune", || {
            let s = graph.prune(workers, &prune);
            ((), s.removed, None)
        });
        if let Some(dir) = out {
            write_file(&dir.join(format!("iter_{k}")).join("graph.tsv"), |w| {
                graph.dump_tsv(w)
            })?;
        }
        let graph_contigs = graph.into_contigs();

        let aparams = config.assemble.align_params();
        let alignments = timings.time(workers, k, "alignment", || {
            let index = SeedIndex::build(workers, &graph_contigs, aparams.seed_len);
            let a = align_reads(workers, &blocks, &index, &aparams);
            let (n, h) = (a.records.len(), a.mean_hit_rate());
            (a, n, Some(h))
        });

        let walk = config.assemble.walk_params(k, library.read_length);
        let all_reads: Vec<ReadPair> = {
            let mut v: Vec<ReadPair> = blocks.iter().flatten().cloned().collect();
            v.sort_unstable_by_key(|p| p.id);
            v
        };
        let contigs = timings.time(workers, k, "local_assembly", || {
            let sets = gather_reads(&graph_contigs, &alignments, &all_reads, &library);
            let (c, s) = run_local_assembly(
                workers,
                &graph_contigs,
                &sets,
                &walk,
                config.assemble.block_size,
            );
            (c, s.added_bases, None)
        });

        if let Some(dir) = out {
            let d = dir.join(format!("iter_{k}"));
            write_fasta(&to_fasta(&graph_contigs), d.join("graph_contigs.fa"))?;
            write_fasta(&to_fasta(&contigs), d.join("contigs.fa"))?;
            write_file(&d.join("alignments.tsv"), |w| alignments.dump_tsv(w))?;
        }
        let lens: Vec<usize> = contigs.iter().map(|c| c.len()).collect();
        info!(
            "k={k}: {} contigs after local assembly, N50 {}",
            contigs.len(),
            n50(&lens)
        );
        prev = Some(IterationOutput {
            k,
            graph_contigs,
            contigs,
            alignments,
        });
    }
    Ok(prev.map(|p| p.contigs).unwrap_or_default())
}

pub struct ScaffoldOutput {
    pub scaffolds: Vec<ScaffoldSeq>,
    pub links: LinkSet,
    pub gap_stats: GapStats,
}

/// Scaffolding of final contigs with the read pairs.
pub fn run_scaffolding(
    config: &PipelineConfig,
    workers: &Workers,
    contigs: &[Contig],
    reads: &[ReadPair],
    timings: &mut Timings,
) -> Result<ScaffoldOutput, PipelineError> {
    config.validate()?;
    let nw = workers.count();
    let library = config.library.library();
    let sc = &config.scaffold;
    let aparams = config.assemble.align_params();
    let blocks: Vec<Vec<ReadPair>> = (0..nw)
        .map(|w| reads[chunk_range(reads.len(), nw, w)].to_vec())
        .collect();
    let alignments = timings.time(workers, 0, "alignment", || {
        let index = SeedIndex::build(workers, contigs, aparams.seed_len);
        let a = align_reads(workers, &blocks, &index, &aparams);
        let (n, h) = (a.records.len(), a.mean_hit_rate());
        (a, n, Some(h))
    });
    let links = timings.time(workers, 0, "links", || {
        let mut ev = find_splints(&alignments);
        ev.extend(find_spans(&alignments, &library));
        let parts: Vec<Vec<_>> = (0..nw)
            .map(|w| ev[chunk_range(ev.len(), nw, w)].to_vec())
            .collect();
        let ls = aggregate_links(workers, &parts, sc.min_support);
        let n = ls.len();
        (ls, n, None)
    });
    let lens: Vec<usize> = contigs.iter().map(|c| c.len()).collect();
    let tparams = TraverseParams {
        long_threshold: sc.long_threshold,
        insert_size_mean: library.insert_size_mean,
        min_support: sc.min_support,
        seed: sc.seed,
    };
    let scaffolds = timings.time(workers, 0, "components_traversal", || {
        let s = build_scaffolds(workers, &lens, &links.links(), &tparams, &AnyEnd);
        let n = s.len();
        (s, n, None)
    });
    let tolerance = if sc.gap_tolerance >= 0 {
        sc.gap_tolerance
    } else {
        (3.0 * library.insert_size_sd).round() as i64 + 10
    };
    let gp = GapParams {
        k: sc.anchor_len,
        tolerance,
        walk: config
            .assemble
            .walk_params(sc.anchor_len, library.read_length),
    };
    let (scaffolds, gap_stats) = timings.time(workers, 0, "gap_closing", || {
        let (s, g) = close_gaps(
            workers,
            &scaffolds,
            contigs,
            reads,
            &alignments,
            &library,
            &gp,
        );
        let n = g.gaps;
        ((s, g), n, None)
    });
    Ok(ScaffoldOutput {
        scaffolds,
        links,
        gap_stats,
    })
}

/// Paths used by the commands inside one run directory.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_at(&root))?;
        Ok(RunDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn load_reads(config: &PipelineConfig, dir: &RunDir) -> Result<Vec<ReadPair>, PipelineError> {
    let paths = if config.assemble.reads.is_empty() {
        vec![dir.path("reads_1.fq"), dir.path("reads_2.fq")]
    } else {
        config.assemble.reads.clone()
    };
    Ok(read_fastq(&paths)?)
}

fn load_genomes(config: &PipelineConfig, dir: &RunDir) -> Result<Vec<Genome>, PipelineError> {
    let path = dir.path("references.fa");
    let recs = if path.exists() {
        read_fasta(&path)?
    } else if !config.simulate.references.is_empty() {
        let mut v = Vec::new();
        for p in &config.simulate.references {
            v.extend(read_fasta(p)?);
        }
        v
    } else {
        let profile = CommunityProfile::from_config(&config.simulate, config.library.library())?;
        return Ok(profile.genomes);
    };
    Ok(recs
        .into_iter()
        .map(|r| Genome {
            name: r.id,
            seq: r.seq.seq,
        })
        .collect())
}

pub fn cmd_simulate(
    config: &PipelineConfig,
    workers: &Workers,
    dir: &RunDir,
) -> Result<CommunityProfile, PipelineError> {
    let profile = CommunityProfile::from_config(&config.simulate, config.library.library())?;
    let sim = simulate_reads(workers, &profile);
    let refs: Vec<FastaRecord> = profile
        .genomes
        .iter()
        .zip(&profile.weights)
        .map(|(g, w)| {
            FastaRecord::new(g.name.clone(), MaskedSeq::unmasked(g.seq.clone()))
                .annotated(format!("abundance={w:.4}"))
        })
        .collect();
    write_fasta(&refs, dir.path("references.fa"))?;
    let (p1, p2) = (dir.path("reads_1.fq"), dir.path("reads_2.fq"));
    let f1 = File::create(&p1).map_err(io_at(&p1))?;
    let f2 = File::create(&p2).map_err(io_at(&p2))?;
    let (mut w1, mut w2) = (BufWriter::new(f1), BufWriter::new(f2));
    write_reads(&sim.pairs, &mut w1, &mut w2)
        .and_then(|_| w1.flush())
        .and_then(|_| w2.flush())
        .map_err(io_at(&p1))?;
    write_file(&dir.path("truth.tsv"), |w| {
        write_truth(&sim.truth, &profile.genomes, w)
    })?;
    info!(
        "simulated {} pairs from {} genomes",
        sim.pairs.len(),
        profile.genomes.len()
    );
    Ok(profile)
}

pub fn cmd_assemble(
    config: &PipelineConfig,
    workers: &Workers,
    dir: &RunDir,
    timings: &mut Timings,
) -> Result<Vec<Contig>, PipelineError> {
    let reads = load_reads(config, dir)?;
    for k in config.assemble.schedule()? {
        let d = dir.path(&format!("iter_{k}"));
        fs::create_dir_all(&d).map_err(io_at(&d))?;
    }
    let contigs = run_contig_generation(config, workers, reads, Some(&dir.root), timings)?;
    write_fasta(&to_fasta(&contigs), dir.path("contigs.fa"))?;
    Ok(contigs)
}

fn read_contigs(path: &Path) -> Result<Vec<Contig>, PipelineError> {
    Ok(read_fasta(path)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let depth = r
                .annotation
                .as_deref()
                .and_then(|a| a.strip_prefix("depth="))
                .and_then(|d| d.parse().ok())
                .unwrap_or(0.0);
            Contig::new(i as u32, r.seq.seq, depth)
        })
        .collect())
}

pub fn cmd_scaffold(
    config: &PipelineConfig,
    workers: &Workers,
    dir: &RunDir,
    timings: &mut Timings,
) -> Result<ScaffoldOutput, PipelineError> {
    let contigs = read_contigs(&dir.path("contigs.fa"))?;
    let reads = load_reads(config, dir)?;
    let out = run_scaffolding(config, workers, &contigs, &reads, timings)?;
    timings.time(workers, 0, "output", || {
        let r = write_outputs(dir, &out);
        (r, out.scaffolds.len(), None)
    })?;
    Ok(out)
}

fn write_outputs(dir: &RunDir, out: &ScaffoldOutput) -> Result<(), PipelineError> {
    let recs: Vec<FastaRecord> = out.scaffolds.iter().map(|s| s.fasta_record()).collect();
    write_fasta(&recs, dir.path("scaffolds.fa"))?;
    let layout: Vec<crate::scaffold::Scaffold> = out
        .scaffolds
        .iter()
        .map(|s| crate::scaffold::Scaffold {
            id: s.id,
            entries: s.layout.clone(),
        })
        .collect();
    write_file(&dir.path("scaffold_layout.tsv"), |w| {
        dump_layout_tsv(&layout, w)
    })?;
    write_file(&dir.path("links.tsv"), |w| out.links.dump_tsv(w))?;
    Ok(())
}

pub fn cmd_evaluate(
    config: &PipelineConfig,
    workers: &Workers,
    dir: &RunDir,
) -> Result<EvalReport, PipelineError> {
    let genomes = load_genomes(config, dir)?;
    let asm_path = ["scaffolds.fa", "contigs.fa"]
        .iter()
        .map(|n| dir.path(n))
        .find(|p| p.exists())
        .unwrap_or_else(|| dir.path("scaffolds.fa"));
    let assembly: Vec<MaskedSeq> = read_fasta(&asm_path)?.into_iter().map(|r| r.seq).collect();
    let reads = load_reads(config, dir).ok();
    let report = evaluate(
        workers,
        &assembly,
        &genomes,
        reads.as_deref(),
        &config.evaluate,
    );
    write_file(&dir.path("report.txt"), |w| {
        w.write_all(report.to_text().as_bytes())
    })?;
    write_file(&dir.path("report.tsv"), |w| {
        w.write_all(report.to_tsv().as_bytes())
    })?;
    Ok(report)
}

pub fn write_timings(dir: &RunDir, timings: &Timings) -> Result<(), PipelineError> {
    write_file(&dir.path("timing.tsv"), |w| timings.write_tsv(w))
}
