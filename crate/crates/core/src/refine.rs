//! Contig graph refinement: end-to-end adjacency from fork k-mers, simple
//! bubble merging with splicing of the surviving chains, hair removal and
//! iterative depth-based pruning.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use crate::contig::{renumber, Contig};
use crate::dbg::oriented_record;
use crate::kmer::{kmer_at, Kmer};
use crate::kmercount::{Ext, KmerParams, KmerTable};
use crate::seqio::{revcomp, PackedSeq};
use crate::shardstore::{
    AtomicOp, AtomicOutcome, Phase, ShardedMap, SoftCache, DEFAULT_CACHE_CAPACITY,
};
use crate::workers::Workers;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Start,
    End,
}

impl End {
    pub fn other(self) -> End {
        match self {
            End::Start => End::End,
            End::End => End::Start,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            End::Start => "start",
            End::End => "end",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EndRef {
    pub contig: usize,
    pub end: End,
}

impl EndRef {
    pub fn new(contig: usize, end: End) -> Self {
        EndRef { contig, end }
    }

    pub fn opposite(self) -> EndRef {
        EndRef::new(self.contig, self.end.other())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub to: EndRef,
    pub multiplicity: u32,
}

/// Contigs as vertices, joined end to end where a fork k-mer extension of
/// one contig's terminal k-mer is the terminal k-mer of another.
#[derive(Clone, Debug)]
pub struct ContigGraph {
    pub k: usize,
    pub contigs: Vec<Contig>,
    adj: Vec<[Vec<Link>; 2]>,
    alive: Vec<bool>,
    /// Extension ends with above-noise support that match no contig end.
    pub open_ends: usize,
}

/// Outward-facing k-mer at an end: the last k-mer for `End`, the reverse
/// complement of the first for `Start`.
fn outward_kmer(c: &Contig, end: End, k: usize) -> Kmer {
    match end {
        End::End => kmer_at(&c.seq, c.len() - k, k),
        End::Start => kmer_at(&c.seq, 0, k).revcomp(k),
    }
}

impl ContigGraph {
    pub fn build(
        workers: &Workers,
        contigs: Vec<Contig>,
        table: &KmerTable,
        params: &KmerParams,
    ) -> Self {
        let k = params.k;
        let nw = workers.count();
        // canonical terminal k-mer -> (contig, end, inward-facing k-mer)
        let mut index: ShardedMap<Kmer, Vec<(usize, End, Kmer)>> =
            ShardedMap::new(nw, table.shard_count());
        workers.run(|w| {
            let mut u = index
                .updater(|shard, key, v: (usize, End, Kmer)| {
                    shard.table.entry(key).or_default().push(v)
                })
                .expect("update phase");
            for (i, c) in contigs.iter().enumerate().skip(w).step_by(nw) {
                for end in [End::Start, End::End] {
                    let inward = outward_kmer(c, end, k).revcomp(k);
                    u.batched_update(inward.canonical(k).0, (i, end, inward));
                }
            }
            u.finish();
        });
        index.begin_phase(Phase::ReadOnly).expect("flushed");

        let found = workers.run(|w| {
            let mut cache = SoftCache::new(DEFAULT_CACHE_CAPACITY);
            let mut links = Vec::new();
            let mut open = 0usize;
            for (i, c) in contigs.iter().enumerate().skip(w).step_by(nw) {
                for end in [End::Start, End::End] {
                    let x = outward_kmer(c, end, k);
                    let Some(rec) = oriented_record(table, x, k) else {
                        continue;
                    };
                    let total: u32 = rec.right.iter().sum();
                    for b in 0..4u8 {
                        let support = if rec.from_prev_contigs && total == 0 {
                            if rec.contig_right == Ext::Base(b) {
                                1
                            } else {
                                0
                            }
                        } else if rec.right[b as usize] >= params.epsilon {
                            rec.right[b as usize]
                        } else {
                            0
                        };
                        if support == 0 {
                            continue;
                        }
                        let y = x.push_right(b, k);
                        let targets = index
                            .cached_get(&mut cache, &y.canonical(k).0)
                            .expect("read phase");
                        let mut matched = false;
                        for &(d, dend, inward) in targets.iter().flatten() {
                            if inward != y {
                                continue;
                            }
                            matched = true;
                            let back = oriented_record(table, y, k)
                                .map_or(0, |r| r.left[x.first(k) as usize]);
                            let m = if back > 0 { support.min(back) } else { support };
                            links.push((EndRef::new(i, end), EndRef::new(d, dend), m));
                        }
                        if !matched {
                            open += 1;
                        }
                    }
                }
            }
            (links, open)
        });

        let mut edges: BTreeMap<(EndRef, EndRef), u32> = BTreeMap::new();
        let mut open_ends = 0;
        for (links, open) in found {
            open_ends += open;
            for (a, b, m) in links {
                let key = if a <= b { (a, b) } else { (b, a) };
                edges
                    .entry(key)
                    .and_modify(|v| *v = (*v).min(m))
                    .or_insert(m);
            }
        }
        let mut g = ContigGraph {
            k,
            adj: vec![[Vec::new(), Vec::new()]; contigs.len()],
            alive: vec![true; contigs.len()],
            contigs,
            open_ends,
        };
        for ((a, b), m) in edges {
            g.add_link(a, b, m);
        }
        g
    }

    /// Graph over `contigs` with explicit links (duplicates keep the
    /// smaller multiplicity).
    pub fn from_edges(k: usize, contigs: Vec<Contig>, links: &[(EndRef, EndRef, u32)]) -> Self {
        let mut edges: BTreeMap<(EndRef, EndRef), u32> = BTreeMap::new();
        for &(a, b, m) in links {
            let key = if a <= b { (a, b) } else { (b, a) };
            edges
                .entry(key)
                .and_modify(|v| *v = (*v).min(m))
                .or_insert(m);
        }
        let mut g = ContigGraph {
            k,
            adj: vec![[Vec::new(), Vec::new()]; contigs.len()],
            alive: vec![true; contigs.len()],
            contigs,
            open_ends: 0,
        };
        for ((a, b), m) in edges {
            g.add_link(a, b, m);
        }
        g
    }

    fn add_link(&mut self, a: EndRef, b: EndRef, m: u32) {
        self.adj[a.contig][a.end.index()].push(Link {
            to: b,
            multiplicity: m,
        });
        if a != b {
            self.adj[b.contig][b.end.index()].push(Link {
                to: a,
                multiplicity: m,
            });
        }
    }

    pub fn len(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    /// Links at an end to contigs that are still present.
    pub fn links(&self, e: EndRef) -> impl Iterator<Item = &Link> + '_ {
        self.adj[e.contig][e.end.index()]
            .iter()
            .filter(|l| self.alive[l.to.contig])
    }

    pub fn degree(&self, e: EndRef) -> usize {
        self.links(e).count()
    }

    /// Present contigs adjacent to `i` (either end), without duplicates.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = [End::Start, End::End]
            .iter()
            .flat_map(|&e| self.links(EndRef::new(i, e)).map(|l| l.to.contig))
            .filter(|&j| j != i)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn remove(&mut self, i: usize) {
        self.alive[i] = false;
    }

    /// Normalised edge list between present contigs.
    pub fn edges(&self) -> Vec<(EndRef, EndRef, u32)> {
        let mut out = Vec::new();
        for i in 0..self.contigs.len() {
            if !self.alive[i] {
                continue;
            }
            for e in [End::Start, End::End] {
                let a = EndRef::new(i, e);
                for l in self.links(a) {
                    if a <= l.to {
                        out.push((a, l.to, l.multiplicity));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// TSV edge list: contig_a, end_a, contig_b, end_b, multiplicity.
    pub fn dump_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (a, b, m) in self.edges() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                self.contigs[a.contig].id,
                a.end.as_str(),
                self.contigs[b.contig].id,
                b.end.as_str(),
                m
            )?;
        }
        Ok(())
    }

    /// Present contigs, renumbered.
    pub fn into_contigs(self) -> Vec<Contig> {
        let mut out: Vec<Contig> = self
            .contigs
            .into_iter()
            .zip(self.alive)
            .filter_map(|(c, a)| a.then_some(c))
            .collect();
        renumber(&mut out);
        out
    }

    /// Sequence of contig `i` read starting from end `from`.
    fn oriented_seq(&self, i: usize, from: End) -> PackedSeq {
        match from {
            End::Start => self.contigs[i].seq.clone(),
            End::End => revcomp(&self.contigs[i].seq),
        }
    }

    /// Simple bubbles: two equal-length contigs each attached by exactly one
    /// link at either end to the same pair of ends, and nothing else attached
    /// there. The deeper branch survives (ties go to the smaller sequence)
    /// and takes on both depths; chains that become unambiguous are spliced.
    pub fn merge_bubbles(&mut self, workers: &Workers) -> BubbleStats {
        let mut groups: BTreeMap<(EndRef, EndRef), Vec<usize>> = BTreeMap::new();
        for i in 0..self.contigs.len() {
            if !self.alive[i] {
                continue;
            }
            let s = EndRef::new(i, End::Start);
            let e = EndRef::new(i, End::End);
            if self.degree(s) != 1 || self.degree(e) != 1 {
                continue;
            }
            let a = self.links(s).next().unwrap().to;
            let b = self.links(e).next().unwrap().to;
            if a.contig == i || b.contig == i || a == b {
                continue;
            }
            groups.entry((a.min(b), a.max(b))).or_default().push(i);
        }
        let mut stats = BubbleStats::default();
        for ((u, v), branches) in groups {
            if branches.len() != 2 || self.degree(u) != 2 || self.degree(v) != 2 {
                continue;
            }
            let (x, y) = (branches[0], branches[1]);
            if !self.alive[x] || !self.alive[y] || self.contigs[x].len() != self.contigs[y].len() {
                continue;
            }
            let from_u = |g: &Self, i: usize| {
                let start_at_u = g.links(EndRef::new(i, End::Start)).next().unwrap().to == u;
                g.oriented_seq(i, if start_at_u { End::Start } else { End::End })
            };
            let (sx, sy) = (from_u(self, x), from_u(self, y));
            let (dx, dy) = (self.contigs[x].depth, self.contigs[y].depth);
            let x_wins = dx > dy || (dx == dy && sx <= sy);
            let (win, lose) = if x_wins { (x, y) } else { (y, x) };
            self.contigs[win].depth += self.contigs[lose].depth;
            self.remove(lose);
            stats.bubbles += 1;
        }
        stats.spliced = self.compact(workers);
        stats
    }

    /// Splices every maximal chain of contigs joined through ends that have
    /// exactly one link each. Chains are found by speculative parallel walks
    /// over per-contig used flags, with a single-worker sweep for walks that
    /// collided. Returns the number of contigs absorbed into longer ones.
    pub fn compact(&mut self, workers: &Workers) -> usize {
        const ABORTED: u64 = u64::MAX;
        let nw = workers.count();
        let mut used: ShardedMap<usize, u64> = ShardedMap::new(nw, 4 * nw);
        used.begin_phase(Phase::ReadWrite).expect("empty map");
        let g = &*self;

        // next contig beyond an outward end, entered at the returned end
        let step = |e: EndRef| -> Option<EndRef> {
            if g.degree(e) != 1 {
                return None;
            }
            let t = g.links(e).next().unwrap().to;
            (t.contig != e.contig && g.degree(t) == 1).then_some(t)
        };
        let claim = |i: usize, id: u64, sweep: bool| -> Option<bool> {
            let cas = |expected| {
                used.atomic_rw(i, AtomicOp::CompareAndSwap { expected, new: id })
                    .expect("rw phase")
            };
            match cas(None) {
                AtomicOutcome::Applied(_) => Some(true),
                AtomicOutcome::Rejected(cur) if cur == id => Some(false),
                AtomicOutcome::Rejected(ABORTED) if sweep => {
                    cas(Some(ABORTED)).succeeded().then_some(true)
                }
                _ => None,
            }
        };
        let release = |ids: &[usize], id: u64| {
            for &i in ids {
                let _ = used.atomic_rw(
                    i,
                    AtomicOp::CompareAndSwap {
                        expected: Some(id),
                        new: ABORTED,
                    },
                );
            }
        };
        // Some(path of (contig, entered-from end)), None on collision
        let extend = |mut out: EndRef, id: u64, sweep: bool| -> Result<Vec<EndRef>, Vec<EndRef>> {
            let mut path = Vec::new();
            while let Some(t) = step(out) {
                match claim(t.contig, id, sweep) {
                    Some(true) => {}
                    Some(false) => break,
                    None => return Err(path),
                }
                path.push(t);
                out = t.opposite();
            }
            Ok(path)
        };
        let walk = |seed: usize, id: u64, sweep: bool| -> Option<Vec<(usize, End)>> {
            let right = match extend(EndRef::new(seed, End::End), id, sweep) {
                Ok(p) => p,
                Err(p) => {
                    release(&p.iter().map(|e| e.contig).collect::<Vec<_>>(), id);
                    release(&[seed], id);
                    return None;
                }
            };
            let left = match extend(EndRef::new(seed, End::Start), id, sweep) {
                Ok(p) => p,
                Err(p) => {
                    let mut all: Vec<usize> = p.iter().chain(&right).map(|e| e.contig).collect();
                    all.push(seed);
                    release(&all, id);
                    return None;
                }
            };
            // (contig, end it is read from) in left-to-right order
            let mut path: Vec<(usize, End)> = left
                .iter()
                .rev()
                .map(|e| (e.contig, e.end.other()))
                .collect();
            path.push((seed, End::Start));
            path.extend(right.iter().map(|e| (e.contig, e.end)));
            Some(path)
        };

        let mut paths: Vec<Vec<(usize, End)>> = Vec::new();
        let per_worker = workers.run(|w| {
            let mut out = Vec::new();
            let mut aborted = 0;
            for seed in (w..g.contigs.len()).step_by(nw) {
                if !g.alive[seed] {
                    continue;
                }
                let id = ((w as u64) << 40) | seed as u64;
                if claim(seed, id, false) != Some(true) {
                    continue;
                }
                match walk(seed, id, false) {
                    Some(p) => out.push(p),
                    None => aborted += 1,
                }
            }
            (out, aborted)
        });
        let mut aborted = 0;
        for (out, a) in per_worker {
            paths.extend(out);
            aborted += a;
        }
        if aborted > 0 {
            let mut pending: Vec<usize> = Vec::new();
            for s in 0..used.shard_count() {
                pending.extend(
                    used.shard_read(s)
                        .table
                        .iter()
                        .filter(|(_, &v)| v == ABORTED)
                        .map(|(&i, _)| i),
                );
            }
            pending.sort_unstable();
            let base = (nw as u64) << 40;
            for seed in pending {
                let id = base + seed as u64 + (1 << 39);
                if claim(seed, id, true) == Some(true) {
                    paths.push(walk(seed, id, true).expect("sweep walks cannot collide"));
                }
            }
        }
        // orientation and cycle rotation must not depend on the seed
        let mut paths: Vec<Vec<(usize, End)>> = paths
            .into_iter()
            .map(|p| {
                let (first, last) = (p[0], p[p.len() - 1]);
                let cycle = step(EndRef::new(last.0, last.1.other()))
                    == Some(EndRef::new(first.0, first.1));
                canonical_path(p, cycle)
            })
            .collect();
        paths.sort_unstable();
        self.apply_paths(paths)
    }

    fn apply_paths(&mut self, paths: Vec<Vec<(usize, End)>>) -> usize {
        let k = self.k;
        let mut absorbed = 0;
        let mut remap: HashMap<EndRef, EndRef> = HashMap::new();
        let mut contigs = Vec::with_capacity(paths.len());
        for (ni, path) in paths.iter().enumerate() {
            let (first, first_from) = path[0];
            let (last, last_from) = *path.last().unwrap();
            remap.insert(EndRef::new(first, first_from), EndRef::new(ni, End::Start));
            remap.insert(
                EndRef::new(last, last_from.other()),
                EndRef::new(ni, End::End),
            );
            if path.len() == 1 {
                let mut c = self.contigs[first].clone();
                if first_from == End::End {
                    c.seq = revcomp(&c.seq);
                }
                contigs.push(c);
                continue;
            }
            absorbed += path.len() - 1;
            let mut seq = self.oriented_seq(first, first_from);
            let mut weighted = self.contigs[first].depth * self.contigs[first].kmer_count(k) as f64;
            let mut kmers = self.contigs[first].kmer_count(k);
            for &(i, from) in &path[1..] {
                let s = self.oriented_seq(i, from);
                debug_assert_eq!(
                    s.codes_range(0, k - 1),
                    seq.codes_range(seq.len() - (k - 1), seq.len())
                );
                seq.extend_codes(s.codes_range(k - 1, s.len()));
                weighted += self.contigs[i].depth * self.contigs[i].kmer_count(k) as f64;
                kmers += self.contigs[i].kmer_count(k);
            }
            contigs.push(Contig::new(ni as u32, seq, weighted / kmers as f64));
        }
        let mut adj = vec![[Vec::new(), Vec::new()]; contigs.len()];
        for (old, new) in &remap {
            for l in self.links(*old) {
                if let Some(&to) = remap.get(&l.to) {
                    adj[new.contig][new.end.index()].push(Link {
                        to,
                        multiplicity: l.multiplicity,
                    });
                }
            }
        }
        for ends in adj.iter_mut() {
            for v in ends.iter_mut() {
                v.sort_unstable_by_key(|l| (l.to, l.multiplicity));
                v.dedup();
            }
        }
        self.alive = vec![true; contigs.len()];
        self.contigs = contigs;
        self.adj = adj;
        absorbed
    }

    /// Removes short contigs (< 2k) with at most one connected end.
    pub fn remove_hair(&mut self) -> usize {
        let k = self.k;
        let hair: Vec<usize> = (0..self.contigs.len())
            .filter(|&i| self.alive[i] && self.contigs[i].len() < 2 * k)
            .filter(|&i| {
                [End::Start, End::End]
                    .iter()
                    .filter(|&&e| self.degree(EndRef::new(i, e)) > 0)
                    .count()
                    <= 1
            })
            .collect();
        for &i in &hair {
            self.remove(i);
        }
        hair.len()
    }

    /// Mean depth of adjacent present contigs; 0 without neighbours.
    pub fn neighbors_depth(&self, i: usize) -> f64 {
        let n = self.neighbors(i);
        if n.is_empty() {
            0.0
        } else {
            n.iter().map(|&j| self.contigs[j].depth).sum::<f64>() / n.len() as f64
        }
    }

    /// Iterative pruning with a geometrically growing depth cutoff. Each
    /// round is synchronous: every worker evaluates its contigs against the
    /// graph as it stood at the start of the round.
    pub fn prune(&mut self, workers: &Workers, params: &PruneParams) -> PruneStats {
        let k = self.k;
        let nw = workers.count();
        let max_depth = (0..self.contigs.len())
            .filter(|&i| self.alive[i])
            .map(|i| self.contigs[i].depth)
            .fold(0.0, f64::max);
        let mut tau = 1.0;
        let mut stats = PruneStats::default();
        while tau < max_depth {
            stats.rounds += 1;
            let g = &*self;
            let removed: Vec<Vec<usize>> = workers.run(|w| {
                (w..g.contigs.len())
                    .step_by(nw)
                    .filter(|&i| g.alive[i])
                    .filter(|&i| {
                        let c = &g.contigs[i];
                        c.len() <= 2 * k && c.depth <= tau.min(params.beta * g.neighbors_depth(i))
                    })
                    .collect()
            });
            let pruned_flag = removed
                .iter()
                .map(|v| !v.is_empty() as u8)
                .max()
                .unwrap_or(0);
            for i in removed.into_iter().flatten() {
                self.remove(i);
                stats.removed += 1;
            }
            if pruned_flag == 0 {
                break;
            }
            tau *= 1.0 + params.alpha;
        }
        stats.final_tau = tau;
        stats
    }
}

/// The smaller of a chain and its reverse; a cycle is first rotated to
/// start at its smallest contig.
fn canonical_path(path: Vec<(usize, End)>, cycle: bool) -> Vec<(usize, End)> {
    let reversed = |p: &[(usize, End)]| -> Vec<(usize, End)> {
        p.iter().rev().map(|&(i, e)| (i, e.other())).collect()
    };
    let rotated = |mut p: Vec<(usize, End)>| {
        if cycle {
            let at = (0..p.len()).min_by_key(|&j| p[j]).unwrap_or(0);
            p.rotate_left(at);
        }
        p
    };
    let rev = rotated(reversed(&path));
    let fwd = rotated(path);
    fwd.min(rev)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BubbleStats {
    pub bubbles: usize,
    pub spliced: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PruneParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams {
            alpha: 0.1,
            beta: 0.5,
        }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.alpha <= 0.0 {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(format!("beta must be in (0, 1], got {}", self.beta));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PruneStats {
    pub rounds: usize,
    pub removed: usize,
    pub final_tau: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contig(len: usize, depth: f64) -> Contig {
        let codes: Vec<u8> = (0..len).map(|i| ((i * 7 + i / 3) % 4) as u8).collect();
        Contig::new(0, PackedSeq::from_codes(&codes), depth)
    }

    fn graph(contigs: Vec<Contig>, k: usize, links: &[(usize, End, usize, End)]) -> ContigGraph {
        let n = contigs.len();
        let mut g = ContigGraph {
            k,
            contigs,
            adj: vec![[Vec::new(), Vec::new()]; n],
            alive: vec![true; n],
            open_ends: 0,
        };
        for &(a, ea, b, eb) in links {
            g.add_link(EndRef::new(a, ea), EndRef::new(b, eb), 1);
        }
        g
    }

    #[test]
    fn hair_boundary() {
        let k = 11;
        let mut g = graph(
            vec![
                contig(100, 10.0),
                contig(2 * k - 1, 10.0),
                contig(2 * k, 10.0),
            ],
            k,
            &[(0, End::End, 1, End::Start), (0, End::End, 2, End::Start)],
        );
        assert_eq!(g.remove_hair(), 1);
        assert!(g.is_alive(0) && !g.is_alive(1) && g.is_alive(2));
    }

    #[test]
    fn prune_examples() {
        let w = Workers::new(2);
        // short low-depth contig between two deep ones
        let mut g = graph(
            vec![contig(200, 100.0), contig(40, 1.0), contig(200, 100.0)],
            31,
            &[(0, End::End, 1, End::Start), (1, End::End, 2, End::Start)],
        );
        let s = g.prune(
            &w,
            &PruneParams {
                alpha: 0.1,
                beta: 0.1,
            },
        );
        assert!(!g.is_alive(1));
        assert_eq!(s.removed, 1);

        let mut g = graph(
            vec![contig(200, 100.0), contig(40, 15.0), contig(200, 100.0)],
            31,
            &[(0, End::End, 1, End::Start), (1, End::End, 2, End::Start)],
        );
        g.prune(
            &w,
            &PruneParams {
                alpha: 0.1,
                beta: 0.1,
            },
        );
        assert!(g.is_alive(1));

        let mut g = graph(
            vec![contig(200, 5.0), contig(300, 50.0)],
            31,
            &[(0, End::End, 1, End::Start)],
        );
        let s = g.prune(&w, &PruneParams::default());
        assert_eq!((s.rounds, s.removed), (1, 0));
    }

    #[test]
    fn bubble_keeps_deeper_branch_and_splices() {
        let k = 5;
        // entry ACGTTGA, branches GAcCT / GAgCT style sharing k-1 overlaps
        let entry = PackedSeq::from_acgt("TTACGTTGAC");
        let b1 = PackedSeq::from_acgt("TGACAGCTA");
        let b2 = PackedSeq::from_acgt("TGACTGCTA");
        let exit = PackedSeq::from_acgt("GCTAAACCG");
        let mut g = graph(
            vec![
                Contig::new(0, entry, 10.0),
                Contig::new(1, b1, 2.0),
                Contig::new(2, b2, 10.0),
                Contig::new(3, exit, 10.0),
            ],
            k,
            &[
                (0, End::End, 1, End::Start),
                (0, End::End, 2, End::Start),
                (1, End::End, 3, End::Start),
                (2, End::End, 3, End::Start),
            ],
        );
        let w = Workers::new(2);
        let s = g.merge_bubbles(&w);
        assert_eq!(s.bubbles, 1);
        assert_eq!(s.spliced, 2);
        let out = g.into_contigs();
        assert_eq!(out.len(), 1);
        let seq = out[0].seq.to_acgt();
        let rc = revcomp(&out[0].seq).to_acgt();
        assert!(
            seq == "TTACGTTGACTGCTAAACCG" || rc == "TTACGTTGACTGCTAAACCG",
            "{seq}"
        );
        // 6 + 5 + 5 k-mers at depths 10, 12, 10
        let expect = (6.0 * 10.0 + 5.0 * 12.0 + 5.0 * 10.0) / 16.0;
        assert!((out[0].depth - expect).abs() < 1e-9);
    }

    #[test]
    fn equal_depth_bubble_tie_break() {
        let k = 5;
        let mk = |b: &str, d| Contig::new(0, PackedSeq::from_acgt(b), d);
        let mut g = graph(
            vec![
                mk("TTACGTTGAC", 5.0),
                mk("TGACTGCTA", 5.0),
                mk("TGACAGCTA", 5.0),
                mk("GCTAAACCG", 5.0),
            ],
            k,
            &[
                (0, End::End, 1, End::Start),
                (0, End::End, 2, End::Start),
                (1, End::End, 3, End::Start),
                (2, End::End, 3, End::Start),
            ],
        );
        g.merge_bubbles(&Workers::new(1));
        let out = g.into_contigs();
        let s = out[0].seq.to_acgt();
        let s = if s.starts_with("TTAC") {
            s
        } else {
            revcomp(&out[0].seq).to_acgt()
        };
        assert_eq!(s, "TTACGTTGACAGCTAAACCG");
    }

    #[test]
    fn no_bubbles_no_change() {
        let mut g = graph(vec![contig(50, 3.0), contig(60, 3.0)], 11, &[]);
        let s = g.merge_bubbles(&Workers::new(2));
        assert_eq!(s, BubbleStats::default());
        assert_eq!(g.len(), 2);
    }
}
