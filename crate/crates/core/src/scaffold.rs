//! Scaffolding: contig links from split reads (splints) and read pairs
//! (spans), connected components of the link graph, per-component
//! traversal with repeat suspension, and gap closing.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::{AlignmentRecord, AlignmentSet, Strand};
use crate::contig::Contig;
use crate::localasm::{read_codes, walk_extension, WalkParams};
use crate::refine::End;
use crate::seqio::{
    revcomp_codes, FastaRecord, MaskedSeq, NMask, PackedSeq, ReadLibrary, ReadPair,
};
use crate::shardstore::{Phase, ShardedMap};
use crate::workers::{chunk_range, Workers};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContigEnd {
    pub contig: u32,
    pub end: End,
}

impl ContigEnd {
    pub fn new(contig: u32, end: End) -> Self {
        ContigEnd { contig, end }
    }

    pub fn opposite(self) -> Self {
        ContigEnd::new(self.contig, self.end.other())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    Splint,
    Span,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Splint => "SPLINT",
            LinkKind::Span => "SPAN",
        }
    }
}

/// One observation of two contig ends being adjacent at a given distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub a: ContigEnd,
    pub b: ContigEnd,
    pub kind: LinkKind,
    pub gap: i64,
}

impl Evidence {
    pub fn new(x: ContigEnd, y: ContigEnd, kind: LinkKind, gap: i64) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Evidence { a, b, kind, gap }
    }
}

/// End a read alignment points at: reading 5'→3', a `Plus` read runs toward
/// the contig end, a `Minus` read toward the contig start. Returns the end
/// and the distance from the read's projected 5' end to it.
pub fn pointed_end(r: &AlignmentRecord) -> (End, i64) {
    let p = r.projected_read_start();
    match r.strand {
        Strand::Plus => (End::End, r.contig_len as i64 - p),
        Strand::Minus => (End::Start, p),
    }
}

/// Reads aligned to exactly two different contigs, each reaching the contig
/// end that faces the other part of the read.
pub fn find_splints(alignments: &AlignmentSet) -> Vec<Evidence> {
    let mut per_read: BTreeMap<(u64, u8), Vec<&AlignmentRecord>> = BTreeMap::new();
    for r in &alignments.records {
        per_read.entry((r.read_id, r.mate)).or_default().push(r);
    }
    let mut out = Vec::new();
    for recs in per_read.values() {
        if recs.len() != 2 || recs[0].contig == recs[1].contig {
            continue;
        }
        let (x, y) = if recs[0].read_start <= recs[1].read_start {
            (recs[0], recs[1])
        } else {
            (recs[1], recs[0])
        };
        if x.read_start == y.read_start || x.read_end >= y.read_end {
            continue;
        }
        // the read leaves x and enters y
        let (x_end, x_ok) = match x.strand {
            Strand::Plus => (End::End, x.flags.reaches_contig_end),
            Strand::Minus => (End::Start, x.flags.reaches_contig_start),
        };
        let (y_end, y_ok) = match y.strand {
            Strand::Plus => (End::Start, y.flags.reaches_contig_start),
            Strand::Minus => (End::End, y.flags.reaches_contig_end),
        };
        if !(x_ok && y_ok) {
            continue;
        }
        let gap = y.read_start as i64 - x.read_end as i64;
        out.push(Evidence::new(
            ContigEnd::new(x.contig, x_end),
            ContigEnd::new(y.contig, y_end),
            LinkKind::Splint,
            gap,
        ));
    }
    out
}

/// Best alignment of a mate if it is unambiguous.
fn unique_best(recs: &[&AlignmentRecord]) -> Option<AlignmentRecord> {
    let best = recs.iter().map(|r| r.score()).max()?;
    let top: Vec<_> = recs.iter().filter(|r| r.score() == best).collect();
    (top.len() == 1).then(|| **top[0])
}

/// Pairs whose mates align to different contigs, each pointing toward the
/// end that would lead to the other mate in an innie library.
pub fn find_spans(alignments: &AlignmentSet, library: &ReadLibrary) -> Vec<Evidence> {
    let reach = library.insert_size_mean + 3.0 * library.insert_size_sd;
    let min_gap = -(3.0 * library.insert_size_sd + library.read_length as f64);
    let mut out = Vec::new();
    for recs in alignments.by_read().values() {
        let m1: Vec<&AlignmentRecord> = recs.iter().filter(|r| r.mate == 1).collect();
        let m2: Vec<&AlignmentRecord> = recs.iter().filter(|r| r.mate == 2).collect();
        let (Some(a), Some(b)) = (unique_best(&m1), unique_best(&m2)) else {
            continue;
        };
        if a.contig == b.contig {
            continue;
        }
        let (ea, da) = pointed_end(&a);
        let (eb, db) = pointed_end(&b);
        if da as f64 > reach || db as f64 > reach || da < 0 || db < 0 {
            continue;
        }
        let gap = library.insert_size_mean - da as f64 - db as f64;
        if gap < min_gap {
            continue;
        }
        out.push(Evidence::new(
            ContigEnd::new(a.contig, ea),
            ContigEnd::new(b.contig, eb),
            LinkKind::Span,
            gap.round() as i64,
        ));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContigLink {
    pub a: ContigEnd,
    pub b: ContigEnd,
    pub kind: LinkKind,
    pub support: u32,
    pub gap: i64,
    pub gap_sd: f64,
}

impl ContigLink {
    pub fn other(&self, e: ContigEnd) -> ContigEnd {
        if e == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Lower median.
pub fn median(v: &mut [i64]) -> i64 {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

/// Median absolute deviation around the lower median.
pub fn mad(v: &[i64]) -> f64 {
    let mut w = v.to_vec();
    let m = median(&mut w);
    let mut dev: Vec<i64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev) as f64
}

fn summarize(a: ContigEnd, b: ContigEnd, kind: LinkKind, gaps: &[i64]) -> ContigLink {
    let mut v = gaps.to_vec();
    ContigLink {
        a,
        b,
        kind,
        support: gaps.len() as u32,
        gap: median(&mut v),
        gap_sd: mad(gaps),
    }
}

type EndPair = (ContigEnd, ContigEnd);

/// Aggregated links, keyed by end pair, sealed read-only.
pub struct LinkSet {
    map: ShardedMap<EndPair, ContigLink>,
}

impl LinkSet {
    pub fn links(&self) -> Vec<ContigLink> {
        self.map
            .to_sorted_vec()
            .into_iter()
            .map(|(_, l)| l)
            .collect()
    }

    pub fn get(&self, a: ContigEnd, b: ContigEnd) -> Option<ContigLink> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.map.get(&key).expect("sealed links")
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// TSV: end_a, end_b, kind, support, gap, sd.
    pub fn dump_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for l in self.links() {
            writeln!(
                w,
                "{}.{}\t{}.{}\t{}\t{}\t{}\t{:.1}",
                l.a.contig,
                l.a.end.as_str(),
                l.b.contig,
                l.b.end.as_str(),
                l.kind.as_str(),
                l.support,
                l.gap,
                l.gap_sd
            )?;
        }
        Ok(())
    }
}

/// Accumulates evidence (worker `w` streams `evidence[w]`) and assesses each
/// end pair on its owner: splint and span evidence are summarised
/// separately and a splint link is preferred when it has enough support.
pub fn aggregate_links(workers: &Workers, evidence: &[Vec<Evidence>], min_support: u32) -> LinkSet {
    let nw = workers.count();
    let mut acc: ShardedMap<EndPair, (Vec<i64>, Vec<i64>)> = ShardedMap::new(nw, 4 * nw);
    workers.run(|w| {
        let mut u = acc
            .updater(|shard, key, (kind, gap): (LinkKind, i64)| {
                let e = shard.table.entry(key).or_default();
                match kind {
                    LinkKind::Splint => e.0.push(gap),
                    LinkKind::Span => e.1.push(gap),
                }
            })
            .expect("update phase");
        for ev in evidence.get(w).into_iter().flatten() {
            u.batched_update((ev.a, ev.b), (ev.kind, ev.gap));
        }
        u.finish();
    });
    acc.begin_phase(Phase::LocalOnly).expect("flushed");
    let assessed: Vec<Vec<ContigLink>> = workers.run(|w| {
        let lt = acc.local_table(w).expect("local phase");
        let mut out = Vec::new();
        lt.for_each_owned(|_, shard| {
            for (&(a, b), (splints, spans)) in shard.table.iter() {
                if splints.len() as u32 >= min_support {
                    out.push(summarize(a, b, LinkKind::Splint, splints));
                } else if spans.len() as u32 >= min_support {
                    out.push(summarize(a, b, LinkKind::Span, spans));
                }
            }
        });
        out
    });
    let mut map: ShardedMap<EndPair, ContigLink> = ShardedMap::new(nw, 4 * nw);
    workers.run(|w| {
        let mut u = map
            .updater(|shard, key, l: ContigLink| {
                shard.table.insert(key, l);
            })
            .expect("update phase");
        for l in &assessed[w] {
            u.batched_update((l.a, l.b), *l);
        }
        u.finish();
    });
    map.begin_phase(Phase::ReadOnly).expect("flushed");
    LinkSet { map }
}

/// Component label (smallest contig id) of every contig, joining contigs
/// that share a link with at least `min_support`. Rounds of min-label
/// hooking over the links alternate with pointer jumping until nothing
/// changes.
pub fn connected_components(
    workers: &Workers,
    n: usize,
    links: &[ContigLink],
    min_support: u32,
) -> Vec<u32> {
    let label: Vec<AtomicU32> = (0..n as u32).map(AtomicU32::new).collect();
    let edges: Vec<(u32, u32)> = links
        .iter()
        .filter(|l| l.support >= min_support && l.a.contig != l.b.contig)
        .map(|l| (l.a.contig, l.b.contig))
        .collect();
    let nw = workers.count();
    loop {
        let changed = AtomicBool::new(false);
        workers.run(|w| {
            for &(u, v) in &edges[chunk_range(edges.len(), nw, w)] {
                let lu = label[u as usize].load(Ordering::Relaxed);
                let lv = label[v as usize].load(Ordering::Relaxed);
                if lu < lv {
                    if label[lv as usize].fetch_min(lu, Ordering::Relaxed) > lu {
                        changed.store(true, Ordering::Relaxed);
                    }
                } else if lv < lu && label[lu as usize].fetch_min(lv, Ordering::Relaxed) > lv {
                    changed.store(true, Ordering::Relaxed);
                }
            }
        });
        workers.run(|w| {
            for i in chunk_range(n, nw, w) {
                loop {
                    let l = label[i].load(Ordering::Relaxed);
                    let ll = label[l as usize].load(Ordering::Relaxed);
                    if ll >= l {
                        break;
                    }
                    label[i].fetch_min(ll, Ordering::Relaxed);
                    changed.store(true, Ordering::Relaxed);
                }
            }
        });
        if !changed.load(Ordering::Relaxed) {
            break;
        }
    }
    label.into_iter().map(|a| a.into_inner()).collect()
}

/// A contig suspended during traversal, to be re-placed in the gap it was
/// jumped over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Suspended {
    pub contig: u32,
    pub reverse: bool,
    pub gap_before: i64,
    pub gap_after: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaffoldEntry {
    pub contig: u32,
    pub reverse: bool,
    /// Estimated gap to the next entry (unused on the last entry).
    pub gap_after: i64,
    pub gap_sd: f64,
    pub suspended: Vec<Suspended>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scaffold {
    pub id: u32,
    pub entries: Vec<ScaffoldEntry>,
}

impl Scaffold {
    pub fn contigs(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries
            .iter()
            .flat_map(|e| std::iter::once(e.contig).chain(e.suspended.iter().map(|s| s.contig)))
    }
}

/// Veto on extending through a contig end, for rules beyond link
/// competition.
pub trait EndClassifier: Sync {
    fn extendable(&self, end: ContigEnd) -> bool;
}

pub struct AnyEnd;

impl EndClassifier for AnyEnd {
    fn extendable(&self, _: ContigEnd) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraverseParams {
    pub long_threshold: usize,
    pub insert_size_mean: f64,
    pub min_support: u32,
    pub seed: u64,
}

impl Default for TraverseParams {
    fn default() -> Self {
        TraverseParams {
            long_threshold: 800,
            insert_size_mean: 300.0,
            min_support: 2,
            seed: 0,
        }
    }
}

fn similar(x: &ContigLink, y: &ContigLink) -> bool {
    let tol = (3.0 * x.gap_sd.max(y.gap_sd)).max(10.0);
    ((x.gap - y.gap).abs() as f64) <= tol
}

struct Traversal<'a> {
    lens: &'a [usize],
    by_end: HashMap<ContigEnd, Vec<ContigLink>>,
    used: HashMap<u32, bool>,
    params: &'a TraverseParams,
    classifier: &'a dyn EndClassifier,
}

impl Traversal<'_> {
    fn is_used(&self, c: u32) -> bool {
        self.used.get(&c).copied().unwrap_or(false)
    }

    /// Links at `e` to contigs not yet placed (plus `except`).
    fn open_links(&self, e: ContigEnd, except: Option<u32>) -> Vec<ContigLink> {
        let mut v: Vec<ContigLink> = self
            .by_end
            .get(&e)
            .into_iter()
            .flatten()
            .filter(|l| {
                let t = l.other(e).contig;
                t != e.contig && (!self.is_used(t) || Some(t) == except)
            })
            .copied()
            .collect();
        v.sort_by(|x, y| x.gap.cmp(&y.gap).then(x.other(e).cmp(&y.other(e))));
        v
    }

    fn extendable(&self, e: ContigEnd, links: &[ContigLink]) -> bool {
        if !self.classifier.extendable(e) {
            return false;
        }
        !links
            .iter()
            .enumerate()
            .any(|(i, x)| links[i + 1..].iter().any(|y| similar(x, y)))
    }

    /// A contig reached through `e` whose own entry end is unambiguous.
    fn choose(&self, e: ContigEnd, links: &[ContigLink]) -> Option<ContigLink> {
        let ok = |l: &&ContigLink| {
            let t = l.other(e);
            self.extendable(t, &self.open_links(t, Some(e.contig)))
        };
        let long = links
            .iter()
            .filter(|l| self.lens[l.other(e).contig as usize] >= self.params.long_threshold)
            .find(ok);
        long.or_else(|| links.iter().find(ok)).copied()
    }

    /// A short contig `r` that sits between `e` and the target of `jump`:
    /// `e` links to one end of `r`, the other end of `r` links to the
    /// target, and the distances add up.
    fn between(&self, e: ContigEnd, jump: &ContigLink) -> Option<Suspended> {
        let t = jump.other(e);
        let all = self.by_end.get(&e)?;
        for l1 in all {
            let r_in = l1.other(e);
            let r = r_in.contig;
            if r == e.contig
                || r == t.contig
                || self.is_used(r)
                || self.lens[r as usize] as f64 > self.params.insert_size_mean
            {
                continue;
            }
            let r_out = r_in.opposite();
            let Some(l2) = self
                .by_end
                .get(&r_out)
                .and_then(|v| v.iter().find(|l| l.other(r_out) == t))
            else {
                continue;
            };
            let expect = l1.gap + self.lens[r as usize] as i64 + l2.gap;
            let tol = (3.0 * l1.gap_sd.max(l2.gap_sd).max(jump.gap_sd)).max(10.0);
            if ((jump.gap - expect).abs() as f64) <= tol {
                return Some(Suspended {
                    contig: r,
                    reverse: r_in.end == End::End,
                    gap_before: l1.gap,
                    gap_after: l2.gap,
                });
            }
        }
        None
    }

    /// Repeat suspension for an ambiguous end: a span link that jumps over
    /// a short contig to an end that is itself unambiguous once the
    /// repeat is set aside.
    fn suspend(&self, e: ContigEnd, links: &[ContigLink]) -> Option<(ContigLink, Suspended)> {
        for l3 in links.iter().filter(|l| l.kind == LinkKind::Span) {
            let Some(s) = self.between(e, l3) else {
                continue;
            };
            let t = l3.other(e);
            let rest: Vec<ContigLink> = self
                .open_links(t, Some(e.contig))
                .into_iter()
                .filter(|l| l.other(t).contig != s.contig)
                .collect();
            if self.extendable(t, &rest) {
                return Some((*l3, s));
            }
        }
        None
    }

    /// Extends outward from `e`; returns (link taken, suspended contigs) per
    /// step.
    fn extend(&mut self, mut e: ContigEnd) -> Vec<(ContigLink, ContigEnd, Vec<Suspended>)> {
        let mut steps = Vec::new();
        loop {
            let links: Vec<ContigLink> = self.open_links(e, None);
            if links.is_empty() {
                break;
            }
            let direct = if self.extendable(e, &links) {
                self.choose(e, &links)
            } else {
                None
            };
            let (link, suspended) = match direct {
                Some(l) => (l, self.between(e, &l).into_iter().collect()),
                None => match self.suspend(e, &links) {
                    Some((l, s)) => (l, vec![s]),
                    None => break,
                },
            };
            for s in &suspended {
                self.used.insert(s.contig, true);
            }
            let t = link.other(e);
            self.used.insert(t.contig, true);
            steps.push((link, t, suspended));
            e = t.opposite();
        }
        steps
    }

    fn scaffold_from(&mut self, seed: u32) -> Scaffold {
        self.used.insert(seed, true);
        let right = self.extend(ContigEnd::new(seed, End::End));
        let left = self.extend(ContigEnd::new(seed, End::Start));
        let mut entries: Vec<ScaffoldEntry> = Vec::new();
        // left part, outermost first; entered end faces right
        for (link, t, susp) in left.into_iter().rev() {
            entries.push(ScaffoldEntry {
                contig: t.contig,
                reverse: t.end == End::Start,
                gap_after: link.gap,
                gap_sd: link.gap_sd,
                suspended: susp
                    .into_iter()
                    .map(|s| Suspended {
                        reverse: !s.reverse,
                        gap_before: s.gap_after,
                        gap_after: s.gap_before,
                        ..s
                    })
                    .collect(),
            });
        }
        entries.push(ScaffoldEntry {
            contig: seed,
            reverse: false,
            gap_after: 0,
            gap_sd: 0.0,
            suspended: Vec::new(),
        });
        for (link, t, susp) in right {
            let last = entries.last_mut().unwrap();
            last.gap_after = link.gap;
            last.gap_sd = link.gap_sd;
            last.suspended = susp;
            entries.push(ScaffoldEntry {
                contig: t.contig,
                reverse: t.end == End::End,
                gap_after: 0,
                gap_sd: 0.0,
                suspended: Vec::new(),
            });
        }
        Scaffold { id: 0, entries }
    }
}

/// Scaffolds for one component: seeds in order of decreasing length (then
/// id), each extended both ways over unplaced contigs.
pub fn traverse_component(
    component: &[u32],
    links: &[ContigLink],
    lens: &[usize],
    params: &TraverseParams,
    classifier: &dyn EndClassifier,
) -> Vec<Scaffold> {
    let mut by_end: HashMap<ContigEnd, Vec<ContigLink>> = HashMap::new();
    for l in links.iter().filter(|l| l.support >= params.min_support) {
        by_end.entry(l.a).or_default().push(*l);
        if l.b != l.a {
            by_end.entry(l.b).or_default().push(*l);
        }
    }
    let mut t = Traversal {
        lens,
        by_end,
        used: HashMap::new(),
        params,
        classifier,
    };
    let mut seeds = component.to_vec();
    seeds.sort_by_key(|&c| (std::cmp::Reverse(lens[c as usize]), c));
    let mut out = Vec::new();
    for s in seeds {
        if !t.is_used(s) {
            out.push(t.scaffold_from(s));
        }
    }
    out
}

fn scaffold_len(s: &Scaffold, lens: &[usize]) -> i64 {
    s.entries
        .iter()
        .map(|e| lens[e.contig as usize] as i64 + e.gap_after.max(0))
        .sum()
}

/// Scaffolds over all contigs: components are shuffled onto workers and
/// traversed independently; the result is ordered by length, then by
/// smallest contig id, and numbered.
pub fn build_scaffolds(
    workers: &Workers,
    lens: &[usize],
    links: &[ContigLink],
    params: &TraverseParams,
    classifier: &dyn EndClassifier,
) -> Vec<Scaffold> {
    let labels = connected_components(workers, lens.len(), links, params.min_support);
    let mut comps: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (c, &l) in labels.iter().enumerate() {
        comps.entry(l).or_default().push(c as u32);
    }
    let mut comp_links: HashMap<u32, Vec<ContigLink>> = HashMap::new();
    for l in links {
        if labels[l.a.contig as usize] == labels[l.b.contig as usize] {
            comp_links
                .entry(labels[l.a.contig as usize])
                .or_default()
                .push(*l);
        }
    }
    let mut order: Vec<u32> = comps.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let nw = workers.count();
    let empty = Vec::new();
    let per_worker = workers.run(|w| {
        let mut out = Vec::new();
        for label in order.iter().skip(w).step_by(nw) {
            let cl = comp_links.get(label).unwrap_or(&empty);
            out.extend(traverse_component(
                &comps[label],
                cl,
                lens,
                params,
                classifier,
            ));
        }
        out
    });
    let mut all: Vec<Scaffold> = per_worker.into_iter().flatten().collect();
    all.sort_by_key(|s| {
        (
            std::cmp::Reverse(scaffold_len(s, lens)),
            s.contigs().min().unwrap_or(0),
        )
    });
    for (i, s) in all.iter_mut().enumerate() {
        s.id = i as u32;
    }
    all
}

/// Scaffold layout TSV: scaffold id, contig id, orientation, gap_after.
pub fn dump_layout_tsv<W: Write>(scaffolds: &[Scaffold], w: &mut W) -> io::Result<()> {
    for s in scaffolds {
        for (i, e) in s.entries.iter().enumerate() {
            let gap = if i + 1 < s.entries.len() {
                e.gap_after.to_string()
            } else {
                "-".into()
            };
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                s.id,
                e.contig,
                if e.reverse { '-' } else { '+' },
                gap
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloseMethod {
    OverlapMerge,
    Splint,
    MerWalk,
    NFill,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GapStats {
    pub gaps: usize,
    pub overlap_merged: usize,
    pub splint: usize,
    pub mer_walk: usize,
    pub suspended_placed: usize,
    pub n_filled: usize,
    /// Gaps handled per worker.
    pub per_worker: Vec<usize>,
}

/// Result of closing one gap: trim `overlap` bases from the right flank,
/// then insert `fill` (code 4 = N).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Closure {
    pub overlap: usize,
    pub fill: Vec<u8>,
    pub method: CloseMethod,
}

/// Closures, placed and covered suspended contigs of one gap.
type GapOutcome = (Vec<Closure>, Vec<Suspended>, Vec<Suspended>);

fn find_all(hay: &[u8], needle: &[u8]) -> Vec<usize> {
    if needle.is_empty() || hay.len() < needle.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len())
        .filter(|&i| &hay[i..i + needle.len()] == needle)
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct GapParams {
    pub k: usize,
    pub tolerance: i64,
    pub walk: WalkParams,
}

fn n_fill(gap: i64) -> Closure {
    Closure {
        overlap: 0,
        fill: vec![4; gap.max(1) as usize],
        method: CloseMethod::NFill,
    }
}

/// Closes one gap between `left` and `right` (codes, scaffold orientation)
/// whose estimated size is `gap`, falling back to a run of N.
pub fn close_gap(left: &[u8], right: &[u8], gap: i64, reads: &[Vec<u8>], p: &GapParams) -> Closure {
    try_close_gap(left, right, gap, reads, p).unwrap_or_else(|| n_fill(gap))
}

/// Overlap merge for negative gaps, then a read spanning both flanks, then
/// a mer-walk from the left flank that reaches the right flank.
pub fn try_close_gap(
    left: &[u8],
    right: &[u8],
    gap: i64,
    reads: &[Vec<u8>],
    p: &GapParams,
) -> Option<Closure> {
    let tol = p.tolerance;
    let max_ov = left.len().min(right.len());
    if gap < 0 {
        let want = (-gap) as usize;
        let lo = want.saturating_sub(tol as usize).max(10);
        let hi = (want + tol as usize).min(max_ov);
        let mut cands: Vec<usize> = (lo..=hi).collect();
        if want <= max_ov {
            cands.push(want);
        }
        cands.sort_by_key(|&o| ((o as i64 - want as i64).abs(), std::cmp::Reverse(o)));
        for o in cands {
            if o > 0 && left[left.len() - o..] == right[..o] {
                return Some(Closure {
                    overlap: o,
                    fill: Vec::new(),
                    method: CloseMethod::OverlapMerge,
                });
            }
        }
    }
    let a = p.k.min(left.len()).min(right.len());
    if a > 0 {
        let la = &left[left.len() - a..];
        let ra = &right[..a];
        let mut fills: BTreeMap<(i64, Vec<u8>), usize> = BTreeMap::new();
        for r in reads {
            for pl in find_all(r, la) {
                for pr in find_all(r, ra) {
                    let len = pr as i64 - (pl + a) as i64;
                    if (len - gap).abs() > tol {
                        continue;
                    }
                    if len >= 0 {
                        let f = r[pl + a..pr].to_vec();
                        if f.iter().all(|&c| c < 4) {
                            *fills.entry((len, f)).or_default() += 1;
                        }
                    } else if ((-len) as usize) <= max_ov
                        && left[left.len() - (-len) as usize..] == right[..(-len) as usize]
                    {
                        *fills.entry((len, Vec::new())).or_default() += 1;
                    }
                }
            }
        }
        if let Some(((len, fill), _)) = fills.into_iter().max_by(|x, y| {
            x.1.cmp(&y.1)
                .then_with(|| (y.0 .0 - gap).abs().cmp(&(x.0 .0 - gap).abs()))
                .then_with(|| y.0.cmp(&x.0))
        }) {
            return Some(Closure {
                overlap: (-len).max(0) as usize,
                fill,
                method: CloseMethod::Splint,
            });
        }

        let walk = WalkParams {
            max_extension: (gap.max(0) + tol) as usize + a,
            ..p.walk
        };
        let ext = walk_extension(left, reads, &walk);
        if !ext.is_empty() {
            let mut s = left.to_vec();
            s.extend_from_slice(&ext);
            let from = left.len().saturating_sub(a - 1);
            for q in from..=s.len().saturating_sub(a) {
                if s.len() < q + a || &s[q..q + a] != ra {
                    continue;
                }
                let len = q as i64 - left.len() as i64;
                if (len - gap).abs() > tol {
                    continue;
                }
                return Some(Closure {
                    overlap: (-len).max(0) as usize,
                    fill: if len > 0 {
                        s[left.len()..q].to_vec()
                    } else {
                        Vec::new()
                    },
                    method: CloseMethod::MerWalk,
                });
            }
        }
    }
    None
}

/// Final scaffold sequence with its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaffoldSeq {
    pub id: u32,
    pub seq: MaskedSeq,
    pub layout: Vec<ScaffoldEntry>,
}

impl ScaffoldSeq {
    pub fn fasta_record(&self) -> FastaRecord {
        FastaRecord::new(format!("scaffold_{}", self.id), self.seq.clone())
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }
}

fn codes_to_masked(codes: &[u8]) -> MaskedSeq {
    let mask: Vec<u32> = codes
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 3)
        .map(|(i, _)| i as u32)
        .collect();
    let seq = PackedSeq::from_codes(&codes.iter().map(|&c| c & 3).collect::<Vec<u8>>());
    MaskedSeq {
        seq,
        n_mask: NMask::from_positions(mask),
    }
}

fn oriented(contigs: &[Contig], c: u32, reverse: bool) -> Vec<u8> {
    let codes = contigs[c as usize].seq.to_codes();
    if reverse {
        revcomp_codes(&codes)
    } else {
        codes
    }
}

/// Reads relevant to each gap: pairs with a mate pointing into a gap-facing
/// contig end from within `insert_size_mean + 3·insert_size_sd`.
fn gap_reads(
    workers: &Workers,
    scaffolds: &[Scaffold],
    alignments: &AlignmentSet,
    pairs: &[ReadPair],
    library: &ReadLibrary,
) -> Vec<Vec<MaskedSeq>> {
    let mut facing: HashMap<ContigEnd, usize> = HashMap::new();
    let mut ngaps = 0;
    for s in scaffolds {
        for w in s.entries.windows(2) {
            let out_end = if w[0].reverse { End::Start } else { End::End };
            let in_end = if w[1].reverse { End::End } else { End::Start };
            facing.insert(ContigEnd::new(w[0].contig, out_end), ngaps);
            facing.insert(ContigEnd::new(w[1].contig, in_end), ngaps);
            ngaps += 1;
        }
    }
    let reach = library.insert_size_mean + 3.0 * library.insert_size_sd;
    let nw = workers.count();
    let mut acc: ShardedMap<usize, Vec<u64>> = ShardedMap::new(nw, 4 * nw);
    workers.run(|w| {
        let mut u = acc
            .updater(|shard, key, id: u64| shard.table.entry(key).or_default().push(id))
            .expect("update phase");
        let recs = &alignments.records;
        for r in &recs[chunk_range(recs.len(), nw, w)] {
            let (end, dist) = pointed_end(r);
            if dist as f64 > reach {
                continue;
            }
            if let Some(&g) = facing.get(&ContigEnd::new(r.contig, end)) {
                u.batched_update(g, r.read_id);
            }
        }
        u.finish();
    });
    acc.begin_phase(Phase::ReadOnly).expect("flushed");
    let by_id: HashMap<u64, &ReadPair> = pairs.iter().map(|p| (p.id, p)).collect();
    (0..ngaps)
        .map(|g| {
            let mut ids = acc.get(&g).expect("read phase").unwrap_or_default();
            ids.sort_unstable();
            ids.dedup();
            ids.iter()
                .filter_map(|id| by_id.get(id))
                .flat_map(|p| [p.r1.clone(), p.r2.clone()])
                .collect()
        })
        .collect()
}

/// Fills the gaps of every scaffold; gap `i` (numbered across all
/// scaffolds) is handled by worker `i mod W`. Suspended contigs that do not
/// fit their gap become singleton scaffolds.
#[allow(clippy::too_many_arguments)]
pub fn close_gaps(
    workers: &Workers,
    scaffolds: &[Scaffold],
    contigs: &[Contig],
    pairs: &[ReadPair],
    alignments: &AlignmentSet,
    library: &ReadLibrary,
    params: &GapParams,
) -> (Vec<ScaffoldSeq>, GapStats) {
    let reads = gap_reads(workers, scaffolds, alignments, pairs, library);
    let mut gaps: Vec<(usize, usize)> = Vec::new();
    for (si, s) in scaffolds.iter().enumerate() {
        for ei in 0..s.entries.len().saturating_sub(1) {
            gaps.push((si, ei));
        }
    }
    let nw = workers.count();
    // per gap: closures, contigs inserted between them, suspended contigs
    // already spelled out by a direct fill, and unplaced suspended contigs
    type GapResult = (
        usize,
        Vec<Closure>,
        Vec<Suspended>,
        Vec<Suspended>,
        Vec<u32>,
    );
    let per_worker: Vec<Vec<GapResult>> = workers.run(|w| {
        let mut out = Vec::new();
        for g in (w..gaps.len()).step_by(nw) {
            let (si, ei) = gaps[g];
            let entries = &scaffolds[si].entries;
            let (l, r) = (&entries[ei], &entries[ei + 1]);
            let codes = read_codes(reads[g].iter());
            let left = oriented(contigs, l.contig, l.reverse);
            let right = oriented(contigs, r.contig, r.reverse);
            let mut placed = Vec::new();
            let mut covered = Vec::new();
            let mut unplaced = Vec::new();
            let tol = params.tolerance.max((3.0 * l.gap_sd).round() as i64);
            let gp = GapParams {
                tolerance: tol,
                ..*params
            };
            let direct = try_close_gap(&left, &right, l.gap_after, &codes, &gp);
            let closures = match (direct, l.suspended.as_slice()) {
                (Some(c), _) => {
                    for s in &l.suspended {
                        let mid = oriented(contigs, s.contig, s.reverse);
                        if find_all(&c.fill, &mid).is_empty() {
                            unplaced.push(s.contig);
                        } else {
                            covered.push(*s);
                        }
                    }
                    vec![c]
                }
                (None, [s])
                    if (contigs[s.contig as usize].len() as i64 - l.gap_after).abs() <= tol =>
                {
                    let mid = oriented(contigs, s.contig, s.reverse);
                    placed.push(*s);
                    vec![
                        close_gap(&left, &mid, s.gap_before, &codes, &gp),
                        close_gap(&mid, &right, s.gap_after, &codes, &gp),
                    ]
                }
                (None, susp) => {
                    unplaced.extend(susp.iter().map(|s| s.contig));
                    vec![n_fill(l.gap_after)]
                }
            };
            out.push((g, closures, placed, covered, unplaced));
        }
        out
    });

    let mut stats = GapStats {
        gaps: gaps.len(),
        per_worker: per_worker.iter().map(|v| v.len()).collect(),
        ..Default::default()
    };
    let mut results: Vec<Option<GapOutcome>> = vec![None; gaps.len()];
    let mut singletons: Vec<u32> = Vec::new();
    for (g, closures, placed, covered, unplaced) in per_worker.into_iter().flatten() {
        for c in &closures {
            match c.method {
                CloseMethod::OverlapMerge => stats.overlap_merged += 1,
                CloseMethod::Splint => stats.splint += 1,
                CloseMethod::MerWalk => stats.mer_walk += 1,
                CloseMethod::NFill => stats.n_filled += 1,
            }
        }
        stats.suspended_placed += placed.len() + covered.len();
        singletons.extend(unplaced);
        results[g] = Some((closures, placed, covered));
    }

    let mut out = Vec::new();
    let mut g = 0;
    for s in scaffolds {
        let mut seq: Vec<u8> = oriented(contigs, s.entries[0].contig, s.entries[0].reverse);
        let mut layout = Vec::new();
        for (ei, e) in s.entries.iter().enumerate() {
            let mut entry = e.clone();
            if ei + 1 < s.entries.len() {
                let (closures, placed, covered) = results[g].take().expect("every gap closed");
                g += 1;
                let next = &s.entries[ei + 1];
                let mut pieces: Vec<Vec<u8>> = placed
                    .iter()
                    .map(|p| oriented(contigs, p.contig, p.reverse))
                    .collect();
                pieces.push(oriented(contigs, next.contig, next.reverse));
                for (c, piece) in closures.iter().zip(pieces) {
                    seq.extend_from_slice(&c.fill);
                    seq.extend_from_slice(&piece[c.overlap.min(piece.len())..]);
                }
                entry.suspended = placed.into_iter().chain(covered).collect();
            }
            layout.push(entry);
        }
        out.push(ScaffoldSeq {
            id: 0,
            seq: codes_to_masked(&seq),
            layout,
        });
    }
    singletons.sort_unstable();
    singletons.dedup();
    for c in singletons {
        out.push(ScaffoldSeq {
            id: 0,
            seq: MaskedSeq::unmasked(contigs[c as usize].seq.clone()),
            layout: vec![ScaffoldEntry {
                contig: c,
                reverse: false,
                gap_after: 0,
                gap_sd: 0.0,
                suspended: Vec::new(),
            }],
        });
    }
    out.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.layout[0].contig.cmp(&b.layout[0].contig))
    });
    for (i, s) in out.iter_mut().enumerate() {
        s.id = i as u32;
    }
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(a: u32, ea: End, b: u32, eb: End, kind: LinkKind, gap: i64) -> ContigLink {
        let (x, y) = (ContigEnd::new(a, ea), ContigEnd::new(b, eb));
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        ContigLink {
            a: x,
            b: y,
            kind,
            support: 5,
            gap,
            gap_sd: 2.0,
        }
    }

    #[test]
    fn median_and_threshold() {
        let w = Workers::new(2);
        let e = |g| {
            Evidence::new(
                ContigEnd::new(0, End::End),
                ContigEnd::new(1, End::Start),
                LinkKind::Splint,
                g,
            )
        };
        let ev = vec![vec![e(0), e(1), e(0)], vec![e(2), e(0)]];
        let ls = aggregate_links(&w, &ev, 2);
        let l = ls.links();
        assert_eq!(l.len(), 1);
        assert_eq!((l[0].support, l[0].gap), (5, 0));
        let ls = aggregate_links(&w, &[vec![e(0)], vec![]], 2);
        assert!(ls.is_empty());
    }

    #[test]
    fn components_chain() {
        let w = Workers::new(2);
        let links = vec![
            link(0, End::End, 1, End::Start, LinkKind::Span, 10),
            link(1, End::End, 2, End::Start, LinkKind::Span, 10),
            ContigLink {
                support: 1,
                ..link(2, End::End, 3, End::Start, LinkKind::Span, 10)
            },
        ];
        assert_eq!(connected_components(&w, 4, &links, 2), vec![0, 0, 0, 3]);
    }

    #[test]
    fn chain_of_four() {
        let lens = vec![1000, 900, 950, 1100];
        // reference order 3+ 0- 2+ 1+
        let links = vec![
            link(3, End::End, 0, End::End, LinkKind::Span, 20),
            link(0, End::Start, 2, End::Start, LinkKind::Span, 30),
            link(2, End::End, 1, End::Start, LinkKind::Span, 40),
        ];
        let s = traverse_component(
            &[0, 1, 2, 3],
            &links,
            &lens,
            &TraverseParams::default(),
            &AnyEnd,
        );
        assert_eq!(s.len(), 1);
        let order: Vec<(u32, bool)> = s[0].entries.iter().map(|e| (e.contig, e.reverse)).collect();
        let fwd = vec![(3, false), (0, true), (2, false), (1, false)];
        let rev: Vec<(u32, bool)> = fwd.iter().rev().map(|&(c, r)| (c, !r)).collect();
        assert!(order == fwd || order == rev, "{order:?}");
        let gaps: Vec<i64> = s[0].entries.iter().map(|e| e.gap_after).collect();
        assert_eq!(
            &gaps[..3],
            if order == fwd {
                &[20, 30, 40]
            } else {
                &[40, 30, 20]
            }
        );
    }

    #[test]
    fn repeat_suspended() {
        // 1 -> 3(repeat) -> 2 and 4 -> 3 -> 5; span 1 -> 2 jumps the repeat
        let lens = vec![0, 5000, 5000, 200, 5000, 5000];
        let links = vec![
            link(1, End::End, 3, End::Start, LinkKind::Splint, 0),
            link(4, End::End, 3, End::Start, LinkKind::Splint, 0),
            link(3, End::End, 2, End::Start, LinkKind::Splint, 0),
            link(3, End::End, 5, End::Start, LinkKind::Splint, 0),
            link(1, End::End, 2, End::Start, LinkKind::Span, 205),
            link(4, End::End, 5, End::Start, LinkKind::Span, 195),
        ];
        let s = traverse_component(
            &[1, 2, 3, 4, 5],
            &links,
            &lens,
            &TraverseParams::default(),
            &AnyEnd,
        );
        let joined: Vec<Vec<u32>> = s
            .iter()
            .map(|x| x.entries.iter().map(|e| e.contig).collect())
            .collect();
        assert!(joined.contains(&vec![1, 2]), "{joined:?}");
        let one = s.iter().find(|x| x.entries[0].contig == 1).unwrap();
        assert_eq!(one.entries[0].suspended[0].contig, 3);
        assert!(joined.contains(&vec![4, 5]), "{joined:?}");
    }

    #[test]
    fn competing_links_block() {
        let lens = vec![1000, 1000, 1000];
        let links = vec![
            link(0, End::End, 1, End::Start, LinkKind::Span, 20),
            link(0, End::End, 2, End::Start, LinkKind::Span, 25),
        ];
        let s = traverse_component(
            &[0, 1, 2],
            &links,
            &lens,
            &TraverseParams::default(),
            &AnyEnd,
        );
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn gap_closing_rules() {
        let reference = "ACGTTGCAAGGCTTACGATCGGATCCATGGCAATTGCCGATAGCTAGGCTTAACCGTAGCTTGACGATCGA";
        let codes: Vec<u8> = PackedSeq::from_acgt(reference).to_codes();
        let p = GapParams {
            k: 11,
            tolerance: 10,
            walk: WalkParams::for_k(11, 40),
        };
        let left = &codes[..30];
        let right = &codes[42..];
        let read = codes[15..60].to_vec();
        let c = close_gap(left, right, 10, &[read], &p);
        assert_eq!(c.method, CloseMethod::Splint);
        assert_eq!(c.fill, codes[30..42].to_vec());

        let c = close_gap(left, right, 12, &[], &p);
        assert_eq!(c.method, CloseMethod::NFill);
        assert_eq!(c.fill.len(), 12);

        let c = close_gap(&codes[..40], &codes[25..], -15, &[], &p);
        assert_eq!((c.method, c.overlap), (CloseMethod::OverlapMerge, 15));
    }
}
