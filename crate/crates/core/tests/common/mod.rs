//! Fixtures and serial reference implementations shared by the test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deskmer::contig::Contig;
use deskmer::refine::{End, EndRef};
use deskmer::scaffold::{ContigEnd, ContigLink, LinkKind};
use deskmer::seqio::{encode, MaskedSeq, PackedSeq, ReadLibrary, ReadPair};
use deskmer::simeval::{simulate_reads, CommunityProfile, Genome};
use deskmer::workers::Workers;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_text(len: usize, rng: &mut impl Rng) -> String {
    (0..len)
        .map(|_| b"ACGT"[rng.gen_range(0..4)] as char)
        .collect()
}

pub fn revcomp_text(s: &str) -> String {
    s.bytes()
        .rev()
        .map(|b| match b {
            b'A' => 'T',
            b'C' => 'G',
            b'G' => 'C',
            b'T' => 'A',
            _ => 'N',
        })
        .collect()
}

pub fn genome(name: &str, text: &str) -> Genome {
    Genome {
        name: name.into(),
        seq: PackedSeq::from_acgt(text),
    }
}

pub fn library() -> ReadLibrary {
    ReadLibrary::new(300.0, 30.0, 100)
}

/// Simulated pairs over explicit genomes.
pub fn simulate(
    genomes: Vec<Genome>,
    weights: Vec<f64>,
    error: f64,
    pairs: usize,
    seed: u64,
) -> Vec<ReadPair> {
    let profile = CommunityProfile::new(genomes, weights, error, library(), pairs, seed)
        .expect("valid profile");
    simulate_reads(&Workers::new(1), &profile).pairs
}

/// Error-free pairs tiling `text` with fragments starting every `stride` bases.
pub fn tiled_pairs(text: &str, insert: usize, read_len: usize, stride: usize) -> Vec<ReadPair> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + insert <= text.len() {
        let frag = &text[pos..pos + insert];
        out.push(ReadPair {
            id: out.len() as u64,
            r1: encode(&frag[..read_len]).unwrap(),
            r2: encode(&revcomp_text(&frag[insert - read_len..])).unwrap(),
            library_id: 0,
        });
        pos += stride;
    }
    out
}

pub fn contains_either_strand(genome: &str, piece: &str) -> bool {
    genome.contains(piece) || genome.contains(&revcomp_text(piece))
}

// ---------------------------------------------------------------------------
// k-mer counting reference

#[derive(Default, Clone)]
struct Tally {
    count: u32,
    left: [u32; 4],
    right: [u32; 4],
}

fn idx(b: u8) -> Option<usize> {
    b"ACGT".iter().position(|&x| x == b)
}

fn comp(b: u8) -> u8 {
    match b {
        b'A' => b'T',
        b'C' => b'G',
        b'G' => b'C',
        b'T' => b'A',
        x => x,
    }
}

fn code(t: &[u32; 4], threshold: u32) -> char {
    let over: Vec<usize> = (0..4).filter(|&i| t[i] > threshold).collect();
    match over.len() {
        0 => 'X',
        1 => b"ACGT"[over[0]] as char,
        _ => 'F',
    }
}

/// Serial count over the text of every read, sorted TSV of the k-mers seen
/// at least `epsilon` times.
pub fn brute_force_kmer_tsv(pairs: &[ReadPair], k: usize, epsilon: u32, t_hq_ext: u32) -> String {
    let mut table: BTreeMap<String, Tally> = BTreeMap::new();
    for p in pairs {
        for read in [&p.r1, &p.r2] {
            let text = read.decode().into_bytes();
            if text.len() < k {
                continue;
            }
            for i in 0..=text.len() - k {
                let w = &text[i..i + k];
                if w.contains(&b'N') {
                    continue;
                }
                let left = if i > 0 { idx(text[i - 1]) } else { None };
                let right = text.get(i + k).and_then(|&b| idx(b));
                let fwd = String::from_utf8(w.to_vec()).unwrap();
                let rc = revcomp_text(&fwd);
                let (key, l, r) = if rc < fwd {
                    let l = right.map(|b| idx(comp(b"ACGT"[b])).unwrap());
                    let r = left.map(|b| idx(comp(b"ACGT"[b])).unwrap());
                    (rc, l, r)
                } else {
                    (fwd, left, right)
                };
                let t = table.entry(key).or_default();
                t.count += 1;
                if let Some(b) = l {
                    t.left[b] += 1;
                }
                if let Some(b) = r {
                    t.right[b] += 1;
                }
            }
        }
    }
    let mut out = String::new();
    for (km, t) in table {
        if t.count < epsilon {
            continue;
        }
        let nums: Vec<String> = t
            .left
            .iter()
            .chain(t.right.iter())
            .map(|n| n.to_string())
            .collect();
        out.push_str(&format!(
            "{km}\t{}\t{}\t{}\t{}\n",
            t.count,
            nums.join("\t"),
            code(&t.left, t_hq_ext),
            code(&t.right, t_hq_ext)
        ));
    }
    out
}

/// Random pairs drawn from a random genome, with occasional `N` bases and a
/// short tandem repeat so some k-mers are very frequent.
pub fn random_count_dataset(seed: u64) -> Vec<ReadPair> {
    let mut r = rng(seed);
    let glen = r.gen_range(3_000..40_000);
    let mut text = random_text(glen, &mut r);
    let unit = random_text(r.gen_range(3..12), &mut r);
    let at = r.gen_range(0..glen - 1);
    text.insert_str(at, &unit.repeat(60));
    let n = r.gen_range(2_000..50_000);
    let err = [0.0, 0.005, 0.01, 0.02][r.gen_range(0..4)];
    let bytes = text.as_bytes();
    (0..n)
        .map(|id| {
            let mate = |r: &mut ChaCha8Rng| {
                let len = r.gen_range(30..=120).min(bytes.len());
                let s = r.gen_range(0..=bytes.len() - len);
                let mut v = bytes[s..s + len].to_vec();
                if r.gen_bool(0.5) {
                    v = revcomp_text(std::str::from_utf8(&v).unwrap()).into_bytes();
                }
                for b in v.iter_mut() {
                    if r.gen::<f64>() < err {
                        *b = b"ACGT"[(idx(*b).unwrap() + r.gen_range(1..4)) % 4];
                    }
                    if r.gen::<f64>() < 0.002 {
                        *b = b'N';
                    }
                }
                encode(std::str::from_utf8(&v).unwrap()).unwrap()
            };
            ReadPair {
                id: id as u64,
                r1: mate(&mut r),
                r2: mate(&mut r),
                library_id: 0,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// graph pruning reference

pub struct GraphFixture {
    pub k: usize,
    pub contigs: Vec<Contig>,
    pub edges: Vec<(EndRef, EndRef, u32)>,
}

pub fn random_graph(seed: u64, max_vertices: usize) -> GraphFixture {
    let mut r = rng(seed);
    let k = 21;
    let n = r.gen_range(2..=max_vertices);
    let contigs: Vec<Contig> = (0..n)
        .map(|i| {
            let len = if r.gen_bool(0.7) {
                r.gen_range(k..=2 * k)
            } else {
                r.gen_range(2 * k + 1..6 * k)
            };
            let depth = match r.gen_range(0..4) {
                0 => r.gen_range(0.2..1.5),
                1 => r.gen_range(1.0..6.0),
                _ => r.gen_range(2.0..80.0),
            };
            let codes: Vec<u8> = (0..len).map(|_| r.gen_range(0..4u8)).collect();
            Contig::new(i as u32, PackedSeq::from_codes(&codes), depth)
        })
        .collect();
    let m = r.gen_range(0..=2 * n);
    let end = |r: &mut ChaCha8Rng| {
        EndRef::new(
            r.gen_range(0..n),
            if r.gen_bool(0.5) {
                End::Start
            } else {
                End::End
            },
        )
    };
    let edges = (0..m)
        .map(|_| (end(&mut r), end(&mut r), r.gen_range(1..20)))
        .collect();
    GraphFixture { k, contigs, edges }
}

/// Round-synchronous pruning evaluated serially; returns the surviving
/// contig ids.
pub fn serial_prune(g: &GraphFixture, alpha: f64, beta: f64) -> BTreeSet<usize> {
    let n = g.contigs.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b, _) in &g.edges {
        if a.contig != b.contig {
            adj[a.contig].insert(b.contig);
            adj[b.contig].insert(a.contig);
        }
    }
    let mut alive = vec![true; n];
    let max_depth = g.contigs.iter().map(|c| c.depth).fold(0.0, f64::max);
    let mut tau = 1.0;
    while tau < max_depth {
        let mut doomed = Vec::new();
        for i in 0..n {
            if !alive[i] || g.contigs[i].len() > 2 * g.k {
                continue;
            }
            let nb: Vec<f64> = adj[i]
                .iter()
                .filter(|&&j| alive[j])
                .map(|&j| g.contigs[j].depth)
                .collect();
            let nd = if nb.is_empty() {
                0.0
            } else {
                nb.iter().sum::<f64>() / nb.len() as f64
            };
            if g.contigs[i].depth <= tau.min(beta * nd) {
                doomed.push(i);
            }
        }
        if doomed.is_empty() {
            break;
        }
        for i in doomed {
            alive[i] = false;
        }
        tau *= 1.0 + alpha;
    }
    (0..n).filter(|&i| alive[i]).collect()
}

// ---------------------------------------------------------------------------
// connected components reference

pub fn random_links(seed: u64, max_vertices: usize) -> (usize, Vec<ContigLink>) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=max_vertices);
    let m = r.gen_range(0..=n + n / 2);
    let end = |r: &mut ChaCha8Rng| {
        ContigEnd::new(
            r.gen_range(0..n as u32),
            if r.gen_bool(0.5) {
                End::Start
            } else {
                End::End
            },
        )
    };
    let links = (0..m)
        .map(|_| {
            let (x, y) = (end(&mut r), end(&mut r));
            let (a, b) = if x <= y { (x, y) } else { (y, x) };
            ContigLink {
                a,
                b,
                kind: if r.gen_bool(0.5) {
                    LinkKind::Span
                } else {
                    LinkKind::Splint
                },
                support: r.gen_range(1..6),
                gap: r.gen_range(-50..300),
                gap_sd: 5.0,
            }
        })
        .collect();
    (n, links)
}

/// Labels by depth-first search: every vertex gets the smallest id of its
/// component.
pub fn dfs_components(n: usize, links: &[ContigLink], min_support: u32) -> Vec<u32> {
    let mut adj = vec![Vec::new(); n];
    for l in links.iter().filter(|l| l.support >= min_support) {
        adj[l.a.contig as usize].push(l.b.contig as usize);
        adj[l.b.contig as usize].push(l.a.contig as usize);
    }
    let mut label = vec![u32::MAX; n];
    for s in 0..n {
        if label[s] != u32::MAX {
            continue;
        }
        let mut stack = vec![s];
        label[s] = s as u32;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if label[u] == u32::MAX {
                    label[u] = s as u32;
                    stack.push(u);
                }
            }
        }
    }
    label
}

pub fn masked(text: &str) -> MaskedSeq {
    encode(text).unwrap()
}
