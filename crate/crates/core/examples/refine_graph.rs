//! Cleans the contig graph of a noisy sample (bubbles, hair, iterative
//! pruning), then prunes a hand-built graph with a weak branch.

use deskmer::contig::n50;
use deskmer::contig::Contig;
use deskmer::dbg::traverse;
use deskmer::kmercount::{count_pass, split_blocks, KmerParams};
use deskmer::refine::{ContigGraph, End, EndRef, PruneParams};
use deskmer::seqio::{PackedSeq, ReadLibrary};
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn summary(label: &str, lens: &[usize]) {
    println!(
        "{label:<8} {:>6} contigs  N50 {:>5}  longest {:>6}  total {:>7}",
        lens.len(),
        n50(lens),
        lens.iter().max().unwrap_or(&0),
        lens.iter().sum::<usize>()
    );
}

fn main() {
    let config = SimConfig {
        genome_lengths: vec![10_000, 10_000],
        abundances: vec![1.0, 0.05],
        pairs: 20_000,
        error_rate: 0.01,
        seed: 5,
        ..SimConfig::default()
    };
    let profile =
        CommunityProfile::from_config(&config, ReadLibrary::new(300.0, 30.0, 100)).unwrap();
    let workers = Workers::new(4);
    let pairs = simulate_reads(&workers, &profile).pairs;
    let params = KmerParams::default();
    let (table, _) = count_pass(&workers, &split_blocks(pairs, 4), &params, 16);
    let (contigs, _) = traverse(&workers, &table, &params);

    let mut graph = ContigGraph::build(&workers, contigs, &table, &params);
    summary("raw", &graph_lengths(&graph));
    let b = graph.merge_bubbles(&workers);
    println!(
        "bubbles merged: {} ({} contigs spliced)",
        b.bubbles, b.spliced
    );
    summary("bubbles", &graph_lengths(&graph));
    println!("hair removed: {}", graph.remove_hair());
    summary("hair", &graph_lengths(&graph));
    let p = graph.prune(&workers, &PruneParams::default());
    println!(
        "pruned {} contigs in {} rounds, final threshold {:.2}",
        p.removed, p.rounds, p.final_tau
    );
    let contigs = graph.into_contigs();
    summary(
        "final",
        &contigs.iter().map(|c| c.len()).collect::<Vec<_>>(),
    );

    // a 40-base branch of depth 1 between two deep contigs goes in the
    // first round; the depth-15 branch is above half its neighbours' depth
    // and stays
    let k = 31;
    let piece = |id: u32, len: usize, depth: f64| {
        Contig::new(id, PackedSeq::from_codes(&vec![(id % 4) as u8; len]), depth)
    };
    let contigs = vec![
        piece(0, 500, 30.0),
        piece(1, 40, 1.0),
        piece(2, 500, 30.0),
        piece(3, 50, 15.0),
    ];
    let e = |c, end| EndRef::new(c, end);
    let links = [
        (e(0, End::End), e(1, End::Start), 1),
        (e(1, End::End), e(2, End::Start), 1),
        (e(0, End::End), e(3, End::Start), 1),
        (e(3, End::End), e(2, End::Start), 1),
    ];
    let mut graph = ContigGraph::from_edges(k, contigs, &links);
    let p = graph.prune(&workers, &PruneParams::default());
    let kept: Vec<usize> = (0..graph.contigs.len())
        .filter(|&i| graph.is_alive(i))
        .collect();
    println!(
        "hand-built graph: pruned {} in {} rounds, kept {kept:?}",
        p.removed, p.rounds
    );
}

fn graph_lengths(g: &ContigGraph) -> Vec<usize> {
    (0..g.contigs.len())
        .filter(|&i| g.is_alive(i))
        .map(|i| g.contigs[i].len())
        .collect()
}
