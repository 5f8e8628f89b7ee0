//! Aligns reads to contigs through the sharded seed index, then moves each
//! read to the worker that owns its contig and aligns again; the second
//! pass hits the per-worker seed cache far more often.

use deskmer::align::{align_reads, localize_reads, AlignParams, SeedIndex};
use deskmer::contig::Contig;
use deskmer::kmercount::split_blocks;
use deskmer::seqio::ReadLibrary;
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn main() {
    let config = SimConfig {
        genome_lengths: vec![25_000; 4],
        abundances: vec![1.0; 4],
        pairs: 30_000,
        seed: 9,
        ..SimConfig::default()
    };
    let profile =
        CommunityProfile::from_config(&config, ReadLibrary::new(300.0, 30.0, 100)).unwrap();
    let workers = Workers::new(4);
    let pairs = simulate_reads(&workers, &profile).pairs;
    // the genomes themselves stand in for assembled contigs
    let contigs: Vec<Contig> = profile
        .genomes
        .iter()
        .enumerate()
        .map(|(i, g)| Contig::new(i as u32, g.seq.clone(), 30.0))
        .collect();

    let params = AlignParams {
        cache_capacity: 4096,
        ..AlignParams::default()
    };
    let index = SeedIndex::build(&workers, &contigs, params.seed_len);
    println!("{} distinct seeds indexed", index.len());

    let blocks = split_blocks(pairs, 4);
    let before = align_reads(&workers, &blocks, &index, &params);
    let local = localize_reads(blocks, &before, 4);
    let after = align_reads(&workers, &local, &index, &params);
    println!("{} alignments", after.records.len());
    println!(
        "cache hit rate {:.3} -> {:.3}",
        before.mean_hit_rate(),
        after.mean_hit_rate()
    );
    let r = &after.records[0];
    println!("first record: {r:?}");
}
