//! Draws a three-genome community with log-normal abundances and samples
//! read pairs from it.

use deskmer::seqio::ReadLibrary;
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn main() {
    let config = SimConfig {
        genome_lengths: vec![20_000, 30_000, 50_000],
        pairs: 20_000,
        error_rate: 0.01,
        seed: 3,
        ..SimConfig::default()
    };
    let profile = CommunityProfile::from_config(&config, ReadLibrary::new(300.0, 30.0, 100))
        .expect("profile");
    let sim = simulate_reads(&Workers::new(4), &profile);

    let mut per_genome = vec![0usize; profile.genomes.len()];
    for t in &sim.truth {
        per_genome[t.genome] += 1;
    }
    println!("genome\tlength\tweight\tpairs");
    for ((g, w), n) in profile
        .genomes
        .iter()
        .zip(&profile.weights)
        .zip(&per_genome)
    {
        println!("{}\t{}\t{:.3}\t{}", g.name, g.seq.len(), w, n);
    }
    let first = &sim.pairs[0];
    println!("first pair: {} / {}", first.r1.decode(), first.r2.decode());
}
