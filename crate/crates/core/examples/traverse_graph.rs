//! Builds contigs from a k-mer table by mutual-extension walks and checks
//! every contig against the table.

use deskmer::contig::n50;
use deskmer::dbg::{traverse, verify_contig};
use deskmer::kmercount::{count_pass, split_blocks, KmerParams};
use deskmer::seqio::ReadLibrary;
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn main() {
    let config = SimConfig {
        genome_lengths: vec![40_000],
        pairs: 12_000,
        error_rate: 0.005,
        seed: 21,
        ..SimConfig::default()
    };
    let profile =
        CommunityProfile::from_config(&config, ReadLibrary::new(300.0, 30.0, 100)).unwrap();
    let workers = Workers::new(4);
    let pairs = simulate_reads(&workers, &profile).pairs;
    let params = KmerParams::default();
    let (table, _) = count_pass(&workers, &split_blocks(pairs, 4), &params, 16);

    let (contigs, stats) = traverse(&workers, &table, &params);
    let lens: Vec<usize> = contigs.iter().map(|c| c.len()).collect();
    println!(
        "{} walks ({} aborted, {} in the sweep), {} k-mers claimed",
        stats.walks, stats.aborted_walks, stats.sweep_walks, stats.claimed_kmers
    );
    println!(
        "{} contigs, N50 {}, longest {}",
        contigs.len(),
        n50(&lens),
        lens.iter().max().unwrap_or(&0)
    );
    let valid = contigs
        .iter()
        .filter(|c| verify_contig(&table, c, &params))
        .count();
    println!(
        "{valid}/{} contigs are unique-extension paths of the table",
        contigs.len()
    );
}
