//! Counts canonical 21-mers of simulated reads and prints the most frequent
//! ones with their extension tallies.

use deskmer::kmer::Kmer;
use deskmer::kmercount::{count_pass, split_blocks, KmerParams};
use deskmer::seqio::ReadLibrary;
use deskmer::shardstore::Phase;
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn main() {
    let config = SimConfig {
        genome_lengths: vec![30_000],
        pairs: 15_000,
        seed: 7,
        ..SimConfig::default()
    };
    let profile =
        CommunityProfile::from_config(&config, ReadLibrary::new(300.0, 30.0, 100)).unwrap();
    let workers = Workers::new(4);
    let pairs = simulate_reads(&workers, &profile).pairs;

    let params = KmerParams::default();
    let (table, stats) = count_pass(&workers, &split_blocks(pairs, workers.count()), &params, 16);
    assert_eq!(table.phase(), Phase::ReadOnly);
    println!(
        "{} occurrences, {} Bloom candidates, {} retained (count >= {})",
        stats.occurrences, stats.candidates, stats.retained, params.epsilon
    );

    let mut rows: Vec<(Kmer, _)> = table.to_sorted_vec();
    rows.sort_by_key(|(_, r)| std::cmp::Reverse(r.count));
    println!("kmer\tcount\tleft\tright\thq");
    for (km, r) in rows.iter().take(5) {
        println!(
            "{}\t{}\t{:?}\t{:?}\t{}{}",
            km.display(params.k),
            r.count,
            r.left,
            r.right,
            r.hq_left,
            r.hq_right
        );
    }
}
