mod common;

use deskmer::contig::to_fasta;
use deskmer::pipeline::{run_contig_generation, PipelineConfig, Timings};
use deskmer::seqio::write_fasta_to;
use deskmer::workers::Workers;

fn contigs_fasta(workers: usize, pairs: &[deskmer::seqio::ReadPair]) -> Vec<u8> {
    let mut config = PipelineConfig {
        threads: workers,
        ..Default::default()
    };
    config.assemble.k_schedule = vec![21, 33];
    let w = Workers::new(workers);
    let contigs =
        run_contig_generation(&config, &w, pairs.to_vec(), None, &mut Timings::default()).unwrap();
    let mut out = Vec::new();
    write_fasta_to(&mut out, &to_fasta(&contigs)).unwrap();
    out
}

#[test]
fn contigs_identical_for_any_worker_count() {
    let mut r = common::rng(31);
    let genomes = vec![
        common::genome("a", &common::random_text(12_000, &mut r)),
        common::genome("b", &common::random_text(8_000, &mut r)),
    ];
    let pairs = common::simulate(genomes, vec![3.0, 1.0], 0.01, 6_000, 31);
    let one = contigs_fasta(1, &pairs);
    assert!(!one.is_empty());
    for w in [2, 3, 5, 3] {
        assert_eq!(contigs_fasta(w, &pairs), one, "W={w}");
    }
}
