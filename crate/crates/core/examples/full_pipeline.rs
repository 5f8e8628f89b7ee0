//! Simulates a small community, assembles it over the k schedule 21, 33,
//! 55, scaffolds the contigs and evaluates both against the references.

use deskmer::pipeline::{run_contig_generation, run_scaffolding, PipelineConfig, Timings};
use deskmer::seqio::MaskedSeq;
use deskmer::simeval::{evaluate, simulate_reads, CommunityProfile};
use deskmer::workers::Workers;

fn main() {
    let mut config = PipelineConfig::from_toml(
        r#"
        threads = 4
        [simulate]
        genome_lengths = [20000, 30000, 40000]
        pairs = 40000
        error_rate = 0.01
        seed = 17
        [assemble]
        k_schedule = [21, 33, 55]
        "#,
    )
    .expect("config");
    config.set_seed(17);
    let workers = Workers::new(config.worker_count());
    let profile =
        CommunityProfile::from_config(&config.simulate, config.library.library()).unwrap();
    let pairs = simulate_reads(&workers, &profile).pairs;

    let mut timings = Timings::default();
    let contigs =
        run_contig_generation(&config, &workers, pairs.clone(), None, &mut timings).unwrap();
    let scaffolds = run_scaffolding(&config, &workers, &contigs, &pairs, &mut timings).unwrap();

    let contig_seqs: Vec<MaskedSeq> = contigs.iter().map(|c| c.seq.clone().into()).collect();
    let scaffold_seqs: Vec<MaskedSeq> = scaffolds.scaffolds.iter().map(|s| s.seq.clone()).collect();
    for (label, seqs) in [("contigs", &contig_seqs), ("scaffolds", &scaffold_seqs)] {
        let r = evaluate(&workers, seqs, &profile.genomes, None, &config.evaluate);
        println!("== {label}");
        print!("{}", r.to_text());
    }
    println!("== timing");
    timings.write_tsv(&mut std::io::stdout()).unwrap();
}
