//! Orders and orients contig fragments of two genomes into scaffolds using
//! splinting reads and spanning pairs, then fills the gaps.

use deskmer::contig::Contig;
use deskmer::pipeline::{run_scaffolding, PipelineConfig, Timings};
use deskmer::seqio::{revcomp, PackedSeq};
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn main() {
    let config = PipelineConfig {
        threads: 4,
        simulate: SimConfig {
            genome_lengths: vec![20_000, 15_000],
            abundances: vec![1.0, 1.0],
            pairs: 10_000,
            error_rate: 0.005,
            seed: 12,
            ..SimConfig::default()
        },
        ..PipelineConfig::default()
    };
    let workers = Workers::new(config.worker_count());
    let profile =
        CommunityProfile::from_config(&config.simulate, config.library.library()).unwrap();
    let pairs = simulate_reads(&workers, &profile).pairs;

    // cut each genome every 2.5 kb, leaving 150-base holes, and flip every
    // other piece
    let mut contigs = Vec::new();
    for g in &profile.genomes {
        let codes = g.seq.to_codes();
        let mut start = 0;
        while start < codes.len() {
            let end = (start + 2_500).min(codes.len());
            let mut seq = PackedSeq::from_codes(&codes[start..end]);
            if contigs.len() % 2 == 1 {
                seq = revcomp(&seq);
            }
            contigs.push(Contig::new(contigs.len() as u32, seq, 20.0));
            start = end + 150;
        }
    }

    let mut timings = Timings::default();
    let out = run_scaffolding(&config, &workers, &contigs, &pairs, &mut timings).unwrap();
    println!(
        "{} contigs -> {} scaffolds",
        contigs.len(),
        out.scaffolds.len()
    );
    println!("{} aggregated links", out.links.links().len());
    let g = &out.gap_stats;
    println!(
        "gaps {}: splint {}, mer-walk {}, overlap {}, N-filled {}",
        g.gaps, g.splint, g.mer_walk, g.overlap_merged, g.n_filled
    );
    for s in &out.scaffolds {
        let order: Vec<String> = s
            .layout
            .iter()
            .map(|e| format!("{}{}", e.contig, if e.reverse { "-" } else { "+" }))
            .collect();
        println!("scaffold_{} {} bp: {}", s.id, s.len(), order.join(" "));
    }
}
