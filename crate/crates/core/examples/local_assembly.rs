//! Extends contigs into their gaps by mer-walks over the reads that align
//! to them or whose mates do.

use deskmer::align::{align_reads, AlignParams, SeedIndex};
use deskmer::contig::Contig;
use deskmer::localasm::{gather_reads, run_local_assembly, WalkParams};
use deskmer::seqio::{PackedSeq, ReadLibrary};
use deskmer::simeval::{simulate_reads, CommunityProfile, SimConfig};
use deskmer::workers::Workers;

fn main() {
    let library = ReadLibrary::new(300.0, 30.0, 100);
    let config = SimConfig {
        genome_lengths: vec![12_000],
        pairs: 6_000,
        error_rate: 0.0,
        seed: 2,
        ..SimConfig::default()
    };
    let profile = CommunityProfile::from_config(&config, library).unwrap();
    let workers = Workers::new(2);
    let pairs = simulate_reads(&workers, &profile).pairs;

    // three pieces of the genome separated by 400-base holes
    let codes = profile.genomes[0].seq.to_codes();
    let pieces = [(500, 3_500), (3_900, 7_000), (7_400, 11_000)];
    let contigs: Vec<Contig> = pieces
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Contig::new(i as u32, PackedSeq::from_codes(&codes[a..b]), 25.0))
        .collect();

    let params = AlignParams::default();
    let index = SeedIndex::build(&workers, &contigs, params.seed_len);
    let alignments = align_reads(&workers, std::slice::from_ref(&pairs), &index, &params);
    let sets = gather_reads(&contigs, &alignments, &pairs, &library);
    for (c, s) in contigs.iter().zip(&sets) {
        println!(
            "contig {} ({} bp): {} reads gathered",
            c.id,
            c.len(),
            s.len()
        );
    }

    let walk = WalkParams::for_k(33, library.read_length);
    let (extended, stats) = run_local_assembly(&workers, &contigs, &sets, &walk, 1);
    println!(
        "{} contigs extended by {} bases in total",
        stats.extended_contigs, stats.added_bases
    );
    for (before, after) in contigs.iter().zip(&extended) {
        println!(
            "contig {}: {} -> {} bp",
            before.id,
            before.len(),
            after.len()
        );
    }
}
