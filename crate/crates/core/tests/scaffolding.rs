mod common;

use common::{random_text, revcomp_text, rng, simulate};
use deskmer::align::{align_reads, AlignParams, SeedIndex};
use deskmer::contig::Contig;
use deskmer::pipeline::{run_scaffolding, PipelineConfig, Timings};
use deskmer::refine::End;
use deskmer::scaffold::{aggregate_links, find_spans, ContigEnd, LinkKind};
use deskmer::seqio::{PackedSeq, ReadPair};
use deskmer::simeval::{count_misassemblies, ReferenceIndex, ANCHOR_LEN};
use deskmer::workers::Workers;

#[test]
fn span_gap_estimate_matches_layout() {
    let mut r = rng(21);
    let reference = random_text(6000, &mut r);
    let contigs = vec![
        Contig::new(0, PackedSeq::from_acgt(&reference[..2500]), 10.0),
        Contig::new(1, PackedSeq::from_acgt(&reference[2700..5500]), 10.0),
    ];
    let pairs = simulate(
        vec![common::genome("g", &reference)],
        vec![1.0],
        0.0,
        3000,
        21,
    );
    let w = Workers::new(2);
    let params = AlignParams::default();
    let index = SeedIndex::build(&w, &contigs, params.seed_len);
    let halves = vec![pairs[..1500].to_vec(), pairs[1500..].to_vec()];
    let aln = align_reads(&w, &halves, &index, &params);
    let lib = common::library();
    let spans = find_spans(&aln, &lib);
    let links = aggregate_links(&w, &[spans], 2);
    let l = links
        .get(ContigEnd::new(0, End::End), ContigEnd::new(1, End::Start))
        .expect("span link");
    assert_eq!(l.kind, LinkKind::Span);
    assert!(
        (l.gap - 200).abs() as f64 <= 3.0 * lib.insert_size_sd,
        "gap {}",
        l.gap
    );
    assert_eq!(links.len(), 1);
}

#[test]
fn outward_pairs_give_no_span() {
    let mut r = rng(22);
    let reference = random_text(3000, &mut r);
    let contigs = vec![
        Contig::new(0, PackedSeq::from_acgt(&reference[..1400]), 10.0),
        Contig::new(1, PackedSeq::from_acgt(&reference[1500..]), 10.0),
    ];
    // mates read away from each other across the junction
    let pairs: Vec<ReadPair> = (0..10)
        .map(|i| ReadPair {
            id: i,
            r1: common::masked(&revcomp_text(
                &reference[1250 + i as usize..1350 + i as usize],
            )),
            r2: common::masked(&reference[1550 + i as usize..1650 + i as usize]),
            library_id: 0,
        })
        .collect();
    let w = Workers::new(1);
    let params = AlignParams::default();
    let index = SeedIndex::build(&w, &contigs, params.seed_len);
    let aln = align_reads(&w, &[pairs], &index, &params);
    assert!(find_spans(&aln, &common::library()).is_empty());
}

fn cut_reference(seed: u64) -> (String, Vec<Contig>) {
    let mut r = rng(seed);
    let reference = random_text(24_000, &mut r);
    let mut contigs = Vec::new();
    let mut pos = 0;
    while pos < reference.len() {
        let len = 2000 + (contigs.len() * 397) % 1500;
        let end = (pos + len).min(reference.len());
        if end - pos >= 200 {
            contigs.push(Contig::new(
                contigs.len() as u32,
                PackedSeq::from_acgt(&reference[pos..end]),
                20.0,
            ));
        }
        pos = end + 40 + (contigs.len() * 53) % 120;
    }
    (reference, contigs)
}

#[test]
fn scaffolds_identical_across_workers_and_gaps_round_robin() {
    let (reference, contigs) = cut_reference(23);
    let pairs = simulate(
        vec![common::genome("g", &reference)],
        vec![1.0],
        0.0,
        4000,
        23,
    );
    let mut first = None;
    for w in [1, 3, 4] {
        let config = PipelineConfig {
            threads: w,
            ..Default::default()
        };
        let out = run_scaffolding(
            &config,
            &Workers::new(w),
            &contigs,
            &pairs,
            &mut Timings::default(),
        )
        .unwrap();
        let g = out.gap_stats.gaps;
        let expect: Vec<usize> = (0..w).map(|i| (g + w - 1 - i) / w).collect();
        assert_eq!(out.gap_stats.per_worker, expect);
        let seqs: Vec<String> = out.scaffolds.iter().map(|s| s.seq.decode()).collect();
        match &first {
            None => first = Some(seqs),
            Some(f) => assert_eq!(f, &seqs, "W={w}"),
        }
    }
    let seqs = first.unwrap();
    let index = ReferenceIndex::new(&[PackedSeq::from_acgt(&reference)]);
    let asm: Vec<_> = seqs.iter().map(|s| common::masked(s)).collect();
    assert_eq!(count_misassemblies(&asm, &index, ANCHOR_LEN).0, 0);
    assert_eq!(seqs.len(), 1, "one scaffold expected");
    assert!(
        common::contains_either_strand(&reference, &seqs[0]),
        "gaps not closed exactly"
    );
}
