mod common;

use deskmer::refine::End;
use deskmer::refine::{ContigGraph, PruneParams};
use deskmer::scaffold::{aggregate_links, connected_components, ContigEnd, Evidence, LinkKind};
use deskmer::workers::Workers;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prune_matches_serial_rounds(seed in any::<u64>(), alpha in 0.05f64..0.5, beta in 0.1f64..1.0, workers in 1usize..6) {
        let fx = common::random_graph(seed, 80);
        let mut g = ContigGraph::from_edges(fx.k, fx.contigs.clone(), &fx.edges);
        g.prune(&Workers::new(workers), &PruneParams { alpha, beta });
        let got: Vec<usize> = (0..fx.contigs.len()).filter(|&i| g.is_alive(i)).collect();
        let want: Vec<usize> = common::serial_prune(&fx, alpha, beta).into_iter().collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn components_match_dfs(seed in any::<u64>(), min_support in 1u32..4, workers in 1usize..6) {
        let (n, links) = common::random_links(seed, 150);
        let got = connected_components(&Workers::new(workers), n, &links, min_support);
        prop_assert_eq!(got, common::dfs_components(n, &links, min_support));
    }

    #[test]
    fn link_aggregation_ignores_partitioning(seed in any::<u64>(), workers in 2usize..6, min_support in 1u32..4) {
        let mut r = common::rng(seed);
        let end = |r: &mut rand_chacha::ChaCha8Rng| ContigEnd::new(r.gen_range(0..12), if r.gen_bool(0.5) { End::Start } else { End::End });
        let ev: Vec<Evidence> = (0..r.gen_range(0..300))
            .map(|_| {
                let kind = if r.gen_bool(0.3) { LinkKind::Splint } else { LinkKind::Span };
                Evidence::new(end(&mut r), end(&mut r), kind, r.gen_range(-40..400))
            })
            .collect();
        let serial = aggregate_links(&Workers::new(1), std::slice::from_ref(&ev), min_support);
        let parts: Vec<Vec<Evidence>> = (0..workers).map(|w| ev.iter().skip(w).step_by(workers).copied().collect()).collect();
        let parallel = aggregate_links(&Workers::new(workers), &parts, min_support);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        serial.dump_tsv(&mut a).unwrap();
        parallel.dump_tsv(&mut b).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn isolated_short_low_contig_pruned() {
    use deskmer::contig::Contig;
    use deskmer::refine::EndRef;
    use deskmer::seqio::PackedSeq;
    let c = |len: usize, d: f64| Contig::new(0, PackedSeq::from_codes(&vec![1u8; len]), d);
    // 0 - 1 - 2 with a thin short middle
    let contigs = vec![c(100, 40.0), c(30, 0.8), c(100, 40.0)];
    let edges = vec![
        (EndRef::new(0, End::End), EndRef::new(1, End::Start), 3),
        (EndRef::new(1, End::End), EndRef::new(2, End::Start), 3),
    ];
    let mut g = ContigGraph::from_edges(21, contigs, &edges);
    let s = g.prune(&Workers::new(2), &PruneParams::default());
    assert_eq!(s.removed, 1);
    assert!(!g.is_alive(1) && g.is_alive(0) && g.is_alive(2));
}
