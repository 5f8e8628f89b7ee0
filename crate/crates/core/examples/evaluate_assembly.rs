//! Scores a hand-made assembly against its reference: two clean pieces, a
//! chimera joining distant regions, and an inverted join.

use deskmer::seqio::{codes_to_string, encode, revcomp_codes, MaskedSeq};
use deskmer::simeval::{evaluate, random_genome, EvalParams, Genome};
use deskmer::workers::Workers;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seq(codes: &[u8]) -> MaskedSeq {
    encode(&codes_to_string(codes)).unwrap()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let reference = random_genome(40_000, &mut rng);
    let g = reference.to_codes();
    let chimera = [&g[20_000..22_000], &g[35_000..37_000]].concat();
    let inverted = [
        g[24_000..26_000].to_vec(),
        revcomp_codes(&g[27_000..29_000]),
    ]
    .concat();
    let assembly = vec![
        seq(&g[0..15_000]),
        seq(&g[15_000..19_000]),
        seq(&chimera),
        seq(&inverted),
    ];

    let genomes = vec![Genome {
        name: "ref".into(),
        seq: reference,
    }];
    let report = evaluate(
        &Workers::new(2),
        &assembly,
        &genomes,
        None,
        &EvalParams::default(),
    );
    print!("{}", report.to_text());
}
