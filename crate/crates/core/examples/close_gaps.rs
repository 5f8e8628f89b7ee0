//! Closes single gaps between two flanks: a read spanning a short gap, a
//! mer-walk across a longer one, and a run of N where no read reaches.

use deskmer::localasm::{read_codes, WalkParams};
use deskmer::scaffold::{close_gap, GapParams};
use deskmer::seqio::{codes_to_string, encode, ReadPair};
use deskmer::simeval::random_genome;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Error-free 300-base fragments every `stride` bases, skipping those that
/// touch `hole`.
fn tiled_reads(codes: &[u8], stride: usize, hole: Option<(usize, usize)>) -> Vec<Vec<u8>> {
    let text = codes_to_string(codes);
    let pairs: Vec<ReadPair> = (0..text.len() - 300)
        .step_by(stride)
        .filter(|&s| hole.is_none_or(|(a, b)| s + 300 <= a || s >= b))
        .enumerate()
        .map(|(i, s)| ReadPair {
            id: i as u64,
            r1: encode(&text[s..s + 100]).unwrap(),
            r2: encode(&text[s + 200..s + 300]).unwrap(),
            library_id: 0,
        })
        .collect();
    read_codes(pairs.iter().flat_map(|p| [&p.r1, &p.r2]))
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let codes = random_genome(3_000, &mut rng).to_codes();
    let p = GapParams {
        k: 21,
        tolerance: 100,
        walk: WalkParams::for_k(21, 100),
    };
    let reads = tiled_reads(&codes, 7, None);

    let c = close_gap(&codes[..1000], &codes[1040..2000], 55, &reads, &p);
    println!(
        "40-base gap: {:?}, fill {} bases, exact {}",
        c.method,
        c.fill.len(),
        c.fill == codes[1000..1040]
    );

    let c = close_gap(&codes[..1000], &codes[1250..2200], 230, &reads, &p);
    println!(
        "250-base gap: {:?}, fill {} bases, exact {}",
        c.method,
        c.fill.len(),
        c.fill == codes[1000..1250]
    );

    let holed = tiled_reads(&codes, 7, Some((1000, 1250)));
    let c = close_gap(&codes[..1000], &codes[1250..2200], 230, &holed, &p);
    println!(
        "250-base gap, no reads inside: {:?}, {} N",
        c.method,
        c.fill.len()
    );
}
