//! Fixed-width k-mers packed into a `u128` (k ≤ 63).
//!
//! The first base occupies the most significant bits, so numeric order on
//! the packed value equals lexicographic order on the `ACGT` string.

use std::fmt;

use crate::seqio::{code_base, complement, MaskedSeq, PackedSeq};

pub const MAX_K: usize = 63;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Kmer(pub u128);

#[inline]
fn mask(k: usize) -> u128 {
    (1u128 << (2 * k)) - 1
}

impl Kmer {
    pub fn from_codes(codes: &[u8]) -> Kmer {
        debug_assert!(codes.len() <= MAX_K);
        Kmer(codes.iter().fold(0u128, |acc, &c| (acc << 2) | c as u128))
    }

    pub fn from_acgt(text: &str) -> Kmer {
        let codes: Vec<u8> = text
            .bytes()
            .map(|b| crate::seqio::base_code(b).expect("ACGT k-mer"))
            .collect();
        Kmer::from_codes(&codes)
    }

    /// Base at position `i` (0 = first).
    #[inline]
    pub fn base(self, i: usize, k: usize) -> u8 {
        ((self.0 >> (2 * (k - 1 - i))) & 3) as u8
    }

    #[inline]
    pub fn first(self, k: usize) -> u8 {
        self.base(0, k)
    }

    #[inline]
    pub fn last(self) -> u8 {
        (self.0 & 3) as u8
    }

    pub fn revcomp(self, k: usize) -> Kmer {
        let mut x = self.0;
        let mut out = 0u128;
        for _ in 0..k {
            out = (out << 2) | (3 - (x & 3));
            x >>= 2;
        }
        Kmer(out)
    }

    /// The lexicographically smaller of the k-mer and its reverse complement,
    /// plus whether that required flipping.
    #[inline]
    pub fn canonical(self, k: usize) -> (Kmer, bool) {
        let rc = self.revcomp(k);
        if rc < self {
            (rc, true)
        } else {
            (self, false)
        }
    }

    /// Drop the first base and append `b`.
    #[inline]
    pub fn push_right(self, b: u8, k: usize) -> Kmer {
        Kmer(((self.0 << 2) | b as u128) & mask(k))
    }

    /// Drop the last base and prepend `b`.
    #[inline]
    pub fn push_left(self, b: u8, k: usize) -> Kmer {
        Kmer((self.0 >> 2) | ((b as u128) << (2 * (k - 1))))
    }

    pub fn codes(self, k: usize) -> Vec<u8> {
        (0..k).map(|i| self.base(i, k)).collect()
    }

    pub fn to_string(self, k: usize) -> String {
        (0..k).map(|i| code_base(self.base(i, k)) as char).collect()
    }

    pub fn display(self, k: usize) -> KmerDisplay {
        KmerDisplay(self, k)
    }
}

pub struct KmerDisplay(Kmer, usize);

impl fmt::Display for KmerDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_string(self.1))
    }
}

/// Forward k-mer at `pos` of a packed sequence.
pub fn kmer_at(seq: &PackedSeq, pos: usize, k: usize) -> Kmer {
    let mut v = 0u128;
    for i in pos..pos + k {
        v = (v << 2) | seq.get(i) as u128;
    }
    Kmer(v)
}

/// Rolling forward/reverse-complement k-mer state.
#[derive(Clone, Copy)]
pub struct Roller {
    k: usize,
    fwd: u128,
    rc: u128,
    filled: usize,
}

impl Roller {
    pub fn new(k: usize) -> Self {
        assert!((1..=MAX_K).contains(&k), "k must be in 1..={MAX_K}");
        Roller {
            k,
            fwd: 0,
            rc: 0,
            filled: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, c: u8) {
        self.fwd = ((self.fwd << 2) | c as u128) & mask(self.k);
        self.rc = (self.rc >> 2) | ((complement(c) as u128) << (2 * (self.k - 1)));
        self.filled = (self.filled + 1).min(self.k);
    }

    pub fn reset(&mut self) {
        self.filled = 0;
        self.fwd = 0;
        self.rc = 0;
    }

    #[inline]
    pub fn ready(&self) -> bool {
        self.filled == self.k
    }

    #[inline]
    pub fn forward(&self) -> Kmer {
        Kmer(self.fwd)
    }

    #[inline]
    pub fn canonical(&self) -> (Kmer, bool) {
        if self.rc < self.fwd {
            (Kmer(self.rc), true)
        } else {
            (Kmer(self.fwd), false)
        }
    }
}

/// Iterates `(position, forward k-mer)` over all windows of `seq` that do
/// not overlap a masked base.
pub fn windows(
    seq: &MaskedSeq,
    k: usize,
) -> impl Iterator<Item = (usize, Kmer, (Kmer, bool))> + '_ {
    let mut roller = Roller::new(k);
    let mask = seq.n_mask.positions();
    let mut next_mask = 0usize;
    (0..seq.len()).filter_map(move |i| {
        if next_mask < mask.len() && mask[next_mask] as usize == i {
            next_mask += 1;
            roller.reset();
            return None;
        }
        roller.push(seq.seq.get(i));
        if roller.ready() {
            Some((i + 1 - k, roller.forward(), roller.canonical()))
        } else {
            None
        }
    })
}
