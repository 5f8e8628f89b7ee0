use crate::kmer::{kmer_at, Kmer};
use crate::seqio::{FastaRecord, PackedSeq};

/// An assembled sequence with its mean k-mer depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Contig {
    pub id: u32,
    pub seq: PackedSeq,
    pub depth: f64,
}

impl Contig {
    pub fn new(id: u32, seq: PackedSeq, depth: f64) -> Self {
        Contig { id, seq, depth }
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Canonical first and last k-mers.
    pub fn end_kmers(&self, k: usize) -> (Kmer, Kmer) {
        let n = self.seq.len();
        (
            kmer_at(&self.seq, 0, k).canonical(k).0,
            kmer_at(&self.seq, n - k, k).canonical(k).0,
        )
    }

    pub fn kmer_count(&self, k: usize) -> usize {
        (self.seq.len() + 1).saturating_sub(k)
    }

    pub fn fasta_record(&self) -> FastaRecord {
        FastaRecord::new(format!("contig_{}", self.id), self.seq.clone())
            .annotated(format!("depth={}", format_depth(self.depth)))
    }
}

pub fn format_depth(d: f64) -> String {
    let s = format!("{d:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Sorts contigs into a canonical order (longest first, then by sequence)
/// and renumbers them.
pub fn renumber(contigs: &mut [Contig]) {
    contigs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.seq.cmp(&b.seq)));
    for (i, c) in contigs.iter_mut().enumerate() {
        c.id = i as u32;
    }
}

pub fn to_fasta(contigs: &[Contig]) -> Vec<FastaRecord> {
    contigs.iter().map(Contig::fasta_record).collect()
}

/// Length of the longest contig `L` such that contigs of length ≥ `L` hold at
/// least half of all bases.
pub fn n50(lengths: &[usize]) -> usize {
    let mut v = lengths.to_vec();
    v.sort_unstable_by(|a, b| b.cmp(a));
    let total: usize = v.iter().sum();
    let mut acc = 0;
    for l in v {
        acc += l;
        if 2 * acc >= total {
            return l;
        }
    }
    0
}
