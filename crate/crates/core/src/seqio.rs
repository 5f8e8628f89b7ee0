//! DNA sequence representation and FASTA/FASTQ I/O.
//!
//! Sequences are stored 2 bits per base (A=0, C=1, G=2, T=3). `N` bases are
//! stored as `A` and recorded in a side [`NMask`] so that k-mer extraction
//! and alignment can skip them.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

const BASES: [u8; 4] = *b"ACGT";
const FASTA_WIDTH: usize = 80;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("empty sequence")]
    Empty,
    #[error("invalid base {byte:?} at offset {offset}")]
    InvalidBase { offset: usize, byte: char },
    #[error("malformed FASTQ record {record} in {path}: {reason}")]
    MalformedFastq {
        path: PathBuf,
        record: usize,
        reason: String,
    },
    #[error("unpaired mate: {0}")]
    Unpaired(String),
    #[error("malformed FASTA in {path}: {reason}")]
    MalformedFasta { path: PathBuf, reason: String },
    #[error("duplicate FASTA id {0}")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SeqError + '_ {
    move |source| SeqError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[inline]
pub fn base_code(b: u8) -> Option<u8> {
    match b {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

#[inline]
pub fn code_base(c: u8) -> u8 {
    BASES[(c & 3) as usize]
}

#[inline]
pub fn complement(c: u8) -> u8 {
    3 - c
}

/// Reverse complement of a slice of 2-bit codes.
pub fn revcomp_codes(codes: &[u8]) -> Vec<u8> {
    codes.iter().rev().map(|&c| complement(c)).collect()
}

pub fn codes_to_string(codes: &[u8]) -> String {
    codes.iter().map(|&c| code_base(c) as char).collect()
}

/// A 2-bit packed DNA sequence.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedSeq {
    len: usize,
    words: Vec<u64>,
}

impl PackedSeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(len: usize) -> Self {
        PackedSeq {
            len: 0,
            words: Vec::with_capacity(len.div_ceil(32)),
        }
    }

    pub fn from_codes(codes: &[u8]) -> Self {
        let mut s = Self::with_capacity(codes.len());
        for &c in codes {
            s.push(c);
        }
        s
    }

    /// Packs an `ACGT` string. Panics on any other character; use [`encode`]
    /// for untrusted input.
    pub fn from_acgt(text: &str) -> Self {
        let mut s = Self::with_capacity(text.len());
        for b in text.bytes() {
            s.push(base_code(b).unwrap_or_else(|| panic!("non-ACGT base {:?}", b as char)));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        debug_assert!(i < self.len);
        ((self.words[i >> 5] >> ((i & 31) * 2)) & 3) as u8
    }

    #[inline]
    pub fn push(&mut self, code: u8) {
        let slot = self.len & 31;
        if slot == 0 {
            self.words.push(0);
        }
        let last = self.words.len() - 1;
        self.words[last] |= ((code & 3) as u64) << (slot * 2);
        self.len += 1;
    }

    pub fn extend_codes(&mut self, codes: impl IntoIterator<Item = u8>) {
        for c in codes {
            self.push(c);
        }
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = u8> + ExactSizeIterator + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_codes(&self) -> Vec<u8> {
        self.iter().collect()
    }

    pub fn codes_range(&self, start: usize, end: usize) -> Vec<u8> {
        (start..end).map(|i| self.get(i)).collect()
    }

    pub fn subseq(&self, start: usize, end: usize) -> PackedSeq {
        assert!(start <= end && end <= self.len);
        let mut s = Self::with_capacity(end - start);
        for i in start..end {
            s.push(self.get(i));
        }
        s
    }

    pub fn revcomp(&self) -> PackedSeq {
        let mut s = Self::with_capacity(self.len);
        for c in self.iter().rev() {
            s.push(complement(c));
        }
        s
    }

    pub fn to_acgt(&self) -> String {
        self.iter().map(|c| code_base(c) as char).collect()
    }
}

impl fmt::Debug for PackedSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PackedSeq({})", self.to_acgt())
    }
}

impl fmt::Display for PackedSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_acgt())
    }
}

pub fn revcomp(s: &PackedSeq) -> PackedSeq {
    s.revcomp()
}

/// Sorted positions of `N` bases within a sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NMask(Vec<u32>);

impl NMask {
    pub fn from_positions(mut positions: Vec<u32>) -> Self {
        positions.sort_unstable();
        positions.dedup();
        NMask(positions)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positions(&self) -> &[u32] {
        &self.0
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.0.binary_search(&(pos as u32)).is_ok()
    }

    /// True if any masked position lies in `start..end`.
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        let i = self.0.partition_point(|&p| (p as usize) < start);
        i < self.0.len() && (self.0[i] as usize) < end
    }

    /// Mask of the reverse-complemented sequence of length `len`.
    pub fn reversed(&self, len: usize) -> NMask {
        NMask(self.0.iter().rev().map(|&p| (len - 1) as u32 - p).collect())
    }
}

/// A packed sequence together with the positions that were `N` in the source.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MaskedSeq {
    pub seq: PackedSeq,
    pub n_mask: NMask,
}

impl MaskedSeq {
    pub fn unmasked(seq: PackedSeq) -> Self {
        MaskedSeq {
            seq,
            n_mask: NMask::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn revcomp(&self) -> MaskedSeq {
        MaskedSeq {
            seq: self.seq.revcomp(),
            n_mask: self.n_mask.reversed(self.seq.len()),
        }
    }

    /// Text form, with masked positions written as `N`.
    pub fn decode(&self) -> String {
        let mut out: Vec<u8> = self.seq.iter().map(code_base).collect();
        for &p in self.n_mask.positions() {
            out[p as usize] = b'N';
        }
        String::from_utf8(out).expect("ascii")
    }
}

impl From<PackedSeq> for MaskedSeq {
    fn from(seq: PackedSeq) -> Self {
        MaskedSeq::unmasked(seq)
    }
}

/// Encodes ASCII DNA. `N` is stored as `A` and reported in the mask.
pub fn encode(text: &str) -> Result<MaskedSeq, SeqError> {
    encode_bytes(text.as_bytes())
}

pub fn encode_bytes(text: &[u8]) -> Result<MaskedSeq, SeqError> {
    if text.is_empty() {
        return Err(SeqError::Empty);
    }
    let mut seq = PackedSeq::with_capacity(text.len());
    let mut ns = Vec::new();
    for (offset, &b) in text.iter().enumerate() {
        match base_code(b) {
            Some(c) => seq.push(c),
            None if b == b'N' || b == b'n' => {
                ns.push(offset as u32);
                seq.push(0);
            }
            None => {
                return Err(SeqError::InvalidBase {
                    offset,
                    byte: b as char,
                })
            }
        }
    }
    Ok(MaskedSeq {
        seq,
        n_mask: NMask(ns),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReadLibrary {
    pub insert_size_mean: f64,
    pub insert_size_sd: f64,
    pub read_length: usize,
}

impl ReadLibrary {
    pub fn new(insert_size_mean: f64, insert_size_sd: f64, read_length: usize) -> Self {
        assert!(insert_size_mean > 0.0, "insert size mean must be positive");
        ReadLibrary {
            insert_size_mean,
            insert_size_sd,
            read_length,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReadPair {
    pub id: u64,
    pub r1: MaskedSeq,
    pub r2: MaskedSeq,
    pub library_id: u16,
}

impl ReadPair {
    /// Mate 1 or 2.
    pub fn mate(&self, mate: u8) -> &MaskedSeq {
        if mate == 1 {
            &self.r1
        } else {
            &self.r2
        }
    }
}

struct FastqRecordReader<R> {
    path: PathBuf,
    inner: R,
    index: usize,
    line: String,
}

impl<R: BufRead> FastqRecordReader<R> {
    fn new(path: &Path, inner: R) -> Self {
        FastqRecordReader {
            path: path.to_path_buf(),
            inner,
            index: 0,
            line: String::new(),
        }
    }

    fn malformed(&self, reason: impl Into<String>) -> SeqError {
        SeqError::MalformedFastq {
            path: self.path.clone(),
            record: self.index,
            reason: reason.into(),
        }
    }

    fn read_line(&mut self) -> Result<bool, SeqError> {
        self.line.clear();
        let n = self
            .inner
            .read_line(&mut self.line)
            .map_err(io_err(&self.path))?;
        while self.line.ends_with('\n') || self.line.ends_with('\r') {
            self.line.pop();
        }
        Ok(n > 0)
    }

    fn next_record(&mut self) -> Option<Result<MaskedSeq, SeqError>> {
        let r = self.next_record_inner();
        self.index += 1;
        r.transpose()
    }

    fn next_record_inner(&mut self) -> Result<Option<MaskedSeq>, SeqError> {
        loop {
            if !self.read_line()? {
                return Ok(None);
            }
            if !self.line.trim().is_empty() {
                break;
            }
        }
        if !self.line.starts_with('@') {
            return Err(self.malformed("header does not start with '@'"));
        }
        if !self.read_line()? {
            return Err(self.malformed("missing sequence line"));
        }
        let seq = encode(&self.line).map_err(|e| self.malformed(e.to_string()))?;
        if !self.read_line()? || !self.line.starts_with('+') {
            return Err(self.malformed("missing '+' separator"));
        }
        if !self.read_line()? {
            return Err(self.malformed("missing quality line"));
        }
        if self.line.len() != seq.len() {
            return Err(self.malformed(format!(
                "quality length {} differs from sequence length {}",
                self.line.len(),
                seq.len()
            )));
        }
        Ok(Some(seq))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, SeqError> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 16, f))
        .map_err(io_err(path))
}

/// Streaming reader of paired FASTQ, either interleaved or split across two files.
pub struct FastqPairs {
    first: FastqRecordReader<BufReader<File>>,
    second: Option<FastqRecordReader<BufReader<File>>>,
    next_id: u64,
    failed: bool,
}

impl FastqPairs {
    pub fn interleaved(path: impl AsRef<Path>) -> Result<Self, SeqError> {
        let path = path.as_ref();
        Ok(FastqPairs {
            first: FastqRecordReader::new(path, open(path)?),
            second: None,
            next_id: 0,
            failed: false,
        })
    }

    pub fn twin(path1: impl AsRef<Path>, path2: impl AsRef<Path>) -> Result<Self, SeqError> {
        let (p1, p2) = (path1.as_ref(), path2.as_ref());
        Ok(FastqPairs {
            first: FastqRecordReader::new(p1, open(p1)?),
            second: Some(FastqRecordReader::new(p2, open(p2)?)),
            next_id: 0,
            failed: false,
        })
    }

    fn next_pair(&mut self) -> Option<Result<ReadPair, SeqError>> {
        let r1 = match self.first.next_record()? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let r2 = match &mut self.second {
            None => match self.first.next_record() {
                Some(r) => r,
                None => {
                    return Some(Err(SeqError::Unpaired(format!(
                        "odd record count in interleaved file {}",
                        self.first.path.display()
                    ))))
                }
            },
            Some(second) => match second.next_record() {
                Some(r) => r,
                None => {
                    return Some(Err(SeqError::Unpaired(format!(
                        "{} has more records than {}",
                        self.first.path.display(),
                        second.path.display()
                    ))))
                }
            },
        };
        let r2 = match r2 {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let id = self.next_id;
        self.next_id += 1;
        Some(Ok(ReadPair {
            id,
            r1,
            r2,
            library_id: 0,
        }))
    }
}

impl Iterator for FastqPairs {
    type Item = Result<ReadPair, SeqError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = match self.next_pair() {
            Some(item) => Some(item),
            None => {
                // first file exhausted; the twin must be too
                let extra = self.second.as_mut().and_then(|s| s.next_record());
                extra.map(|_| {
                    Err(SeqError::Unpaired(format!(
                        "{} has more records than {}",
                        self.second.as_ref().unwrap().path.display(),
                        self.first.path.display()
                    )))
                })
            }
        };
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

/// Reads all pairs; `paths` holds one interleaved file or two mate files.
pub fn read_fastq(paths: &[impl AsRef<Path>]) -> Result<Vec<ReadPair>, SeqError> {
    let reader = match paths {
        [one] => FastqPairs::interleaved(one)?,
        [a, b] => FastqPairs::twin(a, b)?,
        _ => {
            return Err(SeqError::Unpaired(format!(
                "expected 1 or 2 FASTQ paths, got {}",
                paths.len()
            )))
        }
    };
    reader.collect()
}

pub fn write_fastq_record<W: Write>(w: &mut W, name: &str, seq: &MaskedSeq) -> io::Result<()> {
    let text = seq.decode();
    writeln!(w, "@{name}")?;
    writeln!(w, "{text}")?;
    writeln!(w, "+")?;
    // constant placeholder quality
    let qual = vec![b'I'; text.len()];
    w.write_all(&qual)?;
    w.write_all(b"\n")
}

/// One FASTA entry to be written.
#[derive(Clone, Debug)]
pub struct FastaRecord {
    pub id: String,
    pub seq: MaskedSeq,
    pub annotation: Option<String>,
}

impl FastaRecord {
    pub fn new(id: impl Into<String>, seq: impl Into<MaskedSeq>) -> Self {
        FastaRecord {
            id: id.into(),
            seq: seq.into(),
            annotation: None,
        }
    }

    pub fn annotated(mut self, annotation: impl Into<String>) -> Self {
        self.annotation = Some(annotation.into());
        self
    }
}

pub fn write_fasta_to<W: Write>(w: &mut W, records: &[FastaRecord]) -> Result<(), SeqError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(SeqError::DuplicateId(r.id.clone()));
        }
    }
    let werr = |source| SeqError::Io {
        path: PathBuf::from("<fasta>"),
        source,
    };
    for r in records {
        match &r.annotation {
            Some(a) => writeln!(w, ">{} {}", r.id, a),
            None => writeln!(w, ">{}", r.id),
        }
        .map_err(werr)?;
        let text = r.seq.decode();
        for chunk in text.as_bytes().chunks(FASTA_WIDTH) {
            w.write_all(chunk).map_err(werr)?;
            w.write_all(b"\n").map_err(werr)?;
        }
    }
    Ok(())
}

pub fn write_fasta(records: &[FastaRecord], path: impl AsRef<Path>) -> Result<(), SeqError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write_fasta_to(&mut w, records).map_err(|e| match e {
        SeqError::Io { source, .. } => SeqError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    w.flush().map_err(io_err(path))
}

pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<FastaRecord>, SeqError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut out = Vec::new();
    let mut header: Option<(String, Option<String>)> = None;
    let mut text: Vec<u8> = Vec::new();

    let finish = |header: (String, Option<String>), text: &[u8]| -> Result<FastaRecord, SeqError> {
        let seq = encode_bytes(text).map_err(|e| SeqError::MalformedFasta {
            path: path.to_path_buf(),
            reason: format!("record {}: {e}", header.0),
        })?;
        Ok(FastaRecord {
            id: header.0,
            seq,
            annotation: header.1,
        })
    };

    for line in reader.lines() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim_end();
        if let Some(h) = line.strip_prefix('>') {
            if let Some(prev) = header.take() {
                out.push(finish(prev, &text)?);
            }
            text.clear();
            let mut parts = h.splitn(2, char::is_whitespace);
            let id = parts.next().unwrap_or("").to_string();
            let ann = parts
                .next()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty());
            header = Some((id, ann));
        } else if !line.is_empty() {
            if header.is_none() {
                return Err(SeqError::MalformedFasta {
                    path: path.to_path_buf(),
                    reason: "sequence before first header".into(),
                });
            }
            text.extend_from_slice(line.as_bytes());
        }
    }
    if let Some(prev) = header.take() {
        out.push(finish(prev, &text)?);
    }
    Ok(out)
}
