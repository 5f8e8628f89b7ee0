//! Desk-scale metagenome assembler built on a sharded, phase-checked
//! key-value store: k-mer analysis, de Bruijn graph traversal, contig graph
//! refinement, read alignment, local assembly, scaffolding, and a read
//! simulator with assembly evaluation.

pub mod align;
pub mod contig;
pub mod dbg;
pub mod kmer;
pub mod kmercount;
pub mod localasm;
pub mod pipeline;
pub mod refine;
pub mod scaffold;
pub mod seqio;
pub mod shardstore;
pub mod simeval;
pub mod workers;
