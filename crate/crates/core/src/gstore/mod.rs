//! Immutable CSR graph store with vertex reordering and difference-coded,
//! varint-compressed neighbor lists.
//!
//! Size accounting uses 4-byte ids throughout: an uncompressed graph costs
//! `4·(M + N + 1)` bytes (neighbors plus offsets) and a compressed one costs
//! `4·(N + 1)` index bytes plus its payload.

mod codec;
mod csr;
mod file;
mod reorder;

pub use codec::{
    compress, compression_report, decode, decode_neighbors, read_varint, write_varint, zigzag_decode,
    zigzag_encode, CompressedGraph, CompressionReport,
};
pub use csr::{build_csr, read_edge_list, CsrGraph};
pub use file::{read_binary, write_binary, MAGIC};
pub use reorder::{gap_stats, reorder, GapStats, Permutation, ReorderStrategy};
