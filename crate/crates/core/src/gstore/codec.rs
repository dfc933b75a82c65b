use crate::error::{Error, Result};
use crate::par;

use super::csr::CsrGraph;
use super::reorder::Permutation;

/// Reordered graph with difference-coded rows. Row `v` (new ids) occupies
/// `payload[index[v]..index[v + 1]]`: the first neighbor as a zigzag varint of
/// `first - v`, then each following neighbor as a varint of its gap to the
/// previous one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedGraph {
    pub(crate) vertex_count: usize,
    pub(crate) edge_count: usize,
    pub(crate) index: Vec<u64>,
    pub(crate) payload: Vec<u8>,
    pub(crate) permutation: Permutation,
}

impl CompressedGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn index(&self) -> &[u64] {
        &self.index
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn permutation(&self) -> &Permutation {
        &self.permutation
    }

    /// Bytes the same neighbor lists take as plain 4-byte ids.
    pub fn uncompressed_neighbor_bytes(&self) -> usize {
        4 * self.edge_count
    }

    fn row_bytes(&self, v: usize) -> &[u8] {
        &self.payload[self.index[v] as usize..self.index[v + 1] as usize]
    }
}

pub fn zigzag_encode(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

pub fn zigzag_decode(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

/// Little-endian base-128: 7 data bits per byte, high bit set on all but the last.
pub fn write_varint(mut x: u64, out: &mut Vec<u8>) {
    while x >= 0x80 {
        out.push((x as u8) | 0x80);
        x >>= 7;
    }
    out.push(x as u8);
}

/// Returns the value and the number of bytes consumed.
pub fn read_varint(bytes: &[u8]) -> Result<(u64, usize)> {
    let mut x = 0u64;
    for (i, &b) in bytes.iter().enumerate().take(10) {
        x |= u64::from(b & 0x7F) << (7 * i);
        if b & 0x80 == 0 {
            return Ok((x, i + 1));
        }
    }
    Err(Error::Format("truncated or overlong varint".into()))
}

fn encode_row(v: u32, row: &[u32], out: &mut Vec<u8>) {
    let mut prev: Option<u32> = None;
    for &u in row {
        match prev {
            None => write_varint(zigzag_encode(u as i64 - v as i64), out),
            Some(p) => write_varint(u64::from(u - p), out),
        }
        prev = Some(u);
    }
}

/// Relabels `g` by `perm` and difference-codes every row.
pub fn compress(g: &CsrGraph, perm: &Permutation) -> CompressedGraph {
    let h = g.relabel(perm);
    let n = h.vertex_count();
    let rows: Vec<Vec<u8>> = par::map_range(n, |v| {
        let mut buf = Vec::new();
        encode_row(v as u32, h.row(v as u32), &mut buf);
        buf
    });
    let mut index = Vec::with_capacity(n + 1);
    let mut payload = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    index.push(0);
    for r in rows {
        payload.extend_from_slice(&r);
        index.push(payload.len() as u64);
    }
    CompressedGraph {
        vertex_count: n,
        edge_count: h.edge_count(),
        index,
        payload,
        permutation: perm.clone(),
    }
}

/// Appends the neighbors of `v` (new ids) to `out`. Touches only `v`'s slice.
pub(crate) fn decode_row_into(cg: &CompressedGraph, v: usize, out: &mut Vec<u32>) -> Result<()> {
    let bytes = cg.row_bytes(v);
    let mut pos = 0;
    let mut prev: Option<u32> = None;
    while pos < bytes.len() {
        let (raw, used) = read_varint(&bytes[pos..])?;
        pos += used;
        let next = match prev {
            None => v as i64 + zigzag_decode(raw),
            Some(p) => p as i64 + raw as i64,
        };
        if next < 0 || next as usize >= cg.vertex_count || (prev.is_some() && raw == 0) {
            return Err(Error::Format(format!("corrupt neighbor list for vertex {v}")));
        }
        out.push(next as u32);
        prev = Some(next as u32);
    }
    Ok(())
}

/// Neighbors of vertex `v` in the reordered id space.
pub fn decode_neighbors(cg: &CompressedGraph, v: u32) -> Result<Vec<u32>> {
    if v as usize >= cg.vertex_count {
        return Err(Error::VertexOutOfRange {
            vertex: v as u64,
            count: cg.vertex_count,
        });
    }
    let mut out = Vec::new();
    decode_row_into(cg, v as usize, &mut out)?;
    Ok(out)
}

/// Full reordered CSR.
pub fn decode(cg: &CompressedGraph) -> Result<CsrGraph> {
    let rows: Vec<Result<Vec<u32>>> = par::map_range(cg.vertex_count, |v| {
        let mut out = Vec::new();
        decode_row_into(cg, v, &mut out).map(|_| out)
    });
    let mut offsets = Vec::with_capacity(cg.vertex_count + 1);
    let mut neighbors = Vec::with_capacity(cg.edge_count);
    offsets.push(0);
    for r in rows {
        neighbors.extend(r?);
        offsets.push(neighbors.len());
    }
    CsrGraph::from_parts(cg.vertex_count, offsets, neighbors)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionReport {
    /// `4·(M + N + 1)`.
    pub raw_bytes: u64,
    /// `4·(N + 1)` index bytes plus the payload.
    pub compressed_bytes: u64,
    pub ratio: f64,
}

pub fn compression_report(cg: &CompressedGraph) -> CompressionReport {
    let n = cg.vertex_count as u64;
    let raw_bytes = 4 * (cg.edge_count as u64 + n + 1);
    let compressed_bytes = 4 * (n + 1) + cg.payload.len() as u64;
    let ratio = if cg.edge_count == 0 {
        1.0
    } else {
        raw_bytes as f64 / compressed_bytes as f64
    };
    CompressionReport {
        raw_bytes,
        compressed_bytes,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gstore::build_csr;
    use proptest::prelude::*;

    #[test]
    fn consecutive_neighbors_take_one_byte_each() {
        let g = build_csr(14, &[(10, 11), (10, 12), (10, 13)]).unwrap();
        let cg = compress(&g, &Permutation::identity(14));
        assert_eq!(cg.payload(), [zigzag_encode(1) as u8, 1, 1]);
        assert_eq!(decode_neighbors(&cg, 10).unwrap(), [11, 12, 13]);
        assert!(decode_neighbors(&cg, 3).unwrap().is_empty());
        assert!(decode_neighbors(&cg, 14).is_err());
    }

    #[test]
    fn negative_first_delta() {
        let g = build_csr(300, &[(299, 0), (299, 298)]).unwrap();
        let cg = compress(&g, &Permutation::identity(300));
        assert_eq!(decode_neighbors(&cg, 299).unwrap(), [0, 298]);
    }

    #[test]
    fn empty_graph_ratio_is_one() {
        let cg = compress(&build_csr(0, &[]).unwrap(), &Permutation::identity(0));
        let r = compression_report(&cg);
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.raw_bytes, 4);
    }

    #[test]
    fn corrupt_payload_detected() {
        let g = build_csr(3, &[(0, 1), (0, 2)]).unwrap();
        let mut cg = compress(&g, &Permutation::identity(3));
        cg.payload[1] = 0x7F; // gap far past the vertex count
        assert!(decode_neighbors(&cg, 0).is_err());
    }

    proptest! {
        #[test]
        fn varint_roundtrip(x in any::<u64>()) {
            let mut buf = Vec::new();
            write_varint(x, &mut buf);
            prop_assert_eq!(read_varint(&buf).unwrap(), (x, buf.len()));
        }

        #[test]
        fn zigzag_roundtrip(x in any::<i64>()) {
            prop_assert_eq!(zigzag_decode(zigzag_encode(x)), x);
        }
    }
}
