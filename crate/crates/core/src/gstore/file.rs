//! On-disk layout (all integers little-endian):
//!
//! ```text
//! "AMLG1"            5 bytes
//! N                  u64
//! M                  u64
//! permutation        N × u32   (old id → new id)
//! index              (N+1) × u64 byte offsets into the payload
//! payload            index[N] bytes
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::codec::{decode_row_into, CompressedGraph};
use super::reorder::Permutation;

pub const MAGIC: &[u8; 5] = b"AMLG1";

pub fn write_binary<W: Write>(cg: &CompressedGraph, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cg.vertex_count as u64).to_le_bytes())?;
    w.write_all(&(cg.edge_count as u64).to_le_bytes())?;
    for &p in cg.permutation.as_slice() {
        w.write_all(&p.to_le_bytes())?;
    }
    for &i in &cg.index {
        w.write_all(&i.to_le_bytes())?;
    }
    w.write_all(&cg.payload)?;
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads and validates a compressed graph, including every row's encoding.
pub fn read_binary<R: Read>(mut r: R) -> Result<CompressedGraph> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected AMLG1")));
    }
    let n = read_u64(&mut r)? as usize;
    let m = read_u64(&mut r)? as usize;
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf)?;
    let perm = Permutation::new(
        buf.chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )?;
    let mut buf = vec![0u8; 8 * (n + 1)];
    r.read_exact(&mut buf)?;
    let index: Vec<u64> = buf
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if index[0] != 0 || index.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Format("index offsets must start at 0 and not decrease".into()));
    }
    let mut payload = vec![0u8; index[n] as usize];
    r.read_exact(&mut payload)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let cg = CompressedGraph {
        vertex_count: n,
        edge_count: m,
        index,
        payload,
        permutation: perm,
    };
    let mut scratch = Vec::new();
    let mut total = 0;
    for v in 0..n {
        scratch.clear();
        decode_row_into(&cg, v, &mut scratch)?;
        if scratch.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format(format!("row {v} not ascending")));
        }
        total += scratch.len();
    }
    if total != m {
        return Err(Error::Format(format!("header says {m} edges, payload holds {total}")));
    }
    Ok(cg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gstore::{build_csr, compress, reorder, ReorderStrategy};

    #[test]
    fn binary_roundtrip_and_magic_check() {
        let g = build_csr(5, &[(0, 4), (1, 2), (3, 0), (3, 1)]).unwrap();
        let cg = compress(&g, &reorder(&g, ReorderStrategy::DegreeDesc));
        let mut buf = Vec::new();
        write_binary(&cg, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"AMLG1");
        assert_eq!(read_binary(&buf[..]).unwrap(), cg);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_binary(&bad[..]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_binary(&long[..]).is_err());
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
    }
}
