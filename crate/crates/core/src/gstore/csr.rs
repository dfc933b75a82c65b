use std::io::Read;

use crate::error::{Error, Result};

use super::reorder::Permutation;

/// Directed graph in compressed sparse row form. Rows are sorted and
/// duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrGraph {
    vertex_count: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

/// Sorted, deduplicated CSR over `vertex_count` vertices.
pub fn build_csr(vertex_count: usize, edges: &[(u32, u32)]) -> Result<CsrGraph> {
    if let Some(&(s, d)) = edges
        .iter()
        .find(|&&(s, d)| s as usize >= vertex_count || d as usize >= vertex_count)
    {
        return Err(Error::VertexOutOfRange {
            vertex: if s as usize >= vertex_count { s } else { d } as u64,
            count: vertex_count,
        });
    }
    let mut sorted = edges.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut offsets = vec![0usize; vertex_count + 1];
    for &(s, _) in &sorted {
        offsets[s as usize + 1] += 1;
    }
    for v in 0..vertex_count {
        offsets[v + 1] += offsets[v];
    }
    let neighbors = sorted.into_iter().map(|(_, d)| d).collect();
    Ok(CsrGraph {
        vertex_count,
        offsets,
        neighbors,
    })
}

impl CsrGraph {
    /// Checks the CSR invariants; used when accepting external arrays.
    pub fn from_parts(vertex_count: usize, offsets: Vec<usize>, neighbors: Vec<u32>) -> Result<Self> {
        let g = CsrGraph {
            vertex_count,
            offsets,
            neighbors,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertex_count;
        if self.offsets.len() != n + 1 || self.offsets[0] != 0 || self.offsets[n] != self.neighbors.len() {
            return Err(Error::Format("CSR offsets do not frame the neighbor array".into()));
        }
        for v in 0..n {
            if self.offsets[v] > self.offsets[v + 1] {
                return Err(Error::Format(format!("CSR offsets decrease at vertex {v}")));
            }
            let row = self.row(v as u32);
            if let Some(&bad) = row.iter().find(|&&u| u as usize >= n) {
                return Err(Error::VertexOutOfRange {
                    vertex: bad as u64,
                    count: n,
                });
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!("CSR row {v} not strictly ascending")));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbors(&self) -> &[u32] {
        &self.neighbors
    }

    pub fn row(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: u32) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn in_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.vertex_count];
        for &u in &self.neighbors {
            d[u as usize] += 1;
        }
        d
    }

    /// In-degree plus out-degree.
    pub fn total_degrees(&self) -> Vec<u32> {
        let mut d = self.in_degrees();
        for (v, dv) in d.iter_mut().enumerate() {
            *dv += self.degree(v as u32) as u32;
        }
        d
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.vertex_count as u32).flat_map(move |v| self.row(v).iter().map(move |&u| (v, u)))
    }

    /// The graph with vertex `v` renamed `perm[v]`.
    pub fn relabel(&self, perm: &Permutation) -> CsrGraph {
        assert_eq!(perm.len(), self.vertex_count, "permutation size");
        let edges: Vec<(u32, u32)> = self.edges().map(|(s, d)| (perm.apply(s), perm.apply(d))).collect();
        build_csr(self.vertex_count, &edges).expect("relabeled endpoints in range")
    }

    /// Undirected view: `u~v` when either direction exists, no self-loops.
    pub fn symmetrized(&self) -> CsrGraph {
        let edges: Vec<(u32, u32)> = self
            .edges()
            .filter(|(s, d)| s != d)
            .flat_map(|(s, d)| [(s, d), (d, s)])
            .collect();
        build_csr(self.vertex_count, &edges).expect("endpoints in range")
    }
}

/// Reads a `src,dst` CSV edge list with a header row. The vertex count is
/// `vertex_count` when given, otherwise one past the largest id.
pub fn read_edge_list<R: Read>(r: R, vertex_count: Option<usize>) -> Result<CsrGraph> {
    let edges = crate::simnet::read_edges_csv(r)?;
    let n = vertex_count.unwrap_or_else(|| {
        edges
            .iter()
            .map(|&(s, d)| s.max(d) as usize + 1)
            .max()
            .unwrap_or(0)
    });
    build_csr(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_csr() {
        let g = build_csr(3, &[(0, 2), (0, 1), (0, 2)]).unwrap();
        assert_eq!(g.offsets(), [0, 2, 2, 2]);
        assert_eq!(g.neighbors(), [1, 2]);
    }

    #[test]
    fn empty_edge_set() {
        let g = build_csr(4, &[]).unwrap();
        assert_eq!(g.offsets(), [0, 0, 0, 0, 0]);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn out_of_range_endpoint() {
        assert!(matches!(
            build_csr(2, &[(0, 2)]),
            Err(Error::VertexOutOfRange { vertex: 2, count: 2 })
        ));
    }

    #[test]
    fn from_parts_rejects_unsorted_rows() {
        assert!(CsrGraph::from_parts(2, vec![0, 2, 2], vec![1, 0]).is_err());
        assert!(CsrGraph::from_parts(2, vec![0, 1, 1], vec![1]).is_ok());
    }

    #[test]
    fn symmetrize_drops_loops() {
        let g = build_csr(3, &[(0, 1), (1, 1), (2, 0)]).unwrap().symmetrized();
        assert_eq!(g.row(0), [1, 2]);
        assert_eq!(g.row(1), [0]);
        assert_eq!(g.row(2), [0]);
    }
}
