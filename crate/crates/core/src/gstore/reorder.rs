use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::csr::CsrGraph;

/// Bijection `old id → new id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<u32>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n as u32).collect())
    }

    /// Checks bijectivity over `0..map.len()`.
    pub fn new(map: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            let slot = seen.get_mut(m as usize).ok_or(Error::VertexOutOfRange {
                vertex: m as u64,
                count: map.len(),
            })?;
            if *slot {
                return Err(Error::Format(format!("permutation maps two vertices to {m}")));
            }
            *slot = true;
        }
        Ok(Permutation(map))
    }

    /// Builds the permutation that places `order[i]` at position `i`.
    pub fn from_order(order: &[u32]) -> Result<Self> {
        let mut map = vec![u32::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            let slot = map.get_mut(old as usize).ok_or(Error::VertexOutOfRange {
                vertex: old as u64,
                count: order.len(),
            })?;
            *slot = new as u32;
        }
        Self::new(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, old: u32) -> u32 {
        self.0[old as usize]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.0.len()];
        for (old, &new) in self.0.iter().enumerate() {
            inv[new as usize] = old as u32;
        }
        Permutation(inv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReorderStrategy {
    Identity,
    /// Breadth-first over out-edges from the highest-degree vertex, neighbors
    /// visited in ascending id order; unreached vertices follow in degree order.
    Bfs,
    /// Stable sort by descending degree.
    DegreeDesc,
}

impl FromStr for ReorderStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(ReorderStrategy::Identity),
            "bfs" => Ok(ReorderStrategy::Bfs),
            "degree" | "degree_desc" => Ok(ReorderStrategy::DegreeDesc),
            other => Err(Error::Config(format!("unknown reorder strategy {other:?}"))),
        }
    }
}

impl fmt::Display for ReorderStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReorderStrategy::Identity => "identity",
            ReorderStrategy::Bfs => "bfs",
            ReorderStrategy::DegreeDesc => "degree_desc",
        })
    }
}

/// Vertex order for `strategy`. Degree means in-degree plus out-degree.
pub fn reorder(g: &CsrGraph, strategy: ReorderStrategy) -> Permutation {
    let n = g.vertex_count();
    let by_degree = || {
        let deg = g.total_degrees();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(deg[v as usize]));
        order
    };
    let order = match strategy {
        ReorderStrategy::Identity => return Permutation::identity(n),
        ReorderStrategy::DegreeDesc => by_degree(),
        ReorderStrategy::Bfs => {
            let ranked = by_degree();
            let mut order = Vec::with_capacity(n);
            let mut seen = vec![false; n];
            if let Some(&root) = ranked.first() {
                let mut queue = VecDeque::from([root]);
                seen[root as usize] = true;
                while let Some(v) = queue.pop_front() {
                    order.push(v);
                    for &u in g.row(v) {
                        if !seen[u as usize] {
                            seen[u as usize] = true;
                            queue.push_back(u);
                        }
                    }
                }
            }
            order.extend(ranked.into_iter().filter(|&v| !seen[v as usize]));
            order
        }
    };
    Permutation::from_order(&order).expect("order covers every vertex once")
}

/// Locality of a labeling, measured on exactly the values difference coding
/// stores: per row, `|first - v|` and the gaps between consecutive neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    pub mean_abs_gap: f64,
    /// Mean of `log2(1 + gap)`, which tracks varint length.
    pub mean_log2_gap: f64,
}

pub fn gap_stats(g: &CsrGraph, perm: &Permutation) -> GapStats {
    let h = g.relabel(perm);
    let (mut sum, mut log_sum, mut count) = (0.0, 0.0, 0usize);
    for v in 0..h.vertex_count() as u32 {
        let mut prev: Option<u32> = None;
        for &u in h.row(v) {
            let gap = match prev {
                None => (u as i64 - v as i64).unsigned_abs(),
                Some(p) => (u - p) as u64,
            } as f64;
            sum += gap;
            log_sum += (1.0 + gap).log2();
            count += 1;
            prev = Some(u);
        }
    }
    let c = count.max(1) as f64;
    GapStats {
        mean_abs_gap: sum / c,
        mean_log2_gap: log_sum / c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gstore::build_csr;

    #[test]
    fn identity_is_identity() {
        let g = build_csr(4, &[(0, 1)]).unwrap();
        assert_eq!(reorder(&g, ReorderStrategy::Identity).as_slice(), [0, 1, 2, 3]);
    }

    #[test]
    fn star_center_goes_first() {
        let edges: Vec<(u32, u32)> = (0..8).filter(|&v| v != 5).map(|v| (5, v)).collect();
        let g = build_csr(8, &edges).unwrap();
        for s in [ReorderStrategy::DegreeDesc, ReorderStrategy::Bfs] {
            let p = reorder(&g, s);
            assert_eq!(p.inverse().apply(0), 5, "{s}");
        }
    }

    #[test]
    fn bfs_visits_in_ascending_neighbor_order() {
        // 0 has the most edges; its neighbors 3 then 1 must come out as 1, 3.
        let g = build_csr(5, &[(0, 3), (0, 1), (0, 4), (1, 2)]).unwrap();
        let p = reorder(&g, ReorderStrategy::Bfs);
        assert_eq!(p.inverse().as_slice(), [0, 1, 3, 4, 2]);
    }

    #[test]
    fn unreached_vertices_appended_by_degree() {
                let g = build_csr(5, &[(0, 1), (0, 2), (3, 4), (4, 3), (3, 1)]).unwrap();
        let p = reorder(&g, ReorderStrategy::Bfs).inverse();
        // degrees: 0:2 1:2 2:1 3:3 4:2 → root 3
        assert_eq!(p.as_slice(), [3, 1, 4, 0, 2]);
    }

    #[test]
    fn permutation_rejects_duplicates() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::new(vec![1, 0]).is_ok());
    }
}
