//! Incremental GCN inference over a growing transaction graph.
//!
//! A new edge changes the degrees of its endpoints, which changes the
//! normalized weights of every edge at those endpoints. Layer-1 outputs are
//! therefore stale on the endpoints and their neighbors, and layer-2 outputs
//! one hop further out. [`IncrementalEngine::refresh`] recomputes exactly
//! those rows with the same kernels as the full forward pass.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::sync::Arc;

use crate::dense::{softmax_inplace, vecmat_into, Matrix};
use crate::error::{Error, Result};
use crate::gcnkit::{forward_cached, norm_weight, normalize_adjacency, spmm_row, GcnModel};
use crate::gstore::{build_csr, CsrGraph};
use crate::txflow::{parse_transaction_row, Transaction};

/// Symmetric adjacency as an immutable base CSR plus sorted per-vertex
/// overlay lists of edges added since the last [`compact`](Self::compact).
#[derive(Debug, Clone)]
pub struct DynamicGraph {
    base: CsrGraph,
    extra: Vec<Vec<u32>>,
    extra_edges: usize,
}

impl DynamicGraph {
    /// Undirected view of `g`, self-loops dropped.
    pub fn from_csr(g: &CsrGraph) -> Self {
        let base = g.symmetrized();
        let n = base.vertex_count();
        DynamicGraph {
            base,
            extra: vec![Vec::new(); n],
            extra_edges: 0,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.base.vertex_count()
    }

    /// Undirected edges held in the overlay.
    pub fn overlay_edges(&self) -> usize {
        self.extra_edges
    }

    pub fn degree(&self, v: u32) -> usize {
        self.base.degree(v) + self.extra[v as usize].len()
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        self.base.row(u).binary_search(&v).is_ok() || self.extra[u as usize].binary_search(&v).is_ok()
    }

    /// Adds the undirected edge `{u, v}`. Returns whether it was new; self-loops
    /// are never stored.
    pub fn add_edge(&mut self, u: u32, v: u32) -> bool {
        if u == v || self.contains(u, v) {
            return false;
        }
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.extra[a as usize];
            let at = list.partition_point(|&x| x < b);
            list.insert(at, b);
        }
        self.extra_edges += 1;
        true
    }

    /// Neighbors of `v` in ascending order, written into `out`.
    pub fn neighbors_into(&self, v: u32, out: &mut Vec<u32>) {
        out.clear();
        let (a, b) = (self.base.row(v), &self.extra[v as usize]);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                out.push(a[i]);
                i += 1;
            } else {
                out.push(b[j]);
                j += 1;
            }
        }
    }

    /// Folds the overlay into a fresh base CSR.
    pub fn compact(&mut self) {
        if self.extra_edges == 0 {
            return;
        }
        self.base = self.to_csr();
        self.extra.iter_mut().for_each(Vec::clear);
        self.extra_edges = 0;
    }

    /// The current symmetric adjacency as a plain CSR.
    pub fn to_csr(&self) -> CsrGraph {
        let mut edges = Vec::with_capacity(self.base.edge_count() + 2 * self.extra_edges);
        let mut row = Vec::new();
        for v in 0..self.vertex_count() as u32 {
            self.neighbors_into(v, &mut row);
            edges.extend(row.iter().map(|&u| (v, u)));
        }
        build_csr(self.vertex_count(), &edges).expect("endpoints in range")
    }

    /// Row `v` of `Â`: ascending columns with the self entry.
    fn normalized_row(&self, v: u32, nbrs: &mut Vec<u32>, cols: &mut Vec<u32>, vals: &mut Vec<f64>) {
        self.neighbors_into(v, nbrs);
        let dv = self.degree(v) + 1;
        let split = nbrs.partition_point(|&u| u < v);
        cols.clear();
        vals.clear();
        for &u in nbrs[..split].iter().chain(std::iter::once(&v)).chain(&nbrs[split..]) {
            cols.push(u);
            vals.push(norm_weight(dv, self.degree(u) + 1));
        }
    }
}

/// Vertices whose layer outputs are stale, stamped with the engine epoch that
/// produced them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirtySet {
    pub epoch: u64,
    /// Sorted; layer-1 rows to recompute.
    pub layer1: Vec<u32>,
    /// Sorted superset of `layer1`; output rows to recompute.
    pub layer2: Vec<u32>,
}

impl DirtySet {
    pub fn is_empty(&self) -> bool {
        self.layer2.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefreshStats {
    pub layer1_rows: usize,
    pub layer2_rows: usize,
}

impl RefreshStats {
    /// Distinct vertices touched by the refresh.
    pub fn vertices(&self) -> usize {
        self.layer2_rows
    }
}

/// Published output probabilities at one epoch.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: u64,
    pub probs: Arc<Matrix>,
}

/// Frozen-weight GCN whose intermediate activations are cached per vertex.
/// One writer applies transactions and refreshes; readers take snapshots.
#[derive(Debug)]
pub struct IncrementalEngine {
    graph: DynamicGraph,
    model: GcnModel,
    xw: Matrix,
    h1: Matrix,
    hw: Matrix,
    probs: Arc<Matrix>,
    epoch: u64,
    published: u64,
    pending1: BTreeSet<u32>,
    pending2: BTreeSet<u32>,
}

impl IncrementalEngine {
    /// Runs one full forward pass over `g` and caches its activations.
    pub fn new(g: &CsrGraph, x: Matrix, model: GcnModel) -> Result<Self> {
        let cache = forward_cached(&normalize_adjacency(g), &x, &model)?;
        Ok(IncrementalEngine {
            graph: DynamicGraph::from_csr(g),
            model,
            xw: cache.xw,
            h1: cache.h1,
            hw: cache.hw,
            probs: Arc::new(cache.probs),
            epoch: 0,
            published: 0,
            pending1: BTreeSet::new(),
            pending2: BTreeSet::new(),
        })
    }

    pub fn graph(&self) -> &DynamicGraph {
        &self.graph
    }

    pub fn model(&self) -> &GcnModel {
        &self.model
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Probabilities as of the last refresh.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            epoch: self.published,
            probs: Arc::clone(&self.probs),
        }
    }

    /// Adds the transactions' edges. The returned set covers every update
    /// since the last refresh; earlier sets become stale. Fails without
    /// changing anything if an endpoint is unknown.
    pub fn apply_transactions(&mut self, txs: &[Transaction]) -> Result<DirtySet> {
        let n = self.graph.vertex_count();
        if let Some(t) = txs.iter().find(|t| t.src as usize >= n || t.dst as usize >= n) {
            let bad = if t.src as usize >= n { t.src } else { t.dst };
            return Err(Error::UnknownAccount(bad as u64));
        }
        let mut touched = BTreeSet::new();
        for t in txs {
            if self.graph.add_edge(t.src, t.dst) {
                touched.insert(t.src);
                touched.insert(t.dst);
            }
        }
        if !touched.is_empty() {
            self.epoch += 1;
            let mut nbrs = Vec::new();
            let mut layer1 = touched.clone();
            for &v in &touched {
                self.graph.neighbors_into(v, &mut nbrs);
                layer1.extend(&nbrs);
            }
            let mut layer2 = layer1.clone();
            for &v in &layer1 {
                self.graph.neighbors_into(v, &mut nbrs);
                layer2.extend(&nbrs);
            }
            self.pending1.extend(layer1);
            self.pending2.extend(layer2);
        }
        Ok(DirtySet {
            epoch: self.epoch,
            layer1: self.pending1.iter().copied().collect(),
            layer2: self.pending2.iter().copied().collect(),
        })
    }

    /// Reads newline-delimited `tx_id,src,dst,amount,timestamp` records (an
    /// optional header line is skipped) and applies them as one batch.
    pub fn apply_stream<R: BufRead>(&mut self, r: R) -> Result<DirtySet> {
        let mut txs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("tx_id")) {
                continue;
            }
            txs.push(parse_transaction_row(line)?);
        }
        self.apply_transactions(&txs)
    }

    /// Recomputes the dirty rows and publishes a new snapshot.
    pub fn refresh(&mut self, dirty: &DirtySet) -> Result<RefreshStats> {
        if dirty.epoch != self.epoch {
            return Err(Error::StaleDirtySet {
                stamped: dirty.epoch,
                current: self.epoch,
            });
        }
        if dirty.is_empty() {
            return Ok(RefreshStats::default());
        }
        let (mut nbrs, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut a1 = vec![0.0; self.model.hidden()];
        for &v in &dirty.layer1 {
            self.graph.normalized_row(v, &mut nbrs, &mut cols, &mut vals);
            a1.fill(0.0);
            spmm_row(&cols, &vals, &self.xw, &mut a1);
            let h = self.h1.row_mut(v as usize);
            for (h, &a) in h.iter_mut().zip(&a1) {
                *h = a.max(0.0);
            }
            let hw = self.hw.row_mut(v as usize);
            hw.fill(0.0);
            vecmat_into(self.h1.row(v as usize), &self.model.w2, hw);
        }
        let probs = Arc::make_mut(&mut self.probs);
        for &v in &dirty.layer2 {
            self.graph.normalized_row(v, &mut nbrs, &mut cols, &mut vals);
            let z = probs.row_mut(v as usize);
            z.fill(0.0);
            spmm_row(&cols, &vals, &self.hw, z);
            softmax_inplace(z);
        }
        self.pending1.clear();
        self.pending2.clear();
        self.published = self.epoch;
        Ok(RefreshStats {
            layer1_rows: dirty.layer1.len(),
            layer2_rows: dirty.layer2.len(),
        })
    }

    /// Folds the overlay into the base adjacency; outputs are unaffected.
    pub fn compact(&mut self) {
        self.graph.compact();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::Cents;

    fn tx(src: u32, dst: u32) -> Transaction {
        Transaction {
            tx_id: 0,
            src,
            dst,
            amount: Cents(100),
            timestamp: 0,
        }
    }

    fn path(n: u32) -> CsrGraph {
        let edges: Vec<(u32, u32)> = (0..n - 1).map(|v| (v, v + 1)).collect();
        build_csr(n as usize, &edges).unwrap()
    }

    #[test]
    fn overlay_neighbors_merge_sorted() {
        let mut g = DynamicGraph::from_csr(&path(6));
        assert!(g.add_edge(2, 5));
        assert!(!g.add_edge(5, 2));
        assert!(!g.add_edge(3, 3));
        let mut out = Vec::new();
        g.neighbors_into(2, &mut out);
        assert_eq!(out, [1, 3, 5]);
        let csr = g.to_csr();
        g.compact();
        assert_eq!(g.overlay_edges(), 0);
        assert_eq!(g.to_csr(), csr);
    }

    #[test]
    fn path_update_dirties_two_hop_ball() {
        let model = GcnModel::init(2, 3, 2, 1);
        let x = Matrix::from_vec(10, 2, (0..20).map(|i| i as f64 * 0.1).collect());
        let mut e = IncrementalEngine::new(&path(10), x, model).unwrap();
        let d = e.apply_transactions(&[tx(4, 6)]).unwrap();
        assert_eq!(d.layer1, [3, 4, 5, 6, 7]);
        assert_eq!(d.layer2, [2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(e.refresh(&d).unwrap().vertices(), 7);
    }

    #[test]
    fn no_new_edges_is_empty() {
        let model = GcnModel::init(1, 2, 2, 1);
        let mut e = IncrementalEngine::new(&path(4), Matrix::zeros(4, 1), model).unwrap();
        let before = e.snapshot();
        let d = e.apply_transactions(&[]).unwrap();
        assert!(d.is_empty());
        let d = e.apply_transactions(&[tx(1, 2), tx(3, 3)]).unwrap();
        assert!(d.is_empty());
        assert_eq!(e.refresh(&d).unwrap(), RefreshStats::default());
        assert!(Arc::ptr_eq(&before.probs, &e.snapshot().probs));
    }

    #[test]
    fn stale_and_unknown_are_rejected() {
        let model = GcnModel::init(1, 2, 2, 1);
        let mut e = IncrementalEngine::new(&path(5), Matrix::zeros(5, 1), model).unwrap();
        assert!(matches!(e.apply_transactions(&[tx(0, 9)]), Err(Error::UnknownAccount(9))));
        let first = e.apply_transactions(&[tx(0, 2)]).unwrap();
        let second = e.apply_transactions(&[tx(0, 4)]).unwrap();
        assert!(second.layer2.len() >= first.layer2.len());
        assert!(matches!(e.refresh(&first), Err(Error::StaleDirtySet { .. })));
        e.refresh(&second).unwrap();
    }
}
