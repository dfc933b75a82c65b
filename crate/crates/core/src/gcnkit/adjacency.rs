use crate::dense::{axpy, Matrix};
use crate::gstore::CsrGraph;
use crate::par;

/// Row-compressed `Â`. Rows list columns ascending, self entry included.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// `1 / sqrt(d̃_v · d̃_u)` where `d̃` counts the self-loop.
#[inline]
pub fn norm_weight(deg_v: usize, deg_u: usize) -> f64 {
    1.0 / ((deg_v as f64) * (deg_u as f64)).sqrt()
}

/// Symmetrizes `g` (an edge in either direction connects), adds self-loops,
/// and applies symmetric degree normalization.
pub fn normalize_adjacency(g: &CsrGraph) -> NormalizedAdjacency {
    let sym = g.symmetrized();
    let n = sym.vertex_count();
    let deg: Vec<usize> = (0..n as u32).map(|v| sym.degree(v) + 1).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(sym.edge_count() + n);
    let mut vals = Vec::with_capacity(sym.edge_count() + n);
    offsets.push(0);
    for v in 0..n as u32 {
        let row = sym.row(v);
        let split = row.partition_point(|&u| u < v);
        for &u in row[..split].iter().chain(std::iter::once(&v)).chain(&row[split..]) {
            cols.push(u);
            vals.push(norm_weight(deg[v as usize], deg[u as usize]));
        }
        offsets.push(cols.len());
    }
    NormalizedAdjacency { n, offsets, cols, vals }
}

impl NormalizedAdjacency {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, v: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[v]..self.offsets[v + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, v: usize, u: usize) -> f64 {
        let (cols, vals) = self.row(v);
        cols.binary_search(&(u as u32)).map_or(0.0, |i| vals[i])
    }

    /// `Â · m`.
    pub fn spmm(&self, m: &Matrix) -> Matrix {
        assert_eq!(self.n, m.rows(), "spmm dimension");
        let mut out = Matrix::zeros(self.n, m.cols());
        par::for_each_row_mut(out.as_mut_slice(), m.cols(), |v, dst| {
            let (cols, vals) = self.row(v);
            spmm_row(cols, vals, m, dst);
        });
        out
    }

    /// Squared norm of every column; `Â` is symmetric so rows serve.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| self.row(v).1.iter().map(|w| w * w).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut d = Matrix::zeros(self.n, self.n);
        for v in 0..self.n {
            let (cols, vals) = self.row(v);
            for (&u, &w) in cols.iter().zip(vals) {
                d.set(v, u as usize, w);
            }
        }
        d
    }
}

/// `dst += Σ_k vals[k] · m[cols[k]]`, in column order.
#[inline]
pub(crate) fn spmm_row(cols: &[u32], vals: &[f64], m: &Matrix, dst: &mut [f64]) {
    for (&u, &w) in cols.iter().zip(vals) {
        axpy(w, m.row(u as usize), dst);
    }
}
