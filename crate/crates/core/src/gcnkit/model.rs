use std::io::{Read, Write};

use rand::Rng;

use crate::dense::{softmax_inplace, Matrix};
use crate::error::{Error, Result};
use crate::par;
use crate::seed;

use super::adjacency::NormalizedAdjacency;
use super::train::{ClassWeighting, TrainSplit};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCN1";

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    /// `F × H`
    pub w1: Matrix,
    /// `H × C`
    pub w2: Matrix,
}

impl GcnModel {
    /// Glorot-uniform weights: `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
    pub fn init(features: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-r..r)).collect();
            Matrix::from_vec(rows, cols, data)
        };
        let w1 = glorot(features, hidden);
        let w2 = glorot(hidden, classes);
        GcnModel { w1, w2 }
    }

    pub fn features(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }

    fn check_shapes(&self, adj: &NormalizedAdjacency, x: &Matrix) -> Result<()> {
        if x.rows() != adj.vertex_count() {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows for {} vertices",
                x.rows(),
                adj.vertex_count()
            )));
        }
        if x.cols() != self.w1.rows() {
            return Err(Error::Shape(format!(
                "features have {} columns, W1 expects {}",
                x.cols(),
                self.w1.rows()
            )));
        }
        if self.w1.cols() != self.w2.rows() {
            return Err(Error::Shape(format!(
                "W1 is {}x{} but W2 is {}x{}",
                self.w1.rows(),
                self.w1.cols(),
                self.w2.rows(),
                self.w2.cols()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Grads {
    pub w1: Matrix,
    pub w2: Matrix,
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `X W1`
    pub xw: Matrix,
    /// `Â X W1`
    pub a1: Matrix,
    /// `relu(a1)`
    pub h1: Matrix,
    /// `h1 W2`
    pub hw: Matrix,
    /// logits `Â h1 W2`
    pub z: Matrix,
    pub probs: Matrix,
}

pub fn forward_cached(adj: &NormalizedAdjacency, x: &Matrix, model: &GcnModel) -> Result<ForwardCache> {
    model.check_shapes(adj, x)?;
    let xw = x.matmul(&model.w1);
    let a1 = adj.spmm(&xw);
    let mut h1 = a1.clone();
    h1.map_inplace(|v| v.max(0.0));
    let hw = h1.matmul(&model.w2);
    let z = adj.spmm(&hw);
    let mut probs = z.clone();
    par::for_each_row_mut(probs.as_mut_slice(), model.classes(), |_, row| softmax_inplace(row));
    Ok(ForwardCache { xw, a1, h1, hw, z, probs })
}

/// Class probabilities, one row per vertex.
pub fn forward(adj: &NormalizedAdjacency, x: &Matrix, model: &GcnModel) -> Result<Matrix> {
    forward_cached(adj, x, model).map(|c| c.probs)
}

/// `logsumexp(z) - z[label]`.
pub(crate) fn cross_entropy(z: &[f64], label: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - z[label]
}

/// Mean cross-entropy over the training vertices and its gradient.
pub fn loss_and_grads(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    model: &GcnModel,
    split: &TrainSplit,
) -> Result<(f64, Grads)> {
    loss_and_grads_weighted(adj, x, model, split, ClassWeighting::Uniform)
}

/// Cross-entropy averaged with per-class example weights (see
/// [`ClassWeighting`]) and its gradient.
pub fn loss_and_grads_weighted(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    model: &GcnModel,
    split: &TrainSplit,
    weighting: ClassWeighting,
) -> Result<(f64, Grads)> {
    if split.train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let cache = forward_cached(adj, x, model)?;
    let c = model.classes();
    let weights = weighting.example_weights(&split.train, &split.labels, c);
    let mut loss = 0.0;
    let mut dz = Matrix::zeros(adj.vertex_count(), c);
    for &v in &split.train {
        let v = v as usize;
        let label = split.labels[v] as usize;
        let w = weights[label];
        loss += w * cross_entropy(cache.z.row(v), label);
        let d = dz.row_mut(v);
        d.copy_from_slice(cache.probs.row(v));
        d[label] -= 1.0;
        d.iter_mut().for_each(|g| *g *= w);
    }

    // Â is symmetric, so Âᵀ products reuse spmm.
    let d_hw = adj.spmm(&dz);
    let g_w2 = cache.h1.t_matmul(&d_hw);
    let mut d_a1 = d_hw.matmul_t(&model.w2);
    d_a1.as_mut_slice()
        .iter_mut()
        .zip(cache.a1.as_slice())
        .for_each(|(g, &a)| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
    let d_xw = adj.spmm(&d_a1);
    let g_w1 = x.t_matmul(&d_xw);
    Ok((loss, Grads { w1: g_w1, w2: g_w2 }))
}

/// `GCN1`, then `F`, `H`, `C` as little-endian u32, then W1 and W2 row-major
/// as little-endian f64.
pub fn write_checkpoint<W: Write>(model: &GcnModel, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    for d in [model.features(), model.hidden(), model.classes()] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in model.w1.as_slice().iter().chain(model.w2.as_slice()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<GcnModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let [f, h, c] = dims;
    let mut read_matrix = |rows: usize, cols: usize| -> Result<Matrix> {
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Matrix::from_vec(rows, cols, data))
    };
    let w1 = read_matrix(f, h)?;
    let w2 = read_matrix(h, c)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint weights".into()));
    }
    Ok(GcnModel { w1, w2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcnkit::normalize_adjacency;
    use crate::gstore::build_csr;

    #[test]
    fn zero_output_weights_give_uniform_rows() {
        let adj = normalize_adjacency(&build_csr(3, &[(0, 1), (1, 2)]).unwrap());
        let mut model = GcnModel::init(2, 4, 2, 1);
        model.w2 = Matrix::zeros(4, 2);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0], vec![3.0, 0.5]]);
        let p = forward(&adj, &x, &model).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let adj = normalize_adjacency(&build_csr(2, &[(0, 1)]).unwrap());
        let model = GcnModel::init(3, 4, 2, 1);
        let x = Matrix::zeros(2, 2);
        assert!(matches!(forward(&adj, &x, &model), Err(Error::Shape(_))));
        let x = Matrix::zeros(3, 3);
        assert!(matches!(forward(&adj, &x, &model), Err(Error::Shape(_))));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let model = GcnModel::init(5, 3, 2, 11);
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"GCN1");
        assert_eq!(buf.len(), 4 + 12 + 8 * (15 + 6));
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), model);
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let m = GcnModel::init(16, 128, 2, 3);
        let r1 = (6.0f64 / 144.0).sqrt();
        assert!(m.w1.as_slice().iter().all(|v| v.abs() < r1));
        assert_eq!(m, GcnModel::init(16, 128, 2, 3));
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_ln2() {
        assert!((cross_entropy(&[0.3, 0.3], 1) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
