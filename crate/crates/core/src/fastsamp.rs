//! Layer-wise importance-sampled GCN training.
//!
//! The first propagation `P = Â X` has no trainable parameters and is
//! computed once up front. Each minibatch of labeled vertices then draws `t`
//! vertices with replacement from `q(v) ∝ ‖Â[:, v]‖²`, restricted to the
//! batch's neighborhood and renormalized, and replaces the output layer's
//! `Â[batch, :]` with the rescaled block `Â[batch, v] · count(v) / (t q(v))`.

use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dense::{axpy, softmax_inplace, Matrix};
use crate::error::{Error, Result};
use crate::gcnkit::{
    accuracy, cross_entropy, forward, EpochMetrics, GcnModel, Grads, Hyper, NormalizedAdjacency, OptimizerState,
    TrainOutcome, TrainSplit, CLASSES,
};
use crate::seed;

/// Importance distribution over vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDistribution {
    q: Vec<f64>,
}

impl SampleDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// `q(v) = ‖Â[:, v]‖² / ‖Â‖_F²`.
pub fn build_distribution(adj: &NormalizedAdjacency) -> Result<SampleDistribution> {
    let norms = adj.column_sq_norms();
    let total: f64 = norms.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroOperator);
    }
    Ok(SampleDistribution {
        q: norms.into_iter().map(|n| n / total).collect(),
    })
}

/// `t` draws with replacement, each carrying its importance weight `1/(t q(v))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLayer {
    pub ids: Vec<u32>,
    pub scales: Vec<f64>,
}

impl SampledLayer {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn sample_layer(dist: &SampleDistribution, t: usize, seed: u64) -> Result<SampledLayer> {
    let all: Vec<u32> = (0..dist.len() as u32).collect();
    sample_from(dist, &all, t, &mut seed::rng(seed))
}

/// Draws from `dist` restricted to `support` and renormalized.
fn sample_from<R: Rng>(dist: &SampleDistribution, support: &[u32], t: usize, rng: &mut R) -> Result<SampledLayer> {
    if t == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let weights: Vec<f64> = support.iter().map(|&v| dist.q[v as usize]).collect();
    let mass: f64 = weights.iter().sum();
    let index = WeightedIndex::new(&weights).map_err(|_| Error::ZeroOperator)?;
    let mut ids = Vec::with_capacity(t);
    let mut scales = Vec::with_capacity(t);
    for _ in 0..t {
        let k = index.sample(rng);
        ids.push(support[k]);
        scales.push(mass / (t as f64 * weights[k]));
    }
    Ok(SampledLayer { ids, scales })
}

/// Monte-Carlo estimate of `Â · m` from one sampled layer:
/// `Σ_k scale_k · Â[:, s_k] · m[s_k]`.
pub fn estimate_product(adj: &NormalizedAdjacency, layer: &SampledLayer, m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(adj.vertex_count(), m.cols());
    for (&s, &scale) in layer.ids.iter().zip(&layer.scales) {
        let src = m.row(s as usize);
        let (cols, vals) = adj.row(s as usize);
        for (&u, &w) in cols.iter().zip(vals) {
            axpy(scale * w, src, out.row_mut(u as usize));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledHyper {
    pub base: Hyper,
    pub samples: usize,
    pub batch_size: usize,
}

impl Default for SampledHyper {
    fn default() -> Self {
        SampledHyper {
            base: Hyper::default(),
            samples: 400,
            batch_size: 256,
        }
    }
}

/// Row-compressed block `B[batch row, sampled vertex]` over the distinct
/// sampled vertices.
struct Block {
    /// Distinct sampled vertices, in first-draw order.
    unique: Vec<u32>,
    offsets: Vec<usize>,
    /// Positions into `unique`.
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Scratch buffers reused across batches.
struct Workspace {
    /// `slot[v]` is `v`'s position in `Block::unique` plus one, or 0.
    slot: Vec<u32>,
    weight: Vec<f64>,
    in_support: Vec<bool>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            slot: vec![0; n],
            weight: Vec::new(),
            in_support: vec![false; n],
        }
    }
}

fn build_block(adj: &NormalizedAdjacency, batch: &[u32], layer: &SampledLayer, ws: &mut Workspace) -> Block {
    let mut unique = Vec::new();
    ws.weight.clear();
    for (&s, &scale) in layer.ids.iter().zip(&layer.scales) {
        let slot = &mut ws.slot[s as usize];
        if *slot == 0 {
            unique.push(s);
            ws.weight.push(0.0);
            *slot = unique.len() as u32;
        }
        ws.weight[*slot as usize - 1] += scale;
    }
    let mut offsets = Vec::with_capacity(batch.len() + 1);
    offsets.push(0);
    let (mut cols, mut vals) = (Vec::new(), Vec::new());
    for &b in batch {
        let (nbrs, w) = adj.row(b as usize);
        for (&v, &a) in nbrs.iter().zip(w) {
            let slot = ws.slot[v as usize];
            if slot != 0 {
                cols.push(slot as usize - 1);
                vals.push(a * ws.weight[slot as usize - 1]);
            }
        }
        offsets.push(cols.len());
    }
    for &v in &unique {
        ws.slot[v as usize] = 0;
    }
    Block {
        unique,
        offsets,
        cols,
        vals,
    }
}

/// Sampled loss and gradients for one batch, given `p = Â X` and a layer
/// whose draws replace the output layer's neighbor sum. Returns
/// `(loss, grads, multiply_adds)`.
pub fn sampled_loss_and_grads(
    adj: &NormalizedAdjacency,
    p: &Matrix,
    model: &GcnModel,
    batch: &[u32],
    layer: &SampledLayer,
    labels: &[u8],
) -> Result<(f64, Grads, u64)> {
    let mut ws = Workspace::new(adj.vertex_count());
    let weights = vec![1.0 / batch.len().max(1) as f64; model.classes()];
    batch_step(adj, p, model, batch, layer, labels, &weights, &mut ws)
}

fn batch_step(
    adj: &NormalizedAdjacency,
    p: &Matrix,
    model: &GcnModel,
    batch: &[u32],
    layer: &SampledLayer,
    labels: &[u8],
    weights: &[f64],
    ws: &mut Workspace,
) -> Result<(f64, Grads, u64)> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let (f, h, c) = (model.features(), model.hidden(), model.classes());
    let block = build_block(adj, batch, layer, ws);
    let u = block.unique.len();

    let g = p.gather_rows(&block.unique);
    let a = g.matmul(&model.w1);
    let mut hid = a.clone();
    hid.map_inplace(|v| v.max(0.0));
    let hw = hid.matmul(&model.w2);

    let mut loss = 0.0;
    let mut d_hw = Matrix::zeros(u, c);
    let mut z = vec![0.0; c];
    for (i, &b) in batch.iter().enumerate() {
        z.fill(0.0);
        let range = block.offsets[i]..block.offsets[i + 1];
        for (&k, &w) in block.cols[range.clone()].iter().zip(&block.vals[range.clone()]) {
            axpy(w, hw.row(k), &mut z);
        }
        let label = labels[b as usize] as usize;
        let w = weights[label];
        loss += w * cross_entropy(&z, label);
        softmax_inplace(&mut z);
        z[label] -= 1.0;
        for (&k, &bw) in block.cols[range.clone()].iter().zip(&block.vals[range]) {
            axpy(bw * w, &z, d_hw.row_mut(k));
        }
    }

    let g_w2 = hid.t_matmul(&d_hw);
    let mut d_a = d_hw.matmul_t(&model.w2);
    d_a.as_mut_slice().iter_mut().zip(a.as_slice()).for_each(|(d, &a)| {
        if a <= 0.0 {
            *d = 0.0;
        }
    });
    let g_w1 = g.t_matmul(&d_a);

    let nnz = block.cols.len() as u64;
    let (u, f, h, c) = (u as u64, f as u64, h as u64, c as u64);
    let flops = 2 * u * f * h + 3 * u * h * c + 2 * nnz * c;
    Ok((loss, Grads { w1: g_w1, w2: g_w2 }, flops))
}

/// `Â X`, the parameter-free first propagation.
pub fn propagate_features(adj: &NormalizedAdjacency, x: &Matrix) -> Matrix {
    adj.spmm(x)
}

/// Minibatch training with one sampled output layer per batch. Batches are
/// processed in sequence; each takes one optimizer step.
pub fn train_sampled(
    adj: &NormalizedAdjacency,
    x: &Matrix,
    split: &TrainSplit,
    hyper: &SampledHyper,
) -> Result<TrainOutcome> {
    split.validate(adj.vertex_count(), CLASSES)?;
    if hyper.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if x.rows() != adj.vertex_count() {
        return Err(Error::Shape(format!(
            "feature matrix has {} rows for {} vertices",
            x.rows(),
            adj.vertex_count()
        )));
    }
    let base = &hyper.base;
    let setup = Instant::now();
    let dist = build_distribution(adj)?;
    let p = propagate_features(adj, x);
    let setup_seconds = setup.elapsed().as_secs_f64();

    let mut model = GcnModel::init(x.cols(), base.hidden, CLASSES, base.seed);
    let mut opt = OptimizerState::new(base.optimizer, &model);
    let mut rng = seed::rng(seed::sub_seed(base.seed, "fastsamp"));
    let mut ws = Workspace::new(adj.vertex_count());
    let mut order = split.train.clone();
    let mut support = Vec::new();
    // Train-level weights rescaled per batch keep each batch loss an unbiased
    // estimate of the full weighted loss.
    let train_weights = base.weighting.example_weights(&split.train, &split.labels, CLASSES);
    let mut weights = vec![0.0; CLASSES];
    let mut metrics = Vec::with_capacity(base.epochs);
    for epoch in 1..=base.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut flops) = (0.0, 0u64);
        for batch in order.chunks(hyper.batch_size) {
            support.clear();
            for &b in batch {
                for &v in adj.row(b as usize).0 {
                    if !ws.in_support[v as usize] {
                        ws.in_support[v as usize] = true;
                        support.push(v);
                    }
                }
            }
            for &v in &support {
                ws.in_support[v as usize] = false;
            }
            let layer = sample_from(&dist, &support, hyper.samples, &mut rng)?;
            let ratio = order.len() as f64 / batch.len() as f64;
            for (w, &t) in weights.iter_mut().zip(&train_weights) {
                *w = t * ratio;
            }
            let (loss, grads, work) =
                batch_step(adj, &p, &model, batch, &layer, &split.labels, &weights, &mut ws)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            opt.apply(&mut model, &grads, base.lr);
            loss_sum += loss / ratio;
            flops += work + (support.len() + batch.len()) as u64;
        }
        let loss = loss_sum;
        let seconds = start.elapsed().as_secs_f64();
        if !model.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let probs = forward(adj, x, &model)?;
        metrics.push(EpochMetrics {
            epoch,
            loss,
            val_accuracy: accuracy(&probs, &split.val, &split.labels),
            seconds,
            flops,
        });
    }
    Ok(TrainOutcome {
        model,
        metrics,
        setup_seconds,
    })
}
