use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::seed;
use crate::simnet::{Account, SarLabel};

use super::adjacency::NormalizedAdjacency;
use super::eval::accuracy;
use super::model::{forward, loss_and_grads_weighted, GcnModel, Grads};

/// Labeled vertex ids for training, validation and test, plus the label of
/// every vertex (only entries under `train` reach the gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSplit {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
    pub labels: Vec<u8>,
}

impl TrainSplit {
    pub fn validate(&self, vertex_count: usize, classes: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        if self.labels.len() != vertex_count {
            return Err(Error::Shape(format!(
                "{} labels for {} vertices",
                self.labels.len(),
                vertex_count
            )));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Shape(format!("label {l} with {classes} classes")));
        }
        let mut seen = vec![false; vertex_count];
        for &v in self.train.iter().chain(&self.val).chain(&self.test) {
            let slot = seen.get_mut(v as usize).ok_or(Error::VertexOutOfRange {
                vertex: v as u64,
                count: vertex_count,
            })?;
            if *slot {
                return Err(Error::Config(format!("vertex {v} appears in more than one split")));
            }
            *slot = true;
        }
        Ok(())
    }
}

pub fn labels_from_accounts(accounts: &[Account]) -> Vec<u8> {
    accounts
        .iter()
        .map(|a| u8::from(a.sar_label == SarLabel::Suspicious))
        .collect()
}

/// Shuffles each class separately and cuts it into train/val/test by the
/// given fractions; the test set takes the remainder. Ids come out sorted.
pub fn stratified_split(labels: &[u8], train_frac: f64, val_frac: f64, seed: u64) -> Result<TrainSplit> {
    if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac <= 1.0) {
        return Err(Error::Config(format!(
            "split fractions train={train_frac} val={val_frac} are not a partition"
        )));
    }
    let mut rng = seed::rng(seed);
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..classes {
        let mut ids: Vec<u32> = (0..labels.len() as u32).filter(|&v| labels[v as usize] as usize == c).collect();
        ids.shuffle(&mut rng);
        let n_train = (ids.len() as f64 * train_frac).round() as usize;
        let n_val = ((ids.len() as f64 * val_frac).round() as usize).min(ids.len() - n_train);
        train.extend_from_slice(&ids[..n_train]);
        val.extend_from_slice(&ids[n_train..n_train + n_val]);
        test.extend_from_slice(&ids[n_train + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    Ok(TrainSplit {
        train,
        val,
        test,
        labels: labels.to_vec(),
    })
}

/// How training examples are weighted in the mean cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassWeighting {
    /// Every example counts once.
    #[default]
    Uniform,
    /// Each class present in the training set contributes equal total weight.
    Balanced,
}

impl ClassWeighting {
    /// Weight of one example of each class, normalized so the weights of
    /// `ids` sum to 1.
    pub fn example_weights(self, ids: &[u32], labels: &[u8], classes: usize) -> Vec<f64> {
        let n = ids.len().max(1) as f64;
        match self {
            ClassWeighting::Uniform => vec![1.0 / n; classes],
            ClassWeighting::Balanced => {
                let mut counts = vec![0usize; classes];
                for &v in ids {
                    counts[labels[v as usize] as usize] += 1;
                }
                let present = counts.iter().filter(|&&c| c > 0).count().max(1) as f64;
                counts
                    .iter()
                    .map(|&c| if c == 0 { 0.0 } else { 1.0 / (present * c as f64) })
                    .collect()
            }
        }
    }
}

impl std::str::FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ClassWeighting::Uniform),
            "balanced" => Ok(ClassWeighting::Balanced),
            other => Err(Error::Config(format!("unknown class weighting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::adam()),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Moment estimates carried between steps.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    step: u32,
    m: [Vec<f64>; 2],
    v: [Vec<f64>; 2],
}

impl OptimizerState {
    pub fn new(kind: Optimizer, model: &GcnModel) -> Self {
        let sizes = [model.w1.as_slice().len(), model.w2.as_slice().len()];
        let (m, v) = match kind {
            Optimizer::Sgd => (Default::default(), Default::default()),
            Optimizer::Adam { .. } => (sizes.map(|n| vec![0.0; n]), sizes.map(|n| vec![0.0; n])),
        };
        OptimizerState { kind, step: 0, m, v }
    }

    pub fn apply(&mut self, model: &mut GcnModel, grads: &Grads, lr: f64) {
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => {
                model.w1.sub_scaled(lr, &grads.w1);
                model.w2.sub_scaled(lr, &grads.w2);
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let params = [model.w1.as_mut_slice(), model.w2.as_mut_slice()];
                let gs = [grads.w1.as_slice(), grads.w2.as_slice()];
                for (k, (w, g)) in params.into_iter().zip(gs).enumerate() {
                    for (((w, &g), m), v) in w.iter_mut().zip(g).zip(&mut self.m[k]).zip(&mut self.v[k]) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub weighting: ClassWeighting,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            hidden: 128,
            lr: 0.01,
            epochs: 32,
            seed: 0,
            optimizer: Optimizer::default(),
            weighting: ClassWeighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: f64,
    /// Wall time of the training step alone.
    pub seconds: f64,
    /// Multiply-adds spent in the training step.
    pub flops: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GcnModel,
    pub metrics: Vec<EpochMetrics>,
    /// Work done once before the first epoch, e.g. sampling distributions.
    pub setup_seconds: f64,
}

/// Multiply-adds in one full-batch forward and backward pass.
pub fn full_epoch_flops(nnz: usize, n: usize, features: usize, hidden: usize, classes: usize) -> u64 {
    let (nnz, n, f, h, c) = (nnz as u64, n as u64, features as u64, hidden as u64, classes as u64);
    2 * n * f * h + 2 * nnz * h + 3 * n * h * c + 2 * nnz * c
}

pub(crate) const CLASSES: usize = 2;

/// Full-batch gradient training; one optimizer step per epoch.
pub fn train_full(adj: &NormalizedAdjacency, x: &Matrix, split: &TrainSplit, hyper: &Hyper) -> Result<TrainOutcome> {
    split.validate(adj.vertex_count(), CLASSES)?;
    let mut model = GcnModel::init(x.cols(), hyper.hidden, CLASSES, hyper.seed);
    let mut opt = OptimizerState::new(hyper.optimizer, &model);
    let flops = full_epoch_flops(adj.nnz(), adj.vertex_count(), x.cols(), hyper.hidden, CLASSES);
    let mut metrics = Vec::with_capacity(hyper.epochs);
    for epoch in 1..=hyper.epochs {
        let start = Instant::now();
        let (loss, grads) = loss_and_grads_weighted(adj, x, &model, split, hyper.weighting)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        opt.apply(&mut model, &grads, hyper.lr);
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
        setup_seconds: 0.0,
    })
}

pub fn write_metrics_csv<W: Write>(metrics: &[EpochMetrics], mut w: W) -> Result<()> {
    writeln!(w, "epoch,loss,val_acc,seconds")?;
    for m in metrics {
        writeln!(w, "{},{:.6},{:.6},{:.6}", m.epoch, m.loss, m.val_accuracy, m.seconds)?;
    }
    w.flush()?;
    Ok(())
}
