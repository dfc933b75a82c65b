//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use amlgraph::dense::Matrix;
use amlgraph::fastsamp::{build_distribution, estimate_product, propagate_features, sample_layer};
use amlgraph::gcnkit::{loss_and_grads_weighted, normalize_adjacency, ClassWeighting, GcnModel, TrainSplit};
use amlgraph::gstore::build_csr;
use amlgraph::sentinel::{Rule, RuleSet};
use amlgraph::txflow::Transaction;
use amlgraph::Cents;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every alert as `(rule, account, sorted tx ids)`, found by enumerating all
/// windows: each qualifying transaction's step opens a candidate window, its
/// members are collected by a full scan, and windows contained in another are
/// dropped.
pub fn brute_force_alerts(txs: &[Transaction], rules: &RuleSet) -> BTreeSet<(Rule, u32, Vec<u64>)> {
    let mut out = BTreeSet::new();
    let floor = Cents((rules.near_miss_fraction * rules.threshold.0 as f64 - 1e-6).ceil() as i64);
    for t in txs {
        if t.amount >= rules.threshold {
            out.insert((Rule::OverThreshold, t.src, vec![t.tx_id]));
        } else if t.amount >= floor {
            out.insert((Rule::NearMiss, t.src, vec![t.tx_id]));
        }
    }
    let mut by_account: HashMap<u32, Vec<&Transaction>> = HashMap::new();
    for t in txs.iter().filter(|t| t.amount >= rules.velocity_amount) {
        by_account.entry(t.src).or_default().push(t);
    }
    for (account, list) in by_account {
        let mut windows: Vec<BTreeSet<u64>> = Vec::new();
        for opener in &list {
            let start = opener.timestamp;
            let members: BTreeSet<u64> = list
                .iter()
                .filter(|t| t.timestamp >= start && t.timestamp - start < rules.velocity_window)
                .map(|t| t.tx_id)
                .collect();
            windows.push(members);
        }
        for (i, w) in windows.iter().enumerate() {
            let contained = windows
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && other != w && w.is_subset(other));
            if !contained && w.len() >= rules.velocity_count {
                out.insert((Rule::Velocity, account, w.iter().copied().collect()));
            }
        }
    }
    out
}

/// Random log sorted by `(timestamp, tx_id)` with amounts clustered around the
/// rule boundaries.
pub fn random_log(n: usize, accounts: u32, steps: u32, seed: u64) -> Vec<Transaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut txs: Vec<Transaction> = (0..n)
        .map(|_| {
            let src = rng.random_range(0..accounts);
            let dst = (src + rng.random_range(1..accounts)) % accounts;
            let dollars_cents = match rng.random_range(0..6) {
                0 => rng.random_range(940_000..1_010_000),
                1 | 2 => rng.random_range(190_000..260_000),
                _ => rng.random_range(1..200_000),
            };
            Transaction {
                tx_id: 0,
                src,
                dst,
                amount: Cents(dollars_cents),
                timestamp: rng.random_range(0..steps),
            }
        })
        .collect();
    txs.sort_by_key(|t| t.timestamp);
    for (i, t) in txs.iter_mut().enumerate() {
        t.tx_id = i as u64;
    }
    txs
}

pub fn dense_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// `D^{-1/2}(A + I)D^{-1/2}` built densely from a directed edge list.
pub fn dense_normalized(n: usize, edges: &[(u32, u32)]) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for &(s, d) in edges {
        if s != d {
            a.set(s as usize, d as usize, 1.0);
            a.set(d as usize, s as usize, 1.0);
        }
    }
    for i in 0..n {
        a.set(i, i, 1.0);
    }
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, a.get(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    a
}

/// `softmax(Â relu(Â X W1) W2)` with plain loops.
pub fn dense_forward(a_hat: &Matrix, x: &Matrix, w1: &Matrix, w2: &Matrix) -> Matrix {
    let mut h = dense_matmul(a_hat, &dense_matmul(x, w1));
    h.map_inplace(|v| v.max(0.0));
    let mut z = dense_matmul(a_hat, &dense_matmul(&h, w2));
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        row.iter_mut().for_each(|v| *v = (*v - m).exp() / s);
    }
    z
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect())
}

pub fn random_edges(n: u32, m: usize, rng: &mut impl Rng) -> Vec<(u32, u32)> {
    (0..m).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
}

pub struct Instance {
    pub edges: Vec<(u32, u32)>,
    pub x: Matrix,
    pub model: GcnModel,
    pub split: TrainSplit,
}

pub fn instance(n: usize, f: usize, h: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_edges(n as u32, 2 * n, &mut rng);
    let x = random_matrix(n, f, 1.0, &mut rng);
    let model = GcnModel {
        w1: random_matrix(f, h, 0.8, &mut rng),
        w2: random_matrix(h, 2, 0.8, &mut rng),
    };
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let mut ids: Vec<u32> = (0..n as u32).collect();
    ids.shuffle(&mut rng);
    let cut = n * 3 / 5;
    let mut train = ids[..cut].to_vec();
    let mut val = ids[cut..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Instance {
        edges,
        x,
        model,
        split: TrainSplit { train, val, test: Vec::new(), labels },
    }
}

fn norm(m: &Matrix) -> f64 {
    m.frobenius_sq().sqrt()
}

/// Norm-wise relative error between analytic and central-difference gradients.
pub fn gradient_error(inst: &Instance, weighting: ClassWeighting) -> f64 {
    let n = inst.x.rows();
    let adj = normalize_adjacency(&build_csr(n, &inst.edges).unwrap());
    let loss_at = |m: &GcnModel| loss_and_grads_weighted(&adj, &inst.x, m, &inst.split, weighting).unwrap().0;
    let (_, grads) = loss_and_grads_weighted(&adj, &inst.x, &inst.model, &inst.split, weighting).unwrap();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for (layer, analytic) in [(0, &grads.w1), (1, &grads.w2)] {
        let mut numeric = Matrix::zeros(analytic.rows(), analytic.cols());
        for i in 0..analytic.as_slice().len() {
            let mut plus = inst.model.clone();
            let mut minus = inst.model.clone();
            let (p, m) = if layer == 0 { (&mut plus.w1, &mut minus.w1) } else { (&mut plus.w2, &mut minus.w2) };
            p.as_mut_slice()[i] += eps;
            m.as_mut_slice()[i] -= eps;
            numeric.as_mut_slice()[i] = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
        }
        let diff = norm(&{
            let mut d = analytic.clone();
            d.sub_scaled(1.0, &numeric);
            d
        });
        worst = worst.max(diff / norm(analytic).max(norm(&numeric)).max(1e-12));
    }
    worst
}

/// Running mean and variance of a stream of estimates.
#[derive(Default)]
pub struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    /// `(mean, standard error of the mean)` over `k` pushes.
    pub fn summary(&self, k: f64) -> (f64, f64) {
        let mean = self.sum / k;
        (mean, ((self.sum_sq / k - mean * mean).max(0.0) / (k - 1.0)).sqrt())
    }
}

pub struct MonteCarloReport {
    /// Largest `|mean - exact| / se` over the row means of `ÂX`.
    pub max_row_z: f64,
    /// Average squared z-score over every entry of `ÂX`.
    pub mean_sq_z: f64,
}

/// Resamples the first-layer product `ÂX` on a random `n`-vertex graph with
/// two feature columns, 20 draws per resample.
pub fn first_layer_monte_carlo(n: usize, runs: u64, seed: u64) -> MonteCarloReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_edges(n as u32, (12 * n) / 5, &mut rng);
    let adj = normalize_adjacency(&build_csr(n, &edges).unwrap());
    let x = random_matrix(n, 2, 1.0, &mut rng);
    let exact = propagate_features(&adj, &x);
    let q = build_distribution(&adj).unwrap();
    let mut rows: Vec<Moments> = (0..n).map(|_| Moments::default()).collect();
    let mut entries: Vec<Moments> = (0..2 * n).map(|_| Moments::default()).collect();
    for r in 0..runs {
        let est = estimate_product(&adj, &sample_layer(&q, 20, seed.wrapping_mul(1_000_003).wrapping_add(r)).unwrap(), &x);
        for (v, m) in rows.iter_mut().enumerate() {
            m.push(est.row(v).iter().sum::<f64>() / 2.0);
        }
        for (m, &e) in entries.iter_mut().zip(est.as_slice()) {
            m.push(e);
        }
    }
    let k = runs as f64;
    let z = |m: &Moments, want: f64| {
        let (mean, se) = m.summary(k);
        if se > 0.0 {
            (mean - want).abs() / se
        } else if (mean - want).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let max_row_z = (0..n)
        .map(|v| z(&rows[v], exact.row(v).iter().sum::<f64>() / 2.0))
        .fold(0.0, f64::max);
    let sq: Vec<f64> = entries.iter().zip(exact.as_slice()).map(|(m, &w)| z(m, w).powi(2)).collect();
    MonteCarloReport {
        max_row_z,
        mean_sq_z: sq.iter().sum::<f64>() / sq.len() as f64,
    }
}
