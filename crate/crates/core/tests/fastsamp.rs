mod common;

use amlgraph::dense::Matrix;
use amlgraph::fastsamp::{
    build_distribution, propagate_features, sample_layer, sampled_loss_and_grads, train_sampled,
    SampledHyper,
};
use amlgraph::gcnkit::{
    full_epoch_flops, loss_and_grads, normalize_adjacency, GcnModel, Hyper, NormalizedAdjacency, TrainSplit,
};
use amlgraph::gstore::build_csr;
use amlgraph::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_adj(n: usize, m: usize, seed: u64) -> (NormalizedAdjacency, Vec<(u32, u32)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = common::random_edges(n as u32, m, &mut rng);
    (normalize_adjacency(&build_csr(n, &edges).unwrap()), edges)
}

fn ring(n: u32) -> NormalizedAdjacency {
    let edges: Vec<(u32, u32)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    normalize_adjacency(&build_csr(n as usize, &edges).unwrap())
}

#[test]
fn q_matches_dense_column_norms() {
    let (adj, edges) = random_adj(60, 150, 1);
    let dense = common::dense_normalized(60, &edges);
    let norms: Vec<f64> = (0..60).map(|j| (0..60).map(|i| dense.get(i, j).powi(2)).sum()).collect();
    let total: f64 = norms.iter().sum();
    let q = build_distribution(&adj).unwrap();
    for (j, &p) in q.probabilities().iter().enumerate() {
        assert!((p - norms[j] / total).abs() < 1e-12);
    }
}

#[test]
fn regular_graph_gives_uniform_q() {
    let q = build_distribution(&ring(40)).unwrap();
    assert!(q.probabilities().iter().all(|&p| (p - 1.0 / 40.0).abs() < 1e-15));
}

#[test]
fn empty_graph_has_no_distribution() {
    let adj = normalize_adjacency(&build_csr(0, &[]).unwrap());
    assert!(matches!(build_distribution(&adj), Err(Error::ZeroOperator)));
}

#[test]
fn equal_seeds_equal_samples() {
    let (adj, _) = random_adj(200, 800, 2);
    let q = build_distribution(&adj).unwrap();
    assert_eq!(sample_layer(&q, 400, 9).unwrap(), sample_layer(&q, 400, 9).unwrap());
    assert_ne!(sample_layer(&q, 400, 9).unwrap(), sample_layer(&q, 400, 10).unwrap());
}

#[test]
fn monte_carlo_mean_of_first_layer_is_exact() {
    let mc = common::first_layer_monte_carlo(50, 10_000, 3);
    assert!(mc.max_row_z <= 3.0, "row mean {} standard errors off", mc.max_row_z);
    // a biased estimator would push the average squared z-score well above 1
    assert!(mc.mean_sq_z < 2.0, "mean squared z-score {}", mc.mean_sq_z);
}

/// With zero output weights the logits do not depend on the draw, so the
/// sampled gradient is linear in the sampled block and its mean must equal
/// the full-batch gradient.
#[test]
fn sampled_gradient_is_unbiased_at_zero_output_weights() {
    let n = 30;
    let adj = ring(n as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = common::random_matrix(n, 3, 1.0, &mut rng);
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let train: Vec<u32> = (0..20).collect();
    let split = TrainSplit { train: train.clone(), val: vec![], test: vec![], labels: labels.clone() };
    let model = GcnModel { w1: common::random_matrix(3, 4, 1.0, &mut rng), w2: Matrix::zeros(4, 2) };
    let (_, full) = loss_and_grads(&adj, &x, &model, &split).unwrap();
    let p = propagate_features(&adj, &x);
    let q = build_distribution(&adj).unwrap();

    let runs = 1_000;
    let len = full.w2.as_slice().len();
    let mut moments: Vec<common::Moments> = (0..len).map(|_| common::Moments::default()).collect();
    for r in 0..runs {
        let layer = sample_layer(&q, n, 1_000 + r).unwrap();
        let (_, g, _) = sampled_loss_and_grads(&adj, &p, &model, &train, &layer, &labels).unwrap();
        assert!(g.w1.as_slice().iter().all(|&v| v == 0.0));
        for (m, &v) in moments.iter_mut().zip(g.w2.as_slice()) {
            m.push(v);
        }
    }
    for (i, m) in moments.iter().enumerate() {
        let (mean, se) = m.summary(runs as f64);
        let want = full.w2.as_slice()[i];
        assert!((mean - want).abs() <= 3.0 * se + 1e-12, "entry {i}: {mean} vs {want}, se {se}");
    }
}

fn planted(n: usize, seed: u64) -> (NormalizedAdjacency, Matrix, TrainSplit) {
    let (adj, _) = random_adj(n, 5 * n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
    let x = Matrix::from_vec(
        n,
        4,
        (0..n)
            .flat_map(|v| {
                let y = labels[v] as f64;
                [y + rng.random_range(-0.7..0.7), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0]
            })
            .collect(),
    );
    let ids: Vec<u32> = (0..n as u32).collect();
    let (a, b) = (n * 6 / 10, n * 8 / 10);
    let split = TrainSplit { train: ids[..a].to_vec(), val: ids[a..b].to_vec(), test: ids[b..].to_vec(), labels };
    (adj, x, split)
}

#[test]
fn epoch_work_stays_below_full_batch() {
    let (adj, x, split) = planted(5_000, 7);
    let hyper = SampledHyper { base: Hyper { hidden: 32, epochs: 2, ..Hyper::default() }, ..SampledHyper::default() };
    let out = train_sampled(&adj, &x, &split, &hyper).unwrap();
    let full = full_epoch_flops(adj.nnz(), adj.vertex_count(), 4, 32, 2);
    assert!(out.metrics.iter().all(|m| m.flops < full), "{} vs {full}", out.metrics[0].flops);
}

#[test]
fn sampled_training_is_deterministic_and_learns() {
    let (adj, x, split) = planted(2_000, 8);
    let hyper = SampledHyper { base: Hyper { hidden: 16, epochs: 8, seed: 3, ..Hyper::default() }, ..SampledHyper::default() };
    let a = train_sampled(&adj, &x, &split, &hyper).unwrap();
    let b = train_sampled(&adj, &x, &split, &hyper).unwrap();
    assert_eq!(a.model, b.model);
    let first = a.metrics.first().unwrap().loss;
    let last = a.metrics.last().unwrap().loss;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn defaults_follow_the_reference_setup() {
    let h = SampledHyper::default();
    assert_eq!((h.samples, h.batch_size, h.base.lr, h.base.epochs), (400, 256, 0.01, 32));
}

#[test]
fn zero_samples_rejected() {
    let q = build_distribution(&ring(5)).unwrap();
    assert!(matches!(sample_layer(&q, 0, 0), Err(Error::Config(_))));
}
