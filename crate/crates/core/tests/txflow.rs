use amlgraph::simnet::{populate_accounts, AccountGraph, AccountProfile};
use amlgraph::txflow::{
    aggregate_edges, check_sorted, read_transactions_csv, simulate_flow, write_transactions_csv, FlowConfig,
    Transaction,
};
use amlgraph::Cents;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{DiscreteCDF, Poisson};
use std::collections::HashMap;

fn chain(channels: usize) -> AccountGraph {
    AccountGraph {
        accounts: populate_accounts(channels + 1, &AccountProfile::default(), 1).unwrap(),
        edges: (0..channels as u32).map(|i| (i, i + 1)).collect(),
    }
}

fn config(steps: u32, tx_rate: f64, seed: u64) -> FlowConfig {
    FlowConfig {
        steps,
        tx_rate,
        seed,
        ..FlowConfig::default()
    }
}

fn random_log(n: usize, accounts: u32, steps: u32, seed: u64) -> Vec<Transaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut txs: Vec<Transaction> = (0..n)
        .map(|_| {
            let src = rng.random_range(0..accounts);
            let dst = (src + rng.random_range(1..accounts)) % accounts;
            Transaction {
                tx_id: 0,
                src,
                dst,
                amount: Cents(rng.random_range(1..2_000_000)),
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

#[test]
fn vanishing_rate_emits_nothing() {
    let txs = simulate_flow(&chain(1), &config(1, 1e-9, 3)).unwrap();
    assert!(txs.is_empty());
}

#[test]
fn total_count_within_poisson_interval() {
    let graph = chain(1_000);
    let expected = 1_000.0 * 100.0 * 0.09;
    let dist = Poisson::new(expected).unwrap();
    let (lo, hi) = (dist.inverse_cdf(0.0005), dist.inverse_cdf(0.9995));
    let mut total = 0usize;
    let trials = 20;
    for seed in 0..trials {
        let n = simulate_flow(&graph, &config(100, 0.09, seed)).unwrap().len();
        assert!((lo..=hi).contains(&(n as u64)), "seed {seed}: {n} outside [{lo}, {hi}]");
        total += n;
    }
    let mean = total as f64 / trials as f64;
    assert!((mean - expected).abs() < 0.01 * expected, "mean {mean} vs {expected}");
}

#[test]
fn log_is_sorted_and_well_formed() {
    let graph = chain(300);
    let txs = simulate_flow(&graph, &config(50, 0.3, 8)).unwrap();
    check_sorted(&txs).unwrap();
    assert!(txs.iter().enumerate().all(|(i, t)| t.tx_id == i as u64));
    let channels: std::collections::HashSet<(u32, u32)> = graph.edges.iter().copied().collect();
    for t in &txs {
        assert!(t.amount > Cents::ZERO);
        assert_ne!(t.src, t.dst);
        assert!(channels.contains(&(t.src, t.dst)));
        assert!(t.timestamp < 50);
    }
}

#[test]
fn same_seed_same_log() {
    let graph = chain(200);
    let a = simulate_flow(&graph, &config(40, 0.2, 5)).unwrap();
    let b = simulate_flow(&graph, &config(40, 0.2, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, simulate_flow(&graph, &config(40, 0.2, 6)).unwrap());
}

#[test]
fn csv_keeps_two_decimals() {
    let txs = simulate_flow(&chain(20), &config(20, 0.5, 2)).unwrap();
    let mut buf = Vec::new();
    write_transactions_csv(&txs, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("tx_id,src,dst,amount,timestamp\n"));
    for line in text.lines().skip(1) {
        let amount = line.split(',').nth(3).unwrap();
        let (_, frac) = amount.split_once('.').unwrap();
        assert_eq!(frac.len(), 2, "{amount}");
    }
    assert_eq!(read_transactions_csv(&buf[..]).unwrap(), txs);
}

#[test]
fn two_transactions_aggregate() {
    let t = |tx_id, cents, timestamp| Transaction {
        tx_id,
        src: 0,
        dst: 1,
        amount: Cents(cents),
        timestamp,
    };
    let edges = aggregate_edges(&[t(0, 10_000, 0), t(1, 5_000, 1)], 0..2);
    assert_eq!(edges.len(), 1);
    assert_eq!((edges[0].src, edges[0].dst), (0, 1));
    assert_eq!(edges[0].total, "150.00".parse().unwrap());
    assert_eq!(edges[0].count, 2);
    assert!(aggregate_edges(&[t(0, 1, 0)], 3..3).is_empty());
}

#[test]
fn aggregation_matches_hash_map_oracle() {
    let txs = random_log(1_000, 40, 100, 17);
    let mut oracle: HashMap<(u32, u32), (i64, u64)> = HashMap::new();
    for t in txs.iter().filter(|t| (10..90).contains(&t.timestamp)) {
        let e = oracle.entry((t.src, t.dst)).or_default();
        e.0 += t.amount.0;
        e.1 += 1;
    }
    let edges = aggregate_edges(&txs, 10..90);
    assert_eq!(edges.len(), oracle.len());
    for e in &edges {
        assert_eq!(oracle[&(e.src, e.dst)], (e.total.0, e.count));
    }
}

proptest! {
    #[test]
    fn partitioned_windows_add_up(seed: u64, cut_a in 0u32..60, cut_b in 0u32..60) {
        let txs = random_log(400, 12, 60, seed);
        let (a, b) = (cut_a.min(cut_b), cut_a.max(cut_b));
        let mut sums: HashMap<(u32, u32), (i64, u64)> = HashMap::new();
        for w in [0..a, a..b, b..60] {
            for e in aggregate_edges(&txs, w) {
                let s = sums.entry((e.src, e.dst)).or_default();
                s.0 += e.total.0;
                s.1 += e.count;
            }
        }
        let full = aggregate_edges(&txs, 0..60);
        prop_assert_eq!(full.len(), sums.len());
        for e in full {
            prop_assert_eq!(sums[&(e.src, e.dst)], (e.total.0, e.count));
        }
    }

    #[test]
    fn aggregation_conserves_volume(seed: u64) {
        let txs = random_log(300, 10, 30, seed);
        let raw: Cents = txs.iter().map(|t| t.amount).sum();
        let agg: Cents = aggregate_edges(&txs, 0..30).iter().map(|e| e.total).sum();
        prop_assert_eq!(raw, agg);
        let count: u64 = aggregate_edges(&txs, 0..30).iter().map(|e| e.count).sum();
        prop_assert_eq!(count, txs.len() as u64);
    }
}
