//! Transaction time series over the account graph's channels.
//!
//! Each channel emits `Poisson(tx_rate)` transactions per step. Since a sum of
//! independent Poisson counts is Poisson and the split of a Poisson count across
//! steps is multinomial, a channel draws its total `Poisson(tx_rate * steps)`
//! once and assigns each transaction a uniform step. One simulation step is one
//! hour, so the 24-step velocity window covers a day.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvConfig;
use crate::money::Cents;
use crate::par;
use crate::seed;
use crate::simnet::{AccountGraph, AccountType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: u64,
    pub src: u32,
    pub dst: u32,
    pub amount: Cents,
    pub timestamp: u32,
}

/// Lognormal amount distribution in dollars: `exp(N(mu, sigma²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmountModel {
    pub mu: f64,
    pub sigma: f64,
}

impl AmountModel {
    pub fn median(dollars: f64, sigma: f64) -> Self {
        AmountModel {
            mu: dollars.ln(),
            sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub steps: u32,
    /// Expected transactions per channel per step.
    pub tx_rate: f64,
    /// Indexed `[src_type][dst_type]`.
    pub amount_models: [[AmountModel; 3]; 3],
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        use AccountType::*;
        let mut m = [[AmountModel::median(100.0, 1.0); 3]; 3];
        let mut set = |s: AccountType, d: AccountType, model| m[s.index()][d.index()] = model;
        set(Individual, Individual, AmountModel::median(60.0, 0.9));
        set(Individual, Business, AmountModel::median(120.0, 0.9));
        set(Individual, Holding, AmountModel::median(400.0, 0.9));
        set(Business, Individual, AmountModel::median(700.0, 0.7));
        set(Business, Business, AmountModel::median(1_800.0, 0.7));
        set(Business, Holding, AmountModel::median(2_500.0, 0.7));
        set(Holding, Individual, AmountModel::median(900.0, 0.7));
        set(Holding, Business, AmountModel::median(2_500.0, 0.7));
        // holding-to-holding treasury moves sit mostly above the reporting threshold
        set(Holding, Holding, AmountModel::median(50_000.0, 0.5));
        FlowConfig {
            steps: 24 * 14,
            tx_rate: 0.02,
            amount_models: m,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.tx_rate > 0.0) || !self.tx_rate.is_finite() {
            return Err(Error::Config(format!("tx_rate {} must be positive", self.tx_rate)));
        }
        for row in &self.amount_models {
            for m in row {
                if !(m.sigma > 0.0) || !m.mu.is_finite() || !m.sigma.is_finite() {
                    return Err(Error::Config(format!(
                        "amount model needs finite mu and sigma > 0, got ({}, {})",
                        m.mu, m.sigma
                    )));
                }
            }
        }
        Ok(())
    }

    /// Keys: `steps`, `tx_rate`, `amount.<src_type>.<dst_type> = mu,sigma`.
    /// `seed` is supplied by the caller.
    pub fn from_kv(kv: &KvConfig, seed: u64) -> Result<Self> {
        let mut cfg = FlowConfig {
            seed,
            ..FlowConfig::default()
        };
        cfg.steps = kv.parse_or("steps", cfg.steps)?;
        cfg.tx_rate = kv.parse_or("tx_rate", cfg.tx_rate)?;
        for s in AccountType::ALL {
            for d in AccountType::ALL {
                let key = format!("amount.{s}.{d}");
                if let Some(v) = kv.get(&key) {
                    let (mu, sigma) = v
                        .split_once(',')
                        .ok_or_else(|| Error::Config(format!("{key}: expected mu,sigma")))?;
                    let parse = |x: &str| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("{key}: bad number {x:?}")))
                    };
                    cfg.amount_models[s.index()][d.index()] = AmountModel {
                        mu: parse(mu)?,
                        sigma: parse(sigma)?,
                    };
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Transactions over every channel of `graph`, sorted by `(timestamp, tx_id)`.
/// Within a step, emission order is channel order. Channel `c` draws from its own
/// stream `stream_seed(seed, c)`, so the result does not depend on thread count.
pub fn simulate_flow(graph: &AccountGraph, config: &FlowConfig) -> Result<Vec<Transaction>> {
    config.validate()?;
    let lambda = config.tx_rate * config.steps as f64;
    let count_dist = Poisson::new(lambda).map_err(|e| Error::Config(format!("tx_rate: {e}")))?;
    let mut amount_dists = Vec::with_capacity(9);
    for row in &config.amount_models {
        for m in row {
            amount_dists.push(
                LogNormal::new(m.mu, m.sigma).map_err(|e| Error::Config(format!("amount model: {e}")))?,
            );
        }
    }
    let accounts = &graph.accounts;
    let per_channel: Vec<Vec<(u32, Cents)>> = par::map_range(graph.edges.len(), |c| {
        let (s, d) = graph.edges[c];
        let mut rng = seed::rng(seed::stream_seed(config.seed, c as u64));
        let n = count_dist.sample(&mut rng) as usize;
        let model = &amount_dists
            [accounts[s as usize].account_type.index() * 3 + accounts[d as usize].account_type.index()];
        let mut txs: Vec<(u32, Cents)> = (0..n)
            .map(|_| {
                let step = rng.random_range(0..config.steps);
                let amount = Cents::from_f64_rounded(model.sample(&mut rng)).max(Cents(1));
                (step, amount)
            })
            .collect();
        txs.sort_by_key(|&(step, _)| step);
        txs
    });

    let mut keyed: Vec<(u32, u32, u32)> = Vec::new();
    for (c, txs) in per_channel.iter().enumerate() {
        for (k, &(step, _)) in txs.iter().enumerate() {
            keyed.push((step, c as u32, k as u32));
        }
    }
    keyed.sort_unstable();
    Ok(keyed
        .into_iter()
        .enumerate()
        .map(|(i, (step, c, k))| {
            let (src, dst) = graph.edges[c as usize];
            Transaction {
                tx_id: i as u64,
                src,
                dst,
                amount: per_channel[c as usize][k as usize].1,
                timestamp: step,
            }
        })
        .collect())
}

/// Summed volume on one directed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedEdge {
    pub src: u32,
    pub dst: u32,
    pub total: Cents,
    pub count: u64,
}

/// One edge per `(src, dst)` with the summed amount and count of transactions
/// whose timestamp lies in `window`, sorted by `(src, dst)`.
pub fn aggregate_edges(txs: &[Transaction], window: Range<u32>) -> Vec<WeightedEdge> {
    let mut acc: BTreeMap<(u32, u32), (Cents, u64)> = BTreeMap::new();
    for t in txs.iter().filter(|t| window.contains(&t.timestamp)) {
        let e = acc.entry((t.src, t.dst)).or_insert((Cents::ZERO, 0));
        e.0 += t.amount;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((src, dst), (total, count))| WeightedEdge {
            src,
            dst,
            total,
            count,
        })
        .collect()
}

/// Checks ordering by `(timestamp, tx_id)`, dense-free ascending ids, positive amounts.
pub fn check_sorted(txs: &[Transaction]) -> Result<()> {
    for (i, w) in txs.windows(2).enumerate() {
        if (w[0].timestamp, w[0].tx_id) >= (w[1].timestamp, w[1].tx_id) || w[0].tx_id >= w[1].tx_id {
            return Err(Error::Unsorted { position: i + 1 });
        }
    }
    Ok(())
}

/// Reassigns dense ascending ids after sorting by `(timestamp, tx_id)`.
/// Returns the old → new id map as sorted pairs.
pub fn renumber(txs: &mut [Transaction]) -> Vec<(u64, u64)> {
    txs.sort_by_key(|t| (t.timestamp, t.tx_id));
    let mut map: Vec<(u64, u64)> = txs
        .iter_mut()
        .enumerate()
        .map(|(i, t)| {
            let old = t.tx_id;
            t.tx_id = i as u64;
            (old, i as u64)
        })
        .collect();
    map.sort_unstable();
    map
}

pub fn write_transactions_csv<W: Write>(txs: &[Transaction], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for t in txs {
        out.serialize(t)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_transactions_csv<R: Read>(r: R) -> Result<Vec<Transaction>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Parses one headerless `tx_id,src,dst,amount,timestamp` row (streaming input).
pub fn parse_transaction_row(line: &str) -> Result<Transaction> {
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != 5 {
        return Err(Error::Format(format!("expected 5 fields, got {}: {line:?}", fields.len())));
    }
    let num = |i: usize| -> Result<u64> {
        fields[i]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("field {i} of {line:?} is not an integer")))
    };
    let narrow = |v: u64| u32::try_from(v).map_err(|_| Error::Format(format!("{v} exceeds u32 in {line:?}")));
    Ok(Transaction {
        tx_id: num(0)?,
        src: narrow(num(1)?)?,
        dst: narrow(num(2)?)?,
        amount: fields[3].parse()?,
        timestamp: narrow(num(4)?)?,
    })
}
