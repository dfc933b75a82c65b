//! Pipeline stages shared by the subcommands and the acceptance suite.

use std::fmt;
use std::str::FromStr;

use amlgraph::dense::Matrix;
use amlgraph::fastsamp::{train_sampled, SampledHyper};
use amlgraph::gcnkit::{
    class_scores, evaluate, forward, labels_from_accounts, normalize_adjacency, standardize, stratified_split,
    train_full, EvalSummary, GcnModel, LogisticRegression, NormalizedAdjacency, TrainOutcome, TrainSplit,
    BASELINE_COLUMNS,
};
use amlgraph::gstore::{build_csr, CsrGraph};
use amlgraph::sentinel::{alert_features, scan, Alert};
use amlgraph::simnet::{generate_topology, Account};
use amlgraph::txflow::{simulate_flow, Transaction};
use amlgraph::typology::{inject_all, Injected};
use anyhow::{bail, Context, Result};

use crate::config::{PipelineConfig, TrainConfig};

/// simnet, then txflow, then typology injection.
pub fn generate(cfg: &PipelineConfig) -> Result<Injected> {
    let graph = generate_topology(&cfg.topology).context("simnet")?;
    let txs = simulate_flow(&graph, &cfg.flow).context("txflow")?;
    inject_all(graph, txs, &cfg.typologies).context("typology")
}

/// Directed graph of every account pair that exchanged at least one transaction.
pub fn transaction_graph(accounts: usize, txs: &[Transaction]) -> Result<CsrGraph> {
    let mut pairs: Vec<(u32, u32)> = txs.iter().map(|t| (t.src, t.dst)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(build_csr(accounts, &pairs)?)
}

/// Everything the learners consume.
pub struct Prepared {
    pub alerts: Vec<Alert>,
    pub raw_features: Matrix,
    pub x: Matrix,
    pub graph: CsrGraph,
    pub adj: NormalizedAdjacency,
    pub split: TrainSplit,
}

pub fn features(train: &TrainConfig, raw: &Matrix) -> Matrix {
    let mut x = standardize(raw);
    if let Some(c) = train.feature_clip {
        x.map_inplace(|v| v.clamp(-c, c));
    }
    x
}

pub fn prepare(cfg: &PipelineConfig, accounts: &[Account], txs: &[Transaction]) -> Result<Prepared> {
    let alerts = scan(txs, &cfg.rules).context("sentinel")?;
    let raw_features = alert_features(accounts, txs, &alerts).context("sentinel")?;
    let x = features(&cfg.train, &raw_features);
    let graph = transaction_graph(accounts.len(), txs)?;
    let adj = normalize_adjacency(&graph);
    let labels = labels_from_accounts(accounts);
    let t = &cfg.train;
    let split = stratified_split(&labels, t.train_frac, t.val_frac, t.split_seed).context("split")?;
    Ok(Prepared {
        alerts,
        raw_features,
        x,
        graph,
        adj,
        split,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gcn,
    FastGcn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gcn => "gcn",
            Method::FastGcn => "fastgcn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Method::Gcn),
            "fastgcn" => Ok(Method::FastGcn),
            other => bail!("unknown method {other:?}; expected gcn or fastgcn"),
        }
    }
}

pub fn train(cfg: &PipelineConfig, prep: &Prepared, method: Method) -> Result<TrainOutcome> {
    let t = &cfg.train;
    let out = match method {
        Method::Gcn => train_full(&prep.adj, &prep.x, &prep.split, &t.hyper),
        Method::FastGcn => {
            let hyper = SampledHyper {
                base: t.hyper,
                samples: t.samples,
                batch_size: t.batch_size,
            };
            train_sampled(&prep.adj, &prep.x, &prep.split, &hyper)
        }
    };
    out.with_context(|| format!("training {method}"))
}

/// Suspicious-class F1 with the threshold tuned on validation.
pub fn evaluate_model(prep: &Prepared, model: &GcnModel) -> Result<EvalSummary> {
    let probs = forward(&prep.adj, &prep.x, model)?;
    let s = &prep.split;
    Ok(evaluate(&class_scores(&probs, 1), &s.val, &s.test, &s.labels))
}

/// Degree and amount logistic regression on the same split, class weighting
/// and threshold rule as the graph models.
pub fn evaluate_baseline(cfg: &PipelineConfig, prep: &Prepared) -> Result<EvalSummary> {
    let t = &cfg.train;
    let lr = LogisticRegression::fit(
        &prep.x,
        &BASELINE_COLUMNS,
        &prep.split,
        t.hyper.weighting,
        t.baseline_epochs,
        t.baseline_lr,
    )
    .context("baseline")?;
    let s = &prep.split;
    Ok(evaluate(&lr.predict(&prep.x), &s.val, &s.test, &s.labels))
}

/// Mean training-step seconds per epoch.
pub fn mean_epoch_seconds(out: &TrainOutcome) -> f64 {
    out.metrics.iter().map(|m| m.seconds).sum::<f64>() / out.metrics.len().max(1) as f64
}
