//! Subcommand bodies. Each returns the files it wrote; the caller prints them.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use amlgraph::deltainfer::IncrementalEngine;
use amlgraph::gcnkit::{read_checkpoint, write_checkpoint, write_metrics_csv};
use amlgraph::gstore::{build_csr, compress, compression_report, decode, reorder, write_binary, ReorderStrategy};
use amlgraph::sentinel::{count_by_rule, scan, write_alerts_csv, Rule};
use amlgraph::simnet::{read_accounts_csv, read_edges_csv, write_accounts_csv, Account};
use amlgraph::txflow::{read_transactions_csv, write_transactions_csv, Transaction};
use amlgraph::typology::{write_injection_report_csv, write_sar_labels_csv};
use anyhow::{ensure, Context, Result};

use crate::config::PipelineConfig;
use crate::output::{OutputSet, Written};
use crate::pipeline::{self, Method};

pub const ACCOUNTS: &str = "accounts.csv";
pub const TRANSACTIONS: &str = "transactions.csv";
pub const SAR_LABELS: &str = "sar_labels.csv";
pub const INJECTION_REPORT: &str = "injection_report.csv";
pub const EDGES: &str = "edges.csv";
pub const ALERTS: &str = "alerts.csv";
pub const GRAPH: &str = "graph.amlg";
pub const COMPRESSION: &str = "compression.csv";
pub const BENCH: &str = "bench_table.csv";
pub const SCORES: &str = "scores.csv";

pub fn checkpoint_name(m: Method) -> String {
    format!("{m}.ckpt")
}

pub fn metrics_name(m: Method) -> String {
    format!("metrics_{m}.csv")
}

pub fn eval_name(m: Method) -> String {
    format!("eval_{m}.csv")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn load_accounts(dir: &Path) -> Result<Vec<Account>> {
    read_accounts_csv(open(&dir.join(ACCOUNTS))?).context("reading accounts")
}

pub fn load_transactions(path: &Path) -> Result<Vec<Transaction>> {
    read_transactions_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn generate(cfg: &PipelineConfig) -> Result<Vec<Written>> {
    let inj = pipeline::generate(cfg)?;
    let mut out = OutputSet::new(&cfg.out_dir)?;
    out.write(ACCOUNTS, |w| Ok(write_accounts_csv(&inj.graph.accounts, w)?))?;
    out.write(TRANSACTIONS, |w| Ok(write_transactions_csv(&inj.txs, w)?))?;
    out.write(SAR_LABELS, |w| Ok(write_sar_labels_csv(&inj.graph, &inj.reports, w)?))?;
    out.write(INJECTION_REPORT, |w| Ok(write_injection_report_csv(&inj.reports, w)?))?;
    out.write(EDGES, |w| Ok(inj.graph.write_edges_csv(w)?))?;
    let suspicious = inj.reports.iter().map(|r| r.members.len()).sum::<usize>();
    println!(
        "accounts {}  edges {}  transactions {}  typology instances {}  suspicious accounts {}",
        inj.graph.accounts.len(),
        inj.graph.edges.len(),
        inj.txs.len(),
        inj.reports.len(),
        suspicious
    );
    Ok(out.commit())
}

pub fn scan_log(cfg: &PipelineConfig, input: Option<&Path>) -> Result<Vec<Written>> {
    let path = input.map_or_else(|| cfg.out_dir.join(TRANSACTIONS), Path::to_path_buf);
    let txs = load_transactions(&path)?;
    let alerts = scan(&txs, &cfg.rules).context("sentinel")?;
    let mut out = OutputSet::new(&cfg.out_dir)?;
    out.write(ALERTS, |w| Ok(write_alerts_csv(&alerts, w)?))?;
    let counts = count_by_rule(&alerts);
    let get = |r| counts.get(&r).copied().unwrap_or(0);
    println!(
        "transactions {}  alerts {}  over_threshold {}  near_miss {}  velocity {}",
        txs.len(),
        alerts.len(),
        get(Rule::OverThreshold),
        get(Rule::NearMiss),
        get(Rule::Velocity)
    );
    Ok(out.commit())
}

pub fn train(cfg: &PipelineConfig, method: Method) -> Result<Vec<Written>> {
    let accounts = load_accounts(&cfg.out_dir)?;
    let txs = load_transactions(&cfg.out_dir.join(TRANSACTIONS))?;
    let prep = pipeline::prepare(cfg, &accounts, &txs)?;
    let outcome = pipeline::train(cfg, &prep, method)?;
    let eval = pipeline::evaluate_model(&prep, &outcome.model)?;
    let base = pipeline::evaluate_baseline(cfg, &prep)?;

    let mut out = OutputSet::new(&cfg.out_dir)?;
    out.write(&checkpoint_name(method), |w| Ok(write_checkpoint(&outcome.model, w)?))?;
    out.write_timing(&metrics_name(method), |w| Ok(write_metrics_csv(&outcome.metrics, w)?))?;
    out.write(&eval_name(method), |w| {
        writeln!(w, "model,threshold,val_f1,test_f1,test_precision,test_recall")?;
        for (name, e) in [(method.as_str(), &eval), ("baseline", &base)] {
            writeln!(
                w,
                "{name},{:.6},{:.6},{:.6},{:.6},{:.6}",
                e.threshold, e.val.f1, e.test.f1, e.test.precision, e.test.recall
            )?;
        }
        Ok(())
    })?;
    println!(
        "{method}: {} epochs  mean epoch {:.3}s  setup {:.3}s  final loss {:.4}",
        outcome.metrics.len(),
        pipeline::mean_epoch_seconds(&outcome),
        outcome.setup_seconds,
        outcome.metrics.last().map_or(f64::NAN, |m| m.loss)
    );
    println!(
        "test F1 {:.3} (threshold {:.3})  baseline test F1 {:.3}",
        eval.test.f1, eval.threshold, base.test.f1
    );
    Ok(out.commit())
}

pub fn compress_graph(
    cfg: &PipelineConfig,
    input: Option<&Path>,
    strategy: Option<ReorderStrategy>,
) -> Result<Vec<Written>> {
    let strategy = strategy.unwrap_or(cfg.reorder);
    let path = input.map_or_else(|| cfg.out_dir.join(EDGES), Path::to_path_buf);
    let edges = read_edges_csv(open(&path)?).with_context(|| format!("reading {}", path.display()))?;
    let n = edges.iter().map(|&(s, d)| s.max(d) as usize + 1).max().unwrap_or(0);
    let n = n.max(cfg.topology.account_count);
    let g = build_csr(n, &edges)?;
    let perm = reorder(&g, strategy);
    let cg = compress(&g, &perm);
    let back = decode(&cg)?;
    ensure!(back == g.relabel(&perm), "decoded graph differs from the reordered input");
    let report = compression_report(&cg);

    let mut out = OutputSet::new(&cfg.out_dir)?;
    out.write(GRAPH, |w| Ok(write_binary(&cg, w)?))?;
    out.write(COMPRESSION, |w| {
        writeln!(w, "strategy,vertices,edges,raw_bytes,compressed_bytes,ratio")?;
        writeln!(
            w,
            "{strategy},{},{},{},{},{:.2}",
            cg.vertex_count(),
            cg.edge_count(),
            report.raw_bytes,
            report.compressed_bytes,
            report.ratio
        )?;
        Ok(())
    })?;
    println!(
        "{strategy}: {} vertices  {} edges  raw {} B  compressed {} B  ratio {:.2}",
        cg.vertex_count(),
        cg.edge_count(),
        report.raw_bytes,
        report.compressed_bytes,
        report.ratio
    );
    Ok(out.commit())
}

pub fn bench(cfg: &PipelineConfig) -> Result<Vec<Written>> {
    let accounts = load_accounts(&cfg.out_dir)?;
    let txs = load_transactions(&cfg.out_dir.join(TRANSACTIONS))?;
    let prep = pipeline::prepare(cfg, &accounts, &txs)?;
    let mut rows = Vec::new();
    for trial in 1..=cfg.train.bench_trials {
        for method in [Method::Gcn, Method::FastGcn] {
            let outcome = pipeline::train(cfg, &prep, method)?;
            let eval = pipeline::evaluate_model(&prep, &outcome.model)?;
            let epoch = pipeline::mean_epoch_seconds(&outcome);
            let total: f64 = outcome.metrics.iter().map(|m| m.seconds).sum();
            println!("{method} trial {trial}: {epoch:.3} s/epoch  setup {:.3}s  test F1 {:.3}", outcome.setup_seconds, eval.test.f1);
            rows.push((method, trial, outcome.metrics.len(), epoch, outcome.setup_seconds, total, eval.test.f1));
        }
    }
    let mean = |m: Method| {
        let v: Vec<f64> = rows.iter().filter(|r| r.0 == m).map(|r| r.3).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("fastgcn/gcn per-epoch ratio {:.3}", mean(Method::FastGcn) / mean(Method::Gcn));
    let mut out = OutputSet::new(&cfg.out_dir)?;
    out.write_timing(BENCH, |w| {
        writeln!(w, "method,epochs,seconds,trial,epoch_seconds,setup_seconds,test_f1")?;
        for (m, trial, epochs, epoch, setup, total, f1) in &rows {
            writeln!(w, "{m},{epochs},{total:.6},{trial},{epoch:.6},{setup:.6},{f1:.6}")?;
        }
        Ok(())
    })?;
    Ok(out.commit())
}

/// Scores every account with a trained checkpoint after applying `stream`
/// (new transactions) incrementally. Features stay those of the base log;
/// the stream only adds edges.
pub fn infer(cfg: &PipelineConfig, checkpoint: &Path, stream: Option<&Path>) -> Result<Vec<Written>> {
    let model = read_checkpoint(open(checkpoint)?).context("reading checkpoint")?;
    let accounts = load_accounts(&cfg.out_dir)?;
    let txs = load_transactions(&cfg.out_dir.join(TRANSACTIONS))?;
    let prep = pipeline::prepare(cfg, &accounts, &txs)?;
    let mut engine = IncrementalEngine::new(&prep.graph, prep.x, model)?;
    if let Some(path) = stream {
        let start = Instant::now();
        let dirty = engine.apply_stream(open(path)?).context("deltainfer")?;
        let stats = engine.refresh(&dirty)?;
        println!(
            "applied {}  refreshed {} vertices ({} hidden rows) in {:.4}s",
            path.display(),
            stats.vertices(),
            stats.layer1_rows,
            start.elapsed().as_secs_f64()
        );
    }
    let snap = engine.snapshot();
    let mut out = OutputSet::new(&cfg.out_dir)?;
    out.write(SCORES, |w| {
        writeln!(w, "account_id,suspicious_score")?;
        for v in 0..snap.probs.rows() {
            writeln!(w, "{v},{:.9}", snap.probs.get(v, 1))?;
        }
        Ok(())
    })?;
    Ok(out.commit())
}
