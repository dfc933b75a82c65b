//! One `key = value` file drives every stage. Unknown keys are rejected so a
//! typo cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use amlgraph::gcnkit::{ClassWeighting, Hyper, Optimizer};
use amlgraph::gstore::ReorderStrategy;
use amlgraph::kv::KvConfig;
use amlgraph::seed::{stream_seed, sub_seed};
use amlgraph::sentinel::RuleSet;
use amlgraph::simnet::TopologyConfig;
use amlgraph::txflow::FlowConfig;
use amlgraph::typology::{default_specs, TypologySpec};
use anyhow::{bail, Context, Result};

/// The configuration used when `--config` is absent.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.conf");

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out_dir",
    "accounts",
    "degree_model",
    "degree_exponent",
    "degree_min",
    "degree_max",
    "degree_file",
    "type_mix",
    "steps",
    "tx_rate",
    "typology",
    "suspicious_fraction",
    "threshold",
    "near_miss_fraction",
    "velocity_count",
    "velocity_amount",
    "velocity_window",
    "hidden",
    "lr",
    "epochs",
    "optimizer",
    "weighting",
    "samples",
    "batch_size",
    "train_frac",
    "val_frac",
    "feature_clip",
    "baseline_epochs",
    "baseline_lr",
    "bench_trials",
    "reorder",
];

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hyper: Hyper,
    pub samples: usize,
    pub batch_size: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Standardized features are clamped to `[-clip, clip]`.
    pub feature_clip: Option<f64>,
    pub split_seed: u64,
    pub baseline_epochs: usize,
    pub baseline_lr: f64,
    pub bench_trials: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub topology: TopologyConfig,
    pub flow: FlowConfig,
    pub typologies: Vec<TypologySpec>,
    pub rules: RuleSet,
    pub train: TrainConfig,
    pub reorder: ReorderStrategy,
}

impl PipelineConfig {
    /// `seed` and `out_dir` override the file's values when given.
    pub fn from_kv(kv: &KvConfig, base_dir: &Path, seed: Option<u64>, out_dir: Option<&Path>) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !KNOWN_KEYS.contains(k) && !k.starts_with("amount.")) {
            bail!("unknown config key {k:?}");
        }
        let seed = match seed {
            Some(s) => s,
            None => kv.parse_or("seed", 0u64)?,
        };
        let out_dir = match out_dir {
            Some(p) => p.to_path_buf(),
            None => base_dir.join(kv.get("out_dir").unwrap_or("out")),
        };

        let mut topology = TopologyConfig::from_kv(kv, base_dir).context("topology")?;
        topology.seed = sub_seed(seed, "simnet");
        let flow = FlowConfig::from_kv(kv, sub_seed(seed, "txflow")).context("txflow")?;

        let typo_seed = sub_seed(seed, "typology");
        let lines: Vec<&str> = kv.get_all("typology").collect();
        let typologies = if lines.is_empty() {
            let fraction: f64 = kv.parse_or("suspicious_fraction", 0.01)?;
            if !(0.0..1.0).contains(&fraction) {
                bail!("suspicious_fraction {fraction} must lie in [0, 1)");
            }
            default_specs(topology.account_count, flow.steps, fraction, typo_seed)
        } else {
            lines
                .iter()
                .enumerate()
                .map(|(i, l)| TypologySpec::parse(l, flow.steps, stream_seed(typo_seed, i as u64)))
                .collect::<amlgraph::Result<_>>()
                .context("typology")?
        };
        let rules = RuleSet::from_kv(kv).context("rules")?;

        let d = Hyper::default();
        let hyper = Hyper {
            hidden: kv.parse_or("hidden", d.hidden)?,
            lr: kv.parse_or("lr", d.lr)?,
            epochs: kv.parse_or("epochs", d.epochs)?,
            seed: sub_seed(seed, "gcnkit"),
            optimizer: kv.parse_or::<Optimizer>("optimizer", d.optimizer)?,
            weighting: kv.parse_or::<ClassWeighting>("weighting", d.weighting)?,
        };
        if hyper.hidden == 0 || !(hyper.lr >= 0.0) || !hyper.lr.is_finite() {
            bail!("hidden must be positive and lr finite and non-negative");
        }
        let feature_clip: Option<f64> = kv.parse_opt("feature_clip")?;
        if feature_clip.is_some_and(|c| !(c > 0.0)) {
            bail!("feature_clip must be positive");
        }
        let train = TrainConfig {
            hyper,
            samples: kv.parse_or("samples", 400)?,
            batch_size: kv.parse_or("batch_size", 256)?,
            train_frac: kv.parse_or("train_frac", 0.6)?,
            val_frac: kv.parse_or("val_frac", 0.2)?,
            feature_clip,
            split_seed: sub_seed(seed, "split"),
            baseline_epochs: kv.parse_or("baseline_epochs", 500)?,
            baseline_lr: kv.parse_or("baseline_lr", 0.05)?,
            bench_trials: kv.parse_or("bench_trials", 1)?,
        };
        if train.samples == 0 || train.batch_size == 0 || train.bench_trials == 0 {
            bail!("samples, batch_size and bench_trials must be positive");
        }
        let reorder = kv.parse_or("reorder", ReorderStrategy::Bfs)?;
        Ok(PipelineConfig {
            seed,
            out_dir,
            topology,
            flow,
            typologies,
            rules,
            train,
            reorder,
        })
    }

    /// Reads `path`, or the built-in default when `None`.
    pub fn load(path: Option<&Path>, seed: Option<u64>, out_dir: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let kv = KvConfig::load(p).with_context(|| format!("reading {}", p.display()))?;
                let base = p.parent().unwrap_or(Path::new("."));
                Self::from_kv(&kv, base, seed, out_dir)
            }
            None => Self::from_kv(&KvConfig::parse(DEFAULT_CONFIG)?, Path::new("."), seed, out_dir),
        }
    }
}
