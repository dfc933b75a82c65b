//! Static account graph: degree-sequence driven topology generation and
//! account attribute population.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvConfig;
use crate::seed::{self, SimRng};

/// Resampling attempts for an infeasible degree sequence.
pub const MAX_GENERATION_RETRIES: usize = 100;
/// Re-pairing rounds for stubs rejected as self-loops or duplicates.
const REPAIR_ROUNDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountType {
    Individual,
    Business,
    Holding,
}

impl AccountType {
    pub const ALL: [AccountType; 3] = [
        AccountType::Individual,
        AccountType::Business,
        AccountType::Holding,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccountType::Individual => "individual",
            AccountType::Business => "business",
            AccountType::Holding => "holding",
        }
    }
}

impl fmt::Display for AccountType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccountType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AccountType::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown account type {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SarLabel {
    Normal,
    Suspicious,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: u32,
    pub account_type: AccountType,
    pub owner_name: String,
    /// Seconds since the Unix epoch.
    pub created_at: i64,
    pub sar_label: SarLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeModel {
    /// Truncated discrete power law `p(k) ∝ k^-exponent` on `[min_degree, max_degree]`,
    /// drawn independently for in- and out-degrees.
    PowerLaw {
        exponent: f64,
        min_degree: u32,
        max_degree: u32,
    },
    /// Total (undirected) degree per account; each paired edge gets a random direction.
    Explicit(Vec<u32>),
}

/// Probability of each account type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeMix(pub Vec<(AccountType, f64)>);

impl Default for TypeMix {
    fn default() -> Self {
        TypeMix(vec![
            (AccountType::Individual, 0.80),
            (AccountType::Business, 0.15),
            (AccountType::Holding, 0.05),
        ])
    }
}

impl FromStr for TypeMix {
    type Err = Error;
    /// `individual:0.8,business:0.15,holding:0.05`
    fn from_str(s: &str) -> Result<Self> {
        let mut mix = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, p) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("type mix entry {part:?} needs type:prob")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad probability in {part:?}")))?;
            mix.push((name.parse()?, p));
        }
        Ok(TypeMix(mix))
    }
}

impl TypeMix {
    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config("account type mix is empty".into()));
        }
        if self.0.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Config("type mix probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = self.0.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("type mix sums to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Attribute pools for [`populate_accounts`].
#[derive(Debug, Clone, PartialEq)]
pub struct AccountProfile {
    pub type_mix: TypeMix,
    /// Start of the account-creation horizon, seconds since epoch.
    pub created_from: i64,
    /// Horizon length in seconds; `created_at` is uniform over it.
    pub created_span: i64,
}

impl Default for AccountProfile {
    fn default() -> Self {
        AccountProfile {
            type_mix: TypeMix::default(),
            created_from: 1_420_070_400, // 2015-01-01T00:00:00Z
            created_span: 3 * 365 * 86_400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub account_count: usize,
    pub degree_model: DegreeModel,
    pub seed: u64,
    pub profile: AccountProfile,
}

impl TopologyConfig {
    pub fn powerlaw(account_count: usize, exponent: f64, min_degree: u32, max_degree: u32, seed: u64) -> Self {
        TopologyConfig {
            account_count,
            degree_model: DegreeModel::PowerLaw {
                exponent,
                min_degree,
                max_degree,
            },
            seed,
            profile: AccountProfile::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.account_count;
        if n == 0 {
            return Err(Error::Config("account_count must be positive".into()));
        }
        match &self.degree_model {
            DegreeModel::PowerLaw {
                exponent,
                min_degree,
                max_degree,
            } => {
                if !(*exponent > 1.0) || !exponent.is_finite() {
                    return Err(Error::Config(format!("power-law exponent {exponent} must exceed 1")));
                }
                if *min_degree < 1 || min_degree > max_degree {
                    return Err(Error::Config(format!(
                        "need 1 <= min_degree <= max_degree, got {min_degree}..{max_degree}"
                    )));
                }
                if *max_degree as usize > n - 1 {
                    return Err(Error::Config(format!(
                        "max_degree {max_degree} exceeds account_count - 1 = {}",
                        n - 1
                    )));
                }
            }
            DegreeModel::Explicit(seq) => {
                if seq.len() != n {
                    return Err(Error::Config(format!(
                        "degree sequence has {} entries for {n} accounts",
                        seq.len()
                    )));
                }
                if let Some(d) = seq.iter().find(|&&d| d as usize > n - 1) {
                    return Err(Error::Config(format!("degree {d} exceeds account_count - 1")));
                }
            }
        }
        self.profile.type_mix.validate()
    }

    /// Reads the topology keys of a key=value config:
    /// `accounts`, `degree_model` (`powerlaw` | `explicit`), `degree_exponent`,
    /// `degree_min`, `degree_max`, `degree_file`, `type_mix`, `seed`.
    /// A relative `degree_file` resolves against `base_dir`.
    pub fn from_kv(kv: &KvConfig, base_dir: &Path) -> Result<Self> {
        let account_count: usize = kv.require("accounts")?;
        let seed = kv.parse_or("seed", 0u64)?;
        let degree_model = match kv.get("degree_model").unwrap_or("powerlaw") {
            "powerlaw" => DegreeModel::PowerLaw {
                exponent: kv.parse_or("degree_exponent", 2.6)?,
                min_degree: kv.parse_or("degree_min", 4)?,
                max_degree: kv.parse_or("degree_max", 1000u32.min(account_count.saturating_sub(1) as u32))?,
            },
            "explicit" => {
                let file: String = kv.require("degree_file")?;
                DegreeModel::Explicit(load_degree_sequence(&base_dir.join(file))?)
            }
            other => return Err(Error::Config(format!("unknown degree_model {other:?}"))),
        };
        let mut profile = AccountProfile::default();
        if let Some(mix) = kv.parse_opt::<TypeMix>("type_mix")? {
            profile.type_mix = mix;
        }
        let cfg = TopologyConfig {
            account_count,
            degree_model,
            seed,
            profile,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Whitespace- or newline-separated non-negative integers.
pub fn load_degree_sequence(path: &Path) -> Result<Vec<u32>> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    text.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("{}: bad degree {t:?}", path.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountGraph {
    pub accounts: Vec<Account>,
    /// Directed relationship channels, sorted ascending, no self-loops or duplicates.
    pub edges: Vec<(u32, u32)>,
}

impl AccountGraph {
    pub fn account_count(&self) -> usize {
        self.accounts.len()
    }

    pub fn out_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.accounts.len()];
        for &(s, _) in &self.edges {
            deg[s as usize] += 1;
        }
        deg
    }

    /// Checks the structural invariants by scan.
    pub fn validate(&self) -> Result<()> {
        let n = self.accounts.len();
        for (i, a) in self.accounts.iter().enumerate() {
            if a.account_id as usize != i {
                return Err(Error::Format(format!("account at position {i} has id {}", a.account_id)));
            }
        }
        let mut seen = HashSet::with_capacity(self.edges.len());
        for &(s, d) in &self.edges {
            if s as usize >= n || d as usize >= n {
                return Err(Error::VertexOutOfRange {
                    vertex: s.max(d) as u64,
                    count: n,
                });
            }
            if s == d {
                return Err(Error::Format(format!("self-loop at {s}")));
            }
            if !seen.insert((s, d)) {
                return Err(Error::Format(format!("duplicate edge {s}->{d}")));
            }
        }
        Ok(())
    }

    pub fn write_edges_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["src", "dst"])?;
        for &(s, d) in &self.edges {
            out.serialize((s, d))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Truncated power-law mass function on `[min_degree, max_degree]`.
pub fn powerlaw_pmf(exponent: f64, min_degree: u32, max_degree: u32) -> Vec<f64> {
    let w: Vec<f64> = (min_degree..=max_degree)
        .map(|k| (k as f64).powf(-exponent))
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Directed configuration-model topology plus populated accounts.
pub fn generate_topology(config: &TopologyConfig) -> Result<AccountGraph> {
    config.validate()?;
    let n = config.account_count;
    let edges = match &config.degree_model {
        DegreeModel::PowerLaw {
            exponent,
            min_degree,
            max_degree,
        } => powerlaw_edges(n, *exponent, *min_degree, *max_degree, config.seed)?,
        DegreeModel::Explicit(seq) => explicit_edges(seq, config.seed)?,
    };
    let accounts = populate_accounts(
        n,
        &config.profile,
        seed::sub_seed(config.seed, "simnet.accounts"),
    )?;
    Ok(AccountGraph { accounts, edges })
}

fn powerlaw_edges(n: usize, exponent: f64, min_degree: u32, max_degree: u32, seed: u64) -> Result<Vec<(u32, u32)>> {
    let pmf = powerlaw_pmf(exponent, min_degree, max_degree);
    let dist = WeightedIndex::new(&pmf).map_err(|e| Error::Config(format!("degree distribution: {e}")))?;
    let mut last_gap = 0i64;
    for attempt in 0..MAX_GENERATION_RETRIES {
        let mut rng = seed::rng(seed::stream_seed(seed, attempt as u64));
        let mut out: Vec<u32> = (0..n).map(|_| min_degree + dist.sample(&mut rng) as u32).collect();
        let mut inn: Vec<u32> = (0..n).map(|_| min_degree + dist.sample(&mut rng) as u32).collect();
        let out_sum: u64 = out.iter().map(|&d| d as u64).sum();
        let in_sum: u64 = inn.iter().map(|&d| d as u64).sum();
        let (larger, excess) = if out_sum >= in_sum {
            (&mut out, out_sum - in_sum)
        } else {
            (&mut inn, in_sum - out_sum)
        };
        if !trim_sequence(larger, excess as usize, min_degree, &mut rng) {
            last_gap = out_sum as i64 - in_sum as i64;
            continue;
        }
        let out_stubs = expand_stubs(&out);
        let mut in_stubs = expand_stubs(&inn);
        in_stubs.shuffle(&mut rng);
        let pairs: Vec<(u32, u32)> = out_stubs.into_iter().zip(in_stubs).collect();
        return Ok(pair_without_conflicts(pairs, &mut rng));
    }
    Err(Error::Generation {
        retries: MAX_GENERATION_RETRIES,
        detail: format!(
            "in/out stub sums could not be balanced by trimming (last out-in gap {last_gap}, min_degree {min_degree})"
        ),
    })
}

/// Removes `excess` stubs from `seq`, each chosen uniformly among stubs above
/// `min_degree`. Returns false when too few removable stubs exist.
fn trim_sequence(seq: &mut [u32], excess: usize, min_degree: u32, rng: &mut SimRng) -> bool {
    if excess == 0 {
        return true;
    }
    let mut removable: Vec<u32> = Vec::new();
    for (v, &d) in seq.iter().enumerate() {
        for _ in min_degree..d {
            removable.push(v as u32);
        }
    }
    if removable.len() < excess {
        return false;
    }
    let (chosen, _) = removable.partial_shuffle(rng, excess);
    for &v in chosen.iter() {
        seq[v as usize] -= 1;
    }
    true
}

fn expand_stubs(degrees: &[u32]) -> Vec<u32> {
    let mut stubs = Vec::with_capacity(degrees.iter().map(|&d| d as usize).sum());
    for (v, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(v as u32, d as usize));
    }
    stubs
}

/// Accepts stub pairs that form new non-loop edges; rejected stubs are
/// reshuffled and re-paired for a bounded number of rounds, then dropped.
fn pair_without_conflicts(pairs: Vec<(u32, u32)>, rng: &mut SimRng) -> Vec<(u32, u32)> {
    let mut seen: HashSet<u64> = HashSet::with_capacity(pairs.len());
    let key = |s: u32, d: u32| (u64::from(s) << 32) | u64::from(d);
    let mut edges = Vec::with_capacity(pairs.len());
    let mut pending = pairs;
    for _ in 0..=REPAIR_ROUNDS {
        let mut rejected_src = Vec::new();
        let mut rejected_dst = Vec::new();
        for (s, d) in pending {
            if s != d && seen.insert(key(s, d)) {
                edges.push((s, d));
            } else {
                rejected_src.push(s);
                rejected_dst.push(d);
            }
        }
        if rejected_src.is_empty() {
            break;
        }
        rejected_dst.shuffle(rng);
        pending = rejected_src.into_iter().zip(rejected_dst).collect();
    }
    edges.sort_unstable();
    edges
}

fn explicit_edges(seq: &[u32], seed: u64) -> Result<Vec<(u32, u32)>> {
    let total: u64 = seq.iter().map(|&d| d as u64).sum();
    if total % 2 == 1 {
        return Err(Error::Generation {
            retries: 0,
            detail: format!("explicit degree sequence has odd stub total {total}"),
        });
    }
    let mut rng = seed::rng(seed);
    let mut stubs = expand_stubs(seq);
    stubs.shuffle(&mut rng);
    let pairs = stubs
        .chunks_exact(2)
        .map(|p| {
            if rng.random::<bool>() {
                (p[0], p[1])
            } else {
                (p[1], p[0])
            }
        })
        .collect();
    Ok(pair_without_conflicts(pairs, &mut rng))
}

const FIRST_NAMES: &[&str] = &[
    "Ada", "Bruno", "Carmen", "Dmitri", "Elena", "Farah", "Gustavo", "Hana", "Ivan", "Jia",
    "Kofi", "Lena", "Mateo", "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq",
    "Uma", "Victor", "Wen", "Ximena", "Yusuf", "Zoe",
];
const LAST_NAMES: &[&str] = &[
    "Abara", "Becker", "Castillo", "Dubois", "Eriksen", "Fontaine", "Garcia", "Haddad",
    "Ibrahim", "Jensen", "Kowalski", "Lindqvist", "Moreau", "Nakamura", "Okafor", "Petrov",
    "Quiroga", "Rossi", "Schmidt", "Tanaka", "Ueda", "Varga", "Wagner", "Xu", "Yilmaz", "Zhang",
];
const BUSINESS_SUFFIXES: &[&str] = &["Trading", "Logistics", "Imports", "Consulting", "Foods", "Holdings"];

/// Accounts `0..count` with seeded attributes, all labeled normal.
pub fn populate_accounts(count: usize, profile: &AccountProfile, seed: u64) -> Result<Vec<Account>> {
    profile.type_mix.validate()?;
    let weights: Vec<f64> = profile.type_mix.0.iter().map(|&(_, p)| p).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Config(format!("type mix: {e}")))?;
    let mut rng = seed::rng(seed);
    let span = profile.created_span.max(1);
    Ok((0..count)
        .map(|i| {
            let account_type = profile.type_mix.0[dist.sample(&mut rng)].0;
            let first = FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())];
            let last = LAST_NAMES[rng.random_range(0..LAST_NAMES.len())];
            let owner_name = match account_type {
                AccountType::Individual => format!("{first} {last}"),
                _ => {
                    let suffix = BUSINESS_SUFFIXES[rng.random_range(0..BUSINESS_SUFFIXES.len())];
                    format!("{last} {suffix}")
                }
            };
            Account {
                account_id: i as u32,
                account_type,
                owner_name,
                created_at: profile.created_from + rng.random_range(0..span),
                sar_label: SarLabel::Normal,
            }
        })
        .collect())
}

pub fn write_accounts_csv<W: Write>(accounts: &[Account], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for a in accounts {
        out.serialize(a)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_accounts_csv<R: Read>(r: R) -> Result<Vec<Account>> {
    let mut rdr = csv::Reader::from_reader(r);
    let accounts: Vec<Account> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    for (i, a) in accounts.iter().enumerate() {
        if a.account_id as usize != i {
            return Err(Error::Format(format!(
                "accounts.csv row {i} has account_id {}; ids must be dense and ordered",
                a.account_id
            )));
        }
    }
    Ok(accounts)
}

/// Reads a `src,dst` edge list with a header row.
pub fn read_edges_csv<R: Read>(r: R) -> Result<Vec<(u32, u32)>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_explicit_sequence_gives_one_edge() {
        for seed in 0..8 {
            let cfg = TopologyConfig {
                account_count: 2,
                degree_model: DegreeModel::Explicit(vec![1, 1]),
                seed,
                profile: AccountProfile::default(),
            };
            let g = generate_topology(&cfg).unwrap();
            assert_eq!(g.edges.len(), 1);
            assert!(g.edges[0] == (0, 1) || g.edges[0] == (1, 0));
        }
    }

    #[test]
    fn odd_explicit_total_is_a_generation_error() {
        let cfg = TopologyConfig {
            account_count: 3,
            degree_model: DegreeModel::Explicit(vec![1, 1, 1]),
            seed: 1,
            profile: AccountProfile::default(),
        };
        assert!(matches!(generate_topology(&cfg), Err(Error::Generation { .. })));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(TopologyConfig::powerlaw(10, 1.0, 1, 5, 0).validate().is_err());
        assert!(TopologyConfig::powerlaw(10, 2.5, 0, 5, 0).validate().is_err());
        assert!(TopologyConfig::powerlaw(10, 2.5, 1, 10, 0).validate().is_err());
        assert!(TopologyConfig::powerlaw(10, 2.5, 1, 9, 0).validate().is_ok());
    }

    #[test]
    fn degenerate_mix_and_empty_count() {
        let profile = AccountProfile {
            type_mix: TypeMix(vec![(AccountType::Individual, 1.0)]),
            ..AccountProfile::default()
        };
        let accts = populate_accounts(3, &profile, 9).unwrap();
        assert_eq!(accts.iter().map(|a| a.account_id).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(accts.iter().all(|a| a.account_type == AccountType::Individual));
        assert!(accts.iter().all(|a| a.sar_label == SarLabel::Normal));
        assert!(populate_accounts(0, &profile, 9).unwrap().is_empty());
    }

    #[test]
    fn empty_mix_is_config_error() {
        let profile = AccountProfile {
            type_mix: TypeMix(vec![]),
            ..AccountProfile::default()
        };
        assert!(matches!(populate_accounts(3, &profile, 0), Err(Error::Config(_))));
    }

    #[test]
    fn type_mix_parses() {
        let mix: TypeMix = "individual:0.5, business:0.5".parse().unwrap();
        assert!(mix.validate().is_ok());
        let bad: TypeMix = "individual:0.5".parse().unwrap();
        assert!(bad.validate().is_err());
        assert!("pirate:1".parse::<TypeMix>().is_err());
    }

    #[test]
    fn accounts_csv_roundtrip() {
        let accts = populate_accounts(5, &AccountProfile::default(), 3).unwrap();
        let mut buf = Vec::new();
        write_accounts_csv(&accts, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("account_id,account_type,owner_name,created_at,sar_label\n"));
        assert_eq!(read_accounts_csv(&buf[..]).unwrap(), accts);
    }
}
