//! Suspicious-pattern injection. Each instance picks disjoint previously-normal
//! accounts, adds its motif's transactions, and labels the members suspicious.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::money::Cents;
use crate::seed::{self, SimRng};
use crate::simnet::{AccountGraph, SarLabel};
use crate::txflow::{self, Transaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypologyKind {
    /// `m0 → m1 → … → m(k-1) → m0`, hops in time order.
    Cycle,
    /// Every member but the last pays the last.
    FanIn,
    /// The first member pays every other member.
    FanOut,
    /// `m0 → m1 → … → m(k-1)` with strictly increasing hop times.
    LayeredChain,
    /// First member pays each intermediate, which later pays the last member.
    ScatterGather,
}

impl TypologyKind {
    pub const ALL: [TypologyKind; 5] = [
        TypologyKind::Cycle,
        TypologyKind::FanIn,
        TypologyKind::FanOut,
        TypologyKind::LayeredChain,
        TypologyKind::ScatterGather,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TypologyKind::Cycle => "cycle",
            TypologyKind::FanIn => "fan_in",
            TypologyKind::FanOut => "fan_out",
            TypologyKind::LayeredChain => "layered_chain",
            TypologyKind::ScatterGather => "scatter_gather",
        }
    }

    pub fn min_members(self) -> usize {
        match self {
            TypologyKind::Cycle | TypologyKind::ScatterGather => 3,
            _ => 2,
        }
    }

    /// Directed hops of the motif over members given in motif order.
    pub fn motif_edges(self, members: &[u32]) -> Vec<(u32, u32)> {
        let m = members.len();
        match self {
            TypologyKind::Cycle => (0..m).map(|i| (members[i], members[(i + 1) % m])).collect(),
            TypologyKind::FanIn => members[..m - 1].iter().map(|&s| (s, members[m - 1])).collect(),
            TypologyKind::FanOut => members[1..].iter().map(|&d| (members[0], d)).collect(),
            TypologyKind::LayeredChain => members.windows(2).map(|w| (w[0], w[1])).collect(),
            TypologyKind::ScatterGather => {
                let mid = &members[1..m - 1];
                mid.iter()
                    .map(|&v| (members[0], v))
                    .chain(mid.iter().map(|&v| (v, members[m - 1])))
                    .collect()
            }
        }
    }
}

impl fmt::Display for TypologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TypologyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TypologyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown typology {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypologySpec {
    pub kind: TypologyKind,
    pub member_count: usize,
    /// Amounts are uniform in `[low, high)`.
    pub amount_band: (Cents, Cents),
    pub span: Range<u32>,
    pub instances: usize,
    pub seed: u64,
}

impl TypologySpec {
    pub fn validate(&self, horizon: u32) -> Result<()> {
        let (low, high) = self.amount_band;
        if low.0 <= 0 || low >= high {
            return Err(Error::Config(format!("{}: amount band needs 0 < low < high", self.kind)));
        }
        if self.member_count < self.kind.min_members() {
            return Err(Error::Config(format!(
                "{} needs at least {} members, got {}",
                self.kind,
                self.kind.min_members(),
                self.member_count
            )));
        }
        if self.span.is_empty() || self.span.end > horizon {
            return Err(Error::Config(format!(
                "{}: span {:?} must be nonempty and within 0..{horizon}",
                self.kind, self.span
            )));
        }
        let span_len = (self.span.end - self.span.start) as usize;
        let needed = match self.kind {
            TypologyKind::LayeredChain => self.member_count - 1,
            TypologyKind::ScatterGather => 2,
            _ => 1,
        };
        if span_len < needed {
            return Err(Error::Config(format!(
                "{}: span of {span_len} steps cannot order {needed} hops",
                self.kind
            )));
        }
        Ok(())
    }

    /// `kind,members,instances,low,high[,span_start,span_end]`
    pub fn parse(text: &str, horizon: u32, seed: u64) -> Result<Self> {
        let f: Vec<&str> = text.split(',').map(str::trim).collect();
        if f.len() != 5 && f.len() != 7 {
            return Err(Error::Config(format!(
                "typology {text:?}: expected kind,members,instances,low,high[,span_start,span_end]"
            )));
        }
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Config(format!("typology {text:?}: bad integer {s:?}")))
        };
        let span = if f.len() == 7 {
            int(f[5])? as u32..int(f[6])? as u32
        } else {
            0..horizon
        };
        let spec = TypologySpec {
            kind: f[0].parse()?,
            member_count: int(f[1])? as usize,
            instances: int(f[2])? as usize,
            amount_band: (f[3].parse()?, f[4].parse()?),
            span,
            seed,
        };
        spec.validate(horizon)?;
        Ok(spec)
    }
}

/// Five kinds, five members each, sized so roughly `fraction` of accounts
/// end up suspicious. Amounts sit just below the $10,000 reporting threshold.
pub fn default_specs(account_count: usize, horizon: u32, fraction: f64, seed: u64) -> Vec<TypologySpec> {
    const MEMBERS: usize = 5;
    let per_kind = ((account_count as f64 * fraction) / (MEMBERS * TypologyKind::ALL.len()) as f64).round() as usize;
    TypologyKind::ALL
        .into_iter()
        .enumerate()
        .map(|(i, kind)| TypologySpec {
            kind,
            member_count: MEMBERS,
            amount_band: (Cents::from_dollars(9_000), Cents::from_dollars(9_900)),
            span: 0..horizon,
            instances: per_kind,
            seed: seed::stream_seed(seed, i as u64),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionReport {
    pub instance_id: u64,
    pub kind: TypologyKind,
    /// Members in motif order.
    pub members: Vec<u32>,
    /// Injected transactions, in the order of [`TypologyKind::motif_edges`].
    pub tx_ids: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Injected {
    pub graph: AccountGraph,
    pub txs: Vec<Transaction>,
    pub reports: Vec<InjectionReport>,
}

/// Injects `spec.instances` motif instances. Instance ids start at
/// `first_instance_id`. The merged log is re-sorted by `(timestamp, emission
/// order)` with original transactions ahead of injected ones within a step, and
/// renumbered densely.
pub fn inject(
    graph: AccountGraph,
    txs: Vec<Transaction>,
    spec: &TypologySpec,
    first_instance_id: u64,
) -> Result<Injected> {
    inject_with_map(graph, txs, spec, first_instance_id).map(|(inj, _)| inj)
}

/// Applies several specs in order with globally unique instance ids.
pub fn inject_all(graph: AccountGraph, txs: Vec<Transaction>, specs: &[TypologySpec]) -> Result<Injected> {
    let mut state = Injected {
        graph,
        txs,
        reports: Vec::new(),
    };
    for spec in specs {
        let mut reports = state.reports;
        let (step, id_map) = inject_with_map(state.graph, state.txs, spec, reports.len() as u64)?;
        for r in &mut reports {
            remap_ids(&mut r.tx_ids, &id_map);
        }
        reports.extend(step.reports);
        state = Injected {
            graph: step.graph,
            txs: step.txs,
            reports,
        };
    }
    Ok(state)
}

fn remap_ids(ids: &mut [u64], id_map: &[(u64, u64)]) {
    for id in ids {
        let pos = id_map
            .binary_search_by_key(id, |&(old, _)| old)
            .expect("transaction id present before renumbering");
        *id = id_map[pos].1;
    }
}

/// Returns the injected state and the old → new transaction id map.
fn inject_with_map(
    mut graph: AccountGraph,
    mut txs: Vec<Transaction>,
    spec: &TypologySpec,
    first_instance_id: u64,
) -> Result<(Injected, Vec<(u64, u64)>)> {
    if spec.instances == 0 {
        let map = txs.iter().map(|t| (t.tx_id, t.tx_id)).collect();
        return Ok((
            Injected {
                graph,
                txs,
                reports: Vec::new(),
            },
            map,
        ));
    }
    let horizon = txs.iter().map(|t| t.timestamp + 1).max().unwrap_or(0).max(spec.span.end);
    spec.validate(horizon)?;
    let mut rng = seed::rng(spec.seed);

    let mut hosts: Vec<u32> = graph
        .accounts
        .iter()
        .filter(|a| a.sar_label == SarLabel::Normal)
        .map(|a| a.account_id)
        .collect();
    let needed = spec.instances * spec.member_count;
    if hosts.len() < needed {
        return Err(Error::Injection(format!(
            "{} x {} {} instances need {needed} normal accounts, only {} available (short by {})",
            spec.instances,
            spec.member_count,
            spec.kind,
            hosts.len(),
            needed - hosts.len()
        )));
    }
    let (chosen, _) = hosts.partial_shuffle(&mut rng, needed);
    let chosen = chosen.to_vec();

    let mut next_tx = txs.iter().map(|t| t.tx_id + 1).max().unwrap_or(0);
    let mut reports = Vec::with_capacity(spec.instances);
    let mut new_edges = Vec::new();
    for (i, members) in chosen.chunks_exact(spec.member_count).enumerate() {
        let hops = spec.kind.motif_edges(members);
        let times = hop_times(spec.kind, hops.len(), &spec.span, &mut rng);
        let mut tx_ids = Vec::with_capacity(hops.len());
        for (&(src, dst), &timestamp) in hops.iter().zip(&times) {
            let amount = Cents(rng.random_range(spec.amount_band.0 .0..spec.amount_band.1 .0));
            txs.push(Transaction {
                tx_id: next_tx,
                src,
                dst,
                amount,
                timestamp,
            });
            tx_ids.push(next_tx);
            next_tx += 1;
            new_edges.push((src, dst));
        }
        for &m in members {
            graph.accounts[m as usize].sar_label = SarLabel::Suspicious;
        }
        reports.push(InjectionReport {
            instance_id: first_instance_id + i as u64,
            kind: spec.kind,
            members: members.to_vec(),
            tx_ids,
        });
    }

    let id_map = txflow::renumber(&mut txs);
    for r in &mut reports {
        remap_ids(&mut r.tx_ids, &id_map);
    }
    graph.edges.extend(new_edges);
    graph.edges.sort_unstable();
    graph.edges.dedup();
    Ok((Injected { graph, txs, reports }, id_map))
}

fn hop_times(kind: TypologyKind, hops: usize, span: &Range<u32>, rng: &mut SimRng) -> Vec<u32> {
    let len = (span.end - span.start) as usize;
    match kind {
        TypologyKind::Cycle | TypologyKind::LayeredChain => {
            let mut t: Vec<u32> = if len >= hops {
                index::sample(rng, len, hops).into_iter().map(|i| span.start + i as u32).collect()
            } else {
                (0..hops).map(|_| rng.random_range(span.clone())).collect()
            };
            t.sort_unstable();
            t
        }
        TypologyKind::FanIn | TypologyKind::FanOut => {
            (0..hops).map(|_| rng.random_range(span.clone())).collect()
        }
        TypologyKind::ScatterGather => {
            let k = hops / 2;
            let mid = span.start + (len / 2) as u32;
            let scatter = (0..k).map(|_| rng.random_range(span.start..mid)).collect::<Vec<_>>();
            let gather = (0..k).map(|_| rng.random_range(mid..span.end)).collect::<Vec<_>>();
            scatter.into_iter().chain(gather).collect()
        }
    }
}

/// First reason a report fails to realize its motif.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifViolation {
    pub instance_id: u64,
    pub reason: String,
}

impl fmt::Display for MotifViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instance {}: {}", self.instance_id, self.reason)
    }
}

/// Checks that every report's transactions exist in `txs` and exactly realize
/// the kind's motif: hop endpoints, hop count, and temporal order.
pub fn verify_motifs(txs: &[Transaction], reports: &[InjectionReport]) -> std::result::Result<(), MotifViolation> {
    let by_id: HashMap<u64, &Transaction> = txs.iter().map(|t| (t.tx_id, t)).collect();
    for r in reports {
        let fail = |reason: String| MotifViolation {
            instance_id: r.instance_id,
            reason,
        };
        if r.members.len() < r.kind.min_members() {
            return Err(fail(format!("{} members is too few for {}", r.members.len(), r.kind)));
        }
        let expected = r.kind.motif_edges(&r.members);
        if expected.len() != r.tx_ids.len() {
            return Err(fail(format!(
                "{} lists {} transactions, motif has {} hops",
                r.kind,
                r.tx_ids.len(),
                expected.len()
            )));
        }
        let mut hops = Vec::with_capacity(expected.len());
        for (&id, &(s, d)) in r.tx_ids.iter().zip(&expected) {
            let t = by_id.get(&id).ok_or_else(|| fail(format!("tx {id} missing from log")))?;
            if (t.src, t.dst) != (s, d) {
                return Err(fail(format!("tx {id} is {}->{}, expected {s}->{d}", t.src, t.dst)));
            }
            hops.push(*t);
        }
        match r.kind {
            TypologyKind::Cycle | TypologyKind::LayeredChain => {
                let strict = r.kind == TypologyKind::LayeredChain;
                for w in hops.windows(2) {
                    let ordered = if strict {
                        w[0].timestamp < w[1].timestamp
                    } else {
                        w[0].timestamp <= w[1].timestamp
                    };
                    if !ordered {
                        return Err(fail(format!(
                            "hop tx {} at step {} precedes tx {} at step {} out of order",
                            w[1].tx_id, w[1].timestamp, w[0].tx_id, w[0].timestamp
                        )));
                    }
                }
            }
            TypologyKind::ScatterGather => {
                let k = hops.len() / 2;
                for i in 0..k {
                    if hops[i].timestamp >= hops[k + i].timestamp {
                        return Err(fail(format!(
                            "intermediate {} forwards at step {} before receiving at step {}",
                            hops[i].dst,
                            hops[k + i].timestamp,
                            hops[i].timestamp
                        )));
                    }
                }
            }
            TypologyKind::FanIn | TypologyKind::FanOut => {}
        }
    }
    Ok(())
}

/// `account_id,sar_label,instance_id,kind`; the last two are empty for
/// accounts outside every instance.
pub fn write_sar_labels_csv<W: Write>(graph: &AccountGraph, reports: &[InjectionReport], w: W) -> Result<()> {
    let mut owner: HashMap<u32, &InjectionReport> = HashMap::new();
    for r in reports {
        for &m in &r.members {
            owner.insert(m, r);
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["account_id", "sar_label", "instance_id", "kind"])?;
    for a in &graph.accounts {
        let label = match a.sar_label {
            SarLabel::Normal => "normal",
            SarLabel::Suspicious => "suspicious",
            SarLabel::Unknown => "unknown",
        };
        match owner.get(&a.account_id) {
            Some(r) => out.write_record([
                a.account_id.to_string(),
                label.to_string(),
                r.instance_id.to_string(),
                r.kind.to_string(),
            ])?,
            None => out.write_record([a.account_id.to_string(), label.to_string(), String::new(), String::new()])?,
        }
    }
    out.flush()?;
    Ok(())
}

/// `instance_id,kind,members,tx_ids` with semicolon-joined lists.
pub fn write_injection_report_csv<W: Write>(reports: &[InjectionReport], w: W) -> Result<()> {
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(";");
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["instance_id", "kind", "members", "tx_ids"])?;
    for r in reports {
        out.write_record([
            r.instance_id.to_string(),
            r.kind.to_string(),
            join(&mut r.members.iter().map(|m| m.to_string())),
            join(&mut r.tx_ids.iter().map(|m| m.to_string())),
        ])?;
    }
    out.flush()?;
    Ok(())
}
