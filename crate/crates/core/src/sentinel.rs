//! Rule-based transaction monitoring: hard threshold, near-miss band, and a
//! sliding-window velocity rule on the debited account.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::kv::KvConfig;
use crate::money::Cents;
use crate::par;
use crate::simnet::Account;
use crate::txflow::{self, Transaction};

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    /// Amounts at or above this raise `over_threshold`.
    pub threshold: Cents,
    /// `near_miss` covers `[fraction * threshold, threshold)`.
    pub near_miss_fraction: f64,
    pub velocity_count: usize,
    /// Per-transaction minimum for a transaction to count toward velocity.
    pub velocity_amount: Cents,
    /// Window length in steps; qualifying transactions must satisfy
    /// `last.timestamp - first.timestamp < velocity_window`.
    pub velocity_window: u32,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            threshold: Cents::from_dollars(10_000),
            near_miss_fraction: 0.95,
            velocity_count: 5,
            velocity_amount: Cents::from_dollars(2_000),
            velocity_window: 24,
        }
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<()> {
        if self.threshold.0 <= 0 {
            return Err(Error::Config("threshold must be positive".into()));
        }
        if !(self.near_miss_fraction > 0.0 && self.near_miss_fraction < 1.0) {
            return Err(Error::Config(format!(
                "near_miss_fraction {} must lie in (0, 1)",
                self.near_miss_fraction
            )));
        }
        if self.near_miss_floor() >= self.threshold {
            return Err(Error::Config("near-miss band is empty at this threshold".into()));
        }
        if self.velocity_count == 0 || self.velocity_window == 0 {
            return Err(Error::Config("velocity_count and velocity_window must be positive".into()));
        }
        Ok(())
    }

    /// Smallest amount in the near-miss band.
    pub fn near_miss_floor(&self) -> Cents {
        // The small bias keeps 0.95 * 1_000_000 from rounding up past 950_000.
        Cents((self.near_miss_fraction * self.threshold.0 as f64 - 1e-6).ceil() as i64)
    }

    /// Keys: `threshold`, `near_miss_fraction`, `velocity_count`,
    /// `velocity_amount`, `velocity_window`.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = RuleSet::default();
        let rules = RuleSet {
            threshold: kv.parse_or("threshold", d.threshold)?,
            near_miss_fraction: kv.parse_or("near_miss_fraction", d.near_miss_fraction)?,
            velocity_count: kv.parse_or("velocity_count", d.velocity_count)?,
            velocity_amount: kv.parse_or("velocity_amount", d.velocity_amount)?,
            velocity_window: kv.parse_or("velocity_window", d.velocity_window)?,
        };
        rules.validate()?;
        Ok(rules)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    OverThreshold,
    NearMiss,
    Velocity,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::OverThreshold => "over_threshold",
            Rule::NearMiss => "near_miss",
            Rule::Velocity => "velocity",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alert {
    pub alert_id: u64,
    pub rule: Rule,
    /// The debited account.
    pub account_id: u32,
    pub tx_ids: Vec<u64>,
    /// Inclusive step range covered by `tx_ids`.
    pub window: (u32, u32),
}

/// Screens a log sorted by `(timestamp, tx_id)`. Alerts come back ordered by
/// `(rule, first tx_id)` with `alert_id` equal to position.
///
/// Velocity alerts are maximal: per source account, take the transactions at or
/// above `velocity_amount` in time order; a range of them fits a window when its
/// time spread is below `velocity_window`. Each maximal fitting range with at
/// least `velocity_count` members becomes one alert.
pub fn scan(txs: &[Transaction], rules: &RuleSet) -> Result<Vec<Alert>> {
    rules.validate()?;
    txflow::check_sorted(txs)?;
    let floor = rules.near_miss_floor();

    let mut alerts = Vec::new();
    for t in txs {
        let rule = if t.amount >= rules.threshold {
            Rule::OverThreshold
        } else if t.amount >= floor {
            Rule::NearMiss
        } else {
            continue;
        };
        alerts.push(Alert {
            alert_id: 0,
            rule,
            account_id: t.src,
            tx_ids: vec![t.tx_id],
            window: (t.timestamp, t.timestamp),
        });
    }

    let mut qualifying: Vec<&Transaction> = txs.iter().filter(|t| t.amount >= rules.velocity_amount).collect();
    // stable: time order is kept within each account
    qualifying.sort_by_key(|t| t.src);
    let groups: Vec<&[&Transaction]> = qualifying.chunk_by(|a, b| a.src == b.src).collect();
    let velocity = par::map_range(groups.len(), |g| velocity_windows(groups[g], rules));
    alerts.extend(velocity.into_iter().flatten());

    alerts.sort_by_key(|a| (a.rule, a.tx_ids[0]));
    for (i, a) in alerts.iter_mut().enumerate() {
        a.alert_id = i as u64;
    }
    Ok(alerts)
}

/// Two-pointer sweep over one account's qualifying transactions (time order).
fn velocity_windows(group: &[&Transaction], rules: &RuleSet) -> Vec<Alert> {
    let mut out = Vec::new();
    let mut end = 0usize;
    let mut prev_end: Option<usize> = None;
    for start in 0..group.len() {
        end = end.max(start);
        while end + 1 < group.len() && group[end + 1].timestamp - group[start].timestamp < rules.velocity_window {
            end += 1;
        }
        // [start, end] is maximal iff it reaches further than the previous range
        let maximal = prev_end.is_none_or(|p| end > p);
        prev_end = Some(end);
        if maximal && end + 1 - start >= rules.velocity_count {
            let members = &group[start..=end];
            out.push(Alert {
                alert_id: 0,
                rule: Rule::Velocity,
                account_id: members[0].src,
                tx_ids: members.iter().map(|t| t.tx_id).collect(),
                window: (members[0].timestamp, members[members.len() - 1].timestamp),
            });
        }
    }
    out
}

pub fn write_alerts_csv<W: Write>(alerts: &[Alert], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["alert_id", "rule", "account_id", "window_start", "window_end", "tx_ids"])?;
    for a in alerts {
        let ids: Vec<String> = a.tx_ids.iter().map(|i| i.to_string()).collect();
        out.write_record([
            a.alert_id.to_string(),
            a.rule.to_string(),
            a.account_id.to_string(),
            a.window.0.to_string(),
            a.window.1.to_string(),
            ids.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Column order of [`alert_features`]. Amounts are in dollars; degrees count
/// distinct counterparties.
pub const FEATURE_NAMES: [&str; 16] = [
    "in_degree",
    "out_degree",
    "in_tx_count",
    "out_tx_count",
    "in_amount_total",
    "out_amount_total",
    "in_amount_mean",
    "out_amount_mean",
    "in_amount_max",
    "out_amount_max",
    "tx_count",
    "alerts_over_threshold",
    "alerts_near_miss",
    "alerts_velocity",
    "amount_mean",
    "amount_max",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

/// Per-account feature rows in [`FEATURE_NAMES`] order.
pub fn alert_features(accounts: &[Account], txs: &[Transaction], alerts: &[Alert]) -> Result<Matrix> {
    let n = accounts.len();
    let check = |v: u32| {
        if (v as usize) < n {
            Ok(())
        } else {
            Err(Error::UnknownAccount(v as u64))
        }
    };
    let mut f = Matrix::zeros(n, FEATURE_COUNT);
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(txs.len());
    for t in txs {
        check(t.src)?;
        check(t.dst)?;
        let amt = t.amount.as_f64();
        let s = f.row_mut(t.src as usize);
        s[3] += 1.0;
        s[5] += amt;
        s[9] = s[9].max(amt);
        let d = f.row_mut(t.dst as usize);
        d[2] += 1.0;
        d[4] += amt;
        d[8] = d[8].max(amt);
        pairs.push((t.src, t.dst));
    }
    pairs.sort_unstable();
    pairs.dedup();
    for &(s, d) in &pairs {
        f.row_mut(s as usize)[1] += 1.0;
        f.row_mut(d as usize)[0] += 1.0;
    }
    for a in alerts {
        check(a.account_id)?;
        let col = match a.rule {
            Rule::OverThreshold => 11,
            Rule::NearMiss => 12,
            Rule::Velocity => 13,
        };
        f.row_mut(a.account_id as usize)[col] += 1.0;
    }
    for v in 0..n {
        let r = f.row_mut(v);
        let (in_n, out_n) = (r[2], r[3]);
        if in_n > 0.0 {
            r[6] = r[4] / in_n;
        }
        if out_n > 0.0 {
            r[7] = r[5] / out_n;
        }
        r[10] = in_n + out_n;
        if r[10] > 0.0 {
            r[14] = (r[4] + r[5]) / r[10];
        }
        r[15] = r[8].max(r[9]);
    }
    Ok(f)
}

/// Alert counts per rule, handy for summaries.
pub fn count_by_rule(alerts: &[Alert]) -> HashMap<Rule, usize> {
    let mut m = HashMap::new();
    for a in alerts {
        *m.entry(a.rule).or_insert(0) += 1;
    }
    m
}
