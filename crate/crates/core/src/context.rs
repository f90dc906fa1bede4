//! The super-provider's context model: which part of a provider's history is
//! admissible evidence, how the trust attributes are weighted, the minimum
//! trust a provider needs to be used, and the yardstick for delivery size.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HistoryRecord, MicrocellId, ProviderProfile, TimeInterval};
use crate::trust::TrustWeights;

/// History constraints. Every `None` is an inactive constraint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryConstraints {
    /// Only records in this microcell.
    pub location: Option<MicrocellId>,
    /// Only records whose advertised interval lies inside this window.
    pub time: Option<TimeInterval>,
    /// Only records that advertised at least this many mAh.
    pub min_energy: Option<f64>,
}

impl HistoryConstraints {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.location.is_none() && self.time.is_none() && self.min_energy.is_none()
    }
}

/// Whether a single record meets every active constraint.
pub fn satisfies(record: &HistoryRecord, constraints: &HistoryConstraints) -> bool {
    let location_ok = constraints
        .location
        .as_ref()
        .is_none_or(|cell| record.microcell() == cell);
    let time_ok = constraints
        .time
        .as_ref()
        .is_none_or(|window| window.contains(record.service().interval()));
    let energy_ok = constraints
        .min_energy
        .is_none_or(|min| record.service().amount() >= min);
    location_ok && time_ok && energy_ok
}

/// Statistic used to derive a per-provider expected amount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
    Mode,
}

impl Statistic {
    /// Evaluates the statistic over a non-empty sample. Mode ties go to the
    /// smallest value.
    pub fn evaluate(&self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        Some(match self {
            Statistic::Mean => sorted.iter().sum::<f64>() / n as f64,
            Statistic::Median => {
                if n % 2 == 1 {
                    sorted[n / 2]
                } else {
                    (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
                }
            }
            Statistic::Mode => {
                let mut best = (sorted[0], 0usize);
                let mut run = (sorted[0], 0usize);
                for &v in &sorted {
                    if v == run.0 {
                        run.1 += 1;
                    } else {
                        run = (v, 1);
                    }
                    // strict: an equally long later run holds a larger value
                    if run.1 > best.1 {
                        best = run;
                    }
                }
                best.0
            }
        })
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
            Statistic::Mode => "mode",
        })
    }
}

/// Yardstick for the delivery-size attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    /// Delivered energy against what each service advertised.
    Advertised,
    /// Delivered energy against one fixed amount for every provider.
    Capped(f64),
    /// Delivered energy against a statistic of the provider's own deliveries.
    Customized(Statistic),
}

impl ExpectationMode {
    pub fn capped(expected: f64) -> Result<Self> {
        if expected.is_finite() && expected > 0.0 {
            Ok(ExpectationMode::Capped(expected))
        } else {
            Err(Error::InvalidExpectation(format!(
                "capped amount must be positive, got {expected}"
            )))
        }
    }
}

impl fmt::Display for ExpectationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpectationMode::Advertised => f.write_str("advertised"),
            ExpectationMode::Capped(amount) => write!(f, "capped:{amount}"),
            ExpectationMode::Customized(stat) => write!(f, "customized:{stat}"),
        }
    }
}

/// Parses `advertised`, `capped:<mAh>` or `customized:<mean|median|mode>`.
impl FromStr for ExpectationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidExpectation(format!("cannot parse `{s}`"));
        let (kind, arg) = match s.split_once(':') {
            Some((kind, arg)) => (kind.trim(), Some(arg.trim())),
            None => (s.trim(), None),
        };
        match (kind, arg) {
            ("advertised", None) => Ok(ExpectationMode::Advertised),
            ("capped", Some(amount)) => ExpectationMode::capped(amount.parse().map_err(|_| bad())?),
            ("customized", Some(stat)) => Ok(ExpectationMode::Customized(match stat {
                "mean" => Statistic::Mean,
                "median" => Statistic::Median,
                "mode" => Statistic::Mode,
                _ => return Err(bad()),
            })),
            _ => Err(bad()),
        }
    }
}

/// Turns a customized expectation into the capped amount it stands for on
/// this particular history. Advertised and capped modes pass through.
pub fn resolve_expectation(history: &[HistoryRecord], mode: ExpectationMode) -> Result<ExpectationMode> {
    match mode {
        ExpectationMode::Customized(stat) => {
            let delivered: Vec<f64> = history.iter().map(HistoryRecord::delivered).collect();
            let expected = stat.evaluate(&delivered).ok_or(Error::EmptyHistory)?;
            ExpectationMode::capped(expected)
        }
        other => Ok(other),
    }
}

/// Everything the super-provider brings to a trust assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub history: HistoryConstraints,
    pub weights: TrustWeights,
    /// Providers scoring below this are kept out of the trustworthy pool.
    pub trust_threshold: f64,
    pub expectation: ExpectationMode,
    /// Filtered histories shorter than this fall back to the full history.
    pub min_history: usize,
    /// A staying-duration pattern needs strictly more records than this.
    pub min_records_duration: usize,
    /// Admit the low-trust pool when the trustworthy pool cannot cover demand.
    pub admit_low_trust: bool,
}

impl Default for ContextModel {
    fn default() -> Self {
        Self {
            history: HistoryConstraints::none(),
            weights: TrustWeights::equal(),
            trust_threshold: 0.0,
            expectation: ExpectationMode::Advertised,
            min_history: 5,
            min_records_duration: 3,
            admit_low_trust: false,
        }
    }
}

impl ContextModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.trust_threshold) {
            return Err(Error::Config(format!(
                "trust threshold {} is outside [0, 1]",
                self.trust_threshold
            )));
        }
        if let ExpectationMode::Capped(amount) = self.expectation {
            ExpectationMode::capped(amount)?;
        }
        if let Some(min) = self.history.min_energy {
            if !min.is_finite() {
                return Err(Error::Config(format!("minimum energy {min} is not finite")));
            }
        }
        Ok(())
    }
}

/// Result of history filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredHistory<'a> {
    pub records: Cow<'a, [HistoryRecord]>,
    /// Records that actually met the constraints, before any fallback.
    pub matched: usize,
    /// Set when too few records matched and the full history was used.
    pub fallback: bool,
}

impl FilteredHistory<'_> {
    /// A provider meets the constraints when at least one record matched.
    pub fn meets_constraints(&self) -> bool {
        self.matched > 0
    }
}

/// Keeps the records that satisfy the model's history constraints, or the
/// whole history when fewer than `min_history` records survive.
pub fn filter_history<'a>(profile: &'a ProviderProfile, model: &ContextModel) -> FilteredHistory<'a> {
    filter_records(profile.history(), &model.history, model.min_history)
}

pub fn filter_records<'a>(
    history: &'a [HistoryRecord],
    constraints: &HistoryConstraints,
    min_history: usize,
) -> FilteredHistory<'a> {
    let records: Cow<'a, [HistoryRecord]> = if constraints.is_empty() {
        Cow::Borrowed(history)
    } else {
        Cow::Owned(history.iter().filter(|r| satisfies(r, constraints)).cloned().collect())
    };
    let matched = records.len();
    if matched < min_history {
        FilteredHistory {
            records: Cow::Borrowed(history),
            matched,
            fallback: true,
        }
    } else {
        FilteredHistory {
            records,
            matched,
            fallback: false,
        }
    }
}
