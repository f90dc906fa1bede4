//! Provider trust attributes and the weighted trust score.
//!
//! Five attributes are computed from a provider's (possibly filtered)
//! history, each in `[0, 1]`:
//!
//! | attribute        | measures                                             |
//! |------------------|------------------------------------------------------|
//! | success rate     | share of services delivered in full                  |
//! | delivery size    | delivered energy against the expected amount         |
//! | timeliness       | inverse of the mean lateness in minutes              |
//! | impact           | complement of the consumer share hit by cancellations |
//! | duration factor  | current offer length against the usual staying time  |
//!
//! The provider trust score is their weighted sum. Empty histories score
//! zero on the two delivery attributes and one on the three misbehavior
//! attributes.

use serde::{Deserialize, Serialize};

use crate::context::{resolve_expectation, ExpectationMode};
use crate::error::{Error, Result};
use crate::model::{EnergyService, HistoryRecord, ServiceStatus};

/// Tolerance on the unit-sum constraint of the weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustAttributes {
    pub success_rate: f64,
    pub delivery_size: f64,
    pub timeliness: f64,
    pub impact: f64,
    pub duration_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct TrustWeights {
    success_rate: f64,
    timeliness: f64,
    delivery_size: f64,
    impact: f64,
    duration: f64,
}

impl TrustWeights {
    /// Weights in the order success rate, timeliness, delivery size, impact,
    /// duration. They must be nonnegative and sum to one.
    pub fn new(success_rate: f64, timeliness: f64, delivery_size: f64, impact: f64, duration: f64) -> Result<Self> {
        let all = [success_rate, timeliness, delivery_size, impact, duration];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "{all:?} has a negative or non-finite weight"
            )));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("{all:?} sums to {sum}, not 1")));
        }
        Ok(Self {
            success_rate,
            timeliness,
            delivery_size,
            impact,
            duration,
        })
    }

    /// Scales arbitrary nonnegative importances so they sum to one.
    pub fn normalized(raw: [f64; 5]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidWeights(format!("{raw:?} cannot be normalized")));
        }
        let [a, b, c, d, e] = raw.map(|w| w / sum);
        Self::new(a, b, c, d, e)
    }

    /// 0.2 on every attribute.
    pub fn equal() -> Self {
        Self {
            success_rate: 0.2,
            timeliness: 0.2,
            delivery_size: 0.2,
            impact: 0.2,
            duration: 0.2,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.success_rate,
            self.timeliness,
            self.delivery_size,
            self.impact,
            self.duration,
        ]
    }

    /// Weighted sum of the attributes.
    pub fn combine(&self, attrs: &TrustAttributes) -> f64 {
        self.success_rate * attrs.success_rate
            + self.timeliness * attrs.timeliness
            + self.delivery_size * attrs.delivery_size
            + self.impact * attrs.impact
            + self.duration * attrs.duration_factor
    }
}

impl Default for TrustWeights {
    fn default() -> Self {
        Self::equal()
    }
}

impl TryFrom<[f64; 5]> for TrustWeights {
    type Error = Error;

    fn try_from(w: [f64; 5]) -> Result<Self> {
        Self::new(w[0], w[1], w[2], w[3], w[4])
    }
}

impl From<TrustWeights> for [f64; 5] {
    fn from(w: TrustWeights) -> Self {
        w.as_array()
    }
}

/// Share of records that delivered everything they advertised.
pub fn success_rate(history: &[HistoryRecord]) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    let completed = history.iter().filter(|h| h.is_completed()).count();
    completed as f64 / history.len() as f64
}

/// Delivered energy measured against the expectation mode.
///
/// Under [`ExpectationMode::Advertised`] this is total delivered over total
/// advertised. Under a capped (or customized, resolved on `history`) amount
/// each record scores `min(1, delivered / expected)` and the scores are
/// averaged.
pub fn delivery_size(history: &[HistoryRecord], expectation: ExpectationMode) -> Result<f64> {
    if history.is_empty() {
        return Ok(0.0);
    }
    match resolve_expectation(history, expectation)? {
        ExpectationMode::Advertised => {
            let delivered: f64 = history.iter().map(HistoryRecord::delivered).sum();
            let advertised: f64 = history.iter().map(|h| h.service().amount()).sum();
            Ok((delivered / advertised).clamp(0.0, 1.0))
        }
        ExpectationMode::Capped(expected) => {
            if !(expected.is_finite() && expected > 0.0) {
                return Err(Error::InvalidExpectation(format!(
                    "capped amount must be positive, got {expected}"
                )));
            }
            let total: f64 = history.iter().map(|h| (h.delivered() / expected).min(1.0)).sum();
            Ok((total / history.len() as f64).clamp(0.0, 1.0))
        }
        ExpectationMode::Customized(_) => unreachable!("resolve_expectation never returns Customized"),
    }
}

/// Lateness of a record: actual end minus advertised end, in minutes.
pub fn delay_minutes(record: &HistoryRecord) -> i64 {
    record.actual_interval().end() - record.service().interval().end()
}

/// One when the summed lateness is not positive, otherwise the inverse of
/// the mean lateness, capped at one.
pub fn timeliness(history: &[HistoryRecord]) -> f64 {
    let total: i64 = history.iter().map(delay_minutes).sum();
    if total <= 0 {
        return 1.0;
    }
    let mean = total as f64 / history.len() as f64;
    (1.0 / mean).min(1.0)
}

/// Share of present consumers that were receiving from a canceled service.
pub fn failure_impact(record: &HistoryRecord) -> f64 {
    match record.status() {
        ServiceStatus::Canceled => record.affected_consumers() as f64 / record.consumers_present() as f64,
        _ => 0.0,
    }
}

/// Mean complement of the failure impact over every record.
pub fn impact_score(history: &[HistoryRecord]) -> f64 {
    if history.is_empty() {
        return 1.0;
    }
    let total: f64 = history.iter().map(|h| 1.0 - failure_impact(h)).sum();
    total / history.len() as f64
}

/// Mean advertised duration of past services, if the history holds more than
/// `min_records` of them.
pub fn staying_duration(history: &[HistoryRecord], min_records: usize) -> Option<f64> {
    if history.len() <= min_records {
        return None;
    }
    let total: i64 = history.iter().map(|h| h.service().interval().duration()).sum();
    Some(total as f64 / history.len() as f64)
}

pub fn duration_factor(history: &[HistoryRecord], current: &EnergyService, min_records: usize) -> f64 {
    let Some(usual) = staying_duration(history, min_records) else {
        return 1.0;
    };
    let offered = current.interval().duration() as f64;
    if offered <= usual {
        1.0
    } else {
        usual / offered
    }
}

pub fn attributes(
    history: &[HistoryRecord],
    current: &EnergyService,
    expectation: ExpectationMode,
    min_records: usize,
) -> Result<TrustAttributes> {
    Ok(TrustAttributes {
        success_rate: success_rate(history),
        delivery_size: delivery_size(history, expectation)?,
        timeliness: timeliness(history),
        impact: impact_score(history),
        duration_factor: duration_factor(history, current, min_records),
    })
}

/// A trust score with the attributes it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustAssessment {
    pub score: f64,
    pub attributes: TrustAttributes,
}

pub fn provider_trust(
    history: &[HistoryRecord],
    current: &EnergyService,
    weights: &TrustWeights,
    expectation: ExpectationMode,
    min_records: usize,
) -> Result<TrustAssessment> {
    let attributes = attributes(history, current, expectation, min_records)?;
    // the unit-sum tolerance can push a perfect score a hair above one
    let score = weights.combine(&attributes).clamp(0.0, 1.0);
    Ok(TrustAssessment { score, attributes })
}
