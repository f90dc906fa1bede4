//! Demand aggregation and Quality of Experience.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_amount, EnergyDemand, EnergyService, MicrocellId, TimeInterval};

/// A consumer's past energy request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    consumer_id: String,
    amount: f64,
    slot: TimeInterval,
    microcell: MicrocellId,
}

impl RequestRecord {
    pub fn new(
        consumer_id: impl Into<String>,
        amount: f64,
        slot: TimeInterval,
        microcell: impl Into<MicrocellId>,
    ) -> Result<Self> {
        Ok(Self {
            consumer_id: consumer_id.into(),
            amount: check_amount(amount)?,
            slot,
            microcell: microcell.into(),
        })
    }

    pub fn consumer_id(&self) -> &str {
        &self.consumer_id
    }

    pub fn amount(&self) -> f64 {
        self.amount
    }

    pub fn slot(&self) -> &TimeInterval {
        &self.slot
    }

    pub fn microcell(&self) -> &MicrocellId {
        &self.microcell
    }
}

/// Predicts one consumer's request for a slot from that consumer's records
/// in the microcell.
pub trait DemandPredictor {
    fn predict(&self, records: &[&RequestRecord], slot: &TimeInterval) -> f64;
}

impl<F> DemandPredictor for F
where
    F: Fn(&[&RequestRecord], &TimeInterval) -> f64,
{
    fn predict(&self, records: &[&RequestRecord], slot: &TimeInterval) -> f64 {
        self(records, slot)
    }
}

/// Mean amount of the consumer's requests that overlap the slot; zero when
/// none do.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoricalMean;

impl DemandPredictor for HistoricalMean {
    fn predict(&self, records: &[&RequestRecord], slot: &TimeInterval) -> f64 {
        let (sum, n) = records
            .iter()
            .filter(|r| r.slot().overlaps(slot))
            .fold((0.0, 0usize), |(s, n), r| (s + r.amount(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Sums per-consumer predictions for the slot over every consumer seen in
/// the microcell.
pub fn aggregate_demand(
    requests: &[RequestRecord],
    slot: TimeInterval,
    microcell: &MicrocellId,
    predictor: &impl DemandPredictor,
) -> Result<EnergyDemand> {
    if slot.duration() == 0 {
        return Err(Error::DegenerateSlot {
            start: slot.start(),
            end: slot.end(),
        });
    }
    let mut by_consumer: BTreeMap<&str, Vec<&RequestRecord>> = BTreeMap::new();
    for r in requests.iter().filter(|r| r.microcell() == microcell) {
        by_consumer.entry(r.consumer_id()).or_default().push(r);
    }
    let total: f64 = by_consumer
        .values()
        .map(|records| predictor.predict(records, &slot).max(0.0))
        .sum();
    if total <= 0.0 {
        return Err(Error::NoDemand {
            microcell: microcell.to_string(),
            start: slot.start(),
            end: slot.end(),
        });
    }
    EnergyDemand::new(total, slot, microcell.clone())
}

/// Delivered energy over demand, without the clamp.
pub fn qoe_ratio(allocated: &[(EnergyService, f64)], demand: &EnergyDemand) -> f64 {
    let delivered: f64 = allocated.iter().map(|(_, d)| d).sum();
    delivered / demand.amount()
}

/// Delivered energy over demand, saturating at full satisfaction.
pub fn qoe(allocated: &[(EnergyService, f64)], demand: &EnergyDemand) -> f64 {
    qoe_ratio(allocated, demand).clamp(0.0, 1.0)
}

/// Trust-discounted energy over demand, saturating at one.
pub fn expected_qoe(selected: &[EnergyService], demand: &EnergyDemand) -> Result<f64> {
    let mut total = 0.0;
    for s in selected {
        let trust = s
            .trust()
            .ok_or_else(|| Error::MissingTrust(s.service_id().to_string()))?;
        total += s.amount() * trust;
    }
    Ok((total / demand.amount()).clamp(0.0, 1.0))
}
