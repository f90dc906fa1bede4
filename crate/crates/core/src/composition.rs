//! Trust-based composition of energy services.
//!
//! Composition runs in two phases. Scoring filters each candidate's history
//! through the context model, assesses its trust and discounts its offer by
//! that trust. Allocation then picks services for the demand with one of four
//! strategies:
//!
//! * `greedy`: first come, first served by start time, trust ignored;
//! * `priority`: highest trust first, whole services;
//! * `knapsack`: highest trust first, the last service trimmed so the raw
//!   total matches demand exactly;
//! * `trust_heuristic`: highest trust first, accumulating trust-discounted
//!   amounts, which over-provisions raw energy as a backup.
//!
//! Every strategy stops as soon as its running total reaches demand and
//! otherwise takes everything it was given.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::context::{filter_history, resolve_expectation, ContextModel};
use crate::demand::expected_qoe;
use crate::error::{Error, Result};
use crate::model::{EnergyDemand, EnergyService, ProviderProfile};
use crate::trust::{provider_trust, TrustAttributes};

/// A candidate service with its assessed trust.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredService {
    /// The offer, carrying its trust score.
    pub service: EnergyService,
    pub trust: f64,
    /// Advertised amount discounted by trust.
    pub discounted_amount: f64,
    pub attributes: TrustAttributes,
    /// The history filter fell back to the full history.
    pub fallback_used: bool,
}

impl ScoredService {
    pub fn new(service: EnergyService, trust: f64, attributes: TrustAttributes, fallback_used: bool) -> Result<Self> {
        let service = service.with_trust(trust)?;
        Ok(Self {
            discounted_amount: service.amount() * trust,
            service,
            trust,
            attributes,
            fallback_used,
        })
    }

    pub fn amount(&self) -> f64 {
        self.service.amount()
    }

    /// The same candidate with its offer cut down to `amount` mAh.
    fn trimmed(&self, amount: f64) -> Result<Self> {
        let service = self.service.clone().with_amount(amount)?;
        Ok(Self {
            discounted_amount: amount * self.trust,
            service,
            ..self.clone()
        })
    }
}

/// Candidates split by the context model's trust threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePool {
    pub trusted: Vec<ScoredService>,
    /// Below the threshold; only used when the model admits them.
    pub low_trust: Vec<ScoredService>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.trusted.len() + self.low_trust.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The services an allocator should see for `demand`.
    pub fn for_demand(&self, demand: &EnergyDemand, model: &ContextModel) -> Vec<ScoredService> {
        let mut chosen = self.trusted.clone();
        if model.admit_low_trust {
            let supply: f64 = chosen.iter().map(ScoredService::amount).sum();
            if supply < demand.amount() {
                chosen.extend(self.low_trust.iter().cloned());
            }
        }
        chosen
    }
}

/// Scores every provider whose offer fits inside the demand slot.
pub fn score_candidates(
    providers: &[ProviderProfile],
    demand: &EnergyDemand,
    model: &ContextModel,
) -> Result<CandidatePool> {
    let mut pool = CandidatePool::default();
    for provider in providers {
        let offer = provider.offered_service();
        if !demand.slot().contains(offer.interval()) {
            continue;
        }
        let filtered = filter_history(provider, model);
        let expectation = resolve_expectation(&filtered.records, model.expectation)?;
        let assessment = provider_trust(
            &filtered.records,
            offer,
            &model.weights,
            expectation,
            model.min_records_duration,
        )?;
        let scored = ScoredService::new(
            offer.clone(),
            assessment.score,
            assessment.attributes,
            filtered.fallback,
        )?;
        if scored.trust >= model.trust_threshold {
            pool.trusted.push(scored);
        } else {
            pool.low_trust.push(scored);
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Priority,
    Knapsack,
    TrustHeuristic,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Greedy,
        Strategy::Priority,
        Strategy::Knapsack,
        Strategy::TrustHeuristic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Priority => "priority",
            Strategy::Knapsack => "knapsack",
            Strategy::TrustHeuristic => "trust_heuristic",
        }
    }

    pub fn allocate(&self, candidates: &[ScoredService], demand: &EnergyDemand) -> Result<CompositionResult> {
        match self {
            Strategy::Greedy => allocate_greedy(candidates, demand),
            Strategy::Priority => allocate_priority(candidates, demand),
            Strategy::Knapsack => allocate_knapsack(candidates, demand),
            Strategy::TrustHeuristic => allocate_trust_heuristic(candidates, demand),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|strategy| strategy.as_str() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_owned()))
    }
}

/// The selected services and how well they are expected to serve demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionResult {
    pub selected: Vec<ScoredService>,
    pub expected_qoe: f64,
    /// Filled in once the composition has been played out.
    pub realized_qoe: Option<f64>,
    /// Incentive credits; zero until priced.
    pub cost: f64,
    pub strategy: Strategy,
}

impl CompositionResult {
    fn new(selected: Vec<ScoredService>, demand: &EnergyDemand, strategy: Strategy) -> Result<Self> {
        let services: Vec<EnergyService> = selected.iter().map(|s| s.service.clone()).collect();
        Ok(Self {
            expected_qoe: expected_qoe(&services, demand)?,
            selected,
            realized_qoe: None,
            cost: 0.0,
            strategy,
        })
    }

    /// Raw energy committed by the selected providers.
    pub fn raw_energy(&self) -> f64 {
        self.selected.iter().map(ScoredService::amount).sum()
    }

    pub fn discounted_energy(&self) -> f64 {
        self.selected.iter().map(|s| s.discounted_amount).sum()
    }

    pub fn priced(mut self, price_per_unit: f64) -> Self {
        self.cost = incentive_cost(&self, price_per_unit);
        self
    }
}

fn by_start_time(a: &ScoredService, b: &ScoredService) -> Ordering {
    a.service
        .interval()
        .start()
        .cmp(&b.service.interval().start())
        .then_with(|| a.service.provider_id().cmp(b.service.provider_id()))
        .then_with(|| a.service.service_id().cmp(b.service.service_id()))
}

fn by_trust(a: &ScoredService, b: &ScoredService) -> Ordering {
    b.trust
        .total_cmp(&a.trust)
        .then_with(|| b.amount().total_cmp(&a.amount()))
        .then_with(|| a.service.provider_id().cmp(b.service.provider_id()))
        .then_with(|| a.service.service_id().cmp(b.service.service_id()))
}

fn sorted(candidates: &[ScoredService], order: fn(&ScoredService, &ScoredService) -> Ordering) -> Vec<ScoredService> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(order);
    sorted
}

/// Takes services in order until `measure` of the running selection reaches
/// demand.
fn take_until_covered(
    ordered: Vec<ScoredService>,
    demand: f64,
    measure: impl Fn(&ScoredService) -> f64,
) -> Vec<ScoredService> {
    let mut total = 0.0;
    let mut selected = Vec::new();
    for candidate in ordered {
        if total >= demand {
            break;
        }
        total += measure(&candidate);
        selected.push(candidate);
    }
    selected
}

/// First come, first served by start time; ties by provider id.
pub fn allocate_greedy(candidates: &[ScoredService], demand: &EnergyDemand) -> Result<CompositionResult> {
    let selected = take_until_covered(
        sorted(candidates, by_start_time),
        demand.amount(),
        ScoredService::amount,
    );
    CompositionResult::new(selected, demand, Strategy::Greedy)
}

/// Highest trust first (ties: larger amount, then provider id), whole services.
pub fn allocate_priority(candidates: &[ScoredService], demand: &EnergyDemand) -> Result<CompositionResult> {
    let selected = take_until_covered(sorted(candidates, by_trust), demand.amount(), ScoredService::amount);
    CompositionResult::new(selected, demand, Strategy::Priority)
}

/// Fractional knapsack with capacity equal to demand, filled in trust order.
///
/// The selection is the shortest trust-ordered prefix that covers demand, so
/// its weakest member is as trustworthy as the weakest member of any covering
/// selection can be. The last service is cut down to exactly close the gap.
pub fn allocate_knapsack(candidates: &[ScoredService], demand: &EnergyDemand) -> Result<CompositionResult> {
    let mut remaining = demand.amount();
    let mut selected = Vec::new();
    for candidate in sorted(candidates, by_trust) {
        if remaining <= 0.0 {
            break;
        }
        if candidate.amount() <= remaining {
            remaining -= candidate.amount();
            selected.push(candidate);
        } else {
            selected.push(candidate.trimmed(remaining)?);
            remaining = 0.0;
        }
    }
    CompositionResult::new(selected, demand, Strategy::Knapsack)
}

/// Highest trust first, accumulating trust-discounted amounts until they
/// cover demand. The raw energy of the selection exceeds the discounted total
/// by the providers' expected shortfall.
pub fn allocate_trust_heuristic(candidates: &[ScoredService], demand: &EnergyDemand) -> Result<CompositionResult> {
    let selected = take_until_covered(sorted(candidates, by_trust), demand.amount(), |s| s.discounted_amount);
    CompositionResult::new(selected, demand, Strategy::TrustHeuristic)
}

/// Scores the providers and allocates with `strategy`.
pub fn compose(
    providers: &[ProviderProfile],
    demand: &EnergyDemand,
    model: &ContextModel,
    strategy: Strategy,
) -> Result<CompositionResult> {
    let pool = score_candidates(providers, demand, model)?;
    strategy.allocate(&pool.for_demand(demand, model), demand)
}

/// Credits owed: price per mAh times the raw energy selected.
pub fn incentive_cost(result: &CompositionResult, price_per_unit: f64) -> f64 {
    price_per_unit * result.raw_energy()
}
