//! Synthetic providers, histories, consumer requests and ground truth.
//!
//! Each provider has a latent reliability drawn from its environment. The
//! same latent value drives how often its past services completed, how much
//! a failed service still delivered, how late it tended to finish, and how
//! long it usually stayed. The trust engine never sees the latent value; it
//! has to recover it from the generated history.
//!
//! Provider `i` draws from its own ChaCha stream, so the first `n` providers
//! of a scenario do not depend on how many providers were requested.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composition::CompositionResult;
use crate::demand::RequestRecord;
use crate::error::{Error, Result};
use crate::model::{
    EnergyService, HistoryRecord, MicrocellId, ProviderId, ProviderProfile, ServiceStatus, TimeInterval,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    Trustworthy,
    Neutral,
    Untrustworthy,
}

impl EnvironmentKind {
    pub const ALL: [EnvironmentKind; 3] = [
        EnvironmentKind::Trustworthy,
        EnvironmentKind::Neutral,
        EnvironmentKind::Untrustworthy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvironmentKind::Trustworthy => "trustworthy",
            EnvironmentKind::Neutral => "neutral",
            EnvironmentKind::Untrustworthy => "untrustworthy",
        }
    }

    /// Range the latent provider reliability is drawn from, uniformly.
    pub fn reliability_range(&self) -> (f64, f64) {
        match self {
            EnvironmentKind::Trustworthy => (0.8, 1.0),
            EnvironmentKind::Neutral => (0.0, 1.0),
            EnvironmentKind::Untrustworthy => (0.0, 0.2),
        }
    }
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvironmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvironmentKind::ALL
            .into_iter()
            .find(|env| env.as_str() == s)
            .ok_or_else(|| Error::UnknownEnvironment(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvironmentProfile {
    pub kind: EnvironmentKind,
    pub seed: u64,
}

impl EnvironmentProfile {
    pub fn new(kind: EnvironmentKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

/// How a provider actually behaves when it offers a service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBehavior {
    pub provider_id: ProviderId,
    /// Probability that a service completes.
    pub reliability: f64,
    /// Fraction of the advertised amount delivered when a service does not complete.
    pub delivery_fraction: f64,
    /// Mean lateness, in minutes, of a late finish.
    pub delay_minutes: f64,
    /// Usual staying time in the microcell. An offer running longer than this
    /// completes proportionally less often; `None` means no such limit.
    pub stay_minutes: Option<f64>,
}

impl GroundTruthBehavior {
    /// Probability that `service` completes.
    pub fn completion_probability(&self, service: &EnergyService) -> f64 {
        let duration = service.interval().duration() as f64;
        let mobility = match self.stay_minutes {
            Some(stay) if duration > stay => stay / duration,
            _ => 1.0,
        };
        (self.reliability * mobility).clamp(0.0, 1.0)
    }
}

/// Generator parameters. The defaults follow the published experiment table:
/// services of 150 to 300 mAh lasting 10 to 30 minutes inside a two-hour
/// window, and demand between 500 and 2500 mAh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub service_amount: (u32, u32),
    pub service_duration: (i64, i64),
    pub demand_amount: (f64, f64),
    /// The time window offers and demand fall in.
    pub window: TimeInterval,
    /// Day span history records outside the window are drawn from.
    pub day: TimeInterval,
    pub consumers_present: (u32, u32),
    /// The microcell doing the composition.
    pub target_cell: MicrocellId,
    /// Number of other microcells providers have visited.
    pub other_cells: usize,
    /// Added to a provider's reliability inside the target cell, capped at one.
    pub in_cell_boost: f64,
    /// Probability that a past service fell inside the window.
    pub in_window_share: f64,
    /// Probability that a past service inside the window was in the target cell.
    pub in_cell_share_in_window: f64,
    /// Probability that a past service outside the window was in the target cell.
    pub in_cell_share_outside: f64,
    /// Lateness scale of a provider with zero reliability, in minutes.
    pub max_delay_minutes: f64,
    /// Number of consumers with request history in the target cell.
    pub consumers: (usize, usize),
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            service_amount: (150, 300),
            service_duration: (10, 30),
            demand_amount: (500.0, 2500.0),
            window: TimeInterval::new(600, 720).expect("static window"),
            day: TimeInterval::new(360, 1320).expect("static day"),
            consumers_present: (1, 20),
            target_cell: MicrocellId::new("m0"),
            other_cells: 4,
            in_cell_boost: 0.0,
            in_window_share: 0.5,
            in_cell_share_in_window: 0.8,
            in_cell_share_outside: 0.2,
            max_delay_minutes: 20.0,
            consumers: (3, 8),
        }
    }
}

impl WorkloadParams {
    /// Longest service a provider of this reliability usually advertises.
    fn longest_stay(&self, reliability: f64) -> i64 {
        let (dmin, dmax) = self.service_duration;
        dmin + ((dmax - dmin) as f64 * reliability).round() as i64
    }

    /// Mean advertised duration of a provider of this reliability.
    pub fn typical_stay(&self, reliability: f64) -> f64 {
        (self.service_duration.0 + self.longest_stay(reliability)) as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParams(what));
        let (amin, amax) = self.service_amount;
        if amin == 0 || amin > amax {
            return bad(format!("service amount range {amin}..{amax}"));
        }
        let (dmin, dmax) = self.service_duration;
        if dmin <= 0 || dmin > dmax || dmax > self.window.duration() {
            return bad(format!(
                "service duration range {dmin}..{dmax} does not fit the {}-minute window",
                self.window.duration()
            ));
        }
        let (lo, hi) = self.demand_amount;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("demand range {lo}..{hi}"));
        }
        if !self.day.contains(&self.window)
            || self.window.start() - self.day.start() < dmax
            || self.day.end() - self.window.end() < dmax
        {
            return bad(format!(
                "day {} must contain window {} with room for a {dmax}-minute service on each side",
                self.day, self.window
            ));
        }
        let (cmin, cmax) = self.consumers_present;
        if cmin == 0 || cmin > cmax {
            return bad(format!("consumers present range {cmin}..{cmax}"));
        }
        let (kmin, kmax) = self.consumers;
        if kmin == 0 || kmin > kmax {
            return bad(format!("consumer count range {kmin}..{kmax}"));
        }
        for (name, p) in [
            ("in_cell_boost", self.in_cell_boost),
            ("in_window_share", self.in_window_share),
            ("in_cell_share_in_window", self.in_cell_share_in_window),
            ("in_cell_share_outside", self.in_cell_share_outside),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if self.other_cells == 0 && self.in_cell_share_outside < 1.0 {
            return bad("other_cells must be positive unless every record is in the target cell".into());
        }
        if !(self.max_delay_minutes >= 0.0 && self.max_delay_minutes.is_finite()) {
            return bad(format!("max_delay_minutes = {}", self.max_delay_minutes));
        }
        Ok(())
    }
}

/// A generated microcell: providers with histories, consumer requests and the
/// hidden behavior of every provider's current offer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub providers: Vec<ProviderProfile>,
    pub requests: Vec<RequestRecord>,
    pub behaviors: BTreeMap<ProviderId, GroundTruthBehavior>,
}

/// Latent traits of one provider.
struct Latent {
    global: f64,
    in_cell: f64,
    /// Scales the delivery fraction of a failed service.
    salvage: f64,
}

impl Latent {
    fn behavior(&self, provider_id: &ProviderId, in_cell: bool, params: &WorkloadParams) -> GroundTruthBehavior {
        let reliability = if in_cell { self.in_cell } else { self.global };
        GroundTruthBehavior {
            provider_id: provider_id.clone(),
            reliability,
            delivery_fraction: (reliability * self.salvage).min(0.95),
            delay_minutes: (1.0 - reliability) * params.max_delay_minutes,
            stay_minutes: Some(params.typical_stay(reliability)),
        }
    }
}

const REQUEST_STREAM: u64 = u64::MAX;

pub fn generate_scenario(
    env: EnvironmentProfile,
    n_providers: usize,
    history_len: usize,
    params: &WorkloadParams,
) -> Result<Scenario> {
    if n_providers == 0 {
        return Err(Error::InvalidParams("at least one provider is needed".into()));
    }
    if history_len == 0 {
        return Err(Error::InvalidParams("every provider needs a history".into()));
    }
    params.validate()?;

    let mut providers = Vec::with_capacity(n_providers);
    let mut behaviors = BTreeMap::new();
    for index in 0..n_providers {
        let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
        rng.set_stream(index as u64);
        let (profile, behavior) = generate_provider(&mut rng, index, env.kind, history_len, params)?;
        behaviors.insert(profile.provider_id().clone(), behavior);
        providers.push(profile);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
    rng.set_stream(REQUEST_STREAM);
    let requests = generate_requests(&mut rng, params)?;

    Ok(Scenario {
        providers,
        requests,
        behaviors,
    })
}

fn generate_provider(
    rng: &mut ChaCha8Rng,
    index: usize,
    kind: EnvironmentKind,
    history_len: usize,
    params: &WorkloadParams,
) -> Result<(ProviderProfile, GroundTruthBehavior)> {
    let provider_id = ProviderId::new(format!("p{index:04}"));
    let (lo, hi) = kind.reliability_range();
    let global = rng.gen_range(lo..=hi);
    let latent = Latent {
        global,
        in_cell: (global + params.in_cell_boost).min(1.0),
        salvage: rng.gen_range(0.2..=1.0),
    };

    let mut history = Vec::with_capacity(history_len);
    for k in 0..history_len {
        history.push(generate_record(rng, &provider_id, k, &latent, params)?);
    }

    let window = params.window;
    let duration = rng.gen_range(params.service_duration.0..=params.service_duration.1);
    let start = rng.gen_range(window.start()..=window.end() - duration);
    let offer = EnergyService::new(
        format!("{provider_id}-offer"),
        provider_id.clone(),
        rng.gen_range(params.service_amount.0..=params.service_amount.1) as f64,
        params.target_cell.clone(),
        TimeInterval::new(start, start + duration)?,
    )?;
    let behavior = latent.behavior(&provider_id, true, params);
    Ok((ProviderProfile::new(history, offer), behavior))
}

fn generate_record(
    rng: &mut ChaCha8Rng,
    provider_id: &ProviderId,
    k: usize,
    latent: &Latent,
    params: &WorkloadParams,
) -> Result<HistoryRecord> {
    let in_window = rng.gen_bool(params.in_window_share);
    let in_cell = rng.gen_bool(if in_window {
        params.in_cell_share_in_window
    } else {
        params.in_cell_share_outside
    });
    let cell = if in_cell {
        params.target_cell.clone()
    } else {
        MicrocellId::new(format!("m{}", rng.gen_range(1..=params.other_cells)))
    };
    let behavior = latent.behavior(provider_id, in_cell, params);
    let r = behavior.reliability;

    // unreliable providers have a habit of short stays
    let duration = rng.gen_range(params.service_duration.0..=params.longest_stay(r));
    let (window, day) = (params.window, params.day);
    let start = if in_window {
        rng.gen_range(window.start()..=window.end() - duration)
    } else if rng.gen_bool(0.5) {
        rng.gen_range(day.start()..=window.start() - duration)
    } else {
        rng.gen_range(window.end()..=day.end() - duration)
    };
    let advertised = TimeInterval::new(start, start + duration)?;
    let amount = rng.gen_range(params.service_amount.0..=params.service_amount.1) as f64;

    let late_by = if rng.gen_bool(1.0 - r) {
        let spread = (2.0 * behavior.delay_minutes).round().max(1.0) as i64;
        rng.gen_range(1..=spread)
    } else {
        0
    };
    let actual = TimeInterval::new(start, start + duration + late_by)?;

    let (status, delivered) = if rng.gen_bool(r) {
        (ServiceStatus::Completed, amount)
    } else {
        let delivered = behavior.delivery_fraction * amount;
        if delivered <= 0.0 || rng.gen_bool(0.5) {
            (ServiceStatus::Canceled, delivered)
        } else {
            (ServiceStatus::Partial, delivered)
        }
    };
    let present = rng.gen_range(params.consumers_present.0..=params.consumers_present.1);
    let affected = match status {
        ServiceStatus::Canceled => rng.gen_range(0..=present),
        _ => 0,
    };

    let service = EnergyService::new(
        format!("{provider_id}-h{k:03}"),
        provider_id.clone(),
        amount,
        cell.clone(),
        advertised,
    )?;
    HistoryRecord::new(service, delivered, cell, actual, status, affected, present)
}

fn generate_requests(rng: &mut ChaCha8Rng, params: &WorkloadParams) -> Result<Vec<RequestRecord>> {
    let target = rng.gen_range(params.demand_amount.0..=params.demand_amount.1);
    let n = rng.gen_range(params.consumers.0..=params.consumers.1);
    let shares: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..=1.5)).collect();
    let total: f64 = shares.iter().sum();
    let window = params.window;
    let mut requests = Vec::new();
    for (j, share) in shares.iter().enumerate() {
        let typical = target * share / total;
        for _ in 0..rng.gen_range(1..=4) {
            let duration = rng.gen_range(params.service_duration.0..=params.service_duration.1);
            let start = rng.gen_range(window.start()..=window.end() - duration);
            let amount = (typical * rng.gen_range(0.8..=1.2)).round().max(1.0);
            requests.push(RequestRecord::new(
                format!("c{j:02}"),
                amount,
                TimeInterval::new(start, start + duration)?,
                params.target_cell.clone(),
            )?);
        }
    }
    Ok(requests)
}

/// 64-bit FNV-1a, used to give each service its own random stream.
fn stream_id(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |hash, byte| {
        (hash ^ u64::from(byte)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Plays out a composition against the providers' ground truth.
///
/// A service completes with its provider's reliability, scaled down when the
/// service outlasts the provider's usual stay. Otherwise it is
/// canceled (nothing delivered) or partial (the provider's delivery fraction)
/// with equal odds. Each service draws from a stream keyed by its id, so a
/// provider behaves the same way whichever strategy selected it.
pub fn simulate_delivery(
    result: &CompositionResult,
    behaviors: &BTreeMap<ProviderId, GroundTruthBehavior>,
    seed: u64,
) -> Result<Vec<(EnergyService, f64)>> {
    result
        .selected
        .iter()
        .map(|scored| {
            let service = &scored.service;
            let behavior = behaviors
                .get(service.provider_id())
                .ok_or_else(|| Error::MissingBehavior(service.provider_id().to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_id(service.service_id().as_str()));
            let delivered = if rng.gen_bool(behavior.completion_probability(service)) {
                service.amount()
            } else if rng.gen_bool(0.5) {
                0.0
            } else {
                behavior.delivery_fraction * service.amount()
            };
            Ok((service.clone(), delivered))
        })
        .collect()
}
