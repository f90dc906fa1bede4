//! Domain types shared by every other module.
//!
//! Time is measured in integer minutes on the simulation-day axis and energy
//! in floating-point mAh. Types that carry invariants keep their fields
//! private and validate them in their constructors, so a value that exists
//! is a value that is consistent.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(id.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(id: String) -> Self {
                Self(id)
            }
        }
    };
}

id_type!(
    /// Identifier of an energy provider.
    ProviderId
);
id_type!(
    /// Identifier of a single advertised energy service.
    ServiceId
);
id_type!(
    /// Identifier of a microcell (a cafe, a restaurant, ...).
    MicrocellId
);

/// Closed interval `[start, end]` in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    start: i64,
    end: i64,
}

impl TimeInterval {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    pub fn duration(&self) -> i64 {
        self.end - self.start
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &TimeInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// True when the two intervals share a stretch of positive length.
    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

pub(crate) fn check_amount(amount: f64) -> Result<f64> {
    if amount.is_finite() && amount > 0.0 {
        Ok(amount)
    } else {
        Err(Error::InvalidAmount(amount))
    }
}

pub(crate) fn check_unit(score: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::InvalidTrust(score))
    }
}

/// An advertised energy offer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyService {
    service_id: ServiceId,
    provider_id: ProviderId,
    amount: f64,
    location: MicrocellId,
    interval: TimeInterval,
    trust: Option<f64>,
}

impl EnergyService {
    pub fn new(
        service_id: impl Into<ServiceId>,
        provider_id: impl Into<ProviderId>,
        amount: f64,
        location: impl Into<MicrocellId>,
        interval: TimeInterval,
    ) -> Result<Self> {
        Ok(Self {
            service_id: service_id.into(),
            provider_id: provider_id.into(),
            amount: check_amount(amount)?,
            location: location.into(),
            interval,
            trust: None,
        })
    }

    pub fn service_id(&self) -> &ServiceId {
        &self.service_id
    }

    pub fn provider_id(&self) -> &ProviderId {
        &self.provider_id
    }

    /// Advertised energy in mAh.
    pub fn amount(&self) -> f64 {
        self.amount
    }

    pub fn location(&self) -> &MicrocellId {
        &self.location
    }

    pub fn interval(&self) -> &TimeInterval {
        &self.interval
    }

    pub fn trust(&self) -> Option<f64> {
        self.trust
    }

    pub fn with_trust(mut self, trust: f64) -> Result<Self> {
        self.trust = Some(check_unit(trust)?);
        Ok(self)
    }

    pub fn with_amount(mut self, amount: f64) -> Result<Self> {
        self.amount = check_amount(amount)?;
        Ok(self)
    }
}

/// Outcome of a past service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceStatus {
    /// The full advertised amount was delivered.
    Completed,
    /// Some but not all of the advertised energy was delivered.
    Partial,
    /// The provider walked away while consumers were receiving.
    Canceled,
}

impl ServiceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ServiceStatus::Completed => "completed",
            ServiceStatus::Partial => "partial",
            ServiceStatus::Canceled => "canceled",
        }
    }
}

impl fmt::Display for ServiceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ServiceStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "completed" => Ok(ServiceStatus::Completed),
            "partial" => Ok(ServiceStatus::Partial),
            "canceled" => Ok(ServiceStatus::Canceled),
            other => Err(Error::InvalidParams(format!("unknown service status `{other}`"))),
        }
    }
}

/// Relative tolerance used to decide that a delivery matched its advertisement.
const COMPLETION_TOLERANCE: f64 = 1e-9;

fn delivered_in_full(delivered: f64, amount: f64) -> bool {
    (delivered - amount).abs() <= COMPLETION_TOLERANCE * amount.max(1.0)
}

/// One past provisioning of a provider, together with what actually happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    service: EnergyService,
    delivered: f64,
    microcell: MicrocellId,
    actual_interval: TimeInterval,
    status: ServiceStatus,
    affected_consumers: u32,
    consumers_present: u32,
}

impl HistoryRecord {
    /// Builds a record, rejecting any combination of fields that could not
    /// have been observed (a "completed" record that delivered less than it
    /// advertised, affected consumers on a service that was not canceled, ...).
    pub fn new(
        service: EnergyService,
        delivered: f64,
        microcell: impl Into<MicrocellId>,
        actual_interval: TimeInterval,
        status: ServiceStatus,
        affected_consumers: u32,
        consumers_present: u32,
    ) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidRecord {
            service_id: service.service_id().to_string(),
            reason,
        };
        let amount = service.amount();
        if !delivered.is_finite() || delivered < 0.0 {
            return Err(invalid(format!("delivered {delivered} mAh is negative")));
        }
        if delivered > amount && !delivered_in_full(delivered, amount) {
            return Err(invalid(format!(
                "delivered {delivered} mAh exceeds advertised {amount} mAh"
            )));
        }
        let full = delivered_in_full(delivered, amount);
        match status {
            ServiceStatus::Completed if !full => {
                return Err(invalid(format!("completed but delivered {delivered} of {amount} mAh")))
            }
            ServiceStatus::Partial if full || delivered <= 0.0 => {
                return Err(invalid(format!(
                    "partial delivery must lie strictly between 0 and {amount} mAh, got {delivered}"
                )))
            }
            ServiceStatus::Canceled if full => return Err(invalid("canceled but delivered the full amount".into())),
            _ => {}
        }
        if consumers_present == 0 {
            return Err(invalid("at least one consumer must be present".into()));
        }
        if affected_consumers > consumers_present {
            return Err(invalid(format!(
                "{affected_consumers} affected consumers exceed {consumers_present} present"
            )));
        }
        if status != ServiceStatus::Canceled && affected_consumers != 0 {
            return Err(invalid(format!("{status} service cannot affect consumers")));
        }
        Ok(Self {
            service,
            delivered,
            microcell: microcell.into(),
            actual_interval,
            status,
            affected_consumers,
            consumers_present,
        })
    }

    /// The service as it was advertised.
    pub fn service(&self) -> &EnergyService {
        &self.service
    }

    /// Energy actually delivered, in mAh.
    pub fn delivered(&self) -> f64 {
        self.delivered
    }

    pub fn microcell(&self) -> &MicrocellId {
        &self.microcell
    }

    pub fn actual_interval(&self) -> &TimeInterval {
        &self.actual_interval
    }

    pub fn status(&self) -> ServiceStatus {
        self.status
    }

    pub fn affected_consumers(&self) -> u32 {
        self.affected_consumers
    }

    pub fn consumers_present(&self) -> u32 {
        self.consumers_present
    }

    pub fn is_completed(&self) -> bool {
        self.status == ServiceStatus::Completed
    }
}

/// A candidate provider: its past and its current advertisement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    provider_id: ProviderId,
    history: Vec<HistoryRecord>,
    offered_service: EnergyService,
}

impl ProviderProfile {
    pub fn new(history: Vec<HistoryRecord>, offered_service: EnergyService) -> Self {
        Self {
            provider_id: offered_service.provider_id().clone(),
            history,
            offered_service,
        }
    }

    pub fn provider_id(&self) -> &ProviderId {
        &self.provider_id
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn offered_service(&self) -> &EnergyService {
        &self.offered_service
    }
}

/// Aggregated energy demand of a microcell for one time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDemand {
    amount: f64,
    slot: TimeInterval,
    microcell: MicrocellId,
}

impl EnergyDemand {
    pub fn new(amount: f64, slot: TimeInterval, microcell: impl Into<MicrocellId>) -> Result<Self> {
        Ok(Self {
            amount: check_amount(amount)?,
            slot,
            microcell: microcell.into(),
        })
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
