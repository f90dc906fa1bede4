//! Context-aware trust assessment and trust-based composition of
//! crowdsourced IoT energy services.
//!
//! A microcell owner (the super-provider) collects energy offers from nearby
//! IoT devices and has to cover its consumers' predicted demand for a time
//! slot. Offers are only promises: providers walk away, deliver less than
//! advertised, or finish late. This crate scores each provider from its past
//! provisioning, filtered and weighted by the owner's context model, and
//! composes offers so that the expected Quality of Experience stays high.
//!
//! * [`model`]: services, history records, providers, demand.
//! * [`trust`]: the five trust attributes and the weighted trust score.
//! * [`context`]: history constraints, expectation modes, history filtering.
//! * [`demand`]: demand aggregation and QoE.
//! * [`composition`]: candidate scoring and the four allocation strategies.
//! * [`workload`]: synthetic scenarios and delivery simulation.
//! * [`harness`]: repeated-trial experiments and result tables.
//! * [`io`]: CSV formats.
//!
//! ```
//! use energy_trust::composition::{compose, Strategy};
//! use energy_trust::context::ContextModel;
//! use energy_trust::model::{EnergyDemand, TimeInterval};
//! use energy_trust::workload::{generate_scenario, EnvironmentKind, EnvironmentProfile, WorkloadParams};
//!
//! let params = WorkloadParams::default();
//! let env = EnvironmentProfile::new(EnvironmentKind::Trustworthy, 7);
//! let scenario = generate_scenario(env, 20, 30, &params)?;
//! let demand = EnergyDemand::new(1000.0, params.window, params.target_cell.clone())?;
//!
//! let result = compose(&scenario.providers, &demand, &ContextModel::default(), Strategy::TrustHeuristic)?;
//! assert_eq!(result.expected_qoe, 1.0);
//! assert!(result.raw_energy() > 1000.0);
//! # Ok::<(), energy_trust::Error>(())
//! ```

pub mod composition;
pub mod context;
pub mod demand;
mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod trust;
pub mod workload;

pub use error::{Error, Result};

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trust-model.md")]
    mod trust_model {}
    #[doc = include_str!("../../../book/src/context-model.md")]
    mod context_model {}
    #[doc = include_str!("../../../book/src/demand-and-qoe.md")]
    mod demand_and_qoe {}
    #[doc = include_str!("../../../book/src/composition.md")]
    mod composition {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
}
