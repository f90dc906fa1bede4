//! Repeated-trial experiments over generated microcells.
//!
//! Every trial generates one scenario per environment with as many providers
//! as the largest service count; smaller counts use a prefix of the same
//! providers. Within a trial all strategies and context variants see the same
//! providers, the same demand and the same delivery randomness, so the
//! differences between rows come from the allocation alone.
//!
//! Trials run in parallel and are reduced in trial order, so the output does
//! not depend on scheduling. Only the timing columns vary between runs.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::composition::{compose, score_candidates, Strategy};
use crate::context::{ContextModel, ExpectationMode, HistoryConstraints, Statistic};
use crate::demand::qoe;
use crate::error::{Error, Result};
use crate::model::{EnergyDemand, ProviderProfile};
use crate::trust::TrustWeights;
use crate::workload::{
    generate_scenario, simulate_delivery, EnvironmentKind, EnvironmentProfile, Scenario, WorkloadParams,
};

/// Demand per trial: a fixed amount or a uniform draw from a range.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Fixed(f64),
    Range(f64, f64),
}

impl DemandSpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DemandSpec::Fixed(d) => d.is_finite() && d > 0.0,
            DemandSpec::Range(lo, hi) => lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid demand {self:?}")))
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            DemandSpec::Fixed(d) => d,
            DemandSpec::Range(lo, hi) => rng.gen_range(lo..=hi),
        }
    }
}

/// Parses `1000` or `500-2500`.
impl FromStr for DemandSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse demand `{s}`")))
        };
        let spec = match s.split_once('-') {
            Some((lo, hi)) => DemandSpec::Range(num(lo)?, num(hi)?),
            None => DemandSpec::Fixed(num(s)?),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub demand: DemandSpec,
    pub service_counts: Vec<usize>,
    pub trials: usize,
    pub environments: Vec<EnvironmentKind>,
    pub strategies: Vec<Strategy>,
    pub context: ContextModel,
    pub price_per_unit: f64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Records per provider history.
    pub history_len: usize,
    /// Fixed amount used by the capped variant of the expectation comparison.
    pub capped_amount: f64,
    pub workload: WorkloadParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            demand: DemandSpec::Fixed(1000.0),
            service_counts: vec![10, 20, 40, 80],
            trials: 200,
            environments: EnvironmentKind::ALL.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            context: ContextModel::default(),
            price_per_unit: 0.1,
            seed: 42,
            output_path: None,
            history_len: 50,
            capped_amount: 50.0,
            workload: WorkloadParams::default(),
        }
    }
}

/// Flat configuration file. Every key is optional and overrides the default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "demand_mAh")]
    pub demand_mah: Option<DemandSpec>,
    pub service_counts: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub environments: Option<Vec<String>>,
    pub strategies: Option<Vec<String>>,
    pub price_per_unit: Option<f64>,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub history_len: Option<usize>,
    pub weights: Option<[f64; 5]>,
    pub trust_threshold: Option<f64>,
    pub expectation: Option<String>,
    pub min_history: Option<usize>,
    pub min_records_duration: Option<usize>,
    pub admit_low_trust: Option<bool>,
    pub history_location: Option<String>,
    pub history_time: Option<[i64; 2]>,
    pub history_min_energy: Option<f64>,
    pub in_cell_boost: Option<f64>,
    pub capped_amount: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn parse_list<T: FromStr<Err = Error>>(items: &[impl AsRef<str>]) -> Result<Vec<T>> {
    items.iter().map(|s| s.as_ref().trim().parse()).collect()
}

impl ExperimentConfig {
    /// Applies every key present in `file`.
    pub fn apply(&mut self, file: ConfigFile) -> Result<()> {
        if let Some(d) = file.demand_mah {
            self.demand = d;
        }
        if let Some(v) = file.service_counts {
            self.service_counts = v;
        }
        if let Some(v) = file.trials {
            self.trials = v;
        }
        if let Some(v) = file.environments {
            self.environments = parse_list(&v)?;
        }
        if let Some(v) = file.strategies {
            self.strategies = parse_list(&v)?;
        }
        if let Some(v) = file.price_per_unit {
            self.price_per_unit = v;
        }
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = file.output_path {
            self.output_path = Some(v);
        }
        if let Some(v) = file.history_len {
            self.history_len = v;
        }
        if let Some(w) = file.weights {
            self.context.weights = TrustWeights::try_from(w)?;
        }
        if let Some(v) = file.trust_threshold {
            self.context.trust_threshold = v;
        }
        if let Some(v) = file.expectation {
            self.context.expectation = v.parse()?;
        }
        if let Some(v) = file.min_history {
            self.context.min_history = v;
        }
        if let Some(v) = file.min_records_duration {
            self.context.min_records_duration = v;
        }
        if let Some(v) = file.admit_low_trust {
            self.context.admit_low_trust = v;
        }
        if let Some(v) = file.history_location {
            self.context.history.location = Some(v.into());
        }
        if let Some([start, end]) = file.history_time {
            self.context.history.time = Some(crate::model::TimeInterval::new(start, end)?);
        }
        if let Some(v) = file.history_min_energy {
            self.context.history.min_energy = Some(v);
        }
        if let Some(v) = file.in_cell_boost {
            self.workload.in_cell_boost = v;
        }
        if let Some(v) = file.capped_amount {
            self.capped_amount = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.service_counts.is_empty() || self.service_counts.contains(&0) {
            return Err(Error::Config(
                "service_counts must be a non-empty list of positive counts".into(),
            ));
        }
        if self.environments.is_empty() {
            return Err(Error::Config("environments must not be empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies must not be empty".into()));
        }
        if !(self.price_per_unit.is_finite() && self.price_per_unit >= 0.0) {
            return Err(Error::Config(format!(
                "price_per_unit {} must be nonnegative",
                self.price_per_unit
            )));
        }
        if self.history_len == 0 {
            return Err(Error::Config("history_len must be at least 1".into()));
        }
        ExpectationMode::capped(self.capped_amount)?;
        self.context.validate()?;
        self.workload.validate()
    }

    fn max_count(&self) -> usize {
        self.service_counts.iter().copied().max().unwrap_or(0)
    }
}

/// SplitMix64 finalizer; turns structured seeds into well-spread ones.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn environment_salt(env: EnvironmentKind) -> u64 {
    match env {
        EnvironmentKind::Trustworthy => 1,
        EnvironmentKind::Neutral => 2,
        EnvironmentKind::Untrustworthy => 3,
    }
}

/// The scenario, demand and delivery seed of one trial.
pub struct Trial {
    pub scenario: Scenario,
    pub demand: EnergyDemand,
    pub delivery_seed: u64,
}

pub fn prepare_trial(config: &ExperimentConfig, env: EnvironmentKind, trial: usize, providers: usize) -> Result<Trial> {
    let trial_seed = mix(config.seed, trial as u64);
    let scenario_seed = mix(trial_seed, environment_salt(env));
    let scenario = generate_scenario(
        EnvironmentProfile::new(env, scenario_seed),
        providers,
        config.history_len,
        &config.workload,
    )?;
    // demand depends on the trial only, not on the environment
    let mut rng = ChaCha8Rng::seed_from_u64(mix(trial_seed, 0xd3));
    let demand = EnergyDemand::new(
        config.demand.draw(&mut rng),
        config.workload.window,
        config.workload.target_cell.clone(),
    )?;
    Ok(Trial {
        scenario,
        demand,
        delivery_seed: mix(scenario_seed, 0xde),
    })
}

/// One way of composing: a context model and an allocation strategy.
#[derive(Debug, Clone)]
pub struct Variant {
    pub label: String,
    pub context: ContextModel,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    expected_qoe: f64,
    realized_qoe: f64,
    cost: f64,
    time_us: f64,
    pool_trust: f64,
    selected_trust: f64,
}

fn run_variant(
    providers: &[ProviderProfile],
    trial: &Trial,
    variant: &Variant,
    price_per_unit: f64,
) -> Result<Outcome> {
    let started = Instant::now();
    let result = compose(providers, &trial.demand, &variant.context, variant.strategy)?;
    let time_us = started.elapsed().as_secs_f64() * 1e6;
    let result = result.priced(price_per_unit);
    let delivered = simulate_delivery(&result, &trial.scenario.behaviors, trial.delivery_seed)?;

    let pool = score_candidates(providers, &trial.demand, &variant.context)?;
    let pool_trust = mean(pool.trusted.iter().chain(&pool.low_trust).map(|s| s.trust));
    let selected_trust = mean(result.selected.iter().map(|s| s.trust));
    Ok(Outcome {
        expected_qoe: result.expected_qoe,
        realized_qoe: qoe(&delivered, &trial.demand),
        cost: result.cost,
        time_us,
        pool_trust,
        selected_trust,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(sum, n), v| (sum + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Averages over the trials of one (environment, variant, service count) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub environment: EnvironmentKind,
    pub label: String,
    pub strategy: Strategy,
    pub service_count: usize,
    pub trials: usize,
    pub mean_expected_qoe: f64,
    pub mean_realized_qoe: f64,
    pub qoe_stddev: f64,
    pub mean_cost: f64,
    pub mean_time_us: f64,
    /// Mean trust of the scored candidates (diagnostic, not written out).
    pub mean_pool_trust: f64,
    /// Mean trust of the selected services (diagnostic, not written out).
    pub mean_selected_trust: f64,
}

/// Runs every variant on every (environment, service count) cell.
pub fn sweep(config: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<SweepRow>> {
    config.validate()?;
    for v in variants {
        v.context.validate()?;
    }
    let max = config.max_count();
    let cells = config.service_counts.len() * variants.len();
    let mut rows = Vec::new();
    for &env in &config.environments {
        let per_trial: Vec<Vec<Outcome>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let trial = prepare_trial(config, env, t, max)?;
                let mut out = Vec::with_capacity(cells);
                for &n in &config.service_counts {
                    let providers = &trial.scenario.providers[..n];
                    for v in variants {
                        out.push(run_variant(providers, &trial, v, config.price_per_unit)?);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        for (ci, &n) in config.service_counts.iter().enumerate() {
            for (vi, v) in variants.iter().enumerate() {
                let idx = ci * variants.len() + vi;
                let pick = |f: fn(&Outcome) -> f64| -> Vec<f64> { per_trial.iter().map(|o| f(&o[idx])).collect() };
                let (mean_expected_qoe, _) = mean_std(&pick(|o| o.expected_qoe));
                let (mean_realized_qoe, qoe_stddev) = mean_std(&pick(|o| o.realized_qoe));
                rows.push(SweepRow {
                    environment: env,
                    label: v.label.clone(),
                    strategy: v.strategy,
                    service_count: n,
                    trials: config.trials,
                    mean_expected_qoe,
                    mean_realized_qoe,
                    qoe_stddev,
                    mean_cost: mean_std(&pick(|o| o.cost)).0,
                    mean_time_us: mean_std(&pick(|o| o.time_us)).0,
                    mean_pool_trust: mean_std(&pick(|o| o.pool_trust)).0,
                    mean_selected_trust: mean_std(&pick(|o| o.selected_trust)).0,
                });
            }
        }
    }
    Ok(rows)
}

/// Header of the results table.
pub const RESULTS_HEADER: [&str; 9] = [
    "environment",
    "strategy",
    "service_count",
    "trials",
    "mean_expected_qoe",
    "mean_realized_qoe",
    "qoe_stddev",
    "mean_cost",
    "mean_time_us",
];

/// Every strategy against every environment and service count, under the
/// configured context model.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let variants: Vec<Variant> = config
        .strategies
        .iter()
        .map(|&strategy| Variant {
            label: strategy.to_string(),
            context: config.context.clone(),
            strategy,
        })
        .collect();
    sweep(config, &variants)
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_results<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.environment.to_string(),
            r.strategy.to_string(),
            r.service_count.to_string(),
            r.trials.to_string(),
            f6(r.mean_expected_qoe),
            f6(r.mean_realized_qoe),
            f6(r.qoe_stddev),
            f6(r.mean_cost),
            format!("{:.3}", r.mean_time_us),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes rows of a variant comparison; `variant_column` names the column
/// holding each variant's label.
pub fn write_comparison<W: Write>(writer: W, variant_column: &str, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["environment", variant_column];
    header.extend_from_slice(&RESULTS_HEADER[1..]);
    w.write_record(&header)?;
    for r in rows {
        w.write_record([
            r.environment.to_string(),
            r.label.clone(),
            r.strategy.to_string(),
            r.service_count.to_string(),
            r.trials.to_string(),
            f6(r.mean_expected_qoe),
            f6(r.mean_realized_qoe),
            f6(r.qoe_stddev),
            f6(r.mean_cost),
            format!("{:.3}", r.mean_time_us),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `body` to `path`, creating or truncating it.
pub fn write_to_path(path: &Path, body: impl FnOnce(File) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    body(file).map_err(|e| match e {
        Error::CsvData(source) => Error::Csv {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

/// Which part of a provider's history the trust assessment may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryFilter {
    Full,
    Time,
    SpatioTemporal,
}

impl HistoryFilter {
    pub const ALL: [HistoryFilter; 3] = [HistoryFilter::Full, HistoryFilter::Time, HistoryFilter::SpatioTemporal];

    pub fn as_str(&self) -> &'static str {
        match self {
            HistoryFilter::Full => "full",
            HistoryFilter::Time => "time",
            HistoryFilter::SpatioTemporal => "spatio_temporal",
        }
    }

    pub fn constraints(&self, workload: &WorkloadParams) -> HistoryConstraints {
        match self {
            HistoryFilter::Full => HistoryConstraints::none(),
            HistoryFilter::Time => HistoryConstraints {
                time: Some(workload.window),
                ..Default::default()
            },
            HistoryFilter::SpatioTemporal => HistoryConstraints {
                location: Some(workload.target_cell.clone()),
                time: Some(workload.window),
                ..Default::default()
            },
        }
    }
}

/// Knapsack composition under full, time-filtered and spatio-temporally
/// filtered histories. The configured history constraints are replaced; the
/// rest of the context model is kept.
pub fn compare_history_constraints(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let variants: Vec<Variant> = HistoryFilter::ALL
        .iter()
        .map(|filter| Variant {
            label: filter.as_str().to_owned(),
            context: ContextModel {
                history: filter.constraints(&config.workload),
                ..config.context.clone()
            },
            strategy: Strategy::Knapsack,
        })
        .collect();
    sweep(config, &variants)
}

/// Knapsack composition under the advertised, capped and customized (median)
/// expectation modes.
pub fn compare_expectation_modes(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let modes = [
        ExpectationMode::Advertised,
        ExpectationMode::capped(config.capped_amount)?,
        ExpectationMode::Customized(Statistic::Median),
    ];
    let variants: Vec<Variant> = modes
        .iter()
        .map(|&mode| Variant {
            label: mode.to_string(),
            context: ContextModel {
                expectation: mode,
                ..config.context.clone()
            },
            strategy: Strategy::Knapsack,
        })
        .collect();
    sweep(config, &variants)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub strategy: Strategy,
    pub service_count: usize,
    pub trials: usize,
    pub mean_time_us: f64,
    pub stddev_time_us: f64,
}

/// Composition wall-clock per strategy and service count, measured one
/// composition at a time on the first configured environment.
pub fn measure_timing(config: &ExperimentConfig) -> Result<Vec<TimingRow>> {
    config.validate()?;
    let env = config.environments[0];
    let mut rows = Vec::new();
    for &n in &config.service_counts {
        let mut samples = vec![Vec::with_capacity(config.trials); config.strategies.len()];
        for t in 0..config.trials {
            let trial = prepare_trial(config, env, t, n)?;
            for (si, &strategy) in config.strategies.iter().enumerate() {
                let started = Instant::now();
                let result = compose(&trial.scenario.providers, &trial.demand, &config.context, strategy)?;
                samples[si].push(started.elapsed().as_secs_f64() * 1e6);
                std::hint::black_box(result);
            }
        }
        for (si, &strategy) in config.strategies.iter().enumerate() {
            let (mean_time_us, stddev_time_us) = mean_std(&samples[si]);
            rows.push(TimingRow {
                strategy,
                service_count: n,
                trials: config.trials,
                mean_time_us,
                stddev_time_us,
            });
        }
    }
    Ok(rows)
}

pub fn write_timing<W: Write>(writer: W, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["strategy", "service_count", "trials", "mean_time_us", "stddev_time_us"])?;
    for r in rows {
        w.write_record([
            r.strategy.to_string(),
            r.service_count.to_string(),
            r.trials.to_string(),
            format!("{:.3}", r.mean_time_us),
            format!("{:.3}", r.stddev_time_us),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
