use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use energy_trust::composition::{compose, Strategy};
use energy_trust::demand::{aggregate_demand, qoe, HistoricalMean};
use energy_trust::harness::{
    compare_expectation_modes, compare_history_constraints, measure_timing, parse_list, run_experiment,
    write_comparison, write_results, write_timing, write_to_path, ConfigFile, DemandSpec, ExperimentConfig,
};
use energy_trust::io::{read_scenario, write_scenario};
use energy_trust::model::TimeInterval;
use energy_trust::workload::{generate_scenario, simulate_delivery, EnvironmentKind, EnvironmentProfile};

/// Trust-aware composition of crowdsourced energy services.
#[derive(Parser)]
#[command(name = "energy-trust", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Demand in mAh, fixed (`1000`) or a uniform range (`500-2500`).
    #[arg(long, global = true)]
    demand: Option<DemandSpec>,
    /// Comma-separated strategy names.
    #[arg(long, global = true, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Comma-separated environment names.
    #[arg(long, global = true, value_delimiter = ',')]
    environments: Option<Vec<String>>,
    /// Output CSV; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Every strategy in every environment (the default).
    Run,
    /// Knapsack under full, time and spatio-temporal history filters.
    History {
        /// In-cell reliability boost of the generated providers.
        #[arg(long, default_value_t = 0.3)]
        boost: f64,
        /// Trust threshold of the super-provider.
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
    },
    /// Knapsack under the advertised, capped and customized expectations.
    Expectations,
    /// Composition time per strategy and candidate count.
    Timing {
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        counts: Vec<usize>,
    },
    /// Writes a generated scenario as CSV files.
    Generate {
        #[arg(long, default_value = "neutral")]
        env: EnvironmentKind,
        #[arg(long, default_value_t = 20)]
        providers: usize,
        #[arg(long, default_value_t = 50)]
        history_len: usize,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Composes services for a scenario directory and reports the selection.
    Compose {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "trust_heuristic")]
        strategy: Strategy,
        /// Demand slot as `start-end` in minutes; the workload window by default.
        #[arg(long)]
        slot: Option<String>,
    },
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.common)?;
    match cli.command.unwrap_or(Command::Run) {
        Command::Run => {
            config.validate()?;
            let rows = run_experiment(&config)?;
            emit(config.output_path.as_deref(), |w| write_results(w, &rows))
        }
        Command::History { boost, threshold } => {
            config.workload.in_cell_boost = boost;
            config.context.trust_threshold = threshold;
            config.validate()?;
            let rows = compare_history_constraints(&config)?;
            emit(config.output_path.as_deref(), |w| write_comparison(w, "history", &rows))
        }
        Command::Expectations => {
            config.validate()?;
            let rows = compare_expectation_modes(&config)?;
            emit(config.output_path.as_deref(), |w| {
                write_comparison(w, "expectation", &rows)
            })
        }
        Command::Timing { counts } => {
            config.service_counts = counts;
            let rows = measure_timing(&config)?;
            emit(config.output_path.as_deref(), |w| write_timing(w, &rows))
        }
        Command::Generate {
            env,
            providers,
            history_len,
            dir,
        } => {
            config.validate()?;
            let scenario = generate_scenario(
                EnvironmentProfile::new(env, config.seed),
                providers,
                history_len,
                &config.workload,
            )?;
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_scenario(&dir, &scenario)?;
            eprintln!("wrote {providers} providers to {}", dir.display());
            Ok(())
        }
        Command::Compose { dir, strategy, slot } => compose_scenario(&config, &dir, strategy, slot.as_deref()),
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &common.config {
        config.apply(ConfigFile::load(path)?)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(demand) = common.demand {
        config.demand = demand;
    }
    if let Some(names) = &common.strategies {
        config.strategies = parse_list(names)?;
    }
    if let Some(names) = &common.environments {
        config.environments = parse_list(names)?;
    }
    if let Some(out) = &common.out {
        config.output_path = Some(out.clone());
    }
    Ok(config)
}

fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> energy_trust::Result<()>) -> Result<()> {
    match path {
        Some(path) => write_to_path(path, |mut file| body(&mut file))?,
        None => body(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn parse_slot(text: &str) -> Result<TimeInterval> {
    let Some((start, end)) = text.split_once('-') else {
        bail!("slot `{text}` is not of the form start-end");
    };
    let start = start
        .trim()
        .parse()
        .with_context(|| format!("slot start in `{text}`"))?;
    let end = end.trim().parse().with_context(|| format!("slot end in `{text}`"))?;
    Ok(TimeInterval::new(start, end)?)
}

fn compose_scenario(config: &ExperimentConfig, dir: &Path, strategy: Strategy, slot: Option<&str>) -> Result<()> {
    let scenario = read_scenario(dir)?;
    let slot = match slot {
        Some(text) => parse_slot(text)?,
        None => config.workload.window,
    };
    let cell = &config.workload.target_cell;
    let demand = aggregate_demand(&scenario.requests, slot, cell, &HistoricalMean)
        .with_context(|| format!("aggregating demand from {}", dir.display()))?;
    let result = compose(&scenario.providers, &demand, &config.context, strategy)?.priced(config.price_per_unit);
    let delivered = simulate_delivery(&result, &scenario.behaviors, config.seed)?;

    let mut out = io::stdout().lock();
    writeln!(out, "demand {:.1} mAh in {cell} during {slot}", demand.amount())?;
    writeln!(
        out,
        "{:<16} {:<12} {:>9} {:>7} {:>10}",
        "service", "provider", "amount", "trust", "delivered"
    )?;
    for (scored, (_, got)) in result.selected.iter().zip(&delivered) {
        writeln!(
            out,
            "{:<16} {:<12} {:>9.1} {:>7.3} {:>10.1}",
            scored.service.service_id().as_str(),
            scored.service.provider_id().as_str(),
            scored.amount(),
            scored.trust,
            got
        )?;
    }
    writeln!(
        out,
        "{strategy}: {} services, {:.1} mAh, expected QoE {:.3}, realized QoE {:.3}, cost {:.2}",
        result.selected.len(),
        result.raw_energy(),
        result.expected_qoe,
        qoe(&delivered, &demand),
        result.cost
    )?;
    Ok(())
}
