use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Parser;

use expcli::{emit_trace, run_consistency_sweep, run_failure_sweep, run_first_cell, Sweep};
use openstate::pipeline::FlowId;
use openstate::scenario::{ExperimentKind, Mode, Scenario};

/// Scenario sweep runner: loads a scenario file, sweeps rates, modes and
/// controller RTTs, and writes one CSV row per sweep cell.
#[derive(Parser, Debug)]
#[command(name = "expcli", version, about)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,

    /// Mode to run: os, of, or both.
    #[arg(long, default_value = "both")]
    mode: String,

    /// Controller RTTs in milliseconds, comma separated.
    #[arg(long = "rtt-ms", value_delimiter = ',')]
    rtt_ms: Option<Vec<u32>>,

    /// Rate sweep as start:stop:step (inclusive).
    #[arg(long)]
    rates: Option<String>,

    /// Base seed; repetition k runs with seed+k.
    #[arg(long)]
    seed: Option<u64>,

    /// Repetitions per cell.
    #[arg(long, default_value_t = 1)]
    reps: u32,

    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Print a hop-by-hop trace of this flow id from a single run of the
    /// first sweep cell, instead of the CSV table.
    #[arg(long)]
    trace: Option<u64>,
}

fn parse_rates(arg: &str) -> anyhow::Result<Vec<u32>> {
    let parts: Vec<&str> = arg.split(':').collect();
    if parts.len() != 3 {
        bail!("--rates expects start:stop:step, got {arg:?}");
    }
    let start: u32 = parts[0].parse().context("bad rates start")?;
    let stop: u32 = parts[1].parse().context("bad rates stop")?;
    let step: u32 = parts[2].parse().context("bad rates step")?;
    if step == 0 || start == 0 || stop < start {
        bail!("--rates needs 0 < start <= stop and step > 0");
    }
    Ok((start..=stop).step_by(step as usize).collect())
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("loading {}", args.scenario.display()))?;

    let modes = match args.mode.as_str() {
        "both" => vec![Mode::Os, Mode::Of],
        other => vec![other.parse::<Mode>().map_err(anyhow::Error::msg)?],
    };
    let rates = match &args.rates {
        Some(arg) => parse_rates(arg)?,
        None => vec![scenario
            .traffic
            .first()
            .map(|g| g.rate())
            .context("scenario has no traffic")?],
    };
    let rtts_ms = args
        .rtt_ms
        .unwrap_or_else(|| vec![(scenario.controller.rtt().as_us() / 1000) as u32]);
    let seed = args.seed.unwrap_or(scenario.seed);
    let experiment = scenario.experiment;

    let sweep = Sweep {
        scenario,
        rates,
        rtts_ms,
        modes,
        reps: args.reps,
        seed,
    };

    if let Some(flow) = args.trace {
        let log = run_first_cell(&sweep)?;
        print!("{}", emit_trace(&log, FlowId(flow))?);
        return Ok(());
    }

    let csv = match experiment {
        ExperimentKind::Consistency => run_consistency_sweep(&sweep)?,
        ExperimentKind::Failure => run_failure_sweep(&sweep)?,
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
