//! Parameter sweeps over scenarios, emitting byte-stable CSV tables.
//!
//! A sweep cell is (rate, mode, rtt); repetitions rerun the cell with
//! consecutive seeds and aggregate. Every cell appears exactly once in
//! the output, ordered by (rate, mode, rtt).

pub mod trace;

use std::collections::BTreeSet;

use openstate::scenario::{ExperimentKind, Mode, Scenario};
use openstate::simnet::{MetricsLog, PacketKind};
use openstate::time::{Dur, Time};
use openstate::{ConfigError, SimError};

pub use trace::{emit_trace, render_packet};

#[derive(Clone, Debug)]
pub struct Sweep {
    pub scenario: Scenario,
    pub rates: Vec<u32>,
    pub rtts_ms: Vec<u32>,
    pub modes: Vec<Mode>,
    pub reps: u32,
    pub seed: u64,
}

impl Sweep {
    fn validate(&self) -> Result<(), SimError> {
        if self.reps < 1 {
            return Err(ConfigError::new("repetitions must be at least 1").into());
        }
        if self.rates.is_empty() || self.rtts_ms.is_empty() || self.modes.is_empty() {
            return Err(ConfigError::new("sweep axes must be non-empty").into());
        }
        if self.rates.contains(&0) {
            return Err(ConfigError::new("rates must be positive").into());
        }
        let cells = self.rates.len() * self.rtts_ms.len() * self.modes.len();
        let distinct: BTreeSet<_> = self
            .rates
            .iter()
            .flat_map(|&r| {
                self.modes.iter().flat_map(move |&m| {
                    self.rtts_ms.iter().map(move |&t| (r, m as u8, t))
                })
            })
            .collect();
        if distinct.len() != cells {
            return Err(ConfigError::new("duplicate sweep cells").into());
        }
        Ok(())
    }

    fn cell_scenario(&self, rate: u32, mode: Mode, rtt_ms: u32, rep: u32) -> Scenario {
        self.scenario
            .clone()
            .with_rate(rate)
            .with_mode(mode)
            .with_rtt(Dur::from_ms(rtt_ms as u64))
            .with_seed(self.seed + rep as u64)
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x:.3}")
    }
}

/// Runs every cell on its own thread (runs share nothing) and joins the
/// row strings back in (rate, mode, rtt) order, so the CSV bytes do not
/// depend on scheduling.
fn run_cells(
    sweep: &Sweep,
    cell: impl Fn(u32, Mode, u32) -> Result<String, SimError> + Sync,
) -> Result<String, SimError> {
    let cells: Vec<(u32, Mode, u32)> = sweep
        .rates
        .iter()
        .flat_map(|&r| {
            sweep
                .modes
                .iter()
                .flat_map(move |&m| sweep.rtts_ms.iter().map(move |&t| (r, m, t)))
        })
        .collect();
    let cell = &cell;
    let rows: Vec<Result<String, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(r, m, t)| scope.spawn(move || cell(r, m, t)))
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(row) => row,
                Err(panic) => std::panic::resume_unwind(panic),
            })
            .collect()
    });
    let mut out = String::new();
    for row in rows {
        out.push_str(&row?);
        out.push('\n');
    }
    Ok(out)
}

/// Mean processing time, p95, and losses per cell on the load-balancer
/// scenario. Processing time is the first-packet arrival-to-departure
/// interval at the balancing switch, controller round trip included.
pub fn run_consistency_sweep(sweep: &Sweep) -> Result<String, SimError> {
    sweep.validate()?;
    if sweep.scenario.experiment != ExperimentKind::Consistency {
        return Err(ConfigError::new("scenario is not a consistency experiment").into());
    }
    if sweep.scenario.consistency.is_none() {
        return Err(ConfigError::new("scenario declares no balancer intent").into());
    }
    let rows = run_cells(sweep, |rate, mode, rtt| {
        let mut times: Vec<u64> = Vec::new();
        let mut losses = 0usize;
        for rep in 0..sweep.reps {
            let sc = sweep.cell_scenario(rate, mode, rtt, rep);
            let log = sc.run()?;
            let flows: BTreeSet<_> = log
                .packets
                .iter()
                .filter(|p| p.kind == PacketKind::Data)
                .map(|p| p.flow_id)
                .collect();
            for f in flows {
                times.push(log.processing_time(f)?.as_us());
            }
            losses += log.count_losses(Time::ZERO, Time(u64::MAX));
        }
        times.sort_unstable();
        let mean = times.iter().sum::<u64>() as f64 / times.len().max(1) as f64;
        let p95 = percentile(&times, 95);
        Ok(format!(
            "{rate},{mode},{},{},{p95},{losses}",
            rtt as u64 * 1000,
            fmt_num(mean)
        ))
    })?;
    let mut csv = String::from("rate,mode,rtt_us,mean_processing_us,p95_processing_us,losses\n");
    csv.push_str(&rows);
    csv.push_str(
        "# note: of-mode interim packets of a pending flow are forwarded via controller \
         packet-out on the already-chosen port\n",
    );
    csv.push_str(
        "# note: loopback-emulation wall-clock processing times are environment artifacts; \
         rows reflect the configured latency model only\n",
    );
    Ok(csv)
}

/// Loss counts, per-demand breakdown, recovery delay, and restoration
/// instant per cell on the failure scenario.
pub fn run_failure_sweep(sweep: &Sweep) -> Result<String, SimError> {
    sweep.validate()?;
    if sweep.scenario.experiment != ExperimentKind::Failure {
        return Err(ConfigError::new("scenario is not a failure experiment").into());
    }
    if sweep.scenario.demands.is_empty() {
        return Err(ConfigError::new("failure scenario declares no protected demands").into());
    }
    if !sweep.scenario.failures.iter().any(|(_, _, up, _)| !up) {
        return Err(ConfigError::new("failure scenario schedules no link failure").into());
    }
    let rows = run_cells(sweep, |rate, mode, rtt| {
        let mut total = 0f64;
        let mut per_demand: Vec<f64> = Vec::new();
        let mut recovery: Vec<u64> = Vec::new();
        let mut restored: Vec<u64> = Vec::new();
        for rep in 0..sweep.reps {
            let sc = sweep.cell_scenario(rate, mode, rtt, rep);
            let log = sc.run()?;
            total += log.count_losses(Time::ZERO, Time(u64::MAX)) as f64;
            let by_flow = log.losses_by_flow();
            if per_demand.is_empty() {
                per_demand = vec![0.0; by_flow.len()];
            }
            for (i, (_, n)) in by_flow.iter().enumerate() {
                per_demand[i] += *n as f64;
            }
            recovery.extend(log.recovery_events.iter().map(|(s, i, _)| (*i - *s).as_us()));
            restored.extend(log.restorations.iter().map(|(t, _)| t.as_us()));
        }
        let reps = sweep.reps as f64;
        let per = per_demand
            .iter()
            .map(|&x| fmt_num(x / reps))
            .collect::<Vec<_>>()
            .join(";");
        // Recovery is instantaneous by construction when no controller is
        // on the data path.
        let rec = match mode {
            Mode::Os => "0".to_string(),
            Mode::Of => match recovery.first() {
                Some(&d) => d.to_string(),
                None => String::new(),
            },
        };
        let rest = restored
            .iter()
            .max()
            .map(|t| t.to_string())
            .unwrap_or_default();
        Ok(format!(
            "{rate},{mode},{},{},{per},{rec},{rest}",
            rtt as u64 * 1000,
            fmt_num(total / reps)
        ))
    })?;
    let mut csv = String::from(
        "rate,mode,rtt_us,total_losses,per_demand_losses,recovery_delay_us,restored_at_us\n",
    );
    csv.push_str(&rows);
    Ok(csv)
}

fn percentile(sorted: &[u64], pct: u32) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (sorted.len() * pct as usize).div_ceil(100);
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

/// Runs one cell of the sweep and returns its metrics log, for trace
/// inspection.
pub fn run_first_cell(sweep: &Sweep) -> Result<MetricsLog, SimError> {
    sweep.validate()?;
    let sc = sweep.cell_scenario(sweep.rates[0], sweep.modes[0], sweep.rtts_ms[0], 0);
    sc.run()
}
