//! Sweep CSV assembly and trace rendering.

use expcli::{emit_trace, run_consistency_sweep, run_failure_sweep, Sweep};
use openstate::pipeline::{FlowId, NodeId};
use openstate::scenario::{Mode, Scenario};
use openstate::simnet::{MetricsLog, PacketKind};
use openstate::time::{Dur, Time};

fn scenario_path(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn fwc_sweep() -> Sweep {
    let scenario = Scenario::load(scenario_path("fwc_three_servers.toml"))
        .unwrap()
        .with_flow_count(50);
    Sweep {
        scenario,
        rates: vec![100, 500],
        rtts_ms: vec![0, 12],
        modes: vec![Mode::Os, Mode::Of],
        reps: 1,
        seed: 1,
    }
}

fn norway_sweep() -> Sweep {
    let scenario = Scenario::load(scenario_path("norway_failure.toml"))
        .unwrap()
        .persistent_failures()
        .with_traffic_stop(Time(2_000_000))
        .with_until(Time(2_600_000));
    Sweep {
        scenario,
        rates: vec![40, 80],
        rtts_ms: vec![0, 12],
        modes: vec![Mode::Os, Mode::Of],
        reps: 1,
        seed: 1,
    }
}

#[test]
fn consistency_sweep_models_the_latency_floor() {
    let csv = run_consistency_sweep(&fwc_sweep()).unwrap();
    let mut cells = 0;
    for line in csv.lines().skip(1) {
        if line.starts_with('#') {
            continue;
        }
        cells += 1;
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6, "bad row: {line}");
        let (mode, rtt_us, mean) = (cols[1], cols[2], cols[3]);
        match mode {
            // No queuing model: pipeline cost only, independent of rate.
            "os" => assert_eq!(mean, "0", "row: {line}"),
            "of" => {
                let expect = rtt_us.parse::<u64>().unwrap() + 1000;
                assert_eq!(mean, expect.to_string(), "row: {line}");
            }
            other => panic!("unknown mode {other}"),
        }
        assert_eq!(cols[5], "0", "losses in a healthy run: {line}");
    }
    assert_eq!(cells, 2 * 2 * 2, "every sweep cell exactly once");
    assert!(csv.ends_with("latency model only\n"));
}

#[test]
fn sweep_csv_is_byte_stable() {
    let a = run_failure_sweep(&norway_sweep()).unwrap();
    let b = run_failure_sweep(&norway_sweep()).unwrap();
    assert_eq!(a, b);
    let c = run_consistency_sweep(&fwc_sweep()).unwrap();
    let d = run_consistency_sweep(&fwc_sweep()).unwrap();
    assert_eq!(c, d);
}

#[test]
fn failure_sweep_rows_carry_recovery_and_loss_columns() {
    let csv = run_failure_sweep(&norway_sweep()).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for line in &rows {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7, "bad row: {line}");
        let (mode, rtt_us, total, per_demand, recovery) =
            (cols[1], cols[2], cols[3], cols[4], cols[5]);
        let per: Vec<u64> = per_demand
            .split(';')
            .map(|x| x.parse().expect("per-demand loss"))
            .collect();
        assert_eq!(per.len(), 9, "nine demands: {line}");
        assert_eq!(per.iter().sum::<u64>().to_string(), total, "breakdown sums: {line}");
        match mode {
            "os" => assert_eq!(recovery, "0"),
            "of" => {
                let expect = rtt_us.parse::<u64>().unwrap() + 1000;
                assert_eq!(recovery, expect.to_string(), "row: {line}");
            }
            other => panic!("unknown mode {other}"),
        }
    }
}

#[test]
fn zero_traffic_window_means_zero_losses() {
    let mut sweep = norway_sweep();
    sweep.scenario = sweep.scenario.with_traffic_stop(Time(200_000)); // == start
    sweep.rates = vec![40];
    sweep.rtts_ms = vec![12];
    let csv = run_failure_sweep(&sweep).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], "0", "no packets, no losses: {line}");
    }
}

#[test]
fn repetitions_aggregate_over_consecutive_seeds() {
    let mut sweep = fwc_sweep();
    sweep.rates = vec![500];
    sweep.rtts_ms = vec![12];
    sweep.modes = vec![Mode::Of];
    sweep.reps = 3;
    let csv = run_consistency_sweep(&sweep).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1, "reps fold into the cell");
    // The latency model does not depend on the seed, so the mean over
    // three seeds is still the exact floor.
    assert_eq!(rows[0], "500,of,12000,13000,13000,0");
    assert_eq!(csv, run_consistency_sweep(&sweep).unwrap());
}

#[test]
fn duplicate_cells_are_rejected() {
    let mut sweep = fwc_sweep();
    sweep.rates = vec![100, 100];
    assert!(run_consistency_sweep(&sweep).is_err());
}

#[test]
fn wrong_experiment_kind_is_rejected() {
    let sweep = fwc_sweep();
    assert!(run_failure_sweep(&sweep).is_err());
    let sweep = norway_sweep();
    assert!(run_consistency_sweep(&sweep).is_err());
}

fn full_norway_log() -> MetricsLog {
    Scenario::load(scenario_path("norway_failure.toml"))
        .unwrap()
        .run()
        .unwrap()
}

#[test]
fn healthy_path_trace_follows_the_primary() {
    let log = full_norway_log();
    let first = log
        .packets
        .iter()
        .find(|p| p.flow_id == FlowId(1_000_000) && p.created_at == Time(200_000))
        .unwrap();
    let visits: Vec<u32> = first.hops.iter().map(|h| h.node.0).collect();
    assert_eq!(visits, vec![22, 24, 25, 26, 11, 12, 10, 110]);
    let text = expcli::render_packet(&log, first.uid);
    assert!(text.contains("delivered host110 tag=-"), "{text}");
}

#[test]
fn probe_trace_shows_duplication_and_p_tag_return() {
    let log = full_norway_log();
    // The restoring probe: created at the reroute node after the repair,
    // returns there, pops, and continues to the destination.
    let probe = log
        .packets
        .iter()
        .filter(|p| {
            p.kind == PacketKind::Probe
                && p.flow_id == FlowId(1_000_000)
                && p.created_at > Time(4_500_461)
        })
        .min_by_key(|p| p.created_at)
        .expect("restore probe exists");
    assert_eq!(probe.hops[0].node, NodeId(24), "duplicated at the reroute node");
    let returns = probe.hops.iter().skip(1).filter(|h| h.node == NodeId(24)).count();
    assert_eq!(returns, 1, "probe returns to the reroute node once");
    let text = expcli::render_packet(&log, probe.uid);
    assert!(text.contains("tag=23"), "probe carries the P tag: {text}");
    assert!(text.contains("set:22->0"), "return restores default state: {text}");
    assert!(text.contains("delivered"), "restored probe continues as data: {text}");
}

#[test]
fn emit_trace_unknown_flow_errors() {
    let log = full_norway_log();
    assert!(emit_trace(&log, FlowId(424242)).is_err());
}

#[test]
fn summary_row_reports_run_level_metrics() {
    let log = full_norway_log();
    let row = log.summary_csv_row(100, Dur::from_ms(12));
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(
        cols.len(),
        MetricsLog::SUMMARY_CSV_HEADER.split(',').count()
    );
    assert_eq!(cols[0], "norway-link-11-26");
    assert_eq!(cols[2], "100");
    assert_eq!(cols[8], "0", "no reactive recovery in this mode");
    assert!(!cols[9].is_empty(), "restoration time recorded");
}
