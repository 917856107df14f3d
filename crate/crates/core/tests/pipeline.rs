mod common;

use std::path::Path;

use regsim_core::scenario::{run_scenario, simulate, Scenario, StageMode};
use regsim_core::signal::{synthetic_building, synthetic_pv, synthetic_regd};
use regsim_core::{Algorithm, Error, SignalTrace};

fn bundled(name: &str) -> Scenario {
    Scenario::load(&common::scenarios_dir().join(format!("{name}.scenario"))).unwrap()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn bundled_traces_match_their_generators() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, trace) in [
        ("regd", synthetic_regd(2019)),
        ("pv", synthetic_pv(2020)),
        ("building", synthetic_building(2021)),
    ] {
        let fresh = tmp.path().join(format!("{name}.csv"));
        trace.write_csv(&fresh).unwrap();
        let shipped = common::scenarios_dir().join(format!("traces/{name}.csv"));
        assert_eq!(
            std::fs::read(&fresh).unwrap(),
            std::fs::read(&shipped).unwrap(),
            "{name}"
        );
        assert_eq!(SignalTrace::read_csv(&shipped).unwrap(), trace);
    }
}

#[test]
fn references_span_forty_minutes_at_one_hertz() {
    for name in ["test0", "test1", "test2"] {
        let r = bundled(name).reference().unwrap();
        assert_eq!(r.len(), 2401, "{name}");
        assert_eq!(r.period(), 1.0);
    }
}

#[test]
fn every_written_trace_covers_the_horizon() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_scenario(&bundled("test0"), tmp.path()).unwrap();
    let mut stack = vec![tmp.path().to_path_buf()];
    let mut traces = 0;
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                if !path.ends_with("residuals") {
                    stack.push(path);
                }
            } else if path.extension().is_some_and(|e| e == "csv") && !path.ends_with("events.csv")
            {
                let first = std::fs::read_to_string(&path).unwrap();
                if first.starts_with("t_s,") {
                    assert_eq!(data_rows(&path), 2401, "{}", path.display());
                    traces += 1;
                }
            }
        }
    }
    assert!(traces >= 2 * run.device_ids.len() + 2);
    for file in [
        "tracking.csv",
        "score.csv",
        "cyber_mse.csv",
        "events.csv",
        "report.txt",
    ] {
        assert!(tmp.path().join(file).is_file(), "{file}");
    }
}

#[test]
fn ratio_consensus_runs_are_exact_in_cyber_layer() {
    let mut sc = bundled("test0");
    sc.solver_plan = regsim_core::scenario::parse_solver_plan("rc").unwrap();
    let run = simulate(&sc).unwrap();
    let rows = &run.cyber[&Algorithm::Rc];
    assert!(!rows.is_empty());
    for (label, v) in rows {
        if let Some(v) = v {
            assert!(*v <= 1e-12, "{label}: {v:e}");
        }
    }
}

#[test]
fn two_stage_improves_on_single_stage_for_the_field_fleet() {
    let sc = bundled("test2");
    let two = simulate(&sc).unwrap();
    let single = simulate(&Scenario {
        stage: StageMode::Single,
        ..sc
    })
    .unwrap();
    assert!(two.total_rmse < single.total_rmse);
}

#[test]
fn seeds_change_device_noise_only() {
    let a = simulate(&bundled("test0")).unwrap();
    let mut sc = bundled("test0");
    sc.seed += 1;
    let b = simulate(&sc).unwrap();
    assert_eq!(a.target, b.target);
    assert_eq!(a.commanded, b.commanded);
    assert_ne!(a.measured, b.measured);
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = common::scenarios_dir();
    let text = std::fs::read_to_string(dir.join("test0.scenario")).unwrap();
    let bad = text.replace("budget = 500", "budget = 0");
    let line = bad.lines().position(|l| l.starts_with("budget")).unwrap() + 1;
    match Scenario::parse(&bad, &dir.join("bad.scenario")) {
        Err(Error::Config { line: got, .. }) => assert_eq!(got, line),
        other => panic!("expected a config error, got {other:?}"),
    }
    let bad = text.replace("beta = 0.75", "beta = 1.5");
    assert!(matches!(
        Scenario::parse(&bad, &dir.join("bad.scenario")),
        Err(Error::Config { line: 4, .. })
    ));
}
