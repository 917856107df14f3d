mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regsim_core::fleet::schedule::{schedule, EventKind, SchedulePlan, SolverPlan};
use regsim_core::fleet::Fleet;
use regsim_core::{Algorithm, CommGraph, CostFunction, SolverConfig};

const HEADER: &str = "id,node,type,rating_kw,update_period_s,offset_s,delay_s,settle_s,spike_rate,spike_min_kw,spike_max_kw,integer_kw\n";

/// Every device refreshes each second, so nothing is ever pinned.
fn continuous_fleet() -> Fleet {
    let mut csv = String::from(HEADER);
    for (i, (node, ty, rating)) in [
        (1, "V1G", 3.3),
        (1, "V1G", 6.6),
        (2, "V2G", 5.0),
        (2, "V2G", 5.0),
        (3, "BESS", 3.0),
        (4, "BESS", 10.0),
    ]
    .iter()
    .enumerate()
    {
        csv.push_str(&format!("d{i},C{node},{ty},{rating},1,0,0,0,0,0,0,false\n"));
    }
    Fleet::from_reader(csv.as_bytes(), 4).unwrap()
}

fn plan(graph: &CommGraph, algorithm: Algorithm, nodes: usize) -> SchedulePlan<'_> {
    SchedulePlan {
        graph,
        solver: SolverPlan::Single(algorithm),
        config: SolverConfig::default(),
        node_costs: (0..nodes)
            .map(|i| CostFunction::quadratic(0.2 + 0.1 * i as f64, 0.0).unwrap())
            .collect(),
        upscale_factor: 1.0,
        fast_types: Vec::new(),
        active: None,
        keep_residuals: Vec::new(),
    }
}

fn random_target(seed: u64, len: usize, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| rng.gen_range(-amplitude..amplitude))
        .collect()
}

fn assert_within_boxes(fleet: &Fleet, commanded: &[Vec<f64>]) {
    for (d, row) in fleet.devices().iter().zip(commanded) {
        let (lo, hi) = d.bounds();
        for &v in row {
            assert!(
                v >= lo - 1e-9 && v <= hi + 1e-9,
                "{}: {v} outside [{lo}, {hi}]",
                d.id
            );
        }
    }
}

#[test]
fn unpinned_setpoints_sum_to_the_reference() {
    let fleet = continuous_fleet();
    let graph = CommGraph::ring(4).unwrap();
    let capacity = fleet.total_capacity();
    let target = random_target(3, 200, 1.2 * capacity);
    for (algorithm, tol) in [(Algorithm::Rc, 1e-9), (Algorithm::Dana, 1e-6)] {
        let s = schedule(&fleet, &target, &plan(&graph, algorithm, 4)).unwrap();
        assert_within_boxes(&fleet, &s.commanded);
        for (k, r) in s.scheduled_ref.iter().enumerate() {
            let total: f64 = s.commanded.iter().map(|row| row[k]).sum();
            assert!(
                (total - r).abs() <= tol,
                "{algorithm} t={k}: {total} vs {r}"
            );
            if (target[k] - r).abs() > 1e-9 {
                assert!(s
                    .events
                    .iter()
                    .any(|e| e.t_s == k && e.kind == EventKind::Clamp));
            }
        }
    }
}

#[test]
fn out_of_range_references_are_clamped_and_logged() {
    let fleet = continuous_fleet();
    let graph = CommGraph::ring(4).unwrap();
    let capacity = fleet.total_capacity();
    let target = [0.0, 10.0, 0.5, -10.0, 0.0].map(|v| v * capacity);
    let s = schedule(&fleet, &target, &plan(&graph, Algorithm::Rc, 4)).unwrap();
    assert_eq!(s.clamped_instants, 2);
    assert!((s.scheduled_ref[1] - capacity / 2.0).abs() < 1e-9);
    assert!((s.scheduled_ref[3] + capacity / 2.0).abs() < 1e-9);
    assert_within_boxes(&fleet, &s.commanded);
}

#[test]
fn reference_out_of_range_throughout_is_an_error() {
    let fleet = continuous_fleet();
    let graph = CommGraph::ring(4).unwrap();
    let target = vec![10.0 * fleet.total_capacity(); 5];
    assert!(matches!(
        schedule(&fleet, &target, &plan(&graph, Algorithm::Rc, 4)),
        Err(regsim_core::Error::InfeasibleThroughout)
    ));
}

#[test]
fn pinned_devices_hold_between_updates() {
    let fleet = Fleet::read_csv(&common::scenarios_dir().join("fleets/test2.csv"), 9).unwrap();
    let graph = CommGraph::ring(9).unwrap();
    let target = random_target(5, 300, 0.5 * fleet.total_capacity());
    let s = schedule(&fleet, &target, &plan(&graph, Algorithm::Rc, 9)).unwrap();
    assert_within_boxes(&fleet, &s.commanded);
    for (d, row) in fleet.devices().iter().zip(&s.commanded) {
        for k in 1..row.len() {
            if (k + d.update_period_s - d.offset_s % d.update_period_s) % d.update_period_s != 0 {
                assert_eq!(row[k], row[k - 1], "{} changed at t={k}", d.id);
            }
        }
    }
}
