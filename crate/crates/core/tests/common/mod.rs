#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regsim_core::{AllocationProblem, CostFunction};

/// Feasible quadratic instance on 3 to 20 agents with boxes centered at
/// zero.
pub fn random_problem(seed: u64) -> AllocationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=20usize);
    let costs = (0..n)
        .map(|_| {
            CostFunction::quadratic(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0)).unwrap()
        })
        .collect();
    let half: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
    let total: f64 = half.iter().sum();
    let p_ref = rng.gen_range(-0.8..0.8) * total;
    AllocationProblem::new(costs, half.iter().map(|w| -w).collect(), half, p_ref).unwrap()
}

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub const GRID: f64 = 1e-3;

pub fn grid_instance(seed: u64) -> AllocationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let costs = (0..n)
        .map(|_| {
            CostFunction::quadratic(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0)).unwrap()
        })
        .collect();
    // Bounds on the 1e-3 grid so grid points can hit them exactly.
    let lower: Vec<f64> = (0..n)
        .map(|_| -(rng.gen_range(200..1000) as f64) * GRID)
        .collect();
    let upper: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(200..1000) as f64 * GRID)
        .collect();
    let lo: f64 = lower.iter().sum();
    let hi: f64 = upper.iter().sum();
    let p_ref = ((lo + rng.gen_range(0.1..0.9) * (hi - lo)) / GRID).round() * GRID;
    AllocationProblem::new(costs, lower, upper, p_ref).unwrap()
}

/// Minimizes over grid points of the first `n - 1` coordinates inside the
/// given per-coordinate windows; the last coordinate takes up the balance.
fn search(p: &AllocationProblem, windows: &[(f64, f64)], step: f64) -> Vec<f64> {
    let n = p.n();
    let mut best = (f64::INFINITY, vec![]);
    let mut x = vec![0.0; n];
    fn rec(
        p: &AllocationProblem,
        windows: &[(f64, f64)],
        step: f64,
        k: usize,
        x: &mut Vec<f64>,
        best: &mut (f64, Vec<f64>),
    ) {
        let n = p.n();
        if k == n - 1 {
            let last = p.p_ref() - x[..n - 1].iter().sum::<f64>();
            if last < p.lower()[n - 1] - 1e-12 || last > p.upper()[n - 1] + 1e-12 {
                return;
            }
            x[n - 1] = last;
            let f = p.objective(x);
            if f < best.0 {
                *best = (f, x.clone());
            }
            return;
        }
        let (a, b) = windows[k];
        let lo = (a.max(p.lower()[k]) / step).ceil() as i64;
        let hi = (b.min(p.upper()[k]) / step).floor() as i64;
        for i in lo..=hi {
            x[k] = i as f64 * step;
            rec(p, windows, step, k + 1, x, best);
        }
    }
    rec(p, windows, step, 0, &mut x, &mut best);
    best.1
}

pub fn brute_force(p: &AllocationProblem) -> Vec<f64> {
    let n = p.n();
    let full: Vec<(f64, f64)> = (0..n).map(|i| (p.lower()[i], p.upper()[i])).collect();
    if n <= 3 {
        return search(p, &full, GRID);
    }
    // Exhaustive at 1e-2, then exhaustive at 1e-3 around the coarse optimum.
    let coarse = search(p, &full, 10.0 * GRID);
    let windows: Vec<(f64, f64)> = coarse.iter().map(|&c| (c - 0.03, c + 0.03)).collect();
    search(p, &windows, GRID)
}
