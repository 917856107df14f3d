//! Per-second setpoint scheduling over the computing nodes.
//!
//! Every node aggregates its devices. At second `k` a device is *free* when
//! `k` is one of its update instants and *pinned* at its held setpoint
//! otherwise, so a node's box is the pinned sum plus the free devices'
//! boxes. The nodes solve one allocation instance per second; free devices
//! then split their node's share by equal fractional loading. Air handlers
//! are rounded to on/off states and, when rounding moved them, the instance
//! is solved again with the air handlers pinned so the other nodes absorb
//! the rounding error.

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::problem::{oracle_solve, rc_closed_form, AllocationProblem, CostFunction};
use crate::signal::is_update_instant;
use crate::solvers::{Algorithm, Solver, SolverConfig};

use super::ahu::{ahu_discretize, unit_output};
use super::{DerType, Fleet};

/// Absolute tolerance (kW) for deciding that a reference needed clamping.
const CLAMP_TOL: f64 = 1e-9;

/// Which algorithm solves instant `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPlan {
    Single(Algorithm),
    /// Ratio-consensus, primal-dual, then DANA over equal thirds of the
    /// horizon.
    Thirds,
}

impl SolverPlan {
    pub fn at(&self, k: usize, horizon: usize) -> Algorithm {
        match *self {
            SolverPlan::Single(a) => a,
            SolverPlan::Thirds => Algorithm::ALL[(3 * k / horizon.max(1)).min(2)],
        }
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        match *self {
            SolverPlan::Single(a) => vec![a],
            SolverPlan::Thirds => Algorithm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Reference outside the instantaneous fleet range.
    Clamp,
    /// Stage-2 target outside the stage-2 range.
    StageClamp,
    /// Distributed solver failed; the centralized solution was used.
    SolverFallback,
    Warning,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Clamp => "clamp",
            EventKind::StageClamp => "stage_clamp",
            EventKind::SolverFallback => "solver_fallback",
            EventKind::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t_s: usize,
    pub kind: EventKind,
    pub detail: String,
}

/// Inputs of one scheduling pass.
#[derive(Debug, Clone)]
pub struct SchedulePlan<'a> {
    pub graph: &'a CommGraph,
    pub solver: SolverPlan,
    pub config: SolverConfig,
    /// Cost of each node's aggregate deviation.
    pub node_costs: Vec<CostFunction>,
    /// Factor applied to the boxes of `fast_types` while solving.
    pub upscale_factor: f64,
    pub fast_types: Vec<DerType>,
    /// Devices taking part; the others are held at baseline.
    pub active: Option<Vec<bool>>,
    /// Instants whose solver residual traces are kept.
    pub keep_residuals: Vec<usize>,
}

/// Output of [`schedule`].
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Setpoints relative to baseline, indexed `[device][second]` (kW).
    pub commanded: Vec<Vec<f64>>,
    /// Distributed node allocations, `[second][node]`.
    pub node_distributed: Vec<Vec<f64>>,
    /// Centralized node allocations of the same instances.
    pub node_true: Vec<Vec<f64>>,
    pub algorithms: Vec<Algorithm>,
    /// Reference actually solved at each second (after clamping).
    pub scheduled_ref: Vec<f64>,
    /// Seconds at which setpoints were dispatched to devices.
    pub dispatches: Vec<usize>,
    pub events: Vec<Event>,
    pub clamped_instants: usize,
    pub residuals: Vec<(usize, Algorithm, Vec<f64>)>,
}

/// Multiplies the boxes of the agents flagged in `fast` by `factor`.
pub fn upscale_fast(
    problem: &AllocationProblem,
    fast: &[bool],
    factor: f64,
) -> Result<AllocationProblem> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::invalid(format!(
            "upscale factor must be at least 1, got {factor}"
        )));
    }
    if fast.len() != problem.n() {
        return Err(Error::LengthMismatch(fast.len(), problem.n()));
    }
    let scale = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(fast)
            .map(|(&x, &f)| if f { x * factor } else { x })
            .collect()
    };
    problem.with_bounds(scale(problem.lower()), scale(problem.upper()))
}

struct Instant<'a> {
    fleet: &'a Fleet,
    node_map: &'a [Vec<usize>],
    bounds: &'a [(f64, f64)],
    scale: &'a [f64],
}

impl Instant<'_> {
    /// Node boxes given which devices are free and the held setpoints.
    fn node_boxes(&self, free: &[bool], active: &[bool], held: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.node_map.len();
        let (mut lo, mut hi) = (vec![0.0; n], vec![0.0; n]);
        for (node, devs) in self.node_map.iter().enumerate() {
            for &d in devs {
                if !active[d] {
                    continue;
                }
                if free[d] {
                    lo[node] += self.scale[d] * self.bounds[d].0;
                    hi[node] += self.scale[d] * self.bounds[d].1;
                } else {
                    lo[node] += held[d];
                    hi[node] += held[d];
                }
            }
        }
        (lo, hi)
    }

    /// Splits each node's value over its free devices by equal fractional
    /// loading of their (scaled) ranges.
    fn disaggregate(&self, node_p: &[f64], free: &[bool], held: &[f64], out: &mut [f64]) {
        for (node, devs) in self.node_map.iter().enumerate() {
            let mut pinned = 0.0;
            let mut free_lo = 0.0;
            let mut free_range = 0.0;
            for &d in devs {
                if free[d] {
                    free_lo += self.scale[d] * self.bounds[d].0;
                    free_range += self.scale[d] * (self.bounds[d].1 - self.bounds[d].0);
                } else {
                    pinned += held[d];
                }
            }
            let theta = if free_range > 0.0 {
                ((node_p[node] - pinned - free_lo) / free_range).clamp(0.0, 1.0)
            } else {
                0.0
            };
            for &d in devs {
                if free[d] {
                    let (l, h) = self.bounds[d];
                    out[d] = self.scale[d] * (l + theta * (h - l));
                }
            }
        }
    }

    fn physical(&self, d: usize, p: f64) -> f64 {
        let spec = &self.fleet.devices()[d];
        let (l, h) = self.bounds[d];
        let p = p.clamp(l, h);
        if !spec.integer_kw {
            return p;
        }
        let base = spec.baseline();
        let (abs_lo, abs_hi) = (base + l, base + h);
        let mut abs = (base + p).round();
        if abs > abs_hi {
            abs = abs_hi.floor();
        }
        if abs < abs_lo {
            abs = abs_lo.ceil();
        }
        if abs < abs_lo || abs > abs_hi {
            p
        } else {
            abs - base
        }
    }
}

struct Solved {
    distributed: Vec<f64>,
    truth: Vec<f64>,
    residuals: Vec<f64>,
}

fn solve_instance(
    solver: &mut Solver<'_>,
    costs: &[CostFunction],
    lo: Vec<f64>,
    hi: Vec<f64>,
    p_ref: f64,
    k: usize,
    events: &mut Vec<Event>,
) -> Result<Solved> {
    let capacity: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).sum();
    if capacity <= 0.0 {
        return Ok(Solved {
            distributed: lo.clone(),
            truth: lo,
            residuals: Vec::new(),
        });
    }
    let problem = AllocationProblem::new(costs.to_vec(), lo, hi, p_ref)?;
    let truth = match solver.algorithm() {
        Algorithm::Rc => rc_closed_form(&problem)?,
        _ => oracle_solve(&problem)?,
    };
    match solver.solve(&problem) {
        Ok(run) => Ok(Solved {
            distributed: run.allocation.p,
            truth: truth.p,
            residuals: run.residuals,
        }),
        Err(e) => {
            events.push(Event {
                t_s: k,
                kind: EventKind::SolverFallback,
                detail: e.to_string(),
            });
            solver.reset();
            Ok(Solved {
                distributed: truth.p.clone(),
                truth: truth.p,
                residuals: Vec::new(),
            })
        }
    }
}

/// Schedules per-device setpoints for a 1 Hz reference.
pub fn schedule(fleet: &Fleet, target: &[f64], plan: &SchedulePlan<'_>) -> Result<Schedule> {
    let n_nodes = fleet.n_nodes();
    let n_dev = fleet.len();
    let horizon = target.len();
    if horizon == 0 {
        return Err(Error::invalid("empty target"));
    }
    if plan.graph.n() != n_nodes {
        return Err(Error::LengthMismatch(plan.graph.n(), n_nodes));
    }
    if plan.node_costs.len() != n_nodes {
        return Err(Error::LengthMismatch(plan.node_costs.len(), n_nodes));
    }
    if !(plan.upscale_factor >= 1.0 && plan.upscale_factor.is_finite()) {
        return Err(Error::invalid(format!(
            "upscale factor must be at least 1, got {}",
            plan.upscale_factor
        )));
    }
    let active = plan.active.clone().unwrap_or_else(|| vec![true; n_dev]);
    if active.len() != n_dev {
        return Err(Error::LengthMismatch(active.len(), n_dev));
    }
    let devices = fleet.devices();
    let node_map = fleet.node_map();
    let bounds: Vec<(f64, f64)> = devices
        .iter()
        .zip(&active)
        .map(|(d, &a)| if a { d.bounds() } else { (0.0, 0.0) })
        .collect();
    let scale: Vec<f64> = devices
        .iter()
        .map(|d| {
            if plan.fast_types.contains(&d.der_type) {
                plan.upscale_factor
            } else {
                1.0
            }
        })
        .collect();
    let inst = Instant {
        fleet,
        node_map: &node_map,
        bounds: &bounds,
        scale: &scale,
    };

    let mut held = vec![0.0; n_dev];
    let mut ahu_on = vec![false; n_dev];
    let mut setpoint = vec![0.0; n_dev];
    let mut out = Schedule {
        commanded: vec![Vec::with_capacity(horizon); n_dev],
        node_distributed: Vec::with_capacity(horizon),
        node_true: Vec::with_capacity(horizon),
        algorithms: Vec::with_capacity(horizon),
        scheduled_ref: Vec::with_capacity(horizon),
        dispatches: Vec::new(),
        events: Vec::new(),
        clamped_instants: 0,
        residuals: Vec::new(),
    };
    let mut solver: Option<Solver<'_>> = None;

    for (k, &reference) in target.iter().enumerate() {
        let algorithm = plan.solver.at(k, horizon);
        if solver.as_ref().map(Solver::algorithm) != Some(algorithm) {
            solver = Some(Solver::new(algorithm, plan.graph, plan.config.clone())?);
        }
        let solver = solver.as_mut().expect("solver initialized above");

        let mut free: Vec<bool> = devices
            .iter()
            .zip(&active)
            .map(|(d, &a)| a && is_update_instant(k, d.update_period_s, d.offset_s))
            .collect();
        let (lo, hi) = inst.node_boxes(&free, &active, &held);
        let (lo_sum, hi_sum) = (lo.iter().sum::<f64>(), hi.iter().sum::<f64>());
        let p_ref = reference.clamp(lo_sum, hi_sum);
        if (p_ref - reference).abs() > CLAMP_TOL {
            out.clamped_instants += 1;
            out.events.push(Event {
                t_s: k,
                kind: EventKind::Clamp,
                detail: format!("reference {reference:.4} kW clamped to {p_ref:.4} kW"),
            });
        }

        let mut solved = solve_instance(
            solver,
            &plan.node_costs,
            lo.clone(),
            hi.clone(),
            p_ref,
            k,
            &mut out.events,
        )?;
        let clamp_nodes = |p: &[f64], lo: &[f64], hi: &[f64]| -> Vec<f64> {
            p.iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| v.clamp(l, h))
                .collect()
        };
        inst.disaggregate(
            &clamp_nodes(&solved.distributed, &lo, &hi),
            &free,
            &held,
            &mut setpoint,
        );

        // Round free air handlers per node; re-solve if that moved them.
        let mut moved = false;
        for devs in &node_map {
            let ahus: Vec<usize> = devs
                .iter()
                .copied()
                .filter(|&d| free[d] && devices[d].discrete())
                .collect();
            if ahus.is_empty() {
                continue;
            }
            let unit_half = bounds[ahus[0]].1;
            let targets: Vec<f64> = ahus.iter().map(|&d| setpoint[d]).collect();
            let prev: Vec<bool> = ahus.iter().map(|&d| ahu_on[d]).collect();
            let on = ahu_discretize(&targets, unit_half, &prev);
            for (&d, &state) in ahus.iter().zip(&on) {
                ahu_on[d] = state;
                let q = unit_output(state, unit_half);
                if q != setpoint[d] {
                    moved = true;
                }
                setpoint[d] = q;
            }
        }
        if moved {
            let mut pinned = held.clone();
            for d in 0..n_dev {
                if free[d] && devices[d].discrete() {
                    pinned[d] = setpoint[d];
                    free[d] = false;
                }
            }
            let (lo2, hi2) = inst.node_boxes(&free, &active, &pinned);
            let p_ref2 = p_ref.clamp(lo2.iter().sum(), hi2.iter().sum());
            solved = solve_instance(
                solver,
                &plan.node_costs,
                lo2.clone(),
                hi2.clone(),
                p_ref2,
                k,
                &mut out.events,
            )?;
            inst.disaggregate(
                &clamp_nodes(&solved.distributed, &lo2, &hi2),
                &free,
                &pinned,
                &mut setpoint,
            );
            held = pinned;
        }

        for d in 0..n_dev {
            if free[d] {
                held[d] = inst.physical(d, setpoint[d]);
            }
            out.commanded[d].push(held[d]);
        }
        if plan.keep_residuals.contains(&k) {
            out.residuals
                .push((k, algorithm, std::mem::take(&mut solved.residuals)));
        }
        out.node_distributed.push(solved.distributed);
        out.node_true.push(solved.truth);
        out.algorithms.push(algorithm);
        out.scheduled_ref.push(p_ref);
        if k % 60 == 0 {
            out.dispatches.push(k);
        }
    }
    if out.clamped_instants == horizon {
        return Err(Error::InfeasibleThroughout);
    }
    Ok(out)
}
