//! Distributed solvers as per-node state machines over a [`Network`].
//!
//! A *round* is one iteration of an algorithm. Ratio-consensus uses one
//! exchange per round, primal-dual two, and DANA `2 + 2 q` at truncation
//! depth `q`. [`SolverRun::exchanges`] reports the total.

pub mod dana;
pub mod network;
pub mod pd;
pub mod rc;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::problem::{check_feasible, Allocation, AllocationProblem};

pub use dana::{dana_init, dana_init_from, dana_prepare, dana_step, DanaState};
pub use network::{Execution, Inbox, Network};
pub use pd::{pd_init, pd_step, PdState};
pub use rc::{rc_extract, rc_init, rc_step, RcState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Rc,
    Pd,
    Dana,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Rc, Algorithm::Pd, Algorithm::Dana];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rc => "rc",
            Algorithm::Pd => "pd",
            Algorithm::Dana => "dana",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rc" => Ok(Algorithm::Rc),
            "pd" => Ok(Algorithm::Pd),
            "dana" => Ok(Algorithm::Dana),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Rounds per instance.
    pub budget: usize,
    pub pd_step: f64,
    pub dana_step: f64,
    /// Neumann truncation depth of the DANA weighting.
    pub dana_depth: usize,
    /// Nodes that know the reference (ratio-consensus). `None` means the
    /// last node.
    pub informed: Option<Vec<usize>>,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            budget: 500,
            pd_step: 0.1,
            dana_step: 1.0,
            dana_depth: 12,
            informed: None,
            execution: Execution::Sequential,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("round budget must be at least 1"));
        }
        if !(self.pd_step > 0.0 && self.pd_step.is_finite()) {
            return Err(Error::invalid("primal-dual step must be positive"));
        }
        if !(self.dana_step > 0.0 && self.dana_step.is_finite()) {
            return Err(Error::invalid("DANA step must be positive"));
        }
        if matches!(&self.informed, Some(v) if v.is_empty()) {
            return Err(Error::invalid("informed set is empty"));
        }
        Ok(())
    }
}

/// Result of one solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub exchanges: usize,
    pub allocation: Allocation,
    /// One entry per round: ratio spread (RC), balance error `|sum p - P_ref|`
    /// (PD), or total box violation (DANA).
    pub residuals: Vec<f64>,
}

enum Memory {
    Cold,
    Pd(Vec<PdState>),
    Dana { states: Vec<DanaState>, p_ref: f64 },
}

/// Stateful solver that warm-starts each instance from the previous
/// terminal state.
pub struct Solver<'g> {
    algorithm: Algorithm,
    graph: &'g CommGraph,
    config: SolverConfig,
    memory: Memory,
}

impl<'g> Solver<'g> {
    pub fn new(algorithm: Algorithm, graph: &'g CommGraph, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        if let Some(informed) = &config.informed {
            if let Some(&bad) = informed.iter().find(|&&i| i >= graph.n()) {
                return Err(Error::NodeOutOfRange {
                    node: bad,
                    n: graph.n(),
                });
            }
        }
        Ok(Self {
            algorithm,
            graph,
            config,
            memory: Memory::Cold,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Forgets the warm-start state.
    pub fn reset(&mut self) {
        self.memory = Memory::Cold;
    }

    pub fn solve(&mut self, problem: &AllocationProblem) -> Result<SolverRun> {
        if problem.n() != self.graph.n() {
            return Err(Error::LengthMismatch(problem.n(), self.graph.n()));
        }
        if !check_feasible(problem) {
            return Err(Error::Infeasible {
                p_ref: problem.p_ref(),
                lower_sum: problem.lower_sum(),
                upper_sum: problem.upper_sum(),
            });
        }
        let mut net = Network::new(self.graph, self.config.execution);
        let budget = self.config.budget;
        let mut residuals = Vec::with_capacity(budget);
        let p = match self.algorithm {
            Algorithm::Rc => {
                let informed = self.informed();
                let mut states = rc_init(problem, &informed)?;
                for _ in 0..budget {
                    rc_step(&mut states, &mut net);
                    residuals.push(rc::ratio_spread(&states));
                }
                states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| rc::rc_extract_at(s, i))
                    .collect::<Result<Vec<_>>>()?
            }
            Algorithm::Pd => {
                let mut states = match std::mem::replace(&mut self.memory, Memory::Cold) {
                    Memory::Pd(mut states) => {
                        let share = problem.p_ref() / problem.n() as f64;
                        for (i, s) in states.iter_mut().enumerate() {
                            s.retarget(
                                problem.costs()[i],
                                problem.lower()[i],
                                problem.upper()[i],
                                share,
                            );
                        }
                        states
                    }
                    _ => pd_init(problem),
                };
                let h = self.config.pd_step;
                for _ in 0..budget {
                    pd_step(&mut states, &mut net, h);
                    let total: f64 = states.iter().map(|s| s.p).sum();
                    residuals.push((total - problem.p_ref()).abs());
                }
                let p = states.iter().map(|s| s.p).collect();
                self.memory = Memory::Pd(states);
                p
            }
            Algorithm::Dana => {
                let mut states = match std::mem::replace(&mut self.memory, Memory::Cold) {
                    Memory::Dana { mut states, p_ref } => {
                        let delta = (problem.p_ref() - p_ref) / problem.n() as f64;
                        for (i, s) in states.iter_mut().enumerate() {
                            s.retarget(
                                problem.costs()[i],
                                problem.lower()[i],
                                problem.upper()[i],
                                delta,
                            );
                        }
                        states
                    }
                    _ => dana_init(problem),
                };
                dana_prepare(&mut states, &mut net);
                let (h, depth) = (self.config.dana_step, self.config.dana_depth);
                for _ in 0..budget {
                    dana_step(&mut states, &mut net, h, depth);
                    residuals.push(dana::box_violation(&states));
                }
                let p = states.iter().map(|s| s.p).collect();
                self.memory = Memory::Dana {
                    states,
                    p_ref: problem.p_ref(),
                };
                p
            }
        };
        Ok(SolverRun {
            algorithm: self.algorithm,
            rounds: budget,
            exchanges: net.exchanges(),
            allocation: Allocation { p },
            residuals,
        })
    }

    fn informed(&self) -> Vec<usize> {
        self.config
            .informed
            .clone()
            .unwrap_or_else(|| vec![self.graph.n() - 1])
    }
}

/// Cold-started solve of a single instance.
pub fn run_solver(
    algorithm: Algorithm,
    problem: &AllocationProblem,
    graph: &CommGraph,
    config: &SolverConfig,
) -> Result<SolverRun> {
    Solver::new(algorithm, graph, config.clone())?.solve(problem)
}

/// Writes `round,residual` rows.
pub fn write_residuals(path: &Path, run: &SolverRun) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["round", "residual"]).map_err(csv_err)?;
    for (k, r) in run.residuals.iter().enumerate() {
        w.write_record([(k + 1).to_string(), format!("{r:e}")])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
