//! Distributed allocation of a frequency-regulation signal across a
//! heterogeneous fleet of distributed energy resources.

pub mod error;
pub mod fleet;
pub mod graph;
pub mod market;
pub mod measure;
pub mod metrics;
pub mod problem;
pub mod scenario;
pub mod signal;
pub mod solvers;

pub use error::{Error, Result};
pub use graph::{CommGraph, Laplacian};
pub use problem::{
    centralized_solve, check_feasible, oracle_solve, rc_closed_form, Allocation, AllocationProblem,
    CostFunction,
};
pub use signal::SignalTrace;
pub use solvers::{run_solver, Algorithm, Execution, Solver, SolverConfig, SolverRun};
