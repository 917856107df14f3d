//! Distributed approximate Newton dynamics on the Laplacian reformulation
//!
//! ```text
//! min_z  f(p0 + L z)   s.t.  lower <= p0 + L z <= upper
//! ```
//!
//! with `sum(p0) = P_ref`. Because `1^T L = 0`, every iterate `p = p0 + L z`
//! meets the balance constraint. The box rows carry nonnegative multipliers
//! updated by projected ascent. The ascent step is scaled by the local
//! curvature: the primal side moves about `1 / f''` per unit of multiplier,
//! so this keeps the loop gain independent of the cost.
//!
//! The gradient weighting `A_q` is a truncated Neumann series of the inverse
//! of `M = L H L` (`H = diag f''`) around a diagonal splitting `M = D - B`:
//!
//! ```text
//! A_q = sum_{k=0..q} D^-1 (B D^-1)^k
//! ```
//!
//! `D_i = sum_{j in N[i]} |L_ij| H_j 2 deg_j` bounds the absolute row sums
//! of `M`, so `D - M` is positive semidefinite, every partial sum is positive
//! definite, and `h A_q M <= h I`. Applying `A_q` costs two exchanges per
//! term.

use crate::problem::{AllocationProblem, CostFunction};

use super::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct DanaState {
    /// Reallocation variable.
    pub z: f64,
    /// Multiplier of `lower - p <= 0`.
    pub lambda_lower: f64,
    /// Multiplier of `p - upper <= 0`.
    pub lambda_upper: f64,
    /// Initial power level (kW); the `p0` values sum to the reference.
    pub p0: f64,
    /// Current setpoint `p0 + (L z)_i` (kW).
    pub p: f64,
    pub cost: CostFunction,
    pub lower: f64,
    pub upper: f64,
    degree: f64,
    diag: f64,
    v: f64,
    u: f64,
    lu: f64,
}

impl DanaState {
    fn new(cost: CostFunction, lower: f64, upper: f64, p0: f64) -> Self {
        Self {
            z: 0.0,
            lambda_lower: 0.0,
            lambda_upper: 0.0,
            p0,
            p: p0,
            cost,
            lower,
            upper,
            degree: 0.0,
            diag: 0.0,
            v: 0.0,
            u: 0.0,
            lu: 0.0,
        }
    }

    /// Warm restart for a new instance: shift the previous terminal power by
    /// the change of the per-node reference share and reset `z`.
    pub(crate) fn retarget(
        &mut self,
        cost: CostFunction,
        lower: f64,
        upper: f64,
        share_delta: f64,
    ) {
        self.cost = cost;
        self.lower = lower;
        self.upper = upper;
        self.p0 = self.p + share_delta;
        self.p = self.p0;
        self.z = 0.0;
    }

    /// Diagonal of the splitting, available after [`dana_prepare`].
    pub fn diag(&self) -> f64 {
        self.diag
    }
}

/// Cold start with `p0_i = P_ref / n`.
pub fn dana_init(problem: &AllocationProblem) -> Vec<DanaState> {
    let share = problem.p_ref() / problem.n() as f64;
    problem
        .costs()
        .iter()
        .zip(problem.lower().iter().zip(problem.upper()))
        .map(|(&cost, (&lower, &upper))| DanaState::new(cost, lower, upper, share))
        .collect()
}

/// Cold start from an explicit initial power vector.
pub fn dana_init_from(problem: &AllocationProblem, p0: &[f64]) -> Vec<DanaState> {
    problem
        .costs()
        .iter()
        .zip(problem.lower().iter().zip(problem.upper()))
        .zip(p0)
        .map(|((&cost, (&lower, &upper)), &p)| DanaState::new(cost, lower, upper, p))
        .collect()
}

/// Computes each node's splitting diagonal from its neighbors' curvature
/// and degree.
pub fn dana_prepare(states: &mut [DanaState], net: &mut Network<'_>) {
    net.exchange(
        states,
        0,
        |_, _| {},
        |s, inbox| s.degree = inbox.degree() as f64,
    );
    net.exchange(
        states,
        1,
        |s, out| out[0] = s.cost.curvature() * 2.0 * s.degree,
        |s, inbox| {
            let mut d = s.degree * inbox.own()[0];
            for (_, m) in inbox.neighbors() {
                d += m[0];
            }
            s.diag = d;
        },
    );
}

/// One Euler step of `z' = -A_q grad_z L(z, lambda)` and
/// `lambda' = [f'' grad_lambda L(z, lambda)]^+`.
pub fn dana_step(states: &mut [DanaState], net: &mut Network<'_>, h: f64, depth: usize) {
    // v = L (f'(p) - lambda_lower + lambda_upper)
    net.exchange(
        states,
        1,
        |s, out| out[0] = s.cost.derivative(s.p) - s.lambda_lower + s.lambda_upper,
        |s, inbox| {
            s.v = inbox.laplacian(0);
            s.u = if s.diag > 0.0 { s.v / s.diag } else { 0.0 };
        },
    );
    for _ in 0..depth {
        net.exchange(
            states,
            1,
            |s, out| out[0] = s.u,
            |s, inbox| s.lu = inbox.laplacian(0),
        );
        net.exchange(
            states,
            1,
            |s, out| out[0] = s.cost.curvature() * s.lu,
            |s, inbox| {
                let mu = inbox.laplacian(0);
                if s.diag > 0.0 {
                    s.u = (s.v + s.diag * s.u - mu) / s.diag;
                }
            },
        );
    }
    net.exchange(
        states,
        1,
        |s, out| out[0] = s.z - h * s.u,
        |s, inbox| {
            s.z = inbox.own()[0];
            s.p = s.p0 + inbox.laplacian(0);
            let step = h * s.cost.curvature();
            s.lambda_lower = (s.lambda_lower + step * (s.lower - s.p)).max(0.0);
            s.lambda_upper = (s.lambda_upper + step * (s.p - s.upper)).max(0.0);
        },
    );
}

/// Exchanges per [`dana_step`] at truncation depth `depth`.
pub fn exchanges_per_step(depth: usize) -> usize {
    2 + 2 * depth
}

/// Total box violation; zero once the multipliers have settled.
pub(crate) fn box_violation(states: &[DanaState]) -> f64 {
    states
        .iter()
        .map(|s| (s.lower - s.p).max(0.0) + (s.p - s.upper).max(0.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CommGraph;
    use crate::solvers::Execution;

    fn quad(a: f64) -> CostFunction {
        CostFunction::quadratic(a, 0.0).unwrap()
    }

    fn run(
        pr: &AllocationProblem,
        g: &CommGraph,
        p0: &[f64],
        steps: usize,
        h: f64,
    ) -> Vec<DanaState> {
        let mut s = dana_init_from(pr, p0);
        let mut net = Network::new(g, Execution::Sequential);
        dana_prepare(&mut s, &mut net);
        for _ in 0..steps {
            dana_step(&mut s, &mut net, h, 2);
            let total: f64 = s.iter().map(|st| st.p).sum();
            assert!(
                (total - pr.p_ref()).abs() < 1e-9,
                "balance drifted to {total}"
            );
        }
        s
    }

    #[test]
    fn two_agents_converge_to_weighted_split() {
        let g = CommGraph::path(2).unwrap();
        let pr =
            AllocationProblem::uniform_bounds(vec![quad(1.0), quad(2.0)], -5.0, 5.0, 3.0).unwrap();
        let s = run(&pr, &g, &[1.5, 1.5], 2000, 0.05);
        assert!(
            (s[0].p - 2.0).abs() < 1e-3 && (s[1].p - 1.0).abs() < 1e-3,
            "{:?}",
            (s[0].p, s[1].p)
        );
    }

    #[test]
    fn interior_optimum_is_stationary() {
        let g = CommGraph::ring(5).unwrap();
        let pr = AllocationProblem::uniform_bounds(vec![quad(0.7); 5], -3.0, 3.0, 2.5).unwrap();
        let p0 = vec![0.5; 5];
        let s = run(&pr, &g, &p0, 50, 0.5);
        for st in &s {
            assert_eq!(st.z, 0.0);
            assert_eq!(st.p, 0.5);
        }
    }

    #[test]
    fn multipliers_stay_nonnegative_and_enforce_boxes() {
        let g = CommGraph::ring(4).unwrap();
        let pr = AllocationProblem::new(
            vec![quad(0.5), quad(2.0), quad(1.0), quad(1.0)],
            vec![-1.0, -1.0, -0.5, 0.3],
            vec![1.0, 1.0, 0.5, 0.3],
            2.0,
        )
        .unwrap();
        let s = run(&pr, &g, &[0.5; 4], 3000, 0.5);
        for st in &s {
            assert!(st.lambda_lower >= 0.0 && st.lambda_upper >= 0.0);
        }
        assert!(box_violation(&s) < 1e-6, "{}", box_violation(&s));
    }

    #[test]
    fn splitting_diagonal_on_ring() {
        // On a ring with uniform curvature c, every row of L H L is
        // c [1, -4, 6, -4, 1]; the absolute row sum is 16 c.
        let g = CommGraph::ring(7).unwrap();
        let pr = AllocationProblem::uniform_bounds(vec![quad(1.5); 7], -1.0, 1.0, 0.0).unwrap();
        let mut s = dana_init(&pr);
        let mut net = Network::new(&g, Execution::Sequential);
        dana_prepare(&mut s, &mut net);
        for st in &s {
            assert!((st.diag() - 16.0 * 3.0).abs() < 1e-12);
        }
    }
}
