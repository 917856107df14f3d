//! Euler-discretized primal-dual dynamics on the augmented Lagrangian of the
//! consensus reformulation `p + L y = (P_ref / n) 1`.

use crate::problem::{AllocationProblem, CostFunction};

use super::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    /// Primal setpoint (kW).
    pub p: f64,
    /// Auxiliary consensus variable.
    pub y: f64,
    /// Local dual variable.
    pub lambda: f64,
    pub cost: CostFunction,
    pub lower: f64,
    pub upper: f64,
    /// `P_ref / n`, known to every node.
    pub share: f64,
    ly: f64,
    ls: f64,
}

impl PdState {
    /// Replaces the local problem data and projects `p` into the new box.
    pub(crate) fn retarget(&mut self, cost: CostFunction, lower: f64, upper: f64, share: f64) {
        self.cost = cost;
        self.lower = lower;
        self.upper = upper;
        self.share = share;
        self.p = self.p.clamp(lower, upper);
    }
}

/// Cold start: `p_i = clip(P_ref / n)`, zero auxiliary and dual variables.
pub fn pd_init(problem: &AllocationProblem) -> Vec<PdState> {
    let share = problem.p_ref() / problem.n() as f64;
    problem
        .costs()
        .iter()
        .zip(problem.lower().iter().zip(problem.upper()))
        .map(|(&cost, (&lower, &upper))| PdState {
            p: share.clamp(lower, upper),
            y: 0.0,
            lambda: 0.0,
            cost,
            lower,
            upper,
            share,
            ly: 0.0,
            ls: 0.0,
        })
        .collect()
}

/// One forward-Euler step of
///
/// ```text
/// p'      = -(f'(p) + lambda + p + L y - P_ref/n)
/// y'      = -(L (lambda + p - P_ref/n) + L^2 y)
/// lambda' =   p + L y - P_ref/n
/// ```
///
/// followed by projection of `p` onto its box. `L^2 y` takes a second
/// exchange of the first-hop result.
pub fn pd_step(states: &mut [PdState], net: &mut Network<'_>, h: f64) {
    net.exchange(
        states,
        2,
        |s, out| {
            out[0] = s.y;
            out[1] = s.lambda + s.p - s.share;
        },
        |s, inbox| {
            s.ly = inbox.laplacian(0);
            s.ls = inbox.laplacian(1);
        },
    );
    net.exchange(
        states,
        1,
        |s, out| out[0] = s.ly,
        |s, inbox| {
            let l2y = inbox.laplacian(0);
            let r = s.p + s.ly - s.share;
            let dp = -(s.cost.derivative(s.p) + s.lambda + r);
            let dy = -(s.ls + l2y);
            let dl = r;
            s.p = (s.p + h * dp).clamp(s.lower, s.upper);
            s.y += h * dy;
            s.lambda += h * dl;
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CommGraph;
    use crate::problem::oracle_solve;
    use crate::solvers::Execution;

    fn quad(a: f64) -> CostFunction {
        CostFunction::quadratic(a, 0.0).unwrap()
    }

    #[test]
    fn two_agent_path_converges_to_oracle() {
        let g = CommGraph::path(2).unwrap();
        let pr = AllocationProblem::uniform_bounds(vec![quad(1.0); 2], -5.0, 5.0, 4.0).unwrap();
        let mut s = pd_init(&pr);
        let mut net = Network::new(&g, Execution::Sequential);
        for _ in 0..2000 {
            pd_step(&mut s, &mut net, 0.05);
        }
        assert!((s[0].p - 2.0).abs() < 1e-3 && (s[1].p - 2.0).abs() < 1e-3);
        assert_eq!(net.exchanges(), 4000);
    }

    #[test]
    fn symmetric_zero_reference_stays_at_zero() {
        let g = CommGraph::ring(5).unwrap();
        let pr = AllocationProblem::uniform_bounds(vec![quad(1.5); 5], -2.0, 2.0, 0.0).unwrap();
        let mut s = pd_init(&pr);
        let mut net = Network::new(&g, Execution::Sequential);
        for _ in 0..300 {
            pd_step(&mut s, &mut net, 0.05);
        }
        assert!(s.iter().all(|st| st.p == 0.0));
    }

    #[test]
    fn optimizer_with_consistent_multipliers_is_stationary() {
        let g = CommGraph::ring(4).unwrap();
        let costs = vec![quad(1.0), quad(2.0), quad(0.5), quad(1.0)];
        let pr = AllocationProblem::uniform_bounds(costs.clone(), -10.0, 10.0, 6.0).unwrap();
        let opt = oracle_solve(&pr).unwrap();
        let lambda = -costs[0].derivative(opt.p[0]);
        // p + L y = P_ref/n  =>  L y = share - p*, solvable because the
        // right-hand side sums to zero. Solve with the pseudo-inverse via
        // Jacobi iterations on the ring.
        let share = pr.p_ref() / 4.0;
        let rhs: Vec<f64> = opt.p.iter().map(|p| share - p).collect();
        let l = g.laplacian();
        let mut y = vec![0.0; 4];
        for _ in 0..20000 {
            let ly = l.apply(&y);
            for i in 0..4 {
                y[i] += 0.2 * (rhs[i] - ly[i]);
            }
        }
        let mut s = pd_init(&pr);
        for (i, st) in s.iter_mut().enumerate() {
            st.p = opt.p[i];
            st.y = y[i];
            st.lambda = lambda;
        }
        let mut net = Network::new(&g, Execution::Sequential);
        for _ in 0..100 {
            pd_step(&mut s, &mut net, 0.05);
            let total: f64 = s.iter().map(|st| st.p).sum();
            assert!((total - pr.p_ref()).abs() <= 1e-6);
        }
    }

    #[test]
    fn projection_keeps_p_in_box() {
        let g = CommGraph::ring(3).unwrap();
        let pr = AllocationProblem::new(
            vec![quad(0.1); 3],
            vec![-1.0, -0.5, 0.2],
            vec![1.0, 0.5, 0.2],
            1.5,
        )
        .unwrap();
        let mut s = pd_init(&pr);
        let mut net = Network::new(&g, Execution::Sequential);
        for _ in 0..500 {
            pd_step(&mut s, &mut net, 0.1);
            for st in &s {
                assert!(st.p >= st.lower && st.p <= st.upper);
            }
        }
    }
}
