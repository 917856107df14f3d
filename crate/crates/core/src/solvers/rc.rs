//! Ratio-consensus: two consensus iterations whose ratio converges to the
//! common fractional loading of every agent's range.

use crate::error::{Error, Result};
use crate::problem::AllocationProblem;

use super::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct RcState {
    /// Running numerator (kW).
    pub y: f64,
    /// Running denominator (kW).
    pub z: f64,
    pub lower: f64,
    pub upper: f64,
    /// Own degree, published with every message.
    degree: f64,
}

/// Initial numerators and denominators. Only nodes in `informed` know the
/// reference; they split it evenly.
pub fn rc_init(problem: &AllocationProblem, informed: &[usize]) -> Result<Vec<RcState>> {
    if informed.is_empty() {
        return Err(Error::invalid(
            "ratio-consensus needs at least one informed node",
        ));
    }
    let n = problem.n();
    let mut is_informed = vec![false; n];
    for &i in informed {
        if i >= n {
            return Err(Error::NodeOutOfRange { node: i, n });
        }
        is_informed[i] = true;
    }
    let k = is_informed.iter().filter(|&&b| b).count() as f64;
    let share = problem.p_ref() / k;
    Ok(problem
        .lower()
        .iter()
        .zip(problem.upper())
        .zip(is_informed)
        .map(|((&lower, &upper), inf)| RcState {
            y: if inf { share - lower } else { -lower },
            z: upper - lower,
            lower,
            upper,
            degree: 0.0,
        })
        .collect())
}

/// One round of Metropolis-weighted averaging. The averaging matrix is
/// doubly stochastic on any connected graph, so the sums of `y` and `z` are
/// conserved; on the ring every weight is 1/3.
pub fn rc_step(states: &mut [RcState], net: &mut Network<'_>) {
    let graph = net.graph();
    for (i, s) in states.iter_mut().enumerate() {
        s.degree = graph.degree(i) as f64;
    }
    net.exchange(
        states,
        3,
        |s, out| {
            out[0] = s.y;
            out[1] = s.z;
            out[2] = s.degree;
        },
        |s, inbox| {
            s.y = inbox.metropolis_mean(0, 2);
            s.z = inbox.metropolis_mean(1, 2);
        },
    );
}

/// Local setpoint from the current ratio.
pub fn rc_extract(state: &RcState) -> Result<f64> {
    rc_extract_at(state, 0)
}

pub(crate) fn rc_extract_at(state: &RcState, node: usize) -> Result<f64> {
    if state.z == 0.0 {
        return Err(Error::ZeroDenominator { node });
    }
    Ok(state.lower + state.y / state.z * (state.upper - state.lower))
}

/// Spread of the ratios across nodes; zero at consensus.
pub(crate) fn ratio_spread(states: &[RcState]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in states.iter().filter(|s| s.z > 0.0) {
        let r = s.y / s.z;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if lo.is_finite() {
        hi - lo
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CommGraph;
    use crate::problem::CostFunction;
    use crate::solvers::Execution;

    fn problem(bounds: &[(f64, f64)], p_ref: f64) -> AllocationProblem {
        AllocationProblem::new(
            vec![CostFunction::Constant; bounds.len()],
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.1).collect(),
            p_ref,
        )
        .unwrap()
    }

    #[test]
    fn init_examples() {
        let s = rc_init(&problem(&[(-1.0, 1.0); 2], 2.0), &[0]).unwrap();
        assert_eq!((s[0].y, s[1].y), (3.0, 1.0));
        assert_eq!((s[0].z, s[1].z), (2.0, 2.0));

        let s = rc_init(&problem(&[(0.0, 1.0); 3], 0.0), &[0, 1, 2]).unwrap();
        assert!(s.iter().all(|s| s.y == 0.0));

        let pr = problem(&[(-1.0, 2.0), (0.5, 3.0), (-4.0, 0.0)], 1.25);
        let s = rc_init(&pr, &[1, 2]).unwrap();
        let sum_y: f64 = s.iter().map(|s| s.y).sum();
        assert!((sum_y - (pr.p_ref() - pr.lower_sum())).abs() < 1e-12);
    }

    #[test]
    fn init_rejects_empty_or_out_of_range() {
        let pr = problem(&[(-1.0, 1.0); 2], 0.0);
        assert!(rc_init(&pr, &[]).is_err());
        assert!(matches!(
            rc_init(&pr, &[2]),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn step_on_triangle_averages_everything() {
        let g = CommGraph::ring(3).unwrap();
        let mut net = Network::new(&g, Execution::Sequential);
        let mut s: Vec<RcState> = [3.0, 0.0, 0.0]
            .iter()
            .map(|&y| RcState {
                y,
                z: 1.0,
                lower: 0.0,
                upper: 1.0,
                degree: 0.0,
            })
            .collect();
        rc_step(&mut s, &mut net);
        for st in &s {
            assert!((st.y - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        let g = CommGraph::ring(6).unwrap();
        let mut net = Network::new(&g, Execution::Sequential);
        let mut s = vec![
            RcState {
                y: 0.5,
                z: 2.0,
                lower: -1.0,
                upper: 1.0,
                degree: 0.0
            };
            6
        ];
        rc_step(&mut s, &mut net);
        assert!(s.iter().all(|st| st.y == 0.5 && st.z == 2.0));
    }

    #[test]
    fn extract_examples() {
        let st = RcState {
            y: 0.75,
            z: 1.0,
            lower: -1.0,
            upper: 1.0,
            degree: 0.0,
        };
        assert_eq!(rc_extract(&st).unwrap(), 0.5);
        let st = RcState {
            y: 0.0,
            z: 2.0,
            lower: -1.0,
            upper: 1.0,
            degree: 0.0,
        };
        assert_eq!(rc_extract(&st).unwrap(), -1.0);
        let st = RcState {
            y: 2.0,
            z: 2.0,
            lower: -1.0,
            upper: 1.0,
            degree: 0.0,
        };
        assert_eq!(rc_extract(&st).unwrap(), 1.0);
        let st = RcState {
            y: 2.0,
            z: 0.0,
            lower: -1.0,
            upper: 1.0,
            degree: 0.0,
        };
        assert!(matches!(
            rc_extract(&st),
            Err(Error::ZeroDenominator { .. })
        ));
    }
}
