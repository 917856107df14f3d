//! Per-instant allocation problem: minimize a separable cost subject to a
//! power balance and per-agent box constraints, plus the centralized
//! reference solutions every distributed solver is checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local cost of one agent as a function of its power setpoint (kW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CostFunction {
    /// Cost-free agent; the allocation degenerates to a feasibility problem.
    Constant,
    /// `a p^2 + b p` with `a > 0`.
    Quadratic { a: f64, b: f64 },
}

impl CostFunction {
    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        if a <= 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "quadratic cost needs a > 0 and finite b, got a={a}, b={b}"
            )));
        }
        Ok(CostFunction::Quadratic { a, b })
    }

    pub fn value(&self, p: f64) -> f64 {
        match *self {
            CostFunction::Constant => 0.0,
            CostFunction::Quadratic { a, b } => a * p * p + b * p,
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match *self {
            CostFunction::Constant => 0.0,
            CostFunction::Quadratic { a, b } => 2.0 * a * p + b,
        }
    }

    /// Second derivative; zero for constant costs.
    pub fn curvature(&self) -> f64 {
        match *self {
            CostFunction::Constant => 0.0,
            CostFunction::Quadratic { a, .. } => 2.0 * a,
        }
    }

    /// The same cost scaled by a positive constant.
    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            CostFunction::Constant => CostFunction::Constant,
            CostFunction::Quadratic { a, b } => CostFunction::Quadratic { a: a * c, b: b * c },
        }
    }
}

/// One instance of the allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    costs: Vec<CostFunction>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    p_ref: f64,
}

impl AllocationProblem {
    pub fn new(
        costs: Vec<CostFunction>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        p_ref: f64,
    ) -> Result<Self> {
        let n = costs.len();
        if n == 0 {
            return Err(Error::invalid(
                "allocation problem needs at least one agent",
            ));
        }
        if lower.len() != n {
            return Err(Error::LengthMismatch(n, lower.len()));
        }
        if upper.len() != n {
            return Err(Error::LengthMismatch(n, upper.len()));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(format!(
                    "agent {i}: bounds [{lo}, {hi}] are not an interval"
                )));
            }
        }
        if !p_ref.is_finite() {
            return Err(Error::invalid("reference power must be finite"));
        }
        Ok(Self {
            costs,
            lower,
            upper,
            p_ref,
        })
    }

    /// Same bounds and reference for every agent, one cost per agent.
    pub fn uniform_bounds(
        costs: Vec<CostFunction>,
        lower: f64,
        upper: f64,
        p_ref: f64,
    ) -> Result<Self> {
        let n = costs.len();
        Self::new(costs, vec![lower; n], vec![upper; n], p_ref)
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn p_ref(&self) -> f64 {
        self.p_ref
    }

    pub fn lower_sum(&self) -> f64 {
        self.lower.iter().sum()
    }

    pub fn upper_sum(&self) -> f64 {
        self.upper.iter().sum()
    }

    /// `sum_i (upper_i - lower_i)`.
    pub fn total_capacity(&self) -> f64 {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).sum()
    }

    pub fn with_p_ref(&self, p_ref: f64) -> Self {
        Self {
            p_ref,
            ..self.clone()
        }
    }

    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(self.costs.clone(), lower, upper, self.p_ref)
    }

    pub fn with_costs(&self, costs: Vec<CostFunction>) -> Result<Self> {
        Self::new(costs, self.lower.clone(), self.upper.clone(), self.p_ref)
    }

    pub fn all_quadratic(&self) -> bool {
        self.costs
            .iter()
            .all(|c| matches!(c, CostFunction::Quadratic { .. }))
    }

    pub fn all_constant(&self) -> bool {
        self.costs
            .iter()
            .all(|c| matches!(c, CostFunction::Constant))
    }

    pub fn objective(&self, p: &[f64]) -> f64 {
        self.costs.iter().zip(p).map(|(c, &x)| c.value(x)).sum()
    }

    fn infeasible(&self) -> Error {
        Error::Infeasible {
            p_ref: self.p_ref,
            lower_sum: self.lower_sum(),
            upper_sum: self.upper_sum(),
        }
    }
}

/// Power setpoint per agent (kW).
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p: Vec<f64>,
}

impl Allocation {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// True when every coordinate lies in its box, with slack `tol`.
    pub fn within_bounds(&self, problem: &AllocationProblem, tol: f64) -> bool {
        self.p
            .iter()
            .zip(problem.lower().iter().zip(problem.upper()))
            .all(|(&x, (&lo, &hi))| x >= lo - tol && x <= hi + tol)
    }
}

/// `sum lower <= p_ref <= sum upper`.
pub fn check_feasible(problem: &AllocationProblem) -> bool {
    problem.lower_sum() <= problem.p_ref && problem.p_ref <= problem.upper_sum()
}

const BISECTION_MAX_ITERS: usize = 400;

fn response(cost: &CostFunction, lambda: f64, lo: f64, hi: f64) -> f64 {
    match *cost {
        CostFunction::Quadratic { a, b } => ((-lambda - b) / (2.0 * a)).clamp(lo, hi),
        CostFunction::Constant => unreachable!("constant costs are rejected before bisection"),
    }
}

/// Exact minimizer of a strictly convex quadratic instance, found by
/// bisection on the multiplier of the balance constraint.
pub fn oracle_solve(problem: &AllocationProblem) -> Result<Allocation> {
    if !problem.all_quadratic() {
        return Err(Error::invalid(
            "oracle_solve needs quadratic costs; constant-cost problems use rc_closed_form",
        ));
    }
    if !check_feasible(problem) {
        return Err(problem.infeasible());
    }

    let costs = problem.costs();
    let lower = problem.lower();
    let upper = problem.upper();
    let p_ref = problem.p_ref();
    let tol = 1e-9 * p_ref.abs().max(1.0);

    // p_i(lambda) is nonincreasing; at lambda_lo every agent sits at its upper
    // bound, at lambda_hi at its lower bound.
    let mut lambda_lo = f64::INFINITY;
    let mut lambda_hi = f64::NEG_INFINITY;
    for ((c, &lo), &hi) in costs.iter().zip(lower).zip(upper) {
        lambda_lo = lambda_lo.min(-c.derivative(hi));
        lambda_hi = lambda_hi.max(-c.derivative(lo));
    }

    let eval = |lambda: f64| -> Vec<f64> {
        costs
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(c, (&lo, &hi))| response(c, lambda, lo, hi))
            .collect()
    };

    let mut p = eval(0.5 * (lambda_lo + lambda_hi));
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lambda_lo + lambda_hi);
        p = eval(mid);
        let residual: f64 = p.iter().sum::<f64>() - p_ref;
        if residual.abs() <= tol {
            break;
        }
        if residual > 0.0 {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
        }
        if lambda_hi - lambda_lo <= f64::EPSILON * lambda_lo.abs().max(lambda_hi.abs()).max(1.0) {
            break;
        }
    }

    polish(problem, &mut p);
    Ok(Allocation { p })
}

/// Re-solves the multiplier in closed form on the active set found by
/// bisection, which removes the residual left by the bracket tolerance.
fn polish(problem: &AllocationProblem, p: &mut [f64]) {
    let costs = problem.costs();
    let lower = problem.lower();
    let upper = problem.upper();
    let mut fixed_sum = 0.0;
    let mut inv_curv = 0.0;
    let mut offset = 0.0;
    let mut free = Vec::new();
    for i in 0..p.len() {
        let interior = p[i] > lower[i] && p[i] < upper[i];
        if interior {
            if let CostFunction::Quadratic { a, b } = costs[i] {
                inv_curv += 1.0 / (2.0 * a);
                offset += -b / (2.0 * a);
                free.push(i);
                continue;
            }
        }
        fixed_sum += p[i];
    }
    if free.is_empty() {
        return;
    }
    // sum_F (-lambda - b_i) / (2 a_i) = p_ref - fixed_sum
    let lambda = (offset - (problem.p_ref() - fixed_sum)) / inv_curv;
    let candidate: Vec<f64> = free
        .iter()
        .map(|&i| {
            let CostFunction::Quadratic { a, b } = costs[i] else {
                unreachable!()
            };
            (-lambda - b) / (2.0 * a)
        })
        .collect();
    let consistent = free
        .iter()
        .zip(&candidate)
        .all(|(&i, &x)| x >= lower[i] && x <= upper[i]);
    if consistent {
        for (&i, x) in free.iter().zip(candidate) {
            p[i] = x;
        }
    }
}

/// Equal fractional loading of every agent's range; the limit of
/// ratio-consensus.
pub fn rc_closed_form(problem: &AllocationProblem) -> Result<Allocation> {
    let capacity = problem.total_capacity();
    if capacity.is_nan() || capacity <= 0.0 {
        return Err(Error::ZeroCapacity);
    }
    if !check_feasible(problem) {
        return Err(problem.infeasible());
    }
    let ratio = (problem.p_ref() - problem.lower_sum()) / capacity;
    let p = problem
        .lower()
        .iter()
        .zip(problem.upper())
        .map(|(&lo, &hi)| lo + ratio * (hi - lo))
        .collect();
    Ok(Allocation { p })
}

/// Canonical centralized reference: the closed form for cost-free
/// problems, the KKT oracle for quadratic ones.
pub fn centralized_solve(problem: &AllocationProblem) -> Result<Allocation> {
    if problem.all_constant() {
        rc_closed_form(problem)
    } else {
        oracle_solve(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(a: f64) -> CostFunction {
        CostFunction::quadratic(a, 0.0).unwrap()
    }

    fn problem(costs: Vec<CostFunction>, bounds: &[(f64, f64)], p_ref: f64) -> AllocationProblem {
        AllocationProblem::new(
            costs,
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.1).collect(),
            p_ref,
        )
        .unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let c = vec![CostFunction::Constant; 2];
        assert!(check_feasible(&problem(c.clone(), &[(-1.0, 1.0); 2], 0.0)));
        assert!(!check_feasible(&problem(c, &[(-1.0, 1.0); 2], 2.5)));
        let c3 = vec![CostFunction::Constant; 3];
        assert!(check_feasible(&problem(
            c3,
            &[(-1.0, 1.0), (-5.0, 5.0), (-3.0, 3.0)],
            9.0
        )));
    }

    #[test]
    fn oracle_symmetric_split() {
        let p = oracle_solve(&problem(vec![quad(1.0); 2], &[(-5.0, 5.0); 2], 4.0)).unwrap();
        assert!((p.p[0] - 2.0).abs() < 1e-9 && (p.p[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_weighted_split() {
        let p = oracle_solve(&problem(vec![quad(1.0), quad(2.0)], &[(-5.0, 5.0); 2], 3.0)).unwrap();
        assert!((p.p[0] - 2.0).abs() < 1e-9, "{:?}", p);
        assert!((p.p[1] - 1.0).abs() < 1e-9, "{:?}", p);
    }

    #[test]
    fn oracle_saturates_small_agent() {
        let p = oracle_solve(&problem(
            vec![quad(1.0); 2],
            &[(-1.0, 1.0), (-5.0, 5.0)],
            4.0,
        ))
        .unwrap();
        assert_eq!(p.p[0], 1.0);
        assert!((p.p[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_rejects_infeasible_and_constant() {
        let err = oracle_solve(&problem(vec![quad(1.0); 2], &[(-1.0, 1.0); 2], 3.0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        let err = oracle_solve(&problem(
            vec![CostFunction::Constant; 2],
            &[(-1.0, 1.0); 2],
            0.0,
        ))
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn oracle_handles_boundary_reference() {
        let pr = problem(vec![quad(1.0), quad(3.0)], &[(-1.0, 1.0), (-2.0, 2.0)], 3.0);
        let p = oracle_solve(&pr).unwrap();
        assert_eq!(p.p, vec![1.0, 2.0]);
        let pr = pr.with_p_ref(-3.0);
        assert_eq!(oracle_solve(&pr).unwrap().p, vec![-1.0, -2.0]);
    }

    #[test]
    fn oracle_zero_width_agents_are_pinned() {
        let pr = problem(
            vec![quad(1.0), quad(1.0), quad(1.0)],
            &[(0.7, 0.7), (-5.0, 5.0), (-5.0, 5.0)],
            2.7,
        );
        let p = oracle_solve(&pr).unwrap();
        assert_eq!(p.p[0], 0.7);
        assert!((p.p[1] - 1.0).abs() < 1e-12 && (p.p[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rc_closed_form_examples() {
        let c = vec![CostFunction::Constant; 2];
        let p = rc_closed_form(&problem(c.clone(), &[(-1.0, 1.0); 2], 1.0)).unwrap();
        assert_eq!(p.p, vec![0.5, 0.5]);
        let p = rc_closed_form(&problem(c.clone(), &[(-1.0, 1.0), (-3.0, 3.0)], 2.0)).unwrap();
        assert_eq!(p.p, vec![0.5, 1.5]);
        let pr = problem(c, &[(-1.0, 2.0), (0.5, 3.0)], -0.5);
        assert_eq!(rc_closed_form(&pr).unwrap().p, vec![-1.0, 0.5]);
    }

    #[test]
    fn rc_closed_form_zero_capacity() {
        let pr = problem(vec![CostFunction::Constant; 2], &[(1.0, 1.0); 2], 2.0);
        assert!(matches!(rc_closed_form(&pr), Err(Error::ZeroCapacity)));
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(AllocationProblem::new(vec![], vec![], vec![], 0.0).is_err());
        assert!(AllocationProblem::new(vec![quad(1.0)], vec![1.0], vec![0.0], 0.0).is_err());
        assert!(CostFunction::quadratic(0.0, 1.0).is_err());
        assert!(CostFunction::quadratic(-1.0, 1.0).is_err());
    }
}
