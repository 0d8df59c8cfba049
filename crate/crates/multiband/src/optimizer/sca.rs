//! Successive convex approximation of `C_Δτ(xi)` under the spectrum
//! polytope: proximal-linear surrogate, projection subproblem, Armijo step.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

use super::constraints::ConstraintSet;
use super::gradient::CrbObjective;
use super::qp::{project_polytope, QpSolution};
use super::SolverOptions;

/// Minimizer of the surrogate
/// `f(xi_t) + g^T (xi - xi_t) + omega ||xi - xi_t||^2` over the polytope:
/// the projection of `xi_t - g/(2 omega)`. The projection polytope also
/// carries the `N_m >= 2` floor.
pub fn sca_subproblem(
    xi_t: &DVector<f64>,
    gradient: &DVector<f64>,
    omega: f64,
    cs: &ConstraintSet,
    qp_tolerance: f64,
) -> Result<QpSolution> {
    let (a, b) = cs.linear_system(true);
    let z = xi_t - gradient / (2.0 * omega);
    project_polytope(&z, &a, &b, xi_t, qp_tolerance)
}

/// Armijo backtracking outcome.
#[derive(Debug, Clone, Copy)]
pub struct ArmijoStep {
    pub sigma: f64,
    /// False when the floor step was accepted without sufficient decrease.
    pub sufficient_decrease: bool,
    pub evaluations: usize,
}

/// Largest `sigma` in `{1, 1/2, ...}` (down to the floor) with
/// `f(xi + sigma d) <= f(xi) + c1 sigma g^T d`, `d = xi_bar - xi_t`.
pub fn armijo_step(
    objective: &CrbObjective,
    xi_t: &DVector<f64>,
    xi_bar: &DVector<f64>,
    gradient: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<ArmijoStep> {
    let d = xi_bar - xi_t;
    if d.norm() == 0.0 {
        return Ok(ArmijoStep { sigma: 0.0, sufficient_decrease: true, evaluations: 0 });
    }
    let f0 = objective.value(xi_t)?;
    let slope = gradient.dot(&d);
    let mut sigma = 1.0_f64;
    let mut evaluations = 1usize;
    loop {
        let trial = xi_t + sigma * &d;
        evaluations += 1;
        if let Ok(f) = objective.value(&trial) {
            if f <= f0 + opts.armijo_c1 * sigma * slope {
                return Ok(ArmijoStep { sigma, sufficient_decrease: true, evaluations });
            }
        }
        let next = sigma * opts.armijo_shrink;
        if next < opts.armijo_min_step {
            return Ok(ArmijoStep { sigma, sufficient_decrease: false, evaluations });
        }
        sigma = next;
    }
}

/// One SCA run.
#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub xi: DVector<f64>,
    /// Objective value after each accepted step (starting point first).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// `||xi_bar - xi||` at exit: the surrogate's stationarity measure
    /// (projected-gradient norm up to the factor `2 omega`).
    pub stationarity: f64,
    /// Number of Armijo floor hits (steps without certified decrease).
    pub floor_hits: usize,
}

/// Iterate surrogate construction / projection / Armijo until the update
/// norm `||xi^{t+1} - xi^t||` drops below `epsilon` or the iteration budget
/// is spent.
pub fn sca_minimize(
    objective: &CrbObjective,
    xi0: &DVector<f64>,
    cs: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<ScaOutcome> {
    let mut xi = xi0.clone();
    let mut trace = vec![objective.value(&xi)?];
    let mut stationarity = f64::INFINITY;
    let mut floor_hits = 0usize;
    let mut iterations = 0usize;
    for _ in 0..opts.max_sca_iterations {
        let g = objective.gradient(&xi)?;
        let sub = sca_subproblem(&xi, &g, opts.omega, cs, opts.qp_tolerance)?;
        let dir = &sub.point - &xi;
        stationarity = dir.norm();
        if stationarity <= opts.epsilon {
            break;
        }
        let step = armijo_step(objective, &xi, &sub.point, &g, opts)?;
        if !step.sufficient_decrease {
            floor_hits += 1;
        }
        xi += step.sigma * &dir;
        iterations += 1;
        let prev = *trace.last().expect("trace nonempty");
        let cur = objective.value(&xi)?;
        trace.push(cur);
        debug_assert!(cs.max_violation(&xi)? <= 1e-9);
        if step.sigma * stationarity <= opts.epsilon {
            break;
        }
        // machine-level stall: the Armijo endgame cannot certify further
        // decrease worth more than roundoff
        if prev - cur <= 1e-12 * prev.abs() {
            break;
        }
    }
    Ok(ScaOutcome { xi, objective_trace: trace, iterations, stationarity, floor_hits })
}

/// Brute-force reference for the projection subproblem: enumerate every
/// active set, keep the feasible candidate closest to the query point.
/// Exponential in the number of rows; test-sized instances only.
pub fn project_polytope_bruteforce(
    z: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<DVector<f64>> {
    let rows = a.nrows();
    assert!(rows <= 20, "brute-force enumeration is exponential in rows");
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows) {
        let active: Vec<usize> = (0..rows).filter(|j| mask & (1 << j) != 0).collect();
        let x = if active.is_empty() {
            z.clone()
        } else {
            let aw = DMatrix::from_fn(active.len(), a.ncols(), |r, c| a[(active[r], c)]);
            let bw = DVector::from_fn(active.len(), |r, _| b[active[r]]);
            let gram = &aw * aw.transpose();
            let rhs = &aw * z - bw;
            match gram.svd(true, true).solve(&rhs, 1e-12) {
                Ok(lambda) => z - aw.transpose() * lambda,
                Err(_) => continue,
            }
        };
        let feasible = (a * &x - b).iter().all(|v| *v <= 1e-9);
        if feasible {
            let dist = (&x - z).norm();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, x));
            }
        }
    }
    best.map(|(_, x)| x)
}
