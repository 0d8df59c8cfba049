//! Euclidean projection onto a polytope `{x : A x <= b}` by a primal
//! active-set method. The SCA subproblem
//! `min g^T(x - z0) + omega ||x - z0||^2` reduces to projecting
//! `z = z0 - g/(2 omega)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub point: DVector<f64>,
    /// Working set at the solution (row indices of `A`).
    pub active: Vec<usize>,
    /// Max of primal violation, stationarity residual, and multiplier
    /// negativity at the returned point.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Least-squares multipliers and equality-projected point for a working set:
/// `x = z - A_W^T lambda`, `lambda = (A_W A_W^T)^+ (A_W z - b_W)`.
fn project_equality(
    z: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    working: &[usize],
) -> (DVector<f64>, DVector<f64>) {
    if working.is_empty() {
        return (z.clone(), DVector::zeros(0));
    }
    let aw = DMatrix::from_fn(working.len(), a.ncols(), |r, c| a[(working[r], c)]);
    let bw = DVector::from_fn(working.len(), |r, _| b[working[r]]);
    let gram = &aw * aw.transpose();
    let rhs = &aw * z - bw;
    let svd = gram.svd(true, true);
    let lambda = svd.solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(working.len()));
    let x = z - aw.transpose() * &lambda;
    (x, lambda)
}

/// Project `z` onto `{x : A x <= b}`, starting from the feasible `x0`.
pub fn project_polytope(
    z: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    tolerance: f64,
) -> Result<QpSolution> {
    let rows = a.nrows();
    // normalized rows keep the Gram systems well scaled
    let mut an = a.clone();
    let mut bn = b.clone();
    for j in 0..rows {
        let norm = an.row(j).norm();
        if norm > 0.0 {
            an.row_mut(j).scale_mut(1.0 / norm);
            bn[j] /= norm;
        }
    }
    let (a, b) = (&an, &bn);
    let feas_tol = tolerance.max(1e-13);
    let start_violation = (a * x0 - b).iter().cloned().fold(0.0, f64::max);
    if start_violation > 1e-9 {
        let violated = (a * x0 - b)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 1e-9)
            .map(|(j, _)| j)
            .collect();
        return Err(Error::Infeasible(violated));
    }

    let mut x = x0.clone();
    let mut working: Vec<usize> = (0..rows)
        .filter(|&j| (a.row(j) * &x)[0] - b[j] >= -feas_tol)
        .collect();
    let max_iter = 50 * (rows + 1);
    let mut drops_left = 10 * (rows + 1);

    for iter in 0..max_iter {
        let (x_eq, lambda) = project_equality(z, a, b, &working);
        let p = &x_eq - &x;
        if p.norm() <= feas_tol {
            // stationary on the working set: check multipliers. The drop
            // threshold scales with the multipliers themselves: a distant
            // prox point inflates least-squares noise far beyond feas_tol.
            let drop_tol = feas_tol + 1e-12 * lambda.amax();
            if drops_left > 0 {
                if let Some((drop_pos, _)) = lambda
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| **l < -drop_tol)
                    .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                {
                    working.remove(drop_pos);
                    drops_left -= 1;
                    continue;
                }
            }
            // polish: least-squares roundoff from a distant prox point can
            // leave violations of order ||z|| * eps; re-project them out
            for _ in 0..4 {
                let resid = a * &x - b;
                let viol: Vec<usize> =
                    (0..rows).filter(|&j| resid[j] > 0.0).collect();
                if viol.is_empty() {
                    break;
                }
                let av = DMatrix::from_fn(viol.len(), a.ncols(), |r, c| a[(viol[r], c)]);
                let rv = DVector::from_fn(viol.len(), |r, _| resid[viol[r]]);
                let gram = &av * av.transpose();
                if let Ok(corr) = gram.svd(true, true).solve(&rv, 1e-12) {
                    x -= av.transpose() * corr;
                } else {
                    break;
                }
            }
            let primal = (a * &x - b).iter().cloned().fold(0.0_f64, f64::max);
            // stationarity: x - z + A_W^T lambda = 0 given x = z - A_W^T lambda,
            // reported relative to the projection distance
            let mut grad = &x - z;
            for (pos, &j) in working.iter().enumerate() {
                grad += a.row(j).transpose() * lambda[pos];
            }
            let stationarity = grad.norm() / (1.0 + (&x - z).norm());
            let neg_mult = lambda.iter().cloned().fold(0.0_f64, |acc, l| acc.max(-l));
            let kkt = primal.max(stationarity).max(neg_mult);
            return Ok(QpSolution { point: x, active: working, kkt_residual: kkt, iterations: iter });
        }
        // longest feasible step along p
        let mut alpha = 1.0_f64;
        let mut blocking = None;
        for j in 0..rows {
            if working.contains(&j) {
                continue;
            }
            let ap = (a.row(j) * &p)[0];
            if ap > feas_tol {
                let slack = b[j] - (a.row(j) * &x)[0];
                let step = (slack / ap).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(j);
                }
            }
        }
        x += alpha * &p;
        if let Some(j) = blocking {
            if alpha < 1.0 {
                working.push(j);
                working.sort_unstable();
            }
        }
    }
    Err(Error::Inconsistent("projection active-set iteration limit reached".into()))
}
