//! Spectrum constraint set: per-subband frequency boxes, non-overlap, and
//! the total bandwidth budget. All constraints are linear in the decision
//! vector `xi = [f_c,1..M, N_1..M]` because `B_m = N_m f_{s,m}` with the
//! spacings fixed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Boxes `[l_m, u_m]`, fixed spacings, and the bandwidth budget `W` (GHz).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub lower_ghz: Vec<f64>,
    pub upper_ghz: Vec<f64>,
    pub spacing_ghz: Vec<f64>,
    pub budget_ghz: f64,
}

impl ConstraintSet {
    pub fn new(
        lower_ghz: Vec<f64>,
        upper_ghz: Vec<f64>,
        spacing_ghz: Vec<f64>,
        budget_ghz: f64,
    ) -> Result<Self> {
        let m = lower_ghz.len();
        if m == 0 || upper_ghz.len() != m || spacing_ghz.len() != m {
            return Err(Error::InvalidInput("constraint arrays must share a nonzero length".into()));
        }
        if !(budget_ghz > 0.0) {
            return Err(Error::InvalidInput("bandwidth budget must be positive".into()));
        }
        for i in 0..m {
            if !(lower_ghz[i] < upper_ghz[i]) {
                return Err(Error::InvalidInput(format!(
                    "box {i} inverted: [{}, {}]",
                    lower_ghz[i], upper_ghz[i]
                )));
            }
            if !(spacing_ghz[i] > 0.0) {
                return Err(Error::InvalidInput(format!("box {i}: spacing must be positive")));
            }
            if upper_ghz[i] - lower_ghz[i] < 2.0 * spacing_ghz[i] {
                return Err(Error::InvalidInput(format!(
                    "box {i} narrower than two subcarriers"
                )));
            }
            if i > 0 && lower_ghz[i] < lower_ghz[i - 1] {
                return Err(Error::InvalidInput("box lower bounds must be nondecreasing".into()));
            }
        }
        Ok(Self { lower_ghz, upper_ghz, spacing_ghz, budget_ghz })
    }

    pub fn num_subbands(&self) -> usize {
        self.lower_ghz.len()
    }

    /// Number of spectrum constraints: `M` lower edges, `M` upper edges,
    /// `M-1` overlaps, one budget.
    pub fn num_constraints(&self) -> usize {
        3 * self.num_subbands()
    }

    /// Residuals `g_j(xi) <= 0` in the order: lower edges, upper edges,
    /// overlaps, budget. A nonpositive residual means satisfied.
    pub fn constraints_eval(&self, xi: &DVector<f64>) -> Result<Vec<f64>> {
        let m = self.num_subbands();
        if xi.len() != 2 * m {
            return Err(Error::InvalidInput(format!(
                "decision vector length {} does not match 2M = {}",
                xi.len(),
                2 * m
            )));
        }
        let half_b = |i: usize| 0.5 * self.spacing_ghz[i] * xi[m + i];
        let mut g = Vec::with_capacity(self.num_constraints());
        for i in 0..m {
            g.push(self.lower_ghz[i] - (xi[i] - half_b(i)));
        }
        for i in 0..m {
            g.push(xi[i] + half_b(i) - self.upper_ghz[i]);
        }
        for i in 0..m - 1 {
            g.push(xi[i] + half_b(i) - (xi[i + 1] - half_b(i + 1)));
        }
        g.push((0..m).map(|i| self.spacing_ghz[i] * xi[m + i]).sum::<f64>() - self.budget_ghz);
        Ok(g)
    }

    /// The same constraints as a linear system `A xi <= b`. With
    /// `with_count_floor`, rows `-N_m <= -2` are appended so the projection
    /// subproblem also honors the decision-vector invariant `N_m >= 2`.
    pub fn linear_system(&self, with_count_floor: bool) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.num_subbands();
        let rows = self.num_constraints() + if with_count_floor { m } else { 0 };
        let mut a = DMatrix::<f64>::zeros(rows, 2 * m);
        let mut b = DVector::<f64>::zeros(rows);
        for i in 0..m {
            // l_i - f_c,i + (f_s,i/2) N_i <= 0
            a[(i, i)] = -1.0;
            a[(i, m + i)] = 0.5 * self.spacing_ghz[i];
            b[i] = -self.lower_ghz[i];
            // f_c,i + (f_s,i/2) N_i <= u_i
            a[(m + i, i)] = 1.0;
            a[(m + i, m + i)] = 0.5 * self.spacing_ghz[i];
            b[m + i] = self.upper_ghz[i];
        }
        for i in 0..m - 1 {
            let r = 2 * m + i;
            a[(r, i)] = 1.0;
            a[(r, i + 1)] = -1.0;
            a[(r, m + i)] = 0.5 * self.spacing_ghz[i];
            a[(r, m + i + 1)] = 0.5 * self.spacing_ghz[i + 1];
        }
        let r = 3 * m - 1;
        for i in 0..m {
            a[(r, m + i)] = self.spacing_ghz[i];
        }
        b[r] = self.budget_ghz;
        if with_count_floor {
            for i in 0..m {
                a[(3 * m + i, m + i)] = -1.0;
                b[3 * m + i] = -2.0;
            }
        }
        (a, b)
    }

    /// Worst spectrum-constraint violation (0 when feasible).
    pub fn max_violation(&self, xi: &DVector<f64>) -> Result<f64> {
        Ok(self.constraints_eval(xi)?.into_iter().fold(0.0, f64::max))
    }

    /// Indices of violated constraints at `xi` beyond `tol`.
    pub fn violated(&self, xi: &DVector<f64>, tol: f64) -> Result<Vec<usize>> {
        Ok(self
            .constraints_eval(xi)?
            .into_iter()
            .enumerate()
            .filter(|(_, g)| *g > tol)
            .map(|(j, _)| j)
            .collect())
    }

    /// Deterministic feasible start: split the budget evenly (clipped to the
    /// box widths) and pack bands left to right, shrinking geometrically if
    /// the packing overflows a box.
    pub fn even_split_start(&self) -> Result<DVector<f64>> {
        let m = self.num_subbands();
        let mut scale = 1.0;
        for _ in 0..60 {
            let mut xi = DVector::<f64>::zeros(2 * m);
            let mut ok = true;
            let mut prev_right = f64::NEG_INFINITY;
            for i in 0..m {
                let width = self.upper_ghz[i] - self.lower_ghz[i];
                let b = (scale * self.budget_ghz / m as f64)
                    .min(0.98 * width)
                    .max(2.0 * self.spacing_ghz[i]);
                let n = b / self.spacing_ghz[i];
                let center = (self.lower_ghz[i] + 0.5 * b).max(prev_right + 0.5 * b);
                if center + 0.5 * b > self.upper_ghz[i] + 1e-15 || n < 2.0 {
                    ok = false;
                    break;
                }
                xi[i] = center;
                xi[m + i] = n;
                prev_right = center + 0.5 * b;
            }
            if ok && self.max_violation(&xi)? <= 1e-12 {
                return Ok(xi);
            }
            scale *= 0.7;
        }
        // reconstruct the diagnostic from the most generous attempt
        let mut xi = DVector::<f64>::zeros(2 * m);
        for i in 0..m {
            xi[i] = 0.5 * (self.lower_ghz[i] + self.upper_ghz[i]);
            xi[m + i] = 2.0;
        }
        Err(Error::Infeasible(self.violated(&xi, 1e-12)?))
    }
}
