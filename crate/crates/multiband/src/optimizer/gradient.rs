//! The SCA objective `C_Δτ(xi)` at a fixed delay separation and its exact
//! gradient `g_i = -v^T (∂J/∂xi_i) v` with `v = J^{-1} u`, `u = [1,-1,0,..]`.
//! Only the innermost FIM derivative is numeric (central differences of the
//! compact FIM); the sandwich structure itself is exact.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{
    crb_delay_separation, fim_compact_relaxed, FimScenario, FisherMatrix, RelaxedBand,
};
use crate::model::NoiseModel;

use super::constraints::ConstraintSet;

/// `C_Δτ` as a function of the decision vector, with the delay separation,
/// path gains, and noise model held fixed.
#[derive(Debug, Clone)]
pub struct CrbObjective {
    pub spacing_ghz: Vec<f64>,
    pub gains: [Complex64; 2],
    pub noise_variance: f64,
    pub prior_std_ns: f64,
    pub delta_tau_ns: f64,
}

impl CrbObjective {
    pub fn new(cs: &ConstraintSet, gains: [Complex64; 2], noise_variance: f64, prior_std_ns: f64, delta_tau_ns: f64) -> Self {
        Self {
            spacing_ghz: cs.spacing_ghz.clone(),
            gains,
            noise_variance,
            prior_std_ns,
            delta_tau_ns,
        }
    }

    pub fn num_subbands(&self) -> usize {
        self.spacing_ghz.len()
    }

    /// Canonical relaxed bands at `xi` (offsets relative to the first carrier).
    pub fn bands(&self, xi: &DVector<f64>) -> Result<Vec<RelaxedBand>> {
        let m = self.num_subbands();
        if xi.len() != 2 * m {
            return Err(Error::InvalidInput(format!(
                "decision vector length {} does not match 2M = {}",
                xi.len(),
                2 * m
            )));
        }
        Ok((0..m)
            .map(|i| RelaxedBand {
                carrier_offset_ghz: xi[i] - xi[0],
                spacing_ghz: self.spacing_ghz[i],
                n_sub: xi[m + i],
            })
            .collect())
    }

    fn fim(&self, xi: &DVector<f64>) -> Result<FisherMatrix> {
        fim_compact_relaxed(
            &self.bands(xi)?,
            self.gains,
            self.delta_tau_ns,
            &NoiseModel::new(self.noise_variance)?,
            self.prior_std_ns,
            FimScenario::Full,
        )
    }

    /// `C_Δτ(xi)` in ns².
    pub fn value(&self, xi: &DVector<f64>) -> Result<f64> {
        crb_delay_separation(&self.fim(xi)?)
    }

    /// Exact gradient via `dC = -v^T dJ v`; `dJ/dxi_i` by central differences
    /// with relative step `1e-6 * max(|xi_i|, 1)`.
    pub fn gradient(&self, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let j = self.fim(xi)?;
        let dim = j.dim();
        let mut u = DMatrix::<f64>::zeros(dim, 1);
        u[(0, 0)] = 1.0;
        u[(1, 0)] = -1.0;
        let v = crate::fisher::guarded_solve(j.matrix(), &u)?;
        let m = self.num_subbands();
        let mut g = DVector::<f64>::zeros(xi.len());
        for i in 0..xi.len() {
            let h = 1e-6 * xi[i].abs().max(1.0);
            let mut plus = xi.clone();
            plus[i] += h;
            let mut minus = xi.clone();
            minus[i] -= h;
            // counts sitting on the N >= 2 floor get a forward difference
            let dj = if i >= m && minus[i] < 2.0 {
                (self.fim(&plus)?.matrix() - j.matrix()) / h
            } else {
                (self.fim(&plus)?.matrix() - self.fim(&minus)?.matrix()) / (2.0 * h)
            };
            g[i] = -(v.transpose() * dj * &v)[(0, 0)];
        }
        Ok(g)
    }
}
