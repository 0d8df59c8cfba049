//! Equivalent FIM (Schur complement) and the bounds read off it: the CRB for
//! the delay separation and the delay error bound.

use nalgebra::DMatrix;

use super::{condition_estimate, guarded_inverse, guarded_solve, FisherMatrix, CONDITION_LIMIT};
use crate::error::{Error, Result};

/// Schur complement onto the leading `q x q` block: for
/// `J = [[A, B], [B^T, C]]` returns `A - B C^{-1} B^T`.
///
/// `q = dim` returns `J` itself (empty Schur block); a singular trailing
/// block is a typed error, never NaN propagation.
pub fn efim(j: &DMatrix<f64>, q: usize) -> Result<DMatrix<f64>> {
    let dim = j.nrows();
    if j.ncols() != dim || q == 0 || q > dim {
        return Err(Error::InvalidInput(format!(
            "EFIM block size {q} invalid for a {dim}x{} matrix",
            j.ncols()
        )));
    }
    if q == dim {
        return Ok(j.clone());
    }
    let a = j.view((0, 0), (q, q)).into_owned();
    let b = j.view((0, q), (q, dim - q)).into_owned();
    let c = j.view((q, q), (dim - q, dim - q)).into_owned();
    let x = guarded_solve(&c, &b.transpose())?;
    Ok(a - b * x)
}

/// CRB for the delay separation `C_Δτ` (ns²) of a two-path FIM, computed
/// through the 2x2 EFIM: `u^T J_e^{-1} u` with `u = [1, -1]`.
pub fn crb_delay_separation(fim: &FisherMatrix) -> Result<f64> {
    if fim.num_paths() != 2 {
        return Err(Error::InvalidInput(format!(
            "delay-separation CRB needs K=2, got K={}",
            fim.num_paths()
        )));
    }
    let je = efim(fim.matrix(), 2)?;
    let det = je[(0, 0)] * je[(1, 1)] - je[(0, 1)] * je[(1, 0)];
    let cond = condition_estimate(&je);
    if !cond.is_finite() || cond > CONDITION_LIMIT || det == 0.0 {
        return Err(Error::NearSingular { cond });
    }
    // u^T J_e^{-1} u for u = [1, -1]
    let c = (je[(1, 1)] + je[(0, 0)] + je[(0, 1)] + je[(1, 0)]) / det;
    if !c.is_finite() {
        return Err(Error::NonFinite("delay-separation CRB"));
    }
    if c <= 0.0 {
        return Err(Error::Inconsistent(format!("nonpositive delay-separation CRB {c}")));
    }
    Ok(c)
}

/// Delay error bound (ns): root of the trace of the leading `K x K` block of
/// the inverse FIM, computed through the EFIM of the delay block.
pub fn deb(fim: &FisherMatrix) -> Result<f64> {
    let k = fim.num_paths();
    let je = efim(fim.matrix(), k)?;
    let inv = guarded_inverse(&je)?;
    let tr = inv.trace();
    if !tr.is_finite() {
        return Err(Error::NonFinite("DEB trace"));
    }
    if tr <= 0.0 {
        return Err(Error::Inconsistent(format!("nonpositive DEB trace {tr}")));
    }
    Ok(tr.sqrt())
}
