//! Closed-form delay-separation CRB for the symmetric two-band, two-path
//! special case (`sigma_ns^2 = 2`, `f_{s,1} = f_{s,2}`, `N_1 = N_2`, unit
//! equal amplitudes, zero gain phases), plus the carrier-extreme bounds.
//!
//! The CRB is the rational function
//!
//! `C_Δτ(t) = (a + b t) / (c t² + d t + e)`,  `t = cos(2π Δf_c Δτ)`,
//!
//! whose coefficients are polynomials in `(N̄, f_s, Δf_c, γ, γ', γ'')`. The
//! constant coefficient also carries a term in `sin(2π Δf_c Δτ)`: the CRB is
//! not a function of the carrier cosine alone. The upper/lower bounds are the
//! exact extremes of the rational form over the carrier phase; they sit at
//! `t = ±1` up to a correction of order `Δf_c/(N̄ f_s)` from the sine term.
//! The coefficient set was validated symbolically and numerically against
//! the EFIM pipeline; agreement is at machine precision.

use std::f64::consts::{PI, TAU};

use super::dirichlet::dirichlet_gamma;
use crate::error::{Error, Result};

/// Rational-form CRB value and its carrier-extreme bounds, all in ns².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCrb {
    /// `C_Δτ` at the requested separation.
    pub c_delta_tau: f64,
    /// `CRB_up`: maximum of the rational form over the carrier phase
    /// (attained near `t = +1`).
    pub upper: f64,
    /// `CRB_low`: minimum over the carrier phase (attained near `t = -1`).
    pub lower: f64,
}

/// Evaluate the closed form at delay separation `delta_tau_ns` for two bands
/// of `n_bar` subcarriers spaced `spacing_ghz`, with carrier aperture
/// `aperture_ghz`. The noise variance is fixed at 2 by the special case.
pub fn crb_closed_form(
    n_bar: f64,
    spacing_ghz: f64,
    aperture_ghz: f64,
    delta_tau_ns: f64,
) -> Result<ClosedFormCrb> {
    if !(n_bar >= 2.0) {
        return Err(Error::InvalidInput(format!("closed form needs N >= 2, got {n_bar}")));
    }
    if !(aperture_ghz >= 0.0) || !aperture_ghz.is_finite() {
        return Err(Error::InvalidInput("aperture must be nonnegative".into()));
    }
    if !(delta_tau_ns > 0.0) {
        return Err(Error::InvalidInput("delay separation must be positive".into()));
    }

    let g = dirichlet_gamma(n_bar, spacing_ghz, delta_tau_ns)?;
    let (ga, gp, gpp) = (g.value, g.d1, g.d2);
    let n = n_bar;
    let fs2 = spacing_ghz * spacing_ghz;
    let df2 = aperture_ghz * aperture_ghz;
    let pi2 = PI * PI;

    let a = 12.0 * n * n - 6.0 * ga * ga;
    let b = -6.0 * ga * ga;
    let c = 3.0 * ga * (gp * gp - ga * gpp);
    let d = 6.0 * pi2 * df2 * ga.powi(3) + (-2.0 * n.powi(3) * pi2 * fs2 + 2.0 * n * pi2 * fs2
        - 6.0 * gpp)
        * ga
        * ga
        + (-6.0 * n * n * pi2 * df2 + 6.0 * gp * gp) * ga
        + 6.0 * n * n * gpp
        - 6.0 * n * gp * gp;
    let e0 = 4.0 * pi2 * n.powi(5) * fs2
        + pi2 * (12.0 * df2 - 2.0 * fs2 * ga * ga - 4.0 * fs2) * n.powi(3)
        + (-6.0 * pi2 * df2 * ga + 6.0 * gpp) * n * n
        + (pi2 * (2.0 * fs2 - 12.0 * df2) * ga * ga - 6.0 * gp * gp) * n
        + 6.0 * pi2 * df2 * ga.powi(3)
        - 3.0 * ga * ga * gpp
        + 3.0 * ga * gp * gp;
    // odd carrier term: vanishes at t = +-1
    let e1 = -12.0 * PI * n * aperture_ghz * gp * (n - ga);

    let eval = |psi: f64| -> Result<f64> {
        let (s, t) = psi.sin_cos();
        let denom = c * t * t + d * t + e0 + e1 * s;
        if denom <= 0.0 {
            return Err(Error::Inconsistent(format!(
                "closed-form CRB denominator nonpositive at carrier phase {psi}"
            )));
        }
        Ok((a + b * t) / denom)
    };

    let psi = TAU * aperture_ghz * delta_tau_ns;
    let value = eval(psi)?;

    // extremize over the carrier phase: coarse scan plus golden refinement
    const SCAN: usize = 2048;
    let (mut i_max, mut i_min, mut v_max, mut v_min) = (0usize, 0usize, f64::MIN, f64::MAX);
    for i in 0..SCAN {
        let v = eval(TAU * i as f64 / SCAN as f64)?;
        if v > v_max {
            (i_max, v_max) = (i, v);
        }
        if v < v_min {
            (i_min, v_min) = (i, v);
        }
    }
    let refine = |i: usize, sign: f64| -> Result<f64> {
        let step = TAU / SCAN as f64;
        let (mut lo, mut hi) = ((i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
        let inv_phi = 0.618_033_988_749_894_9_f64;
        let (mut x1, mut x2) = (hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo));
        let (mut f1, mut f2) = (sign * eval(x1)?, sign * eval(x2)?);
        for _ in 0..60 {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = sign * eval(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = sign * eval(x2)?;
            }
        }
        Ok(sign * f1.max(f2))
    };
    let upper = refine(i_max, 1.0)?.max(v_max);
    let lower = refine(i_min, -1.0)?.min(v_min);

    for (name, v) in [("C", value), ("upper bound", upper), ("lower bound", lower)] {
        if !v.is_finite() {
            return Err(Error::NonFinite("closed-form CRB"));
        }
        if v <= 0.0 {
            return Err(Error::Inconsistent(format!("nonpositive closed-form {name}: {v}")));
        }
    }
    Ok(ClosedFormCrb { c_delta_tau: value, upper, lower })
}
