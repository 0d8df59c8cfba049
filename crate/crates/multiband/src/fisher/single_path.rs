//! 2x2 FIM over `[tau_1, phi_1]` for the distortion-free single-path model
//! used by the ZZB/ECRB analysis. The entries are closed sums over the
//! frequency grid and do not depend on the parameter values.

use nalgebra::Matrix2;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::MultibandConfig;

/// Build the single-path FIM. Carrier offsets `f'_{c,m}` are taken from the
/// config (first band at zero offset).
pub fn fim_single_path(config: &MultibandConfig, amplitude: f64, noise_var: f64) -> Result<Matrix2<f64>> {
    if !(amplitude > 0.0) {
        return Err(Error::InvalidInput("amplitude must be positive".into()));
    }
    if !(noise_var > 0.0) {
        return Err(Error::InvalidInput("noise variance must be positive".into()));
    }
    let pre = 2.0 * amplitude * amplitude / noise_var;
    let offsets = config.carrier_offsets_ghz();
    let (mut j11, mut j12, mut j22) = (0.0, 0.0, 0.0);
    for (sb, f_off) in config.subbands().iter().zip(offsets) {
        let n = sb.n_sub as f64;
        let fs = sb.spacing_ghz;
        // sum f^2 = N F^2 + fs^2 N(N^2-1)/12 ; sum f = N F ; sum 1 = N
        j11 += 4.0 * PI * PI * (n * f_off * f_off + fs * fs * n * (n * n - 1.0) / 12.0);
        j12 += -2.0 * PI * n * f_off;
        j22 += n;
    }
    Ok(Matrix2::new(pre * j11, pre * j12, pre * j12, pre * j22))
}

/// Conditional delay CRB `[J^{-1}]_{11}` (ns²) of the single-path model.
pub fn single_path_crb_tau(config: &MultibandConfig, amplitude: f64, noise_var: f64) -> Result<f64> {
    let j = fim_single_path(config, amplitude, noise_var)?;
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::NearSingular { cond: f64::INFINITY });
    }
    Ok(j[(1, 1)] / det)
}
