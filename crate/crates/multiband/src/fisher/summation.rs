//! Reference FIM builder: direct summation of every block over the
//! subcarrier grid, entry by entry.
//!
//! The entries depend only on the canonical gains, the relative delays, the
//! grid, the noise variance, and the timing prior; the stored values of the
//! phase and timing offsets never enter (the FIM is independent of them).

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use super::{FimScenario, FisherMatrix, ParamLayout};
use crate::error::{Error, Result};
use crate::model::{subcarrier_indices, CanonicalParams, MultibandConfig, NoiseModel};

/// Build the Fisher information matrix by per-sample summation.
///
/// Callers should ensure `check_identifiability` holds; a non-identifiable
/// configuration yields a singular or near-singular matrix that downstream
/// inversions reject.
pub fn fim_summation(
    config: &MultibandConfig,
    canonical: &CanonicalParams,
    noise: &NoiseModel,
    prior_std_ns: f64,
    scenario: FimScenario,
) -> Result<FisherMatrix> {
    let m_count = config.num_subbands();
    let k_count = canonical.num_paths();
    if canonical.num_subbands() != m_count {
        return Err(Error::InvalidInput("canonical params do not match config".into()));
    }
    if scenario.has_timing() && !(prior_std_ns > 0.0) {
        return Err(Error::InvalidInput(
            "timing-offset prior std must be positive when delta is modeled".into(),
        ));
    }

    let layout = ParamLayout::new(k_count, m_count, scenario);
    let mut j = nalgebra::DMatrix::<f64>::zeros(layout.dim(), layout.dim());
    let pre = 2.0 / noise.variance;
    let gains = &canonical.gains;
    let delays = &canonical.delays_ns;
    let offsets = &canonical.carrier_offsets_ghz;

    let mut phasors = vec![Complex64::new(0.0, 0.0); k_count];
    for (m, sb) in config.subbands().iter().enumerate() {
        let fs = sb.spacing_ghz;
        let phase_col = layout.phase(m);
        let timing_col = layout.timing(m);
        for n in subcarrier_indices(sb.n_sub) {
            let f = offsets[m] + n * fs;
            // e_k = exp(+j 2 pi f tau_k); h = sum_k alpha_k * conj(e_k)
            let mut h = Complex64::new(0.0, 0.0);
            for k in 0..k_count {
                phasors[k] = Complex64::from_polar(1.0, TAU * f * delays[k]);
                h += gains[k] * phasors[k].conj();
            }
            for r in 0..k_count {
                let ar_er = gains[r].conj() * phasors[r];
                for s in 0..k_count {
                    let cross = phasors[r] * phasors[s].conj();
                    if r <= s {
                        j[(layout.tau(r), layout.tau(s))] +=
                            pre * 4.0 * PI * PI * f * f * (gains[r].conj() * gains[s] * cross).re;
                        let plain = (cross).re;
                        j[(layout.alpha_re(r), layout.alpha_re(s))] += pre * plain;
                        j[(layout.alpha_im(r), layout.alpha_im(s))] += pre * plain;
                    }
                    let ac = gains[r].conj() * cross;
                    j[(layout.tau(r), layout.alpha_re(s))] += -pre * TAU * f * ac.im;
                    j[(layout.tau(r), layout.alpha_im(s))] += -pre * TAU * f * ac.re;
                    j[(layout.alpha_re(r), layout.alpha_im(s))] += -pre * cross.im;
                }
                let w = ar_er * h; // conj(alpha_r) sum_k alpha_k e^{j2pif(tau_r - tau_k)}
                let v = phasors[r] * h;
                if let Some(col) = phase_col {
                    j[(layout.tau(r), col)] += -pre * TAU * f * w.re;
                    j[(layout.alpha_re(r), col)] += -pre * v.im;
                    j[(layout.alpha_im(r), col)] += pre * v.re;
                }
                if let Some(col) = timing_col {
                    j[(layout.tau(r), col)] += pre * 4.0 * PI * PI * n * fs * f * w.re;
                    j[(layout.alpha_re(r), col)] += pre * TAU * n * fs * v.im;
                    j[(layout.alpha_im(r), col)] += -pre * TAU * n * fs * v.re;
                }
            }
            let h2 = h.norm_sqr();
            if let Some(col) = phase_col {
                j[(col, col)] += pre * h2;
                if let Some(dcol) = timing_col {
                    j[(col, dcol)] += -pre * TAU * n * fs * h2;
                }
            }
            if let Some(col) = timing_col {
                j[(col, col)] += pre * 4.0 * PI * PI * n * n * fs * fs * h2;
            }
        }
    }

    if scenario.has_timing() {
        let w = 1.0 / (prior_std_ns * prior_std_ns);
        for m in 0..m_count {
            let col = layout.timing(m).expect("timing block present");
            j[(col, col)] += w;
        }
    }

    // mirror the upper triangle
    for row in 0..layout.dim() {
        for col in (row + 1)..layout.dim() {
            j[(col, row)] = j[(row, col)];
        }
    }

    FisherMatrix::from_parts(j, layout)
}
