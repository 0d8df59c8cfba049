//! Fast two-path FIM via the Dirichlet kernel: every block is a closed
//! trigonometric form in `gamma`, `gamma'`, `gamma''` and the carrier phase
//! `psi_m = 2π f'_{c,m} Δτ` — no per-subcarrier loops. Subcarrier counts are
//! accepted as reals so the optimizer can relax them.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use super::dirichlet::dirichlet_gamma;
use super::{FimScenario, FisherMatrix, ParamLayout};
use crate::error::{Error, Result};
use crate::model::{CanonicalParams, MultibandConfig, NoiseModel};

/// One subband with the integer subcarrier count relaxed to a real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedBand {
    /// Canonical carrier offset `f'_{c,m}` in GHz (first band 0).
    pub carrier_offset_ghz: f64,
    /// Subcarrier spacing in GHz.
    pub spacing_ghz: f64,
    /// Subcarrier count, real-valued, `>= 2`.
    pub n_sub: f64,
}

/// Closed-form exponential moments of one band at a signed delay difference:
/// `S_p = sum_n w_p(n) e^{j 2π f_{m,n} Δ}` for the weights needed by the FIM.
#[derive(Debug, Clone, Copy)]
struct Moments {
    s0: Complex64,  // sum e^{j2πfΔ}
    sn: Complex64,  // sum n e^{j2πfΔ}
    sn2: Complex64, // sum n² e^{j2πfΔ}
    sf: Complex64,  // sum f e^{j2πfΔ}
    sf2: Complex64, // sum f² e^{j2πfΔ}
    snf: Complex64, // sum n f e^{j2πfΔ}
}

impl Moments {
    fn conjugate(&self) -> Self {
        Self {
            s0: self.s0.conj(),
            sn: self.sn.conj(),
            sn2: self.sn2.conj(),
            sf: self.sf.conj(),
            sf2: self.sf2.conj(),
            snf: self.snf.conj(),
        }
    }
}

fn moments(band: &RelaxedBand, delta_ns: f64) -> Result<Moments> {
    let (f_off, fs, n) = (band.carrier_offset_ghz, band.spacing_ghz, band.n_sub);
    let (s0, sn, sn2);
    if delta_ns == 0.0 {
        s0 = Complex64::new(n, 0.0);
        sn = Complex64::new(0.0, 0.0);
        sn2 = Complex64::new(n * (n * n - 1.0) / 12.0, 0.0);
    } else {
        let g = dirichlet_gamma(n, fs, delta_ns)?;
        let phase = Complex64::from_polar(1.0, TAU * f_off * delta_ns);
        s0 = phase * g.value;
        sn = phase * Complex64::new(0.0, -g.d1 / (TAU * fs));
        sn2 = phase * (-g.d2 / (4.0 * PI * PI * fs * fs));
    }
    Ok(Moments {
        s0,
        sn,
        sn2,
        sf: f_off * s0 + fs * sn,
        sf2: f_off * f_off * s0 + 2.0 * f_off * fs * sn + fs * fs * sn2,
        snf: f_off * sn + fs * sn2,
    })
}

/// Compact FIM over relaxed bands for exactly two paths with gains
/// `alpha'_1, alpha'_2` separated by `delta_tau_ns`.
pub fn fim_compact_relaxed(
    bands: &[RelaxedBand],
    gains: [Complex64; 2],
    delta_tau_ns: f64,
    noise: &NoiseModel,
    prior_std_ns: f64,
    scenario: FimScenario,
) -> Result<FisherMatrix> {
    if bands.is_empty() {
        return Err(Error::InvalidInput("at least one band required".into()));
    }
    for (m, b) in bands.iter().enumerate() {
        if !(b.n_sub >= 2.0) || !(b.spacing_ghz > 0.0) || !b.carrier_offset_ghz.is_finite() {
            return Err(Error::InvalidInput(format!("band {m}: invalid relaxed parameters")));
        }
    }
    if scenario.has_timing() && !(prior_std_ns > 0.0) {
        return Err(Error::InvalidInput(
            "timing-offset prior std must be positive when delta is modeled".into(),
        ));
    }

    let m_count = bands.len();
    let layout = ParamLayout::new(2, m_count, scenario);
    let mut j = nalgebra::DMatrix::<f64>::zeros(layout.dim(), layout.dim());
    let pre = 2.0 / noise.variance;

    for (m, band) in bands.iter().enumerate() {
        let fs = band.spacing_ghz;
        let zero = moments(band, 0.0)?;
        let plus = moments(band, delta_tau_ns)?; // tau_2 - tau_1
        let minus = plus.conjugate(); // gamma even, gamma' odd: exact mirror
        // mom[r][s] holds the moments at delay difference tau_r - tau_s
        let mom = [[&zero, &minus], [&plus, &zero]];

        for r in 0..2 {
            for s in 0..2 {
                let ms = mom[r][s];
                if r <= s {
                    j[(layout.tau(r), layout.tau(s))] +=
                        pre * 4.0 * PI * PI * (gains[r].conj() * gains[s] * ms.sf2).re;
                    j[(layout.alpha_re(r), layout.alpha_re(s))] += pre * ms.s0.re;
                    j[(layout.alpha_im(r), layout.alpha_im(s))] += pre * ms.s0.re;
                }
                let a_sf = gains[r].conj() * ms.sf;
                j[(layout.tau(r), layout.alpha_re(s))] += -pre * TAU * a_sf.im;
                j[(layout.tau(r), layout.alpha_im(s))] += -pre * TAU * a_sf.re;
                j[(layout.alpha_re(r), layout.alpha_im(s))] += -pre * ms.s0.im;
            }
            // sums over paths k of alpha_k * S(tau_r - tau_k)
            let (mut v0, mut vn, mut vf, mut vnf) = (
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            );
            for k in 0..2 {
                let mk = mom[r][k];
                v0 += gains[k] * mk.s0;
                vn += gains[k] * mk.sn;
                vf += gains[k] * mk.sf;
                vnf += gains[k] * mk.snf;
            }
            if let Some(col) = layout.phase(m) {
                j[(layout.tau(r), col)] += -pre * TAU * (gains[r].conj() * vf).re;
                j[(layout.alpha_re(r), col)] += -pre * v0.im;
                j[(layout.alpha_im(r), col)] += pre * v0.re;
            }
            if let Some(col) = layout.timing(m) {
                j[(layout.tau(r), col)] += pre * 4.0 * PI * PI * fs * (gains[r].conj() * vnf).re;
                j[(layout.alpha_re(r), col)] += pre * TAU * fs * vn.im;
                j[(layout.alpha_im(r), col)] += -pre * TAU * fs * vn.re;
            }
        }

        // |h|^2 sums: sum_{k,l} conj(alpha_l) alpha_k S(tau_l - tau_k)
        let (mut h0, mut hn, mut hn2) = (0.0, 0.0, 0.0);
        for l in 0..2 {
            for k in 0..2 {
                let mlk = mom[l][k];
                h0 += (gains[l].conj() * gains[k] * mlk.s0).re;
                hn += (gains[l].conj() * gains[k] * mlk.sn).re;
                hn2 += (gains[l].conj() * gains[k] * mlk.sn2).re;
            }
        }
        if let Some(col) = layout.phase(m) {
            j[(col, col)] += pre * h0;
            if let Some(dcol) = layout.timing(m) {
                j[(col, dcol)] += -pre * TAU * fs * hn;
            }
        }
        if let Some(col) = layout.timing(m) {
            j[(col, col)] += pre * 4.0 * PI * PI * fs * fs * hn2;
        }
    }

    if scenario.has_timing() {
        let w = 1.0 / (prior_std_ns * prior_std_ns);
        for m in 0..m_count {
            let col = layout.timing(m).expect("timing block present");
            j[(col, col)] += w;
        }
    }

    for row in 0..layout.dim() {
        for col in (row + 1)..layout.dim() {
            j[(col, row)] = j[(row, col)];
        }
    }

    FisherMatrix::from_parts(j, layout)
}

/// Compact FIM for a validated two-path configuration.
pub fn fim_compact_two_path(
    config: &MultibandConfig,
    canonical: &CanonicalParams,
    noise: &NoiseModel,
    prior_std_ns: f64,
    scenario: FimScenario,
) -> Result<FisherMatrix> {
    if canonical.num_paths() != 2 {
        return Err(Error::InvalidInput(format!(
            "compact FIM is defined for K=2, got K={}",
            canonical.num_paths()
        )));
    }
    if canonical.num_subbands() != config.num_subbands() {
        return Err(Error::InvalidInput("canonical params do not match config".into()));
    }
    let bands: Vec<RelaxedBand> = config
        .subbands()
        .iter()
        .zip(&canonical.carrier_offsets_ghz)
        .map(|(sb, &f_off)| RelaxedBand {
            carrier_offset_ghz: f_off,
            spacing_ghz: sb.spacing_ghz,
            n_sub: sb.n_sub as f64,
        })
        .collect();
    let dtau = canonical.delays_ns[1] - canonical.delays_ns[0];
    fim_compact_relaxed(
        &bands,
        [canonical.gains[0], canonical.gains[1]],
        dtau,
        noise,
        prior_std_ns,
        scenario,
    )
}
