//! Ziv-Zakai bound for single-path delay estimation, the expected CRB, and
//! the MAP grid-search Monte Carlo estimator the bounds are checked against.
//!
//! The bound follows the binary-hypothesis construction: the minimum
//! detection error probability `P_min` enters a valley-filled integral over
//! the delay offset, with an inner maximization over the phase offset.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fisher::{dirichlet_gamma, single_path_crb_tau};
use crate::model::{subcarrier_indices, MultibandConfig};

/// Single-path ZZB scenario: uniform priors `tau_1 ~ U[0, D]`,
/// `phi_1 ~ U[0, 2π]`.
#[derive(Debug, Clone)]
pub struct ZzbSpec {
    /// Subband layout; carrier offsets `f'_{c,m}` are derived from it.
    pub config: MultibandConfig,
    /// Path amplitude `a_1`.
    pub amplitude: f64,
    /// Noise variance per complex sample.
    pub noise_variance: f64,
    /// Delay prior width `D` in ns.
    pub prior_width_ns: f64,
    /// Delay-offset grid size for the outer integral.
    pub etau_grid: usize,
    /// Phase-offset grid size for the inner maximization.
    pub ephi_grid: usize,
}

impl ZzbSpec {
    pub fn new(config: MultibandConfig, amplitude: f64, noise_variance: f64, prior_width_ns: f64) -> Result<Self> {
        let spec = Self {
            config,
            amplitude,
            noise_variance,
            prior_width_ns,
            etau_grid: 400,
            ephi_grid: 256,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) {
            return Err(Error::InvalidInput("amplitude must be positive".into()));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::InvalidInput("noise variance must be positive".into()));
        }
        if !(self.prior_width_ns > 0.0) {
            return Err(Error::InvalidInput("prior width must be positive".into()));
        }
        if self.etau_grid < 16 || self.ephi_grid < 16 {
            return Err(Error::InvalidInput("ZZB grids need at least 16 points".into()));
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<f64> {
        self.config.carrier_offsets_ghz()
    }
}

/// Tail distribution of the standard normal: `Q(x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Cosine correlation sum `sum_{m,n} cos(-2π f_{m,n} e_tau + e_phi)` over the
/// full frequency grid (canonical offsets).
fn correlation_sum(spec: &ZzbSpec, e_tau: f64, e_phi: f64) -> f64 {
    let mut acc = 0.0;
    for (sb, f_off) in spec.config.subbands().iter().zip(spec.offsets()) {
        for n in subcarrier_indices(sb.n_sub) {
            let f = f_off + n * sb.spacing_ghz;
            acc += (e_phi - TAU * f * e_tau).cos();
        }
    }
    acc
}

fn pmin_from_correlation(spec: &ZzbSpec, cos_sum: f64) -> Result<f64> {
    let n_total = spec.config.total_samples() as f64;
    let mut radicand = n_total - cos_sum;
    if radicand < 0.0 {
        if radicand < -1e-9 * n_total {
            return Err(Error::Inconsistent(format!(
                "P_min radicand {radicand} significantly negative"
            )));
        }
        radicand = 0.0;
    }
    let sigma = spec.noise_variance.sqrt();
    Ok(q_function(spec.amplitude / sigma * radicand.sqrt()))
}

/// Minimum binary-detection error probability at offset `(e_tau, e_phi)`.
pub fn pmin_offset(spec: &ZzbSpec, e_tau_ns: f64, e_phi_rad: f64) -> Result<f64> {
    spec.validate()?;
    if !e_tau_ns.is_finite() || !e_phi_rad.is_finite() {
        return Err(Error::InvalidInput("offsets must be finite".into()));
    }
    pmin_from_correlation(spec, correlation_sum(spec, e_tau_ns, e_phi_rad))
}

/// The evaluated bound.
#[derive(Debug, Clone, Copy)]
pub struct ZzbResult {
    /// The bound in ns².
    pub bound_ns2: f64,
    /// Its square root in ns.
    pub sqrt_ns: f64,
    /// Whether a Richardson step was applied (grid doubling changed the
    /// trapezoid value by more than 0.5%).
    pub refined: bool,
}

/// `sum_{m,n} e^{-j 2π f_{m,n} e_tau}` in closed per-band form; the cosine
/// correlation at phase `e_phi` is `Re{e^{j e_phi} H}`.
fn correlation_phasor(spec: &ZzbSpec, e_tau: f64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (sb, f_off) in spec.config.subbands().iter().zip(spec.offsets()) {
        let gamma = if e_tau == 0.0 {
            sb.n_sub as f64
        } else {
            dirichlet_gamma(sb.n_sub as f64, sb.spacing_ghz, e_tau)?.value
        };
        acc += Complex64::from_polar(1.0, -TAU * f_off * e_tau) * gamma;
    }
    Ok(acc)
}

/// Inner maximization `max_{e_phi} (2π - e_phi) P_min(e)` on the phase grid
/// with one golden-section refinement around the best cell.
fn inner_max(spec: &ZzbSpec, e_tau: f64) -> Result<f64> {
    let h = correlation_phasor(spec, e_tau)?;
    let eval = |e_phi: f64| -> Result<f64> {
        let cos_sum = (Complex64::from_polar(1.0, e_phi) * h).re;
        Ok((TAU - e_phi) * pmin_from_correlation(spec, cos_sum)?)
    };
    let n = spec.ephi_grid;
    let step = TAU / n as f64;
    let (mut best_i, mut best) = (0usize, f64::MIN);
    for i in 0..n {
        let v = eval(i as f64 * step)?;
        if v > best {
            (best_i, best) = (i, v);
        }
    }
    // golden-section refinement in the bracketing cells, clamped to [0, 2π]
    let mut lo = (best_i as f64 - 1.0) * step;
    let mut hi = (best_i as f64 + 1.0) * step;
    lo = lo.max(0.0);
    hi = hi.min(TAU);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let (mut x1, mut x2) = (hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo));
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..40 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    Ok(best.max(f1).max(f2))
}

/// Valley filling: reverse running maximum. The output is nonincreasing by
/// construction.
fn valley_fill(values: &mut [f64]) {
    for i in (0..values.len().saturating_sub(1)).rev() {
        values[i] = values[i].max(values[i + 1]);
    }
    debug_assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

fn zzb_on_grid(spec: &ZzbSpec, points: usize) -> Result<f64> {
    let d = spec.prior_width_ns;
    let step = d / (points - 1) as f64;
    let mut vals: Vec<f64> = (0..points)
        .map(|i| {
            let e_tau = i as f64 * step;
            Ok((d - e_tau) * inner_max(spec, e_tau)?)
        })
        .collect::<Result<_>>()?;
    valley_fill(&mut vals);
    // trapezoid of e_tau * V(e_tau)
    let mut integral = 0.0;
    for i in 0..points - 1 {
        let f0 = i as f64 * step * vals[i];
        let f1 = (i + 1) as f64 * step * vals[i + 1];
        integral += 0.5 * (f0 + f1) * step;
    }
    Ok(integral / (TAU * d))
}

/// Evaluate the single-path delay ZZB on the configured `e_tau` grid, doubling
/// the grid once and Richardson-extrapolating if the two resolutions differ
/// by more than 0.5%.
pub fn zzb_delay(spec: &ZzbSpec) -> Result<ZzbResult> {
    spec.validate()?;
    let coarse = zzb_on_grid(spec, spec.etau_grid)?;
    let fine = zzb_on_grid(spec, 2 * spec.etau_grid - 1)?;
    let (bound, refined) = if (fine - coarse).abs() > 0.005 * fine.abs().max(f64::MIN_POSITIVE) {
        ((4.0 * fine - coarse) / 3.0, true)
    } else {
        (fine, false)
    };
    if !(bound >= 0.0) {
        return Err(Error::Inconsistent(format!("negative ZZB {bound}")));
    }
    Ok(ZzbResult { bound_ns2: bound, sqrt_ns: bound.sqrt(), refined })
}

/// Expected CRB estimate.
#[derive(Debug, Clone, Copy)]
pub struct EcrbResult {
    /// Monte Carlo mean of the conditional root CRB in ns.
    pub ecrb_ns: f64,
    /// Sample std of the integrand (zero for this model: the conditional
    /// CRB does not depend on the parameter draw).
    pub integrand_std_ns: f64,
}

/// Monte Carlo ECRB: average the conditional root CRB over prior draws of
/// `(tau_1, phi_1)`.
pub fn ecrb_single_path(spec: &ZzbSpec, draws: usize, seed: u64) -> Result<EcrbResult> {
    spec.validate()?;
    if draws == 0 {
        return Err(Error::InvalidInput("ECRB needs at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(draws);
    for _ in 0..draws {
        // the draw parameterizes the conditional model; its CRB is constant
        let _tau: f64 = rng.gen_range(0.0..spec.prior_width_ns);
        let _phi: f64 = rng.gen_range(0.0..TAU);
        let crb = single_path_crb_tau(&spec.config, spec.amplitude, spec.noise_variance)?;
        samples.push(crb.sqrt());
    }
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / draws as f64;
    Ok(EcrbResult { ecrb_ns: mean, integrand_std_ns: var.sqrt() })
}

/// MAP Monte Carlo result.
#[derive(Debug, Clone, Copy)]
pub struct MapRmseResult {
    /// Root mean squared delay error in ns.
    pub rmse_ns: f64,
    pub trials: usize,
}

/// Per-trial seeded RNG stream: trial `t` draws from stream `t` of the seed.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// MAP delay estimation RMSE over seeded Monte Carlo trials: per trial, draw
/// `(tau_1, phi_1)` from the prior, synthesize one noisy observation,
/// maximize the likelihood on the `(tau, phi)` grid, refine the delay with a
/// 3-point parabolic fit, and accumulate the squared delay error.
pub fn map_rmse(
    spec: &ZzbSpec,
    trials: usize,
    tau_grid: usize,
    phi_grid: usize,
    seed: u64,
) -> Result<MapRmseResult> {
    spec.validate()?;
    if trials == 0 || tau_grid < 2 || phi_grid < 2 {
        return Err(Error::InvalidInput("MAP needs trials >= 1 and grids >= 2".into()));
    }
    let offsets = spec.offsets();
    let freqs: Vec<f64> = spec
        .config
        .subbands()
        .iter()
        .zip(&offsets)
        .flat_map(|(sb, &f_off)| {
            subcarrier_indices(sb.n_sub).map(move |n| f_off + n * sb.spacing_ghz)
        })
        .collect();
    let d = spec.prior_width_ns;
    let tau_step = d / (tau_grid - 1) as f64;
    let noise_std = (spec.noise_variance / 2.0).sqrt();

    let sq_errors: Result<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let tau_true: f64 = rng.gen_range(0.0..d);
            let phi_true: f64 = rng.gen_range(0.0..TAU);
            let y: Vec<Complex64> = freqs
                .iter()
                .map(|&f| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::from_polar(spec.amplitude, phi_true - TAU * f * tau_true)
                        + Complex64::new(re * noise_std, im * noise_std)
                })
                .collect();
            // correlation Z(tau) = sum_i y_i e^{+j 2π f_i tau}
            let z: Vec<Complex64> = (0..tau_grid)
                .map(|i| {
                    let tau = i as f64 * tau_step;
                    freqs
                        .iter()
                        .zip(&y)
                        .map(|(&f, yi)| yi * Complex64::from_polar(1.0, TAU * f * tau))
                        .sum()
                })
                .collect();
            // exhaustive 2-D grid over (tau, phi)
            let (mut best_i, mut best_j, mut best) = (0usize, 0usize, f64::MIN);
            for (i, zi) in z.iter().enumerate() {
                for j in 0..phi_grid {
                    let phi = TAU * j as f64 / phi_grid as f64;
                    let score = (Complex64::from_polar(1.0, -phi) * zi).re;
                    if score > best {
                        (best_i, best_j, best) = (i, j, score);
                    }
                }
            }
            // 3-point parabolic refinement along tau at the best phase
            let mut tau_hat = best_i as f64 * tau_step;
            if best_i > 0 && best_i + 1 < tau_grid {
                let phi = TAU * best_j as f64 / phi_grid as f64;
                let rot = Complex64::from_polar(1.0, -phi);
                let lm = (rot * z[best_i - 1]).re;
                let l0 = (rot * z[best_i]).re;
                let lp = (rot * z[best_i + 1]).re;
                let denom = lm - 2.0 * l0 + lp;
                if denom.abs() > 0.0 {
                    let delta = 0.5 * (lm - lp) / denom;
                    if delta.is_finite() && delta.abs() <= 1.0 {
                        tau_hat += delta * tau_step;
                    }
                }
            }
            let tau_hat = tau_hat.clamp(0.0, d);
            Ok((tau_hat - tau_true) * (tau_hat - tau_true))
        })
        .collect();
    let sq_errors = sq_errors?;
    let mse = sq_errors.iter().sum::<f64>() / trials as f64;
    Ok(MapRmseResult { rmse_ns: mse.sqrt(), trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FS: f64 = 78.125e-6;

    fn spec(snr_db: f64, aperture: f64) -> ZzbSpec {
        let cfg = MultibandConfig::two_band(1.8, 1.8 + aperture, FS, 256).unwrap();
        ZzbSpec::new(cfg, 1.0, 10f64.powf(-snr_db / 10.0), 10.0).unwrap()
    }

    #[test]
    fn q_function_reference_points() {
        assert_relative_eq!(q_function(0.0), 0.5, max_relative = 1e-12);
        // symmetry
        for x in [0.3, 1.0, 2.2] {
            assert_relative_eq!(q_function(-x), 1.0 - q_function(x), max_relative = 1e-12);
        }
        // standard normal table
        assert!((q_function(1.96) - 0.0250).abs() < 1e-4);
    }

    #[test]
    fn pmin_at_zero_offset_is_half() {
        let s = spec(10.0, 0.5);
        assert_relative_eq!(pmin_offset(&s, 0.0, 0.0).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn pmin_never_exceeds_half() {
        let s = spec(10.0, 0.5);
        for i in 0..50 {
            let e_tau = 0.2 * i as f64;
            let e_phi = (i as f64 * 0.731).rem_euclid(TAU);
            let p = pmin_offset(&s, e_tau, e_phi).unwrap();
            assert!(p <= 0.5 + 1e-15, "P_min {p} at ({e_tau}, {e_phi})");
        }
    }

    #[test]
    fn pmin_decorrelated_limit() {
        let s = spec(10.0, 0.5);
        // e_tau far beyond the coherence width: cosine sum ~ 0
        let e_tau = 10.0 / (FS * 256.0);
        let sigma = s.noise_variance.sqrt();
        let want = q_function(s.amplitude * (s.config.total_samples() as f64).sqrt() / sigma);
        let got = pmin_offset(&s, e_tau, 0.0).unwrap();
        assert!(
            (got - want).abs() <= 0.05 * want.max(1e-300),
            "P_min {got} vs decorrelated {want}"
        );
    }

    #[test]
    fn pmin_periodic_in_phase() {
        let s = spec(10.0, 0.5);
        for i in 0..8 {
            let e_tau = 0.3 + 0.7 * i as f64;
            let e_phi = 0.17 + 0.5 * i as f64;
            let a = pmin_offset(&s, e_tau, e_phi).unwrap();
            let b = pmin_offset(&s, e_tau, e_phi + TAU).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn phasor_matches_direct_sum() {
        let s = spec(10.0, 0.5);
        for i in 1..6 {
            let e_tau = 0.4 * i as f64;
            let e_phi = 0.3 * i as f64;
            let h = correlation_phasor(&s, e_tau).unwrap();
            let fast = (Complex64::from_polar(1.0, e_phi) * h).re;
            let slow = correlation_sum(&s, e_tau, e_phi);
            assert_relative_eq!(fast, slow, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn valley_fill_nonincreasing() {
        let mut v = vec![1.0, 3.0, 2.0, 5.0, 0.5, 0.7];
        valley_fill(&mut v);
        assert_eq!(v, vec![5.0, 5.0, 5.0, 5.0, 0.7, 0.7]);
    }

    #[test]
    fn zzb_plateau_at_uninformative_snr() {
        // sqrt(ZZB) -> sqrt(D^2/12) when observations carry no information
        let s = spec(-100.0, 0.5);
        let z = zzb_delay(&s).unwrap();
        let plateau = (s.prior_width_ns * s.prior_width_ns / 12.0).sqrt();
        assert!(
            (z.sqrt_ns - plateau).abs() / plateau < 0.01,
            "sqrt ZZB {} vs plateau {plateau}",
            z.sqrt_ns
        );
    }

    #[test]
    fn zzb_capped_by_prior_variance() {
        for snr in [-20.0, -5.0, 5.0, 15.0] {
            let s = spec(snr, 0.5);
            let z = zzb_delay(&s).unwrap();
            let cap = s.prior_width_ns * s.prior_width_ns / 12.0;
            assert!(z.bound_ns2 <= cap * 1.01, "ZZB {} above prior cap {cap}", z.bound_ns2);
        }
    }

    #[test]
    fn zzb_nonincreasing_in_snr() {
        let mut last = f64::INFINITY;
        for snr in [-20.0, -10.0, 0.0, 10.0, 20.0] {
            let s = spec(snr, 0.5);
            let z = zzb_delay(&s).unwrap();
            assert!(
                z.bound_ns2 <= last * 1.005,
                "ZZB grew at {snr} dB: {} after {last}",
                z.bound_ns2
            );
            last = z.bound_ns2;
        }
    }

    #[test]
    fn ecrb_matches_conditional_crb_and_scales() {
        let s = spec(10.0, 0.5);
        let one = ecrb_single_path(&s, 1, 3).unwrap();
        let many = ecrb_single_path(&s, 64, 3).unwrap();
        let direct = single_path_crb_tau(&s.config, s.amplitude, s.noise_variance)
            .unwrap()
            .sqrt();
        assert_relative_eq!(one.ecrb_ns, direct, max_relative = 1e-12);
        assert_relative_eq!(many.ecrb_ns, direct, max_relative = 1e-12);
        assert!(many.integrand_std_ns < 1e-12 * direct.max(1.0));

        let mut s2 = s.clone();
        s2.amplitude = 2.0;
        let doubled = ecrb_single_path(&s2, 8, 3).unwrap();
        assert_relative_eq!(doubled.ecrb_ns, 0.5 * many.ecrb_ns, max_relative = 1e-12);
    }

    #[test]
    fn map_noiseless_error_bounded_by_grid() {
        let mut s = spec(10.0, 0.5);
        s.noise_variance = 1e-18;
        let tau_grid = 256;
        let r = map_rmse(&s, 16, tau_grid, 128, 5).unwrap();
        // parabolic refinement beats the half-step quantization bound
        let half_step = 0.5 * s.prior_width_ns / (tau_grid - 1) as f64;
        assert!(r.rmse_ns <= half_step, "noiseless RMSE {} vs half step {half_step}", r.rmse_ns);
    }

    #[test]
    fn map_deterministic_given_seed() {
        let s = spec(10.0, 0.5);
        let a = map_rmse(&s, 8, 128, 64, 42).unwrap();
        let b = map_rmse(&s, 8, 128, 64, 42).unwrap();
        assert_eq!(a.rmse_ns, b.rmse_ns);
    }
}
