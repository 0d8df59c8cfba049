//! Cross-route checks of the Fisher machinery: the compact Dirichlet FIM
//! against the per-sample summation FIM, the EFIM against full inversion,
//! the closed-form CRB against the EFIM pipeline, and the single-path FIM
//! against a finite-difference likelihood oracle.

use approx::assert_relative_eq;
use multiband::error::Error;
use multiband::fisher::{
    crb_closed_form, crb_delay_separation, deb, dirichlet_gamma, efim, fim_compact_relaxed,
    fim_compact_two_path, fim_single_path, fim_summation, FimScenario, FisherMatrix, RelaxedBand,
};
use multiband::model::{
    canonicalize, CanonicalParams, DistortionModel, MultibandConfig, NoiseModel, PathSet, Subband,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

const FS: f64 = 78.125e-6; // GHz

fn defaults() -> MultibandConfig {
    MultibandConfig::two_band(1.8, 2.0, FS, 256).unwrap()
}

fn default_canonical(dtau: f64) -> (MultibandConfig, CanonicalParams) {
    let cfg = defaults();
    let paths = PathSet::two_path(
        Complex64::new(0.8, 0.6),
        Complex64::new(0.6, 0.8),
        1.0,
        1.0 + dtau,
    )
    .unwrap();
    let dist = DistortionModel::sampled(2, 0.1, 17).unwrap();
    let canon = canonicalize(&cfg, &paths, &dist).unwrap();
    (cfg, canon)
}

fn max_rel_err(a: &FisherMatrix, b: &FisherMatrix) -> f64 {
    let scale = a.matrix().amax();
    a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

#[test]
fn compact_matches_summation_on_defaults() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    for scenario in [
        FimScenario::Full,
        FimScenario::DistortionFree,
        FimScenario::PhaseOnly,
        FimScenario::TimingOnly,
    ] {
        let a = fim_summation(&cfg, &canon, &noise, 0.1, scenario).unwrap();
        let b = fim_compact_two_path(&cfg, &canon, &noise, 0.1, scenario).unwrap();
        assert!(
            max_rel_err(&a, &b) < 1e-9,
            "scenario {scenario:?}: rel err {}",
            max_rel_err(&a, &b)
        );
    }
}

#[test]
fn compact_matches_summation_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let m_count = if rng.gen_bool(0.5) { 2 } else { 3 };
        let mut subbands = Vec::new();
        let mut carrier = 1.0 + rng.gen_range(0.0..0.5);
        for _ in 0..m_count {
            let fs = rng.gen_range(2e-5..2e-4);
            let n = rng.gen_range(16u32..220);
            subbands.push(Subband { carrier_ghz: carrier, spacing_ghz: fs, n_sub: n });
            carrier += n as f64 * fs + rng.gen_range(0.05..0.4);
        }
        let cfg = MultibandConfig::new(subbands).unwrap();
        let tau1 = rng.gen_range(0.0..10.0);
        let dtau = rng.gen_range(0.05..30.0);
        let paths = PathSet::two_path(
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0_f64)).unscale(0.7)
                + Complex64::new(0.8, 0.0),
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0_f64)).unscale(0.7)
                + Complex64::new(0.0, 0.8),
            tau1,
            tau1 + dtau,
        )
        .unwrap();
        let dist = DistortionModel::sampled(m_count, rng.gen_range(0.02..0.5), trial).unwrap();
        let canon = canonicalize(&cfg, &paths, &dist).unwrap();
        let noise = NoiseModel::new(rng.gen_range(0.05..5.0)).unwrap();
        let a = fim_summation(&cfg, &canon, &noise, dist.prior_std_ns, FimScenario::Full).unwrap();
        let b =
            fim_compact_two_path(&cfg, &canon, &noise, dist.prior_std_ns, FimScenario::Full).unwrap();
        let err = max_rel_err(&a, &b);
        assert!(err < 1e-8, "trial {trial}: rel err {err}");
    }
}

#[test]
fn summation_fim_is_exactly_symmetric() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    assert_eq!(j.matrix(), &j.matrix().transpose());
    let j = fim_compact_two_path(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    assert_eq!(j.matrix(), &j.matrix().transpose());
}

#[test]
fn fim_ignores_stored_distortion_values() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let mut altered = canon.clone();
    altered.phase_offsets_rad = vec![2.5];
    altered.timing_offsets_ns = vec![0.3, -0.6];
    let a = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let b = fim_summation(&cfg, &altered, &noise, 0.1, FimScenario::Full).unwrap();
    assert_eq!(a.matrix(), b.matrix());
}

#[test]
fn fim_depends_on_relative_delay_only() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let mut shifted = canon.clone();
    for d in &mut shifted.delays_ns {
        *d += 5.0;
    }
    let a = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let b = fim_summation(&cfg, &shifted, &noise, 0.1, FimScenario::Full).unwrap();
    assert!(max_rel_err(&a, &b) < 1e-10, "rel err {}", max_rel_err(&a, &b));
}

#[test]
fn phase_blocks_are_diagonal() {
    // three subbands so there are two phi' columns
    let cfg = MultibandConfig::new(vec![
        Subband { carrier_ghz: 1.8, spacing_ghz: FS, n_sub: 64 },
        Subband { carrier_ghz: 2.0, spacing_ghz: FS, n_sub: 64 },
        Subband { carrier_ghz: 2.3, spacing_ghz: FS, n_sub: 64 },
    ])
    .unwrap();
    let paths = PathSet::two_path(Complex64::new(0.8, 0.6), Complex64::new(0.6, 0.8), 0.0, 5.0)
        .unwrap();
    let dist = DistortionModel::sampled(3, 0.1, 3).unwrap();
    let canon = canonicalize(&cfg, &paths, &dist).unwrap();
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let layout = j.layout();
    let (p1, p2) = (layout.phase(1).unwrap(), layout.phase(2).unwrap());
    assert_eq!(j.matrix()[(p1, p2)], 0.0);
    // phi'-delta cross terms vanish off the own subband as well
    for m in 0..3 {
        let d = layout.timing(m).unwrap();
        if m != 1 {
            assert_eq!(j.matrix()[(p1, d)], 0.0);
        }
        if m != 2 {
            assert_eq!(j.matrix()[(p2, d)], 0.0);
        }
    }
}

#[test]
fn timing_prior_appears_on_diagonal() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let weak = fim_summation(&cfg, &canon, &noise, 1e6, FimScenario::Full).unwrap();
    let strong = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let layout = weak.layout();
    for m in 0..2 {
        let d = layout.timing(m).unwrap();
        let diff = strong.matrix()[(d, d)] - weak.matrix()[(d, d)];
        assert_relative_eq!(diff, 1.0 / 0.01 - 1e-12, max_relative = 1e-6);
    }
}

#[test]
fn coincident_paths_degenerate() {
    let (cfg, canon) = default_canonical(1e-9);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_compact_two_path(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    // gamma(dtau -> 0) = N per band; the tau/alpha columns collapse
    let g = dirichlet_gamma(256.0, FS, 1e-9).unwrap();
    assert_relative_eq!(g.value, 256.0, max_relative = 1e-12);
    assert!(matches!(
        crb_delay_separation(&j),
        Err(Error::NearSingular { .. })
    ));
}

// ── EFIM ─────────────────────────────────────────────────────────────

#[test]
fn efim_block_diagonal_returns_leading_block() {
    let mut j = DMatrix::<f64>::zeros(5, 5);
    for i in 0..5 {
        j[(i, i)] = (i + 1) as f64;
    }
    j[(0, 1)] = 0.3;
    j[(1, 0)] = 0.3;
    let e = efim(&j, 2).unwrap();
    assert_eq!(e, j.view((0, 0), (2, 2)).into_owned());
}

#[test]
fn efim_full_block_is_identity_operation() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let e = efim(j.matrix(), j.dim()).unwrap();
    assert_eq!(&e, j.matrix());
}

#[test]
fn efim_inverse_equals_leading_block_of_full_inverse() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let full_inv = j.matrix().clone().try_inverse().unwrap();
    for q in [2usize, 4, 6] {
        let e = efim(j.matrix(), q).unwrap();
        let e_inv = e.try_inverse().unwrap();
        let lead = full_inv.view((0, 0), (q, q)).into_owned();
        let err = (&e_inv - &lead).amax() / lead.amax();
        assert!(err < 1e-9, "q={q}: rel err {err}");
    }
}

#[test]
fn efim_singular_trailing_block_is_typed_error() {
    let mut j = DMatrix::<f64>::identity(4, 4);
    j[(2, 2)] = 1.0;
    j[(2, 3)] = 1.0;
    j[(3, 2)] = 1.0;
    j[(3, 3)] = 1.0; // trailing 2x2 block singular
    j[(0, 2)] = 0.5;
    j[(2, 0)] = 0.5;
    assert!(matches!(efim(&j, 2), Err(Error::NearSingular { .. })));
}

// ── delay-separation CRB ─────────────────────────────────────────────

#[test]
fn crb_equals_full_inverse_route() {
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap();
    let fast = crb_delay_separation(&j).unwrap();
    let c = j.matrix().clone().try_inverse().unwrap();
    let slow = c[(0, 0)] + c[(1, 1)] - c[(0, 1)] - c[(1, 0)];
    assert_relative_eq!(fast, slow, max_relative = 1e-9);
}

#[test]
fn crb_scales_with_noise_variance() {
    let (cfg, canon) = default_canonical(5.0);
    let n1 = NoiseModel::new(0.05).unwrap();
    let n4 = NoiseModel::new(0.2).unwrap();
    let c1 = crb_delay_separation(
        &fim_summation(&cfg, &canon, &n1, 0.1, FimScenario::Full).unwrap(),
    )
    .unwrap();
    let c4 = crb_delay_separation(
        &fim_summation(&cfg, &canon, &n4, 0.1, FimScenario::Full).unwrap(),
    )
    .unwrap();
    assert_relative_eq!(c4 / c1, 4.0, max_relative = 1e-9);
}

#[test]
fn equal_amplitudes_cancel_distortion_penalty() {
    // |alpha_1| = |alpha_2|: the distorted CRB equals the distortion-free one
    let (cfg, canon) = default_canonical(5.0);
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let with = crb_delay_separation(
        &fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap(),
    )
    .unwrap();
    let without = crb_delay_separation(
        &fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::DistortionFree).unwrap(),
    )
    .unwrap();
    assert_relative_eq!(with, without, max_relative = 1e-6);

    // |alpha_2| = 0.1 at 2 ns separation: a clear gap opens
    let cfg = defaults();
    let paths = PathSet::two_path(
        Complex64::new(0.8, 0.6),
        Complex64::new(0.06, 0.08),
        1.0,
        3.0,
    )
    .unwrap();
    let dist = DistortionModel::sampled(2, 0.1, 17).unwrap();
    let canon = canonicalize(&cfg, &paths, &dist).unwrap();
    let with = crb_delay_separation(
        &fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap(),
    )
    .unwrap();
    let without = crb_delay_separation(
        &fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::DistortionFree).unwrap(),
    )
    .unwrap();
    assert!((with - without).abs() / without > 0.01, "with={with} without={without}");
}

// ── DEB ──────────────────────────────────────────────────────────────

#[test]
fn deb_single_path_is_sqrt_of_inverse_entry() {
    let cfg = defaults();
    let paths = PathSet::new(vec![multiband::model::PropagationPath {
        gain: Complex64::new(1.0, 0.0),
        delay_ns: 3.0,
    }])
    .unwrap();
    let dist = DistortionModel::none(2, 0.1).unwrap();
    let canon = canonicalize(&cfg, &paths, &dist).unwrap();
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    let j = fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::DistortionFree).unwrap();
    let inv = j.matrix().clone().try_inverse().unwrap();
    assert_relative_eq!(deb(&j).unwrap(), inv[(0, 0)].sqrt(), max_relative = 1e-9);
}

#[test]
fn deb_improves_with_snr() {
    let (cfg, canon) = default_canonical(5.0);
    let mut last = f64::INFINITY;
    for snr in [5.0, 10.0, 15.0, 20.0] {
        let noise = NoiseModel::from_snr_db(snr).unwrap();
        let d = deb(&fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap()).unwrap();
        assert!(d < last, "DEB not improving at {snr} dB: {d} vs {last}");
        last = d;
    }
}

#[test]
fn distortions_never_shrink_deb_over_aperture_sweep() {
    // tau2 - tau1 = 5 ns, equal amplitudes, apertures swept over 0..1 GHz
    let noise = NoiseModel::from_snr_db(15.0).unwrap();
    for i in 0..12 {
        let aperture = 0.02 + 0.08 * i as f64;
        let cfg = MultibandConfig::two_band(1.8, 1.8 + aperture, FS, 256).unwrap();
        let paths =
            PathSet::two_path(Complex64::new(0.8, 0.6), Complex64::new(0.6, 0.8), 1.0, 6.0)
                .unwrap();
        let dist = DistortionModel::sampled(2, 0.1, 99).unwrap();
        let canon = canonicalize(&cfg, &paths, &dist).unwrap();
        let with = deb(&fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::Full).unwrap())
            .unwrap();
        let without =
            deb(&fim_summation(&cfg, &canon, &noise, 0.1, FimScenario::DistortionFree).unwrap())
                .unwrap();
        assert!(
            with >= without - 1e-12,
            "aperture {aperture}: DEB with {with} < without {without}"
        );
    }
}

// ── closed form ──────────────────────────────────────────────────────

fn special_case_canonical(dtau: f64, aperture: f64) -> (MultibandConfig, CanonicalParams) {
    let cfg = MultibandConfig::two_band(1.8, 1.8 + aperture, FS, 256).unwrap();
    let canon = CanonicalParams {
        carrier_offsets_ghz: vec![0.0, aperture],
        gains: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        delays_ns: vec![0.0, dtau],
        phase_offsets_rad: vec![0.0],
        timing_offsets_ns: vec![0.0, 0.0],
    };
    (cfg, canon)
}

#[test]
fn closed_form_matches_efim_pipeline() {
    let noise = NoiseModel::new(2.0).unwrap();
    for i in 1..=40 {
        let dtau = 1.2 * i as f64; // up to 48 ns
        let (cfg, canon) = special_case_canonical(dtau, 0.2);
        let j = fim_summation(&cfg, &canon, &noise, 1.0, FimScenario::Full).unwrap();
        let reference = crb_delay_separation(&j).unwrap();
        let cf = crb_closed_form(256.0, FS, 0.2, dtau).unwrap();
        assert_relative_eq!(cf.c_delta_tau, reference, max_relative = 1e-6);
        assert!(
            cf.lower <= reference * (1.0 + 1e-9) && reference <= cf.upper * (1.0 + 1e-9),
            "dtau={dtau}: {reference} outside [{}, {}]",
            cf.lower,
            cf.upper
        );
    }
}

#[test]
fn closed_form_bounds_are_carrier_extremes() {
    // at dtau = k / aperture the carrier cosine is exactly +1: the bound is
    // attained there up to the small odd carrier term
    let aperture = 0.2;
    for k in [1.0, 2.0, 4.0] {
        let dtau = k / aperture;
        let cf = crb_closed_form(256.0, FS, aperture, dtau).unwrap();
        assert!(cf.c_delta_tau <= cf.upper * (1.0 + 1e-12));
        assert_relative_eq!(cf.c_delta_tau, cf.upper, max_relative = 1e-2);
    }
    // at dtau = (k + 1/2) / aperture it is exactly -1
    for k in [1.0, 2.0, 4.0] {
        let dtau = (k + 0.5) / aperture;
        let cf = crb_closed_form(256.0, FS, aperture, dtau).unwrap();
        assert!(cf.c_delta_tau >= cf.lower * (1.0 - 1e-12));
        assert_relative_eq!(cf.c_delta_tau, cf.lower, max_relative = 1e-2);
    }
}

#[test]
fn upper_bound_scales_inverse_square_in_aperture() {
    let dtau = 5.0;
    let base = crb_closed_form(256.0, FS, 0.5, dtau).unwrap().upper;
    let doubled = crb_closed_form(256.0, FS, 1.0, dtau).unwrap().upper;
    let ratio = doubled / base;
    assert!(
        (ratio - 0.25).abs() <= 0.025,
        "CRB_up(2Δf)/CRB_up(Δf) = {ratio}, expected ≈ 1/4"
    );
}

// ── single path ──────────────────────────────────────────────────────

/// Finite-difference FIM oracle for the single-path model: differentiates
/// the mean signal numerically and applies the Gaussian FIM template.
fn single_path_fim_fd(cfg: &MultibandConfig, a: f64, tau: f64, phi: f64, var: f64) -> [[f64; 2]; 2] {
    let offsets = cfg.carrier_offsets_ghz();
    let mu = |tau: f64, phi: f64| -> Vec<Complex64> {
        let mut out = Vec::new();
        for (sb, f_off) in cfg.subbands().iter().zip(&offsets) {
            for i in 0..sb.n_sub as i64 {
                let n = i as f64 - (sb.n_sub as i64 - 1) as f64 / 2.0;
                let f = f_off + n * sb.spacing_ghz;
                out.push(Complex64::from_polar(a, phi - TAU * f * tau));
            }
        }
        out
    };
    let h = 1e-6;
    let dtau: Vec<Complex64> = mu(tau + h, phi)
        .iter()
        .zip(mu(tau - h, phi))
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect();
    let dphi: Vec<Complex64> = mu(tau, phi + h)
        .iter()
        .zip(mu(tau, phi - h))
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect();
    let dot = |x: &[Complex64], y: &[Complex64]| -> f64 {
        x.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * 2.0 / var
    };
    [[dot(&dtau, &dtau), dot(&dtau, &dphi)], [dot(&dphi, &dtau), dot(&dphi, &dphi)]]
}

#[test]
fn single_path_fim_matches_finite_differences() {
    let cfg = defaults();
    let (a, var) = (0.9, 0.3);
    let j = fim_single_path(&cfg, a, var).unwrap();
    // entries are independent of the parameter point: check several
    for (tau, phi) in [(0.0, 0.0), (3.0, 1.2), (7.0, 4.4)] {
        let fd = single_path_fim_fd(&cfg, a, tau, phi, var);
        for r in 0..2 {
            for c in 0..2 {
                assert_relative_eq!(
                    j[(r, c)],
                    fd[r][c],
                    max_relative = 1e-6,
                    epsilon = 1e-6 * j[(0, 0)].abs()
                );
            }
        }
    }
}

#[test]
fn single_path_phase_entry_is_total_sample_count() {
    let cfg = defaults();
    let (a, var) = (0.7, 0.5);
    let j = fim_single_path(&cfg, a, var).unwrap();
    let want = 2.0 / var * a * a * cfg.total_samples() as f64;
    assert_relative_eq!(j[(1, 1)], want, max_relative = 1e-12);
}

// ── relaxed bands ────────────────────────────────────────────────────

#[test]
fn relaxed_bands_interpolate_integer_counts() {
    let noise = NoiseModel::from_snr_db(10.0).unwrap();
    let gains = [Complex64::new(1.0, 0.0), Complex64::new(0.6, 0.8)];
    let mk = |n: f64| {
        let bands = [
            RelaxedBand { carrier_offset_ghz: 0.0, spacing_ghz: FS, n_sub: n },
            RelaxedBand { carrier_offset_ghz: 0.4, spacing_ghz: FS, n_sub: 200.0 },
        ];
        crb_delay_separation(
            &fim_compact_relaxed(&bands, gains, 5.0, &noise, 0.1, FimScenario::Full).unwrap(),
        )
        .unwrap()
    };
    let (lo, mid, hi) = (mk(128.0), mk(128.5), mk(129.0));
    assert!(mid < lo && mid > hi, "CRB not monotone in relaxed N: {lo} {mid} {hi}");
}
