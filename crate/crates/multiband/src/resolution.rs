//! Statistical resolution limit: the delay separation that equals its own
//! root CRB, located by a log-spaced scan and bisection on the first sign
//! change of `g(Δτ) = sqrt(C_Δτ(Δτ)) - Δτ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{
    crb_delay_separation, fim_compact_relaxed, fim_summation, FimScenario, RelaxedBand,
};
use crate::model::{CanonicalParams, MultibandConfig, NoiseModel, Subband};

/// Which FIM route evaluates `C_Δτ` inside the solver. The compact route is
/// the fast path; the summation route is for validation runs and requires
/// integer subcarrier counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbRoute {
    Compact,
    Summation,
}

/// Inputs of one SRL solve.
#[derive(Debug, Clone)]
pub struct SrlQuery {
    /// Subbands in canonical form (first carrier offset 0).
    pub bands: Vec<RelaxedBand>,
    /// Canonical gains of the two paths.
    pub gains: [Complex64; 2],
    /// Noise variance per complex sample.
    pub noise_variance: f64,
    /// Timing-offset prior std in ns.
    pub prior_std_ns: f64,
    /// Whether the CRB includes the phase-distortion nuisance blocks.
    pub with_distortions: bool,
    /// Search bracket in ns.
    pub bracket_ns: (f64, f64),
    /// Bisection tolerance in ns.
    pub tolerance_ns: f64,
    /// Coarse scan resolution (log-spaced points across the bracket).
    pub scan_points: usize,
    pub route: CrbRoute,
}

pub const DEFAULT_BRACKET_NS: (f64, f64) = (1e-3, 50.0);
pub const DEFAULT_TOLERANCE_NS: f64 = 1e-6;
pub const DEFAULT_SCAN_POINTS: usize = 2000;

impl SrlQuery {
    /// Query over a validated configuration with the library defaults.
    pub fn new(config: &MultibandConfig, gains: [Complex64; 2], noise: &NoiseModel, prior_std_ns: f64) -> Self {
        let offsets = config.carrier_offsets_ghz();
        let bands = config
            .subbands()
            .iter()
            .zip(offsets)
            .map(|(sb, off)| RelaxedBand {
                carrier_offset_ghz: off,
                spacing_ghz: sb.spacing_ghz,
                n_sub: sb.n_sub as f64,
            })
            .collect();
        Self {
            bands,
            gains,
            noise_variance: noise.variance,
            prior_std_ns,
            with_distortions: true,
            bracket_ns: DEFAULT_BRACKET_NS,
            tolerance_ns: DEFAULT_TOLERANCE_NS,
            scan_points: DEFAULT_SCAN_POINTS,
            route: CrbRoute::Compact,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket_ns;
        if !(0.0 < lo && lo < hi) {
            return Err(Error::InvalidInput(format!("invalid SRL bracket [{lo}, {hi}]")));
        }
        if !(self.tolerance_ns > 0.0) {
            return Err(Error::InvalidInput("SRL tolerance must be positive".into()));
        }
        if self.scan_points < 2 {
            return Err(Error::InvalidInput("SRL scan needs at least 2 points".into()));
        }
        Ok(())
    }

    fn scenario(&self) -> FimScenario {
        if self.with_distortions {
            FimScenario::Full
        } else {
            FimScenario::DistortionFree
        }
    }

    /// `sqrt(C_Δτ)` at one separation, in ns.
    pub fn root_crb(&self, delta_tau_ns: f64) -> Result<f64> {
        let fim = match self.route {
            CrbRoute::Compact => fim_compact_relaxed(
                &self.bands,
                self.gains,
                delta_tau_ns,
                &NoiseModel::new(self.noise_variance)?,
                self.prior_std_ns,
                self.scenario(),
            )?,
            CrbRoute::Summation => {
                let subbands: Result<Vec<Subband>> = self
                    .bands
                    .iter()
                    .map(|b| {
                        if (b.n_sub - b.n_sub.round()).abs() > 1e-9 {
                            return Err(Error::InvalidInput(
                                "summation route needs integer subcarrier counts".into(),
                            ));
                        }
                        Ok(Subband {
                            carrier_ghz: b.carrier_offset_ghz,
                            spacing_ghz: b.spacing_ghz,
                            n_sub: b.n_sub.round() as u32,
                        })
                    })
                    .collect();
                let config = MultibandConfig::new(subbands?)?;
                let canonical = CanonicalParams {
                    carrier_offsets_ghz: self.bands.iter().map(|b| b.carrier_offset_ghz).collect(),
                    gains: self.gains.to_vec(),
                    delays_ns: vec![0.0, delta_tau_ns],
                    phase_offsets_rad: vec![0.0; self.bands.len().saturating_sub(1)],
                    timing_offsets_ns: vec![0.0; self.bands.len()],
                };
                fim_summation(
                    &config,
                    &canonical,
                    &NoiseModel::new(self.noise_variance)?,
                    self.prior_std_ns,
                    self.scenario(),
                )?
            }
        };
        Ok(crb_delay_separation(&fim)?.sqrt())
    }
}

/// A solved SRL fixed point.
#[derive(Debug, Clone)]
pub struct SrlSolution {
    /// The smallest root `Δτ*` in ns.
    pub srl_ns: f64,
    /// `|sqrt(C_Δτ(Δτ*)) - Δτ*|` in ns.
    pub residual_ns: f64,
    /// Left endpoints of every sign-change interval found on the scan,
    /// including the one that was refined.
    pub sign_changes: Vec<f64>,
    /// Number of CRB evaluations spent.
    pub evaluations: usize,
}

/// Solve the SRL fixed point: smallest `Δτ` in the bracket with
/// `sqrt(C_Δτ(Δτ)) = Δτ`.
///
/// CRB evaluations that fail with a near-singular FIM (separations too small
/// to resolve) are treated as `g > 0`, consistent with an unbounded CRB.
pub fn srl_solve(query: &SrlQuery) -> Result<SrlSolution> {
    query.validate()?;
    let mut evaluations = 0usize;
    let mut g = |dt: f64| -> f64 {
        evaluations += 1;
        match query.root_crb(dt) {
            Ok(root) => root - dt,
            Err(_) => f64::INFINITY,
        }
    };

    let (lo, hi) = query.bracket_ns;
    let points = query.scan_points;
    let ratio = (hi / lo).ln();
    let grid: Vec<f64> = (0..points)
        .map(|i| lo * (ratio * i as f64 / (points - 1) as f64).exp())
        .collect();

    let mut sign_changes = Vec::new();
    let mut first: Option<(f64, f64)> = None;
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    let mut prev = (grid[0], g(grid[0]));
    if prev.1.is_finite() {
        g_min = prev.1;
        g_max = prev.1;
    }
    for &dt in &grid[1..] {
        let cur = (dt, g(dt));
        if cur.1.is_finite() {
            g_min = g_min.min(cur.1);
            g_max = g_max.max(cur.1);
        }
        if prev.1 > 0.0 && cur.1 <= 0.0 {
            sign_changes.push(prev.0);
            if first.is_none() {
                first = Some((prev.0, cur.0));
            }
        }
        prev = cur;
    }

    let (mut a, mut b) = first.ok_or(Error::NoSignChange { lo, hi, g_min, g_max })?;

    // bisection on [a, b] with g(a) > 0 >= g(b)
    let mut iterations = 0;
    while (b - a) > query.tolerance_ns && iterations < 200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    let root = 0.5 * (a + b);
    let residual = match query.root_crb(root) {
        Ok(rc) => (rc - root).abs(),
        Err(_) => f64::INFINITY,
    };
    evaluations += 1;
    if !(residual < 10.0 * query.tolerance_ns) {
        return Err(Error::Inconsistent(format!(
            "SRL fixed-point residual {residual} ns exceeds 10x tolerance {}",
            query.tolerance_ns
        )));
    }
    Ok(SrlSolution { srl_ns: root, residual_ns: residual, sign_changes, evaluations })
}
