//! Run configuration: a single TOML document with SI-unit inputs (Hz,
//! seconds, dB), validated strictly — unknown keys are rejected. Internal
//! computation uses GHz/ns; conversion happens here at the boundary.

use anyhow::Context;

use crate::fail::SchemaError;
use num_complex::Complex64;
use serde::Deserialize;
use std::path::Path;

use multiband::model::{MultibandConfig, NoiseModel, PathSet, PropagationPath};
use multiband::optimizer::{ConstraintSet, SolverOptions};
use multiband::resolution::{DEFAULT_BRACKET_NS, DEFAULT_SCAN_POINTS, DEFAULT_TOLERANCE_NS};

pub const HZ_PER_GHZ: f64 = 1e9;
pub const NS_PER_SEC: f64 = 1e9;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form scenario label, embedded in outputs.
    pub scenario: String,
    /// RNG seed; the --seed flag overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the --out flag overrides it.
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub system: Option<SystemSection>,
    pub paths: Option<PathsSection>,
    pub noise: Option<NoiseSection>,
    pub distortions: Option<DistortionsSection>,
    pub sweep: Option<SweepSection>,
    pub srl: Option<SrlSection>,
    pub zzb: Option<ZzbSection>,
    pub deb: Option<DebSection>,
    pub constraints: Option<ConstraintsSection>,
    pub solver: Option<SolverSection>,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub carriers_hz: Vec<f64>,
    pub spacings_hz: Vec<f64>,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Complex gains as [re, im] pairs.
    pub gains: Vec<[f64; 2]>,
    pub delays_s: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub snr_db: Option<f64>,
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionsSection {
    /// Timing-offset prior std `sigma_p` in seconds. Only the prior enters
    /// the bounds; the FIM does not depend on realized offset values.
    pub prior_std_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// One of: "separation_s", "aperture_hz", "snr_db".
    pub axis: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrlSection {
    pub bracket_s: Option<[f64; 2]>,
    pub tolerance_s: Option<f64>,
    pub scan_points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzbSection {
    pub amplitude: f64,
    pub prior_width_s: f64,
    pub etau_grid: Option<usize>,
    pub ephi_grid: Option<usize>,
    pub map_trials: Option<usize>,
    pub map_tau_grid: Option<usize>,
    pub map_phi_grid: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebSection {
    /// Distortion scenarios to emit as columns; any of
    /// "none", "phase", "timing", "both".
    pub scenarios: Option<Vec<String>>,
    /// Extra columns: DEB under the "both" scenario for each prior std.
    pub sigma_p_sweep_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    pub lower_hz: Vec<f64>,
    pub upper_hz: Vec<f64>,
    pub spacings_hz: Vec<f64>,
    pub budget_hz: f64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub omega: Option<f64>,
    pub max_ao_iterations: Option<usize>,
    pub max_sca_iterations: Option<usize>,
    pub epsilon: Option<f64>,
    pub restarts: Option<usize>,
    pub qp_tolerance: Option<f64>,
    pub armijo_c1: Option<f64>,
    pub armijo_shrink: Option<f64>,
    pub srl_scan_points: Option<usize>,
    pub srl_tolerance_s: Option<f64>,
    pub ao_tolerance_s: Option<f64>,
}

impl RunConfig {
    /// Parse and validate a config file; returns the config together with
    /// the raw bytes (hashed into output provenance).
    pub fn load(path: &Path) -> anyhow::Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let text = std::str::from_utf8(&bytes).context("config is not UTF-8")?;
        let config: RunConfig = toml::from_str(text).context("config does not match schema")?;
        Ok((config, bytes))
    }

    pub fn system(&self) -> anyhow::Result<MultibandConfig> {
        let sys = self.system.as_ref().ok_or_else(|| SchemaError("[system] section required".into()))?;
        Ok(MultibandConfig::from_si(&sys.carriers_hz, &sys.spacings_hz, &sys.counts)?)
    }

    pub fn path_set(&self) -> anyhow::Result<PathSet> {
        let p = self.paths.as_ref().ok_or_else(|| SchemaError("[paths] section required".into()))?;
        if p.gains.len() != p.delays_s.len() {
            return Err(SchemaError("[paths] gains and delays_s must have equal length".into()).into());
        }
        let paths = p
            .gains
            .iter()
            .zip(&p.delays_s)
            .map(|(&[re, im], &d)| PropagationPath {
                gain: Complex64::new(re, im),
                delay_ns: d * NS_PER_SEC,
            })
            .collect();
        Ok(PathSet::new(paths)?)
    }

    pub fn noise(&self) -> anyhow::Result<NoiseModel> {
        let n = self.noise.as_ref().ok_or_else(|| SchemaError("[noise] section required".into()))?;
        match (n.snr_db, n.variance) {
            (Some(_), Some(_)) => Err(SchemaError("[noise] give either snr_db or variance, not both".into()).into()),
            (Some(snr), None) => Ok(NoiseModel::from_snr_db(snr)?),
            (None, Some(var)) => Ok(NoiseModel::new(var)?),
            (None, None) => Err(SchemaError("[noise] needs snr_db or variance".into()).into()),
        }
    }

    pub fn prior_std_ns(&self) -> anyhow::Result<f64> {
        let d = self.distortions.as_ref().ok_or_else(|| SchemaError("[distortions] section required".into()))?;
        Ok(d.prior_std_s * NS_PER_SEC)
    }

    pub fn sweep_values(&self) -> anyhow::Result<(String, Vec<f64>)> {
        let s = self.sweep.as_ref().ok_or_else(|| SchemaError("[sweep] section required".into()))?;
        if s.points < 1 {
            return Err(SchemaError("[sweep] needs at least one point".into()).into());
        }
        if !matches!(s.axis.as_str(), "separation_s" | "aperture_hz" | "snr_db") {
            return Err(SchemaError(
                "[sweep] axis must be one of separation_s | aperture_hz | snr_db".into(),
            )
            .into());
        }
        let values = if s.points == 1 {
            vec![s.start]
        } else {
            (0..s.points)
                .map(|i| s.start + (s.stop - s.start) * i as f64 / (s.points - 1) as f64)
                .collect()
        };
        Ok((s.axis.clone(), values))
    }

    pub fn srl_settings(&self) -> ((f64, f64), f64, usize) {
        let mut bracket = DEFAULT_BRACKET_NS;
        let mut tol = DEFAULT_TOLERANCE_NS;
        let mut scan = DEFAULT_SCAN_POINTS;
        if let Some(s) = &self.srl {
            if let Some([lo, hi]) = s.bracket_s {
                bracket = (lo * NS_PER_SEC, hi * NS_PER_SEC);
            }
            if let Some(t) = s.tolerance_s {
                tol = t * NS_PER_SEC;
            }
            if let Some(p) = s.scan_points {
                scan = p;
            }
        }
        (bracket, tol, scan)
    }

    pub fn constraint_set(&self) -> anyhow::Result<ConstraintSet> {
        let c = self.constraints.as_ref().ok_or_else(|| SchemaError("[constraints] section required".into()))?;
        Ok(ConstraintSet::new(
            c.lower_hz.iter().map(|x| x / HZ_PER_GHZ).collect(),
            c.upper_hz.iter().map(|x| x / HZ_PER_GHZ).collect(),
            c.spacings_hz.iter().map(|x| x / HZ_PER_GHZ).collect(),
            c.budget_hz / HZ_PER_GHZ,
        )?)
    }

    pub fn solver_options(&self, seed: u64) -> SolverOptions {
        let mut opts = SolverOptions { seed, ..SolverOptions::default() };
        let (bracket, tol, scan) = self.srl_settings();
        opts.srl_bracket_ns = bracket;
        opts.srl_tolerance_ns = tol;
        opts.srl_scan_points = scan;
        if let Some(s) = &self.solver {
            if let Some(v) = s.omega {
                opts.omega = v;
            }
            if let Some(v) = s.max_ao_iterations {
                opts.max_ao_iterations = v;
            }
            if let Some(v) = s.max_sca_iterations {
                opts.max_sca_iterations = v;
            }
            if let Some(v) = s.epsilon {
                opts.epsilon = v;
            }
            if let Some(v) = s.restarts {
                opts.restarts = v;
            }
            if let Some(v) = s.qp_tolerance {
                opts.qp_tolerance = v;
            }
            if let Some(v) = s.armijo_c1 {
                opts.armijo_c1 = v;
            }
            if let Some(v) = s.armijo_shrink {
                opts.armijo_shrink = v;
            }
            if let Some(v) = s.srl_scan_points {
                opts.srl_scan_points = v;
            }
            if let Some(v) = s.srl_tolerance_s {
                opts.srl_tolerance_ns = v * NS_PER_SEC;
            }
            if let Some(v) = s.ao_tolerance_s {
                opts.ao_tolerance_ns = v * NS_PER_SEC;
            }
        }
        opts
    }
}
