//! The CLI commands: figure-family sweeps, the system optimizer, and output
//! verification. Sweep points are dispatched to the rayon pool and gathered
//! in axis order, so outputs are byte-identical for a fixed (config, seed,
//! version) regardless of thread count.

use anyhow::Context;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;
use std::path::PathBuf;

use multiband::fisher::{
    crb_delay_separation, deb, fim_compact_relaxed, FimScenario, RelaxedBand,
};
use multiband::model::{MultibandConfig, NoiseModel};
use multiband::optimizer::{
    ao_optimize, baseline_center, baseline_outermost, mean_amplitude_gains, srl_of_design,
    SolverOptions,
};
use multiband::resolution::{srl_solve, CrbRoute, SrlQuery};
use multiband::zzb::{ecrb_single_path, map_rmse, zzb_delay, ZzbSpec};

use crate::config::{RunConfig, HZ_PER_GHZ, NS_PER_SEC};
use crate::fail::SchemaError;
use crate::output::{config_sha256, write_json, Provenance, SweepTable};

pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub with_map: bool,
    pub provenance: Provenance,
}

impl Ctx {
    pub fn new(
        config: RunConfig,
        raw: &[u8],
        out: Option<PathBuf>,
        seed: Option<u64>,
        with_map: bool,
    ) -> Self {
        let seed = seed.unwrap_or(config.seed);
        let out_dir = out.unwrap_or_else(|| PathBuf::from(&config.output_dir));
        let provenance = Provenance {
            scenario: config.scenario.clone(),
            config_sha256: config_sha256(raw),
            seed,
        };
        Self { config, out_dir, seed, with_map, provenance }
    }

    /// Canonical relaxed bands of the configured system.
    fn bands(&self) -> anyhow::Result<Vec<RelaxedBand>> {
        let system = self.config.system()?;
        warn_about(&system);
        Ok(system
            .subbands()
            .iter()
            .zip(system.carrier_offsets_ghz())
            .map(|(sb, off)| RelaxedBand {
                carrier_offset_ghz: off,
                spacing_ghz: sb.spacing_ghz,
                n_sub: sb.n_sub as f64,
            })
            .collect())
    }

    /// The two canonical path gains for K=2 bound computations.
    fn two_gains(&self) -> anyhow::Result<[Complex64; 2]> {
        let paths = self.config.path_set()?;
        if paths.num_paths() != 2 {
            return Err(SchemaError(format!(
                "this command needs exactly two paths, got {}",
                paths.num_paths()
            ))
            .into());
        }
        let g = paths.gains();
        Ok([g[0], g[1]])
    }

    fn srl_query(
        &self,
        bands: Vec<RelaxedBand>,
        gains: [Complex64; 2],
        noise: &NoiseModel,
        prior_std_ns: f64,
        with_distortions: bool,
    ) -> SrlQuery {
        let (bracket, tolerance, scan) = self.config.srl_settings();
        SrlQuery {
            bands,
            gains,
            noise_variance: noise.variance,
            prior_std_ns,
            with_distortions,
            bracket_ns: bracket,
            tolerance_ns: tolerance,
            scan_points: scan,
            route: CrbRoute::Compact,
        }
    }
}

fn warn_about(system: &MultibandConfig) {
    for w in system.warnings() {
        eprintln!("warning: {w}");
    }
}

fn sqrt_crb(
    bands: &[RelaxedBand],
    gains: [Complex64; 2],
    dtau_ns: f64,
    noise: &NoiseModel,
    prior_std_ns: f64,
    scenario: FimScenario,
) -> anyhow::Result<f64> {
    let fim = fim_compact_relaxed(bands, gains, dtau_ns, noise, prior_std_ns, scenario)?;
    Ok(crb_delay_separation(&fim)?.sqrt())
}

/// Root CRB for the delay separation versus separation, with and without
/// distortions and against the single-contiguous-band benchmark, plus the
/// SRL intersections of each curve.
pub fn crb_vs_sep(ctx: &Ctx) -> anyhow::Result<i32> {
    let (axis, values) = ctx.config.sweep_values()?;
    if axis != "separation_s" {
        return Err(SchemaError("crb-vs-sep sweeps axis = \"separation_s\"".into()).into());
    }
    let bands = ctx.bands()?;
    let gains = ctx.two_gains()?;
    let noise = ctx.config.noise()?;
    let prior = ctx.config.prior_std_ns()?;
    let single = vec![RelaxedBand {
        carrier_offset_ghz: 0.0,
        spacing_ghz: bands[0].spacing_ghz,
        n_sub: bands.iter().map(|b| b.n_sub).sum(),
    }];

    let rows: anyhow::Result<Vec<Vec<f64>>> = values
        .par_iter()
        .map(|&sep_s| {
            let dtau = sep_s * NS_PER_SEC;
            Ok(vec![
                dtau,
                sqrt_crb(&bands, gains, dtau, &noise, prior, FimScenario::Full)?,
                sqrt_crb(&bands, gains, dtau, &noise, prior, FimScenario::DistortionFree)?,
                sqrt_crb(&single, gains, dtau, &noise, prior, FimScenario::DistortionFree)?,
            ])
        })
        .collect();

    let mut table = SweepTable::new(vec![
        "delta_tau_ns".into(),
        "sqrt_crb_with_distortions_ns".into(),
        "sqrt_crb_without_ns".into(),
        "sqrt_crb_single_band_ns".into(),
    ]);
    for row in rows? {
        table.push_row(row);
    }
    for (key, bands, with) in [
        ("srl_with_distortions_ns", bands.clone(), true),
        ("srl_without_ns", bands.clone(), false),
        ("srl_single_band_ns", single, false),
    ] {
        let sol = srl_solve(&ctx.srl_query(bands, gains, &noise, prior, with))?;
        table.add_extra(key, crate::output::format_float(sol.srl_ns));
    }
    table.write(&ctx.out_dir, "crb_vs_sep.csv", &ctx.provenance)?;
    Ok(0)
}

fn aperture_bands(ctx: &Ctx, aperture_ghz: f64) -> anyhow::Result<Vec<RelaxedBand>> {
    let mut bands = ctx.bands()?;
    if bands.len() != 2 {
        return Err(SchemaError("aperture sweeps need exactly two subbands".into()).into());
    }
    bands[1].carrier_offset_ghz = aperture_ghz;
    Ok(bands)
}

/// SRL versus frequency band aperture, with and without distortions.
pub fn srl_vs_aperture(ctx: &Ctx) -> anyhow::Result<i32> {
    let (axis, values) = ctx.config.sweep_values()?;
    if axis != "aperture_hz" {
        return Err(SchemaError("srl-vs-aperture sweeps axis = \"aperture_hz\"".into()).into());
    }
    let gains = ctx.two_gains()?;
    let noise = ctx.config.noise()?;
    let prior = ctx.config.prior_std_ns()?;
    let rows: anyhow::Result<Vec<Vec<f64>>> = values
        .par_iter()
        .map(|&ap_hz| {
            let ap = ap_hz / HZ_PER_GHZ;
            let bands = aperture_bands(ctx, ap)?;
            let with = srl_solve(&ctx.srl_query(bands.clone(), gains, &noise, prior, true))?;
            let without = srl_solve(&ctx.srl_query(bands, gains, &noise, prior, false))?;
            Ok(vec![ap, with.srl_ns, without.srl_ns])
        })
        .collect();
    let mut table = SweepTable::new(vec![
        "aperture_ghz".into(),
        "srl_with_distortions_ns".into(),
        "srl_without_ns".into(),
    ]);
    for row in rows? {
        table.push_row(row);
    }
    table.write(&ctx.out_dir, "srl_vs_aperture.csv", &ctx.provenance)?;
    Ok(0)
}

/// DEB versus aperture for the configured distortion scenarios, optionally
/// sweeping the timing prior std.
pub fn deb_vs_aperture(ctx: &Ctx) -> anyhow::Result<i32> {
    let (axis, values) = ctx.config.sweep_values()?;
    if axis != "aperture_hz" {
        return Err(SchemaError("deb-vs-aperture sweeps axis = \"aperture_hz\"".into()).into());
    }
    let gains = ctx.two_gains()?;
    let noise = ctx.config.noise()?;
    let prior = ctx.config.prior_std_ns()?;
    let paths = ctx.config.path_set()?;
    let dtau = paths.delay_separation_ns()?;

    let scenario_names = ctx
        .config
        .deb
        .as_ref()
        .and_then(|d| d.scenarios.clone())
        .unwrap_or_else(|| vec!["none".into(), "phase".into(), "timing".into(), "both".into()]);
    let mut scenarios = Vec::new();
    for name in &scenario_names {
        scenarios.push(match name.as_str() {
            "none" => FimScenario::DistortionFree,
            "phase" => FimScenario::PhaseOnly,
            "timing" => FimScenario::TimingOnly,
            "both" => FimScenario::Full,
            other => {
                return Err(SchemaError(format!(
                    "[deb] unknown scenario {other:?} (use none|phase|timing|both)"
                ))
                .into())
            }
        });
    }
    let sigma_sweep: Vec<f64> = ctx
        .config
        .deb
        .as_ref()
        .and_then(|d| d.sigma_p_sweep_s.clone())
        .unwrap_or_default()
        .iter()
        .map(|s| s * NS_PER_SEC)
        .collect();

    let mut columns = vec!["aperture_ghz".to_string()];
    columns.extend(scenario_names.iter().map(|n| format!("deb_{n}_ns")));
    columns.extend(sigma_sweep.iter().map(|s| format!("deb_both_sigma_p_{s:e}_ns")));

    let rows: anyhow::Result<Vec<Vec<f64>>> = values
        .par_iter()
        .map(|&ap_hz| {
            let ap = ap_hz / HZ_PER_GHZ;
            let bands = aperture_bands(ctx, ap)?;
            let mut row = vec![ap];
            for scenario in &scenarios {
                let fim = fim_compact_relaxed(&bands, gains, dtau, &noise, prior, *scenario)?;
                row.push(deb(&fim)?);
            }
            for &sp in &sigma_sweep {
                let fim = fim_compact_relaxed(&bands, gains, dtau, &noise, sp, FimScenario::Full)?;
                row.push(deb(&fim)?);
            }
            Ok(row)
        })
        .collect();

    let mut table = SweepTable::new(columns);
    for row in rows? {
        table.push_row(row);
    }
    table.write(&ctx.out_dir, "deb_vs_aperture.csv", &ctx.provenance)?;
    Ok(0)
}

fn zzb_spec_at(ctx: &Ctx, aperture_ghz: Option<f64>, noise_var: f64) -> anyhow::Result<ZzbSpec> {
    let z = ctx
        .config
        .zzb
        .as_ref()
        .ok_or_else(|| SchemaError("[zzb] section required".into()))?;
    let system = ctx.config.system()?;
    let system = match aperture_ghz {
        None => system,
        Some(ap) => {
            let sb = system.subbands();
            if sb.len() != 2 {
                return Err(SchemaError("aperture sweeps need exactly two subbands".into()).into());
            }
            MultibandConfig::two_band(sb[0].carrier_ghz, sb[0].carrier_ghz + ap, sb[0].spacing_ghz, sb[0].n_sub)?
        }
    };
    let mut spec = ZzbSpec::new(system, z.amplitude, noise_var, z.prior_width_s * NS_PER_SEC)?;
    if let Some(n) = z.etau_grid {
        spec.etau_grid = n;
    }
    if let Some(n) = z.ephi_grid {
        spec.ephi_grid = n;
    }
    spec.validate()?;
    Ok(spec)
}

/// ZZB / ECRB (and optionally MAP RMSE) over an SNR or aperture axis.
pub fn zzb(ctx: &Ctx) -> anyhow::Result<i32> {
    let (axis, values) = ctx.config.sweep_values()?;
    let z = ctx
        .config
        .zzb
        .as_ref()
        .ok_or_else(|| SchemaError("[zzb] section required".into()))?;
    let (trials, tau_grid, phi_grid) = (
        z.map_trials.unwrap_or(200),
        z.map_tau_grid.unwrap_or(400),
        z.map_phi_grid.unwrap_or(256),
    );
    let base_noise = ctx.config.noise()?;

    let mut columns = vec![
        match axis.as_str() {
            "snr_db" => "snr_db".to_string(),
            "aperture_hz" => "aperture_ghz".to_string(),
            other => {
                return Err(SchemaError(format!(
                    "zzb sweeps snr_db or aperture_hz, got {other:?}"
                ))
                .into())
            }
        },
        "sqrt_zzb_ns".into(),
        "ecrb_ns".into(),
    ];
    if ctx.with_map {
        columns.push("map_rmse_ns".into());
    }

    let rows: anyhow::Result<Vec<Vec<f64>>> = values
        .par_iter()
        .map(|&v| {
            let (axis_value, spec) = match axis.as_str() {
                "snr_db" => (v, zzb_spec_at(ctx, None, 10f64.powf(-v / 10.0))?),
                _ => {
                    let ap = v / HZ_PER_GHZ;
                    (ap, zzb_spec_at(ctx, Some(ap), base_noise.variance)?)
                }
            };
            let bound = zzb_delay(&spec)?;
            let ecrb = ecrb_single_path(&spec, 16, ctx.seed)?;
            let mut row = vec![axis_value, bound.sqrt_ns, ecrb.ecrb_ns];
            if ctx.with_map {
                row.push(map_rmse(&spec, trials, tau_grid, phi_grid, ctx.seed)?.rmse_ns);
            }
            Ok(row)
        })
        .collect();

    let mut table = SweepTable::new(columns);
    for row in rows? {
        table.push_row(row);
    }
    table.write(&ctx.out_dir, "zzb.csv", &ctx.provenance)?;
    Ok(0)
}

/// MAP RMSE over an aperture axis.
pub fn map_rmse_cmd(ctx: &Ctx) -> anyhow::Result<i32> {
    let (axis, values) = ctx.config.sweep_values()?;
    if axis != "aperture_hz" {
        return Err(SchemaError("map-rmse sweeps axis = \"aperture_hz\"".into()).into());
    }
    let z = ctx
        .config
        .zzb
        .as_ref()
        .ok_or_else(|| SchemaError("[zzb] section required".into()))?;
    let (trials, tau_grid, phi_grid) = (
        z.map_trials.unwrap_or(200),
        z.map_tau_grid.unwrap_or(400),
        z.map_phi_grid.unwrap_or(256),
    );
    let noise = ctx.config.noise()?;
    let rows: anyhow::Result<Vec<Vec<f64>>> = values
        .par_iter()
        .map(|&ap_hz| {
            let ap = ap_hz / HZ_PER_GHZ;
            let spec = zzb_spec_at(ctx, Some(ap), noise.variance)?;
            let r = map_rmse(&spec, trials, tau_grid, phi_grid, ctx.seed)?;
            Ok(vec![ap, r.rmse_ns])
        })
        .collect();
    let mut table = SweepTable::new(vec!["aperture_ghz".into(), "map_rmse_ns".into()]);
    for row in rows? {
        table.push_row(row);
    }
    table.write(&ctx.out_dir, "map_rmse.csv", &ctx.provenance)?;
    Ok(0)
}

/// Count groups of subbands separated by more than ~1 kHz.
fn spectrum_groups(carriers_ghz: &[f64], bandwidths_ghz: &[f64]) -> usize {
    let mut order: Vec<usize> = (0..carriers_ghz.len()).collect();
    order.sort_by(|&a, &b| carriers_ghz[a].total_cmp(&carriers_ghz[b]));
    let mut groups = 0;
    let mut prev_edge = f64::NEG_INFINITY;
    for &i in &order {
        let lo = carriers_ghz[i] - 0.5 * bandwidths_ghz[i];
        if lo > prev_edge + 1e-6 {
            groups += 1;
        }
        prev_edge = prev_edge.max(carriers_ghz[i] + 0.5 * bandwidths_ghz[i]);
    }
    groups
}

/// Run Algorithm-style alternating optimization, evaluate both baselines on
/// the same inputs, and write the result JSON plus the AO trace CSV.
pub fn optimize(ctx: &Ctx) -> anyhow::Result<i32> {
    // inverted boxes are an infeasible constraint set (exit 4), reported
    // with the indices of the unsatisfiable edge constraints
    if let Some(c) = &ctx.config.constraints {
        let m = c.lower_hz.len().min(c.upper_hz.len());
        let mut violated = Vec::new();
        for i in 0..m {
            // rejects NaN bounds as well
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(c.lower_hz[i] < c.upper_hz[i]) {
                violated.push(i);
                violated.push(m + i);
            }
        }
        if !violated.is_empty() {
            return Err(multiband::Error::Infeasible(violated).into());
        }
    }
    let cs = ctx.config.constraint_set()?;
    let paths = ctx.config.path_set()?;
    let gains = mean_amplitude_gains(&paths.gains());
    let noise = ctx.config.noise()?;
    let prior = ctx.config.prior_std_ns()?;
    let opts: SolverOptions = ctx.config.solver_options(ctx.seed);

    let result = ao_optimize(&cs, gains, noise.variance, prior, &opts)?;

    // DEB for figure reproduction: evaluated at the configured path
    // separation with the configured gains (the SRL-point DEB in `final`
    // reflects the barely-resolvable operating point instead)
    let path_gains = {
        let g = paths.gains();
        if g.len() == 2 {
            Some([g[0], g[1]])
        } else {
            None
        }
    };
    let dtau_paths = paths.delay_separation_ns().ok();
    let deb_at_paths = |xi: &nalgebra::DVector<f64>| -> anyhow::Result<Option<f64>> {
        let (Some(g2), Some(dtau)) = (path_gains, dtau_paths) else {
            return Ok(None);
        };
        let m = cs.num_subbands();
        let bands: Vec<RelaxedBand> = (0..m)
            .map(|i| RelaxedBand {
                carrier_offset_ghz: xi[i] - xi[0],
                spacing_ghz: cs.spacing_ghz[i],
                n_sub: xi[m + i],
            })
            .collect();
        let fim = fim_compact_relaxed(&bands, g2, dtau, &noise, prior, FimScenario::Full)?;
        Ok(Some(deb(&fim)? / NS_PER_SEC))
    };

    let baseline_json = |xi: &nalgebra::DVector<f64>| -> anyhow::Result<serde_json::Value> {
        let m = cs.num_subbands();
        let srl = srl_of_design(&cs, xi, gains, noise.variance, prior, &opts)?;
        Ok(json!({
            "carriers_hz": (0..m).map(|i| xi[i] * HZ_PER_GHZ).collect::<Vec<_>>(),
            "counts": (0..m).map(|i| xi[m + i]).collect::<Vec<_>>(),
            "srl_s": srl / NS_PER_SEC,
            "deb_at_path_separation_s": deb_at_paths(xi)?,
        }))
    };
    let baselines = json!({
        "center": baseline_json(&baseline_center(&cs)?)?,
        "outermost": baseline_json(&baseline_outermost(&cs)?)?,
    });

    let bandwidths: Vec<f64> = result
        .counts
        .iter()
        .zip(&cs.spacing_ghz)
        .map(|(&n, &fs)| n as f64 * fs)
        .collect();
    let m = cs.num_subbands();
    let mut xi_final = nalgebra::DVector::<f64>::zeros(2 * m);
    for i in 0..m {
        xi_final[i] = result.carriers_ghz[i];
        xi_final[m + i] = result.counts[i] as f64;
    }
    let value = json!({
        "provenance": {
            "tool": format!("multiband {}", env!("CARGO_PKG_VERSION")),
            "scenario": ctx.provenance.scenario,
            "config_sha256": ctx.provenance.config_sha256,
            "seed": ctx.seed,
        },
        "final": {
            "carriers_hz": result.carriers_ghz.iter().map(|c| c * HZ_PER_GHZ).collect::<Vec<_>>(),
            "counts": result.counts,
            "bandwidths_hz": bandwidths.iter().map(|b| b * HZ_PER_GHZ).collect::<Vec<_>>(),
            "srl_s": result.srl_ns / NS_PER_SEC,
            "deb_at_srl_s": result.deb_ns / NS_PER_SEC,
            "deb_at_path_separation_s": deb_at_paths(&xi_final)?,
            "feasibility_residuals_ghz": result.feasibility,
            "spectrum_groups": spectrum_groups(&result.carriers_ghz, &bandwidths),
            "converged": result.converged,
            "ao_iterations": result.ao_iterations,
            "init_heuristic": result.init_heuristic,
            "restart_index": result.restart_index,
        },
        "srl_trace_s": result.srl_trace_ns.iter().map(|s| s / NS_PER_SEC).collect::<Vec<_>>(),
        "baselines": baselines,
    });
    write_json(&ctx.out_dir, "optimize_result.json", &value)?;

    let mut trace = SweepTable::new(vec!["ao_iteration".into(), "srl_ns".into()]);
    for (i, srl) in result.srl_trace_ns.iter().enumerate() {
        trace.push_row(vec![i as f64, *srl]);
    }
    trace.write(&ctx.out_dir, "ao_trace.csv", &ctx.provenance)?;

    Ok(if result.converged { 0 } else { 3 })
}

/// Recompute the config hash and compare it with the hash embedded in each
/// output file.
pub fn verify(ctx: &Ctx, files: &[PathBuf]) -> anyhow::Result<i32> {
    if files.is_empty() {
        return Err(SchemaError("verify needs at least one output file".into()).into());
    }
    let mut all_ok = true;
    for file in files {
        let embedded = crate::output::embedded_hash(file)
            .with_context(|| format!("cannot verify {}", file.display()))?;
        let ok = embedded == ctx.provenance.config_sha256;
        println!(
            "{}: {}",
            file.display(),
            if ok { "OK" } else { "MISMATCH" }
        );
        all_ok &= ok;
    }
    Ok(if all_ok { 0 } else { 1 })
}

