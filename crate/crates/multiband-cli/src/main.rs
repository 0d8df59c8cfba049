//! Command-line front end for the multiband sensing-limits library: loads a
//! TOML scenario config, runs the figure-family sweeps or the system
//! optimizer, and writes reproducible CSV/JSON artifacts.

mod commands;
mod config;
mod fail;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::Ctx;
use config::RunConfig;
use fail::exit_code_for;

#[derive(Parser)]
#[command(name = "multiband", version, about = "Multiband OFDM delay-sensing limits and spectrum optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points and restarts.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include the (expensive) MAP RMSE column where supported.
    #[arg(long, global = true)]
    with_map: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Root CRB of the delay separation vs. separation, plus SRL intersections.
    CrbVsSep,
    /// SRL vs. frequency band aperture.
    SrlVsAperture,
    /// DEB vs. aperture under the configured distortion scenarios.
    DebVsAperture,
    /// ZZB and ECRB (optionally MAP RMSE) vs. SNR or aperture.
    Zzb,
    /// MAP estimator RMSE vs. aperture.
    MapRmse,
    /// Alternating optimization of carriers and subcarrier counts.
    Optimize,
    /// Check that output files were produced from the given config.
    Verify {
        /// Output files to check.
        files: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let config_path = cli
        .config
        .ok_or_else(|| fail::SchemaError("--config PATH is required".into()))?;
    let (config, raw) = RunConfig::load(&config_path)?;
    let ctx = Ctx::new(config, &raw, cli.out, cli.seed, cli.with_map);

    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            builder = builder.num_threads(n);
        }
        builder.build()?
    };
    pool.install(|| match &cli.command {
        Command::CrbVsSep => commands::crb_vs_sep(&ctx),
        Command::SrlVsAperture => commands::srl_vs_aperture(&ctx),
        Command::DebVsAperture => commands::deb_vs_aperture(&ctx),
        Command::Zzb => commands::zzb(&ctx),
        Command::MapRmse => commands::map_rmse_cmd(&ctx),
        Command::Optimize => commands::optimize(&ctx),
        Command::Verify { files } => commands::verify(&ctx, files),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
