mod config;
mod error;
mod fit;
mod io;
mod plot;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{OutputDir, RunInfo};

#[derive(Parser)]
#[command(name = "tlsres", version, about = "TLS-limited superconducting resonator toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for synthetic noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic trajectories and sweeps.
    Simulate {
        #[command(subcommand)]
        what: SimulateKind,
    },
    /// Fit models to measured or synthetic data.
    Fit {
        #[command(subcommand)]
        what: FitKind,
    },
    /// Tabulate the coupling classes and derived quantities.
    Distribution {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Also write a gnuplot script.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum SimulateKind {
    Ringdown(SimulateArgs),
    Ringup(SimulateArgs),
    TemperatureSweep(SimulateArgs),
}

#[derive(Args, Clone)]
struct FitCommon {
    #[command(flatten)]
    common: Common,
    /// Input CSV file(s).
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Read power from a `power_dbm` column instead of `power_w`.
    #[arg(long)]
    dbm: bool,
}

#[derive(Args, Clone)]
struct RingdownFitArgs {
    #[command(flatten)]
    fit: FitCommon,
    /// Initial photon number of each trace, in the order of --data.
    #[arg(long, value_delimiter = ',')]
    photons: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum FitKind {
    Ringdown(RingdownFitArgs),
    Ringup(FitCommon),
    Temperature(FitCommon),
    Circle(FitCommon),
}

type Extra = std::collections::BTreeMap<String, serde_json::Value>;

fn execute(
    argv: Vec<String>,
    common: &Common,
    data: &[PathBuf],
    body: impl FnOnce(&RunConfig, &mut OutputDir) -> CliResult<Extra>,
) -> CliResult<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    for p in data {
        if !p.is_file() {
            return Err(CliError::data(p, "file not found"));
        }
    }
    let mut out = OutputDir::create(&common.out)?;
    let (extra, failure) = match body(&cfg, &mut out) {
        Ok(extra) => (extra, None),
        Err(e @ CliError::NotConverged { .. }) => {
            let mut extra = Extra::new();
            extra.insert("converged".into(), false.into());
            (extra, Some(e))
        }
        Err(e) => return Err(e),
    };
    out.finish(&RunInfo {
        command: argv,
        seed: common.seed,
        config: &cfg,
        config_path: common.config.as_deref(),
        data,
        extra,
    })?;
    failure.map_or(Ok(()), Err)
}

fn run(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    match cli.command {
        Command::Simulate { what } => {
            let (args, name): (SimulateArgs, &str) = match &what {
                SimulateKind::Ringdown(a) => (a.clone(), "ringdown"),
                SimulateKind::Ringup(a) => (a.clone(), "ringup"),
                SimulateKind::TemperatureSweep(a) => (a.clone(), "temperature-sweep"),
            };
            let seed = args.common.seed;
            execute(argv, &args.common, &[], |cfg, out| {
                let extra = match what {
                    SimulateKind::Ringdown(_) => simulate::ringdown(cfg, seed, out)?,
                    SimulateKind::Ringup(_) => simulate::ringup(cfg, seed, out)?,
                    SimulateKind::TemperatureSweep(_) => simulate::temperature_sweep(cfg, seed, out)?,
                };
                if args.plot {
                    out.write("plot.gp", &plot::script(name, cfg))?;
                }
                Ok(extra)
            })
        }
        Command::Fit { what } => {
            let (common, photons) = match &what {
                FitKind::Ringdown(a) => (a.fit.clone(), a.photons.clone()),
                FitKind::Ringup(a) | FitKind::Temperature(a) | FitKind::Circle(a) => (a.clone(), None),
            };
            let fit_args = fit::FitArgs {
                data: &common.data,
                dbm: common.dbm,
                photons: photons.as_deref(),
            };
            execute(argv, &common.common, &common.data, |cfg, out| match what {
                FitKind::Ringdown(_) => fit::ringdown(cfg, &fit_args, out),
                FitKind::Ringup(_) => fit::ringup(cfg, &fit_args, out),
                FitKind::Temperature(_) => fit::temperature(cfg, &fit_args, out),
                FitKind::Circle(_) => fit::circle(cfg, &fit_args, out),
            })
        }
        Command::Distribution { common } => execute(argv, &common, &[], report::distribution),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Model(tls_resonator::Error::FixedPointDivergence { residual_history, .. }) = &e {
                eprintln!("residual history: {residual_history:?}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
