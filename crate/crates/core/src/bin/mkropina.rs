//! Command-line front end: analyze, metrize, geodesic.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mkropina::analysis::{analyze, run_geodesic, run_metrize, AnalyzeOptions};
use mkropina::config::GeometryConfig;
use mkropina::error::Error;
use mkropina::geodesics::{trajectory_to_csv, GeodesicState};

/// Decides Berwald and metrizability properties of m-Kropina Finsler spaces
/// with closed null 1-form, and integrates their geodesics.
#[derive(Parser)]
#[command(name = "mkropina", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Overrides the sampling seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the per-axis grid point count of the config.
    #[arg(long, global = true)]
    grid_density: Option<usize>,
    /// Omits timestamps so identical inputs give byte-identical reports.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the full validity → Berwald → Ricci-skew → verdict pipeline.
    Analyze {
        config: PathBuf,
        /// Writes the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds and verifies the metrizing metric of a metrizable geometry.
    Metrize {
        config: PathBuf,
        /// Base point of the conformal-factor quadrature.
        #[arg(long)]
        u0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrates a spray curve and exports it as CSV.
    Geodesic {
        config: PathBuf,
        /// Initial state as "x1,..,xn;y1,..,yn".
        #[arg(long)]
        init: String,
        /// Final affine parameter.
        #[arg(long)]
        tend: f64,
        /// Integrator relative tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Also measures coincidence with the null geodesics of the
        /// defining metric (requires a metrizable kundt-mode geometry and a
        /// null initial velocity).
        #[arg(long)]
        compare_null: bool,
        /// Writes the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_init(spec: &str, t0: f64) -> Result<GeodesicState, Error> {
    let parts: Vec<&str> = spec.split(';').collect();
    if parts.len() != 2 {
        return Err(Error::Config(
            "--init expects \"x1,..,xn;y1,..,yn\" (one semicolon)".into(),
        ));
    }
    let parse_list = |s: &str| -> Result<Vec<f64>, Error> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("invalid number `{v}` in --init")))
            })
            .collect()
    };
    GeodesicState::new(t0, parse_list(parts[0])?, parse_list(parts[1])?)
}

fn emit(json: String, summary: String, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, json)
                .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
            print!("{summary}");
        }
        None => {
            println!("{json}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let opts = AnalyzeOptions {
        seed: cli.global.seed,
        grid_density: cli.global.grid_density,
        timestamp: !cli.global.no_timestamp,
    };
    match cli.command {
        Command::Analyze { config, out } => {
            let cfg = GeometryConfig::from_file(&config)?;
            let report = analyze(&cfg, &opts)?;
            emit(report.to_json(), report.summary(), out.as_ref())
        }
        Command::Metrize { config, u0, out } => {
            let cfg = GeometryConfig::from_file(&config)?;
            let report = run_metrize(&cfg, &opts, u0)?;
            emit(report.to_json(), report.summary(), out.as_ref())
        }
        Command::Geodesic {
            config,
            init,
            tend,
            tol,
            compare_null,
            out,
        } => {
            let cfg = GeometryConfig::from_file(&config)?;
            let state = parse_init(&init, 0.0)?;
            let run = run_geodesic(&cfg, &opts, state, tend, tol, compare_null)?;
            let csv = trajectory_to_csv(&run.trajectory);
            let mut summary = format!("integrated {} states\n", run.trajectory.len());
            if let Some(cmp) = &run.comparison {
                summary.push_str(&format!(
                    "null-geodesic comparison: max orthogonal residual {:.3e}, \
                     max null violation {:.3e} over {} steps\n",
                    cmp.max_orthogonal_residual, cmp.max_null_violation, cmp.steps
                ));
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)
                        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
                    print!("{summary}");
                }
                None => {
                    print!("{csv}");
                    eprint!("{summary}");
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code().clamp(0, 255) as u8)
        }
    }
}
