use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisebound::cgf_bounds::DEFAULT_CURVE_POINTS;
use noisebound_cli::commands::{self, CliError, SimOverrides, EXIT_INVALID, EXIT_OK};
use noisebound_cli::config::SystemConfig;
use noisebound_cli::report::AnalysisReport;

/// Entropy bounds for invariant measures of diffusions with drifted noise.
///
/// Exit status: 0 success, 1 invalid input or system, 2 simulation diverged.
#[derive(Debug, Parser)]
#[command(name = "noisebound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Write the main output to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Emit the report as JSON (seventeen significant digits).
    #[arg(long)]
    json: bool,
    /// Override the check tolerance: identity tolerance for `analyze`,
    /// interval width in standard errors for `simulate`, every published-value
    /// tolerance for `paper-example`.
    #[arg(long, value_name = "REAL")]
    tol: Option<f64>,
    /// Random seed for `simulate`; recorded in the provenance block.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact analysis, bound and gates for a model config.
    Analyze {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Small-gain curve of a linear config as CSV.
    Curve {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CURVE_POINTS)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Analysis plus Euler–Maruyama cross-checks.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        trajectories: Option<usize>,
        /// Sampled steps per trajectory.
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// The built-in four-state benchmark against its published values.
    PaperExample {
        #[command(flatten)]
        common: Common,
    },
    /// Densities and entropy chain of a scalar config; CSV `x,p_star,p,r,psi`.
    Fpk1d {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { EXIT_OK });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Analyze { config, common } => {
            let cfg = load(&config, &common)?;
            let (report, code) = commands::analyze(&cfg, common.tol)?;
            emit_report(&report, &common)?;
            Ok(code)
        }
        Command::Curve { config, points, common } => {
            let cfg = SystemConfig::load(&config)?;
            let rows = commands::curve(&cfg, points)?;
            match &common.out {
                Some(path) => commands::write_curve_csv(&rows, std::fs::File::create(path)?)?,
                None => commands::write_curve_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(EXIT_OK)
        }
        Command::Simulate {
            config,
            trajectories,
            steps,
            common,
        } => {
            let cfg = SystemConfig::load(&config)?;
            let ov = SimOverrides {
                seed: common.seed,
                trajectories,
                steps,
                z: common.tol,
            };
            let (report, code) = commands::simulate(&cfg, &ov)?;
            emit_report(&report, &common)?;
            Ok(code)
        }
        Command::PaperExample { common } => {
            let report = commands::paper_example(common.tol);
            emit_report(&report, &common)?;
            Ok(EXIT_OK)
        }
        Command::Fpk1d { config, common } => {
            let cfg = SystemConfig::load(&config)?;
            let out = commands::fpk1d(&cfg)?;
            let json = out.report.to_json();
            match &common.out {
                Some(path) => {
                    commands::write_fpk1d_csv(&out.rows, std::fs::File::create(path)?)?;
                    println!("{json}");
                }
                None => {
                    commands::write_fpk1d_csv(&out.rows, std::io::stdout().lock())?;
                    eprintln!("{json}");
                }
            }
            Ok(out.exit)
        }
    }
}

/// Loads a config, applying `--seed` to its `sim` record.
fn load(path: &Path, common: &Common) -> Result<SystemConfig, CliError> {
    let mut cfg = SystemConfig::load(path)?;
    if let Some(seed) = common.seed {
        let mut sim = cfg.sim.unwrap_or_default();
        sim.seed = Some(seed);
        cfg.sim = Some(sim);
    }
    Ok(cfg)
}

fn emit_report(report: &AnalysisReport, common: &Common) -> Result<(), CliError> {
    let text = if common.json { report.to_json() } else { report.to_text() };
    write_main(&text, &common.out)
}

fn write_main(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}
