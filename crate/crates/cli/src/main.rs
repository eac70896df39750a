use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use periodica::potentials::Side;
use periodica_cli::commands::parse_range;
use periodica_cli::config::SweepKind;
use periodica_cli::{run, CliError, Command, RunConfig};

/// Periodic fundamental solutions and volume potentials.
#[derive(Parser)]
#[command(name = "periodica", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; the artifact goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Plus,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Resolution,
    Nmax,
    Zmax,
}

#[derive(Subcommand)]
enum Cmd {
    /// Kernel values, gradients and truncation bounds at points.
    Greens(Common),
    /// Volume potential values or derivatives at points.
    Potential {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        side: Option<SideArg>,
        /// CSV file with one point per row.
        #[arg(long)]
        points: Option<String>,
        /// Axis `j` or a comma-separated multi-index.
        #[arg(long)]
        deriv: Option<String>,
    },
    /// Runs the check suites and writes a JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// kernel, identities, bounds, solve, roumieu or all.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Kernel norms and the windowed Roumieu seminorm.
    Norms(Common),
    /// Error against a reference while sweeping one parameter.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Sweep kind and range, e.g. `resolution 16..256`.
        #[arg(long, num_args = 2, value_names = ["KIND", "RANGE"])]
        sweep: Option<Vec<String>>,
    },
}

fn parse_sweep(v: &[String]) -> Result<(SweepKind, Vec<usize>), CliError> {
    let kind = match SweepArg::from_str(&v[0], true)
        .map_err(|e| CliError::Input(format!("sweep kind: {e}")))?
    {
        SweepArg::Resolution => SweepKind::Resolution,
        SweepArg::Nmax => SweepKind::Nmax,
        SweepArg::Zmax => SweepKind::Zmax,
    };
    Ok((kind, parse_range(&v[1])?))
}

fn parse_deriv(s: &str) -> Result<Vec<u32>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            CliError::Input(format!(
                "deriv `{s}` must be an axis or a comma-separated multi-index"
            ))
        })
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (common, cmd) = match cli.command {
        Cmd::Greens(c) => (c, Command::Greens),
        Cmd::Potential {
            common,
            side,
            points,
            deriv,
        } => (
            common,
            Command::Potential {
                side: side.map(|s| match s {
                    SideArg::Plus => Side::Plus,
                    SideArg::Minus => Side::Minus,
                }),
                points,
                deriv: deriv.as_deref().map(parse_deriv).transpose()?,
            },
        ),
        Cmd::Verify { common, suite } => (common, Command::Verify { suite }),
        Cmd::Norms(c) => (c, Command::Norms),
        Cmd::Convergence { common, sweep } => (
            common,
            Command::Convergence {
                sweep: sweep.as_deref().map(parse_sweep).transpose()?,
            },
        ),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", common.config.display())))?;
    let cfg = RunConfig::from_json(&text)?;
    let artifact = run(&cfg, &cmd)?;
    match common.out.or(cfg.out.as_ref().map(PathBuf::from)) {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(&artifact.file_name), &artifact.contents)?;
        }
        None => print!("{}", artifact.contents),
    }
    for name in &artifact.failing {
        eprintln!("check failed: {name}");
    }
    Ok(artifact.failing.is_empty())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
