use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gtl_cli::config::{FileConfig, Format, Overrides, RunConfig, Suite};
use gtl_cli::{suites, RunError};

#[derive(Parser)]
#[command(
    name = "gtl",
    version,
    about = "Spectral verification suites for geodesic-flow computations",
    arg_required_else_help = false
)]
struct Cli {
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for artifacts; overrides GTL_OUT_DIR and the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Artifact format: csv or jsonl.
    #[arg(long, global = true, value_name = "FORMAT")]
    format: Option<String>,

    /// Random seed override.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// List every suite and its checks, then exit.
    #[arg(long, global = true)]
    list_checks: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Frame commutators, the energy identity, and the projection bracket.
    VerifyStructure,
    /// Ladder kernel dimensions against the closed formulas.
    Kernels,
    /// Reconstruction of twisted transport solutions from two boundary modes.
    Flaminio,
    /// Norm-ratio stability of the transport solver under random data.
    Stability,
    /// Radial growth of power-series extensions and the boundary round trip.
    Trace,
    /// Products of flow-invariant series: holomorphy, unit, associativity.
    Algebra,
    /// Differential squares to zero; the fibre antiderivative splits it.
    Dolbeault,
    /// Pulled-back connections, gauge residuals, and the period obstruction.
    Bundle,
    /// Projectivised Jacobi flow: conjugate points and asymptotic slopes.
    Cone,
}

impl Command {
    fn suite(self) -> Suite {
        match self {
            Command::VerifyStructure => Suite::VerifyStructure,
            Command::Kernels => Suite::Kernels,
            Command::Flaminio => Suite::Flaminio,
            Command::Stability => Suite::Stability,
            Command::Trace => Suite::Trace,
            Command::Algebra => Suite::Algebra,
            Command::Dolbeault => Suite::Dolbeault,
            Command::Bundle => Suite::Bundle,
            Command::Cone => Suite::Cone,
        }
    }
}

fn list_checks() {
    for suite in Suite::ALL {
        println!("{}", suite.name());
        for check in suite.check_names() {
            println!("  {check}");
        }
    }
}

fn run(cli: Cli) -> Result<bool, RunError> {
    let command = cli
        .command
        .ok_or_else(|| RunError::config("a subcommand is required (see --help)"))?;
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let over = Overrides {
        out: cli.out,
        format: cli.format.as_deref().map(Format::parse).transpose()?,
        seed: cli.seed,
    };
    let cfg = RunConfig::resolve(command.suite(), file, over)?;
    let summary = suites::run(&cfg)?;

    for check in &summary.checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {} ({:.3e})", check.name, check.value);
    }
    let verdict = if summary.all_passed { "PASS" } else { "FAIL" };
    let surface = summary.surface.as_deref().unwrap_or("-");
    println!(
        "{verdict} {} surface={} seed={} artifacts={}",
        summary.subcommand,
        surface,
        summary.seed,
        cfg.out_dir.display()
    );
    Ok(summary.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_checks {
        list_checks();
        return ExitCode::SUCCESS;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
