use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod io;

use io::Exit;

#[derive(Parser, Debug)]
#[command(name = "wildhodge", version, about = "Local wild Hodge theory on curves: normal forms, correspondence, stability, orbits and disk-grid checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    run: RunConfig,
}

/// Options shared by every subcommand. Unused options are ignored.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Input file(s); meaning depends on the subcommand
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Numerical tolerance (subcommand default when omitted)
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    #[arg(long, global = true)]
    pub grid_nr: Option<usize>,

    #[arg(long, global = true)]
    pub grid_ntheta: Option<usize>,

    /// Inner radius of the annular grid
    #[arg(long, global = true)]
    pub rmin: Option<f64>,

    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Lebesgue exponent of the perturbation norm
    #[arg(long, global = true)]
    pub p: Option<f64>,

    /// Weight offset of the function spaces
    #[arg(long, global = true)]
    pub delta: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Map connection-side local data to Higgs-side data or back
    Correspond,
    /// Test the subsum genericity condition on a curve configuration
    Stability {
        /// Largest number of subsums to enumerate
        #[arg(long, default_value_t = wildhodge::stability::DEFAULT_SUBSUM_CAP)]
        cap: u64,
    },
    /// Find a matrix with given eigenvalues and given diagonal
    OrbitSolve {
        #[arg(long, default_value_t = wildhodge::orbit::DEFAULT_RESTARTS)]
        restarts: usize,
    },
    /// Check the rank-3 example (built-in matrices when no input is given)
    VerifyExample,
    /// Curvature of the sampled local model under grid refinement (CSV)
    ModelCheck {
        #[arg(long, default_value_t = 0.9)]
        rmax: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Growth rates of the canonical frames at the puncture (CSV)
    FrameGrowth {
        /// Angular index of the ray used for the fit
        #[arg(long, default_value_t = 0)]
        ray: usize,
    },
    /// Solve the gauge-fixing fixed point for a perturbation field
    GaugeFix {
        /// Where to write the residual-per-iteration CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Where to write the gauge field u as CSV
        #[arg(long)]
        field_output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        rmax: f64,
        #[arg(long, default_value_t = wildhodge::dbar::gauge::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Formal normal form of an irregular polar part
    Normalize,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("WILDHODGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("WILDHODGE_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("WILDHODGE_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn dispatch(cli: Cli) -> io::CliResult<Exit> {
    let cfg = cli.run;
    for (name, v) in [("--tol", cfg.tol), ("--rmin", cfg.rmin), ("--p", cfg.p)] {
        if let Some(x) = v {
            if !(x > 0.0 && x.is_finite()) {
                return Err(io::Failure::parse(format!("{name} must be positive, got {x}")));
            }
        }
    }
    match cli.command {
        Command::Correspond => commands::correspond(&cfg),
        Command::Stability { cap } => commands::stability(&cfg, cap),
        Command::OrbitSolve { restarts } => commands::orbit_solve(&cfg, restarts),
        Command::VerifyExample => commands::verify_example(&cfg),
        Command::ModelCheck { rmax, levels } => commands::model_check(&cfg, rmax, levels),
        Command::FrameGrowth { ray } => commands::frame_growth(&cfg, ray),
        Command::GaugeFix { trace, field_output, rmax, max_iter } => {
            commands::gauge_fix(&cfg, trace.as_deref(), field_output.as_deref(), rmax, max_iter)
        }
        Command::Normalize => commands::normalize(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Parse as u8 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(Exit::Parse as u8);
    }
    match dispatch(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit as u8)
        }
    }
}
