use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use giant_eit::analysis::{ATS_THRESHOLD, DEFAULT_SCAN_POINTS};
use giant_eit::cli::{self, CliError, Request, RunConfig};

/// Spectra, resonances and delayed dynamics of a multi-point-coupled
/// three-level atom.
#[derive(Parser, Debug)]
#[command(name = "giant-eit", version)]
struct Args {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file and $GIANT_EIT_OUT_DIR.
    #[arg(long, short, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmission spectrum on the probe grid.
    Spectrum,
    /// Single-photon resonances in the grid range.
    Resonances {
        #[arg(long, default_value_t = DEFAULT_SCAN_POINTS)]
        scan_points: usize,
    },
    /// Decoherence-free detunings in the grid range.
    DfPoints,
    /// Transparency window and EIT/ATS label.
    Window {
        #[arg(long, default_value_t = ATS_THRESHOLD)]
        threshold: f64,
    },
    /// Reservoir delays that cancel the |2> decay.
    Eliminate,
    /// Delayed master equation at the configured probe detuning.
    Dde,
    /// Randomised closed-form vs. oracle comparison.
    OracleCheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        draws: usize,
    },
    /// Built-in transmission spectrum presets.
    Fig3,
    /// The task named in the configuration file.
    Run,
}

fn load(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            cli::parse_config(&text)
        }
    }
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let config = load(args.config.as_ref())?;
    let request = match &args.command {
        Command::Spectrum => Request::Spectrum,
        Command::Resonances { scan_points } => Request::Resonances { scan_points: *scan_points },
        Command::DfPoints => Request::DfPoints,
        Command::Window { threshold } => Request::Window { threshold: *threshold },
        Command::Eliminate => Request::Eliminate,
        Command::Dde => Request::Dde,
        Command::OracleCheck { seed, draws } => Request::OracleCheck { seed: *seed, draws: *draws },
        Command::Fig3 => Request::Fig3,
        Command::Run => match config.task {
            Some(task) => Request::from_task(task),
            None => return Err(CliError::Validation("config has no task".into())),
        },
    };
    let out_dir = cli::resolve_out_dir(args.out_dir.as_deref(), config.output.dir.as_deref());
    cli::run(request, &config, &out_dir)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
