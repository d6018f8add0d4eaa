mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fracperim", version, about = "Fractional s-perimeters of N-clusters on grids")]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Constants,
    Sandwich,
    Isoperimetric,
    Density,
    Infiltration,
    Stability,
    Monotonicity,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the kernel of the configured domain and save it as a cache file.
    Kernel {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Cache file; defaults to <output.dir>/kernel.fclk.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster energy of a label grid.
    Energy {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Minimize the cluster energy under volume constraints and write an experiment directory.
    Minimize {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Experiment directory; defaults to output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a check suite on a label grid; exit 1 if a non-diagnostic check fails.
    Check {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// Defaults to check.suite.
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for reports.ndjson, checks.csv and config.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose nucleation points for one chamber.
    Nucleate {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// Chamber whose cells form the set.
        #[arg(long, default_value_t = 1)]
        chamber: usize,
        /// Residual target; defaults to the largest admissible value.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Truncate the cluster at a distance level from a reference set.
    Truncate {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// Grid file whose nonzero cells form the reference set.
        #[arg(long)]
        reference: PathBuf,
        /// Volume budget τ of the cells outside the reference set.
        #[arg(long)]
        tau: f64,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for truncated.fclg and truncation.csv; defaults to output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monotonicity profile of the extension energy around a boundary cell.
    Phi {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// Integer cell coordinates, comma separated.
        #[arg(long)]
        cell: String,
        /// Increasing radii; defaults to 4h·2^{k/4}, k = 0..4.
        #[arg(long)]
        radii: Option<String>,
        /// Λ′ of the check; defaults to the empirical value.
        #[arg(long)]
        lambda: Option<f64>,
        /// Directory for phi.csv and monotonicity.json; without it the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the extension slab of this chamber into the output directory.
        #[arg(long)]
        slab: Option<usize>,
    },
    /// Blow-up diagnostics at a boundary cell.
    Blowup {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// Integer cell coordinates, comma separated.
        #[arg(long)]
        cell: String,
        /// Decreasing scales; defaults to halving from min(L/4, 32h) down to 4h.
        #[arg(long)]
        scales: Option<String>,
    },
    /// Render a grid as an 8-bit PGM image.
    Render {
        /// Label grid file (FCLG).
        #[arg(long)]
        grid: PathBuf,
        /// PGM file to write.
        #[arg(long)]
        out: PathBuf,
        /// AXIS:INDEX plane of a 3-D grid.
        #[arg(long)]
        slice: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(fracperim::Error),
    Io(std::io::Error),
}

impl From<fracperim::Error> for CliError {
    fn from(e: fracperim::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Outcome of a successful run: whether every check passed.
pub type Outcome = Result<bool, CliError>;

fn flag_table() -> String {
    let mut cmd = Cli::command();
    let mut out = cmd.render_long_help().to_string();
    for sub in cmd.get_subcommands_mut().filter(|c| c.get_name() != "help") {
        let name = sub.get_name().to_string();
        out += &format!("\n--- {name} ---\n{}", sub.render_long_help());
    }
    out
}

fn dispatch(cli: Cli) -> Outcome {
    use commands::*;
    match cli.command {
        Command::Kernel { cfg, out } => kernel(&cfg, out),
        Command::Energy { grid, format, cfg } => energy(&grid, format, &cfg),
        Command::Minimize { cfg, out } => minimize(&cfg, out),
        Command::Check { grid, suite, cfg, out } => check(&grid, suite, &cfg, out),
        Command::Nucleate { grid, chamber, eps, cfg } => nucleate(&grid, chamber, eps, &cfg),
        Command::Truncate { grid, reference, tau, cfg, out } => truncate(&grid, &reference, tau, &cfg, out),
        Command::Phi { grid, cell, radii, lambda, out, slab } => phi(&grid, &cell, radii.as_deref(), lambda, out, slab),
        Command::Blowup { grid, cell, scales } => blowup(&grid, &cell, scales.as_deref()),
        Command::Render { grid, out, slice } => render::render_command(&grid, &out, slice.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("\n{}", flag_table());
            return ExitCode::from(2);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot start {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\n{}", flag_table());
            ExitCode::from(2)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
