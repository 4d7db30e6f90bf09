//! Batch front end: parse/emit the JSON file formats, evaluate and plot
//! systems, run the lattice engine, and orchestrate the two end-to-end
//! pipelines with their certified bounds.

mod commands;
mod input;
mod pipeline;
mod svg;

use clap::{Parser, Subcommand, ValueEnum};
use std::process::ExitCode;

/// Exit codes: 0 ok, 1 validation failure, 2 parse failure, 3 precision
/// exhaustion.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Parse(String),
    Precision(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Precision(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Parse(m) | CliError::Precision(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Parse(format!("io error: {e}"))
    }
}

impl From<pgn::realize::RealizeError> for CliError {
    fn from(e: pgn::realize::RealizeError) -> Self {
        match e {
            pgn::realize::RealizeError::PrecisionExhausted => {
                CliError::Precision(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<pgn::lattice::LatticeError> for CliError {
    fn from(e: pgn::lattice::LatticeError) -> Self {
        match e {
            pgn::lattice::LatticeError::Budget(_) => CliError::Precision(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Parser, Debug)]
#[command(
    name = "pgn",
    about = "Toolkit for rigid systems, (n,γ)-systems and lattice minima",
    version
)]
pub struct Cli {
    /// Output format where the subcommand supports a choice.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Mesh δ for subcommands that build or quantize systems.
    #[arg(long, global = true)]
    pub mesh: Option<String>,
    /// Horizon (largest abscissa) for windowed subcommands.
    #[arg(long, global = true)]
    pub horizon: Option<String>,
    /// Working precision for certified interval arithmetic.
    #[arg(long, global = true, default_value_t = 192)]
    pub precision_bits: u32,
    /// Seed for every random generation step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Check a canvas or system file against its structural rules.
    Validate { file: String },
    /// Evaluate the components at one or more abscissae (exact rationals).
    Eval {
        file: String,
        /// Abscissa q (repeatable), as an integer or "p/q".
        #[arg(long = "at", required = true)]
        at: Vec<String>,
    },
    /// Render the combined graph as SVG (one polyline per component,
    /// dashed verticals at the switch numbers).
    Plot {
        file: String,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Apply the constancy-interval reduction to an (n,γ)-system.
    Reduce {
        file: String,
        /// Include the full reduction trace in the JSON output.
        #[arg(long)]
        trace: bool,
    },
    /// Approximate a reduced system by a rigid system of mesh δ.
    Rigidify {
        file: String,
        #[arg(long)]
        trace: bool,
    },
    /// Build a direction u whose minima trajectory tracks the canvas.
    Realize { file: String },
    /// Successive minima of the unit-ball/hyperplane body at given Q.
    Minima {
        /// Integer direction vector, e.g. "1,2,3".
        #[arg(long)]
        direction: String,
        /// Parameter q = log Q (repeatable), as an integer or "p/q".
        #[arg(long = "q")]
        qs: Vec<String>,
        /// Evaluate on the grid {0, step, 2·step, …} up to --horizon
        /// (step defaults to --mesh or 1).
        #[arg(long)]
        grid: bool,
    },
    /// Trajectory q ↦ max{log‖x‖, q + log|x·u|} of one lattice vector.
    Trajectory {
        #[arg(long)]
        direction: String,
        /// Integer vector x, e.g. "3,-1,2".
        #[arg(long)]
        vector: String,
        #[arg(long = "q")]
        qs: Vec<String>,
    },
    /// Tail ratio quadruple of a rigid system and its exponent preimage.
    Exponents {
        file: String,
        /// Start of the tail window (defaults to the first switch number).
        #[arg(long)]
        tail_start: Option<String>,
    },
    /// Realize a canvas, extract minima witnesses and verify their
    /// structural properties.
    Witness { file: String },
    /// End-to-end pipelines with certified bounds.
    Pipeline {
        /// forward: (n,0)-system file → rigid canvas → direction;
        /// inverse: direction → sampled system → reduced → rigid canvas.
        #[arg(long)]
        mode: pipeline::Mode,
        /// Input file (forward mode).
        file: Option<String>,
        /// Direction vector (inverse mode).
        #[arg(long)]
        direction: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
