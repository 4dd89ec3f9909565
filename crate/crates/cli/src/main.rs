//! `simdsl`: check, run and score simulation programs; train, evaluate and
//! sweep the program-synthesis policy; classify question complexity.
//!
//! Exit codes: 0 success, 1 input or parse error, 2 runtime error,
//! 3 internal error.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "simdsl", version, about = "Process-simulation DSL toolchain")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,

    /// Worker threads for train, eval and sweep (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print its canonical form.
    Check { file: PathBuf },
    /// Execute a program and print the returned value.
    Run {
        file: PathBuf,
        /// Also print the instruction trace as JSON.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Execute a program and print its instruction trace.
    Trace {
        file: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Score a predicted program against a reference.
    Score {
        reference: PathBuf,
        predicted: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Pre-train and fine-tune a policy on a dataset's train split.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        /// Where to write the trained checkpoint.
        #[arg(long)]
        checkpoint_out: Option<PathBuf>,
        /// Write one JSON training record per batch to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Answer a dataset's questions with a checkpoint and report accuracy.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        beam_width: usize,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Fine-tune one starting policy per gamma and report test accuracy.
    Sweep {
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated reward mixing weights.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
        gammas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
    },
    /// Label a program, or every example of a dataset, as complex, simple or other.
    Classify {
        /// A program file, or a `.jsonl` dataset.
        path: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
    },
}

#[derive(Args, Clone)]
pub struct TrainArgs {
    /// JSON-lines dataset.
    #[arg(long)]
    data: PathBuf,
    /// Start from this checkpoint instead of MLE pre-training.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Candidates decoded per example.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Highest-reward candidates kept per example.
    #[arg(long, default_value_t = 4)]
    s: usize,
    /// Candidates per update.
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 32)]
    beam_width: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    mle_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    mle_lr: f64,
    /// Reward BLEU only, without executing candidates.
    #[arg(long)]
    syntactic_only: bool,
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Exact,
    MultipleChoice,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Runtime(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Runtime(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Input("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Internal(format!("cannot start worker pool: {e}")))?;
    }
    let fmt = cli.format;
    match cli.command {
        Command::Check { file } => commands::check(&file, fmt),
        Command::Run { file, trace, max_steps } => commands::run(&file, trace, max_steps, fmt),
        Command::Trace { file, max_steps } => commands::trace(&file, max_steps, fmt),
        Command::Score { reference, predicted, gamma, max_steps } => {
            commands::score(&reference, &predicted, gamma, max_steps, fmt)
        }
        Command::Train { train, checkpoint_out, log } => commands::train(&train, checkpoint_out.as_deref(), log.as_deref(), fmt),
        Command::Eval { data, checkpoint, mode, split, n, beam_width, max_steps } => {
            commands::eval(&data, &checkpoint, mode, split, n, beam_width, max_steps, fmt)
        }
        Command::Sweep { train, gammas, mode } => commands::sweep(&train, &gammas, mode, fmt),
        Command::Classify { path, max_steps } => commands::classify(&path, max_steps, fmt),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("simdsl: {failure}");
            ExitCode::from(failure.code())
        }
        Err(_) => ExitCode::from(3),
    }
}
