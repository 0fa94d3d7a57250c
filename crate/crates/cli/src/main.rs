mod analyze;
mod config;
mod corpus;
mod demos;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freqplan::freqmoe::Band;

use crate::config::CliConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "freqplan", version, about = "Rule-based restoration planning, routing and spectral demos")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Adds intermediate values to JSON reports.
    #[arg(long, global = true)]
    verbose: bool,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract degradation cues from a PNG and print the restoration plan.
    Analyze {
        /// 8- or 16-bit PNG, gray or RGB(A).
        image: PathBuf,
    },
    /// Write a labelled synthetic corpus and its manifest into --out.
    Synth {
        /// Images per task.
        #[arg(long)]
        n: Option<usize>,
        /// Side length of the square images.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Plan every manifest entry and report accuracy against its label.
    Eval {
        /// JSON-lines file with `file` and `task` per entry; paths are relative to it.
        manifest: PathBuf,
    },
    /// Gate and route a synthetic or loaded token sequence.
    RouteDemo {
        /// Frequency content of the synthetic tokens.
        #[arg(long, value_enum)]
        band: Option<BandArg>,
        /// Rank-3 tensor file (batch x length x dim) to route instead of synthetic tokens.
        #[arg(long, value_name = "PATH")]
        tokens: Option<PathBuf>,
        /// Directory for tensor dumps of the tokens and gates.
        #[arg(long, value_name = "DIR")]
        dump: Option<PathBuf>,
    },
    /// Tabulate operator response, information weight and spectral weight as CSV.
    Spectra {
        /// identity, gaussian_blur(s), ideal_lowpass(c) or mask_band(lo,hi).
        #[arg(long)]
        operator: Option<String>,
        /// Largest frequency on the grid, in cycles per sample.
        #[arg(long)]
        omega_max: Option<f64>,
        /// Number of evenly spaced grid points.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Evaluate the adversarial objective for a restored/reference PNG pair.
    Loss {
        /// Restored image.
        restored: PathBuf,
        /// Ground-truth image of the same size.
        reference: PathBuf,
        /// Frequency regularizer value added with weight gamma.
        #[arg(long, default_value_t = 0.0)]
        freq_term: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BandArg {
    Low,
    High,
    Mixed,
}

impl From<BandArg> for Band {
    fn from(b: BandArg) -> Self {
        match b {
            BandArg::Low => Band::Low,
            BandArg::High => Band::High,
            BandArg::Mixed => Band::Mixed,
        }
    }
}

pub struct Context {
    pub cfg: CliConfig,
    pub verbose: bool,
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = config::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    let mut ctx = Context {
        cfg,
        verbose: cli.global.verbose,
        out: cli.global.out,
    };
    match cli.command {
        Command::Analyze { image } => analyze::run(&ctx, &image),
        Command::Synth { n, size } => {
            if let Some(n) = n {
                ctx.cfg.synth.n_per_class = n;
            }
            if let Some(size) = size {
                ctx.cfg.synth.size = size;
            }
            corpus::synth(&ctx)
        }
        Command::Eval { manifest } => corpus::eval(&ctx, &manifest),
        Command::RouteDemo { band, tokens, dump } => {
            if let Some(b) = band {
                ctx.cfg.demo.band = b.into();
            }
            demos::route(&ctx, tokens.as_deref(), dump.as_deref())
        }
        Command::Spectra { operator, omega_max, points } => {
            let s = &mut ctx.cfg.spectra;
            if let Some(op) = operator {
                s.operator = op;
            }
            if let Some(w) = omega_max {
                s.omega_max = w;
            }
            if let Some(p) = points {
                s.points = p;
            }
            demos::spectra(&ctx)
        }
        Command::Loss { restored, reference, freq_term } => demos::loss(&ctx, &restored, &reference, freq_term),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freqplan: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
