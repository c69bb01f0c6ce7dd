//! `vismem`: encode frames, learn a visual memory, score streams online, and
//! evaluate the scores.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "vismem", version, about = "Visual memory interestingness scoring")]
struct Cli {
    /// Run configuration (TOML, dotted section keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `memory.seed` (and the ablation/bench seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode an image directory (or a file listing images) into feature files.
    Encode(EncodeArgs),
    /// Short-term learning over a feature manifest; writes a memory snapshot.
    ShortTerm(ShortTermArgs),
    /// Online scoring of a feature manifest.
    Online(OnlineArgs),
    /// AUC-OP and traditional metrics for a score file against labels.
    Eval(EvalArgs),
    /// Ablation data series.
    Ablate(AblateArgs),
    /// Per-frame timing over a grid of memory shapes.
    Bench(BenchArgs),
    /// Print the effective configuration as flat dotted keys.
    Config,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Image directory, or a text file with one image path per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for feature files and `manifest.tsv`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report undecodable images and continue instead of aborting.
    #[arg(long)]
    skip_bad: bool,
}

#[derive(Args, Debug)]
struct ShortTermArgs {
    /// Feature manifest of the short-term corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Start from this snapshot instead of a fresh bank.
    #[arg(long)]
    memory_in: Option<PathBuf>,
    #[arg(long)]
    memory_out: Option<PathBuf>,
    /// Report destination (JSON); stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OnlineArgs {
    /// Feature manifest of the stream.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    memory_in: Option<PathBuf>,
    #[arg(long)]
    memory_out: Option<PathBuf>,
    /// Score file (JSON lines); stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for per-frame density maps (PGM).
    #[arg(long)]
    density_out: Option<PathBuf>,
    /// Record 0 ms per frame so score files are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Score file (JSON lines).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Labels file: header, then `index, annotator_count` rows.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Comma-separated δ values; overrides `eval.deltas`.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Overrides `eval.stride`.
    #[arg(long)]
    stride: Option<usize>,
    /// Report destination (JSON); stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Writing,
    Capacity,
    Usage,
    LossOfInterest,
    Translation,
    ShortTerm,
    All,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    c: Vec<usize>,
    /// Square spatial sizes h = w.
    #[arg(long, value_delimiter = ',', default_value = "12,16,32")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    /// Fail when read cost grows more than 4.6x for a doubling of h = w.
    #[arg(long)]
    assert_scaling: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.memory.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    let p = &cfg.paths;
    let pick = |flag: &Option<PathBuf>, fallback: &Option<PathBuf>| flag.clone().or_else(|| fallback.clone());
    let need = |path: Option<PathBuf>, what: &str| {
        path.ok_or_else(|| CliError::Usage(format!("missing --{what} (or paths.{} in the config)", what.replace('-', "_"))))
    };
    match &cli.command {
        Command::Encode(a) => commands::encode(
            &cfg,
            &need(pick(&a.input, &p.input), "input")?,
            &need(pick(&a.output, &p.output), "output")?,
            a.skip_bad,
        ),
        Command::ShortTerm(a) => commands::short_term(
            &cfg,
            &need(pick(&a.input, &p.input), "input")?,
            pick(&a.memory_in, &p.memory_in).as_deref(),
            &need(pick(&a.memory_out, &p.memory_out), "memory-out")?,
            a.output.as_deref(),
        ),
        Command::Online(a) => commands::online(
            &cfg,
            &commands::OnlinePaths {
                input: need(pick(&a.input, &p.input), "input")?,
                memory_in: pick(&a.memory_in, &p.memory_in),
                memory_out: pick(&a.memory_out, &p.memory_out),
                output: pick(&a.output, &p.output),
                density_out: pick(&a.density_out, &p.density_out),
            },
            a.no_timing,
        ),
        Command::Eval(a) => {
            let mut cfg = cfg.clone();
            if let Some(d) = &a.delta {
                cfg.eval.deltas = d.clone();
            }
            if let Some(s) = a.stride {
                cfg.eval.stride = s;
            }
            cfg.validate()?;
            commands::eval(
                &cfg,
                &need(pick(&a.input, &p.input), "input")?,
                &need(pick(&a.labels, &p.labels), "labels")?,
                a.output.as_deref(),
            )
        }
        Command::Ablate(a) => commands::ablate(&cfg, a.suite, cli.seed, a.output.as_deref()),
        Command::Bench(a) => commands::bench(
            &commands::BenchGrid {
                ns: a.n.clone(),
                cs: a.c.clone(),
                sizes: a.sizes.clone(),
                frames: a.frames,
                seed: cli.seed.unwrap_or(cfg.memory.seed),
            },
            a.assert_scaling,
            a.output.as_deref(),
        ),
        Command::Config => {
            print!("{}", cfg.to_flat());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vismem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
