//! `negotiate`: analyze games, run experiment batches, score transcripts and
//! export plot data.
//!
//! Exit codes: 0 success, 1 some experiments failed, 2 usage or config error.

mod analyze;
mod export;
mod plan;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use negotiation_core::agent::AgentRuntime;
use negotiation_core::deal_space::{deal_table, summarize, OutcomePolicy};
use negotiation_core::experiment::{run_experiments, write_report};
use negotiation_core::metrics::{compute_metrics, ExperimentRecord, MetricsReport};
use negotiation_core::orchestrator::SessionMode;
use tracing_subscriber::EnvFilter;

use crate::plan::{load_game, parse_seeds, Overrides, RunPlanFile};

#[derive(Parser)]
#[command(name = "negotiate", version, about = "Scorable multi-party negotiation games")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate every deal of a game and summarize the deal space.
    AnalyzeGame(AnalyzeArgs),
    /// Run a batch of seeded sessions described by a plan file.
    Run(RunArgs),
    /// Recompute metrics from the transcripts in a directory.
    Score(ScoreArgs),
    /// Write plot data (deal progression, inequality) from transcripts.
    Report(ReportArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Game config (JSON file or plain-text game directory).
    #[arg(long)]
    config: PathBuf,
    /// Also report the front over raw scores, without the BATNA rule.
    #[arg(long)]
    no_batna: bool,
    /// Write the per-deal table as TSV.
    #[arg(long, value_name = "PATH")]
    dump_deals: Option<PathBuf>,
    /// Write the analysis as JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Multi,
    #[value(alias = "single-1")]
    Single1,
    #[value(alias = "single-6")]
    Single6,
}

impl From<ModeArg> for SessionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Multi => SessionMode::Multi,
            ModeArg::Single1 => SessionMode::Single1,
            ModeArg::Single6 => SessionMode::Single6,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Run plan (JSON).
    #[arg(long)]
    plan: PathBuf,
    /// Game config, replacing the plan's.
    #[arg(long)]
    config: Option<PathBuf>,
    /// A single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seeds, e.g. "1-10" or "1,4,9".
    #[arg(long)]
    seeds: Option<String>,
    /// Chain-of-thought preset row.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    cot_row: Option<u8>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    rounds: Option<u32>,
    /// Number of public messages each prompt shows.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Output directory, replacing the plan's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run seeds that already have a complete transcript.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Run directory or transcripts directory.
    dir: PathBuf,
    /// Where to write report.json and report.txt (default: DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory or transcripts directory.
    dir: PathBuf,
    /// Where to write progression.tsv and gini.tsv (default: DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Whether every experiment produced a final vote.
enum Status {
    Clean,
    Failures(usize),
}

fn status(records: &[ExperimentRecord]) -> Status {
    match records.iter().filter(|r| r.failed).count() {
        0 => Status::Clean,
        n => Status::Failures(n),
    }
}

fn analyze_game(args: AnalyzeArgs) -> Result<Status> {
    let config = load_game(&args.config)?;
    let policy = OutcomePolicy::ANALYSIS;
    let rows = deal_table(&config, policy)?;
    let analysis = summarize(&config, policy, &rows);
    print!("{}", analyze::render(&analysis, args.no_batna));
    if let Some(path) = &args.dump_deals {
        analyze::dump_deals(path, &config, &rows)?;
    }
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&analysis)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Status::Clean)
}

fn run(args: RunArgs) -> Result<Status> {
    let file = RunPlanFile::load(&args.plan)?;
    let base = args.plan.parent().unwrap_or(Path::new("."));
    let seeds = match (args.seed, &args.seeds) {
        (Some(seed), _) => Some(vec![seed]),
        (None, Some(text)) => Some(parse_seeds(text)?),
        (None, None) => None,
    };
    let overrides = Overrides {
        config: args.config,
        seeds,
        cot_row: args.cot_row,
        mode: args.mode.map(Into::into),
        rounds: args.rounds,
        window: args.window,
        parallelism: args.parallelism,
        out: args.out,
        force: args.force,
    };
    let plan = file.resolve(base, overrides)?;
    let outcome = run_experiments(&plan, &AgentRuntime::default())?;
    print!("{}", outcome.report.to_text());
    println!(
        "\n{} executed, {} reused; output in {}",
        outcome.executed.len(),
        outcome.reused.len(),
        plan.out_dir.display()
    );
    Ok(status(&outcome.records))
}

fn score(args: ScoreArgs) -> Result<Status> {
    let loaded = export::load(&args.dir)?;
    let records: Vec<ExperimentRecord> = loaded.transcripts.into_iter().map(|(_, _, r)| r).collect();
    let report: MetricsReport = compute_metrics(&records)?;
    let out = args.out.unwrap_or(args.dir);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_report(&out, &report)?;
    print!("{}", report.to_text());
    Ok(status(&records))
}

fn report(args: ReportArgs) -> Result<Status> {
    let loaded = export::load(&args.dir)?;
    let out = args.out.unwrap_or(args.dir);
    for path in export::write_plot_data(&loaded, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(Status::Clean)
}

/// The error chain joined by ": ", skipping causes a message already quotes.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let cause = cause.to_string();
        if text.contains(&cause) {
            continue;
        }
        if !text.is_empty() {
            text.push_str(": ");
        }
        text.push_str(&cause);
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::AnalyzeGame(args) => analyze_game(args),
        Command::Run(args) => run(args),
        Command::Score(args) => score(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Failures(n)) => {
            eprintln!("{n} experiment(s) failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(2)
        }
    }
}
