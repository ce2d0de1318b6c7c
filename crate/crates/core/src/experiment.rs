//! Batches of seeded sessions with resumable, per-seed transcript files.
//!
//! Output layout:
//!
//! ```text
//! <out>/transcripts/seed-0001.jsonl   one per seed
//! <out>/report.json, report.txt       metrics over the batch
//! <out>/manifest.json                 plan, version, timing
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::agent::{Agent, AgentEndpoint, AgentError, AgentRuntime};
use crate::game::GameConfig;
use crate::metrics::{compute_metrics, ExperimentRecord, MetricsError, MetricsReport};
use crate::orchestrator::{run_session, SessionError, SessionSettings};
use crate::prompt::TemplateSet;
use crate::transcript::{transcript_file_name, JsonlSink, Transcript, TranscriptError};

pub struct ExperimentPlan {
    pub config: GameConfig,
    pub templates: TemplateSet,
    /// One endpoint per party, in party order.
    pub endpoints: Vec<AgentEndpoint>,
    pub settings: SessionSettings,
    pub seeds: Vec<u64>,
    pub parallelism: usize,
    pub out_dir: PathBuf,
    /// Re-run seeds that already have a complete transcript.
    pub force: bool,
    /// Stored verbatim in the manifest.
    pub description: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("no seeds to run")]
    NoSeeds,
    #[error("seed {0} is listed twice")]
    DuplicateSeed(u64),
    #[error("expected {expected} endpoint(s), got {got}")]
    EndpointCount { expected: usize, got: usize },
    #[error("endpoint for party {party}: {source}")]
    Agent {
        party: usize,
        #[source]
        source: AgentError,
    },
    #[error("seed {seed}: {source}")]
    Session {
        seed: u64,
        #[source]
        source: SessionError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Sorted by seed.
    pub records: Vec<ExperimentRecord>,
    pub report: MetricsReport,
    pub executed: Vec<u64>,
    pub reused: Vec<u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    plan: &'a serde_json::Value,
    seeds: &'a [u64],
    executed: &'a [u64],
    reused: &'a [u64],
    started_unix_secs: u64,
    elapsed_secs: f64,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> BatchError + '_ {
    move |source| BatchError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn transcripts_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("transcripts")
}

enum SeedResult {
    Executed(ExperimentRecord),
    Reused(ExperimentRecord),
}

fn run_seed(plan: &ExperimentPlan, agents: &[&dyn Agent], dir: &Path, seed: u64) -> Result<SeedResult, BatchError> {
    let path = dir.join(transcript_file_name(seed));
    if !plan.force && path.exists() {
        let existing = Transcript::load(&path)?;
        if existing.is_complete() {
            return Ok(SeedResult::Reused(existing.to_record()?));
        }
        tracing::warn!(seed, path = %path.display(), "incomplete transcript, running again");
    }
    let mut sink = JsonlSink::create(&path).map_err(io_error(&path))?;
    let record = run_session(&plan.config, &plan.templates, agents, seed, &plan.settings, &mut sink)
        .map_err(|source| BatchError::Session { seed, source })?;
    Ok(SeedResult::Executed(record))
}

/// Runs every seed of the plan, writes transcripts, report and manifest, and
/// returns the records in seed order. Sessions run on up to `parallelism`
/// threads; output does not depend on the thread count.
pub fn run_experiments(plan: &ExperimentPlan, runtime: &AgentRuntime) -> Result<BatchOutcome, BatchError> {
    if plan.seeds.is_empty() {
        return Err(BatchError::NoSeeds);
    }
    let mut seen = BTreeSet::new();
    for seed in &plan.seeds {
        if !seen.insert(*seed) {
            return Err(BatchError::DuplicateSeed(*seed));
        }
    }
    let n = plan.config.n_parties();
    if plan.endpoints.len() != n {
        return Err(BatchError::EndpointCount {
            expected: n,
            got: plan.endpoints.len(),
        });
    }
    let boxed = plan
        .endpoints
        .iter()
        .enumerate()
        .map(|(i, e)| {
            runtime
                .connect(e)
                .map_err(|source| BatchError::Agent { party: i + 1, source })
        })
        .collect::<Result<Vec<Box<dyn Agent>>, _>>()?;
    let agents: Vec<&dyn Agent> = boxed.iter().map(|b| b.as_ref()).collect();

    let dir = transcripts_dir(&plan.out_dir);
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(u64, Result<SeedResult, BatchError>)>> = Mutex::new(Vec::new());
    let workers = plan.parallelism.clamp(1, plan.seeds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = plan.seeds.get(i) else {
                    break;
                };
                let result = run_seed(plan, &agents, &dir, seed);
                results.lock().unwrap().push((seed, result));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(seed, _)| *seed);
    let mut records = Vec::with_capacity(results.len());
    let mut executed = Vec::new();
    let mut reused = Vec::new();
    for (seed, result) in results {
        match result? {
            SeedResult::Executed(r) => {
                executed.push(seed);
                records.push(r);
            }
            SeedResult::Reused(r) => {
                reused.push(seed);
                records.push(r);
            }
        }
    }

    let report = compute_metrics(&records)?;
    write_report(&plan.out_dir, &report)?;
    let mut seeds = plan.seeds.clone();
    seeds.sort_unstable();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        plan: &plan.description,
        seeds: &seeds,
        executed: &executed,
        reused: &reused,
        started_unix_secs: started,
        elapsed_secs: clock.elapsed().as_secs_f64(),
    };
    let path = plan.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(io_error(&path))?;

    Ok(BatchOutcome {
        records,
        report,
        executed,
        reused,
    })
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(dir: &Path, report: &MetricsReport) -> Result<(), BatchError> {
    let json = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&json, text + "\n").map_err(io_error(&json))?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, report.to_text()).map_err(io_error(&txt))?;
    Ok(())
}
