//! Transcript events, JSONL persistence, and reconstruction of experiment
//! records from stored events.
//!
//! A transcript file holds one JSON object per line, tagged by `event`:
//! `session`, then one `context` per party, then `turn` events in speaking
//! order, an optional `error`, and a closing `outcome`. Speakers are 1-based.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Phase, Usage};
use crate::deal::Deal;
use crate::deal_space::{OutcomePolicy, OutcomeVector};
use crate::game::{GameConfig, Score};
use crate::leakage::Leakage;
use crate::metrics::{gini, ExperimentRecord, RoundRecord};
use crate::orchestrator::SessionMode;
use crate::parser::{DealSource, ParsedAnswer};
use crate::prompt::CotConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seed: u64,
    pub mode: SessionMode,
    pub cot: CotConfig,
    pub rounds: u32,
    pub window: usize,
    pub policy: OutcomePolicy,
    pub parties: Vec<String>,
    pub config: GameConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEvent {
    pub speaker: usize,
    pub name: String,
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub round: u32,
    pub speaker: usize,
    pub name: String,
    pub phase: Phase,
    pub prompt: String,
    pub reply: String,
    pub parsed: ParsedAnswer,
    pub deal: Option<Deal>,
    pub deal_source: DealSource,
    pub partial: bool,
    /// Automatic votes of every party, present when a deal was extracted.
    pub votes: Option<Vec<bool>>,
    pub accept_count: Option<usize>,
    /// The deal passes the quorum and veto rule.
    pub success: Option<bool>,
    pub own_score: Option<Score>,
    pub leak: Leakage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub round: u32,
    pub speaker: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEvent {
    pub deal: Option<Deal>,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub votes: Vec<bool>,
    pub accept_count: usize,
    pub success: bool,
    pub outcome: OutcomeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Session(SessionEvent),
    Context(ContextEvent),
    Turn(TurnEvent),
    Error(ErrorEvent),
    Outcome(OutcomeEvent),
}

/// Receives events as a session produces them.
pub trait EventSink {
    fn record(&mut self, event: &TranscriptEvent) -> io::Result<()>;
}

impl EventSink for Vec<TranscriptEvent> {
    fn record(&mut self, event: &TranscriptEvent) -> io::Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Writes one JSON line per event and flushes after each.
pub struct JsonlSink<W: Write> {
    writer: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(writer: W) -> Self {
        Self { writer }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl JsonlSink<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> EventSink for JsonlSink<W> {
    fn record(&mut self, event: &TranscriptEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.writer, event)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema { path: String, line: usize, message: String },
    #[error("transcript has no session event")]
    NoSession,
    #[error("transcript has no outcome event (incomplete session)")]
    Incomplete,
    #[error("speaker {0} does not exist")]
    Speaker(usize),
}

/// An ordered event list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn new(events: Vec<TranscriptEvent>) -> Self {
        Self { events }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranscriptError> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let file = File::open(path).map_err(|source| TranscriptError::Io {
            path: name.clone(),
            source,
        })?;
        Self::read(BufReader::new(file), &name)
    }

    /// Parses JSONL; `name` labels errors.
    pub fn read(reader: impl BufRead, name: &str) -> Result<Self, TranscriptError> {
        let mut events = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| TranscriptError::Io {
                path: name.to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut event: TranscriptEvent = serde_json::from_str(&line).map_err(|e| TranscriptError::Schema {
                path: name.to_string(),
                line: n + 1,
                message: e.to_string(),
            })?;
            if let TranscriptEvent::Turn(turn) = &mut event {
                turn.parsed.full_text = turn.reply.clone();
            }
            events.push(event);
        }
        Ok(Self { events })
    }

    pub fn to_jsonl(&self) -> String {
        let mut sink = JsonlSink::new(Vec::new());
        for event in &self.events {
            sink.record(event).expect("writing to memory");
        }
        String::from_utf8(sink.into_inner()).expect("JSON is UTF-8")
    }

    pub fn session(&self) -> Option<&SessionEvent> {
        self.events.iter().find_map(|e| match e {
            TranscriptEvent::Session(s) => Some(s),
            _ => None,
        })
    }

    pub fn outcome(&self) -> Option<&OutcomeEvent> {
        self.events.iter().rev().find_map(|e| match e {
            TranscriptEvent::Outcome(o) => Some(o),
            _ => None,
        })
    }

    pub fn turns(&self) -> impl Iterator<Item = &TurnEvent> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Turn(t) => Some(t),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.session().is_some() && self.outcome().is_some()
    }

    /// Rebuilds the metrics record from the stored events.
    pub fn to_record(&self) -> Result<ExperimentRecord, TranscriptError> {
        let session = self.session().ok_or(TranscriptError::NoSession)?;
        let outcome = self.outcome().ok_or(TranscriptError::Incomplete)?;
        let n = session.parties.len();
        let rounds = self
            .turns()
            .map(|turn| {
                if turn.speaker == 0 || turn.speaker > n {
                    return Err(TranscriptError::Speaker(turn.speaker));
                }
                let speaker = turn.speaker - 1;
                let mut parsed = turn.parsed.clone();
                parsed.full_text = turn.reply.clone();
                Ok(RoundRecord {
                    round: turn.round,
                    speaker,
                    parsed,
                    proposed_deal: turn.deal.clone(),
                    own_score_of_proposal: turn.own_score,
                    own_acceptable: turn.votes.as_ref().and_then(|votes| votes.get(speaker).copied()),
                    proposal_success: turn.success,
                    structure_leak: turn.leak.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentRecord {
            seed: session.seed,
            n_parties: n,
            rounds,
            final_deal: if outcome.failed { None } else { outcome.deal.clone() },
            final_accept_count: outcome.accept_count,
            final_success: outcome.success,
            failed: outcome.failed,
            outcome: outcome.outcome.clone(),
        })
    }

    /// p1's proposals in round order: (round, p1 raw score, collective raw
    /// score). Turns without a deal are skipped.
    pub fn progression(&self) -> Vec<ProgressionPoint> {
        let Some(session) = self.session() else {
            return Vec::new();
        };
        let config = &session.config;
        let p1 = config.p1() + 1;
        self.turns()
            .filter(|t| t.speaker == p1)
            .filter_map(|t| {
                let deal = t.deal.as_ref()?;
                let scores = config.score_vector(deal).ok()?;
                Some(ProgressionPoint {
                    seed: session.seed,
                    round: t.round,
                    p1_score: scores[config.p1()],
                    collective_score: scores.iter().sum(),
                })
            })
            .collect()
    }

    /// Gini of the final outcome vector, when the session succeeded.
    pub fn final_gini(&self) -> Option<f64> {
        let outcome = self.outcome()?;
        if outcome.failed || !outcome.success {
            return None;
        }
        let gains: Vec<f64> = outcome.outcome.scores.iter().map(|s| *s as f64).collect();
        gini(&gains).ok().map(|g| g.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProgressionPoint {
    pub seed: u64,
    pub round: u32,
    pub p1_score: Score,
    pub collective_score: Score,
}

/// `seed-0001.jsonl` style file name.
pub fn transcript_file_name(seed: u64) -> String {
    format!("seed-{seed:04}.jsonl")
}

/// Every `*.jsonl` file in `dir`, sorted by name.
pub fn transcript_paths(dir: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// A complete transcript file with its reconstructed record.
pub type LoadedTranscript = (PathBuf, Transcript, ExperimentRecord);

/// Loads every transcript in `dir`. Incomplete transcripts are returned
/// separately so callers can warn about them.
pub fn load_records(dir: impl AsRef<Path>) -> Result<(Vec<LoadedTranscript>, Vec<PathBuf>), TranscriptError> {
    let dir = dir.as_ref();
    let paths = transcript_paths(dir).map_err(|source| TranscriptError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut complete = Vec::new();
    let mut incomplete = Vec::new();
    for path in paths {
        let transcript = Transcript::load(&path)?;
        if !transcript.is_complete() {
            incomplete.push(path);
            continue;
        }
        let record = transcript.to_record()?;
        complete.push((path, transcript, record));
    }
    complete.sort_by_key(|(_, _, r)| r.seed);
    Ok((complete, incomplete))
}
