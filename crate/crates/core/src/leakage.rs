//! Structural leakage: private reasoning reaching the other parties because a
//! reply broke the tag contract.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::ParsedAnswer;

const PRIVATE_TAGS: [&str; 4] = ["<PLAN>", "</PLAN>", "<SCRATCHPAD>", "</SCRATCHPAD>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakReason {
    /// The whole reply was broadcast (or, under the literal rule, the
    /// public answer differs from the full reply).
    FullAnswerBroadcast,
    /// A plan or scratchpad tag appears in the public answer.
    PrivateTagInPublic,
    /// `<DEAL>` or `</DEAL>` is missing from the public answer.
    DealTagsMissing,
}

/// How the "full and public answers differ" condition is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadcastRule {
    /// Fires when no answer block was extracted and the full reply is the
    /// public text.
    #[default]
    FallbackOnly,
    /// Fires whenever the two texts differ, which every compliant reply does.
    LiteralDiff,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leakage {
    pub leaked: bool,
    pub reasons: Vec<LeakReason>,
}

pub fn detect_structure_leakage(full_answer: &str, public_answer: &str) -> Leakage {
    detect_structure_leakage_with(full_answer, public_answer, BroadcastRule::default())
}

pub fn detect_structure_leakage_with(full_answer: &str, public_answer: &str, rule: BroadcastRule) -> Leakage {
    let mut reasons = Vec::new();
    let broadcast = match rule {
        BroadcastRule::FallbackOnly => full_answer == public_answer,
        BroadcastRule::LiteralDiff => full_answer != public_answer,
    };
    if broadcast {
        reasons.push(LeakReason::FullAnswerBroadcast);
    }
    if PRIVATE_TAGS.iter().any(|tag| public_answer.contains(tag)) {
        reasons.push(LeakReason::PrivateTagInPublic);
    }
    if !public_answer.contains("<DEAL>") || !public_answer.contains("</DEAL>") {
        reasons.push(LeakReason::DealTagsMissing);
    }
    Leakage {
        leaked: !reasons.is_empty(),
        reasons,
    }
}

/// Leakage of a parsed reply, using its broadcast text as the public answer.
pub fn leakage_of(parsed: &ParsedAnswer) -> Leakage {
    detect_structure_leakage(&parsed.full_text, parsed.broadcast_text())
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("no stored verdict for this prompt/answer pair")]
    MissingVerdict,
    #[error("failed to read verdict file {path}: {message}")]
    Load { path: String, message: String },
    #[error("judge failed: {0}")]
    Other(String),
}

/// Semantic leakage judge (typically a model asked whether the answer reveals
/// private information). None is bundled.
pub trait LeakageJudge {
    fn judge(&self, prompt: &str, answer: &str) -> Result<bool, JudgeError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredVerdict {
    pub prompt: String,
    pub answer: String,
    pub leaked: bool,
}

/// Replays verdicts recorded earlier, for offline runs.
#[derive(Debug, Default)]
pub struct ReplayJudge {
    verdicts: HashMap<(String, String), bool>,
}

impl ReplayJudge {
    pub fn new(verdicts: impl IntoIterator<Item = StoredVerdict>) -> Self {
        Self {
            verdicts: verdicts.into_iter().map(|v| ((v.prompt, v.answer), v.leaked)).collect(),
        }
    }

    /// One JSON [`StoredVerdict`] per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, JudgeError> {
        let path = path.as_ref();
        let load_err = |message: String| JudgeError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let mut verdicts = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            verdicts.push(serde_json::from_str(line).map_err(|e| load_err(format!("line {}: {e}", n + 1)))?);
        }
        Ok(Self::new(verdicts))
    }
}

impl LeakageJudge for ReplayJudge {
    fn judge(&self, prompt: &str, answer: &str) -> Result<bool, JudgeError> {
        self.verdicts
            .get(&(prompt.to_string(), answer.to_string()))
            .copied()
            .ok_or(JudgeError::MissingVerdict)
    }
}

/// Percentage of (prompt, answer) pairs the judge marks as leaking.
pub fn judged_leakage_pct<'a>(
    judge: &dyn LeakageJudge,
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<f64, JudgeError> {
    let mut total = 0usize;
    let mut leaked = 0usize;
    for (prompt, answer) in pairs {
        total += 1;
        leaked += usize::from(judge.judge(prompt, answer)?);
    }
    Ok(if total == 0 {
        0.0
    } else {
        100.0 * leaked as f64 / total as f64
    })
}
