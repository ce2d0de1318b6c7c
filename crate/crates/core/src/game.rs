//! Game model: parties, issues, score tables, and the pure scoring arithmetic.
//!
//! Parties are addressed by their zero-based position in [`GameConfig::parties`]
//! throughout the Rust API. The 1-based `index` field on [`PartySpec`] is the
//! number shown in config files, transcripts and prompts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deal::{Deal, DealError, IssueId};

pub type Score = i64;

pub const DEFAULT_P1_BONUS: Score = 10;
pub const DEFAULT_ROUNDS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueSpec {
    pub id: IssueId,
    pub label: String,
    pub option_count: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_labels: Option<Vec<String>>,
}

impl IssueSpec {
    pub fn option_label(&self, option: u8) -> Option<&str> {
        self.option_labels
            .as_ref()
            .and_then(|labels| labels.get(usize::from(option).checked_sub(1)?))
            .map(String::as_str)
    }
}

/// Behavioural incentive handed to a party through its prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Incentive {
    #[default]
    Cooperative,
    Greedy,
    /// `target` is the 1-based index of the party to sabotage.
    AdversarialTargeted {
        target: usize,
    },
    AdversarialUntargeted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartySpec {
    pub name: String,
    /// 1-based, equal to the party's position in the config plus one.
    pub index: usize,
    /// Public role description shown to every party.
    #[serde(default)]
    pub role: String,
    /// One row per issue (config issue order), one score per option.
    pub score_table: Vec<Vec<Score>>,
    pub threshold: Score,
    /// Falls back to `threshold` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batna: Option<Score>,
    #[serde(default)]
    pub veto: bool,
    #[serde(default)]
    pub is_p1: bool,
    #[serde(default)]
    pub incentive: Incentive,
}

impl PartySpec {
    pub fn batna(&self) -> Score {
        self.batna.unwrap_or(self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub name: String,
    /// Free-text setup shared with every party.
    #[serde(default)]
    pub description: String,
    pub parties: Vec<PartySpec>,
    pub issues: Vec<IssueSpec>,
    #[serde(default)]
    pub issue_context: BTreeMap<IssueId, String>,
    pub initial_deal: Deal,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_p1_bonus")]
    pub p1_bonus: Score,
    /// Defaults to `parties.len() - 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_quorum: Option<usize>,
}

fn default_rounds() -> u32 {
    DEFAULT_ROUNDS
}

fn default_p1_bonus() -> Score {
    DEFAULT_P1_BONUS
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read game config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse game config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Legacy(String),
    #[error("config has no parties")]
    NoParties,
    #[error("config has no issues")]
    NoIssues,
    #[error("issues: duplicate issue id {0}")]
    DuplicateIssue(IssueId),
    #[error("issues.{issue}.option_count: {count} options, need 2..=9")]
    OptionCount { issue: IssueId, count: u8 },
    #[error("issues.{issue}.option_labels: {found} labels for {expected} options")]
    OptionLabels {
        issue: IssueId,
        expected: usize,
        found: usize,
    },
    #[error("parties[{position}].index: expected {expected}, found {found}")]
    PartyIndex {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error("parties[{position}] ({party}).score_table: {detail}")]
    ScoreShape {
        position: usize,
        party: String,
        detail: String,
    },
    #[error("parties: expected exactly one p1, found {0}")]
    P1Count(usize),
    #[error("parties: p1 ({0}) must hold a veto")]
    P1WithoutVeto(String),
    #[error("parties: expected exactly two veto holders (p1 and p2), found {0}")]
    VetoCount(usize),
    #[error("parties[{position}] ({party}).incentive: target {target} is not another party")]
    IncentiveTarget {
        position: usize,
        party: String,
        target: usize,
    },
    #[error("issue_context: unknown issue {0}")]
    UnknownContextIssue(IssueId),
    #[error("initial_deal: {0}")]
    InitialDeal(DealError),
    #[error("rounds: must be at least 1")]
    Rounds,
    #[error("success_quorum: {quorum} exceeds party count {parties}")]
    Quorum { quorum: usize, parties: usize },
}

impl GameConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: GameConfig = serde_json::from_str(text)?;
        config.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Checks every structural invariant and returns the config unchanged.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.parties.is_empty() {
            return Err(ConfigError::NoParties);
        }
        if self.issues.is_empty() {
            return Err(ConfigError::NoIssues);
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if self.issues[..i].iter().any(|other| other.id == issue.id) {
                return Err(ConfigError::DuplicateIssue(issue.id));
            }
            if !(2..=9).contains(&issue.option_count) {
                return Err(ConfigError::OptionCount {
                    issue: issue.id,
                    count: issue.option_count,
                });
            }
            if let Some(labels) = &issue.option_labels {
                if labels.len() != usize::from(issue.option_count) {
                    return Err(ConfigError::OptionLabels {
                        issue: issue.id,
                        expected: usize::from(issue.option_count),
                        found: labels.len(),
                    });
                }
            }
        }

        let n = self.parties.len();
        for (position, party) in self.parties.iter().enumerate() {
            if party.index != position + 1 {
                return Err(ConfigError::PartyIndex {
                    position,
                    expected: position + 1,
                    found: party.index,
                });
            }
            if party.score_table.len() != self.issues.len() {
                return Err(ConfigError::ScoreShape {
                    position,
                    party: party.name.clone(),
                    detail: format!("{} rows for {} issues", party.score_table.len(), self.issues.len()),
                });
            }
            for (row, issue) in party.score_table.iter().zip(&self.issues) {
                if row.len() != usize::from(issue.option_count) {
                    return Err(ConfigError::ScoreShape {
                        position,
                        party: party.name.clone(),
                        detail: format!(
                            "issue {} has {} scores for {} options",
                            issue.id,
                            row.len(),
                            issue.option_count
                        ),
                    });
                }
            }
            if let Incentive::AdversarialTargeted { target } = party.incentive {
                if target == 0 || target > n || target == party.index {
                    return Err(ConfigError::IncentiveTarget {
                        position,
                        party: party.name.clone(),
                        target,
                    });
                }
            }
        }

        let p1s: Vec<&PartySpec> = self.parties.iter().filter(|p| p.is_p1).collect();
        if p1s.len() != 1 {
            return Err(ConfigError::P1Count(p1s.len()));
        }
        if !p1s[0].veto {
            return Err(ConfigError::P1WithoutVeto(p1s[0].name.clone()));
        }
        let vetoes = self.parties.iter().filter(|p| p.veto).count();
        if vetoes != 2 {
            return Err(ConfigError::VetoCount(vetoes));
        }

        if let Some(id) = self.issue_context.keys().find(|id| self.issue_position(**id).is_none()) {
            return Err(ConfigError::UnknownContextIssue(*id));
        }
        self.check_deal(&self.initial_deal).map_err(ConfigError::InitialDeal)?;
        if self.rounds == 0 {
            return Err(ConfigError::Rounds);
        }
        if let Some(quorum) = self.success_quorum {
            if quorum > n {
                return Err(ConfigError::Quorum { quorum, parties: n });
            }
        }
        Ok(self)
    }

    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn quorum(&self) -> usize {
        self.success_quorum
            .unwrap_or_else(|| self.parties.len().saturating_sub(1))
    }

    /// Position of the main negotiator.
    pub fn p1(&self) -> usize {
        self.parties.iter().position(|p| p.is_p1).unwrap_or(0)
    }

    /// Position of the second veto holder.
    pub fn p2(&self) -> Option<usize> {
        self.parties.iter().position(|p| p.veto && !p.is_p1)
    }

    pub fn issue_position(&self, id: IssueId) -> Option<usize> {
        self.issues.iter().position(|issue| issue.id == id)
    }

    pub fn option_counts(&self) -> Vec<u8> {
        self.issues.iter().map(|issue| issue.option_count).collect()
    }

    pub fn issue_ids(&self) -> Vec<IssueId> {
        self.issues.iter().map(|issue| issue.id).collect()
    }

    /// Verifies that `deal` picks exactly one in-range option for every issue.
    pub fn check_deal(&self, deal: &Deal) -> Result<(), DealError> {
        for (id, option) in deal.iter() {
            let issue = self
                .issue_position(id)
                .map(|pos| &self.issues[pos])
                .ok_or(DealError::UnknownIssue(id))?;
            if option == 0 || option > issue.option_count {
                return Err(DealError::OptionOutOfRange {
                    issue: id,
                    option: u32::from(option),
                    max: issue.option_count,
                });
            }
        }
        let missing: Vec<IssueId> = self
            .issues
            .iter()
            .map(|issue| issue.id)
            .filter(|id| deal.option(*id).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(DealError::MissingIssues {
                missing,
                partial: deal.clone(),
            });
        }
        Ok(())
    }

    /// Sum of the party's option scores over all issues. No bonus, no BATNA.
    pub fn deal_score(&self, deal: &Deal, party: usize) -> Result<Score, DealError> {
        self.check_deal(deal)?;
        Ok(self.deal_score_unchecked(deal, party))
    }

    /// Like [`deal_score`](Self::deal_score) for deals already known to be valid.
    pub(crate) fn deal_score_unchecked(&self, deal: &Deal, party: usize) -> Score {
        let table = &self.parties[party].score_table;
        self.issues
            .iter()
            .zip(table)
            .map(|(issue, row)| {
                let option = deal.option(issue.id).unwrap_or(1);
                row[usize::from(option) - 1]
            })
            .sum()
    }

    /// Raw per-party scores of a valid deal, in party order.
    pub fn score_vector(&self, deal: &Deal) -> Result<Vec<Score>, DealError> {
        self.check_deal(deal)?;
        Ok((0..self.parties.len())
            .map(|party| self.deal_score_unchecked(deal, party))
            .collect())
    }

    /// A score equal to the threshold is acceptable.
    pub fn is_acceptable(&self, deal: &Deal, party: usize) -> Result<bool, DealError> {
        Ok(self.deal_score(deal, party)? >= self.parties[party].threshold)
    }

    /// Automatic vote of every party on a valid deal.
    pub fn votes(&self, deal: &Deal) -> Result<Vec<bool>, DealError> {
        let scores = self.score_vector(deal)?;
        Ok(scores
            .iter()
            .zip(&self.parties)
            .map(|(score, party)| *score >= party.threshold)
            .collect())
    }

    pub fn party_by_name(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.name == name)
    }
}

impl fmt::Display for Incentive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Incentive::Cooperative => f.write_str("cooperative"),
            Incentive::Greedy => f.write_str("greedy"),
            Incentive::AdversarialTargeted { target } => {
                write!(f, "adversarial_targeted(target={target})")
            }
            Incentive::AdversarialUntargeted => f.write_str("adversarial_untargeted"),
        }
    }
}
