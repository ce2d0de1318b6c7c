//! Exhaustive analysis of a game's deal space: enumeration, success,
//! realized outcomes with BATNA substitution, Pareto dominance and fronts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deal::{Deal, DealError, IssueId};
use crate::game::{GameConfig, Score};
use crate::metrics::gini;

/// Enumeration refuses spaces larger than this unless forced.
pub const DEAL_SPACE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DealSpaceError {
    #[error("deal space has {0} deals, above the limit of {DEAL_SPACE_LIMIT}")]
    TooLarge(u64),
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pareto front of an empty set")]
    Empty,
    #[error(transparent)]
    Deal(#[from] DealError),
}

/// Number of deals, saturating at `u64::MAX`.
pub fn deal_count(config: &GameConfig) -> u64 {
    config
        .issues
        .iter()
        .fold(1u64, |acc, issue| acc.saturating_mul(u64::from(issue.option_count)))
}

/// All deals, lexicographic in config issue order with option indices ascending.
pub fn enumerate_deals(config: &GameConfig) -> Result<DealIter, DealSpaceError> {
    let count = deal_count(config);
    if count > DEAL_SPACE_LIMIT {
        return Err(DealSpaceError::TooLarge(count));
    }
    Ok(enumerate_deals_unbounded(config))
}

pub fn enumerate_deals_unbounded(config: &GameConfig) -> DealIter {
    DealIter {
        ids: config.issue_ids(),
        counts: config.option_counts(),
        current: Some(vec![1; config.issues.len()]),
        remaining: deal_count(config),
    }
}

/// Odometer over option indices; the last issue varies fastest.
#[derive(Debug, Clone)]
pub struct DealIter {
    ids: Vec<IssueId>,
    counts: Vec<u8>,
    current: Option<Vec<u8>>,
    remaining: u64,
}

impl Iterator for DealIter {
    type Item = Deal;

    fn next(&mut self) -> Option<Deal> {
        let current = self.current.as_mut()?;
        let deal = Deal::from_pairs(self.ids.iter().copied().zip(current.iter().copied()));
        let mut carry = true;
        for pos in (0..current.len()).rev() {
            if current[pos] < self.counts[pos] {
                current[pos] += 1;
                carry = false;
                break;
            }
            current[pos] = 1;
        }
        if carry {
            self.current = None;
        }
        self.remaining = self.remaining.saturating_sub(1);
        Some(deal)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

/// The success rule applied to a vote vector: quorum reached and every veto
/// holder accepts.
pub fn success_from_votes(config: &GameConfig, votes: &[bool]) -> bool {
    let accepted = votes.iter().filter(|v| **v).count();
    accepted >= config.quorum()
        && config
            .parties
            .iter()
            .zip(votes)
            .all(|(party, vote)| !party.veto || *vote)
}

/// Whether a valid deal passes. Invalid deals never pass.
pub fn deal_success(config: &GameConfig, deal: &Deal) -> bool {
    config
        .votes(deal)
        .map(|votes| success_from_votes(config, &votes))
        .unwrap_or(false)
}

/// When p1 receives its bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusPolicy {
    Never,
    /// Only when every party accepts.
    #[default]
    #[serde(rename = "on_6way")]
    OnUnanimous,
    OnSuccess,
}

/// What a party that rejects a passing deal receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectorPayoff {
    #[default]
    Batna,
    DealScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomePolicy {
    #[serde(default)]
    pub bonus: BonusPolicy,
    #[serde(default)]
    pub rejector: RejectorPayoff,
}

impl OutcomePolicy {
    /// No bonus, rejectors on BATNA: the policy used for game analysis tables.
    pub const ANALYSIS: OutcomePolicy = OutcomePolicy {
        bonus: BonusPolicy::Never,
        rejector: RejectorPayoff::Batna,
    };
}

/// Realized per-party scores of a negotiation outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeVector {
    pub scores: Vec<Score>,
    pub success: bool,
    pub bonus_applied: bool,
}

impl OutcomeVector {
    /// Every party on its BATNA.
    pub fn failure(config: &GameConfig) -> Self {
        Self {
            scores: config.parties.iter().map(|p| p.batna()).collect(),
            success: false,
            bonus_applied: false,
        }
    }

    pub fn collective_mean(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().sum::<Score>() as f64 / self.scores.len() as f64
    }
}

pub fn outcome_vector(config: &GameConfig, deal: &Deal, policy: OutcomePolicy) -> Result<OutcomeVector, DealError> {
    let raw = config.score_vector(deal)?;
    Ok(outcome_from_scores(config, &raw, policy))
}

pub(crate) fn outcome_from_scores(config: &GameConfig, raw: &[Score], policy: OutcomePolicy) -> OutcomeVector {
    let votes: Vec<bool> = raw
        .iter()
        .zip(&config.parties)
        .map(|(score, party)| *score >= party.threshold)
        .collect();
    if !success_from_votes(config, &votes) {
        return OutcomeVector::failure(config);
    }
    let unanimous = votes.iter().all(|v| *v);
    let mut scores: Vec<Score> = raw
        .iter()
        .zip(&votes)
        .zip(&config.parties)
        .map(|((score, vote), party)| match (vote, policy.rejector) {
            (false, RejectorPayoff::Batna) => party.batna(),
            _ => *score,
        })
        .collect();
    let bonus_applied = match policy.bonus {
        BonusPolicy::Never => false,
        BonusPolicy::OnUnanimous => unanimous,
        BonusPolicy::OnSuccess => true,
    };
    if bonus_applied {
        scores[config.p1()] += config.p1_bonus;
    }
    OutcomeVector {
        scores,
        success: true,
        bonus_applied,
    }
}

/// `a` is nowhere worse than `b` and strictly better somewhere.
pub fn pareto_dominates(a: &[Score], b: &[Score]) -> Result<bool, DealSpaceError> {
    if a.len() != b.len() {
        return Err(DealSpaceError::LengthMismatch(a.len(), b.len()));
    }
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return Ok(false);
        }
        strict |= x > y;
    }
    Ok(strict)
}

/// Indices (ascending) of the vectors no other vector dominates. Equal
/// vectors never dominate each other, so duplicates are all kept.
pub fn pareto_front<V: AsRef<[Score]>>(vectors: &[V]) -> Result<Vec<usize>, DealSpaceError> {
    if vectors.is_empty() {
        return Err(DealSpaceError::Empty);
    }
    let dim = vectors[0].as_ref().len();
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(DealSpaceError::LengthMismatch(dim, bad.as_ref().len()));
    }
    let mut front = Vec::new();
    'candidates: for (i, candidate) in vectors.iter().enumerate() {
        for (j, other) in vectors.iter().enumerate() {
            if i != j && pareto_dominates(other.as_ref(), candidate.as_ref())? {
                continue 'candidates;
            }
        }
        front.push(i);
    }
    Ok(front)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        Some(Stats { min, avg, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyRange {
    pub party: String,
    pub min: Score,
    pub max: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameAnalysis {
    pub game: String,
    pub policy: OutcomePolicy,
    pub total_deals: usize,
    /// Deals passing the success rule (quorum plus vetoes).
    pub acceptable_count: usize,
    /// Deals accepted by every party.
    pub unanimous_count: usize,
    /// Front size within the acceptable set.
    pub pareto_front_size: usize,
    /// Front size over the outcome vectors of all deals (BATNA substituted).
    pub pareto_front_size_all: usize,
    /// Acceptable deals inside the all-deals front.
    pub acceptable_in_front_all: usize,
    /// Failing deals inside the all-deals front.
    pub failing_in_front_all: usize,
    /// Front size over raw per-party scores of all deals, no BATNA rule.
    pub pareto_front_size_no_batna: usize,
    /// Collective mean score per acceptable deal.
    pub score: Option<Stats>,
    /// Gini of each acceptable deal's outcome vector.
    pub inequality: Option<Stats>,
    /// Per-party realized score range over acceptable deals.
    pub party_ranges: Vec<PartyRange>,
}

/// One row of the per-deal dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DealRow {
    pub deal: Deal,
    pub raw_scores: Vec<Score>,
    pub outcome: OutcomeVector,
    pub accept_count: usize,
    pub success: bool,
    pub unanimous: bool,
    /// Member of the front within the acceptable set.
    pub in_front: bool,
    /// Member of the front over raw scores of all deals.
    pub in_front_no_batna: bool,
}

/// Scores every deal and marks front membership.
pub fn deal_table(config: &GameConfig, policy: OutcomePolicy) -> Result<Vec<DealRow>, DealSpaceError> {
    let mut rows: Vec<DealRow> = Vec::new();
    for deal in enumerate_deals(config)? {
        let raw_scores = config.score_vector(&deal)?;
        let votes: Vec<bool> = raw_scores
            .iter()
            .zip(&config.parties)
            .map(|(s, p)| *s >= p.threshold)
            .collect();
        let outcome = outcome_from_scores(config, &raw_scores, policy);
        rows.push(DealRow {
            deal,
            accept_count: votes.iter().filter(|v| **v).count(),
            success: outcome.success,
            unanimous: votes.iter().all(|v| *v),
            raw_scores,
            outcome,
            in_front: false,
            in_front_no_batna: false,
        });
    }

    let acceptable: Vec<usize> = (0..rows.len()).filter(|i| rows[*i].success).collect();
    if !acceptable.is_empty() {
        let vectors: Vec<&[Score]> = acceptable.iter().map(|i| rows[*i].outcome.scores.as_slice()).collect();
        for k in pareto_front(&vectors)? {
            rows[acceptable[k]].in_front = true;
        }
    }
    if !rows.is_empty() {
        let raw: Vec<&[Score]> = rows.iter().map(|r| r.raw_scores.as_slice()).collect();
        for i in pareto_front(&raw)? {
            rows[i].in_front_no_batna = true;
        }
    }
    Ok(rows)
}

pub fn analyze_game(config: &GameConfig, policy: OutcomePolicy) -> Result<GameAnalysis, DealSpaceError> {
    let rows = deal_table(config, policy)?;
    Ok(summarize(config, policy, &rows))
}

/// Builds the summary from a precomputed deal table.
pub fn summarize(config: &GameConfig, policy: OutcomePolicy, rows: &[DealRow]) -> GameAnalysis {
    let acceptable: Vec<&DealRow> = rows.iter().filter(|r| r.success).collect();

    let all_outcomes: Vec<&[Score]> = rows.iter().map(|r| r.outcome.scores.as_slice()).collect();
    let front_all = if all_outcomes.is_empty() {
        Vec::new()
    } else {
        pareto_front(&all_outcomes).unwrap_or_default()
    };
    let acceptable_in_front_all = front_all.iter().filter(|i| rows[**i].success).count();

    let means: Vec<f64> = acceptable.iter().map(|r| r.outcome.collective_mean()).collect();
    let ginis: Vec<f64> = acceptable
        .iter()
        .filter_map(|r| {
            let gains: Vec<f64> = r.outcome.scores.iter().map(|s| *s as f64).collect();
            gini(&gains).ok().map(|g| g.value)
        })
        .collect();
    let party_ranges = config
        .parties
        .iter()
        .enumerate()
        .filter_map(|(k, party)| {
            let scores = acceptable.iter().map(|r| r.outcome.scores[k]);
            Some(PartyRange {
                party: party.name.clone(),
                min: scores.clone().min()?,
                max: scores.max()?,
            })
        })
        .collect();

    GameAnalysis {
        game: config.name.clone(),
        policy,
        total_deals: rows.len(),
        acceptable_count: acceptable.len(),
        unanimous_count: rows.iter().filter(|r| r.unanimous).count(),
        pareto_front_size: acceptable.iter().filter(|r| r.in_front).count(),
        pareto_front_size_all: front_all.len(),
        acceptable_in_front_all,
        failing_in_front_all: front_all.len() - acceptable_in_front_all,
        pareto_front_size_no_batna: rows.iter().filter(|r| r.in_front_no_batna).count(),
        score: Stats::of(&means),
        inequality: Stats::of(&ginis),
        party_ranges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deal::parse_notation;
    use crate::synthetic::synthetic_game;

    fn two_issue_game(counts: &[u8]) -> GameConfig {
        let issues: Vec<serde_json::Value> = counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                serde_json::json!({"id": ((b'A' + i as u8) as char).to_string(), "label": "x", "option_count": c})
            })
            .collect();
        let table: Vec<Vec<i64>> = counts.iter().map(|c| vec![0; *c as usize]).collect();
        let initial = counts
            .iter()
            .enumerate()
            .map(|(i, _)| format!("{}1", (b'A' + i as u8) as char))
            .collect::<Vec<_>>()
            .join(",");
        let config = serde_json::json!({
            "name": "t",
            "parties": [
                {"name": "P", "index": 1, "score_table": table, "threshold": 0, "veto": true, "is_p1": true},
                {"name": "Q", "index": 2, "score_table": table, "threshold": 0, "veto": true}
            ],
            "issues": issues,
            "initial_deal": initial
        });
        GameConfig::from_json_str(&config.to_string()).unwrap()
    }

    #[test]
    fn synthetic_space_has_720_deals() {
        let config = synthetic_game();
        assert_eq!(config.option_counts(), vec![5, 4, 4, 3, 3]);
        let deals: Vec<Deal> = enumerate_deals(&config).unwrap().collect();
        assert_eq!(deals.len(), 720);
        let unique: std::collections::BTreeSet<_> = deals.iter().collect();
        assert_eq!(unique.len(), 720);
    }

    #[test]
    fn single_issue_three_deals() {
        let config = two_issue_game(&[3]);
        assert_eq!(enumerate_deals(&config).unwrap().count(), 3);
    }

    #[test]
    fn two_by_two_order_is_lexicographic() {
        let config = two_issue_game(&[2, 2]);
        let order: Vec<String> = enumerate_deals(&config).unwrap().map(|d| d.notation()).collect();
        assert_eq!(order, ["A1, B1", "A1, B2", "A2, B1", "A2, B2"]);
    }

    #[test]
    fn size_guard() {
        let config = two_issue_game(&[9, 9, 9, 9, 9, 9, 9, 9]);
        assert_eq!(deal_count(&config), 43_046_721);
        assert!(matches!(enumerate_deals(&config), Err(DealSpaceError::TooLarge(_))));
        assert_eq!(enumerate_deals_unbounded(&config).size_hint().0, 43_046_721);
    }

    #[test]
    fn success_rule_quorum_and_vetoes() {
        let config = synthetic_game();
        // p1 and p2 are the veto holders (positions 0 and 1)
        assert!(success_from_votes(&config, &[true; 6]));
        assert!(success_from_votes(&config, &[true, true, true, true, false, true]));
        assert!(!success_from_votes(&config, &[true, false, true, true, true, true]));
        assert!(!success_from_votes(&config, &[false, true, true, true, true, true]));
        assert!(!success_from_votes(&config, &[true, true, true, true, false, false]));
    }

    #[test]
    fn failing_deal_pays_batnas() {
        let config = synthetic_game();
        let deal = config.initial_deal.clone();
        assert!(!deal_success(&config, &deal));
        let out = outcome_vector(&config, &deal, OutcomePolicy::default()).unwrap();
        assert_eq!(out.scores, vec![53, 59, 54, 69, 58, 50]);
        assert!(!out.success && !out.bonus_applied);
    }

    #[test]
    fn unanimous_bonus_and_rejector_batna() {
        let mut config = synthetic_game();
        // make every party accept anything, then p1 earns the bonus under on_6way
        for party in &mut config.parties {
            party.threshold = 0;
        }
        let deal = parse_notation("A3, B2, C3, D2, E2", &config).unwrap();
        let raw = config.score_vector(&deal).unwrap();
        let out = outcome_vector(&config, &deal, OutcomePolicy::default()).unwrap();
        assert!(out.bonus_applied);
        assert_eq!(out.scores[0], raw[0] + 10);
        assert_eq!(&out.scores[1..], &raw[1..]);

        // one rejector: 5-way success, no bonus, rejector on its BATNA
        config.parties[5].threshold = 1000;
        config.parties[5].batna = Some(50);
        let out = outcome_vector(&config, &deal, OutcomePolicy::default()).unwrap();
        assert!(out.success && !out.bonus_applied);
        assert_eq!(out.scores[5], 50);
        assert_eq!(out.scores[0], raw[0]);

        let policy = OutcomePolicy {
            bonus: BonusPolicy::OnSuccess,
            rejector: RejectorPayoff::DealScore,
        };
        let out = outcome_vector(&config, &deal, policy).unwrap();
        assert!(out.bonus_applied);
        assert_eq!(out.scores[5], raw[5]);
        assert_eq!(out.scores[0], raw[0] + 10);
    }

    #[test]
    fn dominance_examples() {
        assert!(pareto_dominates(&[5, 5], &[4, 5]).unwrap());
        assert!(!pareto_dominates(&[5, 4], &[4, 5]).unwrap());
        assert!(!pareto_dominates(&[5, 5], &[5, 5]).unwrap());
        assert_eq!(
            pareto_dominates(&[1], &[1, 2]),
            Err(DealSpaceError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn front_examples() {
        assert_eq!(pareto_front(&[vec![1, 2], vec![2, 1], vec![0, 0]]).unwrap(), vec![0, 1]);
        assert_eq!(pareto_front(&[[3, 3]; 4]).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(pareto_front::<Vec<Score>>(&[]), Err(DealSpaceError::Empty));
    }

    #[test]
    fn synthetic_analysis_totals() {
        let config = synthetic_game();
        let analysis = analyze_game(&config, OutcomePolicy::ANALYSIS).unwrap();
        assert_eq!(analysis.total_deals, 720);
        assert!(analysis.acceptable_count > 0);
        assert!(analysis.pareto_front_size <= analysis.acceptable_count);
        assert!(analysis.pareto_front_size_no_batna <= analysis.total_deals);
        assert_eq!(analysis.failing_in_front_all, 0);
    }
}
