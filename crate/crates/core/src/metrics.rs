//! Batch metrics (5/6-way, 6-way, Any, Wrong, Failed, structure leakage) and
//! the Gini inequality coefficient.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deal::Deal;
use crate::deal_space::OutcomeVector;
use crate::game::Score;
use crate::leakage::Leakage;
use crate::parser::ParsedAnswer;

#[derive(Debug, Error, PartialEq)]
pub enum GiniError {
    #[error("gini of an empty vector")]
    Empty,
    #[error("negative gain {0}")]
    Negative(f64),
    #[error("non-finite gain")]
    NotFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gini {
    pub value: f64,
    /// Every gain was zero; the coefficient is reported as 0.
    pub all_zero: bool,
}

/// `Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² x̄)` over all ordered pairs.
pub fn gini(gains: &[f64]) -> Result<Gini, GiniError> {
    if gains.is_empty() {
        return Err(GiniError::Empty);
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(GiniError::NotFinite);
    }
    if let Some(neg) = gains.iter().find(|g| **g < 0.0) {
        return Err(GiniError::Negative(*neg));
    }
    let n = gains.len() as f64;
    let total: f64 = gains.iter().sum();
    if total == 0.0 {
        return Ok(Gini {
            value: 0.0,
            all_zero: true,
        });
    }
    let abs_diff: f64 = gains
        .iter()
        .map(|x| gains.iter().map(|y| (x - y).abs()).sum::<f64>())
        .sum();
    Ok(Gini {
        value: abs_diff / (2.0 * n * total),
        all_zero: false,
    })
}

/// Exact rational Gini of integer gains. All-zero gains give 0.
pub fn gini_exact(gains: &[Score]) -> Result<Ratio<i128>, GiniError> {
    if gains.is_empty() {
        return Err(GiniError::Empty);
    }
    if let Some(neg) = gains.iter().find(|g| **g < 0) {
        return Err(GiniError::Negative(*neg as f64));
    }
    let n = gains.len() as i128;
    let total: i128 = gains.iter().map(|g| i128::from(*g)).sum();
    if total == 0 {
        return Ok(Ratio::from_integer(0));
    }
    let abs_diff: i128 = gains
        .iter()
        .map(|x| {
            gains
                .iter()
                .map(|y| (i128::from(*x) - i128::from(*y)).abs())
                .sum::<i128>()
        })
        .sum();
    Ok(Ratio::new(abs_diff, 2 * n * total))
}

/// One speaking turn, reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Zero-based speaker position.
    pub speaker: usize,
    pub parsed: ParsedAnswer,
    pub proposed_deal: Option<Deal>,
    pub own_score_of_proposal: Option<Score>,
    /// Proposal meets the speaker's own threshold.
    pub own_acceptable: Option<bool>,
    /// Proposal passes the success rule (quorum plus vetoes).
    pub proposal_success: Option<bool>,
    pub structure_leak: Leakage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub n_parties: usize,
    pub rounds: Vec<RoundRecord>,
    pub final_deal: Option<Deal>,
    pub final_accept_count: usize,
    pub final_success: bool,
    /// No parseable final outcome.
    pub failed: bool,
    pub outcome: OutcomeVector,
}

impl ExperimentRecord {
    pub fn unanimous(&self) -> bool {
        !self.failed && self.final_accept_count == self.n_parties
    }

    pub fn any_success(&self) -> bool {
        self.rounds.iter().any(|r| r.proposal_success == Some(true))
    }
}

/// Which experiments contribute to the mean Gini.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiniScope {
    #[default]
    SuccessfulOnly,
    /// Non-successful experiments contribute their (all-BATNA) outcome.
    AllExperiments,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub gini_scope: GiniScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub failed: bool,
    pub five_way: bool,
    pub six_way: bool,
    pub any: bool,
    pub proposals: usize,
    pub wrong: usize,
    pub turns: usize,
    pub leaks: usize,
    pub wrong_pct: f64,
    pub gini: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub experiments: usize,
    pub failed_experiments: usize,
    /// Non-failed experiments whose final deal passes (5 or 6 acceptances).
    pub five_way_pct: f64,
    pub six_way_pct: f64,
    pub any_pct: f64,
    /// Pooled: self-harming proposals over all turns with a proposal.
    pub wrong_pct: f64,
    pub failed_pct: f64,
    /// Pooled over all turns.
    pub structure_leak_pct: f64,
    pub gini_mean_of_final_deals: Option<f64>,
    pub per_seed: Vec<SeedMetrics>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty experiment batch")]
    EmptyBatch,
}

fn pct(count: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        100.0 * count as f64 / denom as f64
    }
}

pub fn compute_metrics(records: &[ExperimentRecord]) -> Result<MetricsReport, MetricsError> {
    compute_metrics_with(records, MetricsOptions::default())
}

pub fn compute_metrics_with(
    records: &[ExperimentRecord],
    options: MetricsOptions,
) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let mut per_seed = Vec::with_capacity(records.len());
    let (mut completed, mut failed, mut five, mut six, mut any) = (0, 0, 0, 0, 0);
    let (mut proposals, mut wrong, mut turns, mut leaks) = (0, 0, 0, 0);
    let mut ginis = Vec::new();

    for record in records {
        let seed_proposals = record.rounds.iter().filter(|r| r.proposed_deal.is_some()).count();
        let seed_wrong = record.rounds.iter().filter(|r| r.own_acceptable == Some(false)).count();
        let seed_leaks = record.rounds.iter().filter(|r| r.structure_leak.leaked).count();
        let five_way = !record.failed && record.final_success;
        let six_way = five_way && record.unanimous();
        let any_success = !record.failed && record.any_success();

        let include_gini = match options.gini_scope {
            GiniScope::SuccessfulOnly => five_way,
            GiniScope::AllExperiments => true,
        };
        let seed_gini = if include_gini {
            let gains: Vec<f64> = record.outcome.scores.iter().map(|s| *s as f64).collect();
            gini(&gains).ok().map(|g| g.value)
        } else {
            None
        };
        if let Some(g) = seed_gini {
            ginis.push(g);
        }

        failed += usize::from(record.failed);
        completed += usize::from(!record.failed);
        five += usize::from(five_way);
        six += usize::from(six_way);
        any += usize::from(any_success);
        proposals += seed_proposals;
        wrong += seed_wrong;
        turns += record.rounds.len();
        leaks += seed_leaks;

        per_seed.push(SeedMetrics {
            seed: record.seed,
            failed: record.failed,
            five_way,
            six_way,
            any: any_success,
            proposals: seed_proposals,
            wrong: seed_wrong,
            turns: record.rounds.len(),
            leaks: seed_leaks,
            wrong_pct: pct(seed_wrong, seed_proposals),
            gini: seed_gini,
        });
    }

    Ok(MetricsReport {
        experiments: records.len(),
        failed_experiments: failed,
        five_way_pct: pct(five, completed),
        six_way_pct: pct(six, completed),
        any_pct: pct(any, completed),
        wrong_pct: pct(wrong, proposals),
        failed_pct: pct(failed, records.len()),
        structure_leak_pct: pct(leaks, turns),
        gini_mean_of_final_deals: (!ginis.is_empty()).then(|| ginis.iter().sum::<f64>() / ginis.len() as f64),
        per_seed,
    })
}

impl MetricsReport {
    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let gini = self
            .gini_mean_of_final_deals
            .map(|g| format!("{g:.4}"))
            .unwrap_or_else(|| "-".to_string());
        let mut out = String::new();
        out.push_str(&format!("experiments         {}\n", self.experiments));
        out.push_str(&format!("5/6-way (%)         {:.2}\n", self.five_way_pct));
        out.push_str(&format!("6-way (%)           {:.2}\n", self.six_way_pct));
        out.push_str(&format!("any (%)             {:.2}\n", self.any_pct));
        out.push_str(&format!("wrong (%)           {:.2}\n", self.wrong_pct));
        out.push_str(&format!("failed (%)          {:.2}\n", self.failed_pct));
        out.push_str(&format!("structure leak (%)  {:.2}\n", self.structure_leak_pct));
        out.push_str(&format!("gini (final deals)  {gini}\n"));
        out.push_str("\nseed  failed  5-way  6-way  any  wrong/proposals  leaks/turns  gini\n");
        for s in &self.per_seed {
            let gini = s.gini.map(|g| format!("{g:.4}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<5} {:<7} {:<6} {:<6} {:<4} {:>7}/{:<7} {:>6}/{:<5} {}\n",
                s.seed,
                yes_no(s.failed),
                yes_no(s.five_way),
                yes_no(s.six_way),
                yes_no(s.any),
                s.wrong,
                s.proposals,
                s.leaks,
                s.turns,
                gini
            ));
        }
        out
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
