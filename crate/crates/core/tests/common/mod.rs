//! Random small games and independent, test-only oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use negotiation_core::game::{GameConfig, Incentive, IssueSpec, PartySpec, Score};
use negotiation_core::{Deal, IssueId};
use rand::Rng;

/// A validated random game: party 0 is p1, party 1 the other veto holder,
/// batna = threshold, thresholds drawn inside each party's achievable range.
pub fn random_game(rng: &mut impl Rng, parties: (usize, usize), issues: (usize, usize), max_options: u8) -> GameConfig {
    let n = rng.random_range(parties.0..=parties.1);
    let m = rng.random_range(issues.0..=issues.1);
    let issues: Vec<IssueSpec> = (0..m)
        .map(|i| IssueSpec {
            id: IssueId::new((b'A' + i as u8) as char).unwrap(),
            label: format!("Issue {i}"),
            option_count: rng.random_range(2..=max_options),
            option_labels: None,
        })
        .collect();
    let parties = (0..n)
        .map(|k| {
            let table: Vec<Vec<Score>> = issues
                .iter()
                .map(|issue| (0..issue.option_count).map(|_| rng.random_range(0..=30)).collect())
                .collect();
            let lo: Score = table.iter().map(|r| *r.iter().min().unwrap()).sum();
            let hi: Score = table.iter().map(|r| *r.iter().max().unwrap()).sum();
            PartySpec {
                name: format!("Party {}", k + 1),
                index: k + 1,
                role: String::new(),
                threshold: rng.random_range(lo..=hi),
                score_table: table,
                batna: None,
                veto: k < 2,
                is_p1: k == 0,
                incentive: Incentive::Cooperative,
            }
        })
        .collect();
    let initial_deal = Deal::from_pairs(issues.iter().map(|i| (i.id, 1)));
    GameConfig {
        name: "random".into(),
        description: String::new(),
        parties,
        issues,
        issue_context: BTreeMap::new(),
        initial_deal,
        rounds: 2,
        p1_bonus: 10,
        success_quorum: None,
    }
    .validate()
    .expect("random game is valid")
}

/// Every deal by nested counting over option indices, built independently of
/// the library's enumerator.
pub fn all_deals(config: &GameConfig) -> Vec<Deal> {
    let mut deals = vec![Vec::<(IssueId, u8)>::new()];
    for issue in &config.issues {
        deals = deals
            .into_iter()
            .flat_map(|prefix| {
                (1..=issue.option_count).map(move |o| {
                    let mut d = prefix.clone();
                    d.push((issue.id, o));
                    d
                })
            })
            .collect();
    }
    deals.into_iter().map(Deal::from_pairs).collect()
}

/// Score by direct table lookup.
pub fn score(config: &GameConfig, deal: &Deal, party: usize) -> Score {
    config
        .issues
        .iter()
        .enumerate()
        .map(|(i, issue)| {
            let o = deal.option(issue.id).unwrap();
            config.parties[party].score_table[i][usize::from(o) - 1]
        })
        .sum()
}

pub fn accepts(config: &GameConfig, deal: &Deal, party: usize) -> bool {
    score(config, deal, party) >= config.parties[party].threshold
}

/// Quorum n-1 (or the configured one) and both veto holders.
pub fn passes(config: &GameConfig, deal: &Deal) -> bool {
    let n = config.parties.len();
    let quorum = config.success_quorum.unwrap_or(n - 1);
    let yes: Vec<bool> = (0..n).map(|k| accepts(config, deal, k)).collect();
    yes.iter().filter(|y| **y).count() >= quorum && config.parties.iter().zip(&yes).all(|(p, y)| !p.veto || *y)
}

/// Outcome vector without bonus, rejectors and failures on BATNA.
pub fn outcome_no_bonus(config: &GameConfig, deal: &Deal) -> Vec<Score> {
    let pass = passes(config, deal);
    (0..config.parties.len())
        .map(|k| {
            if pass && accepts(config, deal, k) {
                score(config, deal, k)
            } else {
                config.parties[k].batna()
            }
        })
        .collect()
}

/// Undominated vectors: nothing else is at least as good everywhere while
/// differing somewhere.
pub fn brute_front(vectors: &[Vec<Score>]) -> Vec<usize> {
    (0..vectors.len())
        .filter(|&i| {
            !vectors
                .iter()
                .any(|other| other != &vectors[i] && other.iter().zip(&vectors[i]).all(|(a, b)| a >= b))
        })
        .collect()
}

/// Σ|xi - xj| over ordered pairs, divided by 2 n Σx, in f64 via sorting: the
/// sorted-rank form 2 Σ i·x(i) / (n Σx) - (n + 1) / n.
pub fn gini_sorted(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let total: f64 = x.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weighted: f64 = s.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum();
    2.0 * weighted / (n * total) - (n + 1.0) / n
}
