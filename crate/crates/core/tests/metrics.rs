mod common;

use negotiation_core::deal_space::OutcomeVector;
use negotiation_core::leakage::{LeakReason, Leakage};
use negotiation_core::metrics::{compute_metrics, gini, gini_exact, ExperimentRecord, RoundRecord};
use negotiation_core::parser::ParsedAnswer;
use negotiation_core::Deal;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn gini_is_scale_and_permutation_invariant(
        x in prop::collection::vec(0.0f64..100.0, 1..12),
        k in 0.01f64..1000.0,
        rot in 0usize..12,
    ) {
        let base = gini(&x).unwrap().value;
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        prop_assert!((gini(&scaled).unwrap().value - base).abs() < 1e-12);
        let mut rotated = x.clone();
        rotated.rotate_left(rot % x.len());
        rotated.reverse();
        prop_assert!((gini(&rotated).unwrap().value - base).abs() < 1e-12);
        let n = x.len() as f64;
        prop_assert!(base >= 0.0 && base <= (n - 1.0) / n + 1e-12);
        prop_assert!((base - common::gini_sorted(&x)).abs() < 1e-9);
    }

    #[test]
    fn exact_and_float_gini_agree(x in prop::collection::vec(0i64..1000, 1..10)) {
        let exact = gini_exact(&x).unwrap();
        let float: Vec<f64> = x.iter().map(|v| *v as f64).collect();
        let approx = *exact.numer() as f64 / *exact.denom() as f64;
        prop_assert!((gini(&float).unwrap().value - approx).abs() < 1e-12);
    }
}

#[test]
fn single_winner_reaches_the_maximum_for_each_n() {
    for n in 1..=12usize {
        let mut x = vec![0i64; n];
        x[0] = 7;
        assert_eq!(gini_exact(&x).unwrap(), Ratio::new(n as i128 - 1, n as i128));
    }
}

fn leak(leaked: bool) -> Leakage {
    Leakage {
        leaked,
        reasons: if leaked {
            vec![LeakReason::DealTagsMissing]
        } else {
            Vec::new()
        },
    }
}

/// A random batch built directly from record fields (no sessions involved).
fn random_batch(rng: &mut impl Rng) -> Vec<ExperimentRecord> {
    let n = 6;
    let count = rng.random_range(1..=12);
    (0..count)
        .map(|seed| {
            let failed = rng.random_bool(0.2);
            let turns = rng.random_range(0..=8);
            let rounds = (0..turns)
                .map(|t| {
                    let has_deal = rng.random_bool(0.7);
                    RoundRecord {
                        round: t / 3 + 1,
                        speaker: rng.random_range(0..n),
                        parsed: ParsedAnswer::default(),
                        proposed_deal: has_deal.then(Deal::default),
                        own_score_of_proposal: has_deal.then(|| rng.random_range(0..100)),
                        own_acceptable: has_deal.then(|| rng.random_bool(0.7)),
                        proposal_success: has_deal.then(|| rng.random_bool(0.4)),
                        structure_leak: leak(rng.random_bool(0.3)),
                    }
                })
                .collect();
            let accepts = if failed { 0 } else { rng.random_range(0..=n) };
            let final_success = !failed && accepts >= 5 && rng.random_bool(0.8);
            let scores: Vec<i64> = (0..n).map(|_| rng.random_range(0..=80)).collect();
            ExperimentRecord {
                seed,
                n_parties: n,
                rounds,
                final_deal: (!failed).then(Deal::default),
                final_accept_count: accepts,
                final_success,
                failed,
                outcome: OutcomeVector {
                    scores,
                    success: final_success,
                    bonus_applied: false,
                },
            }
        })
        .collect()
}

struct Tally {
    five: f64,
    six: f64,
    any: f64,
    wrong: f64,
    failed: f64,
    leak: f64,
    gini: Option<f64>,
}

/// Counts by hand: rates over completed experiments, wrong pooled over
/// proposals, leakage pooled over turns, gini over successful finals.
fn tally(batch: &[ExperimentRecord]) -> Tally {
    let mut completed = 0.0;
    let (mut five, mut six, mut any, mut failed) = (0.0, 0.0, 0.0, 0.0);
    let (mut proposals, mut wrong, mut turns, mut leaks) = (0.0, 0.0, 0.0, 0.0);
    let mut ginis = Vec::new();
    for r in batch {
        if r.failed {
            failed += 1.0;
        } else {
            completed += 1.0;
            if r.final_success {
                five += 1.0;
                ginis.push(common::gini_sorted(
                    &r.outcome.scores.iter().map(|s| *s as f64).collect::<Vec<_>>(),
                ));
                if r.final_accept_count == r.n_parties {
                    six += 1.0;
                }
            }
            if r.rounds.iter().any(|t| t.proposal_success == Some(true)) {
                any += 1.0;
            }
        }
        for t in &r.rounds {
            turns += 1.0;
            if t.structure_leak.leaked {
                leaks += 1.0;
            }
            if t.proposed_deal.is_some() {
                proposals += 1.0;
                if t.own_acceptable == Some(false) {
                    wrong += 1.0;
                }
            }
        }
    }
    let pct = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a * 100.0 / b };
    Tally {
        five: pct(five, completed),
        six: pct(six, completed),
        any: pct(any, completed),
        wrong: pct(wrong, proposals),
        failed: pct(failed, batch.len() as f64),
        leak: pct(leaks, turns),
        gini: (!ginis.is_empty()).then(|| ginis.iter().sum::<f64>() / ginis.len() as f64),
    }
}

#[test]
fn report_matches_hand_tally_on_random_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let batch = random_batch(&mut rng);
        let report = compute_metrics(&batch).unwrap();
        let t = tally(&batch);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(report.five_way_pct, t.five));
        assert!(close(report.six_way_pct, t.six));
        assert!(close(report.any_pct, t.any));
        assert!(close(report.wrong_pct, t.wrong));
        assert!(close(report.failed_pct, t.failed));
        assert!(close(report.structure_leak_pct, t.leak));
        match (report.gini_mean_of_final_deals, t.gini) {
            (Some(a), Some(b)) => assert!(close(a, b)),
            (None, None) => {}
            other => panic!("gini mismatch {other:?}"),
        }
        assert!(report.six_way_pct <= report.five_way_pct);
    }
}

#[test]
fn eight_of_ten_successes_without_unanimity() {
    let batch: Vec<ExperimentRecord> = (0..10)
        .map(|seed| ExperimentRecord {
            seed,
            n_parties: 6,
            rounds: Vec::new(),
            final_deal: Some(Deal::default()),
            final_accept_count: 5,
            final_success: seed < 8,
            failed: false,
            outcome: OutcomeVector {
                scores: vec![60; 6],
                success: seed < 8,
                bonus_applied: false,
            },
        })
        .collect();
    let report = compute_metrics(&batch).unwrap();
    assert_eq!(report.five_way_pct, 80.0);
    assert_eq!(report.six_way_pct, 0.0);
}

#[test]
fn rates_exclude_failed_experiments_from_the_denominator() {
    // 10 experiments, 1 failed, 4 final successes of which 1 unanimous
    let batch: Vec<ExperimentRecord> = (0..10)
        .map(|seed| {
            let failed = seed == 9;
            ExperimentRecord {
                seed,
                n_parties: 6,
                rounds: Vec::new(),
                final_deal: (!failed).then(Deal::default),
                final_accept_count: if seed == 0 { 6 } else { 5 },
                final_success: seed < 4,
                failed,
                outcome: OutcomeVector {
                    scores: vec![50; 6],
                    success: seed < 4,
                    bonus_applied: false,
                },
            }
        })
        .collect();
    let report = compute_metrics(&batch).unwrap();
    assert!((report.five_way_pct - 400.0 / 9.0).abs() < 1e-12);
    assert!((report.six_way_pct - 100.0 / 9.0).abs() < 1e-12);
    assert_eq!(report.failed_pct, 10.0);
}
