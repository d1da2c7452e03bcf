mod common;

use std::collections::BTreeSet;

use atoms_lab::atoms::{self, select_indices};
use atoms_lab::baselines::{self, cv_losses, fixed_cv, fixed_val, fixed_val_from_losses};
use atoms_lab::duel::{DuelOutcome, Side};
use atoms_lab::exec::Execution;
use atoms_lab::models::{build_candidate_grid, GridConfig, Specification};
use atoms_lab::panel::{self, Observation, Panel};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Duel whose outcome is an arbitrary but fixed function of the ordered pair.
fn coin_duel(salt: u64, pivot: usize, challenger: usize) -> DuelOutcome {
    let h = (salt ^ (pivot as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (challenger as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    DuelOutcome {
        winner: if h >> 63 == 0 { Side::First } else { Side::Second },
        chosen_window: 1,
        delta_hat_at_choice: 0.0,
        scan: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strict_order_always_finds_the_top(lambda in 1usize..40, seed in any::<u64>(), shuffle in any::<u64>()) {
        let mut ranks: Vec<usize> = (0..lambda).collect();
        ranks.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let trace = select_indices(lambda, |p, c| Ok(atoms::rank_duel(&ranks, p, c)), seed, Execution::Sequential).unwrap();
        prop_assert_eq!(ranks[trace.winner], 0);
    }

    #[test]
    fn eliminated_candidates_lost_or_were_beaten_pivots(lambda in 1usize..30, seed in any::<u64>(), salt in any::<u64>()) {
        let trace = select_indices(lambda, |p, c| Ok(coin_duel(salt, p, c)), seed, Execution::Sequential).unwrap();
        let mut accounted = BTreeSet::new();
        for round in &trace.rounds {
            prop_assert!(!round.challengers.contains(&round.pivot));
            prop_assert_eq!(round.duels.len(), round.challengers.len());
            let any_won = round.duels.iter().any(|d| d.outcome.winner == Side::Second);
            if any_won {
                accounted.insert(round.pivot);
            }
            for d in &round.duels {
                if d.outcome.winner == Side::First {
                    accounted.insert(d.challenger);
                }
            }
        }
        for c in (0..lambda).filter(|&c| c != trace.winner) {
            prop_assert!(accounted.contains(&c), "candidate {} left without a recorded loss", c);
        }
        prop_assert!(!accounted.contains(&trace.winner));
        let duels: usize = trace.rounds.iter().map(|r| r.duels.len()).sum();
        prop_assert_eq!(duels, trace.total_comparisons);
    }

    #[test]
    fn trace_is_reproducible(lambda in 1usize..30, seed in any::<u64>(), salt in any::<u64>()) {
        let a = select_indices(lambda, |p, c| Ok(coin_duel(salt, p, c)), seed, Execution::Sequential).unwrap();
        let b = select_indices(lambda, |p, c| Ok(coin_duel(salt, p, c)), seed, Execution::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<atoms::SelectionTrace>(&json).unwrap(), a);
    }
}

#[test]
fn pivots_follow_the_seeded_stream() {
    // replay: pivot = S[uniform index] from ChaCha8(seed); next S = winners in index order
    for seed in 0..200u64 {
        let salt = seed.wrapping_mul(31);
        let trace = select_indices(12, |p, c| Ok(coin_duel(salt, p, c)), seed, Execution::Sequential).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<usize> = (0..12).collect();
        for round in &trace.rounds {
            let pivot = s[rng.random_range(0..s.len())];
            assert_eq!(round.pivot, pivot);
            s = s
                .iter()
                .copied()
                .filter(|&c| c != pivot && coin_duel(salt, pivot, c).winner == Side::Second)
                .collect();
            if s.is_empty() {
                assert_eq!(trace.winner, pivot);
            }
        }
        if s.len() == 1 {
            assert_eq!(trace.winner, s[0]);
        }
    }
}

#[test]
fn duel_errors_propagate() {
    let r = select_indices(5, |_, _| Err(atoms_lab::Error::InvalidInput("boom".into())), 0, Execution::Sequential);
    assert!(r.is_err());
}

fn drifting_panel(r: &mut ChaCha8Rng, periods: usize, per: usize) -> Panel {
    let batches = (0..periods)
        .map(|j| {
            let slope = (j as f64 * 0.4).sin();
            (0..per)
                .map(|_| {
                    let x = r.random_range(-1.0..1.0);
                    Observation::new(vec![x, r.random_range(-1.0..1.0)], slope * x + r.random_range(-0.3..0.3))
                })
                .collect()
        })
        .collect();
    Panel::new(2, batches).unwrap()
}

fn small_grid() -> GridConfig {
    GridConfig {
        ridge_alphas: vec![0.01, 1.0],
        lasso_alphas: vec![0.05],
        window_exponents: vec![0, 1, 2],
        ..GridConfig::empty()
    }
}

#[test]
fn fixed_val_matches_double_loop() {
    let mut r = rng(40);
    for case in 0..20 {
        let p = drifting_panel(&mut r, 12, 6);
        let splits = panel::split(&p, 0.5, case).unwrap();
        let t = r.random_range(2..=13);
        let cands = build_candidate_grid(t, &splits, &small_grid(), Execution::Sequential).unwrap();
        for window in [1, 3, 7, 50] {
            let got = fixed_val(&cands, &splits, t, window).unwrap();
            let from = if window >= t { 1 } else { t - window };
            let mut want = Vec::new();
            for c in &cands {
                let mut total = 0.0;
                for j in from..t {
                    for o in splits.validation(j) {
                        total += (c.predict(&o.x) - o.y) * (c.predict(&o.x) - o.y);
                    }
                }
                want.push(total);
            }
            for (a, b) in got.losses.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
            }
            let best = want.iter().enumerate().fold(0, |b, (i, &v)| if v < want[b] { i } else { b });
            assert_eq!(got.chosen, best);
        }
        let clamped = fixed_val(&cands, &splits, t, t - 1).unwrap();
        for extra in [t, t + 5, 1000] {
            assert_eq!(fixed_val(&cands, &splits, t, extra).unwrap().losses, clamped.losses);
        }
    }
}

#[test]
fn fixed_val_hand_losses() {
    let losses = vec![vec![vec![0.25, 0.25]], vec![vec![0.1, 0.1]]];
    let c = fixed_val_from_losses(&losses, 2, 1).unwrap();
    assert_eq!(c.chosen, 1);
    assert_eq!(c.losses, vec![0.5, 0.2]);
    // ties go to the smaller index
    let tie = fixed_val_from_losses(&[vec![vec![1.0]], vec![vec![1.0]]], 2, 1).unwrap();
    assert_eq!(tie.chosen, 0);
}

/// Folds from the documented recipe: backward Fisher–Yates on the CV substream.
fn oracle_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    fn mix(z: u64) -> u64 {
        let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    const CV: u64 = 0x4356_464F_4C44_0005;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(mix(seed) ^ CV)));
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let k = rng.random_range(0..=i);
        order.swap(i, k);
    }
    let mut out = vec![0; n];
    for (p, o) in order.into_iter().enumerate() {
        out[o] = p % folds;
    }
    out
}

#[test]
fn cv_losses_match_independent_loop() {
    let mut r = rng(77);
    let specs = vec![
        Specification::Ridge { alpha: 0.1 },
        Specification::Lasso { alpha: 0.01 },
        Specification::RandomForest {
            n_trees: 3,
            max_depth: 6,
            seed: 1,
        },
    ];
    for seed in 0..10u64 {
        let data = random_problem(&mut r, 23, 3);
        let got = cv_losses(&data, &specs, 5, seed, Execution::Sequential).unwrap();
        let folds = oracle_folds(data.len(), 5, seed);
        assert_eq!(baselines::cv_folds(data.len(), 5, seed), folds);
        for (s, spec) in specs.iter().enumerate() {
            let mut sum = 0.0;
            for k in 0..5 {
                let train: Vec<Observation> = (0..data.len()).filter(|&i| folds[i] != k).map(|i| data[i].clone()).collect();
                let model = spec.fit(&train).unwrap();
                let held: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == k).collect();
                let se: f64 = held.iter().map(|&i| (model.predict(&data[i].x) - data[i].y).powi(2)).sum();
                sum += se / held.len() as f64;
            }
            let want = sum / 5.0;
            assert!((got.losses[s] - want).abs() <= 1e-12 * want, "{} vs {want}", got.losses[s]);
        }
    }
}

#[test]
fn cv_folds_are_balanced() {
    for n in [5, 6, 17, 100] {
        let f = baselines::cv_folds(n, 5, 9);
        for k in 0..5 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == n / 5 || c == n / 5 + 1);
        }
    }
}

#[test]
fn fixed_cv_single_candidate_and_errors() {
    let mut r = rng(3);
    let p = drifting_panel(&mut r, 10, 4);
    let grid = GridConfig {
        ridge_alphas: vec![1.0],
        ..GridConfig::empty()
    };
    let out = fixed_cv(&p, 8, &grid, 36, 5, 2, Execution::Sequential).unwrap();
    assert_eq!(out.choice.chosen, 0);
    assert_eq!(out.model.training_count, 28);
    assert_eq!(out.model.effective_window, 7);
    assert_eq!(out, fixed_cv(&p, 8, &grid, 36, 5, 2, Execution::Parallel).unwrap());
    // the refit uses every pooled observation
    let pooled: Vec<Observation> = (1..8).flat_map(|j| p.period(j).observations.clone()).collect();
    assert_eq!(out.model.predictor, Specification::Ridge { alpha: 1.0 }.fit(&pooled).unwrap());
    // one period of four observations cannot fill five folds
    assert!(fixed_cv(&p, 2, &grid, 36, 5, 2, Execution::Sequential).is_err());
}
