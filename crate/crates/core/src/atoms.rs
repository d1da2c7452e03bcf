//! Random-pivot elimination tournament.
//!
//! Each round draws a pivot uniformly from the surviving set `S` and duels it
//! (as the first model) against every other member. If nobody beats the pivot
//! it is returned; otherwise the set of models that beat it becomes the next
//! `S`. The pivot never advances. The expected number of duels grows linearly
//! in the number of candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::duel::{DuelOutcome, Side};
use crate::error::Result;
use crate::exec::Execution;
use crate::rng::{self, domain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuelRecord {
    pub challenger: usize,
    pub outcome: DuelOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub pivot: usize,
    pub challengers: Vec<usize>,
    pub duels: Vec<DuelRecord>,
}

impl Round {
    /// Challengers that beat the pivot, in candidate-index order.
    pub fn winners(&self) -> Vec<usize> {
        self.duels
            .iter()
            .filter(|d| d.outcome.winner == Side::Second)
            .map(|d| d.challenger)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub rounds: Vec<Round>,
    pub winner: usize,
    pub total_comparisons: usize,
    pub rng_seed: u64,
}

impl SelectionTrace {
    /// The last duel played, if any.
    pub fn final_duel(&self) -> Option<&DuelRecord> {
        self.rounds.iter().rev().find_map(|r| r.duels.last())
    }
}

/// Runs the tournament over candidates `0..count`. `duel(pivot, challenger)`
/// must treat `pivot` as the first model. Pivots are drawn from
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn select_indices<D>(count: usize, duel: D, seed: u64, exec: Execution) -> Result<SelectionTrace>
where
    D: Fn(usize, usize) -> Result<DuelOutcome> + Sync + Send,
{
    assert!(count > 0, "tournament needs at least one candidate");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..count).collect();
    let mut rounds = Vec::new();
    let mut total = 0;
    while remaining.len() > 1 {
        let pivot = remaining[rng.random_range(0..remaining.len())];
        let challengers: Vec<usize> = remaining.iter().copied().filter(|&c| c != pivot).collect();
        let outcomes = exec.try_map_range(challengers.len(), |i| duel(pivot, challengers[i]))?;
        total += outcomes.len();
        let round = Round {
            pivot,
            duels: challengers
                .iter()
                .zip(outcomes)
                .map(|(&challenger, outcome)| DuelRecord { challenger, outcome })
                .collect(),
            challengers,
        };
        let next = round.winners();
        rounds.push(round);
        if next.is_empty() {
            return Ok(SelectionTrace {
                rounds,
                winner: pivot,
                total_comparisons: total,
                rng_seed: seed,
            });
        }
        remaining = next;
    }
    Ok(SelectionTrace {
        rounds,
        winner: remaining[0],
        total_comparisons: total,
        rng_seed: seed,
    })
}

/// Tournament over a candidate slice; returns the winner and the trace.
pub fn select<T, D>(candidates: &[T], duel: D, seed: u64, exec: Execution) -> Result<(&T, SelectionTrace)>
where
    T: Sync,
    D: Fn(&T, &T) -> Result<DuelOutcome> + Sync + Send,
{
    let trace = select_indices(candidates.len(), |p, c| duel(&candidates[p], &candidates[c]), seed, exec)?;
    Ok((&candidates[trace.winner], trace))
}

/// Noiseless duel where a lower rank always wins.
pub fn rank_duel(ranks: &[usize], pivot: usize, challenger: usize) -> DuelOutcome {
    let gap = ranks[pivot] as f64 - ranks[challenger] as f64;
    DuelOutcome {
        winner: if gap <= 0.0 { Side::First } else { Side::Second },
        chosen_window: 1,
        delta_hat_at_choice: gap,
        scan: None,
    }
}

/// Mean number of duels over `trials` tournaments of size `lambda` with a
/// noiseless duel. Trial `i` uses pivot seed `substream_key(seed, PIVOT, i)`.
pub fn measure_complexity(lambda: usize, trials: usize, seed: u64) -> f64 {
    measure_complexity_with(lambda, trials, seed, Execution::default())
}

pub fn measure_complexity_with(lambda: usize, trials: usize, seed: u64, exec: Execution) -> f64 {
    assert!(lambda >= 1 && trials >= 1);
    let ranks: Vec<usize> = (0..lambda).collect();
    let counts = exec.map_range(trials, |i| {
        let s = rng::substream_key(seed, domain::PIVOT, i as u64);
        select_indices(lambda, |p, c| Ok(rank_duel(&ranks, p, c)), s, Execution::Sequential)
            .expect("noiseless duel is infallible")
            .total_comparisons
    });
    counts.iter().sum::<usize>() as f64 / trials as f64
}
