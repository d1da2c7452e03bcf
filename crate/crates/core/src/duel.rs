//! Pairwise model comparison with an adaptively chosen validation window.
//!
//! The duel picks the least `ℓ` minimising `φ̂ + ψ̂` from a gap scan and keeps
//! the first model iff `Δ̂` at that window is `≤ 0`. Ties on the gap therefore
//! go to the first model, so callers should pass the incumbent (the tournament
//! pivot) first.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gapscan::{self, ComparisonConfig, GapScanRow, LossDifferenceStream};
use crate::models::FittedModel;
use crate::panel::SplitPanel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuelOutcome {
    pub winner: Side,
    /// Chosen look-back window ℓ̂.
    pub chosen_window: usize,
    pub delta_hat_at_choice: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<Vec<GapScanRow>>,
}

impl DuelOutcome {
    pub fn loser(&self) -> Side {
        self.winner.other()
    }

    pub fn first_wins(&self) -> bool {
        self.winner == Side::First
    }

    /// Drops the retained scan table.
    pub fn without_scan(mut self) -> Self {
        self.scan = None;
        self
    }
}

/// Index of the least minimiser of `score` (rows are ordered by `ℓ`).
pub fn choose_window(rows: &[GapScanRow]) -> usize {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        if row.score < rows[best].score {
            best = i;
        }
    }
    best
}

/// Decides a duel from a completed scan.
pub fn decide(rows: Vec<GapScanRow>, retain_scan: bool) -> DuelOutcome {
    let at = choose_window(&rows);
    let chosen = &rows[at];
    let winner = if chosen.delta_hat <= 0.0 {
        Side::First
    } else {
        Side::Second
    };
    DuelOutcome {
        winner,
        chosen_window: chosen.ell,
        delta_hat_at_choice: chosen.delta_hat,
        scan: retain_scan.then_some(rows),
    }
}

/// MSE duel on a precomputed loss-difference stream.
pub fn duel_stream(stream: &LossDifferenceStream, cfg: &ComparisonConfig, retain_scan: bool) -> DuelOutcome {
    decide(gapscan::scan(stream, cfg), retain_scan)
}

/// R² duel on a precomputed stream and per-period second moments.
pub fn duel_stream_r2(
    stream: &LossDifferenceStream,
    second_moments: &[f64],
    cfg: &ComparisonConfig,
    retain_scan: bool,
) -> Result<DuelOutcome> {
    Ok(decide(gapscan::scan_r2(stream, second_moments, cfg)?.rows, retain_scan))
}

pub fn duel_mse(
    f1: &FittedModel,
    f2: &FittedModel,
    validation: &SplitPanel,
    t: usize,
    cfg: &ComparisonConfig,
) -> Result<DuelOutcome> {
    let stream = gapscan::loss_difference_stream(f1, f2, validation, t)?;
    Ok(duel_stream(&stream, cfg, true))
}

/// R² duel using validation second moments `V_j = (1/n_j) Σ y²`.
pub fn duel_r2(
    f1: &FittedModel,
    f2: &FittedModel,
    validation: &SplitPanel,
    t: usize,
    cfg: &ComparisonConfig,
) -> Result<DuelOutcome> {
    let stream = gapscan::loss_difference_stream(f1, f2, validation, t)?;
    let moments = gapscan::second_moments(validation, t)?;
    duel_stream_r2(&stream, &moments, cfg, true)
}
