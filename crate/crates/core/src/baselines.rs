//! Non-adaptive selectors: a fixed validation window over the candidate grid,
//! and k-fold cross-validation over the most recent periods.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gapscan::validation_losses;
use crate::models::{FittedModel, GridConfig, Specification};
use crate::panel::{Observation, Panel, SplitPanel};
use crate::rng::{self, domain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BaselineMethod {
    FixedVal { window: usize },
    FixedCv { window: usize, folds: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineChoice {
    pub method: BaselineMethod,
    pub chosen: usize,
    /// Summed validation loss (fixed-val) or mean held-out MSE (CV), per candidate.
    pub losses: Vec<f64>,
}

/// Least-loss index; ties go to the smallest index.
fn argmin(losses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[best] {
            best = i;
        }
    }
    best
}

/// Fixed-window selection from precomputed squared validation errors
/// (`losses[candidate][period - 1][obs]`). The window covers periods
/// `max(t − ℓ, 1) ..= t − 1`.
pub fn fixed_val_from_losses(losses: &[Vec<Vec<f64>>], t: usize, window: usize) -> Result<BaselineChoice> {
    if losses.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    if t < 2 || window == 0 {
        return Err(Error::invalid("fixed validation window needs t >= 2 and a window of at least 1"));
    }
    let from = t.saturating_sub(window).max(1);
    let totals: Vec<f64> = losses
        .iter()
        .map(|per_period| {
            per_period[from - 1..t - 1]
                .iter()
                .flat_map(|p| p.iter())
                .sum()
        })
        .collect();
    Ok(BaselineChoice {
        method: BaselineMethod::FixedVal { window },
        chosen: argmin(&totals),
        losses: totals,
    })
}

pub fn fixed_val(candidates: &[FittedModel], validation: &SplitPanel, t: usize, window: usize) -> Result<BaselineChoice> {
    let losses = candidates
        .iter()
        .map(|c| validation_losses(c, validation, t))
        .collect::<Result<Vec<_>>>()?;
    fixed_val_from_losses(&losses, t, window)
}

/// Fold label for each of `n` pooled observations: positions are shuffled by
/// Fisher–Yates on `rng::substream(seed, CV_FOLDS, 0)` and the observation at
/// shuffled position `p` lands in fold `p mod folds`.
pub fn cv_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::substream(seed, domain::CV_FOLDS, 0);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let k = rng.random_range(0..=i);
        order.swap(i, k);
    }
    let mut fold = vec![0; n];
    for (p, &obs) in order.iter().enumerate() {
        fold[obs] = p % folds;
    }
    fold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedCvOutcome {
    pub choice: BaselineChoice,
    pub specifications: Vec<Specification>,
    /// The winning specification refit on every pooled observation.
    pub model: FittedModel,
}

/// Pools all observations of periods `max(1, t − window) ..= t − 1`, scores
/// every grid specification by mean held-out MSE over `folds` random folds,
/// and refits the winner on the full pool.
pub fn fixed_cv(
    panel: &Panel,
    t: usize,
    grid: &GridConfig,
    window: usize,
    folds: usize,
    seed: u64,
    exec: Execution,
) -> Result<FixedCvOutcome> {
    if t < 2 || t - 1 > panel.num_periods() {
        return Err(Error::invalid(format!("cannot cross-validate at period {t}")));
    }
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let from = t.saturating_sub(window).max(1);
    if t - from < window {
        log::info!("period {t}: only {} periods available for {window}-period CV", t - from);
    }
    let pooled: Vec<Observation> = (from..t)
        .flat_map(|j| panel.period(j).observations.iter().cloned())
        .collect();
    let specifications = grid.specifications();
    if specifications.is_empty() {
        return Err(Error::invalid("no candidate specifications"));
    }
    let choice = cv_losses(&pooled, &specifications, folds, seed, exec)?;
    let chosen = &specifications[choice.chosen];
    let predictor = chosen.fit_with(&pooled, exec).map_err(|e| Error::Fit {
        spec: chosen.to_string(),
        source: Box::new(e),
    })?;
    let model = FittedModel {
        specification: chosen.clone(),
        window_exponent: None,
        fit_period: t,
        effective_window: t - from,
        training_count: pooled.len(),
        predictor,
    };
    Ok(FixedCvOutcome {
        choice: BaselineChoice {
            method: BaselineMethod::FixedCv { window, folds },
            ..choice
        },
        specifications,
        model,
    })
}

/// Mean held-out MSE per specification on `pooled` with the folds from [`cv_folds`].
pub fn cv_losses(
    pooled: &[Observation],
    specifications: &[Specification],
    folds: usize,
    seed: u64,
    exec: Execution,
) -> Result<BaselineChoice> {
    if pooled.len() < folds {
        return Err(Error::invalid(format!(
            "{}-fold cross-validation needs at least {folds} observations, got {}",
            folds,
            pooled.len()
        )));
    }
    let fold_of = cv_folds(pooled.len(), folds, seed);
    let losses = exec.try_map_range(specifications.len(), |s| {
        let spec = &specifications[s];
        let mut total = 0.0;
        for k in 0..folds {
            let (train, held): (Vec<_>, Vec<_>) = pooled
                .iter()
                .zip(&fold_of)
                .partition(|(_, &f)| f != k);
            let train: Vec<Observation> = train.into_iter().map(|(o, _)| o.clone()).collect();
            let model = spec.fit_with(&train, Execution::Sequential).map_err(|e| Error::Fit {
                spec: spec.to_string(),
                source: Box::new(e),
            })?;
            let mse = held
                .iter()
                .map(|(o, _)| (model.predict(&o.x) - o.y).powi(2))
                .sum::<f64>()
                / held.len() as f64;
            total += mse;
        }
        Ok::<f64, Error>(total / folds as f64)
    })?;
    Ok(BaselineChoice {
        method: BaselineMethod::FixedCv {
            window: 0,
            folds,
        },
        chosen: argmin(&losses),
        losses,
    })
}
