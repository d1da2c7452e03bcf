//! Out-of-sample R² (zero benchmark and standard), calendar and regime
//! slicing, sign-trading wealth and the Excess Ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodPredictions {
    pub period: usize,
    pub predictions: Vec<f64>,
    pub realized: Vec<f64>,
}

/// Out-of-sample predictions of one algorithm, in increasing period order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionLog {
    pub tag: String,
    pub records: Vec<PeriodPredictions>,
}

impl PredictionLog {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, period: usize, predictions: Vec<f64>, realized: Vec<f64>) -> Result<()> {
        if predictions.len() != realized.len() {
            return Err(Error::invalid(format!(
                "period {period}: {} predictions for {} responses",
                predictions.len(),
                realized.len()
            )));
        }
        if predictions.iter().chain(&realized).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("period {period}: non-finite prediction or response")));
        }
        if self.records.last().is_some_and(|r| r.period >= period) {
            return Err(Error::invalid(format!("period {period} logged out of order")));
        }
        self.records.push(PeriodPredictions {
            period,
            predictions,
            realized,
        });
        Ok(())
    }

    pub fn first_period(&self) -> Option<usize> {
        self.records.first().map(|r| r.period)
    }

    pub fn last_period(&self) -> Option<usize> {
        self.records.last().map(|r| r.period)
    }

    pub fn len(&self) -> usize {
        self.records.iter().map(|r| r.realized.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(ŷ, y)` pairs of the periods inside `window`.
    pub fn pairs<'a>(&'a self, window: &'a RegimeWindow) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.records
            .iter()
            .filter(move |r| window.contains(r.period))
            .flat_map(|r| r.predictions.iter().copied().zip(r.realized.iter().copied()))
    }
}

/// Inclusive period range with a label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeWindow {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl RegimeWindow {
    pub fn new(label: impl Into<String>, start: usize, end: usize) -> Result<Self> {
        if start == 0 || start > end {
            return Err(Error::invalid(format!("regime window {start}..={end} is empty or not 1-based")));
        }
        Ok(Self {
            label: label.into(),
            start,
            end,
        })
    }

    /// Every period of the log.
    pub fn all(log: &PredictionLog) -> Self {
        Self {
            label: "overall".into(),
            start: log.first_period().unwrap_or(1),
            end: log.last_period().unwrap_or(0),
        }
    }

    pub fn contains(&self, period: usize) -> bool {
        (self.start..=self.end).contains(&period)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R2Zero,
    R2Standard,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::R2Zero => "r2_zero",
            Metric::R2Standard => "r2_standard",
        }
    }

    pub fn evaluate(self, log: &PredictionLog, window: &RegimeWindow) -> Result<f64> {
        match self {
            Metric::R2Zero => r2_zero(log, window),
            Metric::R2Standard => r2_standard(log, window),
        }
    }
}

/// `1 − Σ(ŷ − y)² / Σy²` over the window.
pub fn r2_zero(log: &PredictionLog, window: &RegimeWindow) -> Result<f64> {
    let (mut sse, mut syy, mut n) = (0.0, 0.0, 0usize);
    for (p, y) in log.pairs(window) {
        sse += (p - y) * (p - y);
        syy += y * y;
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid(format!("no observations in window `{}`", window.label)));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(1.0 - sse / syy)
}

/// `1 − Σ(ŷ − y)² / Σ(y − ȳ)²` with `ȳ` the window mean.
pub fn r2_standard(log: &PredictionLog, window: &RegimeWindow) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = log.pairs(window).collect();
    if pairs.len() < 2 {
        return Err(Error::invalid(format!(
            "window `{}` needs at least 2 observations",
            window.label
        )));
    }
    let mean = pairs.iter().map(|&(_, y)| y).sum::<f64>() / pairs.len() as f64;
    let sst: f64 = pairs.iter().map(|&(_, y)| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sse: f64 = pairs.iter().map(|&(p, y)| (p - y) * (p - y)).sum();
    Ok(1.0 - sse / sst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnualRow {
    pub year: String,
    pub start: usize,
    pub end: usize,
    /// `None` when the year's denominator is degenerate.
    pub value: Option<f64>,
}

/// Metric per calendar year. With `labels` (period `t` is `labels[t-1]`) the
/// year is the first four characters of the label; without, consecutive
/// blocks of 12 periods starting at period 1 are years `Y1, Y2, …`.
pub fn annual_r2(log: &PredictionLog, labels: Option<&[String]>, metric: Metric) -> Result<Vec<AnnualRow>> {
    let year_of = |t: usize| -> Result<String> {
        match labels {
            Some(l) => l
                .get(t - 1)
                .map(|s| s.chars().take(4).collect())
                .ok_or_else(|| Error::invalid(format!("no calendar label for period {t}"))),
            None => Ok(format!("Y{}", (t - 1) / 12 + 1)),
        }
    };
    let mut rows: Vec<AnnualRow> = Vec::new();
    for r in &log.records {
        let year = year_of(r.period)?;
        match rows.last_mut() {
            Some(row) if row.year == year => row.end = r.period,
            _ => rows.push(AnnualRow {
                year,
                start: r.period,
                end: r.period,
                value: None,
            }),
        }
    }
    for row in &mut rows {
        let window = RegimeWindow {
            label: row.year.clone(),
            start: row.start,
            end: row.end,
        };
        row.value = match metric.evaluate(log, &window) {
            Ok(v) => Some(v),
            Err(Error::DegenerateDenominator | Error::ZeroVariance | Error::InvalidInput(_)) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(rows)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WealthPoint {
    pub period: usize,
    pub wealth: f64,
}

/// `W_t = W_{t−1} Π_i (1 + y_{t,i} sign(ŷ_{t,i}))` from `W_0 = 1`.
pub fn wealth_curve(log: &PredictionLog) -> Result<Vec<WealthPoint>> {
    let mut wealth = 1.0;
    let mut curve = Vec::with_capacity(log.records.len());
    for r in &log.records {
        for (i, (&p, &y)) in r.predictions.iter().zip(&r.realized).enumerate() {
            let factor = 1.0 + y * sign(p);
            if !(factor > 0.0) {
                return Err(Error::Bankruptcy {
                    period: r.period,
                    index: i,
                });
            }
            wealth *= factor;
        }
        curve.push(WealthPoint {
            period: r.period,
            wealth,
        });
    }
    Ok(curve)
}

/// `w_atoms / w_baseline − 1`.
pub fn excess_ratio(w_atoms: f64, w_baseline: f64) -> Result<f64> {
    if !(w_baseline > 0.0) {
        return Err(Error::invalid(format!("baseline wealth must be positive, got {w_baseline}")));
    }
    Ok(w_atoms / w_baseline - 1.0)
}
