//! Rolling-window estimates of the performance gap between two models.
//!
//! For models `f1`, `f2` at period `t`, each validation observation of an
//! earlier period contributes `u = (f1(x) − y)² − (f2(x) − y)²`. For every
//! look-back window `ℓ` the scan pools `u` over periods `t − ℓ .. t − 1` and
//! reports:
//!
//! ```text
//! Δ̂ = mean of pooled u
//! v̂ = sample standard deviation of pooled u          (n ≥ 2)
//! ψ̂ = 8M²                                            (n = 1)
//!     v̂·√(2 log(2/δ′)/n) + 64M² log(2/δ′) / (3(n−1))   (n ≥ 2)
//! φ̂ = max_{i ≤ ℓ} (|Δ̂_ℓ − Δ̂_i| − ψ̂_ℓ − ψ̂_i)₊
//! ```
//!
//! The R² variant divides `Δ̂` and `v̂` by the pooled second moment
//! `V_{t,ℓ} = Σ n_j V_j / n` and replaces `M²` by `M²/v`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FittedModel;
use crate::panel::SplitPanel;

/// Per-period loss differences for periods `1..t`, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossDifferenceStream {
    periods: Vec<Vec<f64>>,
}

impl LossDifferenceStream {
    pub fn new(periods: Vec<Vec<f64>>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::invalid("loss-difference stream needs at least one period"));
        }
        for (j, p) in periods.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::invalid(format!("period {} has no validation data", j + 1)));
            }
            if p.iter().any(|u| !u.is_finite()) {
                return Err(Error::invalid(format!("non-finite loss difference in period {}", j + 1)));
            }
        }
        Ok(Self { periods })
    }

    /// `u = loss1 − loss2` elementwise from per-period squared errors.
    pub fn from_losses(first: &[Vec<f64>], second: &[Vec<f64>]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::invalid("loss tables cover different periods"));
        }
        let periods = first
            .iter()
            .zip(second)
            .map(|(a, b)| {
                if a.len() != b.len() {
                    return Err(Error::invalid("loss tables have different period sizes"));
                }
                Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(periods)
    }

    pub fn periods(&self) -> &[Vec<f64>] {
        &self.periods
    }

    /// Number of history periods, i.e. `t − 1`.
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Period sizes `n_j`, oldest first.
    pub fn sizes(&self) -> Vec<usize> {
        self.periods.iter().map(Vec::len).collect()
    }

    /// The stream with the roles of the two models swapped.
    pub fn negated(&self) -> Self {
        Self {
            periods: self
                .periods
                .iter()
                .map(|p| p.iter().map(|u| -u).collect())
                .collect(),
        }
    }
}

/// Squared validation errors of `model` on periods `1..t`, one vector per period.
pub fn validation_losses(model: &FittedModel, validation: &SplitPanel, t: usize) -> Result<Vec<Vec<f64>>> {
    check_history(validation, t)?;
    (1..t)
        .map(|j| {
            validation
                .validation(j)
                .iter()
                .map(|obs| {
                    if obs.x.len() != model.dim() {
                        return Err(Error::Dimension {
                            expected: model.dim(),
                            found: obs.x.len(),
                        });
                    }
                    let e = model.predict(&obs.x) - obs.y;
                    Ok(e * e)
                })
                .collect()
        })
        .collect()
}

pub fn loss_difference_stream(
    f1: &FittedModel,
    f2: &FittedModel,
    validation: &SplitPanel,
    t: usize,
) -> Result<LossDifferenceStream> {
    LossDifferenceStream::from_losses(
        &validation_losses(f1, validation, t)?,
        &validation_losses(f2, validation, t)?,
    )
}

/// Validation second moments `V_j = (1/n_j) Σ y²` for periods `1..t`.
pub fn second_moments(validation: &SplitPanel, t: usize) -> Result<Vec<f64>> {
    check_history(validation, t)?;
    Ok((1..t)
        .map(|j| {
            let v = validation.validation(j);
            v.iter().map(|o| o.y * o.y).sum::<f64>() / v.len() as f64
        })
        .collect())
}

fn check_history(validation: &SplitPanel, t: usize) -> Result<()> {
    if t < 2 || t - 1 > validation.num_periods() {
        return Err(Error::invalid(format!(
            "period {t} needs validation history 1..{}, split has {} periods",
            t.saturating_sub(1),
            validation.num_periods()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Confidence parameter δ′ in (0, 1).
    pub delta_prime: f64,
    /// Boundedness scale M².
    pub m_squared: f64,
    /// Lower bound `v` on second moments (R² variant only).
    pub v_floor: f64,
    /// Optional cap on the look-back window.
    pub max_lookback: Option<usize>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            delta_prime: 0.1,
            m_squared: 5e-4,
            v_floor: 1e-8,
            max_lookback: None,
        }
    }
}

impl ComparisonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_prime > 0.0 && self.delta_prime < 1.0) {
            return Err(Error::Config(format!("delta_prime must lie in (0, 1), got {}", self.delta_prime)));
        }
        if !(self.m_squared > 0.0 && self.m_squared.is_finite()) {
            return Err(Error::Config(format!("m_squared must be positive, got {}", self.m_squared)));
        }
        if !(self.v_floor > 0.0 && self.v_floor.is_finite()) {
            return Err(Error::Config(format!("v_floor must be positive, got {}", self.v_floor)));
        }
        if self.max_lookback == Some(0) {
            return Err(Error::Config("max_lookback must be at least 1".into()));
        }
        Ok(())
    }
}

/// Diagnostics for one look-back window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScanRow {
    pub ell: usize,
    pub n: usize,
    pub delta_hat: f64,
    /// `None` when `n = 1`.
    pub v_hat: Option<f64>,
    pub psi_hat: f64,
    pub phi_hat: f64,
    pub score: f64,
}

/// Stochastic-error proxy ψ̂ for `n` pooled samples.
pub fn psi_hat(v_hat: Option<f64>, n: usize, delta_prime: f64, m_squared: f64) -> f64 {
    match (n, v_hat) {
        (0, _) => f64::INFINITY,
        (1, _) | (_, None) => 8.0 * m_squared,
        (n, Some(v)) => {
            let log_term = (2.0 / delta_prime).ln();
            let n = n as f64;
            v * (2.0 * log_term / n).sqrt() + 64.0 * m_squared * log_term / (3.0 * (n - 1.0))
        }
    }
}

/// Running count/mean/sum-of-squared-deviations, merged period by period.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let m2 = values.iter().map(|u| (u - mean) * (u - mean)).sum();
        Self { n, mean, m2 }
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb, nn) = (self.n as f64, other.n as f64, n as f64);
        Self {
            n,
            mean: self.mean + d * nb / nn,
            m2: self.m2 + other.m2 + d * d * na * nb / nn,
        }
    }
}

fn scan_windows(stream: &LossDifferenceStream, cfg: &ComparisonConfig, second_moments: Option<&[f64]>) -> Vec<GapScanRow> {
    let history = stream.len();
    let max_ell = cfg.max_lookback.map_or(history, |l| l.min(history));
    let m_squared = match second_moments {
        Some(_) => cfg.m_squared / cfg.v_floor,
        None => cfg.m_squared,
    };
    let mut acc = Moments::default();
    let mut weighted_v = 0.0;
    let mut rows = Vec::with_capacity(max_ell);
    for ell in 1..=max_ell {
        let j = history - ell;
        let period = &stream.periods[j];
        acc = acc.merge(Moments::of(period));
        let n = acc.n;
        let mut delta_hat = acc.mean;
        let mut v_hat = (n >= 2).then(|| (acc.m2 / (n - 1) as f64).sqrt());
        if let Some(v) = second_moments {
            weighted_v += period.len() as f64 * v[j];
            let pooled = weighted_v / n as f64;
            delta_hat /= pooled;
            v_hat = v_hat.map(|s| s / pooled);
        }
        let psi = psi_hat(v_hat, n, cfg.delta_prime, m_squared);
        rows.push(GapScanRow {
            ell,
            n,
            delta_hat,
            v_hat,
            psi_hat: psi,
            phi_hat: 0.0,
            score: 0.0,
        });
    }
    for l in 0..rows.len() {
        let (dl, pl) = (rows[l].delta_hat, rows[l].psi_hat);
        let phi = rows[..=l]
            .iter()
            .map(|r| ((dl - r.delta_hat).abs() - (pl + r.psi_hat)).max(0.0))
            .fold(0.0, f64::max);
        rows[l].phi_hat = phi;
        rows[l].score = phi + pl;
    }
    rows
}

/// MSE gap scan for `ℓ = 1 ..= min(t − 1, max_lookback)`.
pub fn scan(stream: &LossDifferenceStream, cfg: &ComparisonConfig) -> Vec<GapScanRow> {
    scan_windows(stream, cfg, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2Scan {
    pub rows: Vec<GapScanRow>,
    /// 1-based periods whose second moment was raised to `v_floor`.
    pub floored_periods: Vec<usize>,
}

/// R² gap scan; `second_moments[j]` is `V_{j+1}`.
pub fn scan_r2(stream: &LossDifferenceStream, second_moments: &[f64], cfg: &ComparisonConfig) -> Result<R2Scan> {
    if second_moments.len() != stream.len() {
        return Err(Error::invalid(format!(
            "{} second moments for {} periods",
            second_moments.len(),
            stream.len()
        )));
    }
    let mut floored_periods = Vec::new();
    let clamped: Vec<f64> = second_moments
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            if v.is_nan() || v < cfg.v_floor {
                if !(v > 0.0) {
                    log::warn!("period {}: second moment {v} is not positive; using floor {}", j + 1, cfg.v_floor);
                }
                floored_periods.push(j + 1);
                cfg.v_floor
            } else {
                v
            }
        })
        .collect();
    Ok(R2Scan {
        rows: scan_windows(stream, cfg, Some(&clamped)),
        floored_periods,
    })
}

/// Writes rows as CSV with columns `ell,n,delta_hat,v_hat,psi_hat,phi_hat,score`
/// (`v_hat` empty when undefined).
pub fn write_scan_csv<W: Write>(rows: &[GapScanRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
