//! Penalized linear fits on augmented covariates `(x, 1)`.
//!
//! All three objectives penalize the full coefficient vector, intercept
//! included:
//!
//! ```text
//! ridge:  (1/n) Σ (⟨θ, x̃ᵢ⟩ − yᵢ)² + α‖θ‖₂²
//! lasso:  (1/2)(1/n) Σ (⟨θ, x̃ᵢ⟩ − yᵢ)² + α‖θ‖₁
//! e-net:  (1/2)(1/n) Σ (⟨θ, x̃ᵢ⟩ − yᵢ)² + αr‖θ‖₁ + (α/2)(1 − r)‖θ‖₂²
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Observation;

/// Coefficients on `(x, 1)`; the last entry multiplies the constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[self.dim()]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        x.iter()
            .zip(&self.coefficients[..d])
            .fold(0.0, |acc, (xi, ti)| acc + xi * ti)
            + self.coefficients[d]
    }
}

/// Stopping rule for coordinate descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdSettings {
    /// Converged once the largest coordinate change in a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CdSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

pub(crate) fn check_data(data: &[Observation]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::invalid("no training observations"))?;
    let d = first.x.len();
    for obs in data {
        if obs.x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: obs.x.len(),
            });
        }
        if !obs.y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite training value"));
        }
    }
    Ok(d)
}

fn check_penalty(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {value}")))
    }
}

pub fn fit_ridge(data: &[Observation], alpha: f64) -> Result<LinearModel> {
    check_penalty("alpha", alpha)?;
    let d = check_data(data)?;
    let p = d + 1;
    let n = data.len() as f64;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut xt = vec![1.0; p];
    for obs in data {
        xt[..d].copy_from_slice(&obs.x);
        for a in 0..p {
            rhs[a] += xt[a] * obs.y;
            for b in a..p {
                gram[(a, b)] += xt[a] * xt[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            gram[(a, b)] /= n;
            gram[(b, a)] = gram[(a, b)];
        }
        gram[(a, a)] += alpha;
        rhs[a] /= n;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::invalid("ridge normal equations are not positive definite"))?;
    let theta = chol.solve(&rhs);
    Ok(LinearModel {
        coefficients: theta.iter().copied().collect(),
    })
}

pub fn fit_lasso(data: &[Observation], alpha: f64) -> Result<LinearModel> {
    fit_lasso_with(data, alpha, CdSettings::default())
}

pub fn fit_lasso_with(data: &[Observation], alpha: f64, settings: CdSettings) -> Result<LinearModel> {
    check_penalty("alpha", alpha)?;
    coordinate_descent(data, alpha, 0.0, settings)
}

pub fn fit_elastic_net(data: &[Observation], alpha: f64, l1_ratio: f64) -> Result<LinearModel> {
    fit_elastic_net_with(data, alpha, l1_ratio, CdSettings::default())
}

pub fn fit_elastic_net_with(
    data: &[Observation],
    alpha: f64,
    l1_ratio: f64,
    settings: CdSettings,
) -> Result<LinearModel> {
    check_penalty("alpha", alpha)?;
    if !(l1_ratio > 0.0 && l1_ratio < 1.0) {
        return Err(Error::invalid(format!("l1 ratio must lie in (0, 1), got {l1_ratio}")));
    }
    coordinate_descent(data, alpha * l1_ratio, alpha * (1.0 - l1_ratio), settings)
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Column-major augmented design: `d` feature columns followed by the constant column.
fn columns(data: &[Observation], d: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|j| data.iter().map(|o| o.x[j]).collect())
        .collect();
    cols.push(vec![1.0; data.len()]);
    cols
}

/// Cyclic coordinate descent on `(1/2n)‖y − X̃θ‖² + l1‖θ‖₁ + (l2/2)‖θ‖₂²`.
fn coordinate_descent(data: &[Observation], l1: f64, l2: f64, settings: CdSettings) -> Result<LinearModel> {
    let d = check_data(data)?;
    let n = data.len() as f64;
    let cols = columns(data, d);
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
    let mut theta = vec![0.0; d + 1];
    let mut resid: Vec<f64> = data.iter().map(|o| o.y).collect();

    for sweep in 0..settings.max_iter {
        let mut max_change = 0.0f64;
        for (j, col) in cols.iter().enumerate() {
            let denom = sq[j] + l2;
            if denom == 0.0 {
                continue;
            }
            let old = theta[j];
            let rho = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n + sq[j] * old;
            let new = soft_threshold(rho, l1) / denom;
            let change = new - old;
            if change != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= x * change;
                }
                theta[j] = new;
                max_change = max_change.max(change.abs());
            }
        }
        if max_change < settings.tol {
            return Ok(LinearModel { coefficients: theta });
        }
        if sweep % POLISH_EVERY == POLISH_EVERY - 1 {
            if let Some(exact) = polish(&cols, data, &theta, l1, l2) {
                return Ok(LinearModel { coefficients: exact });
            }
        }
    }
    Err(Error::Convergence {
        iterations: settings.max_iter,
        gap: kkt_violation(data, &theta, l1, l2),
    })
}

/// Sweeps between attempts of the exact support solve.
const POLISH_EVERY: usize = 10;

/// Solves the stationarity equations on the current support with the current
/// signs. The result is returned only if it keeps every sign and satisfies the
/// optimality conditions to 1e-10.
fn polish(cols: &[Vec<f64>], data: &[Observation], theta: &[f64], l1: f64, l2: f64) -> Option<Vec<f64>> {
    let n = data.len() as f64;
    let support: Vec<usize> = (0..theta.len()).filter(|&j| theta[j] != 0.0).collect();
    if support.is_empty() {
        return None;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let k = support.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (p, &i) in support.iter().enumerate() {
        let xy: f64 = cols[i].iter().zip(data).map(|(x, o)| x * o.y).sum();
        rhs[p] = xy / n - l1 * theta[i].signum();
        for (q, &j) in support.iter().enumerate().skip(p) {
            gram[(p, q)] = dot(&cols[i], &cols[j]) / n;
            gram[(q, p)] = gram[(p, q)];
        }
        gram[(p, p)] += l2;
    }
    let sol = gram.cholesky()?.solve(&rhs);
    let mut exact = vec![0.0; theta.len()];
    for (p, &i) in support.iter().enumerate() {
        if !sol[p].is_finite() || sol[p] == 0.0 || sol[p].signum() != theta[i].signum() {
            return None;
        }
        exact[i] = sol[p];
    }
    (kkt_violation(data, &exact, l1, l2) <= 1e-10).then_some(exact)
}

/// Largest subgradient-condition violation of `θ` for the penalized objective
/// `(1/2n)‖y − X̃θ‖² + l1‖θ‖₁ + (l2/2)‖θ‖₂²`.
pub fn kkt_violation(data: &[Observation], theta: &[f64], l1: f64, l2: f64) -> f64 {
    let d = theta.len() - 1;
    let n = data.len() as f64;
    let model = LinearModel {
        coefficients: theta.to_vec(),
    };
    let resid: Vec<f64> = data.iter().map(|o| o.y - model.predict(&o.x)).collect();
    (0..=d)
        .map(|j| {
            let corr: f64 = data
                .iter()
                .zip(&resid)
                .map(|(o, r)| if j < d { o.x[j] * r } else { *r })
                .sum::<f64>()
                / n;
            let grad = -corr + l2 * theta[j];
            if theta[j] != 0.0 {
                (grad + l1 * theta[j].signum()).abs()
            } else {
                (grad.abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
