//! Seeded synthetic drift environments.
//!
//! Covariates are uniform on `[0, 1]^d` and responses are
//! `y = β_t · x + γ Σ_k sin(2π x_k) + N(0, noise_sd²)`. The zigzag environment
//! has `d = 1` and `β_t = c_t`, a deterministic path that climbs by `η` from 0
//! until the next step would pass 1, then descends to 0, and so on.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FittedModel;
use crate::panel::{Observation, Panel};
use crate::rng::{self, domain, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    ZigzagLinearSine,
    /// Regime `r` covers periods `change_points[r-1] ..` (regime 0 starts at
    /// period 1) and uses slope vector `coefficients[r]`.
    PiecewiseRegime {
        change_points: Vec<usize>,
        coefficients: Vec<Vec<f64>>,
    },
    /// `c_t ≡ 0`.
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEnv {
    #[serde(flatten)]
    pub kind: EnvKind,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}
fn default_samples() -> usize {
    1
}

impl DriftEnv {
    pub fn zigzag(eta: f64, gamma: f64, noise_sd: f64, samples_per_period: usize, seed: u64) -> Self {
        Self {
            kind: EnvKind::ZigzagLinearSine,
            eta,
            gamma,
            noise_sd,
            samples_per_period,
            seed,
        }
    }

    pub fn stationary(gamma: f64, noise_sd: f64, samples_per_period: usize, seed: u64) -> Self {
        Self {
            kind: EnvKind::Stationary,
            eta: 0.0,
            gamma,
            noise_sd,
            samples_per_period,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if self.samples_per_period == 0 {
            return Err(Error::invalid("samples_per_period must be at least 1"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() || !self.gamma.is_finite() {
            return Err(Error::invalid("noise_sd must be finite and >= 0, gamma finite"));
        }
        match &self.kind {
            EnvKind::ZigzagLinearSine if self.eta > 1.0 => Err(Error::invalid(format!(
                "zigzag drift needs eta <= 1, got {}",
                self.eta
            ))),
            EnvKind::PiecewiseRegime {
                change_points,
                coefficients,
            } => {
                if coefficients.len() != change_points.len() + 1 {
                    return Err(Error::invalid(format!(
                        "{} change points need {} coefficient vectors, got {}",
                        change_points.len(),
                        change_points.len() + 1,
                        coefficients.len()
                    )));
                }
                let d = coefficients[0].len();
                if d == 0 || coefficients.iter().any(|c| c.len() != d || c.iter().any(|v| !v.is_finite())) {
                    return Err(Error::invalid("regime coefficients must share a nonzero dimension"));
                }
                if change_points.first().is_some_and(|&c| c < 2) || change_points.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("change points must be strictly increasing and >= 2"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            EnvKind::PiecewiseRegime { coefficients, .. } => coefficients.first().map_or(1, Vec::len),
            _ => 1,
        }
    }

    /// Slope vector `β_t` of period `t`.
    pub fn coefficients(&self, t: usize) -> Vec<f64> {
        match &self.kind {
            EnvKind::ZigzagLinearSine => vec![zigzag_coefficient(self.eta, t)],
            EnvKind::Stationary => vec![0.0],
            EnvKind::PiecewiseRegime {
                change_points,
                coefficients,
            } => {
                let regime = change_points.iter().take_while(|&&c| c <= t).count();
                coefficients[regime].clone()
            }
        }
    }

    /// Regression function `f*_t(x)`.
    pub fn optimal_predictor(&self, t: usize, x: &[f64]) -> f64 {
        regression(&self.coefficients(t), self.gamma, x)
    }

    fn draw(&self, beta: &[f64], rng: &mut StreamRng, n: usize, noise: bool) -> Vec<Observation> {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..beta.len()).map(|_| rng.random::<f64>()).collect();
                let mut y = regression(beta, self.gamma, &x);
                if noise {
                    y += self.noise_sd * normal.sample(rng);
                }
                Observation::new(x, y)
            })
            .collect()
    }
}

fn regression(beta: &[f64], gamma: f64, x: &[f64]) -> f64 {
    beta.iter()
        .zip(x)
        .map(|(b, v)| b * v + gamma * (TAU * v).sin())
        .sum()
}

/// `c_t` of the zigzag path; `c_1 = 0`.
pub fn zigzag_coefficient(eta: f64, t: usize) -> f64 {
    assert!(t >= 1, "periods are 1-based");
    if eta <= 0.0 {
        return 0.0;
    }
    // c_t = k·η with the integer k bouncing in 0..=top.
    let top = (1.0 / eta + 1e-9).floor() as usize;
    if top == 0 {
        return 0.0;
    }
    let phase = (t - 1) % (2 * top);
    let k = if phase <= top { phase } else { 2 * top - phase };
    k as f64 * eta
}

/// Draws `periods` periods; period `t` uses `substream(seed, SYNTH, t)`.
pub fn generate(env: &DriftEnv, periods: usize) -> Result<Panel> {
    env.validate()?;
    if periods == 0 {
        return Err(Error::invalid("need at least one period"));
    }
    let batches = (1..=periods)
        .map(|t| {
            let mut rng = rng::substream(env.seed, domain::SYNTH, t as u64);
            env.draw(&env.coefficients(t), &mut rng, env.samples_per_period, true)
        })
        .collect();
    Panel::new(env.dim(), batches)
}

/// Monte Carlo estimate of the period-`t` MSE `E(f(x) − y)²`.
pub fn true_risk(env: &DriftEnv, t: usize, model: &FittedModel, mc_samples: usize, seed: u64) -> Result<f64> {
    risk_with(env, t, mc_samples, seed, true, |x| model.predict(x))
}

/// Monte Carlo estimate of `E(f(x) − f*_t(x))²`, the excess risk of `model`.
/// It equals `true_risk − noise_sd²` in expectation but carries no noise term.
pub fn excess_risk(env: &DriftEnv, t: usize, model: &FittedModel, mc_samples: usize, seed: u64) -> Result<f64> {
    let beta = env.coefficients(t);
    risk_with(env, t, mc_samples, seed, false, |x| {
        model.predict(x) - regression(&beta, env.gamma, x)
    })
}

/// Shared Monte Carlo loop. With `noise`, returns the mean of `(f(x) − y)²`;
/// without it `f` is treated as a residual function and its mean square is returned.
pub fn risk_with<F>(env: &DriftEnv, t: usize, mc_samples: usize, seed: u64, noise: bool, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    env.validate()?;
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples must be at least 1"));
    }
    if t == 0 {
        return Err(Error::invalid("periods are 1-based"));
    }
    let beta = env.coefficients(t);
    let mut rng = rng::substream(seed, domain::MONTE_CARLO, t as u64);
    let sample = env.draw(&beta, &mut rng, mc_samples, noise);
    let total: f64 = sample
        .iter()
        .map(|o| {
            let r = if noise { f(&o.x) - o.y } else { f(&o.x) };
            r * r
        })
        .sum();
    Ok(total / mc_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{linear::LinearModel, Predictor, Specification};

    fn linear(slope: f64, intercept: f64) -> FittedModel {
        FittedModel::standalone(
            Specification::Ridge { alpha: 0.0 },
            Predictor::Linear(LinearModel {
                coefficients: vec![slope, intercept],
            }),
            0,
        )
    }

    #[test]
    fn zigzag_matches_recurrence() {
        let eta = 0.1;
        let (mut c, mut up) = (0.0f64, true);
        for t in 1..=25 {
            assert!((zigzag_coefficient(eta, t) - c).abs() < 1e-12, "t = {t}");
            if up && c + eta > 1.0 + 1e-9 || !up && c - eta < -1e-9 {
                up = !up;
            }
            c += if up { eta } else { -eta };
        }
        assert!((zigzag_coefficient(eta, 11) - 1.0).abs() < 1e-12);
        assert!((zigzag_coefficient(eta, 12) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn zigzag_steps_are_exact() {
        for eta in [0.05, 0.3, 0.7, 1.0] {
            for t in 1..100 {
                let d = (zigzag_coefficient(eta, t + 1) - zigzag_coefficient(eta, t)).abs();
                assert!((d - eta).abs() < 1e-12, "eta {eta} t {t}");
            }
        }
    }

    #[test]
    fn eta_above_one_is_rejected() {
        assert!(generate(&DriftEnv::zigzag(1.5, 0.0, 1.0, 1, 0), 3).is_err());
    }

    #[test]
    fn noiseless_linear_data() {
        let env = DriftEnv::zigzag(0.2, 0.0, 0.0, 5, 4);
        let panel = generate(&env, 6).unwrap();
        for t in 1..=6 {
            let c = zigzag_coefficient(0.2, t);
            for o in &panel.period(t).observations {
                assert!((o.y - c * o.x[0]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn generation_is_pure_in_seed() {
        let env = DriftEnv::zigzag(0.1, 0.3, 1.0, 3, 8);
        assert_eq!(generate(&env, 5).unwrap(), generate(&env, 5).unwrap());
        let other = DriftEnv { seed: 9, ..env.clone() };
        assert_ne!(generate(&env, 5).unwrap(), generate(&other, 5).unwrap());
    }

    #[test]
    fn closed_form_risks() {
        // f ≡ 0 against y = x: E[x²] = 1/3
        let env = DriftEnv::zigzag(1.0, 0.0, 0.0, 1, 0);
        let n = 20_000;
        let r = true_risk(&env, 2, &linear(0.0, 0.0), n, 1).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 0.01, "{r}");
        // f = f* with no noise is exact
        assert_eq!(true_risk(&env, 2, &linear(1.0, 0.0), 100, 1).unwrap(), 0.0);
        let noisy = DriftEnv { noise_sd: 1.0, ..env };
        let r = true_risk(&noisy, 2, &linear(1.0, 0.0), n, 3).unwrap();
        assert!((r - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{r}");
        assert_eq!(excess_risk(&noisy, 2, &linear(1.0, 0.0), 100, 3).unwrap(), 0.0);
    }

    #[test]
    fn piecewise_regimes() {
        let env = DriftEnv {
            kind: EnvKind::PiecewiseRegime {
                change_points: vec![4],
                coefficients: vec![vec![1.0, 0.0], vec![-1.0, 2.0]],
            },
            eta: 0.0,
            gamma: 0.0,
            noise_sd: 0.0,
            samples_per_period: 2,
            seed: 0,
        };
        assert_eq!(env.coefficients(3), vec![1.0, 0.0]);
        assert_eq!(env.coefficients(4), vec![-1.0, 2.0]);
        let p = generate(&env, 5).unwrap();
        assert_eq!(p.dim(), 2);
        let o = &p.period(5).observations[0];
        assert!((o.y - (-o.x[0] + 2.0 * o.x[1])).abs() < 1e-15);
        let bad = DriftEnv {
            kind: EnvKind::PiecewiseRegime {
                change_points: vec![4],
                coefficients: vec![vec![1.0]],
            },
            ..env
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn env_json_round_trip() {
        let env = DriftEnv::zigzag(0.05, 0.3, 1.0, 20, 7);
        let s = serde_json::to_string(&env).unwrap();
        assert!(s.contains("\"kind\":\"zigzag_linear_sine\""));
        let back: DriftEnv = serde_json::from_str(&s).unwrap();
        assert_eq!(back, env);
    }
}
