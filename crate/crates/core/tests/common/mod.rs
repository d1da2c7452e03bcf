//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use atoms_lab::gapscan::GapScanRow;
use atoms_lab::panel::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct recomputation of a gap-scan table: every window pools its raw
/// values from scratch.
#[derive(Clone, Debug)]
pub struct NaiveRow {
    pub n: usize,
    pub delta: f64,
    pub sd: Option<f64>,
    pub psi: f64,
    pub phi: f64,
    pub score: f64,
}

pub fn naive_scan(
    stream: &[Vec<f64>],
    delta_prime: f64,
    m_squared: f64,
    second_moments: Option<(&[f64], f64)>,
    lookback: Option<usize>,
) -> Vec<NaiveRow> {
    let h = stream.len();
    let top = lookback.map_or(h, |l| l.min(h));
    let m2 = match second_moments {
        Some((_, floor)) => m_squared / floor,
        None => m_squared,
    };
    let log_term = (2.0 / delta_prime).ln();
    let mut rows: Vec<NaiveRow> = Vec::new();
    for ell in 1..=top {
        let mut pooled = Vec::new();
        for period in &stream[h - ell..] {
            pooled.extend_from_slice(period);
        }
        let n = pooled.len();
        let mean = pooled.iter().sum::<f64>() / n as f64;
        let mut sd = if n > 1 {
            let ss: f64 = pooled.iter().map(|u| (u - mean).powi(2)).sum();
            Some((ss / (n as f64 - 1.0)).sqrt())
        } else {
            None
        };
        let mut delta = mean;
        if let Some((v, floor)) = second_moments {
            let mut weighted = 0.0;
            for j in h - ell..h {
                weighted += stream[j].len() as f64 * v[j].max(floor);
            }
            let pooled_v = weighted / n as f64;
            delta /= pooled_v;
            sd = sd.map(|s| s / pooled_v);
        }
        let psi = match sd {
            None => 8.0 * m2,
            Some(s) => s * (2.0 * log_term / n as f64).sqrt() + 64.0 * m2 * log_term / (3.0 * (n as f64 - 1.0)),
        };
        rows.push(NaiveRow {
            n,
            delta,
            sd,
            psi,
            phi: 0.0,
            score: 0.0,
        });
    }
    for l in 0..rows.len() {
        let mut phi = 0.0f64;
        for i in 0..=l {
            let gap = (rows[l].delta - rows[i].delta).abs() - rows[l].psi - rows[i].psi;
            if gap > phi {
                phi = gap;
            }
        }
        rows[l].phi = phi;
        rows[l].score = phi + rows[l].psi;
    }
    rows
}

/// Least index minimising the naive score.
pub fn naive_choice(rows: &[NaiveRow]) -> usize {
    let mut best = 0;
    for i in 1..rows.len() {
        if rows[i].score < rows[best].score {
            best = i;
        }
    }
    best
}

/// Magnitude used to express errors in relative terms for one scan table.
pub fn table_scale(rows: &[NaiveRow]) -> f64 {
    rows.iter()
        .map(|r| r.delta.abs().max(r.psi).max(r.sd.unwrap_or(0.0)))
        .fold(f64::MIN_POSITIVE, f64::max)
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale)
}

/// Largest relative discrepancy between a library scan and the naive table.
pub fn scan_discrepancy(rows: &[GapScanRow], naive: &[NaiveRow]) -> f64 {
    assert_eq!(rows.len(), naive.len());
    let s = table_scale(naive);
    let mut worst = 0.0f64;
    for (ell, (r, o)) in rows.iter().zip(naive).enumerate() {
        assert_eq!(r.ell, ell + 1);
        assert_eq!(r.n, o.n);
        assert_eq!(r.v_hat.is_some(), o.sd.is_some());
        let mut errs = vec![
            rel_err(r.delta_hat, o.delta, s),
            rel_err(r.psi_hat, o.psi, s),
            rel_err(r.phi_hat, o.phi, s),
            rel_err(r.score, o.score, s),
        ];
        if let (Some(a), Some(b)) = (r.v_hat, o.sd) {
            errs.push(rel_err(a, b, s));
        }
        worst = errs.into_iter().fold(worst, f64::max);
    }
    worst
}

/// Random ragged stream: `periods` periods of 1..=max_n values in `[-scale, scale]`.
pub fn random_stream<R: Rng>(rng: &mut R, periods: usize, max_n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..periods)
        .map(|_| {
            let n = rng.random_range(1..=max_n);
            (0..n).map(|_| rng.random_range(-scale..scale)).collect()
        })
        .collect()
}

/// Gaussian elimination with partial pivoting on a dense copy of `a`.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn augmented(o: &Observation) -> Vec<f64> {
    let mut v = o.x.clone();
    v.push(1.0);
    v
}

/// Ridge normal equations `(X̃ᵀX̃/n + αI)θ = X̃ᵀy/n` built and solved from scratch.
pub fn ridge_oracle(data: &[Observation], alpha: f64) -> Vec<f64> {
    let p = data[0].x.len() + 1;
    let n = data.len() as f64;
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for o in data {
        let z = augmented(o);
        for i in 0..p {
            b[i] += z[i] * o.y / n;
            for j in 0..p {
                a[i][j] += z[i] * z[j] / n;
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += alpha;
    }
    solve_dense(a, b)
}

fn residuals(data: &[Observation], theta: &[f64]) -> Vec<f64> {
    data.iter()
        .map(|o| o.y - augmented(o).iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// `(1/2n)‖y − X̃θ‖² + αr‖θ‖₁ + (α/2)(1 − r)‖θ‖²`; `r = 1` is the LASSO objective.
pub fn enet_objective(data: &[Observation], theta: &[f64], alpha: f64, r: f64) -> f64 {
    let n = data.len() as f64;
    let rss: f64 = residuals(data, theta).iter().map(|e| e * e).sum();
    let l1: f64 = theta.iter().map(|t| t.abs()).sum();
    let l2: f64 = theta.iter().map(|t| t * t).sum();
    rss / (2.0 * n) + alpha * r * l1 + 0.5 * alpha * (1.0 - r) * l2
}

/// Worst subgradient violation of the elastic-net optimality conditions:
/// `g_k = −(1/n) Σ x̃_k e + α(1−r)θ_k` must equal `−αr·sign(θ_k)` when
/// `θ_k ≠ 0` and satisfy `|g_k| ≤ αr` otherwise.
pub fn kkt_residual(data: &[Observation], theta: &[f64], alpha: f64, r: f64) -> f64 {
    let n = data.len() as f64;
    let e = residuals(data, theta);
    let mut worst = 0.0f64;
    for k in 0..theta.len() {
        let corr: f64 = data.iter().zip(&e).map(|(o, e)| augmented(o)[k] * e).sum::<f64>() / n;
        let g = -corr + alpha * (1.0 - r) * theta[k];
        let v = if theta[k] > 0.0 {
            (g + alpha * r).abs()
        } else if theta[k] < 0.0 {
            (g - alpha * r).abs()
        } else {
            (g.abs() - alpha * r).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Standard-normal-ish design with a sparse signal.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Observation> {
    let beta: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { rng.random_range(-2.0..2.0) } else { 0.0 }).collect();
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.3 + rng.random_range(-0.5..0.5);
            Observation::new(x, y)
        })
        .collect()
}
