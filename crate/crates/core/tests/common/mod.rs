//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use climrisk::data::DailyRecord;

/// Kernel values computed directly, without the library's kernel module.
pub fn kernel_matrix(x: &[Vec<f64>], sigma2: Option<f64>) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| {
            x.iter()
                .map(|b| match sigma2 {
                    Some(s2) => {
                        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                        (-d2 / (2.0 * s2)).exp()
                    }
                    None => a.iter().zip(b).map(|(p, q)| p * q).sum(),
                })
                .collect()
        })
        .collect()
}

/// Dual objective `−½ θᵀKθ − ε Σ(α + α*) + yᵀθ`.
pub fn dual_value(k: &[Vec<f64>], y: &[f64], eps: f64, alpha: &[f64], alpha_star: &[f64]) -> f64 {
    let n = y.len();
    let theta: Vec<f64> = (0..n).map(|i| alpha_star[i] - alpha[i]).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += theta[i] * theta[j] * k[i][j];
        }
    }
    let l1: f64 = alpha.iter().chain(alpha_star).sum();
    let lin: f64 = y.iter().zip(&theta).map(|(a, b)| a * b).sum();
    -0.5 * quad - eps * l1 + lin
}

/// Primal risk `½‖w‖² + C Σ max(0, |y − f| − ε)` of the expansion `θ`,
/// minimized over the bias. The objective is piecewise linear in the bias,
/// so its minimum sits at one of the breakpoints.
pub fn primal_value(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, theta: &[f64]) -> f64 {
    let n = y.len();
    let kt: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * theta[j]).sum()).collect();
    let quad: f64 = (0..n).map(|i| theta[i] * kt[i]).sum();
    let risk = |b: f64| -> f64 {
        (0..n)
            .map(|i| ((y[i] - kt[i] - b).abs() - eps).max(0.0))
            .sum::<f64>()
    };
    let best = (0..n)
        .flat_map(|i| [y[i] - kt[i] - eps, y[i] - kt[i] + eps])
        .map(risk)
        .fold(f64::INFINITY, f64::min);
    0.5 * quad + c * best
}

/// Euclidean projection onto `{(α*, α) ∈ [0, C]^2n : Σα* − Σα = 0}`.
///
/// The constraint residual is a non-increasing piecewise-linear function of
/// the multiplier; the root is located between consecutive breakpoints and
/// then solved exactly on that linear piece.
pub fn project_box_hyperplane(v: &mut [f64], n: usize, c: f64) {
    let sign = |k: usize| if k < n { 1.0 } else { -1.0 };
    let g = |lam: f64, v: &[f64]| -> f64 {
        (0..2 * n)
            .map(|k| sign(k) * (v[k] - lam * sign(k)).clamp(0.0, c))
            .sum()
    };
    let mut bps: Vec<f64> = (0..2 * n)
        .flat_map(|k| {
            let s = sign(k);
            [s * v[k], s * (v[k] - c)]
        })
        .collect();
    bps.sort_by(f64::total_cmp);
    let last = bps.len() - 1;
    let lam = if g(bps[0], v) <= 0.0 {
        bps[0]
    } else if g(bps[last], v) >= 0.0 {
        bps[last]
    } else {
        // Invariant: g(bps[lo]) > 0 ≥ g(bps[hi]).
        let (mut lo, mut hi) = (0, last);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if g(bps[mid], v) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (g0, g1) = (g(bps[lo], v), g(bps[hi], v));
        bps[lo] + (bps[hi] - bps[lo]) * g0 / (g0 - g1)
    };
    for (k, x) in v.iter_mut().enumerate() {
        *x = (*x - lam * sign(k)).clamp(0.0, c);
    }
}

pub struct OracleSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub objective: f64,
    /// Primal minus dual at the returned point.
    pub duality_gap: f64,
}

/// Maximizes the ε-SVR dual by accelerated projected gradient ascent.
pub fn svr_dual_oracle(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> OracleSolution {
    let n = y.len();
    // Lipschitz bound of the gradient: 2 λ_max(K) ≤ 2 max row sum.
    let lip = 2.0
        * k.iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(1e-12, f64::max);
    let grad = |a: &[f64]| -> Vec<f64> {
        let kt: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| k[i][j] * (a[j] - a[j + n])).sum())
            .collect();
        (0..2 * n)
            .map(|t| if t < n { y[t] - eps - kt[t] } else { -y[t - n] - eps + kt[t - n] })
            .collect()
    };
    let value = |a: &[f64]| dual_value(k, y, eps, &a[n..], &a[..n]);
    let mut x = vec![0.0; 2 * n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut fx = value(&x);
    for it in 0..50_000 {
        if it % 50 == 0 {
            let theta: Vec<f64> = (0..n).map(|i| x[i] - x[i + n]).collect();
            if primal_value(k, y, c, eps, &theta) - fx <= 1e-11 * (1.0 + fx.abs()) {
                break;
            }
        }
        let g = grad(&z);
        let mut next: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + b / lip).collect();
        project_box_hyperplane(&mut next, n, c);
        let f_next = value(&next);
        if f_next < fx {
            // Restart momentum when the objective drops.
            z = x.clone();
            t = 1.0;
            continue;
        }
        let step: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        project_box_hyperplane(&mut z, n, c);
        x = next;
        fx = f_next;
        t = t_next;
        if step < 1e-14 {
            break;
        }
    }
    let mut theta: Vec<f64> = (0..n).map(|i| x[i] - x[i + n]).collect();
    let mut best_gap = primal_value(k, y, c, eps, &theta) - fx;
    for tol in [1e-4, 1e-6, 1e-8] {
        if let Some(t) = polish(k, y, c, eps, &theta, tol) {
            let (a, a_star) = split_theta(&t);
            let gap = primal_value(k, y, c, eps, &t) - dual_value(k, y, eps, &a, &a_star);
            if gap < best_gap {
                best_gap = gap;
                theta = t;
            }
        }
    }
    let (alpha, alpha_star) = split_theta(&theta);
    OracleSolution {
        objective: dual_value(k, y, eps, &alpha, &alpha_star),
        duality_gap: best_gap,
        alpha,
        alpha_star,
    }
}

fn split_theta(theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        theta.iter().map(|t| (-t).max(0.0)).collect(),
        theta.iter().map(|t| t.max(0.0)).collect(),
    )
}

/// Solves the stationarity equations exactly on the free set read off an
/// approximate solution: bound and zero coefficients stay fixed, free ones
/// satisfy `y_i − (Kθ)_i − ε sign(θ_i) = b` together with `Σθ = 0`.
fn polish(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, theta: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = y.len();
    let mut fixed = vec![0.0; n];
    let mut free = Vec::new();
    for i in 0..n {
        let t = theta[i];
        if t.abs() <= tol {
            fixed[i] = 0.0;
        } else if t >= c - tol {
            fixed[i] = c;
        } else if t <= -c + tol {
            fixed[i] = -c;
        } else {
            free.push(i);
        }
    }
    let m = free.len();
    // Unknowns: θ_F then b.
    let mut a = vec![vec![0.0; m + 2]; m + 1];
    for (r, &i) in free.iter().enumerate() {
        for (q, &j) in free.iter().enumerate() {
            a[r][q] = k[i][j];
        }
        a[r][m] = 1.0;
        let fixed_part: f64 = (0..n).map(|j| k[i][j] * fixed[j]).sum();
        a[r][m + 1] = y[i] - eps * theta[i].signum() - fixed_part;
    }
    for q in 0..m {
        a[m][q] = 1.0;
    }
    a[m][m + 1] = -fixed.iter().sum::<f64>();
    let sol = gauss_solve(a)?;
    let mut out = fixed;
    for (q, &i) in free.iter().enumerate() {
        let t = sol[q];
        // The free coefficient must keep its sign and stay inside the box.
        if t * theta[i] <= 0.0 || t.abs() > c {
            return None;
        }
        out[i] = t;
    }
    Some(out)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for q in col..=n {
                a[r][q] -= f * a[col][q];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|q| a[r][q] * x[q]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Some(x)
}

/// A small random regression problem: inputs, targets and an optional RBF
/// width (`None` for the linear kernel).
pub struct SvrInstance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub sigma2: Option<f64>,
    pub c: f64,
    pub eps: f64,
}

pub fn random_svr_instance(rng: &mut ChaCha8Rng) -> SvrInstance {
    let n = rng.random_range(2..=8);
    let d = rng.random_range(1..=3);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = x
        .iter()
        .map(|r| {
            let lin: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            lin.sin() + 0.3 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let sigma2 = if rng.random_bool(0.5) {
        Some(rng.random_range(0.3..3.0))
    } else {
        None
    };
    SvrInstance {
        x,
        y,
        sigma2,
        c: [0.1, 1.0, 10.0][rng.random_range(0..3)],
        eps: [0.0, 0.1, 0.5][rng.random_range(0..3)],
    }
}

/// Brute-force minimizer of `f` over a log-spaced grid with `points` values
/// per axis.
pub fn log_grid_argmin(lo: [f64; 3], hi: [f64; 3], points: usize, f: impl Fn([f64; 3]) -> f64) -> ([f64; 3], f64) {
    let axis = |d: usize| -> Vec<f64> {
        (0..points)
            .map(|i| 10f64.powf(lo[d] + (hi[d] - lo[d]) * i as f64 / (points - 1) as f64))
            .collect()
    };
    let (a, b, c) = (axis(0), axis(1), axis(2));
    let mut best = ([f64::NAN; 3], f64::INFINITY);
    for &p in &a {
        for &q in &b {
            for &r in &c {
                let v = f([p, q, r]);
                if v < best.1 {
                    best = ([p, q, r], v);
                }
            }
        }
    }
    best
}

/// Random contiguous daily precipitation starting on an arbitrary weekday.
pub fn random_daily_fixture(rng: &mut ChaCha8Rng) -> Vec<DailyRecord> {
    let start = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap() + Duration::days(rng.random_range(0..12_000));
    let days = rng.random_range(1..120);
    (0..days)
        .map(|k| {
            let amount = if rng.random_bool(0.4) {
                0.0
            } else {
                // Span several orders of magnitude to stress summation.
                10f64.powf(rng.random_range(-3.0..2.5))
            };
            DailyRecord::precipitation_only(start + Duration::days(k), amount)
        })
        .collect()
}

/// Total precipitation over the ISO weeks fully covered by `days`, grouped
/// by week independently of the aggregation code.
pub fn complete_week_total(days: &[DailyRecord]) -> (usize, f64) {
    let mut weeks: Vec<(NaiveDate, usize, f64)> = Vec::new();
    for d in days {
        let monday = d.date - Duration::days(d.date.weekday().num_days_from_monday() as i64);
        match weeks.last_mut() {
            Some(w) if w.0 == monday => {
                w.1 += 1;
                w.2 += d.precipitation_mm;
            }
            _ => weeks.push((monday, 1, d.precipitation_mm)),
        }
    }
    let full: Vec<_> = weeks.iter().filter(|w| w.1 == 7).collect();
    (full.len(), full.iter().map(|w| w.2).sum())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
