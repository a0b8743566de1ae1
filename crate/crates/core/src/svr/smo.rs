//! Sequential minimal optimization for the ε-SVR dual.
//!
//! The pair `(α*, α)` is stacked into one vector `a` of length `2n` with
//! signs `s = (+1,…,+1, −1,…,−1)`, turning the dual into
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  sᵀa = 0,  0 ≤ a ≤ C
//! Q_kl = s_k s_l K(k mod n, l mod n),   p = (ε − y, ε + y)
//! ```
//!
//! Working pairs are chosen by maximal violation with second-order gain, and
//! the run stops when the gap between the most violating up and down
//! directions drops below the tolerance.

use crate::kernel::Gram;
use crate::{Error, Result};

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop when the maximal KKT violation is at most this.
    pub tol: f64,
    /// Cap on pair updates.
    pub max_iter: usize,
    /// Temporarily drop variables that are stuck at a bound. Ignored when
    /// recording a trace.
    pub shrinking: bool,
    /// Record the dual objective after every update.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 1_000_000,
            shrinking: true,
            record_trace: false,
        }
    }
}

/// Dual solution in the original `(α, α*)` parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    /// Dual objective (to be maximized) at `(alpha, alpha_star)`.
    pub objective: f64,
    /// Maximal KKT violation at termination.
    pub kkt_violation: f64,
    pub iterations: usize,
    /// Dual objective after each update, when requested.
    pub trace: Vec<f64>,
}

impl DualSolution {
    /// `θ_i = α*_i − α_i`, the expansion coefficients of the regressor.
    pub fn theta(&self) -> Vec<f64> {
        self.alpha_star
            .iter()
            .zip(&self.alpha)
            .map(|(s, a)| s - a)
            .collect()
    }
}

/// Dual objective
/// `−½ ΣΣ θ_i θ_j K_ij − ε Σ (α_i + α*_i) + Σ y_i θ_i` with `θ = α* − α`.
pub fn dual_objective_gram(
    alpha: &[f64],
    alpha_star: &[f64],
    gram: &Gram,
    y: &[f64],
    epsilon: f64,
) -> Result<f64> {
    let n = gram.n();
    for len in [alpha.len(), alpha_star.len(), y.len()] {
        if len != n {
            return Err(Error::Dimension { expected: n, found: len });
        }
    }
    let theta: Vec<f64> = alpha_star.iter().zip(alpha).map(|(s, a)| s - a).collect();
    let mut quad = 0.0;
    for i in 0..n {
        if theta[i] == 0.0 {
            continue;
        }
        let ki = gram.row(i);
        let inner: f64 = theta.iter().zip(ki).map(|(t, k)| t * k).sum();
        quad += theta[i] * inner;
    }
    let l1: f64 = alpha.iter().zip(alpha_star).map(|(a, s)| a + s).sum();
    let lin: f64 = y.iter().zip(&theta).map(|(y, t)| y * t).sum();
    Ok(-0.5 * quad - epsilon * l1 + lin)
}

struct State<'a> {
    gram: &'a Gram,
    n: usize,
    c: f64,
    a: Vec<f64>,
    grad: Vec<f64>,
    /// `C Σ_{a_j = C} Q_tj`, used to rebuild the gradient of shrunk variables.
    grad_bar: Vec<f64>,
    p: Vec<f64>,
    /// `s_t` and `t mod n`, precomputed for the hot loops.
    sign: Vec<f64>,
    base: Vec<usize>,
    diag: Vec<f64>,
    /// Variable ids; the first `active` entries are being optimized.
    order: Vec<usize>,
    active: usize,
    unshrunk: bool,
}

impl State<'_> {
    #[inline]
    fn sign(&self, k: usize) -> f64 {
        self.sign[k]
    }

    #[inline]
    fn k(&self, a: usize, b: usize) -> f64 {
        self.gram.get(self.base[a], self.base[b])
    }

    #[inline]
    fn at_upper(&self, t: usize) -> bool {
        self.a[t] >= self.c
    }

    #[inline]
    fn at_lower(&self, t: usize) -> bool {
        self.a[t] <= 0.0
    }

    #[inline]
    fn in_up(&self, t: usize) -> bool {
        if t < self.n {
            !self.at_upper(t)
        } else {
            !self.at_lower(t)
        }
    }

    #[inline]
    fn in_low(&self, t: usize) -> bool {
        if t < self.n {
            !self.at_lower(t)
        } else {
            !self.at_upper(t)
        }
    }

    /// Returns the working pair among active variables, or `None` with the
    /// current violation when the tolerance is met.
    fn select(&self, tol: f64) -> (Option<(usize, usize)>, f64) {
        let active = &self.order[..self.active];
        let (a, grad, sign, c) = (&self.a, &self.grad, &self.sign, self.c);
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for &t in active {
            // Up set: α* below C, or α above 0.
            let up = if sign[t] > 0.0 { a[t] < c } else { a[t] > 0.0 };
            if up {
                let v = -sign[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        if i_sel != usize::MAX {
            let kii = self.diag[self.base[i_sel]];
            let ki = self.gram.row(self.base[i_sel]);
            for &t in active {
                let low = if sign[t] > 0.0 { a[t] > 0.0 } else { a[t] < c };
                if !low {
                    continue;
                }
                let sg = sign[t] * grad[t];
                gmax2 = gmax2.max(sg);
                let diff = gmax + sg;
                if diff > 0.0 {
                    let tt = self.base[t];
                    let mut quad = kii + self.diag[tt] - 2.0 * ki[tt];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let gain = -(diff * diff) / quad;
                    if gain <= best {
                        best = gain;
                        j_sel = t;
                    }
                }
            }
        }
        let violation = (gmax + gmax2).max(0.0);
        if violation <= tol || j_sel == usize::MAX {
            (None, if violation.is_finite() { violation } else { 0.0 })
        } else {
            (Some((i_sel, j_sel)), violation)
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (si, sj) = (self.sign(i), self.sign(j));
        let kij = self.k(i, j);
        let mut quad = self.k(i, i) + self.k(j, j) - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        let (old_i, old_j) = (self.a[i], self.a[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if si != sj {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        let was_upper = (self.at_upper(i), self.at_upper(j));
        self.a[i] = ai;
        self.a[j] = aj;

        // grad_t += Q_ti Δa_i + Q_tj Δa_j, with Q_tl = s_t s_l K.
        let n = self.n;
        let di = si * (ai - old_i);
        let dj = sj * (aj - old_j);
        let ki = self.gram.row(self.base[i]);
        let kj = self.gram.row(self.base[j]);
        for &t in &self.order[..self.active] {
            let tt = self.base[t];
            self.grad[t] += self.sign[t] * (di * ki[tt] + dj * kj[tt]);
        }

        for (var, s_var, before) in [(i, si, was_upper.0), (j, sj, was_upper.1)] {
            let now = self.at_upper(var);
            if now != before {
                let coef = if now { c * s_var } else { -c * s_var };
                let kv = self.gram.row(var % n);
                for t in 0..n {
                    let v = coef * kv[t];
                    self.grad_bar[t] += v;
                    self.grad_bar[t + n] -= v;
                }
            }
        }
    }

    /// Recomputes the gradient of shrunk variables from `grad_bar` and the
    /// free variables.
    fn reconstruct_gradient(&mut self) {
        if self.active == 2 * self.n {
            return;
        }
        let n = self.n;
        let free: Vec<(usize, f64)> = (0..2 * n)
            .filter(|&t| !self.at_upper(t) && !self.at_lower(t))
            .map(|t| (t, self.sign(t) * self.a[t]))
            .collect();
        for k in self.active..2 * n {
            let t = self.order[k];
            let row = self.gram.row(t % n);
            let s: f64 = free.iter().map(|&(j, sa)| sa * row[j % n]).sum();
            self.grad[t] = self.grad_bar[t] + self.p[t] + self.sign(t) * s;
        }
    }

    fn unshrink(&mut self) {
        self.reconstruct_gradient();
        self.active = 2 * self.n;
    }

    fn be_shrunk(&self, t: usize, gmax1: f64, gmax2: f64) -> bool {
        let g = self.grad[t];
        let pos = t < self.n;
        if self.at_upper(t) {
            if pos {
                -g > gmax1
            } else {
                -g > gmax2
            }
        } else if self.at_lower(t) {
            if pos {
                g > gmax2
            } else {
                g > gmax1
            }
        } else {
            false
        }
    }

    fn shrink(&mut self, tol: f64) {
        let mut gmax1 = f64::NEG_INFINITY;
        let mut gmax2 = f64::NEG_INFINITY;
        for &t in &self.order[..self.active] {
            let sg = self.sign(t) * self.grad[t];
            if self.in_up(t) {
                gmax1 = gmax1.max(-sg);
            }
            if self.in_low(t) {
                gmax2 = gmax2.max(sg);
            }
        }
        if !self.unshrunk && gmax1 + gmax2 <= tol * 10.0 {
            self.unshrunk = true;
            self.unshrink();
        }
        let mut k = 0;
        while k < self.active {
            let t = self.order[k];
            if self.be_shrunk(t, gmax1, gmax2) {
                self.active -= 1;
                self.order.swap(k, self.active);
            } else {
                k += 1;
            }
        }
    }

    /// Dual objective in maximization form, from the maintained gradient.
    fn objective(&self) -> f64 {
        let f: f64 = self
            .a
            .iter()
            .zip(self.grad.iter().zip(&self.p))
            .map(|(a, (g, p))| a * (g + p))
            .sum();
        -0.5 * f
    }

    /// Bias from free variables, or the midpoint of the feasible interval.
    fn bias(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut sum_free = 0.0;
        let mut n_free = 0usize;
        for t in 0..2 * self.n {
            let s = self.sign(t);
            let sg = s * self.grad[t];
            if self.at_upper(t) {
                if s < 0.0 {
                    ub = ub.min(sg);
                } else {
                    lb = lb.max(sg);
                }
            } else if self.at_lower(t) {
                if s > 0.0 {
                    ub = ub.min(sg);
                } else {
                    lb = lb.max(sg);
                }
            } else {
                n_free += 1;
                sum_free += sg;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }
}

/// Solves the ε-SVR dual for a precomputed Gram matrix.
pub fn solve_dual(
    gram: &Gram,
    y: &[f64],
    c: f64,
    epsilon: f64,
    config: &SolverConfig,
) -> Result<DualSolution> {
    let n = gram.n();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, found: y.len() });
    }
    if !(c > 0.0 && c.is_finite()) || !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::config(format!(
            "need C > 0 and ε ≥ 0, got C = {c}, ε = {epsilon}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite target"));
    }
    let p: Vec<f64> = y
        .iter()
        .map(|&yi| epsilon - yi)
        .chain(y.iter().map(|&yi| epsilon + yi))
        .collect();
    let mut st = State {
        gram,
        n,
        c,
        a: vec![0.0; 2 * n],
        grad: p.clone(),
        grad_bar: vec![0.0; 2 * n],
        p,
        sign: (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect(),
        base: (0..2 * n).map(|t| t % n).collect(),
        diag: (0..n).map(|i| gram.get(i, i)).collect(),
        order: (0..2 * n).collect(),
        active: 2 * n,
        unshrunk: false,
    };
    let shrinking = config.shrinking && !config.record_trace;
    let shrink_every = (2 * n).min(1000);
    let mut countdown = shrink_every;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let violation = loop {
        if shrinking {
            countdown -= 1;
            if countdown == 0 {
                countdown = shrink_every;
                st.shrink(config.tol);
            }
        }
        let (mut pair, mut violation) = st.select(config.tol);
        if pair.is_none() && st.active < 2 * n {
            // Converged on the active set; confirm on the full problem.
            st.unshrink();
            (pair, violation) = st.select(config.tol);
            countdown = 1;
        }
        let Some((i, j)) = pair else {
            break violation;
        };
        if iterations >= config.max_iter {
            st.unshrink();
            let violation = st.select(config.tol).1.max(violation);
            return Err(Error::NonConvergence {
                iterations,
                max_violation: violation,
            });
        }
        st.update(i, j);
        iterations += 1;
        if config.record_trace {
            trace.push(st.objective());
        }
    };

    let bias = st.bias();
    // Only θ = α* − α enters the regressor; keeping the positive and negative
    // parts makes α_i α*_i = 0 exact.
    let mut alpha = vec![0.0; n];
    let mut alpha_star = vec![0.0; n];
    for i in 0..n {
        let theta = st.a[i] - st.a[i + n];
        if theta > 0.0 {
            alpha_star[i] = theta;
        } else {
            alpha[i] = -theta;
        }
    }
    let objective = dual_objective_gram(&alpha, &alpha_star, gram, y, epsilon)?;
    Ok(DualSolution {
        alpha,
        alpha_star,
        bias,
        objective,
        kkt_violation: violation,
        iterations,
        trace,
    })
}
