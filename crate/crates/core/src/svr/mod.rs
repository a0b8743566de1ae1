//! ε-insensitive support vector regression.

mod scaler;
mod smo;

pub use scaler::Scaler;
pub use smo::{dual_objective_gram, solve_dual, DualSolution, SolverConfig};

use crate::kernel::{gram_matrix, KernelSpec};
use crate::serial::{check_header, TextReader, TextWriter};
use crate::{DesignMatrix, Error, Result};

/// `max(0, |r| − ε)`.
pub fn eps_insensitive_loss(residual: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::config(format!("ε must be non-negative, got {epsilon}")));
    }
    Ok((residual.abs() - epsilon).max(0.0))
}

/// SVR hyperparameters. `C` is the per-point penalty (the inverse of a
/// ridge-style λ); `epsilon` is measured in standardized target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrHyperparams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
}

impl Default for SvrHyperparams {
    /// `C = 1`, `σ² = 1`, `ε = 0.1`.
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            kernel: KernelSpec::Rbf { sigma2: 1.0 },
        }
    }
}

impl SvrHyperparams {
    pub fn rbf(c: f64, sigma2: f64, epsilon: f64) -> Self {
        Self {
            c,
            epsilon,
            kernel: KernelSpec::Rbf { sigma2 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!("ε must be non-negative, got {}", self.epsilon)));
        }
        self.kernel.validate()
    }

    pub fn sigma2(&self) -> Option<f64> {
        match self.kernel {
            KernelSpec::Rbf { sigma2 } => Some(sigma2),
            KernelSpec::Linear => None,
        }
    }
}

/// A trained regressor. Only rows with nonzero coefficient are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    support: DesignMatrix,
    theta: Vec<f64>,
    bias: f64,
    scaler: Scaler,
    hyperparams: SvrHyperparams,
}

/// Everything produced by a fit, including the full dual solution on the
/// standardized training data.
#[derive(Debug, Clone)]
pub struct SvrFit {
    pub model: SvrModel,
    pub solution: DualSolution,
    pub scaled_x: DesignMatrix,
    pub scaled_y: Vec<f64>,
}

fn check_inputs(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if x.rows() < 2 {
        return Err(Error::data(format!("need at least 2 samples, got {}", x.rows())));
    }
    if x.cols() == 0 {
        return Err(Error::data("no features"));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value in training data"));
    }
    Ok(())
}

pub fn fit_detailed(
    x: &DesignMatrix,
    y: &[f64],
    hp: &SvrHyperparams,
    solver: &SolverConfig,
) -> Result<SvrFit> {
    check_inputs(x, y)?;
    hp.validate()?;
    let scaler = Scaler::fit(x, y)?;
    let scaled_x = scaler.transform(x);
    let scaled_y: Vec<f64> = y.iter().map(|&v| scaler.scale_target(v)).collect();
    let gram = gram_matrix(&scaled_x, &hp.kernel)?;
    let solution = solve_dual(&gram, &scaled_y, hp.c, hp.epsilon, solver)?;

    let theta_all = solution.theta();
    let keep: Vec<usize> = (0..theta_all.len()).filter(|&i| theta_all[i] != 0.0).collect();
    let model = SvrModel {
        support: scaled_x.select_rows(&keep),
        theta: keep.iter().map(|&i| theta_all[i]).collect(),
        bias: solution.bias,
        scaler,
        hyperparams: *hp,
    };
    Ok(SvrFit {
        model,
        solution,
        scaled_x,
        scaled_y,
    })
}

/// Fits with the default solver settings.
pub fn svr_fit(x: &DesignMatrix, y: &[f64], hp: &SvrHyperparams) -> Result<SvrModel> {
    fit_detailed(x, y, hp, &SolverConfig::default()).map(|f| f.model)
}

const HEADER: &str = "climrisk-svr";
const VERSION: &str = "1";

impl SvrModel {
    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn hyperparams(&self) -> &SvrHyperparams {
        &self.hyperparams
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Nonzero coefficients, aligned with [`Self::support_vectors`].
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Support vectors in standardized feature units.
    pub fn support_vectors(&self) -> &DesignMatrix {
        &self.support
    }

    /// Prediction in standardized target units for a standardized input.
    pub fn predict_scaled(&self, z: &[f64]) -> f64 {
        let k = &self.hyperparams.kernel;
        self.support
            .iter_rows()
            .zip(&self.theta)
            .map(|(sv, t)| t * k.apply(sv, z))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let z = self.scaler.transform_row(x);
        Ok(self.scaler.unscale_target(self.predict_scaled(&z)))
    }

    pub fn predict_many(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.cols(),
            });
        }
        let mut z = vec![0.0; x.cols()];
        Ok(x.iter_rows()
            .map(|row| {
                self.scaler.transform_row_into(row, &mut z);
                self.scaler.unscale_target(self.predict_scaled(&z))
            })
            .collect())
    }

    pub(crate) fn write(&self, w: &mut TextWriter) {
        w.value(HEADER, VERSION)
            .value("c", self.hyperparams.c)
            .value("epsilon", self.hyperparams.epsilon);
        match self.hyperparams.kernel {
            KernelSpec::Rbf { sigma2 } => w.line("kernel", ["rbf".to_string(), sigma2.to_string()]),
            KernelSpec::Linear => w.line("kernel", ["linear"]),
        };
        self.scaler.write(w);
        w.value("bias", self.bias)
            .line("support", [self.support.rows(), self.support.cols()]);
        for (row, t) in self.support.iter_rows().zip(&self.theta) {
            w.line("sv", std::iter::once(t).chain(row));
        }
    }

    pub(crate) fn read(r: &mut TextReader<'_>) -> Result<Self> {
        check_header(r, HEADER, VERSION)?;
        let c: f64 = r.parse_one("c")?;
        let epsilon: f64 = r.parse_one("epsilon")?;
        let kernel = match r.expect("kernel")?.as_slice() {
            ["rbf", s] => KernelSpec::Rbf {
                sigma2: crate::serial::parse("kernel", s)?,
            },
            ["linear"] => KernelSpec::Linear,
            other => return Err(Error::ModelFormat(format!("unknown kernel {other:?}"))),
        };
        let hyperparams = SvrHyperparams { c, epsilon, kernel };
        hyperparams
            .validate()
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let scaler = Scaler::read(r)?;
        let bias = r.parse_one("bias")?;
        let dims: Vec<usize> = r.parse_all("support")?;
        let [rows, cols] = dims[..] else {
            return Err(Error::ModelFormat("`support` takes rows and cols".into()));
        };
        if cols != scaler.dim() {
            return Err(Error::ModelFormat("support width differs from scaler".into()));
        }
        let mut theta = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let vals: Vec<f64> = r.parse_all("sv")?;
            if vals.len() != cols + 1 {
                return Err(Error::ModelFormat("support row has wrong width".into()));
            }
            theta.push(vals[0]);
            data.extend_from_slice(&vals[1..]);
        }
        Ok(Self {
            support: DesignMatrix::new(rows, cols, data)?,
            theta,
            bias,
            scaler,
            hyperparams,
        })
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::new();
        self.write(&mut w);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read(&mut TextReader::new(text))
    }
}


impl SvrFit {
    /// Checks the optimality structure of the solution on the standardized
    /// training data: box and equality constraints, complementary slackness,
    /// and the ε-tube characterization of each coefficient. `tol` is the
    /// allowed KKT slack in standardized target units.
    pub fn verify_kkt(&self, tol: f64) -> std::result::Result<(), String> {
        let s = &self.solution;
        let c = self.model.hyperparams.c;
        let eps = self.model.hyperparams.epsilon;
        let n = s.alpha.len();
        let theta = s.theta();
        for i in 0..n {
            let (a, a_star) = (s.alpha[i], s.alpha_star[i]);
            if a < 0.0 || a_star < 0.0 || a > c || a_star > c {
                return Err(format!("box violated at {i}: α = {a}, α* = {a_star}, C = {c}"));
            }
            if a * a_star > 1e-8 {
                return Err(format!("complementary slackness violated at {i}: {}", a * a_star));
            }
        }
        let sum: f64 = theta.iter().sum();
        if sum.abs() > 1e-8 * n as f64 * c {
            return Err(format!("Σθ = {sum}"));
        }
        let k = &self.model.hyperparams.kernel;
        for i in 0..n {
            let xi = self.scaled_x.row(i);
            let f: f64 = (0..n)
                .filter(|&j| theta[j] != 0.0)
                .map(|j| theta[j] * k.apply(self.scaled_x.row(j), xi))
                .sum::<f64>()
                + s.bias;
            let r = self.scaled_y[i] - f;
            let t = theta[i];
            let ok = if t == 0.0 {
                r.abs() <= eps + tol
            } else if t >= c {
                r >= eps - tol
            } else if t <= -c {
                r <= -eps + tol
            } else if t > 0.0 {
                (r - eps).abs() <= tol
            } else {
                (r + eps).abs() <= tol
            };
            if !ok {
                return Err(format!("point {i}: θ = {t}, residual {r}, ε = {eps}, C = {c}"));
            }
        }
        Ok(())
    }
}
