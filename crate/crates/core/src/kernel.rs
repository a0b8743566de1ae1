//! Kernel functions and dense Gram matrices.

use crate::{DesignMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-‖x − x′‖² / (2σ²))`, parameterized by the bandwidth `σ²`.
    Rbf { sigma2: f64 },
    /// Plain inner product.
    Linear,
}

impl KernelSpec {
    pub fn rbf(sigma2: f64) -> Result<Self> {
        let k = KernelSpec::Rbf { sigma2 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => Err(
                Error::config(format!("RBF bandwidth must be positive, got {sigma2}")),
            ),
            _ => Ok(()),
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma2 } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma2)).exp()
            }
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

pub fn kernel_eval(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    spec.validate()?;
    Ok(spec.apply(a, b))
}

/// Symmetric Gram matrix, row-major `n × n`. The upper triangle is computed
/// and mirrored, so `K[i][j] == K[j][i]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Builds a Gram matrix from explicit values; the caller guarantees symmetry.
    pub fn from_values(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }
}

pub fn gram_matrix(x: &DesignMatrix, spec: &KernelSpec) -> Result<Gram> {
    spec.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::data("Gram matrix needs at least one row"));
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let xi = x.row(i);
        for j in i..n {
            let v = spec.apply(xi, x.row(j));
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(Gram { n, data })
}
