use crate::serial::{TextReader, TextWriter};
use crate::{DesignMatrix, Error, Result};

/// Z-score standardization of features and target. Columns with zero spread
/// keep a standard deviation of 1 and are flagged as constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub constant_features: Vec<bool>,
    pub target_mean: f64,
    pub target_std: f64,
    pub constant_target: bool,
}

fn mean_std(values: &[f64]) -> (f64, f64, bool) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 * mean.abs().max(1.0) {
        (mean, std, false)
    } else {
        (mean, 1.0, true)
    }
}

impl Scaler {
    /// Population statistics of `x` and `y`.
    pub fn fit(x: &DesignMatrix, y: &[f64]) -> Result<Self> {
        if x.rows() == 0 || x.rows() != y.len() {
            return Err(Error::Dimension {
                expected: x.rows(),
                found: y.len(),
            });
        }
        let mut feature_mean = Vec::with_capacity(x.cols());
        let mut feature_std = Vec::with_capacity(x.cols());
        let mut constant_features = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let (m, s, c) = mean_std(&x.column(j));
            feature_mean.push(m);
            feature_std.push(s);
            constant_features.push(c);
        }
        let (target_mean, target_std, constant_target) = mean_std(y);
        Ok(Self {
            feature_mean,
            feature_std,
            constant_features,
            target_mean,
            target_std,
            constant_target,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            feature_mean: vec![0.0; dim],
            feature_std: vec![1.0; dim],
            constant_features: vec![false; dim],
            target_mean: 0.0,
            target_std: 1.0,
            constant_target: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn transform_row_into(&self, row: &[f64], out: &mut [f64]) {
        for (j, (o, v)) in out.iter_mut().zip(row).enumerate() {
            *o = (v - self.feature_mean[j]) / self.feature_std[j];
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; row.len()];
        self.transform_row_into(row, &mut out);
        out
    }

    pub fn transform(&self, x: &DesignMatrix) -> DesignMatrix {
        let mut out = DesignMatrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.transform_row_into(x.row(i), out.row_mut(i));
        }
        out
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn unscale_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }

    pub(crate) fn write(&self, w: &mut TextWriter) {
        w.line("feature_mean", &self.feature_mean)
            .line("feature_std", &self.feature_std)
            .line("constant_features", self.constant_features.iter().map(|&c| u8::from(c)))
            .value("target_mean", self.target_mean)
            .value("target_std", self.target_std)
            .value("constant_target", u8::from(self.constant_target));
    }

    pub(crate) fn read(r: &mut TextReader<'_>) -> Result<Self> {
        let feature_mean: Vec<f64> = r.parse_all("feature_mean")?;
        let feature_std: Vec<f64> = r.parse_all("feature_std")?;
        let constant_features: Vec<u8> = r.parse_all("constant_features")?;
        if feature_std.len() != feature_mean.len() || constant_features.len() != feature_mean.len() {
            return Err(Error::ModelFormat("scaler dimensions disagree".into()));
        }
        Ok(Self {
            feature_mean,
            feature_std,
            constant_features: constant_features.into_iter().map(|c| c != 0).collect(),
            target_mean: r.parse_one("target_mean")?,
            target_std: r.parse_one("target_std")?,
            constant_target: r.parse_one::<u8>("constant_target")? != 0,
        })
    }
}
