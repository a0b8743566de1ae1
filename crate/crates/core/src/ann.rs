//! One-hidden-layer feedforward network: sigmoid hidden units, identity
//! output, trained by gradient descent on standardized data.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::serial::{check_header, TextReader, TextWriter};
use crate::svr::Scaler;
use crate::{DesignMatrix, Error, Result};

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnModel {
    input_dim: usize,
    /// Row `j` holds the input weights of hidden unit `j`.
    hidden_weights: Vec<f64>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
    scaler: Scaler,
}

/// Gradient with the same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnGradient {
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl AnnGradient {
    fn zeros(m: &AnnModel) -> Self {
        Self {
            hidden_weights: vec![0.0; m.hidden_weights.len()],
            hidden_bias: vec![0.0; m.hidden()],
            output_weights: vec![0.0; m.hidden()],
            output_bias: 0.0,
        }
    }

    /// Flattened in [`AnnModel::params`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.hidden_weights.clone();
        v.extend(&self.hidden_bias);
        v.extend(&self.output_weights);
        v.push(self.output_bias);
        v
    }
}

impl AnnModel {
    /// Network with explicit weights and an identity scaler.
    pub fn from_weights(
        input_dim: usize,
        hidden_weights: Vec<f64>,
        hidden_bias: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
    ) -> Result<Self> {
        let h = hidden_bias.len();
        if h == 0 {
            return Err(Error::config("network needs at least one hidden unit"));
        }
        if hidden_weights.len() != h * input_dim || output_weights.len() != h {
            return Err(Error::Dimension {
                expected: h * input_dim,
                found: hidden_weights.len(),
            });
        }
        Ok(Self {
            input_dim,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            scaler: Scaler::identity(input_dim),
        })
    }

    pub fn with_scaler(mut self, scaler: Scaler) -> Result<Self> {
        if scaler.dim() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                found: scaler.dim(),
            });
        }
        self.scaler = scaler;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    /// Weights flattened as hidden weights (unit-major), hidden biases,
    /// output weights, output bias.
    pub fn params(&self) -> Vec<f64> {
        AnnGradient {
            hidden_weights: self.hidden_weights.clone(),
            hidden_bias: self.hidden_bias.clone(),
            output_weights: self.output_weights.clone(),
            output_bias: self.output_bias,
        }
        .to_vec()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let (hw, h) = (self.hidden_weights.len(), self.hidden());
        if p.len() != hw + 2 * h + 1 {
            return Err(Error::Dimension {
                expected: hw + 2 * h + 1,
                found: p.len(),
            });
        }
        self.hidden_weights.copy_from_slice(&p[..hw]);
        self.hidden_bias.copy_from_slice(&p[hw..hw + h]);
        self.output_weights.copy_from_slice(&p[hw + h..hw + 2 * h]);
        self.output_bias = p[hw + 2 * h];
        Ok(())
    }

    /// Hidden activations and output for a standardized input.
    pub fn forward_scaled(&self, z: &[f64], hidden: &mut [f64]) -> f64 {
        let m = self.input_dim;
        let mut out = self.output_bias;
        for (j, h) in hidden.iter_mut().enumerate() {
            let w = &self.hidden_weights[j * m..(j + 1) * m];
            let v = self.hidden_bias[j] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            *h = sigmoid(v);
            out += self.output_weights[j] * *h;
        }
        out
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                found: len,
            });
        }
        Ok(())
    }

    /// Output in original target units.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let z = self.scaler.transform_row(x);
        let mut hidden = vec![0.0; self.hidden()];
        Ok(self.scaler.unscale_target(self.forward_scaled(&z, &mut hidden)))
    }

    pub fn predict_many(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        self.check_dim(x.cols())?;
        let mut z = vec![0.0; x.cols()];
        let mut hidden = vec![0.0; self.hidden()];
        Ok(x.iter_rows()
            .map(|row| {
                self.scaler.transform_row_into(row, &mut z);
                self.scaler.unscale_target(self.forward_scaled(&z, &mut hidden))
            })
            .collect())
    }

    /// Adds `scale ×` the gradient of `½(Y − target)²` at a standardized
    /// sample into `acc`; returns the squared-error half-loss.
    fn accumulate(&self, z: &[f64], target: f64, scale: f64, hidden: &mut [f64], acc: &mut AnnGradient) -> f64 {
        let out = self.forward_scaled(z, hidden);
        let err = out - target;
        let m = self.input_dim;
        acc.output_bias += scale * err;
        for j in 0..hidden.len() {
            let h = hidden[j];
            acc.output_weights[j] += scale * err * h;
            let delta = scale * err * self.output_weights[j] * h * (1.0 - h);
            acc.hidden_bias[j] += delta;
            for (g, zi) in acc.hidden_weights[j * m..(j + 1) * m].iter_mut().zip(z) {
                *g += delta * zi;
            }
        }
        0.5 * err * err
    }

    fn step(&mut self, g: &AnnGradient, lr: f64) {
        for (w, d) in self.hidden_weights.iter_mut().zip(&g.hidden_weights) {
            *w -= lr * d;
        }
        for (w, d) in self.hidden_bias.iter_mut().zip(&g.hidden_bias) {
            *w -= lr * d;
        }
        for (w, d) in self.output_weights.iter_mut().zip(&g.output_weights) {
            *w -= lr * d;
        }
        self.output_bias -= lr * g.output_bias;
    }
}

/// Output of the network for `x`, in original target units.
pub fn ann_forward(model: &AnnModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Exact gradient of `½(Y − y)²` with respect to every weight, where `Y`
/// and `y` are in the model's standardized target units.
pub fn ann_gradient(model: &AnnModel, x: &[f64], y_target: f64) -> Result<AnnGradient> {
    model.check_dim(x.len())?;
    let z = model.scaler.transform_row(x);
    let t = model.scaler.scale_target(y_target);
    let mut hidden = vec![0.0; model.hidden()];
    let mut g = AnnGradient::zeros(model);
    let loss = model.accumulate(&z, t, 1.0, &mut hidden, &mut g);
    if !loss.is_finite() || g.to_vec().iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value in network gradient"));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Initial weights are uniform in `±init_scale`.
    pub init_scale: f64,
    /// `None` for full-batch descent.
    pub batch_size: Option<usize>,
}

impl Default for AnnTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 5_000,
            seed: 0,
            init_scale: 0.5,
            batch_size: None,
        }
    }
}

impl AnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::config("init_scale must be non-negative"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("batch_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AnnFit {
    pub model: AnnModel,
    /// Mean half squared error on the standardized training data, measured
    /// before each epoch's updates.
    pub loss_history: Vec<f64>,
}

/// Trains a network with `hidden` units on `(x, y)`.
pub fn ann_train(x: &DesignMatrix, y: &[f64], hidden: usize, config: &AnnTrainConfig) -> Result<AnnFit> {
    config.validate()?;
    if hidden < 1 {
        return Err(Error::config("network needs at least one hidden unit"));
    }
    if x.rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::data("empty training data"));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value in training data"));
    }
    let scaler = Scaler::fit(x, y)?;
    let zx = scaler.transform(x);
    let zy: Vec<f64> = y.iter().map(|&v| scaler.scale_target(v)).collect();

    let m = x.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = config.init_scale;
    let mut draw = |k: usize| -> Vec<f64> {
        (0..k)
            .map(|_| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 })
            .collect()
    };
    let hw = draw(hidden * m);
    let hb = draw(hidden);
    let ow = draw(hidden);
    let ob = draw(1)[0];
    let mut model = AnnModel::from_weights(m, hw, hb, ow, ob)?.with_scaler(scaler)?;

    let n = x.rows();
    let batch = config.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut hidden_buf = vec![0.0; hidden];
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut g = AnnGradient::zeros(&model);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                epoch_loss += model.accumulate(zx.row(i), zy[i], scale, &mut hidden_buf, &mut g);
            }
            model.step(&g, config.learning_rate);
        }
        let epoch_loss = epoch_loss / n as f64;
        if !epoch_loss.is_finite() || model.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        loss_history.push(epoch_loss);
    }
    Ok(AnnFit { model, loss_history })
}

const HEADER: &str = "climrisk-ann";
const VERSION: &str = "1";

impl AnnModel {
    pub(crate) fn write(&self, w: &mut TextWriter) {
        w.value(HEADER, VERSION)
            .line("shape", [self.input_dim, self.hidden()])
            .line("hidden_weights", &self.hidden_weights)
            .line("hidden_bias", &self.hidden_bias)
            .line("output_weights", &self.output_weights)
            .value("output_bias", self.output_bias);
        self.scaler.write(w);
    }

    pub(crate) fn read(r: &mut TextReader<'_>) -> Result<Self> {
        check_header(r, HEADER, VERSION)?;
        let shape: Vec<usize> = r.parse_all("shape")?;
        let [m, _h] = shape[..] else {
            return Err(Error::ModelFormat("`shape` takes input and hidden sizes".into()));
        };
        let model = Self::from_weights(
            m,
            r.parse_all("hidden_weights")?,
            r.parse_all("hidden_bias")?,
            r.parse_all("output_weights")?,
            r.parse_one("output_bias")?,
        )
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
        model
            .with_scaler(Scaler::read(r)?)
            .map_err(|e| Error::ModelFormat(e.to_string()))
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

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(hidden: usize, seed: u64) -> AnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |k: usize| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (hw, hb, ow) = (u(hidden * 4), u(hidden), u(hidden));
        AnnModel::from_weights(4, hw, hb, ow, 0.3).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = AnnModel::from_weights(4, vec![0.0; 8], vec![0.0; 2], vec![0.0; 2], 0.0).unwrap();
        assert_eq!(ann_forward(&m, &[1.0, -2.0, 3.0, 4.0]).unwrap(), 0.0);
        let mut h = [0.0; 2];
        m.forward_scaled(&[1.0, -2.0, 3.0, 4.0], &mut h);
        assert_eq!(h, [0.5, 0.5]);
    }

    #[test]
    fn hand_evaluated_network() {
        let m = AnnModel::from_weights(4, vec![1.0, 0.0, 0.0, 0.0], vec![0.0], vec![2.0], 1.0).unwrap();
        assert_eq!(ann_forward(&m, &[0.0, 7.0, -3.0, 9.0]).unwrap(), 2.0);
    }

    #[test]
    fn constant_head() {
        let mut m = toy(3, 1);
        let mut p = m.params();
        let h = m.hidden();
        let hw = m.hidden_weights.len();
        for v in &mut p[hw + h..hw + 2 * h] {
            *v = 0.0;
        }
        m.set_params(&p).unwrap();
        for x in [[0.0; 4], [5.0, -1.0, 2.0, 8.0]] {
            assert_eq!(ann_forward(&m, &x).unwrap(), 0.3);
        }
    }

    #[test]
    fn gradient_zero_at_target() {
        let m = toy(2, 2);
        let x = [0.1, 0.2, -0.3, 0.4];
        let y = ann_forward(&m, &x).unwrap();
        let g = ann_gradient(&m, &x, y).unwrap();
        assert!(g.to_vec().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn output_bias_gradient_is_residual() {
        let m = toy(2, 3);
        let x = [0.5, -0.2, 0.1, 1.0];
        let y = ann_forward(&m, &x).unwrap();
        let g = ann_gradient(&m, &x, 2.0).unwrap();
        assert_eq!(g.output_bias, y - 2.0);
    }

    #[test]
    fn activations_in_open_unit_interval() {
        let m = toy(5, 4);
        let mut h = [0.0; 5];
        m.forward_scaled(&[3.0, -3.0, 1.0, 0.5], &mut h);
        assert!(h.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let x = DesignMatrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [0.0, 2.0, 4.0, 6.0];
        let cfg = AnnTrainConfig { learning_rate: 0.0, epochs: 20, seed: 7, ..Default::default() };
        let a = ann_train(&x, &y, 2, &cfg).unwrap();
        let b = ann_train(&x, &y, 2, &AnnTrainConfig { epochs: 1, ..cfg }).unwrap();
        assert_eq!(a.model.params(), b.model.params());
    }

    #[test]
    fn training_is_deterministic() {
        let x = DesignMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.5], [2.0, 0.2], [3.0, 0.0]]).unwrap();
        let y = [1.0, 2.0, 2.5, 2.0];
        let cfg = AnnTrainConfig { epochs: 200, seed: 5, batch_size: Some(2), ..Default::default() };
        let a = ann_train(&x, &y, 3, &cfg).unwrap();
        let b = ann_train(&x, &y, 3, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn divergence_reported() {
        let x = DesignMatrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [0.0, 2.0, 4.0, 7.0];
        let cfg = AnnTrainConfig { learning_rate: 1e6, epochs: 500, ..Default::default() };
        assert!(matches!(ann_train(&x, &y, 2, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn config_errors() {
        let x = DesignMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(ann_train(&x, &[0.0, 1.0], 0, &AnnTrainConfig::default()).is_err());
        let bad = AnnTrainConfig { epochs: 0, ..Default::default() };
        assert!(ann_train(&x, &[0.0, 1.0], 2, &bad).is_err());
        assert!(matches!(
            ann_forward(&toy(2, 0), &[1.0]),
            Err(Error::Dimension { expected: 4, found: 1 })
        ));
    }

    #[test]
    fn text_round_trip() {
        let x = DesignMatrix::from_rows(&[[0.0, 3.0], [1.0, 1.0], [2.0, 4.0], [3.0, 1.0]]).unwrap();
        let fit = ann_train(&x, &[1.0, 3.0, 2.0, 5.0], 2, &AnnTrainConfig { epochs: 50, ..Default::default() }).unwrap();
        let back = AnnModel::from_text(&fit.model.to_text()).unwrap();
        assert_eq!(back, fit.model);
    }
}
