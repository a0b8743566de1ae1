//! Goodness-of-fit measures.

use std::io::Write;

use chrono::NaiveDate;

use crate::ann::AnnTrainConfig;
use crate::data::{build_claims_features, build_loss_features, WeeklySeries};
use crate::ga::GaConfig;
use crate::pipeline::{control_summary, fit_matrices, ControlSummary, ModelKind, ModelSpec, TwoStageFit, TwoStageModel};
use crate::svr::{SolverConfig, SvrHyperparams};
use crate::{par, DesignMatrix, Error, Result};

/// Root mean squared error.
pub fn rmse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::Dimension {
            expected: observed.len(),
            found: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::data("RMSE of an empty series"));
    }
    let sse: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok((sse / observed.len() as f64).sqrt())
}

/// Fraction of the top-decile observed weeks whose fitted value is also in
/// the fitted top decile. The decile holds `ceil(n / 10)` entries; ties go to
/// the earlier week.
pub fn peak_capture(fitted: &[f64], observed: &[f64]) -> Result<f64> {
    if fitted.len() != observed.len() {
        return Err(Error::Dimension {
            expected: observed.len(),
            found: fitted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::data("peak capture of an empty series"));
    }
    let k = observed.len().div_ceil(10);
    let top = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    };
    let obs = top(observed);
    let fit = top(fitted);
    let hits = obs.iter().filter(|i| fit.contains(i)).count();
    Ok(hits as f64 / k as f64)
}

/// Observed and fitted weekly values for both stages on the training
/// features. Stage two is driven by observed claims, as in training.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedSeries {
    pub weeks: Vec<NaiveDate>,
    pub claims_observed: Vec<f64>,
    pub claims_fitted: Vec<f64>,
    pub loss_observed: Vec<f64>,
    pub loss_fitted: Vec<f64>,
    pub peak_capture_claims: f64,
    pub peak_capture_loss: f64,
}

pub fn fitted_series(model: &TwoStageModel, control: &WeeklySeries) -> Result<FittedSeries> {
    let (cx, cy) = build_claims_features(control)?;
    let (lx, ly) = build_loss_features(control, &cy)?;
    let claims_fitted = model.claims.predict_many(&cx)?;
    let loss_fitted = model.loss.predict_many(&lx)?;
    Ok(FittedSeries {
        weeks: control.records()[1..].iter().map(|r| r.week_start).collect(),
        peak_capture_claims: peak_capture(&claims_fitted, &cy)?,
        peak_capture_loss: peak_capture(&loss_fitted, &ly)?,
        claims_observed: cy,
        claims_fitted,
        loss_observed: ly,
        loss_fitted,
    })
}

/// Writes `week_start,N_obs,N_fit,L_obs,L_fit`.
pub fn write_fitted_csv<W: Write>(sink: W, s: &FittedSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["week_start", "N_obs", "N_fit", "L_obs", "L_fit"]).map_err(io)?;
    for k in 0..s.weeks.len() {
        w.write_record([
            s.weeks[k].format("%Y-%m-%d").to_string(),
            s.claims_observed[k].to_string(),
            s.claims_fitted[k].to_string(),
            s.loss_observed[k].to_string(),
            s.loss_fitted[k].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the model comparison. A model whose fit failed keeps its row
/// with empty values and the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: ModelKind,
    pub rmse_claims: Option<f64>,
    pub rmse_loss: Option<f64>,
    pub peak_capture_claims: Option<f64>,
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub ann_hidden: usize,
    pub ann: AnnTrainConfig,
    pub svr: SvrHyperparams,
    pub solver: SolverConfig,
    pub ga: GaConfig,
    /// Fraction of trailing weeks held out for evaluation; `None` reports
    /// training RMSE.
    pub holdout: Option<f64>,
    pub parallel: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            ann_hidden: 2,
            ann: AnnTrainConfig::default(),
            svr: SvrHyperparams::default(),
            solver: SolverConfig::default(),
            ga: GaConfig::default(),
            holdout: None,
            parallel: true,
        }
    }
}

impl CompareConfig {
    pub fn spec(&self, kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Ann => ModelSpec::Ann {
                hidden: self.ann_hidden,
                config: self.ann.clone(),
            },
            ModelKind::Svr => ModelSpec::Svr {
                hyperparams: self.svr.clone(),
                solver: self.solver.clone(),
            },
            ModelKind::GaSvr => ModelSpec::GaSvr(self.ga.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub row: ComparisonRow,
    /// Present when the fit succeeded.
    pub fit: Option<TwoStageFit>,
    /// Training-period fitted series, present when the fit succeeded.
    pub fitted: Option<FittedSeries>,
}

struct Split {
    cx: DesignMatrix,
    cy: Vec<f64>,
    lx: DesignMatrix,
    ly: Vec<f64>,
}

fn split_rows(x: &DesignMatrix, y: &[f64], train: usize) -> ((DesignMatrix, Vec<f64>), (DesignMatrix, Vec<f64>)) {
    let a: Vec<usize> = (0..train).collect();
    let b: Vec<usize> = (train..y.len()).collect();
    (
        (x.select_rows(&a), y[..train].to_vec()),
        (x.select_rows(&b), y[train..].to_vec()),
    )
}

fn run_one(kind: ModelKind, cfg: &CompareConfig, train: &Split, test: Option<&Split>, control: &WeeklySeries, summary: ControlSummary) -> ModelOutcome {
    let attempt = || -> Result<(ComparisonRow, TwoStageFit, FittedSeries)> {
        let spec = cfg.spec(kind);
        let fit = fit_matrices(&train.cx, &train.cy, &train.lx, &train.ly, &spec, summary)?;
        let eval = test.unwrap_or(train);
        let n_hat = fit.model.claims.predict_many(&eval.cx)?;
        let l_hat = fit.model.loss.predict_many(&eval.lx)?;
        let row = ComparisonRow {
            model: kind,
            rmse_claims: Some(rmse(&n_hat, &eval.cy)?),
            rmse_loss: Some(rmse(&l_hat, &eval.ly)?),
            peak_capture_claims: Some(peak_capture(&n_hat, &eval.cy)?),
            error: None,
        };
        let fitted = fitted_series(&fit.model, control)?;
        Ok((row, fit, fitted))
    };
    match attempt() {
        Ok((row, fit, fitted)) => ModelOutcome {
            row,
            fit: Some(fit),
            fitted: Some(fitted),
        },
        Err(e) => {
            log::warn!("{} fit failed: {e}", kind.name());
            ModelOutcome {
                row: ComparisonRow {
                    model: kind,
                    rmse_claims: None,
                    rmse_loss: None,
                    peak_capture_claims: None,
                    error: Some(e.to_string()),
                },
                fit: None,
                fitted: None,
            }
        }
    }
}

/// Fits ANN, SVR and GA-SVR in both stages on the same feature matrices and
/// returns their outcomes in that order. Input errors (missing targets, bad
/// holdout) fail the whole comparison; fit errors only flag the row.
pub fn compare_models_detailed(control: &WeeklySeries, cfg: &CompareConfig) -> Result<Vec<ModelOutcome>> {
    let (cx, cy) = build_claims_features(control)?;
    let (lx, ly) = build_loss_features(control, &cy)?;
    let summary = control_summary(control)?;
    let n = cy.len();
    let (train, test) = match cfg.holdout {
        None => (Split { cx, cy, lx, ly }, None),
        Some(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config(format!("holdout fraction must be in (0, 1), got {f}")));
            }
            let n_test = ((n as f64) * f).round() as usize;
            if n_test == 0 || n_test + 2 > n {
                return Err(Error::data(format!("holdout of {f} leaves no usable split of {n} weeks")));
            }
            let ((cx1, cy1), (cx2, cy2)) = split_rows(&cx, &cy, n - n_test);
            let ((lx1, ly1), (lx2, ly2)) = split_rows(&lx, &ly, n - n_test);
            (
                Split { cx: cx1, cy: cy1, lx: lx1, ly: ly1 },
                Some(Split { cx: cx2, cy: cy2, lx: lx2, ly: ly2 }),
            )
        }
    };
    let test = test.as_ref();
    let run = |k| run_one(k, cfg, &train, test, control, summary);
    let (ann, (svr, ga)) = par::join(
        cfg.parallel,
        || run(ModelKind::Ann),
        || par::join(cfg.parallel, || run(ModelKind::Svr), || run(ModelKind::GaSvr)),
    );
    Ok(vec![ann, svr, ga])
}

/// Comparison rows in the order ANN, SVR, GA-SVR.
pub fn compare_models(control: &WeeklySeries, cfg: &CompareConfig) -> Result<Vec<ComparisonRow>> {
    Ok(compare_models_detailed(control, cfg)?
        .into_iter()
        .map(|o| o.row)
        .collect())
}

/// Writes `model,rmse_claims,rmse_loss,peak_capture_claims`; failed models
/// have empty cells.
pub fn write_comparison_csv<W: Write>(sink: W, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record(["model", "rmse_claims", "rmse_loss", "peak_capture_claims"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.model.name().to_string(),
            cell(r.rmse_claims),
            cell(r.rmse_loss),
            cell(r.peak_capture_claims),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
