//! Two-stage claims → loss modelling and scenario projection.
//!
//! Stage one maps `(R_t, R_{t-1}, maxR_t)` to claims `N_t`; stage two maps
//! the same features plus claims to the aggregate loss `L_t`. Training uses
//! observed claims in stage two, projection feeds it the stage-one
//! predictions. Changes are reported per sub-period as the percentage
//! difference between summed projected and summed observed control values.

use std::io::Write;

use chrono::NaiveDate;

use crate::ann::{ann_train, AnnModel, AnnTrainConfig};
use crate::data::{build_claims_features, build_loss_features, claims_inputs, loss_inputs, WeeklySeries};
use crate::ga::{ga_run, GaConfig, GaResult};
use crate::serial::{check_header, TextReader, TextWriter};
use crate::svr::{fit_detailed, SolverConfig, SvrHyperparams, SvrModel};
use crate::{par, DesignMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Ann,
    Svr,
    GaSvr,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Ann => "ANN",
            ModelKind::Svr => "SVR",
            ModelKind::GaSvr => "GA-SVR",
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            ModelKind::Ann => "ann",
            ModelKind::Svr => "svr",
            ModelKind::GaSvr => "ga-svr",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "ann" => Some(ModelKind::Ann),
            "svr" => Some(ModelKind::Svr),
            "ga-svr" => Some(ModelKind::GaSvr),
            _ => None,
        }
    }
}

/// How each stage is fitted.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// SVR with hyperparameters tuned per stage by the GA.
    GaSvr(GaConfig),
    /// SVR with fixed hyperparameters.
    Svr { hyperparams: SvrHyperparams, solver: SolverConfig },
    /// One-hidden-layer network.
    Ann { hidden: usize, config: AnnTrainConfig },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::GaSvr(_) => ModelKind::GaSvr,
            ModelSpec::Svr { .. } => ModelKind::Svr,
            ModelSpec::Ann { .. } => ModelKind::Ann,
        }
    }

    /// Fixed-hyperparameter SVR with the defaults `C = 1, σ² = 1, ε = 0.1`.
    pub fn default_svr() -> Self {
        ModelSpec::Svr {
            hyperparams: SvrHyperparams::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageModel {
    Svr(SvrModel),
    Ann(AnnModel),
}

impl StageModel {
    pub fn input_dim(&self) -> usize {
        match self {
            StageModel::Svr(m) => m.dim(),
            StageModel::Ann(m) => m.input_dim(),
        }
    }

    pub fn predict_many(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        match self {
            StageModel::Svr(m) => m.predict_many(x),
            StageModel::Ann(m) => m.predict_many(x),
        }
    }

    pub fn as_svr(&self) -> Option<&SvrModel> {
        match self {
            StageModel::Svr(m) => Some(m),
            StageModel::Ann(_) => None,
        }
    }

    fn write(&self, w: &mut TextWriter) {
        match self {
            StageModel::Svr(m) => m.write(w),
            StageModel::Ann(m) => m.write(w),
        }
    }

    fn read(r: &mut TextReader<'_>) -> Result<Self> {
        match r.peek_key() {
            Some("climrisk-svr") => SvrModel::read(r).map(StageModel::Svr),
            Some("climrisk-ann") => AnnModel::read(r).map(StageModel::Ann),
            other => Err(Error::ModelFormat(format!("unknown stage model {other:?}"))),
        }
    }
}

/// Observed control-period totals used as the denominator of every change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSummary {
    pub claims_sum: f64,
    pub loss_sum: f64,
    /// Modelled weeks (all but the first, which has no lag).
    pub weeks: usize,
    pub first_year: i32,
    pub last_year: i32,
}

impl ControlSummary {
    pub fn years(&self) -> usize {
        (self.last_year - self.first_year + 1) as usize
    }
}

/// Fitting provenance: fitness evaluations spent per stage (zero unless
/// tuned by the GA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub kind: ModelKind,
    pub claims_evaluations: usize,
    pub loss_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageModel {
    pub claims: StageModel,
    pub loss: StageModel,
    pub provenance: Provenance,
    pub control: ControlSummary,
}

/// A fitted model together with the GA runs that tuned it.
#[derive(Debug, Clone)]
pub struct TwoStageFit {
    pub model: TwoStageModel,
    pub claims_ga: Option<GaResult>,
    pub loss_ga: Option<GaResult>,
}

fn fit_stage(x: &DesignMatrix, y: &[f64], spec: &ModelSpec) -> Result<(StageModel, Option<GaResult>)> {
    match spec {
        ModelSpec::GaSvr(cfg) => {
            let ga = ga_run(x, y, cfg)?;
            let model = fit_detailed(x, y, &ga.best, &cfg.solver)?.model;
            Ok((StageModel::Svr(model), Some(ga)))
        }
        ModelSpec::Svr { hyperparams, solver } => {
            let model = fit_detailed(x, y, hyperparams, solver)?.model;
            Ok((StageModel::Svr(model), None))
        }
        ModelSpec::Ann { hidden, config } => {
            let fit = ann_train(x, y, *hidden, config)?;
            Ok((StageModel::Ann(fit.model), None))
        }
    }
}

/// Summary of the modelled control weeks.
pub fn control_summary(control: &WeeklySeries) -> Result<ControlSummary> {
    let (_, claims) = build_claims_features(control)?;
    let (_, loss) = build_loss_features(control, &claims)?;
    let recs = &control.records()[1..];
    Ok(ControlSummary {
        claims_sum: claims.iter().sum(),
        loss_sum: loss.iter().sum(),
        weeks: recs.len(),
        first_year: recs[0].iso_year(),
        last_year: recs[recs.len() - 1].iso_year(),
    })
}

pub(crate) fn fit_matrices(
    claims_x: &DesignMatrix,
    claims_y: &[f64],
    loss_x: &DesignMatrix,
    loss_y: &[f64],
    spec: &ModelSpec,
    control: ControlSummary,
) -> Result<TwoStageFit> {
    let (claims, claims_ga) = fit_stage(claims_x, claims_y, spec)?;
    let (loss, loss_ga) = fit_stage(loss_x, loss_y, spec)?;
    let provenance = Provenance {
        kind: spec.kind(),
        claims_evaluations: claims_ga.as_ref().map_or(0, |g| g.evaluations),
        loss_evaluations: loss_ga.as_ref().map_or(0, |g| g.evaluations),
    };
    Ok(TwoStageFit {
        model: TwoStageModel {
            claims,
            loss,
            provenance,
            control,
        },
        claims_ga,
        loss_ga,
    })
}

/// Fits both stages on a control series carrying claims and losses.
pub fn fit_two_stage(control: &WeeklySeries, spec: &ModelSpec) -> Result<TwoStageFit> {
    let (cx, cy) = build_claims_features(control)?;
    let (lx, ly) = build_loss_features(control, &cy)?;
    let summary = control_summary(control)?;
    fit_matrices(&cx, &cy, &lx, &ly, spec, summary)
}

/// Weekly projected claims and losses, aligned with `weeks`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weeks: Vec<NaiveDate>,
    pub claims: Vec<f64>,
    pub loss: Vec<f64>,
}

/// Projects a precipitation series through both stages. Negative predictions
/// are clamped to zero, and the clamped claims feed stage two.
pub fn project(model: &TwoStageModel, scenario: &WeeklySeries) -> Result<Projection> {
    let x = claims_inputs(scenario)?;
    let claims: Vec<f64> = model
        .claims
        .predict_many(&x)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let lx = loss_inputs(scenario, &claims)?;
    let loss = model
        .loss
        .predict_many(&lx)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    Ok(Projection {
        weeks: scenario.records()[1..].iter().map(|r| r.week_start).collect(),
        claims,
        loss,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubPeriod {
    pub start_year: i32,
    pub end_year: i32,
}

impl SubPeriod {
    pub fn label(&self) -> String {
        format!("{}-{}", self.start_year, self.end_year)
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start_year..=self.end_year).contains(&year)
    }
}

/// Splits `first_year..=last_year` into consecutive blocks of
/// `length_years`.
pub fn split_subperiods(first_year: i32, last_year: i32, length_years: usize) -> Result<Vec<SubPeriod>> {
    if length_years == 0 {
        return Err(Error::config("sub-period length must be positive"));
    }
    if last_year < first_year {
        return Err(Error::data(format!("empty year range {first_year}-{last_year}")));
    }
    let span = (last_year - first_year + 1) as usize;
    if span % length_years != 0 {
        return Err(Error::data(format!(
            "span not divisible: {span} years ({first_year}-{last_year}) into {length_years}-year sub-periods"
        )));
    }
    let len = length_years as i32;
    Ok((0..(span / length_years) as i32)
        .map(|k| SubPeriod {
            start_year: first_year + k * len,
            end_year: first_year + (k + 1) * len - 1,
        })
        .collect())
}

/// Percentage change of a scenario total relative to the control total.
pub fn delta(scenario_sum: f64, control_sum: f64) -> Result<f64> {
    if !(control_sum > 0.0) {
        return Err(Error::data(format!("control total must be positive, got {control_sum}")));
    }
    Ok((scenario_sum / control_sum - 1.0) * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodChange {
    pub period: SubPeriod,
    pub delta_claims_pct: f64,
    pub delta_loss_pct: f64,
    pub weeks_scenario: usize,
    pub weeks_control: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub scenario: String,
    pub periods: Vec<PeriodChange>,
    pub projection: Projection,
}

fn report_one(model: &TwoStageModel, scenario: &WeeklySeries) -> Result<ProjectionResult> {
    let projection = project(model, scenario)?;
    let year = |d: &NaiveDate| d.iso_week().year();
    let (first, last) = match (projection.weeks.first(), projection.weeks.last()) {
        (Some(a), Some(b)) => (year(a), year(b)),
        _ => return Err(Error::data(format!("scenario `{}` is empty", scenario.label()))),
    };
    let ctl = &model.control;
    let periods = split_subperiods(first, last, ctl.years())?
        .into_iter()
        .map(|period| {
            let (mut n, mut l, mut weeks) = (0.0, 0.0, 0usize);
            for (k, d) in projection.weeks.iter().enumerate() {
                if period.contains(year(d)) {
                    n += projection.claims[k];
                    l += projection.loss[k];
                    weeks += 1;
                }
            }
            if weeks.abs_diff(ctl.weeks) > 1 {
                log::warn!(
                    "scenario `{}` period {} has {weeks} weeks, control has {}",
                    scenario.label(),
                    period.label(),
                    ctl.weeks
                );
            }
            Ok(PeriodChange {
                delta_claims_pct: delta(n, ctl.claims_sum)?,
                delta_loss_pct: delta(l, ctl.loss_sum)?,
                weeks_scenario: weeks,
                weeks_control: ctl.weeks,
                period,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionResult {
        scenario: scenario.label().to_string(),
        periods,
        projection,
    })
}

use chrono::Datelike;

/// Per-scenario, per-sub-period changes, in scenario order.
pub fn project_report(model: &TwoStageModel, scenarios: &[WeeklySeries], parallel: bool) -> Result<Vec<ProjectionResult>> {
    par::map(scenarios, parallel, |s| report_one(model, s))
        .into_iter()
        .collect()
}

/// Writes `scenario,subperiod,delta_claims_pct,delta_loss_pct,weeks_scn,weeks_ctr`.
pub fn write_report_csv<W: Write>(sink: W, results: &[ProjectionResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["scenario", "subperiod", "delta_claims_pct", "delta_loss_pct", "weeks_scn", "weeks_ctr"])
        .map_err(io)?;
    for r in results {
        for p in &r.periods {
            w.write_record([
                r.scenario.clone(),
                p.period.label(),
                p.delta_claims_pct.to_string(),
                p.delta_loss_pct.to_string(),
                p.weeks_scenario.to_string(),
                p.weeks_control.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `week_start,N_hat,L_hat`.
pub fn write_projection_csv<W: Write>(sink: W, p: &Projection) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["week_start", "N_hat", "L_hat"]).map_err(io)?;
    for k in 0..p.weeks.len() {
        w.write_record([
            p.weeks[k].format("%Y-%m-%d").to_string(),
            p.claims[k].to_string(),
            p.loss[k].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

const HEADER: &str = "climrisk-model";
pub const MODEL_VERSION: &str = "1";

impl TwoStageModel {
    pub fn to_text(&self) -> String {
        let mut w = TextWriter::new();
        let c = &self.control;
        let p = &self.provenance;
        w.value(HEADER, MODEL_VERSION)
            .line("kind", [p.kind.tag()])
            .line("evaluations", [p.claims_evaluations, p.loss_evaluations])
            .line("control_sums", [c.claims_sum, c.loss_sum])
            .line("control_weeks", [c.weeks])
            .line("control_years", [c.first_year, c.last_year])
            .line("stage", ["claims"]);
        self.claims.write(&mut w);
        w.line("stage", ["loss"]);
        self.loss.write(&mut w);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        check_header(&mut r, HEADER, MODEL_VERSION)?;
        let kind = match r.expect("kind")?.as_slice() {
            [k] => ModelKind::from_tag(k).ok_or_else(|| Error::ModelFormat(format!("unknown kind `{k}`")))?,
            _ => return Err(Error::ModelFormat("bad `kind`".into())),
        };
        let evals: Vec<usize> = r.parse_all("evaluations")?;
        let sums: Vec<f64> = r.parse_all("control_sums")?;
        let weeks: usize = r.parse_one("control_weeks")?;
        let years: Vec<i32> = r.parse_all("control_years")?;
        let ([ce, le], [cs, ls], [fy, ly]) = (evals.as_slice(), sums.as_slice(), years.as_slice()) else {
            return Err(Error::ModelFormat("bad control summary".into()));
        };
        if r.expect("stage")? != ["claims"] {
            return Err(Error::ModelFormat("expected claims stage".into()));
        }
        let claims = StageModel::read(&mut r)?;
        if r.expect("stage")? != ["loss"] {
            return Err(Error::ModelFormat("expected loss stage".into()));
        }
        let loss = StageModel::read(&mut r)?;
        if loss.input_dim() != claims.input_dim() + 1 {
            return Err(Error::ModelFormat("loss stage must take one more input than claims stage".into()));
        }
        Ok(Self {
            claims,
            loss,
            provenance: Provenance {
                kind,
                claims_evaluations: *ce,
                loss_evaluations: *le,
            },
            control: ControlSummary {
                claims_sum: *cs,
                loss_sum: *ls,
                weeks,
                first_year: *fy,
                last_year: *ly,
            },
        })
    }
}
