use std::fmt::Write as _;
use std::fs::File;
use std::path::PathBuf;

use climrisk::data::{
    aggregate_weekly, build_claims_features, build_loss_features, parse_daily_csv, synth, write_daily_csv,
    write_weekly_csv, AggregateOptions, WeeklySeries,
};
use climrisk::ga::write_history_csv;
use climrisk::metrics::{compare_models_detailed, fitted_series, rmse, write_comparison_csv, write_fitted_csv};
use climrisk::pipeline::{
    fit_two_stage, project_report, write_projection_csv, write_report_csv, StageModel, TwoStageModel,
};
use climrisk::{Error, Result};

use crate::config::RunConfig;

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_MODEL_VERSION: i32 = 4;

/// A failed command: the message for standard error and the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_CONFIG,
            Error::NonConvergence { .. } | Error::Divergence { .. } => EXIT_FIT,
            Error::ModelVersion { .. } => EXIT_MODEL_VERSION,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<Vec<PathBuf>, Failure>;
use crate::output::{file_stem, Outputs};
use crate::plot;

/// Reads a daily CSV and aggregates it to weeks.
fn load_weekly(cfg: &RunConfig, path: &PathBuf, label: &str) -> Result<WeeklySeries> {
    let path = cfg.resolve(path);
    let file = File::open(&path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let daily = parse_daily_csv(file, &cfg.columns.to_map())
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let opts = AggregateOptions {
        price_index_base: cfg.ingest.price_index_base,
    };
    aggregate_weekly(&daily, &opts, label).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_control(cfg: &RunConfig) -> Result<WeeklySeries> {
    let path = cfg
        .input
        .control
        .as_ref()
        .ok_or_else(|| Error::Config("input.control is not set".into()))?;
    let series = load_weekly(cfg, path, "control")?;
    if !series.has_claims() {
        return Err(Error::Data(format!(
            "control data has no claims (column `{}`)",
            cfg.columns.claims
        )));
    }
    if !series.has_loss() {
        return Err(Error::Data(format!("control data has no losses (column `{}`)", cfg.columns.loss)));
    }
    Ok(series)
}

pub fn synth(cfg: &RunConfig) -> Outcome {
    let seed = cfg.seed.unwrap_or(1);
    let mut out = Outputs::default();
    let control = synth::generate(&cfg.synth.control(seed)?)?;
    out.render("control_daily.csv", |w| write_daily_csv(w, &control.daily))?;
    out.render("control_weekly.csv", |w| write_weekly_csv(w, &control.series))?;
    for (k, sc) in cfg.synth.scenario.iter().enumerate() {
        let data = synth::generate(&cfg.synth.scenario(k, seed)?)?;
        out.render(format!("{}_daily.csv", file_stem(&sc.label)), |w| write_daily_csv(w, &data.daily))?;
    }
    Ok(out.commit(&cfg.out_dir())?)
}

fn describe_stage(report: &mut String, name: &str, m: &StageModel) {
    match m {
        StageModel::Svr(svr) => {
            let hp = svr.hyperparams();
            let _ = writeln!(
                report,
                "{name}: SVR C = {}, sigma2 = {}, epsilon = {}, support vectors = {}",
                hp.c,
                hp.sigma2().map_or("linear".to_string(), |s| s.to_string()),
                hp.epsilon,
                svr.theta().len()
            );
        }
        StageModel::Ann(ann) => {
            let _ = writeln!(report, "{name}: ANN with {} hidden units", ann.hidden());
        }
    }
}

pub fn fit(cfg: &RunConfig) -> Outcome {
    let seed = cfg.require_seed()?;
    let spec = cfg.model_spec(seed)?;
    let control = load_control(cfg)?;
    let fit = fit_two_stage(&control, &spec)?;
    let model = &fit.model;

    let (cx, cy) = build_claims_features(&control)?;
    let (lx, ly) = build_loss_features(&control, &cy)?;
    let rmse_claims = rmse(&model.claims.predict_many(&cx)?, &cy)?;
    let rmse_loss = rmse(&model.loss.predict_many(&lx)?, &ly)?;

    let mut out = Outputs::default();
    out.add("model.txt", model.to_text().into_bytes());
    out.render("control_weekly.csv", |w| write_weekly_csv(w, &control))?;
    let fitted = fitted_series(model, &control)?;
    out.render("fitted.csv", |w| write_fitted_csv(w, &fitted))?;

    let mut report = String::new();
    let _ = writeln!(report, "model: {}", model.provenance.kind.name());
    let _ = writeln!(report, "seed: {seed}");
    let c = &model.control;
    let _ = writeln!(report, "control weeks: {} ({}-{})", c.weeks, c.first_year, c.last_year);
    describe_stage(&mut report, "claims stage", &model.claims);
    describe_stage(&mut report, "loss stage", &model.loss);
    let _ = writeln!(report, "training RMSE claims: {rmse_claims}");
    let _ = writeln!(report, "training RMSE loss: {rmse_loss}");
    for (stage, ga) in [("claims", &fit.claims_ga), ("loss", &fit.loss_ga)] {
        if let Some(ga) = ga {
            let name = format!("ga_history_{stage}.csv");
            out.render(name.clone(), |w| write_history_csv(w, &ga.history))?;
            let _ = writeln!(
                report,
                "GA {stage}: best fitness {} after {} evaluations, history in {name}",
                ga.best_fitness, ga.evaluations
            );
        }
    }
    out.add("fit_report.txt", report.into_bytes());
    Ok(out.commit(&cfg.out_dir())?)
}

pub fn compare(cfg: &RunConfig) -> Outcome {
    let seed = cfg.require_seed()?;
    let ccfg = cfg.compare_config(seed)?;
    let control = load_control(cfg)?;
    let outcomes = compare_models_detailed(&control, &ccfg)?;
    let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
    for r in rows.iter().filter(|r| r.failed()) {
        eprintln!("warning: {} failed: {}", r.model.name(), r.error.as_deref().unwrap_or(""));
    }
    if rows.iter().all(|r| r.failed()) {
        return Err(Failure {
            code: EXIT_FIT,
            message: "every model failed to fit".into(),
        });
    }
    let mut out = Outputs::default();
    out.render("comparison.csv", |w| write_comparison_csv(w, &rows))?;
    let mut lines = Vec::new();
    for o in &outcomes {
        if let Some(f) = &o.fitted {
            let name = format!("fitted_{}.csv", file_stem(&o.row.model.name().to_ascii_lowercase()));
            out.render(name, |w| write_fitted_csv(w, f))?;
            lines.push((o.row.model, f));
        }
    }
    if cfg.plots {
        out.add("fitted_claims.svg", plot::fitted_lines(&lines).into_bytes());
    }
    Ok(out.commit(&cfg.out_dir())?)
}

pub fn project(cfg: &RunConfig) -> Outcome {
    let path = match &cfg.model.path {
        Some(p) => cfg.resolve(p),
        None => cfg.out_dir().join("model.txt"),
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("cannot read model {}: {e}", path.display())))?;
    let model = TwoStageModel::from_text(&text)?;
    if cfg.input.scenario.is_empty() {
        return Err(Error::Config("no [[input.scenario]] entries".into()).into());
    }
    let scenarios = cfg
        .input
        .scenario
        .iter()
        .map(|s| load_weekly(cfg, &s.path, &s.label))
        .collect::<Result<Vec<_>>>()?;
    let results = project_report(&model, &scenarios, cfg.ga.parallel)?;
    let mut out = Outputs::default();
    out.render("projection.csv", |w| write_report_csv(w, &results))?;
    for r in &results {
        out.render(format!("projected_{}.csv", file_stem(&r.scenario)), |w| {
            write_projection_csv(w, &r.projection)
        })?;
    }
    if cfg.plots {
        out.add("projection.svg", plot::delta_bars(&results).into_bytes());
    }
    Ok(out.commit(&cfg.out_dir())?)
}
