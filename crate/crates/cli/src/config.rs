//! Run configuration: a TOML file plus `--section.key value` overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use climrisk::ann::AnnTrainConfig;
use climrisk::data::{AggregateOptions, ColumnMap, SynthConfig};
use climrisk::ga::{Bounds, FitnessMode, GaConfig};
use climrisk::kernel::KernelSpec;
use climrisk::metrics::CompareConfig;
use climrisk::pipeline::ModelSpec;
use climrisk::svr::{SolverConfig, SvrHyperparams};
use climrisk::{Error, Result};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub plots: bool,
    pub input: InputConfig,
    pub columns: ColumnsConfig,
    pub ingest: IngestConfig,
    pub model: ModelConfig,
    pub svr: SvrConfig,
    pub ga: GaSection,
    pub ann: AnnSection,
    pub compare: CompareSection,
    pub synth: SynthSection,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub control: Option<PathBuf>,
    pub scenario: Vec<ScenarioInput>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioInput {
    pub label: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnsConfig {
    pub date: String,
    pub precipitation: String,
    pub claims: String,
    pub loss: String,
    pub homes_insured: String,
    pub price_index: String,
}

impl Default for ColumnsConfig {
    fn default() -> Self {
        let m = ColumnMap::default();
        Self {
            date: m.date,
            precipitation: m.precipitation,
            claims: m.claims,
            loss: m.loss,
            homes_insured: m.homes_insured,
            price_index: m.price_index,
        }
    }
}

impl ColumnsConfig {
    pub fn to_map(&self) -> ColumnMap {
        ColumnMap {
            date: self.date.clone(),
            precipitation: self.precipitation.clone(),
            claims: self.claims.clone(),
            loss: self.loss.clone(),
            homes_insured: self.homes_insured.clone(),
            price_index: self.price_index.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub price_index_base: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            price_index_base: AggregateOptions::default().price_index_base,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `ga-svr`, `svr` or `ann`.
    pub kind: String,
    /// Model file read by `project`; defaults to `model.txt` in the output
    /// directory.
    pub path: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: "ga-svr".into(),
            path: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrConfig {
    /// `rbf` or `linear`.
    pub kernel: String,
    pub c: f64,
    pub sigma2: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub shrinking: bool,
}

impl Default for SvrConfig {
    fn default() -> Self {
        let hp = SvrHyperparams::default();
        let s = SolverConfig::default();
        Self {
            kernel: "rbf".into(),
            c: hp.c,
            sigma2: hp.sigma2().unwrap_or(1.0),
            epsilon: hp.epsilon,
            tol: s.tol,
            max_iter: s.max_iter,
            shrinking: s.shrinking,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub blend_alpha: f64,
    pub mutation_prob: f64,
    pub mutation_scale: f64,
    pub elite_count: usize,
    /// `training` or `kfold`.
    pub fitness: String,
    pub folds: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub parallel: bool,
}

impl Default for GaSection {
    fn default() -> Self {
        let g = GaConfig::default();
        Self {
            population_size: g.population_size,
            generations: g.generations,
            tournament_size: g.tournament_size,
            crossover_prob: g.crossover_prob,
            blend_alpha: g.blend_alpha,
            mutation_prob: g.mutation_prob,
            mutation_scale: g.mutation_scale,
            elite_count: g.elite_count,
            fitness: "training".into(),
            folds: 5,
            c_min: 1e-3,
            c_max: 1e3,
            sigma2_min: 1e-3,
            sigma2_max: 16.0,
            epsilon_min: 1e-2,
            epsilon_max: 8.0,
            parallel: g.parallel,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnSection {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub batch_size: Option<usize>,
}

impl Default for AnnSection {
    fn default() -> Self {
        let a = AnnTrainConfig::default();
        Self {
            hidden: 2,
            learning_rate: a.learning_rate,
            epochs: a.epochs,
            init_scale: a.init_scale,
            batch_size: a.batch_size,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Fraction of trailing weeks held out; training RMSE when absent.
    pub holdout: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub weeks: usize,
    /// When both are set they replace `weeks` and start the series at the
    /// first ISO week of `first_year`.
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub wet_prob: f64,
    pub shape: f64,
    pub scale: f64,
    pub precip_factor: f64,
    pub severity_mean: f64,
    pub severity_cv: f64,
    pub noise: f64,
    pub base: f64,
    pub total: f64,
    pub lag: f64,
    pub peak: f64,
    pub saturation: f64,
    pub scenario: Vec<SynthScenario>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthScenario {
    pub label: String,
    pub first_year: i32,
    pub last_year: i32,
    #[serde(default = "one")]
    pub precip_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            weeks: s.weeks,
            first_year: None,
            last_year: None,
            wet_prob: s.wet_prob,
            shape: s.shape,
            scale: s.scale,
            precip_factor: s.precip_factor,
            severity_mean: s.severity_mean,
            severity_cv: s.severity_cv,
            noise: s.noise,
            base: s.curve.base,
            total: s.curve.total,
            lag: s.curve.lag,
            peak: s.curve.peak,
            saturation: s.curve.saturation,
            scenario: Vec::new(),
        }
    }
}

impl SynthSection {
    /// Generator settings for the control series.
    pub fn control(&self, seed: u64) -> Result<SynthConfig> {
        let mut cfg = match (self.first_year, self.last_year) {
            (Some(a), Some(b)) => SynthConfig::for_iso_years(a, b)?,
            (None, None) => SynthConfig {
                weeks: self.weeks,
                ..SynthConfig::default()
            },
            _ => return Err(Error::Config("synth.first_year and synth.last_year go together".into())),
        };
        cfg.wet_prob = self.wet_prob;
        cfg.shape = self.shape;
        cfg.scale = self.scale;
        cfg.precip_factor = self.precip_factor;
        cfg.severity_mean = self.severity_mean;
        cfg.severity_cv = self.severity_cv;
        cfg.noise = self.noise;
        cfg.curve.base = self.base;
        cfg.curve.total = self.total;
        cfg.curve.lag = self.lag;
        cfg.curve.peak = self.peak;
        cfg.curve.saturation = self.saturation;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Precipitation-only settings for scenario `k`, seeded after the control.
    pub fn scenario(&self, k: usize, seed: u64) -> Result<SynthConfig> {
        let sc = &self.scenario[k];
        let span = SynthConfig::for_iso_years(sc.first_year, sc.last_year)?;
        let base = self.control(seed)?;
        let cfg = SynthConfig {
            start: span.start,
            weeks: span.weeks,
            precip_factor: self.precip_factor * sc.precip_factor,
            targets: false,
            seed: seed.wrapping_add(k as u64 + 1),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides and resolves the base
    /// directory for relative paths.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        apply_overrides(&mut table, overrides)?;
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.base_dir = path
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (`--seed` or `seed` in the config)".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.out {
            Some(p) => self.resolve(p),
            None => PathBuf::from("out"),
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.svr.tol,
            max_iter: self.svr.max_iter,
            shrinking: self.svr.shrinking,
            record_trace: false,
        }
    }

    pub fn svr_hyperparams(&self) -> Result<SvrHyperparams> {
        let kernel = match self.svr.kernel.as_str() {
            "rbf" => KernelSpec::rbf(self.svr.sigma2)?,
            "linear" => KernelSpec::Linear,
            k => return Err(Error::Config(format!("svr.kernel: unknown kernel `{k}`"))),
        };
        let hp = SvrHyperparams {
            c: self.svr.c,
            epsilon: self.svr.epsilon,
            kernel,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn ga_config(&self, seed: u64) -> Result<GaConfig> {
        let g = &self.ga;
        let fitness = match g.fitness.as_str() {
            "training" => FitnessMode::Training,
            "kfold" => FitnessMode::KFold { folds: g.folds },
            f => return Err(Error::Config(format!("ga.fitness: unknown mode `{f}`"))),
        };
        let l = |v: f64, name: &str| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v.log10())
            } else {
                Err(Error::Config(format!("ga.{name} must be positive")))
            }
        };
        let bounds = Bounds {
            lo: [l(g.c_min, "c_min")?, l(g.sigma2_min, "sigma2_min")?, l(g.epsilon_min, "epsilon_min")?],
            hi: [l(g.c_max, "c_max")?, l(g.sigma2_max, "sigma2_max")?, l(g.epsilon_max, "epsilon_max")?],
        };
        let cfg = GaConfig {
            population_size: g.population_size,
            generations: g.generations,
            bounds,
            tournament_size: g.tournament_size,
            crossover_prob: g.crossover_prob,
            blend_alpha: g.blend_alpha,
            mutation_prob: g.mutation_prob,
            mutation_scale: g.mutation_scale,
            elite_count: g.elite_count,
            seed,
            fitness,
            solver: self.solver(),
            parallel: g.parallel,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ann_config(&self, seed: u64) -> Result<AnnTrainConfig> {
        let cfg = AnnTrainConfig {
            learning_rate: self.ann.learning_rate,
            epochs: self.ann.epochs,
            seed,
            init_scale: self.ann.init_scale,
            batch_size: self.ann.batch_size,
        };
        cfg.validate()?;
        if self.ann.hidden == 0 {
            return Err(Error::Config("ann.hidden must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn model_spec(&self, seed: u64) -> Result<ModelSpec> {
        match self.model.kind.as_str() {
            "ga-svr" => Ok(ModelSpec::GaSvr(self.ga_config(seed)?)),
            "svr" => Ok(ModelSpec::Svr {
                hyperparams: self.svr_hyperparams()?,
                solver: self.solver(),
            }),
            "ann" => Ok(ModelSpec::Ann {
                hidden: self.ann.hidden,
                config: self.ann_config(seed)?,
            }),
            k => Err(Error::Config(format!("model.kind: unknown kind `{k}` (ga-svr, svr or ann)"))),
        }
    }

    pub fn compare_config(&self, seed: u64) -> Result<CompareConfig> {
        Ok(CompareConfig {
            ann_hidden: self.ann.hidden,
            ann: self.ann_config(seed)?,
            svr: self.svr_hyperparams()?,
            solver: self.solver(),
            ga: self.ga_config(seed)?,
            holdout: self.compare.holdout,
            parallel: self.ga.parallel,
        })
    }
}

/// Applies `--a.b value` / `--a.b=value` pairs. Values are read as TOML
/// literals, falling back to plain strings.
pub fn apply_overrides(table: &mut toml::Table, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(Error::Config(format!("unexpected argument `{arg}`")));
        };
        let (key, raw) = match flag.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("`--{flag}` needs a value")))?;
                (flag, v.clone())
            }
        };
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw));
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("bad override key `{key}`")));
        }
        let mut cur = &mut *table;
        for part in &parts[..parts.len() - 1] {
            let entry = cur
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a section")))?;
        }
        cur.insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(())
}
