//! Synthetic control and scenario data.
//!
//! Daily precipitation follows a wet/dry occurrence process with gamma
//! amounts. Weekly claims are a known smooth function of the weekly features
//! plus Gaussian noise, and weekly loss is claims times a gamma severity.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::daily::{DailyRecord, CLAIMS_SCALE};
use super::weekly::{WeeklyRecord, WeeklySeries};
use crate::{Error, Result};

/// Weekly claims as a function of `(R_t, R_{t-1}, maxR_t)`:
/// `base + total·R_t + lag·R_{t-1} + peak·maxR²/(saturation + maxR)`.
///
/// Non-decreasing in every argument when the coefficients are non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimCurve {
    pub base: f64,
    pub total: f64,
    pub lag: f64,
    pub peak: f64,
    pub saturation: f64,
}

impl Default for ClaimCurve {
    fn default() -> Self {
        Self {
            base: 0.5,
            total: 0.08,
            lag: 0.03,
            peak: 0.25,
            saturation: 10.0,
        }
    }
}

impl ClaimCurve {
    pub fn eval(&self, total: f64, lag: f64, max_daily: f64) -> f64 {
        self.base
            + self.total * total
            + self.lag * lag
            + self.peak * max_daily * max_daily / (self.saturation + max_daily)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub weeks: usize,
    /// First day; must be a Monday.
    pub start: NaiveDate,
    /// Probability that a day has any precipitation.
    pub wet_prob: f64,
    /// Gamma shape of wet-day amounts.
    pub shape: f64,
    /// Gamma scale of wet-day amounts (mm).
    pub scale: f64,
    /// Multiplier applied to every daily amount.
    pub precip_factor: f64,
    pub curve: ClaimCurve,
    /// Mean loss per claim.
    pub severity_mean: f64,
    /// Coefficient of variation of the severity draw; 0 makes it constant.
    pub severity_cv: f64,
    /// Standard deviation of the additive claims noise.
    pub noise: f64,
    /// When false only precipitation is produced (scenario data).
    pub targets: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            weeks: 520,
            start: NaiveDate::from_isoywd_opt(2002, 1, Weekday::Mon).expect("valid ISO week"),
            wet_prob: 0.35,
            shape: 0.8,
            scale: 6.0,
            precip_factor: 1.0,
            curve: ClaimCurve::default(),
            severity_mean: 8_000.0,
            severity_cv: 0.5,
            noise: 0.5,
            targets: true,
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// Covers the ISO years `first..=last` exactly.
    pub fn for_iso_years(first: i32, last: i32) -> Result<Self> {
        let start = NaiveDate::from_isoywd_opt(first, 1, Weekday::Mon)
            .ok_or_else(|| Error::config(format!("invalid year {first}")))?;
        let end = NaiveDate::from_isoywd_opt(last + 1, 1, Weekday::Mon)
            .ok_or_else(|| Error::config(format!("invalid year {last}")))?;
        if end <= start {
            return Err(Error::config(format!("empty year range {first}..={last}")));
        }
        Ok(Self {
            start,
            weeks: ((end - start).num_days() / 7) as usize,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("synthetic data: {m}")));
        if self.weeks < 10 {
            return bad("weeks must be at least 10");
        }
        if self.start.weekday() != Weekday::Mon {
            return bad("start must be a Monday");
        }
        if !(self.wet_prob > 0.0 && self.wet_prob <= 1.0) {
            return bad("wet_prob must be in (0, 1]");
        }
        if !(self.shape > 0.0) || !(self.scale > 0.0) {
            return bad("shape and scale must be positive");
        }
        if !(self.precip_factor > 0.0) {
            return bad("precip_factor must be positive");
        }
        if !(self.severity_mean > 0.0) || !(self.severity_cv >= 0.0) || !(self.noise >= 0.0) {
            return bad("severity_mean must be positive, severity_cv and noise non-negative");
        }
        let c = &self.curve;
        if !(c.saturation > 0.0) || [c.base, c.total, c.lag, c.peak].iter().any(|v| !v.is_finite()) {
            return bad("claim curve needs finite coefficients and positive saturation");
        }
        Ok(())
    }
}

/// Daily records and the weekly series they aggregate to.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub daily: Vec<DailyRecord>,
    pub series: WeeklySeries,
}

const HOMES: f64 = CLAIMS_SCALE;
const PRICE_INDEX: f64 = 100.0;

struct Sampler {
    rng: ChaCha8Rng,
    /// Separate stream for noise and severity.
    aux: ChaCha8Rng,
    amount: Gamma<f64>,
    severity: Option<Gamma<f64>>,
    wet_prob: f64,
    factor: f64,
}

impl Sampler {
    fn day(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        let amount = self.amount.sample(&mut self.rng);
        if u < self.wet_prob {
            amount * self.factor
        } else {
            0.0
        }
    }

    fn week(&mut self) -> [f64; 7] {
        std::array::from_fn(|_| self.day())
    }
}

/// Generates a synthetic dataset. Deterministic in `config.seed`; the
/// precipitation stream does not depend on the noise or severity settings.
pub fn generate(config: &SynthConfig) -> Result<SyntheticData> {
    config.validate()?;
    let amount = Gamma::new(config.shape, config.scale)
        .map_err(|e| Error::config(format!("precipitation distribution: {e}")))?;
    let severity = if config.severity_cv > 0.0 {
        let k = 1.0 / (config.severity_cv * config.severity_cv);
        Some(
            Gamma::new(k, config.severity_mean / k)
                .map_err(|e| Error::config(format!("severity distribution: {e}")))?,
        )
    } else {
        None
    };
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        aux: {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(1);
            r
        },
        amount,
        severity,
        wet_prob: config.wet_prob,
        factor: config.precip_factor,
    };

    // Unobserved week before the start, supplying the first lag.
    let mut prev_total: f64 = s.week().iter().sum();
    let mut daily = Vec::with_capacity(config.weeks * 7);
    let mut weekly = Vec::with_capacity(config.weeks);
    for w in 0..config.weeks {
        let week_start = config.start + Duration::days(7 * w as i64);
        let precip = s.week();
        let total: f64 = precip.iter().sum();
        let max = precip.iter().copied().fold(0.0, f64::max);
        let z: f64 = StandardNormal.sample(&mut s.aux);
        let severity = match &s.severity {
            Some(g) => g.sample(&mut s.aux),
            None => config.severity_mean,
        };
        let claims = (config.curve.eval(total, prev_total, max) + config.noise * z).max(0.0);
        let loss = claims * severity;
        prev_total = total;

        for (d, &p) in precip.iter().enumerate() {
            let date = week_start + Duration::days(d as i64);
            let mut rec = DailyRecord::precipitation_only(date, p);
            if config.targets {
                let share = if total > 0.0 { p / total } else { 1.0 / 7.0 };
                rec.claims = Some(claims * share);
                rec.loss_nominal = Some(loss * share);
                rec.homes_insured = Some(HOMES);
                rec.price_index = Some(PRICE_INDEX);
            }
            daily.push(rec);
        }
        weekly.push(WeeklyRecord {
            week_start,
            total_precip: total,
            max_daily_precip: max,
            claims: config.targets.then_some(claims),
            loss: config.targets.then_some(loss),
        });
    }
    let label = if config.targets { "control" } else { "scenario" };
    Ok(SyntheticData {
        daily,
        series: WeeklySeries::new(label, weekly)?,
    })
}

/// Weekly series of [`generate`].
pub fn generate_synthetic(config: &SynthConfig) -> Result<WeeklySeries> {
    generate(config).map(|d| d.series)
}
