//! Real-coded genetic algorithm over `(log10 C, log10 σ², log10 ε)`.
//!
//! Each generation evaluates every member, records statistics, then builds
//! the next population from the elites plus tournament-selected parents
//! recombined by blend crossover and perturbed by Gaussian mutation. The
//! default SVR hyperparameters are member 0 of the initial population, so
//! with elitism the result is never worse than the untuned model.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::kernel::KernelSpec;
use crate::metrics::rmse;
use crate::svr::{fit_detailed, SolverConfig, SvrHyperparams};
use crate::{par, DesignMatrix, Error, Result};

pub const GENES: usize = 3;

/// Closed search box in log10 units, gene order `(C, σ², ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: [f64; GENES],
    pub hi: [f64; GENES],
}

impl Default for Bounds {
    /// `C ∈ [1e-3, 1e3]`, `σ² ∈ [1e-3, 2⁴]`, `ε ∈ [1e-2, 2³]`.
    fn default() -> Self {
        Self {
            lo: [-3.0, -3.0, -2.0],
            hi: [3.0, 16f64.log10(), 8f64.log10()],
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        for g in 0..GENES {
            if !(self.lo[g] < self.hi[g]) || !self.lo[g].is_finite() || !self.hi[g].is_finite() {
                return Err(Error::config(format!(
                    "gene {g}: lower bound {} must be below upper bound {}",
                    self.lo[g], self.hi[g]
                )));
            }
        }
        Ok(())
    }

    fn clip(&self, genes: &mut [f64; GENES]) {
        for g in 0..GENES {
            genes[g] = genes[g].clamp(self.lo[g], self.hi[g]);
        }
    }

    pub fn contains(&self, c: &Chromosome) -> bool {
        (0..GENES).all(|g| c.genes[g] >= self.lo[g] && c.genes[g] <= self.hi[g])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chromosome {
    pub genes: [f64; GENES],
}

impl Chromosome {
    pub fn from_hyperparams(hp: &SvrHyperparams) -> Self {
        let sigma2 = hp.sigma2().unwrap_or(1.0);
        Self {
            genes: [hp.c.log10(), sigma2.log10(), hp.epsilon.log10()],
        }
    }

    /// RBF hyperparameters encoded by the genes.
    pub fn decode(&self) -> SvrHyperparams {
        SvrHyperparams {
            c: 10f64.powf(self.genes[0]),
            epsilon: 10f64.powf(self.genes[2]),
            kernel: KernelSpec::Rbf {
                sigma2: 10f64.powf(self.genes[1]),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitnessMode {
    /// RMSE of the fitted model on its own training data.
    Training,
    /// RMSE over held-out predictions from contiguous folds.
    KFold { folds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    /// Fixed number of generations; there is no early stop.
    pub generations: usize,
    pub bounds: Bounds,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    /// Blend-crossover extension factor.
    pub blend_alpha: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    /// Standard deviation of mutation, in log10 units.
    pub mutation_scale: f64,
    pub elite_count: usize,
    pub seed: u64,
    pub fitness: FitnessMode,
    pub solver: SolverConfig,
    /// Evaluate members concurrently (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 100,
            bounds: Bounds::default(),
            tournament_size: 3,
            crossover_prob: 0.8,
            blend_alpha: 0.5,
            mutation_prob: 0.1,
            mutation_scale: 0.15,
            elite_count: 1,
            seed: 0,
            fitness: FitnessMode::Training,
            solver: SolverConfig::default(),
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        let bad = |m: String| Err(Error::config(m));
        if self.population_size < 2 {
            return bad(format!("population_size must be at least 2, got {}", self.population_size));
        }
        if self.generations < 1 {
            return bad("generations must be at least 1".into());
        }
        if self.elite_count < 1 || self.elite_count > self.population_size {
            return bad(format!(
                "elite_count must be in 1..={}, got {}",
                self.population_size, self.elite_count
            ));
        }
        if self.tournament_size < 1 {
            return bad("tournament_size must be at least 1".into());
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.mutation_scale >= 0.0) || !(self.blend_alpha >= 0.0) {
            return bad("mutation_scale and blend_alpha must be non-negative".into());
        }
        if let FitnessMode::KFold { folds } = self.fitness {
            if folds < 2 {
                return bad(format!("k-fold fitness needs at least 2 folds, got {folds}"));
            }
        }
        Ok(())
    }
}

/// One line of the progress log.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    /// Mean over members with finite fitness.
    pub mean_fitness: f64,
    pub best: SvrHyperparams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: SvrHyperparams,
    pub best_chromosome: Chromosome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

/// Uniform population in log space with the default hyperparameters as
/// member 0.
pub fn init_population<R: Rng>(config: &GaConfig, rng: &mut R) -> Result<Vec<Chromosome>> {
    config.validate()?;
    let b = &config.bounds;
    let mut pop = Vec::with_capacity(config.population_size);
    let mut seeded = Chromosome::from_hyperparams(&SvrHyperparams::default());
    b.clip(&mut seeded.genes);
    pop.push(seeded);
    while pop.len() < config.population_size {
        let genes = std::array::from_fn(|g| rng.random_range(b.lo[g]..=b.hi[g]));
        pop.push(Chromosome { genes });
    }
    Ok(pop)
}

fn fit_rmse(
    x: &DesignMatrix,
    y: &[f64],
    hp: &SvrHyperparams,
    solver: &SolverConfig,
    mode: FitnessMode,
) -> Result<f64> {
    match mode {
        FitnessMode::Training => {
            let model = fit_detailed(x, y, hp, solver)?.model;
            rmse(&model.predict_many(x)?, y)
        }
        FitnessMode::KFold { folds } => {
            let n = x.rows();
            if folds > n {
                return Err(Error::config(format!("{folds} folds for {n} samples")));
            }
            let mut pred = Vec::with_capacity(n);
            let mut obs = Vec::with_capacity(n);
            for k in 0..folds {
                let (start, end) = (k * n / folds, (k + 1) * n / folds);
                let train: Vec<usize> = (0..start).chain(end..n).collect();
                let test: Vec<usize> = (start..end).collect();
                let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let model = fit_detailed(&x.select_rows(&train), &ty, hp, solver)?.model;
                pred.extend(model.predict_many(&x.select_rows(&test))?);
                obs.extend(test.iter().map(|&i| y[i]));
            }
            rmse(&pred, &obs)
        }
    }
}

/// Fitness of a chromosome: RMSE of the decoded SVR, or `+∞` if the fit
/// fails.
pub fn evaluate_fitness(chrom: &Chromosome, x: &DesignMatrix, y: &[f64], config: &GaConfig) -> f64 {
    let hp = chrom.decode();
    match fit_rmse(x, y, &hp, &config.solver, config.fitness) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("fitness of C={} σ²={:?} ε={} failed: {e}", hp.c, hp.sigma2(), hp.epsilon);
            f64::INFINITY
        }
    }
}

/// Lower fitness first; NaN ranks last; ties keep index order.
fn rank(fitness: &[f64]) -> Vec<usize> {
    let key = |i: usize| (fitness[i].is_nan(), if fitness[i].is_nan() { 0.0 } else { fitness[i] });
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| {
        let (na, fa) = key(a);
        let (nb, fb) = key(b);
        na.cmp(&nb).then(fa.total_cmp(&fb)).then(a.cmp(&b))
    });
    idx
}

fn tournament<R: Rng>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        let better = match (fitness[c].is_nan(), fitness[best].is_nan()) {
            (false, true) => true,
            (false, false) => fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best),
            _ => false,
        };
        if better {
            best = c;
        }
    }
    best
}

/// Next population: elites (in index order) followed by offspring.
pub fn evolve_generation<R: Rng>(
    population: &[Chromosome],
    fitness: &[f64],
    config: &GaConfig,
    rng: &mut R,
) -> Vec<Chromosome> {
    assert_eq!(population.len(), fitness.len(), "fitness must align with population");
    let n = population.len();
    let mut elites: Vec<usize> = rank(fitness).into_iter().take(config.elite_count.min(n)).collect();
    elites.sort_unstable();
    let mut next: Vec<Chromosome> = elites.iter().map(|&i| population[i]).collect();

    let mutation = Normal::new(0.0, config.mutation_scale.max(0.0)).expect("finite scale");
    let b = &config.bounds;
    while next.len() < n {
        let p1 = population[tournament(fitness, config.tournament_size, rng)];
        let p2 = population[tournament(fitness, config.tournament_size, rng)];
        let mut genes = p1.genes;
        if rng.random::<f64>() < config.crossover_prob {
            for g in 0..GENES {
                let (lo, hi) = if p1.genes[g] <= p2.genes[g] {
                    (p1.genes[g], p2.genes[g])
                } else {
                    (p2.genes[g], p1.genes[g])
                };
                let ext = config.blend_alpha * (hi - lo);
                let u: f64 = rng.random();
                genes[g] = lo - ext + u * (hi - lo + 2.0 * ext);
            }
        }
        for gene in genes.iter_mut() {
            if rng.random::<f64>() < config.mutation_prob {
                *gene += mutation.sample(rng);
            }
        }
        b.clip(&mut genes);
        next.push(Chromosome { genes });
    }
    next
}

/// Runs the GA against an arbitrary fitness function of the decoded
/// hyperparameters.
pub fn ga_run_with<F>(config: &GaConfig, fitness: F) -> Result<GaResult>
where
    F: Fn(&Chromosome) -> f64 + Sync + Send,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop = init_population(config, &mut rng)?;
    let mut history = Vec::with_capacity(config.generations);
    let mut best: Option<(Chromosome, f64)> = None;
    let mut evaluations = 0;
    // Fitness is pure, so bit-identical chromosomes (elites, unmutated
    // copies) reuse the earlier value.
    let mut memo: HashMap<[u64; GENES], f64> = HashMap::new();
    let key = |c: &Chromosome| c.genes.map(f64::to_bits);

    for generation in 0..config.generations {
        let mut fresh: Vec<Chromosome> = Vec::new();
        for c in &pop {
            if !memo.contains_key(&key(c)) && !fresh.iter().any(|f| key(f) == key(c)) {
                fresh.push(*c);
            }
        }
        let values = par::map(&fresh, config.parallel, &fitness);
        for (c, v) in fresh.iter().zip(values) {
            memo.insert(key(c), v);
        }
        let fit: Vec<f64> = pop.iter().map(|c| memo[&key(c)]).collect();
        evaluations += fit.len();

        let order = rank(&fit);
        let top = order[0];
        if best.is_none_or(|(_, f)| fit[top] < f) {
            best = Some((pop[top], fit[top]));
        }
        let finite: Vec<f64> = fit.iter().copied().filter(|v| v.is_finite()).collect();
        let mean_fitness = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let (bc, bf) = best.expect("set above");
        history.push(GenerationStats {
            generation,
            best_fitness: bf,
            mean_fitness,
            best: bc.decode(),
        });
        log::debug!("generation {generation}: best {bf:.6}, mean {mean_fitness:.6}");

        if generation + 1 < config.generations {
            pop = evolve_generation(&pop, &fit, config, &mut rng);
        }
    }
    log::debug!("{} distinct chromosomes evaluated", memo.len());
    let (best_chromosome, best_fitness) = best.expect("at least one generation");
    Ok(GaResult {
        best: best_chromosome.decode(),
        best_chromosome,
        best_fitness,
        history,
        evaluations,
    })
}

/// Tunes SVR hyperparameters on `(x, y)`.
pub fn ga_run(x: &DesignMatrix, y: &[f64], config: &GaConfig) -> Result<GaResult> {
    if x.rows() < 2 || x.rows() != y.len() {
        return Err(Error::data(format!(
            "GA needs at least 2 aligned samples, got {} rows and {} targets",
            x.rows(),
            y.len()
        )));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value in training data"));
    }
    ga_run_with(config, |c| evaluate_fitness(c, x, y, config))
}

/// Writes `generation,best_fitness,mean_fitness,C,sigma2,epsilon`.
pub fn write_history_csv<W: Write>(sink: W, history: &[GenerationStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["generation", "best_fitness", "mean_fitness", "C", "sigma2", "epsilon"])
        .map_err(io)?;
    for h in history {
        w.write_record([
            h.generation.to_string(),
            h.best_fitness.to_string(),
            h.mean_fitness.to_string(),
            h.best.c.to_string(),
            h.best.sigma2().unwrap_or(f64::NAN).to_string(),
            h.best.epsilon.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GaConfig {
        GaConfig {
            population_size: 12,
            generations: 5,
            ..GaConfig::default()
        }
    }

    #[test]
    fn default_bounds_match_search_domain() {
        let b = Bounds::default();
        let lo = Chromosome { genes: b.lo }.decode();
        let hi = Chromosome { genes: b.hi }.decode();
        assert!((lo.c - 1e-3).abs() < 1e-18 && (hi.c - 1e3).abs() < 1e-9);
        assert!((lo.sigma2().unwrap() - 1e-3).abs() < 1e-18 && (hi.sigma2().unwrap() - 16.0).abs() < 1e-12);
        assert!((lo.epsilon - 1e-2).abs() < 1e-17 && (hi.epsilon - 8.0).abs() < 1e-12);
    }

    #[test]
    fn population_init() {
        let cfg = small();
        let a = init_population(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = init_population(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|c| cfg.bounds.contains(c)));
        // Bit-exact, so the seeded member reproduces the untuned model.
        assert_eq!(a[0].decode(), SvrHyperparams::default());
    }

    #[test]
    fn invalid_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = small();
        c.bounds.lo[1] = c.bounds.hi[1];
        assert!(init_population(&c, &mut rng).is_err());
        for c in [
            GaConfig { population_size: 1, ..small() },
            GaConfig { generations: 0, ..small() },
            GaConfig { elite_count: 0, ..small() },
            GaConfig { elite_count: 13, ..small() },
            GaConfig { crossover_prob: 1.5, ..small() },
            GaConfig { fitness: FitnessMode::KFold { folds: 1 }, ..small() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn pure_elitism_keeps_population() {
        let cfg = GaConfig { elite_count: 12, ..small() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = init_population(&cfg, &mut rng).unwrap();
        let fit: Vec<f64> = (0..12).map(|i| (i * 7 % 5) as f64).collect();
        assert_eq!(evolve_generation(&pop, &fit, &cfg, &mut rng), pop);
    }

    #[test]
    fn no_operators_copy_parents() {
        let cfg = GaConfig {
            crossover_prob: 0.0,
            mutation_prob: 0.0,
            ..small()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pop = init_population(&cfg, &mut rng).unwrap();
        let fit: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let next = evolve_generation(&pop, &fit, &cfg, &mut rng);
        assert_eq!(next[0], pop[0]);
        assert!(next.iter().all(|c| pop.contains(c)));
    }

    #[test]
    fn offspring_stay_in_bounds() {
        let cfg = GaConfig {
            population_size: 100,
            mutation_prob: 1.0,
            mutation_scale: 3.0,
            blend_alpha: 2.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pop = init_population(&cfg, &mut rng).unwrap();
        let mut samples = 0;
        while samples < 10_000 {
            let fit: Vec<f64> = pop.iter().map(|c| c.genes.iter().sum()).collect();
            pop = evolve_generation(&pop, &fit, &cfg, &mut rng);
            assert!(pop.iter().all(|c| cfg.bounds.contains(c)));
            samples += (pop.len() - 1) * GENES;
        }
    }

    #[test]
    fn nan_fitness_ranks_last() {
        assert_eq!(rank(&[f64::NAN, 2.0, f64::INFINITY, 1.0]), vec![3, 1, 2, 0]);
    }

    #[test]
    fn known_optimal_member_returned_after_one_generation() {
        let cfg = GaConfig { generations: 1, ..small() };
        // Member 0 is the default triple; make it the unique optimum.
        let target = Chromosome::from_hyperparams(&SvrHyperparams::default());
        let res = ga_run_with(&cfg, |c| {
            c.genes.iter().zip(&target.genes).map(|(a, b)| (a - b).powi(2)).sum()
        })
        .unwrap();
        assert_eq!(res.best_chromosome, target);
        assert_eq!(res.best_fitness, 0.0);
        assert_eq!(res.history.len(), 1);
        assert_eq!(res.evaluations, 12);
    }

    #[test]
    fn history_csv_rows() {
        let cfg = small();
        let res = ga_run_with(&cfg, |c| c.genes[0].abs()).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &res.history).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), cfg.generations + 1);
        assert!(text.starts_with("generation,best_fitness,mean_fitness,C,sigma2,epsilon\n"));
    }
}
