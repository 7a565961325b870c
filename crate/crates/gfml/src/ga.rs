//! Real-coded GA over the trapezoid parameters of a fuzzy controller:
//! tournament selection, whole-arithmetic crossover, Gaussian mutation,
//! clamp-and-sort repair, and elitism. Deterministic for a given seed.

use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::dataset::TrainingView;
use crate::inference::{CompiledController, InferScratch};
use crate::model::{FuzzyController, TrapezoidShape};

#[derive(Debug, Error)]
pub enum GaError {
    #[error("chromosome length {got} does not match template ({want})")]
    LengthMismatch { got: usize, want: usize },
    #[error("training view is empty")]
    EmptyView,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("template controller is invalid: {0}")]
    InvalidTemplate(String),
}

/// Flat gene vector: four reals per fuzzy term in knowledge-base order
/// (variable order, then term order, then p1..p4). When rule-consequent
/// tuning is on, one term index per rule follows.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    pub genes: Vec<f64>,
    /// Consequent term index per rule; empty unless tuning consequents.
    pub consequents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvolutionConfig {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub generations: u32,
    pub population_size: usize,
    /// Gaussian mutation sigma as a fraction of the owning domain width.
    pub mutation_sigma: f64,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub seed: u64,
    pub tune_rule_consequents: bool,
    /// Output-grid sample count used during fitness evaluation.
    pub sample_count: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            generations: 10_000,
            population_size: 50,
            mutation_sigma: 0.05,
            tournament_size: 2,
            elite_count: 1,
            seed: 0,
            tune_rule_consequents: false,
            sample_count: crate::inference::DEFAULT_SAMPLE_COUNT,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(GaError::InvalidConfig("crossover_rate outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(GaError::InvalidConfig("mutation_rate outside [0, 1]".into()));
        }
        if self.population_size < 2 {
            return Err(GaError::InvalidConfig("population_size must be >= 2".into()));
        }
        if self.elite_count >= self.population_size {
            return Err(GaError::InvalidConfig(
                "elite_count must be < population_size".into(),
            ));
        }
        if self.tournament_size == 0 {
            return Err(GaError::InvalidConfig("tournament_size must be >= 1".into()));
        }
        if self.sample_count == 0 {
            return Err(GaError::InvalidConfig("sample_count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_mse: f64,
    pub mean_mse: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionReport {
    pub best: FuzzyController,
    pub history: Vec<GenerationStats>,
    pub final_train_mse: f64,
    pub seed: u64,
    pub config: EvolutionConfig,
}

impl EvolutionReport {
    /// `generation,best_mse,mean_mse` rows for the whole history.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_mse,mean_mse\n");
        for s in &self.history {
            out.push_str(&format!("{},{},{}\n", s.generation, s.best_mse, s.mean_mse));
        }
        out
    }
}

/// Per-gene domain bounds, four per term, derived from the template.
fn gene_domains(template: &FuzzyController) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(template.term_count() * 4);
    for v in &template.knowledge_base {
        for _ in &v.terms {
            for _ in 0..4 {
                out.push((v.domain_left, v.domain_right));
            }
        }
    }
    out
}

pub fn encode(fc: &FuzzyController) -> Chromosome {
    let mut genes = Vec::with_capacity(fc.term_count() * 4);
    for v in &fc.knowledge_base {
        for t in &v.terms {
            genes.extend_from_slice(&t.shape.params());
        }
    }
    Chromosome {
        genes,
        consequents: Vec::new(),
    }
}

fn encode_with_consequents(fc: &FuzzyController) -> Chromosome {
    let output = fc.output_variable().expect("valid controller");
    let mut c = encode(fc);
    c.consequents = fc
        .rule_base
        .iter()
        .map(|r| {
            output
                .terms
                .iter()
                .position(|t| t.name == r.consequent.term)
                .expect("valid consequent")
        })
        .collect();
    c
}

/// Rebuilds a controller from genes, repairing each 4-gene group by
/// clamping into the owning domain and sorting ascending. Consequent genes
/// (when present) overwrite rule consequent terms.
pub fn decode(c: &Chromosome, template: &FuzzyController) -> Result<FuzzyController, GaError> {
    let want = template.term_count() * 4;
    if c.genes.len() != want {
        return Err(GaError::LengthMismatch {
            got: c.genes.len(),
            want,
        });
    }
    if !c.consequents.is_empty() && c.consequents.len() != template.rule_base.len() {
        return Err(GaError::LengthMismatch {
            got: c.consequents.len(),
            want: template.rule_base.len(),
        });
    }
    let mut fc = template.clone();
    let mut cursor = 0;
    for v in &mut fc.knowledge_base {
        let (left, right) = (v.domain_left, v.domain_right);
        for t in &mut v.terms {
            let mut group = [0.0; 4];
            for (g, src) in group.iter_mut().zip(&c.genes[cursor..cursor + 4]) {
                *g = src.clamp(left, right);
            }
            group.sort_by(|a, b| a.partial_cmp(b).unwrap());
            t.shape = TrapezoidShape::new(group[0], group[1], group[2], group[3]);
            cursor += 4;
        }
    }
    if !c.consequents.is_empty() {
        let output = fc.output_variable().expect("valid template").clone();
        for (rule, &idx) in fc.rule_base.iter_mut().zip(&c.consequents) {
            rule.consequent.term = output.terms[idx % output.terms.len()].name.clone();
        }
    }
    Ok(fc)
}

/// Whole-arithmetic blend crossover: with probability `rate` the children
/// are `alpha*a + (1-alpha)*b` and its mirror, one `alpha ~ U[0,1)` per pair.
pub fn crossover<R: Rng>(
    a: &Chromosome,
    b: &Chromosome,
    rate: f64,
    rng: &mut R,
) -> (Chromosome, Chromosome) {
    assert_eq!(a.genes.len(), b.genes.len());
    if !rng.gen_bool(rate) {
        return (a.clone(), b.clone());
    }
    let alpha: f64 = rng.gen();
    let blend = |x: f64, y: f64| alpha * x + (1.0 - alpha) * y;
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for i in 0..a.genes.len() {
        c1.genes[i] = blend(a.genes[i], b.genes[i]);
        c2.genes[i] = blend(b.genes[i], a.genes[i]);
    }
    for i in 0..a.consequents.len() {
        if rng.gen_bool(0.5) {
            c1.consequents[i] = b.consequents[i];
            c2.consequents[i] = a.consequents[i];
        }
    }
    (c1, c2)
}

/// Per-gene Gaussian mutation at probability `rate`, sigma scaled by the
/// owning domain width, clamped back into the domain. Consequent genes are
/// resampled uniformly at the same rate.
pub fn mutate<R: Rng>(
    c: &Chromosome,
    rate: f64,
    sigma: f64,
    domains: &[(f64, f64)],
    output_term_count: usize,
    rng: &mut R,
) -> Chromosome {
    let mut out = c.clone();
    for (gene, &(left, right)) in out.genes.iter_mut().zip(domains) {
        if rate > 0.0 && rng.gen_bool(rate) {
            let width = right - left;
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma * width).unwrap();
                *gene = (*gene + normal.sample(rng)).clamp(left, right);
            }
        }
    }
    for slot in out.consequents.iter_mut() {
        if rate > 0.0 && rng.gen_bool(rate) {
            *slot = rng.gen_range(0..output_term_count);
        }
    }
    out
}

/// Mean squared error of the controller's predictions over the view.
pub fn fitness(
    fc: &FuzzyController,
    view: &TrainingView,
    sample_count: usize,
) -> Result<f64, GaError> {
    let compiled = CompiledController::compile(fc)
        .map_err(|e| GaError::InvalidTemplate(e.to_string()))?;
    Ok(fitness_compiled(&compiled, view, sample_count))
}

fn fitness_compiled(compiled: &CompiledController, view: &TrainingView, n: usize) -> f64 {
    let mut scratch = InferScratch::default();
    let mut sum = 0.0;
    for (inputs, desired) in &view.pairs {
        let predicted = compiled.infer_ordered(inputs, n, &mut scratch);
        let e = predicted - desired;
        sum += e * e;
    }
    sum / view.pairs.len() as f64
}

struct Individual {
    chromosome: Chromosome,
    mse: f64,
}

/// Generational GA. The population starts from the encoded template plus
/// mutated variants; each generation applies tournament selection,
/// crossover, mutation, repair-on-decode, and elitism. Pure function of
/// `(template, view, cfg)` including the seed.
pub fn evolve(
    template: &FuzzyController,
    view: &TrainingView,
    cfg: &EvolutionConfig,
) -> Result<EvolutionReport, GaError> {
    cfg.validate()?;
    if view.pairs.is_empty() {
        return Err(GaError::EmptyView);
    }
    let violations = crate::model::validate_controller(template);
    if !violations.is_empty() {
        return Err(GaError::InvalidTemplate(violations[0].0.clone()));
    }
    let domains = gene_domains(template);
    let output_terms = template.output_variable().expect("validated").terms.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let seed_chromosome = if cfg.tune_rule_consequents {
        encode_with_consequents(template)
    } else {
        encode(template)
    };

    let evaluate = |c: &Chromosome| -> Result<f64, GaError> {
        let fc = decode(c, template)?;
        let compiled = CompiledController::compile(&fc)
            .map_err(|e| GaError::InvalidTemplate(e.to_string()))?;
        Ok(fitness_compiled(&compiled, view, cfg.sample_count))
    };

    let mut population = Vec::with_capacity(cfg.population_size);
    population.push(seed_chromosome.clone());
    for _ in 1..cfg.population_size {
        population.push(mutate(
            &seed_chromosome,
            cfg.mutation_rate.max(0.5),
            cfg.mutation_sigma,
            &domains,
            output_terms,
            &mut rng,
        ));
    }
    let mut population: Vec<Individual> = population
        .into_iter()
        .map(|chromosome| {
            let mse = evaluate(&chromosome)?;
            Ok(Individual { chromosome, mse })
        })
        .collect::<Result<_, GaError>>()?;

    let mut history = Vec::with_capacity(cfg.generations as usize + 1);
    let stats = |generation: u32, pop: &[Individual]| GenerationStats {
        generation,
        best_mse: pop.iter().map(|i| i.mse).fold(f64::INFINITY, f64::min),
        mean_mse: pop.iter().map(|i| i.mse).sum::<f64>() / pop.len() as f64,
    };
    history.push(stats(0, &population));

    for generation in 1..=cfg.generations {
        // Stable sort keeps earlier individuals ahead on ties.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| population[a].mse.partial_cmp(&population[b].mse).unwrap());

        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut best = rng.gen_range(0..population.len());
            for _ in 1..cfg.tournament_size {
                let candidate = rng.gen_range(0..population.len());
                if population[candidate].mse < population[best].mse {
                    best = candidate;
                }
            }
            best
        };

        let mut offspring: Vec<Chromosome> =
            Vec::with_capacity(cfg.population_size - cfg.elite_count);
        while offspring.len() < cfg.population_size - cfg.elite_count {
            let pa = tournament(&mut rng);
            let pb = tournament(&mut rng);
            let (c1, c2) = crossover(
                &population[pa].chromosome,
                &population[pb].chromosome,
                cfg.crossover_rate,
                &mut rng,
            );
            for child in [c1, c2] {
                if offspring.len() < cfg.population_size - cfg.elite_count {
                    offspring.push(mutate(
                        &child,
                        cfg.mutation_rate,
                        cfg.mutation_sigma,
                        &domains,
                        output_terms,
                        &mut rng,
                    ));
                }
            }
        }

        let mut next: Vec<Individual> = order[..cfg.elite_count]
            .iter()
            .map(|&i| Individual {
                chromosome: population[i].chromosome.clone(),
                mse: population[i].mse,
            })
            .collect();
        for chromosome in offspring {
            let mse = evaluate(&chromosome)?;
            next.push(Individual { chromosome, mse });
        }
        population = next;
        history.push(stats(generation, &population));
    }

    let best = population
        .iter()
        .min_by(|a, b| a.mse.partial_cmp(&b.mse).unwrap())
        .expect("population is nonempty");
    let best_controller = decode(&best.chromosome, template)?;
    Ok(EvolutionReport {
        best: best_controller,
        history,
        final_train_mse: best.mse,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}
