//! Constrained NSGA-II over sparse genomes, followed by a shrinking pass that drops
//! and bisects genes toward the base while the individual stays feasible.

pub mod operators;
pub mod sort;
pub mod space;

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::scenario::Value;
pub use sort::Evaluation;
pub use space::{Gene, GeneKind, Genome, SearchSpace};

/// Bisection steps per real gene while shrinking.
pub const BISECT_STEPS: usize = 10;
/// Genes set on a fresh random individual, at most.
const INIT_GENES: usize = 3;

pub trait Problem: Sync {
    fn space(&self) -> &SearchSpace;
    fn evaluate(&self, genome: &Genome) -> Evaluation;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MopSettings {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means 1 / genome length.
    pub mutation_rate: Option<f64>,
    pub eta_crossover: f64,
    pub eta_mutation: f64,
    pub seed: u64,
    pub executor: Executor,
    pub shrink: bool,
}

impl Default for MopSettings {
    fn default() -> Self {
        Self {
            population: 24,
            generations: 25,
            crossover_rate: 0.9,
            mutation_rate: None,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            seed: 0,
            executor: Executor::default(),
            shrink: true,
        }
    }
}

impl MopSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "population must be even and at least 2, got {}",
                self.population
            )));
        }
        let rates = [self.crossover_rate, self.mutation_rate.unwrap_or(0.5)];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidParams("rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub eval: Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Feasible non-dominated individuals, sorted by objectives.
    pub front: Vec<Individual>,
    /// Least-violating individuals, reported when nothing feasible was found.
    pub best_infeasible: Vec<Individual>,
    pub evaluations: usize,
    pub feasible: usize,
}

impl SearchResult {
    pub fn require_feasible(&self) -> Result<&[Individual]> {
        if self.front.is_empty() {
            let best: Vec<String> = self
                .best_infeasible
                .iter()
                .take(5)
                .map(|i| format!("violation {:.3} ({})", i.eval.violation, i.genome.key()))
                .collect();
            return Err(Error::SearchFailed(format!(
                "no feasible individual after {} evaluations; best infeasible: [{}]",
                self.evaluations,
                best.join(", ")
            )));
        }
        Ok(&self.front)
    }
}

struct Engine<'a, P: Problem> {
    problem: &'a P,
    settings: &'a MopSettings,
    cache: HashMap<String, Evaluation>,
    /// Every distinct evaluated genome, in evaluation order.
    archive: Vec<Individual>,
}

impl<P: Problem> Engine<'_, P> {
    fn evaluate_batch(&mut self, genomes: &[Genome]) -> Vec<Evaluation> {
        let mut fresh: Vec<Genome> = Vec::new();
        let mut fresh_keys: Vec<String> = Vec::new();
        for g in genomes {
            let k = g.key();
            if !self.cache.contains_key(&k) && !fresh_keys.contains(&k) {
                fresh_keys.push(k);
                fresh.push(g.clone());
            }
        }
        let problem = self.problem;
        let evals = self.settings.executor.map(&fresh, |g| problem.evaluate(g));
        for ((k, g), e) in fresh_keys.into_iter().zip(fresh).zip(evals) {
            self.cache.insert(k, e.clone());
            self.archive.push(Individual { genome: g, eval: e });
        }
        genomes.iter().map(|g| self.cache[&g.key()].clone()).collect()
    }
}

fn random_genome<R: Rng>(rng: &mut R, space: &SearchSpace) -> Genome {
    let n = space.genes.len();
    let mut g = Genome::empty(n);
    let k = rng.gen_range(1..=INIT_GENES.min(n));
    for i in sample(rng, n, k) {
        g.0[i] = Some(space.genes[i].sample(rng));
    }
    ensure_nonempty(rng, space, g.canonical(space))
}

/// Single-gene changes first, one side of the base at a time, over a random order of
/// (gene, side) pairs; random genomes fill whatever room is left.
fn initial_population<R: Rng>(rng: &mut R, space: &SearchSpace, size: usize) -> Vec<Genome> {
    let n = space.genes.len();
    let mut slots: Vec<(usize, f64)> = Vec::new();
    for (i, g) in space.genes.iter().enumerate() {
        slots.push((i, 1.0));
        if matches!(g.kind, GeneKind::Real { .. }) {
            slots.push((i, -1.0));
        }
    }
    let singles = size.min(slots.len());
    let mut out: Vec<Genome> = sample(rng, slots.len(), singles)
        .into_iter()
        .map(|k| {
            let (i, side) = slots[k];
            let mut g = Genome::empty(n);
            g.0[i] = Some(space.genes[i].sample_side(rng, side));
            ensure_nonempty(rng, space, g.canonical(space))
        })
        .collect();
    while out.len() < size {
        out.push(random_genome(rng, space));
    }
    out
}

fn ensure_nonempty<R: Rng>(rng: &mut R, space: &SearchSpace, mut g: Genome) -> Genome {
    if g.active().next().is_none() {
        let i = rng.gen_range(0..space.genes.len());
        g.0[i] = Some(space.genes[i].sample(rng));
        g = g.canonical(space);
    }
    g
}

fn tournament<R: Rng>(rng: &mut R, rank: &[usize], crowd: &[f64]) -> usize {
    let a = rng.gen_range(0..rank.len());
    let b = rng.gen_range(0..rank.len());
    match sort::crowded_cmp(rank, crowd, a, b) {
        std::cmp::Ordering::Greater => b,
        _ => a,
    }
}

/// Best `n` of `pop` by front, then crowding within the last admitted front.
fn environmental_selection(pop: &[Individual], n: usize) -> Vec<Individual> {
    let evals: Vec<Evaluation> = pop.iter().map(|i| i.eval.clone()).collect();
    let mut next = Vec::with_capacity(n);
    for front in sort::non_dominated_sort(&evals) {
        if next.len() + front.len() <= n {
            next.extend(front.iter().map(|&i| pop[i].clone()));
            continue;
        }
        let crowd = sort::crowding_distance(&evals, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(a.cmp(&b)));
        for &o in order.iter().take(n - next.len()) {
            next.push(pop[front[o]].clone());
        }
        break;
    }
    next
}

/// Feasible members of `all` that no other feasible member dominates, deduplicated.
pub fn feasible_front(all: &[Individual]) -> Vec<Individual> {
    let mut seen = std::collections::HashSet::new();
    let feasible: Vec<&Individual> = all
        .iter()
        .filter(|i| i.eval.feasible() && seen.insert(i.genome.key()))
        .collect();
    let mut front: Vec<Individual> = feasible
        .iter()
        .filter(|i| {
            !feasible
                .iter()
                .any(|j| sort::dominates(&j.eval.objectives, &i.eval.objectives))
        })
        .map(|i| (*i).clone())
        .collect();
    front.sort_by(|a, b| {
        let by_obj = a
            .eval
            .objectives
            .iter()
            .zip(&b.eval.objectives)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal);
        by_obj.then_with(|| a.genome.key().cmp(&b.genome.key()))
    });
    front
}

/// Drops genes, then bisects each remaining real toward its base, keeping every step
/// that stays feasible. Returns the result and the number of evaluations spent.
pub fn shrink<P: Problem>(problem: &P, start: &Individual) -> (Individual, usize) {
    let space = problem.space();
    let mut cur = start.clone();
    let mut spent = 0;
    let active: Vec<usize> = cur.genome.active().collect();
    for i in active {
        let mut g = cur.genome.clone();
        g.0[i] = None;
        if g.active().next().is_none() {
            continue;
        }
        let e = problem.evaluate(&g);
        spent += 1;
        if e.feasible() {
            cur = Individual { genome: g, eval: e };
        }
    }
    let active: Vec<usize> = cur.genome.active().collect();
    for i in active {
        let gene = &space.genes[i];
        let Some(Value::Real(target)) = cur.genome.0[i].clone() else {
            continue;
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..BISECT_STEPS {
            let mid = 0.5 * (lo + hi);
            let v = gene.toward(target, mid);
            if Some(&Value::Real(v)) == Some(&gene.base) {
                lo = mid;
                continue;
            }
            let mut g = cur.genome.clone();
            g.0[i] = Some(Value::Real(v));
            let e = problem.evaluate(&g);
            spent += 1;
            if e.feasible() {
                hi = mid;
                cur = Individual { genome: g, eval: e };
            } else {
                lo = mid;
            }
        }
    }
    (cur, spent)
}

/// First feasible individual that sets only gene `i`, per gene and side of its base
/// value. A lone change that is dominated before shrinking can still end up on the
/// front once shrunk.
fn single_gene_seeds(space: &SearchSpace, archive: &[Individual]) -> Vec<Individual> {
    let mut out: Vec<Option<Individual>> = vec![None; 2 * space.genes.len()];
    for ind in archive.iter().filter(|i| i.eval.feasible()) {
        let mut active = ind.genome.active();
        if let (Some(i), None) = (active.next(), active.next()) {
            let gene = &space.genes[i];
            let above = match (&ind.genome.0[i], gene.base.as_real()) {
                (Some(Value::Real(v)), Some(b)) => gene.toward(*v, 1e-6) > b,
                _ => false,
            };
            out[2 * i + above as usize].get_or_insert_with(|| ind.clone());
        }
    }
    out.into_iter().flatten().collect()
}

/// Runs the search. Deterministic for a fixed seed regardless of the executor.
pub fn nsga2<P: Problem>(problem: &P, settings: &MopSettings) -> Result<SearchResult> {
    settings.validate()?;
    let space = problem.space();
    if space.genes.is_empty() {
        return Err(Error::InvalidParams("empty search space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let rate = settings
        .mutation_rate
        .unwrap_or(1.0 / space.genes.len() as f64);
    let mut engine = Engine {
        problem,
        settings,
        cache: HashMap::new(),
        archive: Vec::new(),
    };

    let genomes = initial_population(&mut rng, space, settings.population);
    let evals = engine.evaluate_batch(&genomes);
    let mut pop: Vec<Individual> = genomes
        .into_iter()
        .zip(evals)
        .map(|(genome, eval)| Individual { genome, eval })
        .collect();

    for _ in 0..settings.generations {
        let pop_evals: Vec<Evaluation> = pop.iter().map(|i| i.eval.clone()).collect();
        let (rank, crowd) = sort::rank_and_crowd(&pop_evals);
        let mut children = Vec::with_capacity(settings.population);
        while children.len() < settings.population {
            let a = &pop[tournament(&mut rng, &rank, &crowd)].genome;
            let b = &pop[tournament(&mut rng, &rank, &crowd)].genome;
            let (mut c1, mut c2) = if rng.gen_bool(settings.crossover_rate) {
                operators::crossover(&mut rng, space, a, b, settings.eta_crossover)
            } else {
                (a.clone(), b.clone())
            };
            operators::mutate(&mut rng, space, &mut c1, rate, settings.eta_mutation);
            operators::mutate(&mut rng, space, &mut c2, rate, settings.eta_mutation);
            children.push(ensure_nonempty(&mut rng, space, c1.canonical(space)));
            children.push(ensure_nonempty(&mut rng, space, c2.canonical(space)));
        }
        let evals = engine.evaluate_batch(&children);
        let mut combined: Vec<Individual> = Vec::with_capacity(2 * settings.population);
        let mut seen = std::collections::HashSet::new();
        for ind in pop.into_iter().chain(
            children
                .into_iter()
                .zip(evals)
                .map(|(genome, eval)| Individual { genome, eval }),
        ) {
            if seen.insert(ind.genome.key()) {
                combined.push(ind);
            }
        }
        pop = environmental_selection(&combined, settings.population);
    }

    let mut evaluations = engine.cache.len();
    let mut front = feasible_front(&engine.archive);
    if settings.shrink && !front.is_empty() {
        let mut seeds = front.clone();
        seeds.extend(single_gene_seeds(space, &engine.archive));
        let shrunk = settings.executor.map(&seeds, |i| shrink(problem, i));
        let mut all = engine.archive.clone();
        for (ind, spent) in shrunk {
            evaluations += spent;
            all.push(ind);
        }
        front = feasible_front(&all);
    }
    let feasible = engine.archive.iter().filter(|i| i.eval.feasible()).count();
    let best_infeasible = if front.is_empty() {
        let evals: Vec<Evaluation> = engine.archive.iter().map(|i| i.eval.clone()).collect();
        sort::non_dominated_sort(&evals)
            .first()
            .map(|f| f.iter().map(|&i| engine.archive[i].clone()).collect())
            .unwrap_or_default()
    } else {
        Vec::new()
    };
    Ok(SearchResult {
        front,
        best_infeasible,
        evaluations,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::DeltaKind;

    /// Feasible iff x + y >= 1; minimize (magnitude, distance of x from 0.8).
    struct Toy {
        space: SearchSpace,
    }

    impl Toy {
        fn new() -> Self {
            Self {
                space: SearchSpace {
                    kind: DeltaKind::Cyber,
                    genes: vec![
                        Gene::real("m.x", 0.0, 0.0, 2.0),
                        Gene::real("m.y", 0.0, 0.0, 2.0),
                        Gene::flag("m.f", false),
                    ],
                },
            }
        }
    }

    impl Problem for Toy {
        fn space(&self) -> &SearchSpace {
            &self.space
        }

        fn evaluate(&self, g: &Genome) -> Evaluation {
            let d = g.to_delta(&self.space);
            let get = |i: usize| g.0[i].as_ref().and_then(Value::as_real).unwrap_or(0.0);
            let (x, y) = (get(0), get(1));
            Evaluation {
                objectives: vec![d.magnitude(), (x - 0.8).abs()],
                violation: (1.0 - x - y).max(0.0),
            }
        }
    }

    fn settings(executor: Executor) -> MopSettings {
        MopSettings {
            population: 16,
            generations: 15,
            seed: 3,
            executor,
            ..MopSettings::default()
        }
    }

    #[test]
    fn finds_feasible_front() {
        let toy = Toy::new();
        let r = nsga2(&toy, &settings(Executor::Sequential)).unwrap();
        let front = r.require_feasible().unwrap();
        for a in front {
            assert!(a.eval.feasible());
            assert_eq!(toy.evaluate(&a.genome), a.eval);
            for b in front {
                assert!(!sort::dominates(&b.eval.objectives, &a.eval.objectives));
            }
        }
        // Shrinking pulls the cheapest member close to the boundary x = 1.
        let best = &front[0];
        assert!(best.eval.objectives[0] < 1.0 + 1.0 + 0.01, "{:?}", best);
    }

    #[test]
    fn executor_does_not_change_result() {
        let toy = Toy::new();
        let a = nsga2(&toy, &settings(Executor::Sequential)).unwrap();
        let b = nsga2(&toy, &settings(Executor::Parallel)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_problem_reports_best() {
        struct Never(SearchSpace);
        impl Problem for Never {
            fn space(&self) -> &SearchSpace {
                &self.0
            }
            fn evaluate(&self, g: &Genome) -> Evaluation {
                Evaluation {
                    objectives: vec![0.0],
                    violation: 1.0 + g.active().count() as f64,
                }
            }
        }
        let p = Never(Toy::new().space);
        let r = nsga2(&p, &settings(Executor::Sequential)).unwrap();
        assert!(r.front.is_empty());
        assert!(!r.best_infeasible.is_empty());
        assert!(matches!(r.require_feasible(), Err(Error::SearchFailed(_))));
    }

    #[test]
    fn rejects_odd_population() {
        let s = MopSettings {
            population: 7,
            ..MopSettings::default()
        };
        assert!(nsga2(&Toy::new(), &s).is_err());
    }
}
