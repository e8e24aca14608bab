//! Search strategies over repaired bit-vector configurations.
//!
//! All three strategies share one stopping rule: a run may evaluate at most
//! `budget` distinct configurations. Re-visiting a configuration the run
//! has already seen is free.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::device::ObjectiveSet;
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationRecord, Problem};
use crate::feature_model::Configuration;
use crate::indicators::dominates;

/// Splits `points` into successive non-dominated fronts (indices into
/// `points`), using the bookkeeping of Deb's fast non-dominated sort.
pub fn fast_nondominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            if dominates(points[p].as_ref(), points[q].as_ref()) {
                dominated_by[p].push(q);
            } else if dominates(points[q].as_ref(), points[p].as_ref()) {
                counts[p] += 1;
            }
        }
        if counts[p] == 0 {
            current.push(p);
        }
    }
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each point within one front.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let k = front[0].as_ref().len();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..k {
        let value = |i: usize| front[i].as_ref()[m];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let i = order[w];
            if distance[i].is_finite() {
                distance[i] += (value(order[w + 1]) - value(order[w - 1])) / range;
            }
        }
    }
    distance
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    #[serde(rename = "nsga2")]
    Nsga2,
    #[serde(rename = "hybrid-rs")]
    HybridRs,
    #[serde(rename = "sway")]
    Sway,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Nsga2 => "nsga2",
            Algorithm::HybridRs => "hybrid-rs",
            Algorithm::Sway => "sway",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nsga2" | "nsga-ii" => Ok(Algorithm::Nsga2),
            "hybrid-rs" | "hybrid_rs" | "rs" => Ok(Algorithm::HybridRs),
            "sway" => Ok(Algorithm::Sway),
            other => Err(Error::Validation(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchParams {
    /// Distinct configurations a run may evaluate.
    pub budget: usize,
    pub population: usize,
    pub crossover_prob: f64,
    /// Chance that an offspring is mutated at all; each free bit then flips
    /// with probability `1 / free_bits`.
    pub mutation_prob: f64,
    pub seed: u64,
    pub objectives: ObjectiveSet,
    /// Consecutive candidates (random draws or offspring) without a new
    /// evaluation after which the run gives up on the remaining budget.
    pub max_stall: usize,
    /// Candidate pool for SWAY.
    pub pool_size: usize,
    /// Whether SWAY spends leftover budget on members of the final clusters.
    pub evaluate_leaves: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            budget: 250,
            population: 10,
            crossover_prob: 0.8,
            mutation_prob: 0.1,
            seed: 0,
            objectives: ObjectiveSet::all(),
            max_stall: 200_000,
            pool_size: 10_000,
            evaluate_leaves: true,
        }
    }
}

impl SearchParams {
    pub fn check(&self) -> Result<()> {
        if self.population < 2 || self.budget < self.population {
            return Err(Error::Validation(format!(
                "need budget >= population >= 2 (budget {}, population {})",
                self.budget, self.population
            )));
        }
        for (name, p) in [("crossover", self.crossover_prob), ("mutation", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name} probability {p} outside [0, 1]")));
            }
        }
        if self.pool_size < 2 {
            return Err(Error::Validation("SWAY pool needs at least two candidates".into()));
        }
        Ok(())
    }
}

/// Feasible, mutually non-dominated records found by one run.
#[derive(Debug, Clone, Serialize)]
pub struct Archive {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Distinct configurations the run evaluated (its budget consumption).
    pub evaluations: usize,
    /// Evaluator invocations the run caused; lower than `evaluations` when
    /// a shared cache already held some results.
    pub evaluator_calls: usize,
    /// Sorted by bitstring.
    pub solutions: Vec<EvaluationRecord>,
}

/// Budget ledger of a single run.
struct Run<'p> {
    problem: &'p Problem,
    objectives: &'p ObjectiveSet,
    budget: usize,
    seen: HashMap<Configuration, EvaluationRecord>,
    evaluator_calls: usize,
}

impl<'p> Run<'p> {
    fn new(problem: &'p Problem, params: &'p SearchParams) -> Self {
        Self {
            problem,
            objectives: &params.objectives,
            budget: params.budget,
            seen: HashMap::new(),
            evaluator_calls: 0,
        }
    }

    fn used(&self) -> usize {
        self.seen.len()
    }

    fn exhausted(&self) -> bool {
        self.used() >= self.budget
    }

    /// Evaluates `configs` in order. Already-seen configurations are free;
    /// new ones are admitted while budget remains and the rest come back as
    /// `None`. Returns the records and how many new evaluations were made.
    fn evaluate(
        &mut self,
        configs: &[Configuration],
    ) -> Result<(Vec<Option<EvaluationRecord>>, usize)> {
        let mut admitted: Vec<Configuration> = Vec::new();
        let mut admitted_set: HashSet<&Configuration> = HashSet::new();
        for c in configs {
            if self.seen.contains_key(c) || admitted_set.contains(c) {
                continue;
            }
            if self.used() + admitted.len() >= self.budget {
                break;
            }
            admitted_set.insert(c);
            admitted.push(c.clone());
        }
        let records = self.problem.evaluate_batch(&admitted)?;
        let fresh = records.len();
        for r in records {
            self.evaluator_calls += r.evaluator_calls;
            self.seen.insert(r.config.clone(), r);
        }
        let out = configs.iter().map(|c| self.seen.get(c).cloned()).collect();
        Ok((out, fresh))
    }

    fn objectives_of(&self, r: &EvaluationRecord) -> Option<Vec<f64>> {
        r.objectives.as_ref().map(|o| o.select(self.objectives))
    }

    fn into_archive(self, algorithm: Algorithm, seed: u64) -> Archive {
        let mut feasible: Vec<(Vec<f64>, EvaluationRecord)> = self
            .seen
            .values()
            .filter_map(|r| self.objectives_of(r).map(|o| (o, r.clone())))
            .collect();
        feasible.sort_by(|a, b| a.1.config.cmp(&b.1.config));
        let points: Vec<&Vec<f64>> = feasible.iter().map(|(o, _)| o).collect();
        let solutions = feasible
            .iter()
            .filter(|(o, _)| !points.iter().any(|q| dominates(q, o)))
            .map(|(_, r)| r.clone())
            .collect::<Vec<_>>();
        let mut solutions = solutions;
        solutions.sort_by_key(|r| r.config.to_bitstring());
        Archive {
            algorithm,
            seed,
            evaluations: self.seen.len(),
            evaluator_calls: self.evaluator_calls,
            solutions,
        }
    }
}

pub fn run(algorithm: Algorithm, problem: &Problem, params: &SearchParams) -> Result<Archive> {
    match algorithm {
        Algorithm::Nsga2 => nsga2(problem, params),
        Algorithm::HybridRs => hybrid_rs(problem, params),
        Algorithm::Sway => sway(problem, params),
    }
}

#[derive(Debug, Clone)]
struct Individual {
    config: Configuration,
    bits: String,
    objectives: Option<Vec<f64>>,
    rank: usize,
    crowding: f64,
}

impl Individual {
    /// Tournament order: lower rank, then larger crowding, then smaller
    /// bitstring.
    fn better(&self, other: &Individual) -> Ordering {
        self.rank
            .cmp(&other.rank)
            .then_with(|| other.crowding.total_cmp(&self.crowding))
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

/// Assigns rank and crowding to every individual. Infeasible ones share a
/// final rank with zero crowding.
fn assign_fitness(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].objectives.is_some()).collect();
    let points: Vec<&[f64]> =
        feasible.iter().map(|&i| pop[i].objectives.as_deref().unwrap()).collect();
    let mut fronts: Vec<Vec<usize>> = fast_nondominated_sort(&points)
        .into_iter()
        .map(|f| f.into_iter().map(|j| feasible[j]).collect())
        .collect();
    for (rank, front) in fronts.iter().enumerate() {
        let pts: Vec<&[f64]> = front.iter().map(|&i| pop[i].objectives.as_deref().unwrap()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&pts)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    let infeasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].objectives.is_none()).collect();
    if !infeasible.is_empty() {
        for &i in &infeasible {
            pop[i].rank = fronts.len();
            pop[i].crowding = 0.0;
        }
        fronts.push(infeasible);
    }
    fronts
}

/// Picks `size` survivors: whole fronts while they fit, then the most
/// crowded-apart members of the front that does not.
fn environmental_selection(mut pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let fronts = assign_fitness(&mut pool);
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    for mut front in fronts {
        if chosen.len() + front.len() <= size {
            chosen.extend(front);
        } else {
            front.sort_by(|&a, &b| pool[a].better(&pool[b]));
            chosen.extend(front.into_iter().take(size - chosen.len()));
        }
        if chosen.len() == size {
            break;
        }
    }
    let mut survivors: Vec<Individual> = chosen.into_iter().map(|i| pool[i].clone()).collect();
    assign_fitness(&mut survivors);
    survivors
}

fn individual(run: &Run, config: Configuration, record: &EvaluationRecord) -> Individual {
    Individual {
        bits: config.to_bitstring(),
        config,
        objectives: run.objectives_of(record),
        rank: 0,
        crowding: 0.0,
    }
}

fn tournament<'a, R: Rng>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if b.better(a) == Ordering::Less {
        b
    } else {
        a
    }
}

fn one_point_crossover<R: Rng>(
    a: &Configuration,
    b: &Configuration,
    rng: &mut R,
) -> (Configuration, Configuration) {
    let n = a.len();
    if n < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.gen_range(1..n);
    let mut x = a.clone();
    let mut y = b.clone();
    for i in cut..n {
        x.set(i, b.get(i));
        y.set(i, a.get(i));
    }
    (x, y)
}

fn mutate<R: Rng>(c: &mut Configuration, free: &[usize], rate: f64, rng: &mut R) {
    for &pos in free {
        if rng.gen_bool(rate) {
            c.flip(pos);
        }
    }
}

/// NSGA-II with repair of every offspring.
///
/// The returned archive holds the non-dominated set of everything the run
/// evaluated, not only the final population.
pub fn nsga2(problem: &Problem, params: &SearchParams) -> Result<Archive> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut run = Run::new(problem, params);
    let free: Vec<usize> =
        (0..problem.compulsory.len()).filter(|&p| !problem.compulsory[p]).collect();
    let bit_rate = if free.is_empty() { 0.0 } else { 1.0 / free.len() as f64 };

    let initial: Vec<Configuration> = (0..params.population)
        .map(|_| problem.model.random_valid_with(&problem.compulsory, &mut rng))
        .collect();
    let (records, _) = run.evaluate(&initial)?;
    let mut population: Vec<Individual> = initial
        .into_iter()
        .zip(records)
        .filter_map(|(c, r)| r.map(|r| individual(&run, c, &r)))
        .collect();
    assign_fitness(&mut population);

    let mut stall = 0;
    while !run.exhausted() && stall < params.max_stall && !population.is_empty() {
        let mut offspring = Vec::with_capacity(params.population);
        while offspring.len() < params.population {
            let a = tournament(&population, &mut rng).config.clone();
            let b = tournament(&population, &mut rng).config.clone();
            let (mut x, mut y) = if rng.gen_bool(params.crossover_prob) {
                one_point_crossover(&a, &b, &mut rng)
            } else {
                (a, b)
            };
            for child in [&mut x, &mut y] {
                if rng.gen_bool(params.mutation_prob) {
                    mutate(child, &free, bit_rate, &mut rng);
                }
            }
            offspring.push(problem.repair(&x));
            if offspring.len() < params.population {
                offspring.push(problem.repair(&y));
            }
        }
        let (records, fresh) = run.evaluate(&offspring)?;
        stall = if fresh == 0 { stall + offspring.len() } else { 0 };
        let mut pool = population;
        pool.extend(
            offspring
                .into_iter()
                .zip(records)
                .filter_map(|(c, r)| r.map(|r| individual(&run, c, &r))),
        );
        population = environmental_selection(pool, params.population);
    }
    Ok(run.into_archive(Algorithm::Nsga2, params.seed))
}

/// Evaluations are submitted in chunks of this size so results do not
/// depend on the worker count.
const RS_CHUNK: usize = 16;

/// Random search over repaired uniform samples.
pub fn hybrid_rs(problem: &Problem, params: &SearchParams) -> Result<Archive> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut run = Run::new(problem, params);
    let mut stall = 0;
    while !run.exhausted() && stall < params.max_stall {
        let remaining = params.budget - run.used();
        let mut chunk: Vec<Configuration> = Vec::new();
        let mut pending: HashSet<Configuration> = HashSet::new();
        while chunk.len() < RS_CHUNK.min(remaining) && stall < params.max_stall {
            let c = problem.model.random_valid_with(&problem.compulsory, &mut rng);
            if run.seen.contains_key(&c) || pending.contains(&c) {
                stall += 1;
                continue;
            }
            stall = 0;
            pending.insert(c.clone());
            chunk.push(c);
        }
        run.evaluate(&chunk)?;
    }
    Ok(run.into_archive(Algorithm::HybridRs, params.seed))
}

/// Counters describing one SWAY run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SwayStats {
    pub pool: usize,
    pub splits: usize,
    pub leaves: usize,
    pub max_depth: usize,
    /// Distinct evaluations spent on split representatives.
    pub representative_evaluations: usize,
}

pub fn sway(problem: &Problem, params: &SearchParams) -> Result<Archive> {
    sway_with_stats(problem, params).map(|(a, _)| a)
}

/// SWAY-style search in decision space.
///
/// Draws a pool of repaired samples, then splits it recursively along the
/// axis between two far-apart members (by Hamming distance). Only those two
/// representatives are evaluated per split; a half whose representative is
/// dominated is dropped. Clusters smaller than the square root of the pool
/// become leaves.
pub fn sway_with_stats(problem: &Problem, params: &SearchParams) -> Result<(Archive, SwayStats)> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut run = Run::new(problem, params);

    let mut seen = HashSet::new();
    let mut pool = Vec::with_capacity(params.pool_size);
    for _ in 0..params.pool_size {
        let c = problem.model.random_valid_with(&problem.compulsory, &mut rng);
        if seen.insert(c.clone()) {
            pool.push(c);
        }
    }
    let min_cluster = (params.pool_size as f64).sqrt();
    let mut stats = SwayStats { pool: pool.len(), ..Default::default() };
    let mut leaves: Vec<Vec<Configuration>> = Vec::new();
    split(&mut run, pool, min_cluster, 0, &mut rng, &mut stats, &mut leaves)?;
    stats.leaves = leaves.len();
    stats.representative_evaluations = run.used();

    if params.evaluate_leaves {
        for leaf in &leaves {
            if run.exhausted() {
                break;
            }
            run.evaluate(leaf)?;
        }
    }
    Ok((run.into_archive(Algorithm::Sway, params.seed), stats))
}

fn farthest(from: &Configuration, cluster: &[Configuration]) -> usize {
    let mut best = 0;
    let mut best_d = 0;
    for (i, c) in cluster.iter().enumerate() {
        let d = from.hamming(c);
        if d > best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn split<R: Rng>(
    run: &mut Run,
    cluster: Vec<Configuration>,
    min_cluster: f64,
    depth: usize,
    rng: &mut R,
    stats: &mut SwayStats,
    leaves: &mut Vec<Vec<Configuration>>,
) -> Result<()> {
    stats.max_depth = stats.max_depth.max(depth);
    if (cluster.len() as f64) < min_cluster || cluster.len() < 2 || run.exhausted() {
        leaves.push(cluster);
        return Ok(());
    }
    let anchor = &cluster[rng.gen_range(0..cluster.len())];
    let east = farthest(anchor, &cluster);
    let west = farthest(&cluster[east], &cluster);
    let c = cluster[east].hamming(&cluster[west]) as f64;
    if c == 0.0 {
        leaves.push(cluster);
        return Ok(());
    }

    let (east_cfg, west_cfg) = (cluster[east].clone(), cluster[west].clone());
    let mut projected: Vec<(f64, String, Configuration)> = cluster
        .into_iter()
        .map(|x| {
            let a = x.hamming(&east_cfg) as f64;
            let b = x.hamming(&west_cfg) as f64;
            ((a * a + c * c - b * b) / (2.0 * c), x.to_bitstring(), x)
        })
        .collect();
    projected.sort_by(|p, q| p.0.total_cmp(&q.0).then_with(|| p.1.cmp(&q.1)));
    let mid = projected.len() / 2;
    let west_half: Vec<Configuration> = projected.split_off(mid).into_iter().map(|p| p.2).collect();
    let east_half: Vec<Configuration> = projected.into_iter().map(|p| p.2).collect();

    stats.splits += 1;
    let (records, _) = run.evaluate(&[east_cfg, west_cfg])?;
    let east_obj = records[0].as_ref().and_then(|r| run.objectives_of(r));
    let west_obj = records[1].as_ref().and_then(|r| run.objectives_of(r));
    let (keep_east, keep_west) = match (&east_obj, &west_obj) {
        (Some(e), Some(w)) if dominates(e, w) => (true, false),
        (Some(e), Some(w)) if dominates(w, e) => (false, true),
        (Some(_), None) => (true, false),
        (None, Some(_)) => (false, true),
        _ => (true, true),
    };
    if keep_east {
        split(run, east_half, min_cluster, depth + 1, rng, stats, leaves)?;
    }
    if keep_west {
        split(run, west_half, min_cluster, depth + 1, rng, stats, leaves)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_gives_one_front_per_point() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 2.0]];
        assert_eq!(fast_nondominated_sort(&pts), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn identical_points_share_a_front() {
        let pts = vec![vec![3.0, 3.0]; 4];
        assert_eq!(fast_nondominated_sort(&pts), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn crowding_small_fronts_are_infinite() {
        assert_eq!(crowding_distance(&[vec![1.0, 2.0]]), vec![f64::INFINITY]);
        assert_eq!(crowding_distance(&[vec![1.0, 2.0], vec![2.0, 1.0]]), vec![f64::INFINITY; 2]);
    }

    #[test]
    fn crowding_middle_point() {
        let d = crowding_distance(&[vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]]);
        assert_eq!(d[1], 2.0);
        assert!(d[0].is_infinite() && d[2].is_infinite());
    }

    #[test]
    fn crowding_zero_range_column() {
        let d = crowding_distance(&[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]);
        assert!(d.iter().all(|v| !v.is_nan()));
        assert!((d[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        let p = SearchParams { budget: 5, population: 10, ..Default::default() };
        assert!(p.check().is_err());
        let p = SearchParams { crossover_prob: 1.5, ..Default::default() };
        assert!(p.check().is_err());
        assert!(SearchParams::default().check().is_ok());
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("hybrid-rs".parse::<Algorithm>().unwrap(), Algorithm::HybridRs);
        assert_eq!("NSGA2".parse::<Algorithm>().unwrap(), Algorithm::Nsga2);
        assert!("ga".parse::<Algorithm>().is_err());
    }
}
