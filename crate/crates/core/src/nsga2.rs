//! NSGA-II over mixed continuous/integer boxes.
//!
//! Used standalone and as the bounding solver of the branch-and-bound tree,
//! which narrows the integer box through `integer_override`.

use std::cmp::Ordering;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::pareto::{
    constrained_dominates, dominates_unchecked, pareto_filter, ParetoArchive, Solution,
    VariableVector,
};
use crate::problems::{EvalScratch, IntegerBox, ProblemSpec};

const SBX_EPS: f64 = 1e-14;

/// NSGA-II parameters. Defaults follow the fixed operator settings of the
/// benchmark protocol (pc = 0.9, pm = 0.95, eta_c = 100, eta_m = 10).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Nsga2Config {
    pub population_size: usize,
    pub max_generations: usize,
    /// Stop after this many consecutive generations with an unchanged first front.
    pub stall_generations: usize,
    pub crossover_probability: f64,
    /// Per-individual mutation intensity; each free gene mutates with
    /// probability `mutation_probability / free_genes`.
    pub mutation_probability: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub seed: u64,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 100,
            stall_generations: 100,
            crossover_probability: 0.9,
            mutation_probability: 0.95,
            eta_c: 100.0,
            eta_m: 10.0,
            seed: 0,
        }
    }
}

impl Nsga2Config {
    /// Population, generation cap and stall window; operator settings default.
    pub fn sized(population_size: usize, max_generations: usize, stall_generations: usize) -> Self {
        Self {
            population_size,
            max_generations,
            stall_generations,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || !self.population_size.is_multiple_of(2) {
            return usage(format!(
                "population_size must be positive and even, got {}",
                self.population_size
            ));
        }
        if self.max_generations == 0 {
            return usage("max_generations must be positive");
        }
        if self.stall_generations == 0 || self.stall_generations > self.max_generations {
            return usage(format!(
                "stall_generations must lie in [1, max_generations = {}], got {}",
                self.max_generations, self.stall_generations
            ));
        }
        for (name, p) in [
            ("crossover_probability", self.crossover_probability),
            ("mutation_probability", self.mutation_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return usage(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return usage("distribution indices must be positive");
        }
        Ok(())
    }
}

/// The box an NSGA-II run searches: continuous bounds and integer-code bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBox {
    pub continuous: Vec<(f64, f64)>,
    pub integer: IntegerBox,
}

impl SearchBox {
    /// The problem's box, optionally with narrowed integer bounds.
    pub fn new(problem: &ProblemSpec, integer_override: Option<&[(i64, i64)]>) -> Result<Self> {
        let full = problem.integer_box();
        let integer = match integer_override {
            None => full,
            Some(bounds) => {
                if bounds.len() != full.len() {
                    return usage("integer override must cover every integer variable");
                }
                for (&(lo, hi), &(flo, fhi)) in bounds.iter().zip(&full) {
                    if lo > hi || lo < flo || hi > fhi {
                        return usage(format!(
                            "integer override [{lo}, {hi}] is not inside [{flo}, {fhi}]"
                        ));
                    }
                }
                bounds.to_vec()
            }
        };
        Ok(Self {
            continuous: problem.continuous.clone(),
            integer,
        })
    }

    pub fn contains(&self, v: &VariableVector) -> bool {
        v.continuous.len() == self.continuous.len()
            && v.integer.len() == self.integer.len()
            && v.continuous
                .iter()
                .zip(&self.continuous)
                .all(|(x, &(lo, hi))| lo <= *x && *x <= hi)
            && v.integer
                .iter()
                .zip(&self.integer)
                .all(|(y, &(lo, hi))| lo <= *y && *y <= hi)
    }

    /// Genes whose range is not a single value.
    pub fn free_genes(&self) -> usize {
        self.continuous.iter().filter(|(lo, hi)| lo < hi).count()
            + self.integer.iter().filter(|(lo, hi)| lo < hi).count()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VariableVector {
        let continuous = self
            .continuous
            .iter()
            .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
            .collect();
        let integer = self
            .integer
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
            .collect();
        VariableVector::new(continuous, integer)
    }
}

/// Outcome of one NSGA-II run.
#[derive(Clone, Debug)]
pub struct Nsga2Outcome {
    /// Non-dominated members of the final first front.
    pub archive: ParetoArchive,
    pub generations: usize,
    /// False when no feasible point was found; the archive then holds the
    /// least-violation points.
    pub feasible: bool,
}

/// Partitions `pop` into fronts of constrained non-domination.
///
/// Fronts hold indices into `pop`; identical points share a front.
pub fn non_dominated_sort(pop: &[Solution]) -> Vec<Vec<usize>> {
    if pop.first().is_some_and(|s| s.objectives.len() == 2) {
        return fronts_from_ranks(&two_objective_ranks(pop));
    }
    pairwise_sort(pop)
}

fn fronts_from_ranks(ranks: &[usize]) -> Vec<Vec<usize>> {
    let count = ranks.iter().max().map_or(0, |r| r + 1);
    let mut fronts = vec![Vec::new(); count];
    for (i, &r) in ranks.iter().enumerate() {
        fronts[r].push(i);
    }
    fronts
}

/// Constrained-dominance ranks for two objectives in `O(n log n)`.
///
/// Feasible points are swept in `(f1, f2)` order; a point joins the first
/// front whose latest member does not dominate it. Infeasible points follow,
/// one front per distinct violation.
fn two_objective_ranks(pop: &[Solution]) -> Vec<usize> {
    // Adding 0.0 maps -0.0 to 0.0 so the order agrees with `<` comparisons.
    let mut feasible: Vec<(f64, f64, usize)> = pop
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_feasible())
        .map(|(i, s)| (s.objectives[0] + 0.0, s.objectives[1] + 0.0, i))
        .collect();
    feasible.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut ranks = vec![0usize; pop.len()];
    let mut latest: Vec<usize> = Vec::new();
    for &(_, _, i) in &feasible {
        let p = &pop[i].objectives;
        let r = latest.partition_point(|&l| dominates_unchecked(&pop[l].objectives, p));
        if r == latest.len() {
            latest.push(i);
        } else {
            latest[r] = i;
        }
        ranks[i] = r;
    }
    let offset = latest.len();
    let mut violations: Vec<f64> = pop
        .iter()
        .filter(|s| !s.is_feasible())
        .map(|s| s.violation)
        .collect();
    violations.sort_by(f64::total_cmp);
    violations.dedup();
    for (i, s) in pop.iter().enumerate() {
        if !s.is_feasible() {
            ranks[i] = offset + violations.partition_point(|&v| v < s.violation);
        }
    }
    ranks
}

/// Deb's fast non-dominated sort for any number of objectives.
fn pairwise_sort(pop: &[Solution]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if constrained_dominates(&pop[i], &pop[j]) {
                dominates[i].push(j);
                dominated_by_count[j] += 1;
            } else if constrained_dominates(&pop[j], &pop[i]) {
                dominates[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn objective_order(pop: &[Solution], m: usize, a: usize, b: usize) -> Ordering {
    let (fa, fb) = (&pop[a].objectives, &pop[b].objectives);
    fa[m].total_cmp(&fb[m]).then_with(|| {
        fa.iter()
            .zip(fb.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Crowding distance of the members of `front` (indices into `pop`).
fn crowding_of(pop: &[Solution], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let p = pop[front[0]].objectives.len();
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..p {
        order.sort_by(|&a, &b| objective_order(pop, m, front[a], front[b]));
        let lo = pop[front[order[0]]].objectives[m];
        let hi = pop[front[order[n - 1]]].objectives[m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range > 0.0 {
            for k in 1..n - 1 {
                let gap =
                    pop[front[order[k + 1]]].objectives[m] - pop[front[order[k - 1]]].objectives[m];
                dist[order[k]] += gap / range;
            }
        }
    }
    dist
}

/// Crowding distance of every solution of a front: boundary points per
/// objective get infinity, interior points sum normalized neighbour gaps.
pub fn crowding_distance(front: &[Solution]) -> Vec<f64> {
    let idx: Vec<usize> = (0..front.len()).collect();
    crowding_of(front, &idx)
}

/// Simulated binary crossover. Integer genes are recombined as reals, then
/// rounded half-to-even and clamped.
pub fn sbx_crossover<R: Rng + ?Sized>(
    a: &VariableVector,
    b: &VariableVector,
    bounds: &SearchBox,
    cfg: &Nsga2Config,
    rng: &mut R,
) -> (VariableVector, VariableVector) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    if rng.gen::<f64>() >= cfg.crossover_probability {
        return (c1, c2);
    }
    for (i, &(lo, hi)) in bounds.continuous.iter().enumerate() {
        if let Some((x, y)) = sbx_gene(a.continuous[i], b.continuous[i], lo, hi, cfg.eta_c, rng) {
            c1.continuous[i] = x;
            c2.continuous[i] = y;
        }
    }
    for (i, &(lo, hi)) in bounds.integer.iter().enumerate() {
        let (ya, yb) = (a.integer[i] as f64, b.integer[i] as f64);
        if let Some((x, y)) = sbx_gene(ya, yb, lo as f64, hi as f64, cfg.eta_c, rng) {
            c1.integer[i] = (x.round_ties_even() as i64).clamp(lo, hi);
            c2.integer[i] = (y.round_ties_even() as i64).clamp(lo, hi);
        }
    }
    (c1, c2)
}

/// Bounded SBX on one gene; `None` leaves both parents' values in place.
fn sbx_gene<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    eta: f64,
    rng: &mut R,
) -> Option<(f64, f64)> {
    if rng.gen::<f64>() > 0.5 || (a - b).abs() <= SBX_EPS || hi <= lo {
        return None;
    }
    let (y1, y2) = if a < b { (a, b) } else { (b, a) };
    let u: f64 = rng.gen();
    let spread = y2 - y1;
    let exponent = 1.0 / (eta + 1.0);
    let betaq = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(exponent)
        } else {
            (1.0 / (2.0 - u * alpha)).powf(exponent)
        }
    };
    let bq1 = betaq(1.0 + 2.0 * (y1 - lo) / spread);
    let bq2 = betaq(1.0 + 2.0 * (hi - y2) / spread);
    let x1 = (0.5 * ((y1 + y2) - bq1 * spread)).clamp(lo, hi);
    let x2 = (0.5 * ((y1 + y2) + bq2 * spread)).clamp(lo, hi);
    if rng.gen::<f64>() <= 0.5 {
        Some((x2, x1))
    } else {
        Some((x1, x2))
    }
}

/// Polynomial mutation on continuous genes, uniform resampling on integer
/// genes. Each free gene mutates with probability
/// `mutation_probability / free_genes`.
pub fn mutate<R: Rng + ?Sized>(
    v: &VariableVector,
    bounds: &SearchBox,
    cfg: &Nsga2Config,
    rng: &mut R,
) -> VariableVector {
    let mut out = v.clone();
    let free = bounds.free_genes();
    if free == 0 || cfg.mutation_probability <= 0.0 {
        return out;
    }
    let rate = cfg.mutation_probability / free as f64;
    for (x, &(lo, hi)) in out.continuous.iter_mut().zip(&bounds.continuous) {
        if hi > lo && rng.gen::<f64>() < rate {
            *x = polynomial_mutation(*x, lo, hi, cfg.eta_m, rng);
        }
    }
    for (y, &(lo, hi)) in out.integer.iter_mut().zip(&bounds.integer) {
        if hi > lo && rng.gen::<f64>() < rate {
            *y = rng.gen_range(lo..=hi);
        }
    }
    out
}

fn polynomial_mutation<R: Rng + ?Sized>(y: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> f64 {
    let span = hi - lo;
    let d1 = (y - lo) / span;
    let d2 = (hi - y) / span;
    let u: f64 = rng.gen();
    let pow = 1.0 / (eta + 1.0);
    let deltaq = if u <= 0.5 {
        let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (y + deltaq * span).clamp(lo, hi)
}

struct Population {
    individuals: Vec<Solution>,
    rank: Vec<usize>,
    crowding: Vec<f64>,
}

impl Population {
    fn tournament<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.individuals.len();
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        match self.rank[a].cmp(&self.rank[b]) {
            Ordering::Less => a,
            Ordering::Greater => b,
            Ordering::Equal => match self.crowding[a].partial_cmp(&self.crowding[b]) {
                Some(Ordering::Greater) => a,
                Some(Ordering::Less) => b,
                _ => {
                    if rng.gen::<bool>() {
                        a
                    } else {
                        b
                    }
                }
            },
        }
    }

    /// Bit patterns of the first front's objective vectors, sorted.
    fn first_front_key(&self) -> Vec<Vec<u64>> {
        let mut key: Vec<Vec<u64>> = self
            .individuals
            .iter()
            .zip(&self.rank)
            .filter(|(_, &r)| r == 0)
            .map(|(s, _)| s.objectives.iter().map(|f| f.to_bits()).collect())
            .collect();
        key.sort_unstable();
        key
    }
}

/// Elitist environmental selection of `n` survivors from `combined`.
fn select(combined: Vec<Solution>, n: usize) -> Population {
    let fronts = non_dominated_sort(&combined);
    let mut chosen: Vec<(usize, usize, f64)> = Vec::with_capacity(n);
    for (rank, front) in fronts.iter().enumerate() {
        if chosen.len() >= n {
            break;
        }
        let crowd = crowding_of(&combined, front);
        let room = n - chosen.len();
        if front.len() <= room {
            chosen.extend(front.iter().zip(&crowd).map(|(&i, &d)| (i, rank, d)));
        } else {
            let mut order: Vec<usize> = (0..front.len()).collect();
            // Larger crowding first; stable sort keeps index order on ties.
            order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]));
            chosen.extend(order[..room].iter().map(|&k| (front[k], rank, crowd[k])));
        }
    }
    let mut slots: Vec<Option<Solution>> = combined.into_iter().map(Some).collect();
    let mut pop = Population {
        individuals: Vec::with_capacity(n),
        rank: Vec::with_capacity(n),
        crowding: Vec::with_capacity(n),
    };
    for (i, rank, d) in chosen {
        pop.individuals
            .push(slots[i].take().expect("each index is chosen once"));
        pop.rank.push(rank);
        pop.crowding.push(d);
    }
    pop
}

fn evaluate_all(problem: &ProblemSpec, vars: Vec<VariableVector>) -> Result<Vec<Solution>> {
    let mut scratch = EvalScratch::new(problem);
    vars.into_iter()
        .map(|v| problem.evaluate_with(&mut scratch, v))
        .collect()
}

/// Runs NSGA-II on `problem`, optionally restricted to a narrower integer box.
///
/// Spends exactly `population_size * (1 + generations)` evaluations.
pub fn run_nsga2(
    problem: &ProblemSpec,
    integer_override: Option<&[(i64, i64)]>,
    cfg: &Nsga2Config,
) -> Result<Nsga2Outcome> {
    cfg.validate()?;
    let bounds = SearchBox::new(problem, integer_override)?;
    if bounds.free_genes() == 0 {
        return fixed_point_run(problem, &bounds, cfg);
    }
    evolve(problem, &bounds, cfg)
}

/// Shortcut for a box holding a single point. Every individual is that
/// point, so the first front never changes and the full loop would stop
/// after exactly `stall_generations` generations with the same outcome.
fn fixed_point_run(
    problem: &ProblemSpec,
    bounds: &SearchBox,
    cfg: &Nsga2Config,
) -> Result<Nsga2Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let point = problem.evaluate_unchecked(&bounds.sample(&mut rng))?;
    let generations = cfg.stall_generations;
    Ok(Nsga2Outcome {
        feasible: point.is_feasible(),
        archive: ParetoArchive {
            members: vec![point],
            evaluation_count: (cfg.population_size * (1 + generations)) as u64,
        },
        generations,
    })
}

fn evolve(problem: &ProblemSpec, bounds: &SearchBox, cfg: &Nsga2Config) -> Result<Nsga2Outcome> {
    let n = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let initial: Vec<VariableVector> = (0..n).map(|_| bounds.sample(&mut rng)).collect();
    let mut pop = select(evaluate_all(problem, initial)?, n);
    let mut evaluations = n as u64;
    let mut previous = pop.first_front_key();
    let mut stall = 0;
    let mut generations = 0;

    while generations < cfg.max_generations {
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let a = &pop.individuals[pop.tournament(&mut rng)].vars;
            let b = &pop.individuals[pop.tournament(&mut rng)].vars;
            let (c1, c2) = sbx_crossover(a, b, bounds, cfg, &mut rng);
            children.push(mutate(&c1, bounds, cfg, &mut rng));
            children.push(mutate(&c2, bounds, cfg, &mut rng));
        }
        let offspring = evaluate_all(problem, children)?;
        evaluations += n as u64;
        generations += 1;

        let mut combined = std::mem::take(&mut pop.individuals);
        combined.extend(offspring);
        pop = select(combined, n);

        let key = pop.first_front_key();
        if key == previous {
            stall += 1;
        } else {
            stall = 0;
            previous = key;
        }
        if stall >= cfg.stall_generations {
            break;
        }
    }

    let first: Vec<Solution> = pop
        .individuals
        .into_iter()
        .zip(pop.rank)
        .filter(|(_, r)| *r == 0)
        .map(|(s, _)| s)
        .collect();
    let feasible = first.iter().any(Solution::is_feasible);
    Ok(Nsga2Outcome {
        archive: ParetoArchive {
            members: pareto_filter(&first),
            evaluation_count: evaluations,
        },
        generations,
        feasible,
    })
}
