//! Genetic exploration of the per-slice profit front over (scheme, sizes).
//!
//! Nondominated sorting with crowding distance, binary tournaments, uniform
//! crossover, Gaussian size mutation and uniform scheme re-draws. Every
//! random draw comes from a ChaCha stream keyed by (seed, generation, pair),
//! so evaluating offspring in parallel cannot change the result.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{evaluate_sizes, ResourcePool, SliceSpec, VnfScheme};
use crate::multiplex::{
    enumerate_candidates, pareto_filter, FrontPoint, ParetoFront, DEFAULT_SCHEME_CAP,
};
use crate::scenario::Scenario;
use crate::sizing::{floor_sizes, slice_bounds};

const REPAIR_STEPS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct GaParams {
    /// Even, at least 4.
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene probability.
    pub mutation_rate: f64,
    pub tournament: usize,
    pub seed: u64,
    pub scheme_cap: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 40,
            generations: 100,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament: 2,
            seed: 0,
            scheme_cap: DEFAULT_SCHEME_CAP,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "population {} must be even and >= 4",
                self.population
            )));
        }
        for (name, rate) in [("crossover", self.crossover_rate), ("mutation", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Domain(format!("{name} rate {rate} must lie in [0, 1]")));
            }
        }
        if self.tournament == 0 {
            return Err(Error::Domain("tournament size must be >= 1".into()));
        }
        if self.scheme_cap == 0 {
            return Err(Error::Domain("scheme cap must be >= 1".into()));
        }
        Ok(())
    }
}

fn stream(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

#[derive(Debug, Clone)]
struct Individual {
    scheme: usize,
    sizes: Vec<f64>,
    profits: Vec<f64>,
}

struct Problem<'a> {
    specs: &'a [SliceSpec],
    pool: &'a ResourcePool,
    schemes: Vec<VnfScheme>,
    floor: Vec<f64>,
    upper: Vec<f64>,
    sigma: Vec<f64>,
    /// Schemes under which the floor point is feasible.
    viable: Vec<bool>,
}

impl Problem<'_> {
    fn feasible(&self, scheme: usize, sizes: &[f64]) -> Result<bool> {
        Ok(evaluate_sizes(self.specs, &self.schemes[scheme], self.pool, sizes)?.feasible)
    }

    /// Moves infeasible sizes toward the floor point along a straight line
    /// until they fit, then evaluates.
    fn repair(&self, mut scheme: usize, sizes: Vec<f64>) -> Result<Individual> {
        if !self.viable[scheme] {
            scheme = self.viable.iter().position(|v| *v).expect("checked before the run");
        }
        let at = |t: f64| -> Vec<f64> {
            self.floor
                .iter()
                .zip(&sizes)
                .map(|(f, s)| f + t * (s - f))
                .collect()
        };
        let mut sizes = sizes.clone();
        if !self.feasible(scheme, &sizes)? {
            let (mut ok, mut bad) = (0.0, 1.0);
            for _ in 0..REPAIR_STEPS {
                let mid = 0.5 * (ok + bad);
                if self.feasible(scheme, &at(mid))? {
                    ok = mid;
                } else {
                    bad = mid;
                }
            }
            sizes = at(ok);
        }
        let out = evaluate_sizes(self.specs, &self.schemes[scheme], self.pool, &sizes)?;
        debug_assert!(out.feasible);
        Ok(Individual {
            scheme,
            sizes,
            profits: out.profits,
        })
    }
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Front index per individual (0 = nondominated).
fn nondominated_ranks(pop: &[Individual]) -> Vec<usize> {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in 0..n {
            if p != q && dominates(&pop[p].profits, &pop[q].profits) {
                dominates_list[p].push(q);
                dominated_by[q] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&p| dominated_by[p] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            rank[p] = level;
            for &q in &dominates_list[p] {
                dominated_by[q] -= 1;
                if dominated_by[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        current = next;
        level += 1;
    }
    rank
}

fn crowding(pop: &[Individual], members: &[usize]) -> Vec<f64> {
    let mut dist = vec![0.0; members.len()];
    if members.len() <= 2 {
        return vec![f64::INFINITY; members.len()];
    }
    let m = pop[members[0]].profits.len();
    for obj in 0..m {
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by(|&a, &b| {
            pop[members[a]].profits[obj]
                .total_cmp(&pop[members[b]].profits[obj])
                .then(a.cmp(&b))
        });
        let lo = pop[members[order[0]]].profits[obj];
        let hi = pop[members[*order.last().unwrap()]].profits[obj];
        dist[order[0]] = f64::INFINITY;
        dist[*order.last().unwrap()] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let prev = pop[members[order[w - 1]]].profits[obj];
            let next = pop[members[order[w + 1]]].profits[obj];
            dist[order[w]] += (next - prev) / span;
        }
    }
    dist
}

/// Rank and crowding distance for the whole population.
fn fitness(pop: &[Individual]) -> (Vec<usize>, Vec<f64>) {
    let rank = nondominated_ranks(pop);
    let mut crowd = vec![0.0; pop.len()];
    let max_rank = rank.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..pop.len()).filter(|&i| rank[i] == r).collect();
        for (k, d) in members.iter().zip(crowding(pop, &members)) {
            crowd[*k] = d;
        }
    }
    (rank, crowd)
}

fn crowded_order(rank: &[usize], crowd: &[f64], a: usize, b: usize) -> Ordering {
    rank[a]
        .cmp(&rank[b])
        .then_with(|| crowd[b].total_cmp(&crowd[a]))
        .then(a.cmp(&b))
}

fn tournament(rng: &mut ChaCha8Rng, size: usize, rank: &[usize], crowd: &[f64]) -> usize {
    let n = rank.len();
    let mut best = rng.random_range(0..n);
    for _ in 1..size {
        let c = rng.random_range(0..n);
        if crowded_order(rank, crowd, c, best) == Ordering::Less {
            best = c;
        }
    }
    best
}

/// Evolves `params.population` individuals for `params.generations`
/// generations and returns the nondominated set of the final population.
pub fn solve_ga(scenario: &Scenario, params: &GaParams) -> Result<ParetoFront> {
    params.validate()?;
    let candidates = enumerate_candidates(scenario, params.scheme_cap)?;
    let schemes = candidates
        .schemes()
        .iter()
        .map(|s| scenario.scheme_with(s))
        .collect::<Result<Vec<_>>>()?;
    let bounds = slice_bounds(&scenario.slices, &scenario.scheme, &scenario.pool)?;
    let floor = floor_sizes(&bounds);
    let upper: Vec<f64> = bounds.iter().map(|b| b.hi).collect();
    let sigma = floor.iter().zip(&upper).map(|(f, u)| 0.1 * (u - f)).collect();
    let viable = schemes
        .iter()
        .map(|s| Ok(evaluate_sizes(&scenario.slices, s, &scenario.pool, &floor)?.feasible))
        .collect::<Result<Vec<bool>>>()?;
    if !viable.iter().any(|v| *v) {
        return Err(Error::Infeasible(
            "reservations cannot be met under any candidate scheme".into(),
        ));
    }
    let problem = Problem {
        specs: &scenario.slices,
        pool: &scenario.pool,
        schemes,
        floor,
        upper,
        sigma,
        viable,
    };
    let n_schemes = problem.schemes.len();

    let draws: Vec<(usize, Vec<f64>)> = (0..params.population)
        .map(|k| {
            let mut rng = stream(params.seed, 0, k);
            let scheme = rng.random_range(0..n_schemes);
            let sizes = problem
                .floor
                .iter()
                .zip(&problem.upper)
                .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect();
            (scheme, sizes)
        })
        .collect();
    let mut pop = draws
        .into_par_iter()
        .map(|(scheme, sizes)| problem.repair(scheme, sizes))
        .collect::<Result<Vec<_>>>()?;

    for generation in 1..=params.generations {
        let (rank, crowd) = fitness(&pop);
        let children: Vec<(usize, Vec<f64>)> = (0..params.population / 2)
            .flat_map(|pair| {
                let mut rng = stream(params.seed, generation, pair);
                let a = &pop[tournament(&mut rng, params.tournament, &rank, &crowd)];
                let b = &pop[tournament(&mut rng, params.tournament, &rank, &crowd)];
                let (mut c1, mut c2) = ((a.scheme, a.sizes.clone()), (b.scheme, b.sizes.clone()));
                if rng.random::<f64>() < params.crossover_rate {
                    if rng.random::<f64>() < 0.5 {
                        std::mem::swap(&mut c1.0, &mut c2.0);
                    }
                    for g in 0..c1.1.len() {
                        if rng.random::<f64>() < 0.5 {
                            std::mem::swap(&mut c1.1[g], &mut c2.1[g]);
                        }
                    }
                }
                for child in [&mut c1, &mut c2] {
                    for g in 0..child.1.len() {
                        if rng.random::<f64>() < params.mutation_rate && problem.sigma[g] > 0.0 {
                            let noise = Normal::new(0.0, problem.sigma[g])
                                .expect("sigma is positive")
                                .sample(&mut rng);
                            child.1[g] = (child.1[g] + noise).clamp(problem.floor[g], problem.upper[g]);
                        }
                    }
                    if rng.random::<f64>() < params.mutation_rate {
                        child.0 = rng.random_range(0..n_schemes);
                    }
                }
                [c1, c2]
            })
            .collect();
        let offspring = children
            .into_par_iter()
            .map(|(scheme, sizes)| problem.repair(scheme, sizes))
            .collect::<Result<Vec<_>>>()?;

        let mut merged = pop;
        merged.extend(offspring);
        let (rank, crowd) = fitness(&merged);
        let mut order: Vec<usize> = (0..merged.len()).collect();
        order.sort_by(|&a, &b| crowded_order(&rank, &crowd, a, b));
        order.truncate(params.population);
        order.sort_unstable();
        pop = order.into_iter().map(|i| merged[i].clone()).collect();
    }

    let points = pop
        .into_iter()
        .map(|ind| FrontPoint {
            scheme_index: ind.scheme,
            sizes: ind.sizes,
            profits: ind.profits,
        })
        .collect();
    pareto_filter(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{s2m, single_slice};

    fn quick(seed: u64) -> GaParams {
        GaParams {
            generations: 30,
            seed,
            ..GaParams::default()
        }
    }

    #[test]
    fn params_are_validated() {
        let bad = [
            GaParams { population: 5, ..GaParams::default() },
            GaParams { population: 2, ..GaParams::default() },
            GaParams { crossover_rate: 1.5, ..GaParams::default() },
            GaParams { mutation_rate: -0.1, ..GaParams::default() },
            GaParams { tournament: 0, ..GaParams::default() },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(Error::Domain(_))), "{p:?}");
        }
        assert!(GaParams::default().validate().is_ok());
    }

    #[test]
    fn same_seed_same_front() {
        let a = solve_ga(&s2m(), &quick(3)).unwrap();
        let b = solve_ga(&s2m(), &quick(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn front_points_are_feasible_and_nondominated() {
        let s = s2m();
        let c = enumerate_candidates(&s, DEFAULT_SCHEME_CAP).unwrap();
        let front = solve_ga(&s, &quick(1)).unwrap();
        assert!(!front.points.is_empty());
        for p in &front.points {
            let out = s.evaluate_with(&c.schemes()[p.scheme_index], &p.sizes).unwrap();
            assert!(out.feasible);
            assert_eq!(out.profits, p.profits);
        }
        for p in &front.points {
            for q in &front.points {
                assert!(!dominates(&p.profits, &q.profits));
            }
        }
        assert_eq!(pareto_filter(front.points.clone()).unwrap(), front);
    }

    #[test]
    fn single_slice_front_is_one_point_near_the_optimum() {
        let s = single_slice();
        let front = solve_ga(&s, &quick(0)).unwrap();
        assert_eq!(front.points.len(), 1);
        let exact = crate::orthogonal::solve_objective_sum(&s).unwrap().outcome.total_profit;
        assert!((front.points[0].total() - exact).abs() <= 0.01 * exact.abs());
    }
}
