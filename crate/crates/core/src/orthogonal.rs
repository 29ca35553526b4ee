//! Single-operator optimization with orthogonal (all-dedicated) slices:
//! objective-sum and weighted-sum scalarizations, plus the exhaustive grid
//! oracle the test suites check every solver against.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{evaluate_sizes, Outcome, SharingMode};
use crate::scenario::Scenario;
use crate::sizing::optimize_sizes;

/// Default number of grid points the oracle may evaluate.
pub const DEFAULT_ORACLE_BUDGET: u128 = 50_000_000;

/// Positive per-slice importance factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if let Some((i, g)) = g.iter().enumerate().find(|(_, g)| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::Domain(format!("weight g[{i}] = {g} must be finite and > 0")));
        }
        Ok(Weights(g))
    }

    pub fn uniform(m: usize) -> Self {
        Weights(vec![1.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveMeta {
    pub solver: String,
    /// LP solves for the exact solvers, grid points for the oracle,
    /// rounds for BCD, generations for the GA.
    pub iterations: usize,
    /// Grid resolution, for grid-based solvers.
    pub grid_step: Option<f64>,
    pub elapsed: Duration,
}

/// A feasible configuration returned by any solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub sizes: Vec<f64>,
    pub sharing: Vec<SharingMode>,
    /// Position of `sharing` in the candidate enumeration (0 = all dedicated).
    pub scheme_index: usize,
    pub outcome: Outcome,
    pub meta: SolveMeta,
}

fn check_weights(scenario: &Scenario, weights: &Weights) -> Result<()> {
    if weights.0.len() != scenario.m() {
        return Err(Error::Config(format!(
            "{} weights for {} slices",
            weights.0.len(),
            scenario.m()
        )));
    }
    Ok(())
}

pub(crate) fn solve_sizes_under(
    scenario: &Scenario,
    sharing: &[SharingMode],
    scheme_index: usize,
    weights: &Weights,
    solver: &str,
) -> Result<SolveResult> {
    check_weights(scenario, weights)?;
    let started = Instant::now();
    let scheme = scenario.scheme_with(sharing)?;
    let sol = optimize_sizes(&scenario.slices, &scheme, &scenario.pool, weights.as_slice())?;
    Ok(SolveResult {
        sizes: sol.sizes,
        sharing: sharing.to_vec(),
        scheme_index,
        outcome: sol.outcome,
        meta: SolveMeta {
            solver: solver.to_string(),
            iterations: sol.lp_solves,
            grid_step: None,
            elapsed: started.elapsed(),
        },
    })
}

/// Maximizes total profit with every resource dedicated.
pub fn solve_objective_sum(scenario: &Scenario) -> Result<SolveResult> {
    solve_sizes_under(
        scenario,
        &scenario.scheme.sharing,
        0,
        &Weights::uniform(scenario.m()),
        "objective-sum",
    )
}

/// Maximizes `sum_i g_i w_i` with every resource dedicated.
pub fn solve_weighted_sum(scenario: &Scenario, weights: &Weights) -> Result<SolveResult> {
    solve_sizes_under(scenario, &scenario.scheme.sharing, 0, weights, "weighted-sum")
}

/// Per-slice Lipschitz bound of the profit in the size: price plus marginal
/// expenditure.
pub fn lipschitz_bounds(scenario: &Scenario) -> Result<Vec<f64>> {
    scenario
        .slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let per_unit = scenario.scheme.demand(i)?.per_unit(&s.kpi)?;
            let marginal: f64 = per_unit
                .iter()
                .zip(&scenario.pool.unit_cost)
                .map(|(u, c)| u * c)
                .sum();
            Ok(s.price.abs() + marginal)
        })
        .collect()
}

/// `step * sum_i L_i`: how far the best grid point may sit below the optimum.
pub fn grid_tolerance(scenario: &Scenario, step: f64) -> Result<f64> {
    Ok(step * lipschitz_bounds(scenario)?.iter().sum::<f64>())
}

fn axis_upper_bound(scenario: &Scenario, i: usize) -> Result<f64> {
    let spec = &scenario.slices[i];
    let demand = scenario.scheme.demand(i)?;
    let per_unit = demand.per_unit(&spec.kpi)?;
    let implied = per_unit
        .iter()
        .zip(scenario.pool.capacity.iter().zip(demand.overhead.iter()))
        .filter(|(u, _)| **u > 0.0)
        .map(|(u, (cap, b))| ((cap - b) / u).max(0.0))
        .fold(f64::INFINITY, f64::min);
    Ok(if implied.is_finite() {
        spec.customer_size.max(implied)
    } else {
        spec.customer_size
    })
}

/// Objective value, sizes and outcome of a grid point.
type Candidate = (f64, Vec<f64>, Outcome);

/// Exhaustive grid search over the base (all-dedicated) scheme.
pub fn brute_force_oracle(
    scenario: &Scenario,
    grid_step: f64,
    weights: Option<&Weights>,
) -> Result<SolveResult> {
    brute_force_oracle_with(
        scenario,
        &scenario.scheme.sharing,
        grid_step,
        weights,
        DEFAULT_ORACLE_BUDGET,
    )
}

/// Evaluates every point of `{0, h, 2h, ...}^M` (per-axis upper bound
/// `max(c_i, size the pool alone allows)`) and returns the best feasible one.
/// Ties go to the lexicographically smallest size vector.
pub fn brute_force_oracle_with(
    scenario: &Scenario,
    sharing: &[SharingMode],
    grid_step: f64,
    weights: Option<&Weights>,
    budget: u128,
) -> Result<SolveResult> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::Domain(format!("grid step {grid_step} must be > 0")));
    }
    let uniform = Weights::uniform(scenario.m());
    let weights = weights.unwrap_or(&uniform);
    check_weights(scenario, weights)?;
    let started = Instant::now();
    let scheme = scenario.scheme_with(sharing)?;

    let counts = (0..scenario.m())
        .map(|i| Ok((axis_upper_bound(scenario, i)? / grid_step + 1e-9).floor() as u64 + 1))
        .collect::<Result<Vec<u64>>>()?;
    let required = counts.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let g = weights.as_slice();
    let eval = |sizes: &[f64]| -> Result<Option<(f64, Outcome)>> {
        let out = evaluate_sizes(&scenario.slices, &scheme, &scenario.pool, sizes)?;
        Ok(out.feasible.then(|| (out.weighted_total(g), out)))
    };

    // One task per value of the first coordinate; each scans the remaining
    // axes in lexicographic order and keeps strict improvements only, so the
    // ordered reduction below reproduces a sequential scan exactly.
    let rest = &counts[1..];
    let partial: Vec<Result<Option<Candidate>>> = (0..counts[0])
        .into_par_iter()
        .map(|first| {
            let mut idx = vec![0u64; rest.len()];
            let mut sizes = vec![0.0; counts.len()];
            sizes[0] = first as f64 * grid_step;
            let mut best: Option<Candidate> = None;
            loop {
                for (s, &k) in sizes[1..].iter_mut().zip(&idx) {
                    *s = k as f64 * grid_step;
                }
                if let Some((v, out)) = eval(&sizes)? {
                    if best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
                        best = Some((v, sizes.clone(), out));
                    }
                }
                // odometer, last axis fastest
                let mut axis = rest.len();
                loop {
                    if axis == 0 {
                        return Ok(best);
                    }
                    axis -= 1;
                    idx[axis] += 1;
                    if idx[axis] < rest[axis] {
                        break;
                    }
                    idx[axis] = 0;
                }
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>, Outcome)> = None;
    for part in partial {
        if let Some((v, s, o)) = part? {
            if best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
                best = Some((v, s, o));
            }
        }
    }
    let (_, sizes, outcome) = best.ok_or_else(|| {
        Error::Infeasible("no grid point satisfies the pool capacities and reservations".into())
    })?;
    Ok(SolveResult {
        sizes,
        sharing: sharing.to_vec(),
        scheme_index: 0,
        outcome,
        meta: SolveMeta {
            solver: "oracle".into(),
            iterations: required as usize,
            grid_step: Some(grid_step),
            elapsed: started.elapsed(),
        },
    })
}
