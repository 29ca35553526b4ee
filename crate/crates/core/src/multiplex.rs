//! Joint choice of sharing schemes and slice sizes once slices may
//! multiplex resources: candidate-set traversal, block coordinate descent,
//! and Pareto-front bookkeeping (the genetic explorer lives in [`crate::ga`]).

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{pool_usage, sharing_label, Allocation, SharingMode};
use crate::orthogonal::{solve_objective_sum, solve_sizes_under, SolveMeta, SolveResult, Weights};
use crate::scenario::Scenario;
use crate::sizing::{floor_sizes, slice_bounds, ties};

/// Candidate-set cap used when the caller does not give one.
pub const DEFAULT_SCHEME_CAP: usize = 64;

/// Ordered, duplicate-free list of sharing assignments; always starts with
/// the all-dedicated one.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCandidateSet {
    schemes: Vec<Vec<SharingMode>>,
    cap: usize,
}

impl SchemeCandidateSet {
    pub fn schemes(&self) -> &[Vec<SharingMode>] {
        &self.schemes
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.schemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
    }

    pub fn label(&self, index: usize) -> String {
        self.schemes.get(index).map_or_else(String::new, |s| sharing_label(s))
    }
}

/// All `2^E` assignments over the sharing-eligible resources in lexicographic
/// order (dedicated before shared, first eligible resource most significant),
/// truncated to `cap`.
pub fn enumerate_candidates(scenario: &Scenario, cap: usize) -> Result<SchemeCandidateSet> {
    if cap == 0 {
        return Err(Error::Domain("candidate cap must be >= 1".into()));
    }
    let eligible = &scenario.sharing_eligible;
    let e = eligible.len();
    let total: u128 = 1u128 << e.min(127);
    let count = (cap as u128).min(total) as usize;
    let schemes = (0..count)
        .map(|code| {
            let mut modes = vec![SharingMode::Dedicated; scenario.n()];
            for (bit, &j) in eligible.iter().enumerate() {
                if (code >> (e - 1 - bit)) & 1 == 1 {
                    modes[j] = SharingMode::Shared;
                }
            }
            modes
        })
        .collect();
    Ok(SchemeCandidateSet { schemes, cap })
}

fn better_total(candidate: &SolveResult, incumbent: &SolveResult) -> bool {
    let (a, b) = (candidate.outcome.total_profit, incumbent.outcome.total_profit);
    !ties(a, b) && a > b
}

/// Runs the exact size solver under every candidate scheme and keeps the
/// most profitable pair; ties go to the earliest scheme.
pub fn solve_exhaustive(scenario: &Scenario, cap: usize) -> Result<SolveResult> {
    let started = Instant::now();
    let candidates = enumerate_candidates(scenario, cap)?;
    let weights = Weights::uniform(scenario.m());
    let results: Vec<Result<SolveResult>> = candidates
        .schemes()
        .par_iter()
        .enumerate()
        .map(|(k, sharing)| solve_sizes_under(scenario, sharing, k, &weights, "exhaustive"))
        .collect();
    let mut best: Option<SolveResult> = None;
    let mut lp_solves = 0;
    for r in results {
        match r {
            Ok(r) => {
                lp_solves += r.meta.iterations;
                if best.as_ref().is_none_or(|b| better_total(&r, b)) {
                    best = Some(r);
                }
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mut best = best.ok_or_else(|| {
        Error::Infeasible("every candidate scheme is infeasible".into())
    })?;
    best.meta = SolveMeta {
        solver: "exhaustive".into(),
        iterations: lp_solves,
        grid_step: None,
        elapsed: started.elapsed(),
    };
    Ok(best)
}

/// Block coordinate descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdResult {
    pub result: SolveResult,
    /// Total profit after each round.
    pub trace: Vec<f64>,
    pub rounds: usize,
    /// A round ended without changing the scheme.
    pub converged: bool,
}

/// Normalized free capacity `sum_j (cap_j - usage_j) / cap_j`.
fn slack(scenario: &Scenario, sharing: &[SharingMode], sizes: &[f64]) -> Result<f64> {
    let scheme = scenario.scheme_with(sharing)?;
    let alloc = Allocation::new(&scenario.slices, &scheme, sizes.to_vec())?;
    let usage = pool_usage(&alloc, &scheme)?;
    Ok(usage
        .iter()
        .zip(scenario.pool.capacity.iter())
        .map(|(u, c)| (c - u) / c)
        .sum())
}

/// Alternates between solving sizes under a fixed scheme and choosing the
/// scheme for fixed sizes, starting from candidate `init` at the lowest
/// deployable sizes.
///
/// At fixed sizes every feasible scheme earns the same profit (expenditure is
/// charged on per-slice resources), so the scheme step breaks profit ties by
/// the most free pool capacity, and keeps the current scheme on a full tie.
pub fn solve_bcd(
    scenario: &Scenario,
    candidates: &SchemeCandidateSet,
    init: usize,
    max_rounds: usize,
) -> Result<BcdResult> {
    let started = Instant::now();
    let schemes = candidates.schemes();
    if init >= schemes.len() {
        return Err(Error::Domain(format!(
            "initial scheme {init} is outside the candidate set of {}",
            schemes.len()
        )));
    }
    let bounds = slice_bounds(&scenario.slices, &scenario.scheme, &scenario.pool)?;
    let mut sizes = floor_sizes(&bounds);
    let mut scheme = init;
    let mut outcome = scenario.evaluate_with(&schemes[scheme], &sizes)?;
    let mut any_feasible = outcome.feasible;
    for sharing in schemes {
        if any_feasible {
            break;
        }
        any_feasible = scenario.evaluate_with(sharing, &sizes)?.feasible;
    }
    if !any_feasible {
        return Err(Error::Infeasible(
            "the initial configuration is infeasible under every candidate scheme".into(),
        ));
    }

    let weights = Weights::uniform(scenario.m());
    let mut trace = Vec::new();
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        rounds += 1;
        // (a) sizes for the fixed scheme
        match solve_sizes_under(scenario, &schemes[scheme], scheme, &weights, "bcd") {
            Ok(r) => {
                let improves =
                    !outcome.feasible || r.outcome.total_profit >= outcome.total_profit;
                if improves {
                    sizes = r.sizes;
                    outcome = r.outcome;
                }
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
        // (b) scheme for the fixed sizes
        let mut chosen = scheme;
        let mut chosen_key = if outcome.feasible {
            Some((outcome.total_profit, slack(scenario, &schemes[scheme], &sizes)?))
        } else {
            None
        };
        for (k, sharing) in schemes.iter().enumerate() {
            if k == scheme {
                continue;
            }
            let out = scenario.evaluate_with(sharing, &sizes)?;
            if !out.feasible {
                continue;
            }
            let key = (out.total_profit, slack(scenario, sharing, &sizes)?);
            let wins = match chosen_key {
                None => true,
                Some((p, s)) => {
                    if ties(key.0, p) {
                        !ties(key.1, s) && key.1 > s
                    } else {
                        key.0 > p
                    }
                }
            };
            if wins {
                chosen = k;
                chosen_key = Some(key);
            }
        }
        let switched = chosen != scheme;
        if switched {
            scheme = chosen;
            outcome = scenario.evaluate_with(&schemes[scheme], &sizes)?;
        }
        trace.push(outcome.total_profit);
        // sizes are optimal for this scheme and the scheme is kept for these
        // sizes, so another round would repeat itself
        if !switched && outcome.feasible {
            converged = true;
            break;
        }
    }
    Ok(BcdResult {
        result: SolveResult {
            sizes,
            sharing: schemes[scheme].clone(),
            scheme_index: scheme,
            outcome,
            meta: SolveMeta {
                solver: "bcd".into(),
                iterations: rounds,
                grid_step: None,
                elapsed: started.elapsed(),
            },
        },
        trace,
        rounds,
        converged,
    })
}

/// Total-profit gain of the best multiplexing scheme over all-dedicated.
pub fn multiplexing_gain(scenario: &Scenario) -> Result<f64> {
    if scenario.sharing_eligible.is_empty() {
        return Ok(0.0);
    }
    let shared = solve_exhaustive(scenario, DEFAULT_SCHEME_CAP)?;
    let dedicated = solve_objective_sum(scenario)?;
    Ok(shared.outcome.total_profit - dedicated.outcome.total_profit)
}

/// One configuration on a Pareto front.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint {
    pub scheme_index: usize,
    pub sizes: Vec<f64>,
    /// Per-slice profits `w`.
    pub profits: Vec<f64>,
}

impl FrontPoint {
    pub fn total(&self) -> f64 {
        self.profits.iter().sum()
    }
}

/// Mutually nondominated points, sorted by the first objective descending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront {
    pub points: Vec<FrontPoint>,
}

impl ParetoFront {
    /// Point with the largest total profit (first one on ties).
    pub fn best_total(&self) -> Option<&FrontPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&FrontPoint>, p| match best {
                Some(b) if b.total() >= p.total() => Some(b),
                _ => Some(p),
            })
    }
}

/// `a` is at least as good as `b` everywhere and strictly better somewhere.
pub(crate) fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

fn front_order(a: &FrontPoint, b: &FrontPoint) -> Ordering {
    for (x, y) in a.profits.iter().zip(&b.profits) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.scheme_index
        .cmp(&b.scheme_index)
        .then_with(|| {
            a.sizes
                .iter()
                .zip(&b.sizes)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

/// Drops every dominated point; of identical profit vectors the first is kept.
pub fn pareto_filter(points: Vec<FrontPoint>) -> Result<ParetoFront> {
    if let Some(first) = points.first() {
        let m = first.profits.len();
        if let Some(bad) = points.iter().find(|p| p.profits.len() != m) {
            return Err(Error::Domain(format!(
                "profit vectors of length {m} and {} cannot be compared",
                bad.profits.len()
            )));
        }
    }
    let mut kept: Vec<FrontPoint> = Vec::new();
    for (k, p) in points.iter().enumerate() {
        let dominated = points.iter().any(|q| dominates(&q.profits, &p.profits));
        let duplicate = points[..k].iter().any(|q| q.profits == p.profits);
        if !dominated && !duplicate {
            kept.push(p.clone());
        }
    }
    kept.sort_by(front_order);
    Ok(ParetoFront { points: kept })
}
