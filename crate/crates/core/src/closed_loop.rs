//! Configuration-dependent KPI requirements, solved by damped fixed-point
//! iteration around an inner solver.

use crate::error::{Error, Result};
use crate::multiplex::{enumerate_candidates, solve_bcd, solve_exhaustive};
use crate::orthogonal::{solve_objective_sum, SolveResult};
use crate::scenario::Scenario;

/// Size-driven KPI inflation:
/// `K[i][l] = K0[i][l] * (1 + sum_i' gamma[i][l][i'] * s_i')`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    baseline: Vec<Vec<f64>>,
    gamma: Vec<Vec<Vec<f64>>>,
    damping: f64,
    tol: f64,
    max_iter: usize,
}

impl EnvironmentModel {
    /// `gamma` is indexed `[slice][kpi][source slice]`.
    pub fn new(
        baseline: Vec<Vec<f64>>,
        gamma: Vec<Vec<Vec<f64>>>,
        damping: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        let m = baseline.len();
        if m == 0 {
            return Err(Error::Domain("baseline KPI matrix has no rows".into()));
        }
        let l = baseline[0].len();
        for (i, row) in baseline.iter().enumerate() {
            if row.len() != l {
                return Err(Error::Domain(format!(
                    "baseline row {i} has {} entries, expected {l}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Domain(format!("baseline row {i} must be finite and >= 0")));
            }
        }
        if gamma.len() != m || gamma.iter().any(|g| g.len() != l || g.iter().any(|x| x.len() != m)) {
            return Err(Error::Domain(format!("coupling tensor must be {m} x {l} x {m}")));
        }
        for (i, per_kpi) in gamma.iter().enumerate() {
            for per_from in per_kpi {
                if per_from.iter().any(|g| !g.is_finite() || *g < 0.0) {
                    return Err(Error::Domain(format!("coupling of slice {i} must be finite and >= 0")));
                }
                if per_from[i] != 0.0 {
                    return Err(Error::Domain(format!("slice {i} cannot couple to itself")));
                }
            }
        }
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(Error::Domain(format!("damping {damping} must lie in (0, 1]")));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Domain(format!("tolerance {tol} must be > 0")));
        }
        if max_iter == 0 {
            return Err(Error::Domain("max_iter must be >= 1".into()));
        }
        Ok(EnvironmentModel {
            baseline,
            gamma,
            damping,
            tol,
            max_iter,
        })
    }

    /// No coupling; the closed loop reduces to a single open-loop solve.
    pub fn uncoupled(baseline: Vec<Vec<f64>>) -> Result<Self> {
        let m = baseline.len();
        let l = baseline.first().map_or(0, Vec::len);
        EnvironmentModel::new(baseline, vec![vec![vec![0.0; m]; l]; m], 1.0, 1e-9, 1)
    }

    pub fn baseline(&self) -> &[Vec<f64>] {
        &self.baseline
    }

    pub fn coupling(&self) -> &[Vec<Vec<f64>>] {
        &self.gamma
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn with_damping(mut self, damping: f64) -> Result<Self> {
        self.damping = damping;
        EnvironmentModel::new(self.baseline, self.gamma, self.damping, self.tol, self.max_iter)
    }

    pub fn with_limits(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        self.tol = tol;
        self.max_iter = max_iter;
        EnvironmentModel::new(self.baseline, self.gamma, self.damping, self.tol, self.max_iter)
    }
}

/// KPI matrix the environment imposes on the given sizes.
pub fn environment_response(env: &EnvironmentModel, sizes: &[f64]) -> Result<Vec<Vec<f64>>> {
    if sizes.len() != env.baseline.len() {
        return Err(Error::Config(format!(
            "{} sizes for {} slices",
            sizes.len(),
            env.baseline.len()
        )));
    }
    Ok(env
        .baseline
        .iter()
        .zip(&env.gamma)
        .map(|(row, per_kpi)| {
            row.iter()
                .zip(per_kpi)
                .map(|(k0, g)| {
                    let inflation: f64 = g.iter().zip(sizes).map(|(g, s)| g * s).sum();
                    k0 * (1.0 + inflation)
                })
                .collect()
        })
        .collect())
}

/// Relative max-norm `max |a - b| / max(1, |b|)`.
pub fn residual(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::Config("residual of matrices with different shapes".into()));
    }
    Ok(a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y))
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max))
}

/// Solver run at every fixed-point iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    ObjectiveSum,
    Exhaustive { cap: usize },
    Bcd { cap: usize, max_rounds: usize },
}

impl InnerSolver {
    pub fn solve(&self, scenario: &Scenario) -> Result<SolveResult> {
        match *self {
            InnerSolver::ObjectiveSum => solve_objective_sum(scenario),
            InnerSolver::Exhaustive { cap } => solve_exhaustive(scenario, cap),
            InnerSolver::Bcd { cap, max_rounds } => {
                let candidates = enumerate_candidates(scenario, cap)?;
                Ok(solve_bcd(scenario, &candidates, 0, max_rounds)?.result)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InnerSolver::ObjectiveSum => "objective-sum",
            InnerSolver::Exhaustive { .. } => "exhaustive",
            InnerSolver::Bcd { .. } => "bcd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopResult {
    /// Last inner solution.
    pub result: SolveResult,
    /// KPI matrix the last inner solve was run with.
    pub kpi: Vec<Vec<f64>>,
    /// Residual measured after each iteration.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs the loop with the scenario's own environment block.
pub fn solve_closed_loop(scenario: &Scenario, inner: InnerSolver) -> Result<ClosedLoopResult> {
    let env = scenario
        .environment
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario `{}` has no environment block", scenario.name)))?;
    solve_closed_loop_with(scenario, env, inner)
}

/// Solve with `K_t`, measure `K_raw`, stop once `residual(K_raw, K_t) < tol`,
/// otherwise move to `(1 - damping) K_t + damping K_raw`. Running out of
/// iterations is reported through `converged`, not as an error.
pub fn solve_closed_loop_with(
    scenario: &Scenario,
    env: &EnvironmentModel,
    inner: InnerSolver,
) -> Result<ClosedLoopResult> {
    if env.baseline.len() != scenario.m() || env.baseline[0].len() != scenario.l() {
        return Err(Error::Config(format!(
            "environment is {} x {}, scenario has {} slices and {} KPIs",
            env.baseline.len(),
            env.baseline[0].len(),
            scenario.m(),
            scenario.l()
        )));
    }
    let lambda = env.damping;
    let mut kpi = env.baseline.clone();
    let mut residuals = Vec::new();
    loop {
        let result = inner.solve(&scenario.with_kpis(&kpi)?)?;
        let raw = environment_response(env, &result.sizes)?;
        let r = residual(&raw, &kpi)?;
        residuals.push(r);
        let iterations = residuals.len();
        if r < env.tol || iterations >= env.max_iter {
            return Ok(ClosedLoopResult {
                result,
                kpi,
                residuals,
                iterations,
                converged: r < env.tol,
            });
        }
        for (row, raw_row) in kpi.iter_mut().zip(&raw) {
            for (k, k_raw) in row.iter_mut().zip(raw_row) {
                *k = (1.0 - lambda) * *k + lambda * k_raw;
            }
        }
    }
}
