//! Time-varying demand: hold a configuration for `tau` epochs, pay a fee per
//! reconfiguration, and pick the update period with the best net profit.

use rayon::prelude::*;

use crate::closed_loop::InnerSolver;
use crate::error::{Error, Result};
use crate::model::{resource_demand, KpiVector, SharingMode, Violation};
use crate::scenario::Scenario;
use crate::sizing::ties;

/// Per-slice, per-epoch demand parameters. Rows are slices, columns epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTrace {
    horizon: usize,
    customer_size: Vec<Vec<f64>>,
    price: Vec<Vec<f64>>,
    kpi_scale: Vec<Vec<f64>>,
}

impl DemandTrace {
    pub fn new(
        horizon: usize,
        customer_size: Vec<Vec<f64>>,
        price: Vec<Vec<f64>>,
        kpi_scale: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Domain("horizon must be >= 1".into()));
        }
        let m = customer_size.len();
        for (name, series) in [
            ("customer_size", &customer_size),
            ("price", &price),
            ("kpi_scale", &kpi_scale),
        ] {
            if series.len() != m {
                return Err(Error::Domain(format!("{name}: {} slices, expected {m}", series.len())));
            }
            for (i, row) in series.iter().enumerate() {
                if row.len() != horizon {
                    return Err(Error::Domain(format!(
                        "{name}[{i}]: {} epochs, expected {horizon}",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Domain(format!("{name}[{i}] must be finite and >= 0")));
                }
            }
        }
        Ok(DemandTrace {
            horizon,
            customer_size,
            price,
            kpi_scale,
        })
    }

    /// The scenario's own parameters repeated for `horizon` epochs.
    pub fn constant(scenario: &Scenario, horizon: usize) -> Result<Self> {
        DemandTrace::new(
            horizon,
            scenario.slices.iter().map(|s| vec![s.customer_size; horizon]).collect(),
            scenario.slices.iter().map(|s| vec![s.price; horizon]).collect(),
            vec![vec![1.0; horizon]; scenario.m()],
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn customer_size(&self) -> &[Vec<f64>] {
        &self.customer_size
    }

    pub fn price(&self) -> &[Vec<f64>] {
        &self.price
    }

    pub fn kpi_scale(&self) -> &[Vec<f64>] {
        &self.kpi_scale
    }

    /// The scenario as it really is during `epoch`.
    pub fn epoch_scenario(&self, scenario: &Scenario, epoch: usize) -> Result<Scenario> {
        if self.customer_size.len() != scenario.m() {
            return Err(Error::Config(format!(
                "trace covers {} slices, scenario has {}",
                self.customer_size.len(),
                scenario.m()
            )));
        }
        if epoch >= self.horizon {
            return Err(Error::Domain(format!("epoch {epoch} beyond horizon {}", self.horizon)));
        }
        let mut out = scenario.clone();
        for (i, spec) in out.slices.iter_mut().enumerate() {
            spec.customer_size = self.customer_size[i][epoch];
            spec.price = self.price[i][epoch];
            let scale = self.kpi_scale[i][epoch];
            spec.kpi = KpiVector::new(spec.kpi.iter().map(|k| k * scale).collect())?;
        }
        Ok(out)
    }
}

/// Flat fee charged per reconfiguration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconfigCostModel {
    cost_per_update: f64,
}

impl ReconfigCostModel {
    pub fn new(cost_per_update: f64) -> Result<Self> {
        if !cost_per_update.is_finite() || cost_per_update < 0.0 {
            return Err(Error::Domain(format!(
                "reconfiguration cost {cost_per_update} must be finite and >= 0"
            )));
        }
        Ok(ReconfigCostModel { cost_per_update })
    }

    pub fn cost_per_update(&self) -> f64 {
        self.cost_per_update
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// A reconfiguration happened at the start of this epoch.
    pub updated: bool,
    pub sizes: Vec<f64>,
    pub sharing: Vec<SharingMode>,
    pub profit: f64,
    /// The held configuration violates this epoch's constraints.
    pub stale_infeasible: bool,
    /// The solve at the last update failed; zero sizes are held.
    pub solve_failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonResult {
    pub period: usize,
    pub epochs: Vec<EpochRecord>,
    pub updates: usize,
}

impl HorizonResult {
    pub fn profits(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.profit).collect()
    }

    /// Sum of epoch profits, accumulated in epoch order.
    pub fn gross(&self) -> f64 {
        self.epochs.iter().map(|e| e.profit).sum()
    }
}

/// Profit of a held configuration under one epoch's true parameters.
/// Slices that miss a reservation or draw on an over-capacity resource earn
/// no revenue but still pay for what they hold.
pub fn realized_profit(
    epoch: &Scenario,
    sharing: &[SharingMode],
    sizes: &[f64],
) -> Result<(f64, bool)> {
    let out = epoch.evaluate_with(sharing, sizes)?;
    if out.feasible {
        return Ok((out.total_profit, false));
    }
    let scheme = epoch.scheme_with(sharing)?;
    let mut violating = vec![false; epoch.m()];
    for v in &out.violations {
        match *v {
            Violation::Minimum { slice, .. } => violating[slice] = true,
            Violation::Capacity { resource, .. } => {
                for (i, flag) in violating.iter_mut().enumerate() {
                    let r = resource_demand(
                        &epoch.slices[i],
                        sizes[i],
                        scheme.demand(i)?,
                    )?;
                    if r[resource] > 0.0 {
                        *flag = true;
                    }
                }
            }
        }
    }
    let total = (0..epoch.m())
        .map(|i| {
            if violating[i] {
                -out.expenditures[i]
            } else {
                out.profits[i]
            }
        })
        .sum();
    Ok((total, true))
}

fn check_period(trace: &DemandTrace, period: usize) -> Result<()> {
    if period == 0 || period > trace.horizon {
        return Err(Error::Domain(format!(
            "update period {period} must lie in [1, {}]",
            trace.horizon
        )));
    }
    Ok(())
}

/// Re-solves at epochs `0, tau, 2 tau, ...` and holds the result in between.
pub fn simulate_horizon(
    scenario: &Scenario,
    trace: &DemandTrace,
    period: usize,
    inner: InnerSolver,
) -> Result<HorizonResult> {
    check_period(trace, period)?;
    let mut epochs = Vec::with_capacity(trace.horizon);
    let mut held: (Vec<SharingMode>, Vec<f64>) = (scenario.scheme.sharing.clone(), vec![0.0; scenario.m()]);
    let mut failed = false;
    let mut updates = 0;
    for t in 0..trace.horizon {
        let epoch = trace.epoch_scenario(scenario, t)?;
        let updated = t % period == 0;
        if updated {
            updates += 1;
            match inner.solve(&epoch) {
                Ok(r) => {
                    held = (r.sharing, r.sizes);
                    failed = false;
                }
                Err(Error::Infeasible(_)) => {
                    held = (scenario.scheme.sharing.clone(), vec![0.0; scenario.m()]);
                    failed = true;
                }
                Err(e) => return Err(e),
            }
        }
        let (profit, stale) = realized_profit(&epoch, &held.0, &held.1)?;
        epochs.push(EpochRecord {
            epoch: t,
            updated,
            sizes: held.1.clone(),
            sharing: held.0.clone(),
            profit,
            stale_infeasible: stale,
            solve_failed: failed,
        });
    }
    Ok(HorizonResult {
        period,
        epochs,
        updates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEvaluation {
    pub period: usize,
    pub updates: usize,
    pub gross: f64,
    pub reconfig_cost: f64,
    /// `gross - updates * cost_per_update`.
    pub total: f64,
    pub stale_epochs: usize,
    pub failed_epochs: usize,
}

/// Net long-term profit of updating every `period` epochs.
pub fn evaluate_period(
    scenario: &Scenario,
    trace: &DemandTrace,
    period: usize,
    cost: ReconfigCostModel,
    inner: InnerSolver,
) -> Result<PeriodEvaluation> {
    let h = simulate_horizon(scenario, trace, period, inner)?;
    let gross = h.gross();
    let reconfig_cost = h.updates as f64 * cost.cost_per_update;
    Ok(PeriodEvaluation {
        period,
        updates: h.updates,
        gross,
        reconfig_cost,
        total: gross - reconfig_cost,
        stale_epochs: h.epochs.iter().filter(|e| e.stale_infeasible).count(),
        failed_epochs: h.epochs.iter().filter(|e| e.solve_failed).count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodChoice {
    pub best: usize,
    /// One row per distinct candidate, ascending period.
    pub table: Vec<PeriodEvaluation>,
}

/// Evaluates every candidate period and returns the most profitable one;
/// ties go to the smallest period.
pub fn optimize_period(
    scenario: &Scenario,
    trace: &DemandTrace,
    candidates: &[usize],
    cost: ReconfigCostModel,
    inner: InnerSolver,
) -> Result<PeriodChoice> {
    if candidates.is_empty() {
        return Err(Error::Domain("no candidate periods".into()));
    }
    let mut periods = candidates.to_vec();
    periods.sort_unstable();
    periods.dedup();
    for &p in &periods {
        check_period(trace, p)?;
    }
    let table = periods
        .par_iter()
        .map(|&p| evaluate_period(scenario, trace, p, cost, inner))
        .collect::<Result<Vec<_>>>()?;
    let mut best = &table[0];
    for row in &table[1..] {
        if !ties(row.total, best.total) && row.total > best.total {
            best = row;
        }
    }
    Ok(PeriodChoice {
        best: best.period,
        table,
    })
}
