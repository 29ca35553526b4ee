//! Exact inner size solver.
//!
//! With linear expenditure, affine demand, capped-linear revenue and
//! sum/max pool usage, choosing slice sizes under a fixed scheme is a linear
//! program once it is known which optional slices carry their activation
//! overhead. Those on/off patterns are enumerated; each pattern is an LP
//! solved with `microlp`, followed by a lexicographic-minimum pass so that
//! ties resolve to the smallest size vector.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::model::{evaluate_sizes, Outcome, ResourcePool, SharingMode, SliceSpec, VnfScheme};

/// Smallest size used for a slice that must be deployed but whose
/// reservation is already covered by its overhead.
const MIN_ACTIVE_SIZE: f64 = 1e-9;
const MAX_TOGGLED_SLICES: usize = 16;
/// Relative slack on the pinned optimum during the lexicographic pass.
const LEX_SLACK: f64 = 1e-10;
/// Distance under which a lexicographic coordinate is snapped back to the
/// maximizing vertex.
const SNAP_TOL: f64 = 1e-8;
/// Relative tolerance under which two objective values count as tied.
pub(crate) const TIE_TOL: f64 = 1e-9;

pub(crate) fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Per-slice bounds and linear coefficients under one scheme.
#[derive(Debug, Clone)]
pub(crate) struct SliceBounds {
    /// The slice has a reservation and must be deployed.
    pub required: bool,
    pub lo: f64,
    pub hi: f64,
    /// `A k`, resource units per unit size.
    pub per_unit: Vec<f64>,
    /// Expenditure per unit size.
    pub unit_cost: f64,
}

pub(crate) fn slice_bounds(
    specs: &[SliceSpec],
    scheme: &VnfScheme,
    pool: &ResourcePool,
) -> Result<Vec<SliceBounds>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let demand = scheme.demand(i)?;
            let per_unit = demand.per_unit(&spec.kpi)?;
            let unit_cost = per_unit.iter().zip(&pool.unit_cost).map(|(u, c)| u * c).sum();
            let required = spec.min_resources.iter().any(|&m| m > 0.0);
            let mut lo = 0.0_f64;
            if required {
                lo = MIN_ACTIVE_SIZE;
                for (j, (&min, &b)) in spec.min_resources.iter().zip(demand.overhead.iter()).enumerate() {
                    if min > b {
                        if per_unit[j] <= 0.0 {
                            return Err(Error::Infeasible(format!(
                                "slice `{}` cannot reach its reservation of resource {j}",
                                spec.id
                            )));
                        }
                        lo = lo.max((min - b) / per_unit[j]);
                    }
                }
            }
            Ok(SliceBounds {
                required,
                lo,
                hi: lo.max(spec.customer_size),
                per_unit,
                unit_cost,
            })
        })
        .collect()
}

/// Lowest-cost deployable point: required slices at their lower bound,
/// everything else off.
pub(crate) fn floor_sizes(bounds: &[SliceBounds]) -> Vec<f64> {
    bounds
        .iter()
        .map(|b| if b.required { b.lo } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct SizeSolution {
    pub sizes: Vec<f64>,
    pub outcome: Outcome,
    pub lp_solves: usize,
}

struct PatternLp<'a> {
    bounds: &'a [SliceBounds],
    active: Vec<usize>,
    var_lo: Vec<f64>,
    var_hi: Vec<f64>,
    objective: Vec<f64>,
    /// `(coefficients over active vars, rhs)`, all `<=`.
    rows: Vec<(Vec<f64>, f64)>,
}

impl<'a> PatternLp<'a> {
    fn build(
        bounds: &'a [SliceBounds],
        specs: &[SliceSpec],
        scheme: &VnfScheme,
        pool: &ResourcePool,
        weights: &[f64],
        on: &[bool],
    ) -> Result<Option<Self>> {
        let active: Vec<usize> = (0..bounds.len()).filter(|&i| on[i]).collect();
        let var_lo = active.iter().map(|&i| bounds[i].lo).collect();
        let var_hi = active.iter().map(|&i| bounds[i].hi).collect();
        let objective = active
            .iter()
            .map(|&i| weights[i] * (specs[i].price - bounds[i].unit_cost))
            .collect();
        let mut rows = Vec::new();
        for (j, mode) in scheme.sharing.iter().enumerate() {
            let cap = pool.capacity[j];
            match mode {
                SharingMode::Dedicated => {
                    let coeffs: Vec<f64> = active.iter().map(|&i| bounds[i].per_unit[j]).collect();
                    let fixed: f64 = active
                        .iter()
                        .map(|&i| scheme.slices[i].overhead[j])
                        .sum();
                    if !push_row(&mut rows, coeffs, cap - fixed, cap) {
                        return Ok(None);
                    }
                }
                SharingMode::Shared => {
                    for (k, &i) in active.iter().enumerate() {
                        let mut coeffs = vec![0.0; active.len()];
                        coeffs[k] = bounds[i].per_unit[j];
                        if !push_row(&mut rows, coeffs, cap - scheme.slices[i].overhead[j], cap) {
                            return Ok(None);
                        }
                    }
                }
            }
        }
        Ok(Some(PatternLp {
            bounds,
            active,
            var_lo,
            var_hi,
            objective,
            rows,
        }))
    }

    fn problem(&self, direction: OptimizationDirection, objective: &[f64], lo: &[f64], hi: &[f64]) -> (Problem, Vec<Variable>) {
        let mut problem = Problem::new(direction);
        let vars: Vec<Variable> = objective
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&c, (&l, &h))| problem.add_var(c, (l, h)))
            .collect();
        for (coeffs, rhs) in &self.rows {
            let terms: Vec<(Variable, f64)> = vars
                .iter()
                .zip(coeffs)
                .filter(|(_, c)| **c != 0.0)
                .map(|(v, c)| (*v, *c))
                .collect();
            problem.add_constraint(terms.as_slice(), ComparisonOp::Le, *rhs);
        }
        (problem, vars)
    }

    /// Maximizes, then walks the active variables in order minimizing each
    /// one with the optimum pinned. Returns the lexicographic point and the
    /// plain maximizer, or `None` when the pattern is infeasible.
    #[allow(clippy::type_complexity)]
    fn solve(&self, lp_solves: &mut usize) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let n = self.active.len();
        if n == 0 {
            return Ok(Some((Vec::new(), Vec::new())));
        }
        let (problem, vars) = self.problem(
            OptimizationDirection::Maximize,
            &self.objective,
            &self.var_lo,
            &self.var_hi,
        );
        *lp_solves += 1;
        let best = match problem.solve() {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => sol,
                Err(_) => return Err(Error::Infeasible("LP solve interrupted".into())),
            },
            Err(microlp::Error::Infeasible) => return Ok(None),
            Err(e) => return Err(Error::Infeasible(format!("LP solver failed: {e}"))),
        };
        let z = best.objective();
        let clamp = |values: &[f64]| -> Vec<f64> {
            values
                .iter()
                .zip(self.active.iter())
                .map(|(&v, &i)| v.clamp(self.bounds[i].lo, self.bounds[i].hi))
                .collect()
        };
        let vertex: Vec<f64> = clamp(&vars.iter().map(|&v| best.var_value(v)).collect::<Vec<_>>());
        let mut values = vertex.clone();

        let mut lo = self.var_lo.clone();
        let mut hi = self.var_hi.clone();
        let slack = LEX_SLACK * z.abs().max(1.0);
        for k in 0..n {
            let mut unit = vec![0.0; n];
            unit[k] = 1.0;
            let (mut problem, vars) = self.problem(OptimizationDirection::Minimize, &unit, &lo, &hi);
            let pinned: Vec<(Variable, f64)> = vars
                .iter()
                .zip(&self.objective)
                .filter(|(_, c)| **c != 0.0)
                .map(|(v, c)| (*v, *c))
                .collect();
            if !pinned.is_empty() {
                problem.add_constraint(pinned.as_slice(), ComparisonOp::Ge, z - slack);
            }
            *lp_solves += 1;
            let Ok(Ok(sol)) = problem.solve().map(|o| o.into_solution()) else {
                break;
            };
            let v = sol.var_value(vars[k]).clamp(lo[k], hi[k]);
            values = vars.iter().map(|&x| sol.var_value(x)).collect();
            values[k] = v;
            lo[k] = v;
            hi[k] = v;
        }
        Ok(Some((clamp(&values), vertex)))
    }
}

fn push_row(rows: &mut Vec<(Vec<f64>, f64)>, coeffs: Vec<f64>, rhs: f64, cap: f64) -> bool {
    if coeffs.iter().all(|c| *c == 0.0) {
        return rhs >= -crate::model::FEASIBILITY_TOL * cap.max(1.0);
    }
    rows.push((coeffs, rhs));
    true
}

/// Maximizes `sum_i g_i w_i(s_i)` over feasible sizes under `scheme`.
///
/// Weights are normalized by their maximum first, so positive rescaling of
/// the weight vector does not change the LP that is solved.
pub(crate) fn optimize_sizes(
    specs: &[SliceSpec],
    scheme: &VnfScheme,
    pool: &ResourcePool,
    weights: &[f64],
) -> Result<SizeSolution> {
    if weights.len() != specs.len() {
        return Err(Error::Config(format!(
            "{} weights for {} slices",
            weights.len(),
            specs.len()
        )));
    }
    let top = weights.iter().cloned().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return Err(Error::Domain("weights must be positive".into()));
    }
    let weights: Vec<f64> = weights.iter().map(|g| g / top).collect();
    let bounds = slice_bounds(specs, scheme, pool)?;

    let toggled: Vec<usize> = (0..specs.len())
        .filter(|&i| !bounds[i].required && scheme.slices[i].overhead.iter().any(|&b| b > 0.0))
        .collect();
    if toggled.len() > MAX_TOGGLED_SLICES {
        return Err(Error::BudgetExceeded {
            required: 1u128 << toggled.len(),
            budget: 1u128 << MAX_TOGGLED_SLICES,
        });
    }

    let mut lp_solves = 0;
    let mut best: Option<(f64, Vec<f64>, Outcome)> = None;
    for pattern in 0..(1usize << toggled.len()) {
        let mut on = vec![true; specs.len()];
        for (bit, &i) in toggled.iter().enumerate() {
            on[i] = pattern & (1 << bit) != 0;
        }
        let Some(lp) = PatternLp::build(&bounds, specs, scheme, pool, &weights, &on)? else {
            continue;
        };
        let Some((values, vertex)) = lp.solve(&mut lp_solves)? else {
            continue;
        };
        let mut sizes = vec![0.0; specs.len()];
        for (&i, v) in lp.active.iter().zip(values) {
            sizes[i] = v;
        }
        let outcome = evaluate_sizes(specs, scheme, pool, &sizes)?;
        if !outcome.feasible {
            continue;
        }
        let mut value = outcome.weighted_total(&weights);
        let (mut sizes, mut outcome) = (sizes, outcome);
        // The pinned optimum carries a little slack, which lets a unique
        // optimum drift by rounding noise; take the vertex coordinates back
        // wherever the lexicographic pass did not really move them.
        let mut snapped = sizes.clone();
        for (&i, v) in lp.active.iter().zip(&vertex) {
            if (snapped[i] - v).abs() <= SNAP_TOL * v.abs().max(1.0) {
                snapped[i] = *v;
            }
        }
        if snapped != sizes {
            let out = evaluate_sizes(specs, scheme, pool, &snapped)?;
            let v = out.weighted_total(&weights);
            if out.feasible && (v >= value || ties(v, value)) {
                (sizes, outcome, value) = (snapped, out, v);
            }
        }
        let better = match &best {
            None => true,
            Some((bv, bs, _)) => {
                if ties(value, *bv) {
                    sizes.as_slice() < bs.as_slice()
                } else {
                    value > *bv
                }
            }
        };
        if better {
            best = Some((value, sizes, outcome));
        }
    }
    match best {
        Some((_, sizes, outcome)) => Ok(SizeSolution {
            sizes,
            outcome,
            lp_solves,
        }),
        None => Err(Error::Infeasible(
            "no slice sizes satisfy the pool capacities and reservations".into(),
        )),
    }
}
