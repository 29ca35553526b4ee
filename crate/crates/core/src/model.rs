//! Slice value chain: KPI requirements and slice size drive resource demand,
//! resource demand drives expenditure, price and customer base drive revenue,
//! and profit is their difference.
//!
//! Everything in here is a pure function of its inputs.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Relative slack allowed when comparing usage against a bound.
///
/// Vertex solutions of the size LP sit on active constraints and can land one
/// ulp outside them; anything beyond this is a real violation.
pub const FEASIBILITY_TOL: f64 = 1e-9;

fn tolerance_for(bound: f64) -> f64 {
    FEASIBILITY_TOL * bound.abs().max(1.0)
}

fn check_entries(what: &str, values: &[f64]) -> Result<()> {
    for (idx, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{what}[{idx}] is not finite")));
        }
        if *v < 0.0 {
            return Err(Error::Domain(format!("{what}[{idx}] = {v} is negative")));
        }
    }
    Ok(())
}

/// KPI requirements of one slice, one entry per KPI kind.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiVector(Vec<f64>);

impl KpiVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_entries("kpi", &values)?;
        Ok(KpiVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for KpiVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Amounts of each resource type.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_entries("resource", &values)?;
        Ok(ResourceVector(values))
    }

    pub fn zeros(n: usize) -> Self {
        ResourceVector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ResourceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One slice's commercial and technical identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub id: String,
    pub kpi: KpiVector,
    /// Number of user applications requesting the service.
    pub customer_size: f64,
    /// Money per served application per epoch.
    pub price: f64,
    pub min_resources: ResourceVector,
}

impl SliceSpec {
    pub fn new(
        id: impl Into<String>,
        kpi: KpiVector,
        customer_size: f64,
        price: f64,
        min_resources: ResourceVector,
    ) -> Result<Self> {
        let id = id.into();
        if !customer_size.is_finite() || customer_size < 0.0 {
            return Err(Error::Domain(format!(
                "slice `{id}`: customer size {customer_size} must be finite and >= 0"
            )));
        }
        if !price.is_finite() || price < 0.0 {
            return Err(Error::Domain(format!(
                "slice `{id}`: price {price} must be finite and >= 0"
            )));
        }
        Ok(SliceSpec {
            id,
            kpi,
            customer_size,
            price,
            min_resources,
        })
    }
}

/// How a resource type is consumed across slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SharingMode {
    /// Each slice holds its own share; usage adds up.
    Dedicated,
    /// Time-shared by all slices; usage is the largest single demand.
    Shared,
}

impl SharingMode {
    pub fn code(self) -> char {
        match self {
            SharingMode::Dedicated => 'D',
            SharingMode::Shared => 'S',
        }
    }
}

/// Compact label such as `DS` for a sharing-mode assignment.
pub fn sharing_label(modes: &[SharingMode]) -> String {
    modes.iter().map(|m| m.code()).collect()
}

/// Per-slice part of a VNF implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDemand {
    /// `N x L`: resource units per unit size per unit KPI.
    pub matrix: Vec<Vec<f64>>,
    /// Resource units consumed as soon as the slice has a positive size.
    pub overhead: ResourceVector,
}

impl SliceDemand {
    pub fn new(matrix: Vec<Vec<f64>>, overhead: ResourceVector) -> Result<Self> {
        let n = overhead.len();
        if matrix.len() != n {
            return Err(Error::Config(format!(
                "demand matrix has {} rows, overhead has {} entries",
                matrix.len(),
                n
            )));
        }
        let width = matrix.first().map_or(0, Vec::len);
        for (j, row) in matrix.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Config(format!(
                    "demand matrix row {j} has {} columns, expected {width}",
                    row.len()
                )));
            }
            check_entries("demand_matrix", row)?;
        }
        Ok(SliceDemand { matrix, overhead })
    }

    pub fn resources(&self) -> usize {
        self.matrix.len()
    }

    pub fn kpis(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    /// Resource units per unit of slice size, `A k`.
    pub fn per_unit(&self, kpi: &[f64]) -> Result<Vec<f64>> {
        if kpi.len() != self.kpis() && self.resources() > 0 {
            return Err(Error::Config(format!(
                "KPI vector has {} entries, demand matrix expects {}",
                kpi.len(),
                self.kpis()
            )));
        }
        Ok(self
            .matrix
            .iter()
            .map(|row| row.iter().zip(kpi).map(|(a, k)| a * k).sum())
            .collect())
    }
}

/// A concrete VNF implementation: demand coefficients per slice plus one
/// sharing mode per resource type.
#[derive(Debug, Clone, PartialEq)]
pub struct VnfScheme {
    pub slices: Vec<SliceDemand>,
    pub sharing: Vec<SharingMode>,
}

impl VnfScheme {
    pub fn new(slices: Vec<SliceDemand>, sharing: Vec<SharingMode>) -> Result<Self> {
        for (i, d) in slices.iter().enumerate() {
            if d.resources() != sharing.len() {
                return Err(Error::Config(format!(
                    "slice {i} demands {} resources, scheme declares {}",
                    d.resources(),
                    sharing.len()
                )));
            }
        }
        Ok(VnfScheme { slices, sharing })
    }

    /// Same demand coefficients with a different sharing assignment.
    pub fn with_sharing(&self, sharing: Vec<SharingMode>) -> Result<Self> {
        if sharing.len() != self.sharing.len() {
            return Err(Error::Config(format!(
                "sharing assignment has {} entries, expected {}",
                sharing.len(),
                self.sharing.len()
            )));
        }
        Ok(VnfScheme {
            slices: self.slices.clone(),
            sharing,
        })
    }

    pub fn is_all_dedicated(&self) -> bool {
        self.sharing.iter().all(|m| *m == SharingMode::Dedicated)
    }

    pub fn demand(&self, slice: usize) -> Result<&SliceDemand> {
        self.slices
            .get(slice)
            .ok_or_else(|| Error::Config(format!("scheme has no demand entry for slice {slice}")))
    }
}

/// Total capacities and unit costs of the resource types.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePool {
    pub capacity: ResourceVector,
    pub unit_cost: Vec<f64>,
}

impl ResourcePool {
    pub fn new(capacity: ResourceVector, unit_cost: Vec<f64>) -> Result<Self> {
        if capacity.len() != unit_cost.len() {
            return Err(Error::Config(format!(
                "pool has {} capacities but {} unit costs",
                capacity.len(),
                unit_cost.len()
            )));
        }
        check_entries("unit_cost", &unit_cost)?;
        Ok(ResourcePool {
            capacity,
            unit_cost,
        })
    }

    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }
}

/// Slice sizes together with the resource matrix they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    sizes: Vec<f64>,
    resources: Vec<ResourceVector>,
}

impl Allocation {
    /// Derives the resource matrix row by row from the scheme.
    pub fn new(specs: &[SliceSpec], scheme: &VnfScheme, sizes: Vec<f64>) -> Result<Self> {
        if sizes.len() != specs.len() || scheme.slices.len() != specs.len() {
            return Err(Error::Config(format!(
                "{} sizes for {} slices and {} scheme entries",
                sizes.len(),
                specs.len(),
                scheme.slices.len()
            )));
        }
        let resources = specs
            .iter()
            .zip(&sizes)
            .zip(&scheme.slices)
            .map(|((spec, &s), d)| resource_demand(spec, s, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Allocation { sizes, resources })
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn resources(&self) -> &[ResourceVector] {
        &self.resources
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Pool usage of `resource` exceeds its capacity by `excess`.
    Capacity { resource: usize, excess: f64 },
    /// Slice `slice` holds `deficit` less of `resource` than its reservation.
    Minimum {
        slice: usize,
        resource: usize,
        deficit: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Evaluation of one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub profits: Vec<f64>,
    pub revenues: Vec<f64>,
    pub expenditures: Vec<f64>,
    pub total_profit: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl Outcome {
    /// `sum_i g_i w_i`.
    pub fn weighted_total(&self, weights: &[f64]) -> f64 {
        self.profits.iter().zip(weights).map(|(w, g)| g * w).sum()
    }
}

fn check_size(size: f64) -> Result<()> {
    if !size.is_finite() || size < 0.0 {
        return Err(Error::Domain(format!("slice size {size} must be finite and >= 0")));
    }
    Ok(())
}

/// Resources needed to run a slice at `size`: `size * (A k) + b * step(size)`.
pub fn resource_demand(spec: &SliceSpec, size: f64, demand: &SliceDemand) -> Result<ResourceVector> {
    check_size(size)?;
    if demand.resources() != spec.min_resources.len() {
        return Err(Error::Config(format!(
            "slice `{}`: scheme demands {} resources, reservation lists {}",
            spec.id,
            demand.resources(),
            spec.min_resources.len()
        )));
    }
    let per_unit = demand.per_unit(&spec.kpi)?;
    if size == 0.0 {
        return Ok(ResourceVector::zeros(per_unit.len()));
    }
    Ok(ResourceVector(
        per_unit
            .iter()
            .zip(demand.overhead.iter())
            .map(|(u, b)| size * u + b)
            .collect(),
    ))
}

/// Linear expenditure `sum_j cost_j r_j`.
pub fn expenditure(r: &[f64], pool: &ResourcePool) -> Result<f64> {
    if r.len() != pool.unit_cost.len() {
        return Err(Error::Config(format!(
            "resource vector has {} entries, pool has {}",
            r.len(),
            pool.unit_cost.len()
        )));
    }
    Ok(r.iter().zip(&pool.unit_cost).map(|(x, c)| c * x).sum())
}

/// `p * min(size, c)`: revenue is capped by capacity and by actual demand.
pub fn revenue(spec: &SliceSpec, size: f64) -> Result<f64> {
    check_size(size)?;
    Ok(spec.price * size.min(spec.customer_size))
}

pub fn profit(
    spec: &SliceSpec,
    size: f64,
    demand: &SliceDemand,
    pool: &ResourcePool,
) -> Result<f64> {
    let r = resource_demand(spec, size, demand)?;
    Ok(revenue(spec, size)? - expenditure(&r, pool)?)
}

/// Pool consumption per resource: column sum for dedicated resources,
/// column maximum for shared ones.
pub fn pool_usage(alloc: &Allocation, scheme: &VnfScheme) -> Result<ResourceVector> {
    let n = scheme.sharing.len();
    let mut usage = vec![0.0; n];
    for row in &alloc.resources {
        if row.len() != n {
            return Err(Error::Config(format!(
                "allocation row has {} resources, scheme has {n}",
                row.len()
            )));
        }
        for (j, (&r, mode)) in row.iter().zip(&scheme.sharing).enumerate() {
            match mode {
                SharingMode::Dedicated => usage[j] += r,
                SharingMode::Shared => usage[j] = f64::max(usage[j], r),
            }
        }
    }
    Ok(ResourceVector(usage))
}

/// Checks pool capacities and per-slice reservations. Infeasibility is a
/// reported state; only dimension errors are `Err`.
pub fn check_feasible(
    alloc: &Allocation,
    scheme: &VnfScheme,
    pool: &ResourcePool,
    specs: &[SliceSpec],
) -> Result<Feasibility> {
    let usage = pool_usage(alloc, scheme)?;
    if usage.len() != pool.len() {
        return Err(Error::Config(format!(
            "usage has {} resources, pool has {}",
            usage.len(),
            pool.len()
        )));
    }
    if specs.len() != alloc.resources.len() {
        return Err(Error::Config(format!(
            "{} slice specs for {} allocation rows",
            specs.len(),
            alloc.resources.len()
        )));
    }
    let mut violations = Vec::new();
    for (j, (&u, &cap)) in usage.iter().zip(pool.capacity.iter()).enumerate() {
        if u - cap > tolerance_for(cap) {
            violations.push(Violation::Capacity {
                resource: j,
                excess: u - cap,
            });
        }
    }
    for (i, (row, spec)) in alloc.resources.iter().zip(specs).enumerate() {
        for (j, (&r, &min)) in row.iter().zip(spec.min_resources.iter()).enumerate() {
            if min - r > tolerance_for(min) {
                violations.push(Violation::Minimum {
                    slice: i,
                    resource: j,
                    deficit: min - r,
                });
            }
        }
    }
    Ok(Feasibility {
        feasible: violations.is_empty(),
        violations,
    })
}

/// Full evaluation of `sizes` under `scheme`.
pub fn evaluate_sizes(
    specs: &[SliceSpec],
    scheme: &VnfScheme,
    pool: &ResourcePool,
    sizes: &[f64],
) -> Result<Outcome> {
    let alloc = Allocation::new(specs, scheme, sizes.to_vec())?;
    let feas = check_feasible(&alloc, scheme, pool, specs)?;
    let mut revenues = Vec::with_capacity(specs.len());
    let mut expenditures = Vec::with_capacity(specs.len());
    for ((spec, &s), r) in specs.iter().zip(sizes).zip(&alloc.resources) {
        revenues.push(revenue(spec, s)?);
        expenditures.push(expenditure(r, pool)?);
    }
    let profits: Vec<f64> = revenues
        .iter()
        .zip(&expenditures)
        .map(|(rev, exp)| rev - exp)
        .collect();
    let total_profit = profits.iter().sum();
    Ok(Outcome {
        profits,
        revenues,
        expenditures,
        total_profit,
        feasible: feas.feasible,
        violations: feas.violations,
    })
}
