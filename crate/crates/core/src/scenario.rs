//! Scenario files: JSON schema, strict validation, and the validated
//! [`Scenario`] every solver consumes.
//!
//! Validation rejects, it never repairs. Each error names the offending
//! field using a JSON-path-like label such as `slices[1].demand_matrix`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closed_loop::EnvironmentModel;
use crate::error::{Error, Result};
use crate::game::{MarketConfig, OperatorSpec, OperatorsConfig};
use crate::longterm::DemandTrace;
use crate::model::{
    evaluate_sizes, KpiVector, Outcome, ResourcePool, ResourceVector, SharingMode, SliceDemand,
    SliceSpec, VnfScheme,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResource {
    name: String,
    capacity: f64,
    unit_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlice {
    id: String,
    kpi: Vec<f64>,
    customer_size: f64,
    price: f64,
    min_resources: Vec<f64>,
    demand_matrix: Vec<Vec<f64>>,
    overhead: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    slice: String,
    kpi: String,
    from: String,
    gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_kpi: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default)]
    coupling: Vec<RawCoupling>,
    damping: f64,
    tol: f64,
    max_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawTrace {
    horizon: usize,
    #[serde(default)]
    customer_size: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    price: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    kpi_scale: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    id: String,
    slices: Vec<String>,
    capacity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_rounds")]
    rounds: usize,
    #[serde(default = "default_market_tol")]
    tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_prices: Option<Vec<f64>>,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_span: Option<Vec<f64>>,
}

fn default_eta() -> f64 {
    0.05
}
fn default_rounds() -> usize {
    200
}
fn default_market_tol() -> f64 {
    1e-3
}
fn default_grid_points() -> usize {
    11
}

impl Default for RawMarket {
    fn default() -> Self {
        RawMarket {
            eta: default_eta(),
            rounds: default_rounds(),
            tol: default_market_tol(),
            initial_prices: None,
            grid_points: default_grid_points(),
            grid_span: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperators {
    members: Vec<RawOperator>,
    traded: Vec<String>,
    #[serde(default)]
    market: RawMarket,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    resources: Vec<RawResource>,
    kpis: Vec<String>,
    slices: Vec<RawSlice>,
    #[serde(default)]
    sharing_eligible: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    environment: Option<RawEnvironment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace: Option<RawTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    operators: Option<RawOperators>,
}

/// A fully validated optimization scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub resource_names: Vec<String>,
    pub kpi_names: Vec<String>,
    pub pool: ResourcePool,
    pub slices: Vec<SliceSpec>,
    /// Base implementation; every resource dedicated.
    pub scheme: VnfScheme,
    /// Resource indices that may be switched to shared mode.
    pub sharing_eligible: Vec<usize>,
    pub environment: Option<EnvironmentModel>,
    pub trace: Option<DemandTrace>,
    pub operators: Option<OperatorsConfig>,
}

impl Scenario {
    /// Number of slices `M`.
    pub fn m(&self) -> usize {
        self.slices.len()
    }

    /// Number of resource types `N`.
    pub fn n(&self) -> usize {
        self.resource_names.len()
    }

    /// Number of KPI kinds `L`.
    pub fn l(&self) -> usize {
        self.kpi_names.len()
    }

    pub fn slice_index(&self, id: &str) -> Option<usize> {
        self.slices.iter().position(|s| s.id == id)
    }

    pub fn resource_index(&self, name: &str) -> Option<usize> {
        self.resource_names.iter().position(|r| r == name)
    }

    /// Base scheme with the given sharing assignment.
    pub fn scheme_with(&self, sharing: &[SharingMode]) -> Result<VnfScheme> {
        for (j, mode) in sharing.iter().enumerate() {
            if *mode == SharingMode::Shared && !self.sharing_eligible.contains(&j) {
                return Err(Error::Config(format!(
                    "resource `{}` is not sharing-eligible",
                    self.resource_names.get(j).map_or("?", String::as_str)
                )));
            }
        }
        self.scheme.with_sharing(sharing.to_vec())
    }

    /// Evaluates `sizes` under the base (all-dedicated) scheme.
    pub fn evaluate(&self, sizes: &[f64]) -> Result<Outcome> {
        evaluate_sizes(&self.slices, &self.scheme, &self.pool, sizes)
    }

    /// Evaluates `sizes` under the given sharing assignment.
    pub fn evaluate_with(&self, sharing: &[SharingMode], sizes: &[f64]) -> Result<Outcome> {
        let scheme = self.scheme.with_sharing(sharing.to_vec())?;
        evaluate_sizes(&self.slices, &scheme, &self.pool, sizes)
    }

    /// Copy with every slice's KPI vector replaced by the rows of `kpis`.
    pub fn with_kpis(&self, kpis: &[Vec<f64>]) -> Result<Scenario> {
        if kpis.len() != self.m() {
            return Err(Error::Config(format!(
                "{} KPI rows for {} slices",
                kpis.len(),
                self.m()
            )));
        }
        let mut out = self.clone();
        for (spec, row) in out.slices.iter_mut().zip(kpis) {
            if row.len() != self.l() {
                return Err(Error::Config(format!(
                    "slice `{}`: {} KPI entries, expected {}",
                    spec.id,
                    row.len(),
                    self.l()
                )));
            }
            spec.kpi = KpiVector::new(row.clone())?;
        }
        Ok(out)
    }

    /// KPI matrix of the current slice specs, one row per slice.
    pub fn kpi_matrix(&self) -> Vec<Vec<f64>> {
        self.slices.iter().map(|s| s.kpi.to_vec()).collect()
    }

    /// Sub-scenario holding only `slices`, run over `pool`. Optional blocks
    /// are dropped; sharing eligibility is kept.
    pub fn restrict(&self, name: &str, slices: &[usize], pool: ResourcePool) -> Result<Scenario> {
        if slices.is_empty() {
            return Err(Error::validation("slices", "M must be >= 1"));
        }
        let mut specs = Vec::with_capacity(slices.len());
        let mut demands = Vec::with_capacity(slices.len());
        for &i in slices {
            let spec = self
                .slices
                .get(i)
                .ok_or_else(|| Error::Config(format!("no slice with index {i}")))?;
            specs.push(spec.clone());
            demands.push(self.scheme.demand(i)?.clone());
        }
        Ok(Scenario {
            name: name.to_string(),
            resource_names: self.resource_names.clone(),
            kpi_names: self.kpi_names.clone(),
            pool,
            slices: specs,
            scheme: VnfScheme::new(demands, self.scheme.sharing.clone())?,
            sharing_eligible: self.sharing_eligible.clone(),
            environment: None,
            trace: None,
            operators: None,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Scenario::from_raw(raw)
    }

    /// Pretty-printed JSON in the documented schema.
    pub fn to_json_string(&self) -> String {
        let raw = self.to_raw();
        let mut text = serde_json::to_string_pretty(&raw).expect("scenario serializes");
        text.push('\n');
        text
    }

    fn from_raw(raw: RawScenario) -> Result<Scenario> {
        if raw.resources.is_empty() {
            return Err(Error::validation("resources", "N must be >= 1"));
        }
        if raw.kpis.is_empty() {
            return Err(Error::validation("kpis", "L must be >= 1"));
        }
        if raw.slices.is_empty() {
            return Err(Error::validation("slices", "M must be >= 1"));
        }
        let n = raw.resources.len();
        let l = raw.kpis.len();

        let mut resource_names = Vec::with_capacity(n);
        let mut capacity = Vec::with_capacity(n);
        let mut unit_cost = Vec::with_capacity(n);
        for (j, r) in raw.resources.iter().enumerate() {
            let field = format!("resources[{j}]");
            if resource_names.contains(&r.name) {
                return Err(Error::validation(
                    format!("{field}.name"),
                    format!("duplicate resource name `{}`", r.name),
                ));
            }
            if !r.capacity.is_finite() || r.capacity <= 0.0 {
                return Err(Error::validation(
                    format!("{field}.capacity"),
                    format!("capacity must be finite and > 0, got {}", r.capacity),
                ));
            }
            if !r.unit_cost.is_finite() || r.unit_cost < 0.0 {
                return Err(Error::validation(
                    format!("{field}.unit_cost"),
                    format!("unit cost must be finite and >= 0, got {}", r.unit_cost),
                ));
            }
            resource_names.push(r.name.clone());
            capacity.push(r.capacity);
            unit_cost.push(r.unit_cost);
        }
        let mut kpi_names: Vec<String> = Vec::with_capacity(l);
        for (k, name) in raw.kpis.iter().enumerate() {
            if kpi_names.contains(name) {
                return Err(Error::validation(
                    format!("kpis[{k}]"),
                    format!("duplicate KPI name `{name}`"),
                ));
            }
            kpi_names.push(name.clone());
        }
        let pool = ResourcePool::new(ResourceVector::new(capacity.clone())?, unit_cost)?;

        let mut slices = Vec::with_capacity(raw.slices.len());
        let mut demands = Vec::with_capacity(raw.slices.len());
        for (i, s) in raw.slices.iter().enumerate() {
            let field = format!("slices[{i}]");
            if slices.iter().any(|x: &SliceSpec| x.id == s.id) {
                return Err(Error::validation(
                    format!("{field}.id"),
                    format!("duplicate slice id `{}`", s.id),
                ));
            }
            check_vector(&format!("{field}.kpi"), &s.kpi, l)?;
            check_vector(&format!("{field}.min_resources"), &s.min_resources, n)?;
            check_vector(&format!("{field}.overhead"), &s.overhead, n)?;
            for (j, (&min, &cap)) in s.min_resources.iter().zip(&capacity).enumerate() {
                if min > cap {
                    return Err(Error::validation(
                        format!("{field}.min_resources[{j}]"),
                        format!("reservation {min} exceeds pool capacity {cap}"),
                    ));
                }
            }
            let rows = s.demand_matrix.len();
            let bad_width = s.demand_matrix.iter().find(|row| row.len() != l);
            if rows != n || bad_width.is_some() {
                let cols = bad_width.map_or(l, Vec::len);
                return Err(Error::validation(
                    format!("{field}.demand_matrix"),
                    format!(
                        "slice `{}`: demand matrix must be N x L = {n} x {l}, got {rows} x {cols}",
                        s.id
                    ),
                ));
            }
            for (j, row) in s.demand_matrix.iter().enumerate() {
                check_vector(&format!("{field}.demand_matrix[{j}]"), row, l)?;
            }
            for (name, v) in [("customer_size", s.customer_size), ("price", s.price)] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation(
                        format!("{field}.{name}"),
                        format!("must be finite and >= 0, got {v}"),
                    ));
                }
            }
            slices.push(SliceSpec::new(
                s.id.clone(),
                KpiVector::new(s.kpi.clone())?,
                s.customer_size,
                s.price,
                ResourceVector::new(s.min_resources.clone())?,
            )?);
            demands.push(SliceDemand::new(
                s.demand_matrix.clone(),
                ResourceVector::new(s.overhead.clone())?,
            )?);
        }
        let scheme = VnfScheme::new(demands, vec![SharingMode::Dedicated; n])?;

        let mut sharing_eligible = Vec::new();
        for (e, name) in raw.sharing_eligible.iter().enumerate() {
            let j = resource_names.iter().position(|r| r == name).ok_or_else(|| {
                Error::validation(
                    format!("sharing_eligible[{e}]"),
                    format!("unknown resource `{name}`"),
                )
            })?;
            if sharing_eligible.contains(&j) {
                return Err(Error::validation(
                    format!("sharing_eligible[{e}]"),
                    format!("duplicate resource `{name}`"),
                ));
            }
            sharing_eligible.push(j);
        }
        sharing_eligible.sort_unstable();

        let mut scenario = Scenario {
            name: raw.name,
            resource_names,
            kpi_names,
            pool,
            slices,
            scheme,
            sharing_eligible,
            environment: None,
            trace: None,
            operators: None,
        };
        if let Some(env) = raw.environment {
            scenario.environment = Some(scenario.environment_from_raw(env)?);
        }
        if let Some(trace) = raw.trace {
            scenario.trace = Some(scenario.trace_from_raw(trace)?);
        }
        if let Some(ops) = raw.operators {
            scenario.operators = Some(scenario.operators_from_raw(ops)?);
        }
        Ok(scenario)
    }

    fn slice_ref(&self, field: &str, id: &str) -> Result<usize> {
        self.slice_index(id)
            .ok_or_else(|| Error::validation(field, format!("unknown slice `{id}`")))
    }

    fn environment_from_raw(&self, raw: RawEnvironment) -> Result<EnvironmentModel> {
        let m = self.m();
        let l = self.l();
        let mut baseline = self.kpi_matrix();
        if let Some(map) = &raw.baseline_kpi {
            for (id, row) in map {
                let field = format!("environment.baseline_kpi.{id}");
                let i = self.slice_ref(&field, id)?;
                check_vector(&field, row, l)?;
                baseline[i] = row.clone();
            }
        }
        let mut gamma = vec![vec![vec![0.0; m]; l]; m];
        for (c, entry) in raw.coupling.iter().enumerate() {
            let field = format!("environment.coupling[{c}]");
            let i = self.slice_ref(&format!("{field}.slice"), &entry.slice)?;
            let from = self.slice_ref(&format!("{field}.from"), &entry.from)?;
            let k = self.kpi_names.iter().position(|x| *x == entry.kpi).ok_or_else(|| {
                Error::validation(format!("{field}.kpi"), format!("unknown KPI `{}`", entry.kpi))
            })?;
            if !entry.gamma.is_finite() || entry.gamma < 0.0 {
                return Err(Error::validation(
                    format!("{field}.gamma"),
                    format!("coupling must be finite and >= 0, got {}", entry.gamma),
                ));
            }
            if i == from && entry.gamma != 0.0 {
                return Err(Error::validation(
                    format!("{field}.from"),
                    "a slice cannot couple to itself",
                ));
            }
            if entry.gamma != 0.0 && self.sharing_eligible.is_empty() {
                return Err(Error::validation(
                    format!("{field}.gamma"),
                    "coupling requires slices that can share a resource; no resource is sharing-eligible",
                ));
            }
            gamma[i][k][from] += entry.gamma;
        }
        EnvironmentModel::new(baseline, gamma, raw.damping, raw.tol, raw.max_iter)
            .map_err(|e| Error::validation("environment", e.to_string()))
    }

    fn environment_to_raw(&self, env: &EnvironmentModel) -> RawEnvironment {
        let baseline = self
            .slices
            .iter()
            .zip(env.baseline())
            .map(|(s, row)| (s.id.clone(), row.clone()))
            .collect();
        let mut coupling = Vec::new();
        for (i, per_kpi) in env.coupling().iter().enumerate() {
            for (k, per_from) in per_kpi.iter().enumerate() {
                for (from, &g) in per_from.iter().enumerate() {
                    if g != 0.0 {
                        coupling.push(RawCoupling {
                            slice: self.slices[i].id.clone(),
                            kpi: self.kpi_names[k].clone(),
                            from: self.slices[from].id.clone(),
                            gamma: g,
                        });
                    }
                }
            }
        }
        RawEnvironment {
            baseline_kpi: Some(baseline),
            coupling,
            damping: env.damping(),
            tol: env.tol(),
            max_iter: env.max_iter(),
        }
    }

    pub(crate) fn trace_from_raw(&self, raw: RawTrace) -> Result<DemandTrace> {
        let t = raw.horizon;
        if t == 0 {
            return Err(Error::validation("trace.horizon", "horizon must be >= 1"));
        }
        let mut customer: Vec<Vec<f64>> =
            self.slices.iter().map(|s| vec![s.customer_size; t]).collect();
        let mut price: Vec<Vec<f64>> = self.slices.iter().map(|s| vec![s.price; t]).collect();
        let mut scale: Vec<Vec<f64>> = vec![vec![1.0; t]; self.m()];
        for (name, map, target) in [
            ("customer_size", &raw.customer_size, &mut customer),
            ("price", &raw.price, &mut price),
            ("kpi_scale", &raw.kpi_scale, &mut scale),
        ] {
            for (id, series) in map {
                let field = format!("trace.{name}.{id}");
                let i = self.slice_ref(&field, id)?;
                check_vector(&field, series, t)?;
                target[i] = series.clone();
            }
        }
        DemandTrace::new(t, customer, price, scale)
            .map_err(|e| Error::validation("trace", e.to_string()))
    }

    pub(crate) fn trace_to_raw(&self, trace: &DemandTrace) -> RawTrace {
        let dense = |series: &[Vec<f64>]| -> BTreeMap<String, Vec<f64>> {
            self.slices
                .iter()
                .zip(series)
                .map(|(s, v)| (s.id.clone(), v.clone()))
                .collect()
        };
        RawTrace {
            horizon: trace.horizon(),
            customer_size: dense(trace.customer_size()),
            price: dense(trace.price()),
            kpi_scale: dense(trace.kpi_scale()),
        }
    }

    /// Parses a standalone trace block and validates it against this scenario.
    pub fn trace_from_json_str(&self, text: &str) -> Result<DemandTrace> {
        let raw: RawTrace = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        self.trace_from_raw(raw)
    }

    fn operators_from_raw(&self, raw: RawOperators) -> Result<OperatorsConfig> {
        let n = self.n();
        if raw.members.is_empty() {
            return Err(Error::validation("operators.members", "at least one operator required"));
        }
        let mut owner: Vec<Option<usize>> = vec![None; self.m()];
        let mut members = Vec::with_capacity(raw.members.len());
        let mut share_sum = vec![0.0; n];
        for (o, op) in raw.members.iter().enumerate() {
            let field = format!("operators.members[{o}]");
            if members.iter().any(|x: &OperatorSpec| x.id == op.id) {
                return Err(Error::validation(
                    format!("{field}.id"),
                    format!("duplicate operator id `{}`", op.id),
                ));
            }
            if op.slices.is_empty() {
                return Err(Error::validation(
                    format!("{field}.slices"),
                    "an operator needs at least one slice",
                ));
            }
            let mut slices = Vec::with_capacity(op.slices.len());
            for (k, id) in op.slices.iter().enumerate() {
                let f = format!("{field}.slices[{k}]");
                let i = self.slice_ref(&f, id)?;
                if let Some(prev) = owner[i] {
                    return Err(Error::validation(
                        f,
                        format!("slice `{id}` already belongs to operator `{}`", raw.members[prev].id),
                    ));
                }
                owner[i] = Some(o);
                slices.push(i);
            }
            check_vector(&format!("{field}.capacity"), &op.capacity, n)?;
            for (acc, c) in share_sum.iter_mut().zip(&op.capacity) {
                *acc += c;
            }
            members.push(OperatorSpec {
                id: op.id.clone(),
                slices,
                capacity: op.capacity.clone(),
            });
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::validation(
                "operators.members",
                format!("slice `{}` is not assigned to any operator", self.slices[i].id),
            ));
        }
        for (j, (&sum, &cap)) in share_sum.iter().zip(self.pool.capacity.iter()).enumerate() {
            if sum > cap * (1.0 + 1e-12) {
                return Err(Error::validation(
                    "operators.members",
                    format!(
                        "operator shares of `{}` add up to {sum}, pool holds {cap}",
                        self.resource_names[j]
                    ),
                ));
            }
        }
        let mut traded = Vec::with_capacity(raw.traded.len());
        for (t, name) in raw.traded.iter().enumerate() {
            let f = format!("operators.traded[{t}]");
            let j = self
                .resource_index(name)
                .ok_or_else(|| Error::validation(&f, format!("unknown resource `{name}`")))?;
            if traded.contains(&j) {
                return Err(Error::validation(f, format!("duplicate resource `{name}`")));
            }
            traded.push(j);
        }
        if traded.is_empty() {
            return Err(Error::validation("operators.traded", "at least one traded resource required"));
        }
        let mk = raw.market;
        let prices = mk.initial_prices.unwrap_or_else(|| vec![0.0; traded.len()]);
        check_vector("operators.market.initial_prices", &prices, traded.len())?;
        if let Some(span) = &mk.grid_span {
            check_vector("operators.market.grid_span", span, traded.len())?;
        }
        let market = MarketConfig::new(mk.eta, mk.rounds, mk.tol, prices, mk.grid_points, mk.grid_span)
            .map_err(|e| Error::validation("operators.market", e.to_string()))?;
        Ok(OperatorsConfig {
            members,
            traded,
            market,
        })
    }

    fn operators_to_raw(&self, ops: &OperatorsConfig) -> RawOperators {
        RawOperators {
            members: ops
                .members
                .iter()
                .map(|op| RawOperator {
                    id: op.id.clone(),
                    slices: op.slices.iter().map(|&i| self.slices[i].id.clone()).collect(),
                    capacity: op.capacity.clone(),
                })
                .collect(),
            traded: ops
                .traded
                .iter()
                .map(|&j| self.resource_names[j].clone())
                .collect(),
            market: RawMarket {
                eta: ops.market.eta,
                rounds: ops.market.rounds,
                tol: ops.market.tol,
                initial_prices: Some(ops.market.initial_prices.clone()),
                grid_points: ops.market.grid_points,
                grid_span: ops.market.grid_span.clone(),
            },
        }
    }

    fn to_raw(&self) -> RawScenario {
        RawScenario {
            name: self.name.clone(),
            resources: self
                .resource_names
                .iter()
                .enumerate()
                .map(|(j, name)| RawResource {
                    name: name.clone(),
                    capacity: self.pool.capacity[j],
                    unit_cost: self.pool.unit_cost[j],
                })
                .collect(),
            kpis: self.kpi_names.clone(),
            slices: self
                .slices
                .iter()
                .zip(&self.scheme.slices)
                .map(|(s, d)| RawSlice {
                    id: s.id.clone(),
                    kpi: s.kpi.to_vec(),
                    customer_size: s.customer_size,
                    price: s.price,
                    min_resources: s.min_resources.to_vec(),
                    demand_matrix: d.matrix.clone(),
                    overhead: d.overhead.to_vec(),
                })
                .collect(),
            sharing_eligible: self
                .sharing_eligible
                .iter()
                .map(|&j| self.resource_names[j].clone())
                .collect(),
            environment: self.environment.as_ref().map(|e| self.environment_to_raw(e)),
            trace: self.trace.as_ref().map(|t| self.trace_to_raw(t)),
            operators: self.operators.as_ref().map(|o| self.operators_to_raw(o)),
        }
    }
}

fn check_vector(field: &str, values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::validation(
            field,
            format!("expected {expected} entries, got {}", values.len()),
        ));
    }
    for (k, v) in values.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::validation(
                format!("{field}[{k}]"),
                format!("must be finite and >= 0, got {v}"),
            ));
        }
    }
    Ok(())
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json_str(&text)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, scenario.to_json_string())?;
    Ok(())
}

/// Reads a standalone trace file for `scenario`.
pub fn load_trace(scenario: &Scenario, path: impl AsRef<Path>) -> Result<DemandTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    scenario.trace_from_json_str(&text)
}
