#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use serde_json::{json, Value};
use sliceopt::Scenario;

pub fn scenario_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(file)
}

pub fn load(file: &str) -> Scenario {
    sliceopt::load_scenario(scenario_path(file)).unwrap()
}

fn pick(rng: &mut impl Rng, lo: f64, hi: f64, step: f64) -> f64 {
    let k = ((hi - lo) / step).round() as u32;
    lo + step * rng.random_range(0..=k) as f64
}

/// Knobs for [`random_scenario_json`].
#[derive(Clone, Copy)]
pub struct Shape {
    pub max_m: usize,
    pub max_n: usize,
    pub max_l: usize,
    pub max_eligible: usize,
    pub overhead: bool,
    pub reservations: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_m: 3,
            max_n: 3,
            max_l: 2,
            max_eligible: 2,
            overhead: false,
            reservations: false,
        }
    }
}

/// A small random scenario as JSON. Values sit on coarse grids so that
/// instances stay readable when a test fails.
pub fn random_scenario_json(rng: &mut impl Rng, shape: Shape) -> Value {
    let m = rng.random_range(1..=shape.max_m);
    let n = rng.random_range(1..=shape.max_n);
    let l = rng.random_range(1..=shape.max_l);
    let names: Vec<String> = (0..n).map(|j| format!("r{j}")).collect();
    let caps: Vec<f64> = (0..n).map(|_| pick(rng, 5.0, 20.0, 0.5)).collect();
    let resources: Vec<Value> = (0..n)
        .map(|j| json!({"name": names[j], "capacity": caps[j], "unit_cost": pick(rng, 0.1, 1.0, 0.05)}))
        .collect();
    let slices: Vec<Value> = (0..m)
        .map(|i| {
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..l)
                        .map(|_| if rng.random_bool(0.25) { 0.0 } else { pick(rng, 0.25, 1.5, 0.25) })
                        .collect()
                })
                .collect();
            let overhead: Vec<f64> = (0..n)
                .map(|_| if shape.overhead && rng.random_bool(0.3) { pick(rng, 0.0, 1.0, 0.25) } else { 0.0 })
                .collect();
            let min: Vec<f64> = (0..n)
                .map(|j| {
                    if shape.reservations && rng.random_bool(0.2) {
                        pick(rng, 0.0, 1.0, 0.25).min(caps[j])
                    } else {
                        0.0
                    }
                })
                .collect();
            json!({
                "id": format!("s{i}"),
                "kpi": (0..l).map(|_| pick(rng, 0.5, 3.0, 0.25)).collect::<Vec<_>>(),
                "customer_size": pick(rng, 1.0, 8.0, 0.5),
                "price": pick(rng, 1.0, 5.0, 0.25),
                "min_resources": min,
                "demand_matrix": matrix,
                "overhead": overhead,
            })
        })
        .collect();
    let e = rng.random_range(0..=shape.max_eligible.min(n));
    let mut eligible: Vec<String> = names.clone();
    while eligible.len() > e {
        let k = rng.random_range(0..eligible.len());
        eligible.remove(k);
    }
    json!({
        "name": "random",
        "resources": resources,
        "kpis": (0..l).map(|k| format!("k{k}")).collect::<Vec<_>>(),
        "slices": slices,
        "sharing_eligible": eligible,
    })
}

pub fn random_scenario(rng: &mut impl Rng, shape: Shape) -> Scenario {
    Scenario::from_json_str(&random_scenario_json(rng, shape).to_string()).unwrap()
}

/// Straight-line profit of slice sizes with every resource dedicated:
/// per-slice `p min(s, c) - sum_j cost_j (s (A k)_j + b_j [s > 0])`.
pub fn straight_line_profits(doc: &Value, sizes: &[f64]) -> Vec<f64> {
    let costs: Vec<f64> = doc["resources"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["unit_cost"].as_f64().unwrap())
        .collect();
    doc["slices"]
        .as_array()
        .unwrap()
        .iter()
        .zip(sizes)
        .map(|(s, &size)| {
            let kpi: Vec<f64> = s["kpi"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            let mut spend = 0.0;
            for (j, row) in s["demand_matrix"].as_array().unwrap().iter().enumerate() {
                let per_unit: f64 = row
                    .as_array()
                    .unwrap()
                    .iter()
                    .zip(&kpi)
                    .map(|(a, k)| a.as_f64().unwrap() * k)
                    .sum();
                let b = if size > 0.0 { s["overhead"][j].as_f64().unwrap() } else { 0.0 };
                spend += costs[j] * (size * per_unit + b);
            }
            let c = s["customer_size"].as_f64().unwrap();
            s["price"].as_f64().unwrap() * size.min(c) - spend
        })
        .collect()
}
