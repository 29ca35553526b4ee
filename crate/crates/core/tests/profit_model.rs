mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sliceopt::model::{
    pool_usage, resource_demand, revenue, Allocation, SharingMode,
};
use sliceopt::Scenario;

use common::{random_scenario_json, straight_line_profits, Shape};

fn instance(seed: u64, overhead: bool) -> (Value, Scenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let doc = random_scenario_json(
        &mut rng,
        Shape {
            overhead,
            reservations: true,
            ..Shape::default()
        },
    );
    let s = Scenario::from_json_str(&doc.to_string()).unwrap();
    (doc, s)
}

#[test]
fn s2_at_four_two_matches_hand_computation() {
    let s = common::load("s2.json");
    let out = s.evaluate(&[4.0, 2.0]).unwrap();
    // A: 3*4 - (1*8 + 0.5*4) = 2; B: 2.5*2 - (1*2 + 0.5*4) = 1
    assert_eq!(out.profits, vec![2.0, 1.0]);
    assert_eq!(out.total_profit, 3.0);
    assert!(out.feasible);
}

proptest! {
    #[test]
    fn evaluation_matches_straight_line_recomputation(
        seed in any::<u64>(),
        raw in prop::collection::vec(0.0f64..10.0, 3),
    ) {
        let (doc, s) = instance(seed, true);
        let sizes = &raw[..s.m()];
        let out = s.evaluate(sizes).unwrap();
        let oracle = straight_line_profits(&doc, sizes);
        for (a, b) in out.profits.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
        let sum: f64 = out.revenues.iter().zip(&out.expenditures).map(|(r, e)| r - e).sum();
        prop_assert!((out.total_profit - sum).abs() <= 1e-12 * sum.abs().max(1.0));
    }

    #[test]
    fn demand_is_monotone_and_revenue_saturates(
        seed in any::<u64>(),
        a in 0.0f64..10.0,
        extra in 0.0f64..10.0,
    ) {
        let (_, s) = instance(seed, true);
        for (i, spec) in s.slices.iter().enumerate() {
            let d = s.scheme.demand(i).unwrap();
            let lo = resource_demand(spec, a, d).unwrap();
            let hi = resource_demand(spec, a + extra, d).unwrap();
            for (x, y) in lo.iter().zip(hi.iter()) {
                prop_assert!(x <= y);
            }
            let c = spec.customer_size;
            prop_assert_eq!(revenue(spec, c + extra).unwrap(), revenue(spec, c).unwrap());
        }
    }

    #[test]
    fn dedicated_usage_is_column_sum_and_sharing_never_uses_more(
        seed in any::<u64>(),
        raw in prop::collection::vec(0.0f64..10.0, 3),
    ) {
        let (_, s) = instance(seed, true);
        let sizes = raw[..s.m()].to_vec();
        let alloc = Allocation::new(&s.slices, &s.scheme, sizes.clone()).unwrap();
        let dedicated = pool_usage(&alloc, &s.scheme).unwrap();
        for j in 0..s.n() {
            let col: f64 = alloc.resources().iter().map(|r| r[j]).sum();
            prop_assert_eq!(dedicated[j], col);
        }
        let shared_scheme = s.scheme.with_sharing(vec![SharingMode::Shared; s.n()]).unwrap();
        let shared = pool_usage(&alloc, &shared_scheme).unwrap();
        for j in 0..s.n() {
            prop_assert!(shared[j] <= dedicated[j]);
        }
        // feasible when dedicated implies feasible when shared
        let all_shared = vec![SharingMode::Shared; s.n()];
        let d = s.evaluate(&sizes).unwrap();
        let sh = s.evaluate_with(&all_shared, &sizes).unwrap();
        prop_assert!(!d.feasible || sh.feasible);
    }
}
