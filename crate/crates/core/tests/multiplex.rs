mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sliceopt::ga::{solve_ga, GaParams};
use sliceopt::multiplex::{
    enumerate_candidates, multiplexing_gain, pareto_filter, solve_bcd, solve_exhaustive,
    DEFAULT_SCHEME_CAP,
};
use sliceopt::orthogonal::{brute_force_oracle_with, grid_tolerance, solve_objective_sum};
use sliceopt::{Scenario, SharingMode};

use common::{random_scenario, Shape};

fn random(seed: u64, max_m: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_scenario(
        &mut rng,
        Shape {
            max_m,
            overhead: true,
            reservations: true,
            ..Shape::default()
        },
    )
}

#[test]
fn s2m_shares_bandwidth() {
    let s = common::load("s2m.json");
    let r = solve_exhaustive(&s, DEFAULT_SCHEME_CAP).unwrap();
    assert_eq!(r.sharing, vec![SharingMode::Shared, SharingMode::Dedicated]);
    assert!((r.sizes[0] - 4.0).abs() <= 0.02 && (r.sizes[1] - 4.0).abs() <= 0.02);
    assert!((r.outcome.total_profit - 4.0).abs() <= 0.02);
    assert!((multiplexing_gain(&s).unwrap() - 1.0 / 3.0).abs() <= 0.04);
}

#[test]
fn gain_is_zero_without_eligible_resources() {
    let s = common::load("s2.json");
    assert_eq!(multiplexing_gain(&s).unwrap(), 0.0);
}

#[test]
fn bcd_on_s2m_reaches_the_optimum_quickly() {
    let s = common::load("s2m.json");
    let cands = enumerate_candidates(&s, DEFAULT_SCHEME_CAP).unwrap();
    let bcd = solve_bcd(&s, &cands, 0, 10).unwrap();
    assert!(bcd.trace.windows(2).all(|w| w[1] >= w[0]), "{:?}", bcd.trace);
    assert!(bcd.rounds <= 3);
    assert!(bcd.converged);
    assert!((bcd.result.outcome.total_profit - 4.0).abs() <= 0.02);
}

/// Independent exhaustive optimum: the best grid point over every scheme.
fn grid_over_schemes(s: &Scenario, step: f64) -> Option<f64> {
    let cands = enumerate_candidates(s, DEFAULT_SCHEME_CAP).unwrap();
    cands
        .schemes()
        .iter()
        .filter_map(|sh| brute_force_oracle_with(s, sh, step, None, 2_000_000).ok())
        .map(|r| r.outcome.total_profit)
        .reduce(f64::max)
}

#[test]
fn fifty_random_instances_keep_the_ordering() {
    let mut checked = 0;
    for seed in 0..50u64 {
        let s = random(seed, 3);
        let cands = enumerate_candidates(&s, DEFAULT_SCHEME_CAP).unwrap();
        let (Ok(ex), Ok(ded)) = (solve_exhaustive(&s, DEFAULT_SCHEME_CAP), solve_objective_sum(&s)) else {
            continue;
        };
        let bcd = solve_bcd(&s, &cands, 0, 50).unwrap();
        let b = bcd.result.outcome.total_profit;
        assert!(b <= ex.outcome.total_profit + 1e-9, "seed {seed}");
        assert!(b >= ded.outcome.total_profit - 0.02, "seed {seed}");
        assert!(bcd.trace.windows(2).all(|w| w[1] >= w[0]), "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 25, "only {checked} feasible instances");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhaustive_matches_per_scheme_grid(seed in any::<u64>()) {
        let s = random(seed, 2);
        let step = 0.05;
        let Some(grid) = grid_over_schemes(&s, step) else { return Ok(()) };
        let ex = solve_exhaustive(&s, DEFAULT_SCHEME_CAP).unwrap();
        let eps = grid_tolerance(&s, step).unwrap();
        prop_assert!(ex.outcome.total_profit >= grid - 1e-9);
        prop_assert!(ex.outcome.total_profit - grid <= eps + 1e-9);
    }

    #[test]
    fn sharing_never_shrinks_the_feasible_set(seed in any::<u64>(), raw in prop::collection::vec(0.0f64..8.0, 3)) {
        let s = random(seed, 3);
        let sizes = &raw[..s.m()];
        let mut sharing = s.scheme.sharing.clone();
        let mut feasible = s.evaluate_with(&sharing, sizes).unwrap().feasible;
        for &j in &s.sharing_eligible {
            sharing[j] = SharingMode::Shared;
            let now = s.evaluate_with(&sharing, sizes).unwrap().feasible;
            prop_assert!(!feasible || now);
            feasible = now;
        }
    }
}

#[test]
fn ga_front_on_s2m() {
    let s = common::load("s2m.json");
    let mut hits = 0;
    for seed in 0..5 {
        let params = GaParams { seed, ..GaParams::default() };
        let front = solve_ga(&s, &params).unwrap();
        for p in &front.points {
            let sharing = enumerate_candidates(&s, params.scheme_cap).unwrap().schemes()[p.scheme_index].clone();
            assert!(s.evaluate_with(&sharing, &p.sizes).unwrap().feasible);
        }
        let again = pareto_filter(front.points.clone()).unwrap();
        assert_eq!(again, front);
        let best = front.best_total().unwrap().total();
        if (best - 4.0).abs() <= 0.04 {
            hits += 1;
        }
        if seed == 0 {
            assert_eq!(solve_ga(&s, &params).unwrap(), front);
        }
    }
    assert!(hits >= 4, "{hits} of 5 seeds within 1%");
}
