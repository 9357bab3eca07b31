use proptest::prelude::*;

use multapprox_core::convergence::{
    estimate_exceedance, log_ratio_residual, monotonicity_break, Exceedance,
};
use multapprox_core::market::{simulate, AssetPaths, JumpLaw, ModelSpec, PriceTable};
use multapprox_core::portfolio::{
    check_no_short_sales, epsilon_shift, fractions_from_units, target_tracking_schedule,
    units_from_fractions, wealth_additive_units, wealth_continuous, wealth_multiplicative,
    wealth_multiplicative_with_units, FractionStrategy, Partition, SimplexVector,
};
use multapprox_core::stats::wilson_interval;
use multapprox_core::utility::{optimize_constant_fraction, project_capped_simplex, GrowthProblem};

fn fixture(rows: Vec<Vec<f64>>) -> AssetPaths {
    let table = PriceTable::uniform(1.0, rows).unwrap();
    let grid = table.grid();
    simulate(&ModelSpec::Fixture(table), grid, 1, 0).unwrap()
}

/// Price rows for `d` assets; each asset may be absorbed at zero.
fn price_rows(d: usize, max_steps: usize, allow_zero: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_steps).prop_flat_map(move |n| {
        proptest::collection::vec(
            proptest::collection::vec((0.5f64..2.0, 0u8..20), d),
            n,
        )
        .prop_map(move |steps| {
            let mut rows = vec![vec![1.0; d]];
            for step in steps {
                let prev = rows.last().unwrap().clone();
                let next = prev
                    .iter()
                    .zip(&step)
                    .map(|(&s, &(factor, kill))| if allow_zero && kill == 0 { 0.0 } else { s * factor })
                    .collect();
                rows.push(next);
            }
            rows
        })
    })
}

/// A point of `{pi >= 0, sum pi <= cap}`.
fn simplex(d: usize, cap: f64) -> impl Strategy<Value = SimplexVector> {
    (proptest::collection::vec(0.0f64..1.0, d), 0.0f64..1.0).prop_map(move |(w, slack)| {
        let total: f64 = w.iter().sum::<f64>() + slack;
        let v = if total == 0.0 { vec![0.0; w.len()] } else { w.iter().map(|x| cap * x / total).collect() };
        SimplexVector::new(v).unwrap()
    })
}

/// Sorted rebalancing indices containing 0 and `n`.
fn partition(n: usize, picks: &[bool]) -> Partition {
    let mut idx = vec![0];
    idx.extend((1..n).filter(|k| picks[k % picks.len()]));
    idx.push(n);
    Partition::shared(n, idx).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn multiplicative_wealth_is_nonnegative_and_absorbing(
        rows in price_rows(2, 12, true),
        pi in simplex(2, 1.0),
        picks in proptest::collection::vec(any::<bool>(), 1..8),
        x in 0.1f64..10.0,
    ) {
        let paths = fixture(rows);
        let n = paths.grid().n_steps();
        let strategy = FractionStrategy::constant(pi);
        let part = partition(n, &picks);
        let (w, units) = wealth_multiplicative_with_units(x, &strategy, &part, &paths).unwrap();
        let path = w.path(0);
        prop_assert!(path.iter().all(|&v| v >= 0.0));
        if let Some(z) = path.iter().position(|&v| v == 0.0) {
            prop_assert!(path[z..].iter().all(|&v| v == 0.0));
        }
        prop_assert!(check_no_short_sales(&units, &paths, &w).unwrap().is_empty());
        prop_assert!(wealth_continuous(x, &strategy, &paths).unwrap().path(0).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn fine_partition_reproduces_continuous_wealth(
        rows in price_rows(2, 16, true),
        pi in simplex(2, 1.0),
    ) {
        let paths = fixture(rows);
        let n = paths.grid().n_steps();
        let strategy = FractionStrategy::constant(pi);
        let cont = wealth_continuous(1.0, &strategy, &paths).unwrap();
        let mult = wealth_multiplicative(1.0, &strategy, &Partition::fine(n), &paths).unwrap();
        for (a, b) in mult.path(0).iter().zip(cont.path(0)) {
            prop_assert!(*b == 0.0 && *a == 0.0 || rel(*a, *b) <= 1e-12);
        }
    }

    #[test]
    fn full_investment_tracks_the_asset(
        rows in price_rows(1, 16, false),
        picks in proptest::collection::vec(any::<bool>(), 1..8),
        x in 0.1f64..10.0,
    ) {
        let paths = fixture(rows);
        let n = paths.grid().n_steps();
        let one = FractionStrategy::constant(SimplexVector::new(vec![1.0]).unwrap());
        let part = partition(n, &picks);
        let cont = wealth_continuous(x, &one, &paths).unwrap();
        let mult = wealth_multiplicative(x, &one, &part, &paths).unwrap();
        let add = wealth_additive_units(x, &target_tracking_schedule(x, &one, &part, &paths).unwrap(), &paths).unwrap();
        for k in 0..=n {
            let target = x * paths.price(0, k, 0);
            for w in [&cont, &mult, &add.wealth] {
                prop_assert!(rel(w.value(0, k), target) <= 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_shift_stays_above_epsilon(
        rows in price_rows(1, 10, true),
        pi in simplex(1, 1.0),
        eps in 0.001f64..0.5,
    ) {
        let paths = fixture(rows);
        let n = paths.grid().n_steps();
        let w = wealth_multiplicative(1.0, &FractionStrategy::constant(pi), &Partition::fine(n), &paths).unwrap();
        let shifted = epsilon_shift(&w, 1.0, eps).unwrap();
        prop_assert!(shifted.values().iter().all(|&v| v >= eps));
        prop_assert_eq!(shifted.value(0, 0), 1.0);
    }

    #[test]
    fn residual_does_not_depend_on_the_partition(
        rows in price_rows(2, 12, false),
        pi in simplex(2, 0.9),
        picks in proptest::collection::vec(any::<bool>(), 1..8),
    ) {
        let paths = fixture(rows);
        let n = paths.grid().n_steps();
        let strategy = FractionStrategy::constant(pi);
        let coarse = log_ratio_residual(1.0, &strategy, &partition(n, &picks), &paths).unwrap();
        let single = log_ratio_residual(1.0, &strategy, &Partition::shared(n, vec![0, n]).unwrap(), &paths).unwrap();
        prop_assert!((coarse[0].residual - single[0].residual).abs() <= 1e-10);
    }

    #[test]
    fn units_and_fractions_round_trip(
        pi in simplex(3, 1.0),
        prices in proptest::collection::vec(0.01f64..100.0, 3),
        wealth in 0.01f64..100.0,
    ) {
        let units = units_from_fractions(&pi, &prices, wealth).unwrap();
        let back = fractions_from_units(&units, &prices, wealth).unwrap();
        for (a, b) in back.as_slice().iter().zip(pi.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_lands_on_the_nearest_simplex_point(
        v in proptest::collection::vec(-2.0f64..2.0, 1..5),
        w in proptest::collection::vec(0.0f64..1.0, 5),
        slack in 0.0f64..1.0,
    ) {
        let p = project_capped_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
        let again = project_capped_simplex(&p);
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        // any other feasible point is at least as far away
        let total: f64 = w[..v.len()].iter().sum::<f64>() + slack;
        let q: Vec<f64> = w[..v.len()].iter().map(|x| if total > 0.0 { x / total } else { 0.0 }).collect();
        let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        prop_assert!(dist(&p) <= dist(&q) + 1e-12);
    }

    #[test]
    fn growth_objective_is_concave(
        a in simplex(2, 1.0),
        b in simplex(2, 1.0),
        mu in proptest::collection::vec(-0.1f64..0.3, 2),
    ) {
        let p = GrowthProblem::new(mu, vec![0.04, 0.01, 0.01, 0.09])
            .unwrap()
            .with_jumps(vec![1.0, 0.5], vec![JumpLaw::TwoPoint { low: -0.4, high: 0.25, p_low: 0.5 }, JumpLaw::Fixed(-0.3)])
            .unwrap();
        let mid: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect();
        let (ga, gb, gm) = (p.objective(a.as_slice()), p.objective(b.as_slice()), p.objective(&mid));
        prop_assert!(gm >= 0.5 * (ga + gb) - 1e-12);
        let r = optimize_constant_fraction(&p).unwrap();
        prop_assert!(r.value >= ga - 1e-9 && r.value >= gb - 1e-9);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(hits in 0usize..500, extra in 1usize..500) {
        let n = (hits + extra) as f64;
        let p = hits as f64 / n;
        let (lo, hi) = wilson_interval(p, n);
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        let (lo4, hi4) = wilson_interval(p, 4.0 * n);
        prop_assert!(hi4 - lo4 < hi - lo);
    }

    #[test]
    fn exceedance_falls_with_the_threshold(
        d in proptest::collection::vec(0.0f64..1.0, 1..50),
        e1 in 0.001f64..1.0,
        e2 in 0.001f64..1.0,
    ) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(estimate_exceedance(&d, hi).unwrap().p_hat <= estimate_exceedance(&d, lo).unwrap().p_hat);
    }

    #[test]
    fn non_increasing_ladders_never_break(mut ps in proptest::collection::vec(0.0f64..1.0, 1..8)) {
        ps.sort_by(|a, b| b.total_cmp(a));
        let levels: Vec<Exceedance> = ps
            .iter()
            .map(|&p| {
                let (ci_lo, ci_hi) = wilson_interval(p, 100.0);
                Exceedance { p_hat: p, ci_lo, ci_hi, n: 100.0 }
            })
            .collect();
        prop_assert_eq!(monotonicity_break(&levels), None);
    }
}
