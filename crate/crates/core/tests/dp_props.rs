use entropic_hedge::dp::{certainty_equivalent, inner_objective};
use entropic_hedge::dual::{lower_bound_cn, optimize_piecewise};
use entropic_hedge::hedging::{criterion_exact_1d, MarketSpec, StrategySpec};
use entropic_hedge::numerics::{gauss_hermite, Grid1D, QuadRule};
use entropic_hedge::payoffs::{PayoffSpec, SampledPayoff};
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::with_step(-8.0, 8.0, 1.0 / 16.0).unwrap()
}

fn rule() -> QuadRule {
    gauss_hermite(32).unwrap()
}

fn market(b: f64) -> MarketSpec {
    MarketSpec::new(vec![0.0], vec![b]).unwrap()
}

fn ce(f: &PayoffSpec, n: usize, b: f64) -> f64 {
    certainty_equivalent(f, n, &market(b), &grid(), &rule()).unwrap().c_n
}

/// Bounded payoff sampled on `[−4, 4]`.
fn sampled() -> impl Strategy<Value = PayoffSpec> {
    prop::collection::vec(-1.0f64..1.0, 17).prop_map(|values| {
        PayoffSpec::Sampled(SampledPayoff {
            axes: vec![Grid1D::new(-4.0, 4.0, 17).unwrap()],
            values,
            declared_bounded: true,
        })
    })
}

fn put() -> impl Strategy<Value = PayoffSpec> {
    (0.2f64..2.0, 0.2f64..1.5).prop_map(|(strike, a)| PayoffSpec::Put { strike, weights: vec![a] })
}

const QUADRATURE_TOL: f64 = 1e-6;

fn sup(f: &PayoffSpec) -> f64 {
    grid().nodes().iter().map(|x| f.eval(&[*x])).fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn monotone_in_payoff(f in sampled(), bumps in prop::collection::vec(0.0f64..0.5, 17), n in 1usize..=3) {
        let PayoffSpec::Sampled(s) = &f else { unreachable!() };
        let mut t = s.clone();
        t.values.iter_mut().zip(&bumps).for_each(|(v, b)| *v += b);
        let g = PayoffSpec::Sampled(t);
        prop_assert!(ce(&f, n, 0.0) <= ce(&g, n, 0.0) + 1e-8);
    }

    #[test]
    fn cash_translates(f in sampled(), c in -2.0f64..2.0, n in 1usize..=3, b in -0.5f64..0.5) {
        let PayoffSpec::Sampled(s) = &f else { unreachable!() };
        let mut t = s.clone();
        t.values.iter_mut().for_each(|v| *v += c);
        let diff = ce(&PayoffSpec::Sampled(t), n, b) - ce(&f, n, b);
        prop_assert!((diff - c).abs() <= 1e-10, "{diff} vs {c}");
    }

    #[test]
    fn bounded_by_sup(f in sampled(), n in 1usize..=4, b in -0.5f64..0.5) {
        prop_assert!(ce(&f, n, b) <= sup(&f) + 1e-8);
    }

    #[test]
    fn sandwiched_by_dual_and_strategies(f in put(), n in 1usize..=4, b in -0.5f64..0.5, g in -1.0f64..1.0) {
        let c = ce(&f, n, b);
        let (_, dual) = optimize_piecewise(&f, 1, 100.0, &[0.0], &rule()).unwrap();
        prop_assert!(lower_bound_cn(dual.value, &[b], n) - QUADRATURE_TOL <= c);
        for s in [StrategySpec::Zero, StrategySpec::Constant(vec![g])] {
            let v = criterion_exact_1d(&f, &s, n, &market(b), &grid(), &rule()).unwrap();
            prop_assert!(c <= v + 1e-8, "{c} > {v}");
        }
    }

    #[test]
    fn inner_objective_is_convex(f in sampled(), x in -3.0f64..3.0, g in -3.0f64..3.0, w in 0.01f64..2.0, n in 1usize..=4) {
        let vnext = f_on_grid(&f);
        let obj = |gamma: f64| inner_objective(x, &grid(), &vnext, n, 0.1, &rule(), gamma);
        let (lo, hi) = (obj(g - w), obj(g + w));
        prop_assert!(obj(g) <= 0.5 * (lo + hi) + 1e-10);
    }
}

fn f_on_grid(f: &PayoffSpec) -> Vec<f64> {
    f.sample_on(&[grid()])
}

#[test]
fn linear_payoff_is_hedged_exactly() {
    let f = PayoffSpec::linear(0.0, vec![1.0]);
    let m = MarketSpec::new(vec![1.0], vec![0.5]).unwrap();
    let g = Grid1D::with_step(-7.0, 9.0, 1.0 / 16.0).unwrap();
    let q = gauss_hermite(64).unwrap();
    for n in [1, 2, 4, 8] {
        let c = certainty_equivalent(&f, n, &m, &g, &q).unwrap().c_n;
        assert!((c - (1.0 - 0.25 / (2.0 * n as f64))).abs() <= 1e-6, "n = {n}: {c}");
    }
}
