use entropic_hedge::payoffs::PayoffSpec;
use proptest::prelude::*;

fn weights(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, d)
}

fn lipschitz_payoff() -> impl Strategy<Value = PayoffSpec> {
    (1usize..=2).prop_flat_map(|d| {
        prop_oneof![
            (0.0f64..5.0, weights(d)).prop_map(|(strike, weights)| PayoffSpec::Put { strike, weights }),
            (0.0f64..5.0, -2.0f64..5.0, weights(d))
                .prop_map(|(cap, strike, weights)| PayoffSpec::TruncatedCall { cap, strike, weights }),
        ]
    })
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, d)
}

fn weight_sum(f: &PayoffSpec) -> f64 {
    match f {
        PayoffSpec::Put { weights, .. } | PayoffSpec::TruncatedCall { weights, .. } => weights.iter().sum(),
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn put_and_truncated_call_are_lipschitz(
        (f, x, y) in lipschitz_payoff().prop_flat_map(|f| {
            let d = f.dim().unwrap();
            (Just(f), point(d), point(d))
        })
    ) {
        let d = x.len() as f64;
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let lhs = (f.eval(&x) - f.eval(&y)).abs();
        prop_assert!(lhs <= weight_sum(&f) * dist * d + 1e-12);
    }

    #[test]
    fn barrier_is_lower_semicontinuous(radius in 0.1f64..5.0, level in 0.0f64..2.0, theta in 0.0f64..6.3) {
        let f = PayoffSpec::Barrier { inner: Box::new(PayoffSpec::constant(level, 2)), radius };
        let on = [radius * theta.cos(), radius * theta.sin()];
        let inside = [on[0] * (1.0 - 1e-9), on[1] * (1.0 - 1e-9)];
        let outside = [on[0] * (1.0 + 1e-9), on[1] * (1.0 + 1e-9)];
        let v = f.eval(&on);
        prop_assert!(f.eval(&inside) >= v);
        prop_assert!(f.eval(&outside) <= v);
    }

    #[test]
    fn linear_adjustment_adds_affine_part(
        c0 in -5.0f64..5.0,
        slope in prop::collection::vec(-3.0f64..3.0, 1),
        strike in 0.0f64..3.0,
        x in point(1),
    ) {
        let base = PayoffSpec::Put { strike, weights: vec![1.0] };
        let adj = PayoffSpec::LinearAdjusted { c0, slope: slope.clone(), base: Box::new(base.clone()) };
        let affine = c0 + slope[0] * x[0];
        let diff = adj.eval(&x) - base.eval(&x);
        prop_assert!((diff - affine).abs() <= 4.0 * f64::EPSILON * (affine.abs() + base.eval(&x) + 1.0));
        let (c, s, rest) = adj.split_linear();
        prop_assert_eq!(c, c0);
        prop_assert_eq!(s, slope);
        prop_assert_eq!(rest, &base);
    }
}
