use entropic_hedge::envelope::{build_terminal, concave_envelope, mollify, shifted_envelope, SampledFunction};
use entropic_hedge::numerics::Grid1D;
use entropic_hedge::payoffs::PayoffSpec;
use proptest::prelude::*;

fn sampled_1d() -> impl Strategy<Value = SampledFunction> {
    (5usize..80, prop::collection::vec(-3.0f64..3.0, 80)).prop_map(|(n, v)| {
        let g = Grid1D::new(-2.0, 2.0, n).unwrap();
        SampledFunction::new(vec![g], v[..n].to_vec(), 0.0).unwrap()
    })
}

fn sampled_2d() -> impl Strategy<Value = SampledFunction> {
    (3usize..12, 3usize..12, prop::collection::vec(-3.0f64..3.0, 144)).prop_map(|(nx, ny, v)| {
        let axes = vec![Grid1D::new(-1.0, 1.0, nx).unwrap(), Grid1D::new(-2.0, 1.0, ny).unwrap()];
        SampledFunction::new(axes, v[..nx * ny].to_vec(), 0.0).unwrap()
    })
}

fn sampled() -> impl Strategy<Value = SampledFunction> {
    prop_oneof![3 => sampled_1d(), 1 => sampled_2d()]
}

fn second_differences_nonpositive(f: &SampledFunction) -> bool {
    let scale = 1.0 + f.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale;
    match f.dim() {
        1 => f.values.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] <= tol),
        _ => {
            let (nx, ny) = (f.axes[0].count, f.axes[1].count);
            let v = |i: usize, j: usize| f.values[i * ny + j];
            (0..nx).all(|i| (1..ny - 1).all(|j| v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1) <= tol))
                && (1..nx - 1).all(|i| (0..ny).all(|j| v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j) <= tol))
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn envelope_is_idempotent(g in sampled()) {
        let e = concave_envelope(&g).unwrap();
        let ee = concave_envelope(&e).unwrap();
        prop_assert_eq!(e.values, ee.values);
    }

    #[test]
    fn envelope_dominates_and_is_concave(g in sampled()) {
        let e = concave_envelope(&g).unwrap();
        prop_assert!(e.values.iter().zip(&g.values).all(|(a, b)| a >= b));
        prop_assert!(second_differences_nonpositive(&e));
        let gmax = g.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let emax = e.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((gmax - emax).abs() <= 1e-12 * (1.0 + gmax.abs()));
    }

    #[test]
    fn envelope_is_minimal(
        g in sampled(),
        params in prop::collection::vec((0.0f64..4.0, -2.0f64..2.0, -2.0f64..2.0, -1.0f64..1.0), 20),
    ) {
        let e = concave_envelope(&g).unwrap();
        for (a, mx, my, c) in params {
            let phi0 = |p: &[f64]| {
                let mut q = -a * (p[0] - mx).powi(2) + c * p[0];
                if p.len() == 2 {
                    q -= a * (p[1] - my).powi(2);
                }
                q
            };
            let lift = (0..g.len()).map(|k| g.values[k] - phi0(&g.point(k))).fold(f64::NEG_INFINITY, f64::max);
            for k in 0..g.len() {
                let phi = phi0(&g.point(k)) + lift;
                prop_assert!(e.values[k] <= phi + 1e-11 * (1.0 + phi.abs()));
            }
        }
    }

    #[test]
    fn envelope_is_monotone(g in sampled(), bumps in prop::collection::vec(0.0f64..1.0, 144)) {
        let mut h = g.clone();
        h.values.iter_mut().zip(&bumps).for_each(|(v, b)| *v += b);
        let (eg, eh) = (concave_envelope(&g).unwrap(), concave_envelope(&h).unwrap());
        prop_assert!(eg.values.iter().zip(&eh.values).all(|(a, b)| a <= b));
    }

    #[test]
    fn mollify_preserves_order(
        k in 3u32..6,
        base in prop::collection::vec(-1.0f64..1.0, 129),
        bumps in prop::collection::vec(0.0f64..0.5, 129),
    ) {
        let delta = 2f64.powi(-(k as i32));
        let g = Grid1D::new(-4.0, 4.0, 129).unwrap();
        let lo = shifted_envelope(&SampledFunction::new(vec![g], base.clone(), 1.0).unwrap()).unwrap();
        let raised: Vec<f64> = base.iter().zip(&bumps).map(|(a, b)| a + b).collect();
        let hi = shifted_envelope(&SampledFunction::new(vec![g], raised, 1.0).unwrap()).unwrap();
        let bigger: Vec<f64> = lo.values.iter().zip(&hi.values).map(|(a, b)| a.max(*b)).collect();
        let hi = SampledFunction::new(vec![g], bigger, 1.0).unwrap();
        let (ml, mh) = (mollify(&lo, delta).unwrap(), mollify(&hi, delta).unwrap());
        for i in 0..g.count {
            if ml.in_region(i) {
                prop_assert!(ml.values[i] <= mh.values[i] + 1e-9, "node {i}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn terminal_curvature_is_certified(strike in 0.2f64..2.0, a in 0.3f64..2.0, call in any::<bool>()) {
        let f = if call {
            PayoffSpec::TruncatedCall { cap: strike, strike: 0.5, weights: vec![a] }
        } else {
            PayoffSpec::Put { strike, weights: vec![a] }
        };
        let g = Grid1D::with_step(-12.0, 12.0, 1.0 / 32.0).unwrap();
        let t = build_terminal(&f, 0.1, &[g], 6.0).unwrap();
        let (_, hi) = t.h.hessian_range();
        prop_assert!(t.alpha > 0.0);
        prop_assert!(hi <= 1.0 - t.alpha + 1e-12);
        prop_assert!(t.epsilon <= 0.1);
    }
}
