use entropic_hedge::numerics::{
    entropy_rate, entropy_rate_eigen, log_mean_exp, spd_sqrt, symmetric_eigen, SpdMatrix,
};
use proptest::prelude::*;

/// `B Bᵀ + shift·I` from raw entries of `B`.
fn spd_from(d: usize, raw: &[f64], shift: f64) -> SpdMatrix {
    let mut e = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            e[i * d + j] = (0..d).map(|k| raw[i * d + k] * raw[j * d + k]).sum::<f64>();
        }
        e[i * d + i] += shift;
    }
    SpdMatrix::new(d, e).unwrap()
}

fn spd() -> impl Strategy<Value = SpdMatrix> {
    (1usize..=3)
        .prop_flat_map(|d| (Just(d), prop::collection::vec(-1.5f64..1.5, d * d), 0.05f64..2.0))
        .prop_map(|(d, raw, shift)| spd_from(d, &raw, shift))
}

fn spd_pair() -> impl Strategy<Value = (SpdMatrix, SpdMatrix)> {
    (1usize..=3).prop_flat_map(|d| {
        let one = (prop::collection::vec(-1.5f64..1.5, d * d), 0.05f64..2.0);
        (one.clone(), one).prop_map(move |((ra, sa), (rb, sb))| (spd_from(d, &ra, sa), spd_from(d, &rb, sb)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn entropy_rate_is_nonnegative(s in spd()) {
        let g = entropy_rate(&s).unwrap();
        prop_assert!(g >= 0.0);
        let d = s.dim();
        let dist = (0..d * d)
            .map(|k| s.entries()[k] - if k % (d + 1) == 0 { 1.0 } else { 0.0 })
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if g == 0.0 {
            prop_assert!(dist < 1e-8);
        }
    }

    #[test]
    fn entropy_rate_is_convex((a, b) in spd_pair(), k in 1usize..=3) {
        let t = 0.25 * k as f64;
        let mid = a.combine(t, &b, 1.0 - t);
        let lhs = entropy_rate(&mid).unwrap();
        let rhs = t * entropy_rate(&a).unwrap() + (1.0 - t) * entropy_rate(&b).unwrap();
        prop_assert!(lhs <= rhs + 1e-10, "{lhs} > {rhs}");
    }

    #[test]
    fn entropy_rate_matches_eigen_formula(vals in prop::collection::vec(0.01f64..20.0, 1..=3)) {
        let direct = entropy_rate(&SpdMatrix::diag(&vals)).unwrap();
        let eig = entropy_rate_eigen(&vals).unwrap();
        prop_assert!((direct - eig).abs() <= 1e-12 * (1.0 + eig.abs()));
    }

    #[test]
    fn sqrt_is_psd_and_squares_back(s in spd()) {
        let r = spd_sqrt(&s);
        prop_assert!(r.eigenvalues().iter().all(|l| *l >= -1e-12));
        let d = s.dim();
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| r.get(i, k) * r.get(k, j)).sum();
                prop_assert!((v - s.get(i, j)).abs() <= 1e-9 * (1.0 + s.trace()));
            }
        }
    }

    #[test]
    fn eigen_decomposition_reconstructs(s in spd()) {
        let d = s.dim();
        let (vals, vecs) = symmetric_eigen(d, s.entries());
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|k| vecs[i * d + k] * vals[k] * vecs[j * d + k]).sum();
                prop_assert!((v - s.get(i, j)).abs() <= 1e-10 * (1.0 + s.trace()));
            }
        }
    }

    #[test]
    fn log_mean_exp_is_finite(xs in prop::collection::vec(-700.0f64..700.0, 1..64), big in -1e300f64..1e300) {
        let mut v = xs.clone();
        v.push(big);
        let r = log_mean_exp(&v).unwrap();
        prop_assert!(r.is_finite());
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r <= m + 1e-12 * m.abs().max(1.0));
        prop_assert!(r >= m - (v.len() as f64).ln() - 1e-12 * m.abs().max(1.0));
    }
}
