use entropic_hedge::envelope::{read_terminal, write_terminal, SampledFunction, SmoothTerminal};
use entropic_hedge::hjb::{
    compose_separable, extract_control, pde_residual_field, read_surface, required_steps, solve_cauchy_1d,
    write_surface, BoundaryMode, ValueSurface,
};
use entropic_hedge::numerics::Grid1D;
use proptest::prelude::*;

const SLICES: usize = 8;

/// `A sin(ωx + φ) + Bx + c`; the curvature is at most `Aω² < 0.6`.
#[derive(Debug, Clone, Copy)]
struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
    slope: f64,
    level: f64,
}

impl Wave {
    fn eval(&self, x: f64) -> f64 {
        self.amp * (self.freq * x + self.phase).sin() + self.slope * x + self.level
    }
}

fn wave() -> impl Strategy<Value = Wave> {
    (0.3f64..2.0, 0.0f64..6.3, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..0.6).prop_map(
        |(freq, phase, slope, level, k)| Wave { amp: k / (freq * freq), freq, phase, slope, level },
    )
}

fn grid() -> Grid1D {
    Grid1D::new(-4.0, 4.0, 65).unwrap()
}

fn terminal_on(g: Grid1D, values: Vec<f64>) -> SmoothTerminal {
    let h = SampledFunction::new(vec![g], values, 0.0).unwrap();
    let env = h.values.clone();
    SmoothTerminal::from_values(h, env, 0.0, 0.0, 0.0).unwrap()
}

fn solve(t: &SmoothTerminal, n_t: usize) -> ValueSurface {
    solve_cauchy_1d(t, n_t, SLICES, BoundaryMode::default()).unwrap()
}

fn steps(ts: &[&SmoothTerminal]) -> usize {
    ts.iter().map(|t| required_steps(t.alpha, t.h.axes[0].step(), SLICES)).max().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn comparison_principle(w in wave(), bump in prop::collection::vec(0.0f64..0.3, 65)) {
        let g = grid();
        let lo: Vec<f64> = g.nodes().iter().map(|x| w.eval(*x)).collect();
        let mut hi = lo.clone();
        // Raise by a smooth non-negative bump so both stay admissible.
        let b = bump[0];
        hi.iter_mut().zip(g.nodes()).for_each(|(v, x)| *v += b * (1.0 + 0.1 * (x / 4.0).cos()));
        let (tl, th) = (terminal_on(g, lo), terminal_on(g, hi));
        let n_t = steps(&[&tl, &th]);
        let (ul, uh) = (solve(&tl, n_t), solve(&th, n_t));
        prop_assert!(ul.values.iter().zip(&uh.values).all(|(a, b)| *a <= b + 1e-10));
    }

    #[test]
    fn constant_shift_commutes(w in wave(), c in -3.0f64..3.0) {
        let g = grid();
        let base: Vec<f64> = g.nodes().iter().map(|x| w.eval(*x)).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + c).collect();
        let (t0, t1) = (terminal_on(g, base), terminal_on(g, shifted));
        let n_t = steps(&[&t0, &t1]);
        let (u0, u1) = (solve(&t0, n_t), solve(&t1, n_t));
        for (a, b) in u0.values.iter().zip(&u1.values) {
            prop_assert!((b - a - c).abs() <= 1e-11, "{} vs {}", b - a, c);
        }
    }

    #[test]
    fn translation_on_shifted_grid(w in wave(), k in -40i32..40) {
        let g = grid();
        let y = k as f64 * g.step();
        let moved = Grid1D::new(g.lo + y, g.hi + y, g.count).unwrap();
        let t0 = terminal_on(g, g.nodes().iter().map(|x| w.eval(*x)).collect());
        let t1 = terminal_on(moved, g.nodes().iter().map(|x| w.eval(*x)).collect());
        let n_t = steps(&[&t0, &t1]);
        let (u0, u1) = (solve(&t0, n_t), solve(&t1, n_t));
        for j in 0..=SLICES {
            let t = u0.times.node(j);
            for x in g.nodes().iter().step_by(7) {
                let a = u0.value_at(t, &[*x]);
                let b = u1.value_at(t, &[*x + y]);
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn curvature_and_control_bounds(w in wave()) {
        let g = grid();
        let t = terminal_on(g, g.nodes().iter().map(|x| w.eval(*x)).collect());
        let u = solve(&t, steps(&[&t]));
        prop_assert!(u.alpha_observed >= 0.5 * t.alpha);
        for j in 0..=SLICES {
            prop_assert!(u.slice_curvature(j).1 <= 1.0 - 0.5 * t.alpha);
        }
        let c = extract_control(&u).unwrap();
        prop_assert!((c.lower_bound - 1.0 / (1.0 + 2.0 * t.c_semiconvex)).abs() < 1e-15);
        prop_assert!(c.values.iter().all(|s| *s >= c.lower_bound - 1e-6 && *s <= c.upper_bound + 1e-6));
    }

    #[test]
    fn separable_residuals_add(w1 in wave(), w2 in wave()) {
        let (gx, gy) = (grid(), Grid1D::new(-3.0, 3.0, 49).unwrap());
        let t1 = terminal_on(gx, gx.nodes().iter().map(|x| w1.eval(*x)).collect());
        let t2 = terminal_on(gy, gy.nodes().iter().map(|x| w2.eval(*x)).collect());
        let n_t = steps(&[&t1, &t2]);
        let (u1, u2) = (solve(&t1, n_t), solve(&t2, n_t));
        let u = compose_separable(&u1, &u2).unwrap();
        let (r1, r2, r) = (pde_residual_field(&u1), pde_residual_field(&u2), pde_residual_field(&u));
        let (mx, my) = (gx.count - 2, gy.count - 2);
        for j in 0..SLICES {
            for i in 0..mx {
                for k in 0..my {
                    let sum = r1[j * mx + i] + r2[j * my + k];
                    prop_assert!((r[(j * mx + i) * my + k] - sum).abs() <= 1e-10);
                }
            }
        }
        let (x, y) = (gx.node(10), gy.node(31));
        prop_assert_eq!(u.value_at(0.0, &[x, y]), u1.value_at(0.0, &[x]) + u2.value_at(0.0, &[y]));
    }
}

#[test]
fn surface_and_terminal_round_trip() {
    let g = grid();
    let w = Wave { amp: 0.2, freq: 1.0, phase: 0.3, slope: 0.1, level: 0.5 };
    let t = terminal_on(g, g.nodes().iter().map(|x| w.eval(*x)).collect());
    let u = solve(&t, steps(&[&t]));
    let dir = tempfile::tempdir().unwrap();
    write_surface(&u, &dir.path().join("u.bin")).unwrap();
    assert_eq!(read_surface(&dir.path().join("u.bin")).unwrap(), u);
    write_terminal(&t, &dir.path().join("h.txt")).unwrap();
    assert_eq!(read_terminal(&dir.path().join("h.txt")).unwrap(), t);
}

#[test]
fn corrupted_surface_is_rejected() {
    let g = grid();
    let t = terminal_on(g, g.nodes().iter().map(|x| 0.25 * x * x).collect());
    let u = solve(&t, steps(&[&t]));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("u.bin");
    write_surface(&u, &p).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0x7f;
    std::fs::write(&p, &bytes).unwrap();
    assert!(read_surface(&p).is_err());
}
