use magagmon::fields::{GaugeFunction, VectorField2D};
use magagmon::geometry::{Domain, Grid2D, Point, Rect};
use magagmon::heatkernel::mehler_kernel;
use magagmon::spectral::build_peierls;
use num_complex::Complex64;
use proptest::prelude::*;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vector(seed: u64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let s = (i as f64 + 1.0) * (seed as f64 * 0.618 + 0.1);
            Complex64::new(s.sin(), (1.7 * s).cos())
        })
        .collect()
}

fn grids() -> impl Strategy<Value = Grid2D> {
    prop_oneof![
        (6usize..14).prop_map(|n| Grid2D::over_box(Rect::centered_square(2.0).unwrap(), n, n).unwrap()),
        (8usize..16).prop_map(|n| Grid2D::new(Domain::disc(Point::new(0.2, -0.1), 1.5).unwrap(), n, n).unwrap()),
    ]
}

fn shifts() -> impl Strategy<Value = GaugeFunction> {
    prop_oneof![
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(a, b, c, d, e)| GaugeFunction::Quadratic { a, b, c, d, e }),
        (0.1..2.0f64, 0.1..3.0f64, 0.1..3.0f64).prop_map(|(amp, kx, ky)| GaugeFunction::Trig { amp, kx, ky }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn peierls_operator_is_hermitian(grid in grids(), beta0 in 0.0..3.0f64, phi in shifts(), seed in 0u64..1000) {
        let op = build_peierls(&grid, &VectorField2D::landau(beta0).gauge_shifted(phi)).unwrap();
        let n = op.dim();
        let (u, v) = (vector(seed, n), vector(seed + 17, n));
        let lhs = dot(&u, &op.apply(&v));
        let rhs = dot(&op.apply(&u), &v);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
    }

    #[test]
    fn gauge_shift_conjugates_operator(grid in grids(), beta0 in 0.0..3.0f64, phi in shifts(), seed in 0u64..1000) {
        let base = build_peierls(&grid, &VectorField2D::landau(beta0)).unwrap();
        let shifted = build_peierls(&grid, &VectorField2D::landau(beta0).gauge_shifted(phi)).unwrap();
        let phase: Vec<Complex64> = base
            .nodes()
            .iter()
            .map(|&k| Complex64::from_polar(1.0, phi.value(grid.node(k % grid.nx(), k / grid.nx()))))
            .collect();
        let u = vector(seed, base.dim());
        let pu: Vec<Complex64> = u.iter().zip(&phase).map(|(a, b)| a * b).collect();
        let lhs = shifted.apply(&pu);
        let rhs: Vec<Complex64> = base.apply(&u).iter().zip(&phase).map(|(a, b)| a * b).collect();
        let scale = rhs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn uniform_field_kernel_is_hermitian(
        x in (-3.0..3.0f64, -3.0..3.0f64),
        y in (-3.0..3.0f64, -3.0..3.0f64),
        t in 0.05..3.0f64,
        beta0 in 0.0..4.0f64,
    ) {
        let (x, y) = (Point::new(x.0, x.1), Point::new(y.0, y.1));
        let kxy = mehler_kernel(x, y, t, beta0).unwrap();
        let kyx = mehler_kernel(y, x, t, beta0).unwrap();
        prop_assert!((kxy - kyx.conj()).norm() <= 1e-14 * (1.0 + kxy.norm()));
        let free = (-(x - y).norm_sq() / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t);
        prop_assert!(kxy.norm() <= free * (1.0 + 1e-12));
    }
}
