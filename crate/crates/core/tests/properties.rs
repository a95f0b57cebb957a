use proptest::prelude::*;
use ricci_soliton::bryant::log_log_fit;
use ricci_soliton::chart::{CoordinateChart, DerivativeMode, Domain};
use ricci_soliton::tensor::multi_indices;
use ricci_soliton::warped::{warped_curvature, WarpedProfile};
use ricci_soliton::{Jet, LocalGeometry};

/// `e^{2u} δ` with `u = a·x + b|x|²`.
fn conformally_flat(n: usize, a: Vec<f64>, b: f64) -> CoordinateChart {
    CoordinateChart::diagonal(
        "conformal",
        n,
        Domain::new(vec![(-1.0, 1.0); n]),
        DerivativeMode::analytic(6),
        move |x| {
            let mut u = x[0].lift(0.0);
            for i in 0..n {
                u = u + &x[i] * a[i] + &x[i] * &x[i] * b;
            }
            vec![(u * 2.0).exp(); n]
        },
    )
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.8..0.8f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conformally_flat_metrics_have_no_weyl_or_cotton(
        a in prop::collection::vec(-0.5..0.5f64, 4),
        b in -0.3..0.3f64,
        x in point(4),
    ) {
        let chart = conformally_flat(4, a, b);
        let geo = LocalGeometry::new(&chart, &x, 3).unwrap();
        let scale = 1.0 + geo.riemann_norm();
        prop_assert!(geo.norm(&geo.weyl().unwrap()) < 1e-10 * scale);
        prop_assert!(geo.norm(&geo.cotton().unwrap()) < 1e-9 * scale);
    }

    #[test]
    fn riemann_has_its_algebraic_symmetries(
        a in prop::collection::vec(-0.5..0.5f64, 3),
        b in -0.3..0.3f64,
        x in point(3),
    ) {
        let geo = LocalGeometry::new(&conformally_flat(3, a, b), &x, 2).unwrap();
        let r = geo.riemann();
        let tol = 1e-10 * (1.0 + r.max_abs());
        for idx in multi_indices(3, 4) {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let v = *r.get(&idx);
            prop_assert!((v + r.get(&[j, i, k, l])).abs() < tol);
            prop_assert!((v - r.get(&[k, l, i, j])).abs() < tol);
            prop_assert!((v + r.get(&[j, k, i, l]) + r.get(&[k, i, j, l])).abs() < tol);
        }
    }

    #[test]
    fn cotton_is_skew_and_trace_free(
        a in prop::collection::vec(-0.5..0.5f64, 3),
        b in -0.3..0.3f64,
        x in point(3),
    ) {
        // in three dimensions Cotton is the whole conformal obstruction, so
        // perturb away from conformal flatness with an anisotropic factor
        let chart = CoordinateChart::diagonal(
            "anisotropic",
            3,
            Domain::new(vec![(-1.0, 1.0); 3]),
            DerivativeMode::analytic(6),
            move |x: &[Jet]| {
                let u = &x[0] * a[0] + &x[1] * &x[2] * b;
                vec![x[0].lift(1.0), (u * 2.0).exp(), (&x[1] * a[1] + &x[2] * a[2]).exp()]
            },
        );
        let geo = LocalGeometry::new(&chart, &x, 3).unwrap();
        let c = geo.cotton().unwrap();
        let ginv = geo.inverse_metric().to_vec();
        let tol = 1e-10 * (1.0 + c.max_abs());
        for idx in multi_indices(3, 3) {
            prop_assert!((c.get(&idx) + c.get(&[idx[1], idx[0], idx[2]])).abs() < tol);
        }
        for k in 0..3 {
            let trace: f64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| ginv[i * 3 + j] * c.get(&[i, j, k]))
                .sum();
            prop_assert!(trace.abs() < tol);
        }
    }

    #[test]
    fn warped_sphere_has_constant_scalar(n in 3usize..=6, r in 0.05..3.09f64) {
        let c = warped_curvature(n, n as f64 - 2.0, r.sin(), r.cos(), -r.sin()).unwrap();
        let target = (n * (n - 1)) as f64;
        prop_assert!((c.scalar - target).abs() < 1e-9 * target);
    }

    #[test]
    fn log_log_fit_recovers_power_laws(p in -3.0..3.0f64, c in 0.1..10.0f64) {
        let x: Vec<f64> = (1..40).map(|k| k as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
        let fit = log_log_fit(&x, &y).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn profile_csv_round_trip_is_exact(n in 3usize..=6, k in 0.2..2.0f64) {
        let grid: Vec<f64> = (1..20).map(|i| 0.15 * i as f64).collect();
        let p = WarpedProfile::from_fn(grid, n, n as f64 - 2.0, move |r| (r * k).sinh() / k, |r| r * r).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = WarpedProfile::read_csv(buf.as_slice(), Some(n), Some(p.lambda)).unwrap();
        prop_assert_eq!(p, q);
    }
}
