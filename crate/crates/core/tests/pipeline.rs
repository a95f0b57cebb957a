use ricci_soliton::bryant::{asymptotics, bryant_chart, integrate, BryantConfig};
use ricci_soliton::catalog::{self, Params};
use ricci_soliton::classifier::{classify_chart_at, classify_profile, Branch, ClassifyOptions};
use ricci_soliton::warped::{FiberSpec, WarpedProfile};

fn bryant(n: usize, r_max: f64) -> WarpedProfile {
    let mut cfg = BryantConfig::new(n);
    cfg.r_max = r_max;
    integrate(&cfg).unwrap()
}

#[test]
fn loosening_thresholds_never_changes_a_decision() {
    for name in catalog::NAMES {
        let e = catalog::make(name, &Params::new()).unwrap();
        if !e.soliton.is_steady() {
            continue;
        }
        let points = e.sample_points(30, 11);
        let base = ClassifyOptions::default();
        let strict = classify_chart_at(&e.soliton, &points, &base)
            .unwrap()
            .branch;
        let loose = ClassifyOptions {
            thresholds: base.thresholds.scaled(10.0),
            ..base
        };
        let relaxed = classify_chart_at(&e.soliton, &points, &loose)
            .unwrap()
            .branch;
        assert_eq!(strict, relaxed, "{name}");
    }
}

#[test]
fn bryant_profile_survives_csv_and_classifies_without_fiber_data() {
    let p = bryant(5, 200.0);
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    // dimension and fiber constant are recovered from the columns
    let q = WarpedProfile::read_csv(buf.as_slice(), None, None).unwrap();
    assert_eq!(q.n, 5);
    assert!((q.lambda - 3.0).abs() < 1e-6);
    let report = classify_profile(&q, None, &ClassifyOptions::default()).unwrap();
    assert_eq!(report.branch, Branch::Bryant);
    assert!(report
        .notes
        .iter()
        .any(|n| n.contains("fiber shape unverified")));
}

#[test]
fn flat_cone_profile_has_euclidean_volume_and_no_decay_fit() {
    let grid: Vec<f64> = (1..=2000).map(|i| 0.05 * i as f64).collect();
    let p = WarpedProfile::from_fn(grid, 4, 2.0, |r| r.clone(), |r| r.lift(0.0)).unwrap();
    let a = asymptotics(&p).unwrap();
    assert!(a.curvature_decay.is_none());
    assert!((a.volume_growth.unwrap().exponent - 4.0).abs() < 1e-3);
    assert!((a.phi_growth.unwrap().exponent - 1.0).abs() < 1e-12);
    let report = classify_profile(
        &p,
        Some(&FiberSpec::round_sphere(3, 1.0)),
        &ClassifyOptions::default(),
    )
    .unwrap();
    assert_eq!(report.branch, Branch::RicciFlatConstantPotential);
}

#[test]
fn bryant_scalar_curvature_is_positive_and_decreasing() {
    let p = bryant(4, 300.0);
    let r = p.scalar_curvature();
    // node 0 is the tip, where the formulas are singular; below r = 0.1 the
    // decrease 1 − R ~ r² is comparable to the roundoff of the 1/φ² terms
    let start = p.r.partition_point(|&x| x < 0.1);
    assert!(r[1..].iter().all(|&v| v > 0.0));
    let bad: Vec<(f64, f64)> = (start + 1..r.len())
        .filter(|&i| !(r[i] < r[i - 1] && r[i] > 0.0))
        .map(|i| (p.r[i], r[i]))
        .take(5)
        .collect();
    assert!(bad.is_empty(), "{bad:?}");
    assert!((r[1] - 1.0).abs() < 1e-5);
}

#[test]
fn bryant_chart_points_near_the_tip_are_regular() {
    let s = bryant_chart(&bryant(3, 10.0)).unwrap();
    for r in [1e-3, 3e-3, 1e-2] {
        let p = s.expand(&[r, 1.0, 0.5], 2).unwrap();
        assert!(
            p.soliton_residual() < 1e-7,
            "r = {r} res {}",
            p.soliton_residual()
        );
        assert!(
            (p.geometry().scalar() - 1.0).abs() < 1e-3,
            "r = {r} R = {}",
            p.geometry().scalar()
        );
    }
}
