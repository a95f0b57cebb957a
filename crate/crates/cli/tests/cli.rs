use std::process::{Command, Output};

use serde_json::Value;

fn soliton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soliton"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn catalog_list_has_one_name_per_line() {
    let out = soliton(&["catalog", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert!(names.contains(&"cigar") && names.contains(&"euclidean_schwarzschild"));
    assert!(names.iter().all(|n| !n.contains(' ')));
}

#[test]
fn verify_cigar_sees_energy_four() {
    let out = soliton(&[
        "--no-meta",
        "verify",
        "--catalog",
        "cigar",
        "--samples",
        "20",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 20);
    for p in points {
        assert!((p["energy"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    }
    assert_eq!(
        v["summary"]["verdicts"]["energy_matches_declared"],
        Value::Bool(true)
    );
    assert!(v.get("meta").is_none());
}

#[test]
fn bryant_profile_round_trips_through_classify() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let csv_arg = csv.to_str().unwrap();
    let out = soliton(&[
        "--no-meta",
        "bryant",
        "--n",
        "4",
        "--rmax",
        "1000",
        "--out",
        csv_arg,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let volume = v["asymptotics"]["volume_growth"]["exponent"]
        .as_f64()
        .unwrap();
    assert!((volume - 2.5).abs() < 0.1, "volume exponent {volume}");
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("r,phi,dphi,d2phi,d3phi,F,dF,d2F\n"));

    let out = soliton(&["--no-meta", "classify", "--profile", csv_arg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["classification"]["branch"], "bryant");
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        &[
            "--no-meta",
            "verify",
            "--catalog",
            "cigar_cross_flat",
            "--samples",
            "8",
            "--seed",
            "3",
        ][..],
        &[
            "--no-meta",
            "classify",
            "--catalog",
            "product_line_cross_fiber",
            "--samples",
            "8",
        ][..],
        &[
            "--no-meta",
            "tensors",
            "--catalog",
            "round_sphere",
            "--samples",
            "3",
        ][..],
    ] {
        let a = soliton(args);
        let b = soliton(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn meta_block_is_present_by_default() {
    let v = json(&soliton(&["catalog", "show", "cigar"]));
    assert_eq!(v["meta"]["tool"], "soliton");
    assert!(v["expected"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["provenance"].is_string()));
}

#[test]
fn negative_control_exits_one() {
    let out = soliton(&[
        "--no-meta",
        "classify",
        "--catalog",
        "perturbed_non_soliton",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["classification"]["branch"], "not_a_soliton");
    let out = soliton(&[
        "--no-meta",
        "verify",
        "--catalog",
        "perturbed_non_soliton",
        "--samples",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(soliton(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(soliton(&["verify"]).status.code(), Some(2));
    assert_eq!(
        soliton(&["verify", "--catalog", "no_such_entry"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        soliton(&["classify", "--profile", "/nonexistent/p.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        soliton(&[
            "verify",
            "--catalog",
            "round_sphere",
            "--param",
            "radius=-2"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(soliton(&["--version"]).status.code(), Some(0));
}

#[test]
fn explicit_points_replace_sampling() {
    let out = soliton(&[
        "--no-meta",
        "tensors",
        "--catalog",
        "cigar",
        "--point",
        "0,0",
        "--point",
        "1,0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let p = &v["points"][0];
    assert!((p["curvature"]["scalar"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}
