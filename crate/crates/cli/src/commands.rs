use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use ricci_soliton::bryant::{asymptotics, integrate, BryantConfig};
use ricci_soliton::catalog::{self, CatalogEntry, Params};
use ricci_soliton::classifier::{
    classify_chart_at, classify_profile, profile_soliton, radial_sample_points, Branch,
    ClassifyOptions, Thresholds,
};
use ricci_soliton::level_set::level_diagnostics;
use ricci_soliton::soliton::SolitonChart;
use ricci_soliton::warped::WarpedProfile;
use ricci_soliton::{conformal_bundle, curvature_bundle};

use crate::report::{emit, float, to_value, Report};
use crate::{CatalogCommand, Cli, Command, InputArgs, SampleArgs};

/// `Ok(true)` when every check passed.
pub fn run(cli: &Cli) -> Result<bool> {
    let meta = !cli.no_meta;
    match &cli.command {
        Command::Tensors(a) => tensors(&a.input, &a.sampling, a.out.as_deref(), meta),
        Command::Verify(a) => verify(a, meta),
        Command::Bryant(a) => bryant(a, meta),
        Command::Classify(a) => classify(a, meta),
        Command::Catalog(c) => catalog_cmd(c, meta),
    }
}

fn parse_params(raw: &[String]) -> Result<Params> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("parameter {kv:?} is not KEY=VALUE"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

enum Source {
    Catalog(CatalogEntry),
    Profile(WarpedProfile),
}

struct Loaded {
    source: Source,
    soliton: SolitonChart,
    description: Value,
    notes: Vec<String>,
}

fn load(input: &InputArgs) -> Result<Loaded> {
    if let Some(name) = &input.catalog {
        let params = parse_params(&input.params)?;
        let entry = catalog::make(name, &params)?;
        let description = json!({
            "kind": "catalog",
            "name": entry.name,
            "params": entry.params,
            "description": entry.description,
        });
        Ok(Loaded {
            soliton: entry.soliton.clone(),
            source: Source::Catalog(entry),
            description,
            notes: Vec::new(),
        })
    } else if let Some(path) = &input.profile {
        let profile = WarpedProfile::load_csv(path, input.dim, input.lambda)
            .with_context(|| format!("reading profile {}", path.display()))?;
        let (soliton, notes) = profile_soliton(&profile, None)?;
        let description = json!({
            "kind": "profile",
            "path": path.display().to_string(),
            "n": profile.n,
            "lambda": profile.lambda,
            "nodes": profile.len(),
            "steady": profile.is_steady(),
        });
        Ok(Loaded {
            source: Source::Profile(profile),
            soliton,
            description,
            notes,
        })
    } else {
        bail!("either --catalog or --profile is required")
    }
}

fn parse_point(raw: &str, n: usize) -> Result<Vec<f64>> {
    let x: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad coordinate {s:?} in {raw:?}"))
        })
        .collect::<Result<_>>()?;
    if x.len() != n {
        bail!("point {raw:?} has {} coordinates, expected {n}", x.len());
    }
    Ok(x)
}

fn sample_points(l: &Loaded, s: &SampleArgs) -> Result<Vec<Vec<f64>>> {
    let points = if !s.points.is_empty() {
        s.points
            .iter()
            .map(|p| parse_point(p, l.soliton.dim()))
            .collect::<Result<Vec<_>>>()?
    } else {
        match &l.source {
            Source::Catalog(e) => e.sample_points(s.samples, s.seed),
            Source::Profile(_) => radial_sample_points(&l.soliton, s.samples, s.seed)?,
        }
    };
    if points.is_empty() {
        bail!("no sample points");
    }
    Ok(points)
}

fn sampling_settings(s: &SampleArgs) -> Value {
    json!({"samples": s.samples, "seed": s.seed, "explicit_points": s.points.len()})
}

fn tensors(
    input: &InputArgs,
    sampling: &SampleArgs,
    out: Option<&Path>,
    meta: bool,
) -> Result<bool> {
    let l = load(input)?;
    let points = sample_points(&l, sampling)?;
    let chart = l.soliton.chart();
    let n = l.soliton.dim();
    let rows: Vec<Value> = points
        .par_iter()
        .map(|x| -> Result<Value> {
            let mut row = Map::new();
            row.insert("x".into(), to_value(x));
            row.insert("metric".into(), to_value(&chart.metric_at(x)));
            row.insert("curvature".into(), to_value(&curvature_bundle(chart, x)?));
            if n >= 3 {
                row.insert("conformal".into(), to_value(&conformal_bundle(chart, x)?));
                let p = l.soliton.expand(x, 2)?;
                row.insert("d_tensor".into(), to_value(&p.d_direct()?));
            }
            Ok(Value::Object(row))
        })
        .collect::<Result<_>>()?;
    let mut r = Report::new(l.description, sampling_settings(sampling));
    r.points = rows;
    emit(&r.into_json(meta), out)?;
    Ok(true)
}

fn verify(a: &crate::VerifyArgs, meta: bool) -> Result<bool> {
    let l = load(&a.input)?;
    let points = sample_points(&l, &a.sampling)?;
    let s = &l.soliton;
    let n = s.dim();
    let order = s.max_order().min(if n >= 4 { 4 } else { 3 });
    let rows: Vec<Map<String, Value>> = points
        .par_iter()
        .map(|x| -> Result<Map<String, Value>> {
            let p = s.expand(x, order)?;
            let geo = p.geometry();
            let scale = 1.0 + geo.riemann_norm();
            let mut row = Map::new();
            row.insert("x".into(), to_value(x));
            row.insert("riemann_norm".into(), float(geo.riemann_norm()));
            row.insert("scalar".into(), float(geo.scalar()));
            row.insert("grad_norm".into(), float(p.grad_norm()));
            row.insert(
                "soliton_residual".into(),
                float(p.soliton_residual() / scale),
            );
            if s.is_steady() && order >= 3 {
                let h = p.hamilton()?;
                row.insert("energy".into(), float(h.energy));
                row.insert(
                    "hamilton_gradient_residual".into(),
                    float(h.grad_residual / scale),
                );
            }
            if n >= 3 && order >= 3 {
                let d = p.d_structure()?;
                row.insert("d_norm".into(), float(d.d_norm));
                row.insert("d_skew".into(), float(d.skew / scale));
                row.insert("d_trace".into(), float(d.trace / scale));
                row.insert("d_grad_vs_cotton".into(), float(d.grad_contraction / scale));
                row.insert("d_routes".into(), float(d.routes / scale));
                if p.check_regular().is_ok() {
                    if let Ok(id) = p.d_norm_identity(a.soliton_tol) {
                        let rel = id.residual / (1.0 + id.lhs + id.rhs);
                        row.insert("norm_identity_residual".into(), float(rel));
                    }
                }
            }
            if n >= 4 && order >= 4 {
                let b = p.bach_consistency()?;
                row.insert("bach_routes".into(), float(b.routes / scale));
                row.insert("bach_from_d".into(), float(b.from_d / scale));
            }
            if p.check_regular().is_ok() {
                let lv = level_diagnostics(s, x)?;
                row.insert("mean_curvature".into(), float(lv.mean_curvature));
                row.insert("umbilicity".into(), float(lv.umbilicity_deficit / scale));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let settings = json!({
        "sampling": sampling_settings(&a.sampling),
        "derivative_order": order,
        "soliton_tol": a.soliton_tol,
        "identity_tol": a.identity_tol,
        "norm_identity_tol": a.norm_identity_tol,
        "bach_tol": a.bach_tol,
        "energy_tol": a.energy_tol,
    });
    let mut r = Report::new(l.description, settings);
    let gates: [(&str, f64); 8] = [
        ("soliton_residual", a.soliton_tol),
        ("hamilton_gradient_residual", a.soliton_tol),
        ("d_skew", a.identity_tol),
        ("d_trace", a.identity_tol),
        ("d_grad_vs_cotton", a.identity_tol),
        ("d_routes", a.identity_tol),
        ("norm_identity_residual", a.norm_identity_tol),
        ("bach_routes", a.bach_tol),
    ];
    for row in &rows {
        for key in ["umbilicity", "bach_from_d"]
            .iter()
            .chain(gates.iter().map(|g| &g.0))
        {
            if let Some(v) = row.get(*key).and_then(Value::as_f64) {
                r.residual(key, v);
            }
        }
    }
    let soliton_ok = r
        .max_residuals
        .get("soliton_residual")
        .and_then(Value::as_f64)
        .is_some_and(|v| v < a.soliton_tol);
    for (key, tol) in gates {
        if let Some(v) = r.max_residuals.get(key).and_then(Value::as_f64) {
            // identities that hold only on solitons are not asserted otherwise
            if key == "soliton_residual" || soliton_ok {
                r.verdict(key, v < tol);
            }
        }
    }
    let energies: Vec<f64> = rows
        .iter()
        .filter_map(|row| row.get("energy").and_then(Value::as_f64))
        .collect();
    if soliton_ok && !energies.is_empty() {
        let mean = energies.iter().sum::<f64>() / energies.len() as f64;
        let (lo, hi) = energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| {
                (a.min(e), b.max(e))
            });
        r.residual("energy_spread", hi - lo);
        r.verdict(
            "energy_constant",
            hi - lo < a.energy_tol * (1.0 + mean.abs()),
        );
        if let Some(c0) = s.hamilton_constant() {
            let dev = energies.iter().fold(0.0f64, |m, e| m.max((e - c0).abs()));
            r.residual("energy_deviation", dev);
            r.verdict(
                "energy_matches_declared",
                dev < a.energy_tol * (1.0 + c0.abs()),
            );
        }
    }
    if !l.notes.is_empty() {
        r.extra.insert("notes".into(), to_value(&l.notes));
    }
    r.points = rows.into_iter().map(Value::Object).collect();
    let passed = r.all_passed();
    emit(&r.into_json(meta), a.out.as_deref())?;
    Ok(passed)
}

fn bryant(a: &crate::BryantArgs, meta: bool) -> Result<bool> {
    let mut cfg = BryantConfig::new(a.n);
    cfg.r_max = a.r_max;
    cfg.r_seed = a.r_seed;
    cfg.normalization = a.normalization;
    cfg.series_order = a.series_order;
    let profile = integrate(&cfg)?;
    if let Some(path) = &a.out {
        profile
            .save_csv(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let asym = asymptotics(&profile)?;
    let c0 = cfg.normalization;
    let nf = a.n as f64;
    let scalar = profile.scalar_curvature();

    let mut r = Report::new(
        json!({"kind": "bryant", "profile_out": a.out.as_ref().map(|p| p.display().to_string())}),
        to_value(&cfg),
    );
    r.residual("energy_spread", asym.energy_spread);
    r.residual("ode_residual", profile.ode_residual());
    r.verdict("energy_conserved", asym.energy_spread < 1e-7 * c0);
    r.verdict("phi_increasing", profile.dphi.iter().all(|&d| d > 0.0));
    r.verdict(
        "scalar_nonnegative",
        scalar.iter().all(|s| s.is_nan() || *s >= 0.0),
    );
    let decay = asym.curvature_decay.map(|f| f.exponent);
    let volume = asym.volume_growth.map(|f| f.exponent);
    r.verdict(
        "curvature_decay_linear",
        decay.is_some_and(|e| (e + 1.0).abs() <= 0.05),
    );
    r.verdict(
        "volume_growth",
        volume.is_some_and(|e| (e - (nf + 1.0) / 2.0).abs() <= 0.1),
    );
    r.extra.insert("asymptotics".into(), to_value(&asym));
    r.extra.insert("nodes".into(), Value::from(profile.len()));
    let passed = r.all_passed();
    emit(&r.into_json(meta), a.report.as_deref())?;
    Ok(passed)
}

fn classify(a: &crate::ClassifyArgs, meta: bool) -> Result<bool> {
    let l = load(&a.input)?;
    let mut thresholds = Thresholds::default();
    if let Some(t) = a.soliton_tol {
        thresholds.soliton = t;
    }
    if let Some(t) = a.d_tol {
        thresholds.d_tensor = t;
    }
    if let Some(t) = a.grad_tol {
        thresholds.gradient = t;
    }
    let opts = ClassifyOptions {
        thresholds,
        samples: a.samples,
        seed: a.seed,
    };
    let report = match &l.source {
        Source::Catalog(e) => {
            classify_chart_at(&e.soliton, &e.sample_points(a.samples, a.seed), &opts)?
        }
        Source::Profile(p) => classify_profile(p, None, &opts)?,
    };
    let mut r = Report::new(l.description, to_value(&opts));
    for d in &report.drivers {
        r.residual(d.name, d.value);
    }
    let definite = report.branch.is_definite() && report.branch != Branch::NotASoliton;
    r.verdicts
        .insert("branch".into(), Value::String(report.branch.to_string()));
    r.verdict("definite", definite);
    r.extra.insert("classification".into(), to_value(&report));
    emit(&r.into_json(meta), a.out.as_deref())?;
    Ok(definite)
}

fn catalog_cmd(c: &CatalogCommand, meta: bool) -> Result<bool> {
    match c {
        CatalogCommand::List => {
            for name in catalog::NAMES {
                println!("{name}");
            }
            Ok(true)
        }
        CatalogCommand::Show { name, params, out } => {
            let e = catalog::make(name, &parse_params(params)?)?;
            let mut r = Report::new(
                json!({"kind": "catalog", "name": e.name, "params": e.params}),
                json!({}),
            );
            r.extra
                .insert("description".into(), Value::String(e.description.clone()));
            r.extra
                .insert("dimension".into(), Value::from(e.soliton.dim()));
            r.extra.insert("rho".into(), float(e.soliton.rho()));
            r.extra.insert("expected".into(), to_value(&e.expected));
            emit(&r.into_json(meta), out.as_deref())?;
            Ok(true)
        }
        CatalogCommand::Sweep { samples, seed, out } => {
            let reports = catalog::sweep(*samples, *seed)?;
            let mut r = Report::new(
                json!({"kind": "catalog_sweep"}),
                json!({"samples": samples, "seed": seed}),
            );
            for e in &reports {
                r.verdict(e.name, e.passed());
            }
            r.points = reports.iter().map(to_value).collect();
            let passed = r.all_passed();
            emit(&r.into_json(meta), out.as_deref())?;
            Ok(passed)
        }
    }
}
