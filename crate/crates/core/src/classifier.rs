//! Sorts a numerically given steady gradient soliton into the branches of the
//! classification of complete steady solitons with vanishing D-tensor, and
//! records the residuals behind the decision.
//!
//! The gates run in a fixed order: soliton residual, ‖D‖, |∇F|, then the
//! warping-function behaviour when a fibration or profile is available.
//! Whether `∇F` vanishes on an open set or only on a thin set cannot be
//! decided from samples; the gradient gate uses the sampled maximum instead.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::level_set::level_diagnostics;
use crate::soliton::SolitonChart;
use crate::warped::{profile_to_chart, FiberShape, FiberSpec, WarpedProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    RicciFlatConstantPotential,
    ProductRicciFlatFiber,
    Bryant,
    NotDFlat,
    NotASoliton,
    Inconclusive,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::RicciFlatConstantPotential => "ricci_flat_constant_potential",
            Branch::ProductRicciFlatFiber => "product_ricci_flat_fiber",
            Branch::Bryant => "bryant",
            Branch::NotDFlat => "not_d_flat",
            Branch::NotASoliton => "not_a_soliton",
            Branch::Inconclusive => "inconclusive",
        }
    }

    /// Everything except `inconclusive` is a decision.
    pub fn is_definite(&self) -> bool {
        *self != Branch::Inconclusive
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All thresholds are relative: a quantity `q` passes when
/// `q < t · (1 + ‖Rm‖)` pointwise, except where noted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub soliton: f64,
    pub d_tensor: f64,
    pub gradient: f64,
    /// `‖Ric‖` in the constant-potential branch.
    pub ricci_flat: f64,
    /// `φ` at an endpoint below `tip · max φ` counts as a tip.
    pub tip: f64,
    /// `|φ′(tip)| − 1` allowed by smooth closing.
    pub smoothness: f64,
    /// `max |φ′|` relative to `max φ` for a constant warping function.
    pub warp_derivative: f64,
    /// Absolute bound on the fiber Einstein constant `λ`.
    pub fiber_lambda: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            soliton: 1e-4,
            d_tensor: 1e-3,
            gradient: 1e-6,
            ricci_flat: 1e-4,
            tip: 1e-2,
            smoothness: 1e-3,
            warp_derivative: 1e-6,
            fiber_lambda: 1e-6,
        }
    }
}

impl Thresholds {
    /// Every threshold multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Thresholds {
            soliton: self.soliton * factor,
            d_tensor: self.d_tensor * factor,
            gradient: self.gradient * factor,
            ricci_flat: self.ricci_flat * factor,
            tip: self.tip * factor,
            smoothness: self.smoothness * factor,
            warp_derivative: self.warp_derivative * factor,
            fiber_lambda: self.fiber_lambda * factor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiBehavior {
    TipAtStart,
    TipAtEnd,
    Constant,
    Varying,
}

/// Sampled maxima; every residual is divided by `1 + ‖Rm‖` at its point.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Evidence {
    pub samples: usize,
    pub soliton_residual_max: f64,
    /// Steady-equation residual at every profile node.
    pub ode_residual: Option<f64>,
    pub d_norm_max: Option<f64>,
    pub grad_max: f64,
    pub ricci_max: f64,
    pub umbilicity_max: Option<f64>,
    pub normal_ricci_mix_max: Option<f64>,
    pub phi_behavior: Option<PhiBehavior>,
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    pub dphi_max: Option<f64>,
    /// `|φ′|` at the tip.
    pub tip_slope: Option<f64>,
    pub fiber_lambda: Option<f64>,
    pub fiber_shape: Option<FiberShape>,
}

/// One comparison that contributed to the decision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Driver {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub branch: Branch,
    pub evidence: Evidence,
    pub thresholds_used: Thresholds,
    pub drivers: Vec<Driver>,
    pub notes: Vec<String>,
    /// Which published statement covers this dimension.
    pub statement: &'static str,
}

pub const DEFAULT_SAMPLES: usize = 40;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub thresholds: Thresholds,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            thresholds: Thresholds::default(),
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

fn statement(n: usize) -> &'static str {
    match n {
        0..=3 => "dimension below four, where the D-flat classification is not established; reported for completeness",
        4 => "D-flat steady solitons in dimension four",
        _ => "D-flat steady solitons in dimension n >= 5",
    }
}

struct PointSample {
    residual: f64,
    d_norm: Option<f64>,
    grad: f64,
    ricci: f64,
    umbilicity: Option<f64>,
    mix: Option<f64>,
}

fn sample_point(s: &SolitonChart, x: &[f64]) -> Result<PointSample> {
    let p = s.expand(x, 2)?;
    let scale = 1.0 + p.geometry().riemann_norm();
    let d_norm = if s.dim() >= 3 {
        Some(p.geometry().norm(&p.d_direct()?) / scale)
    } else {
        None
    };
    let (umbilicity, mix) = if p.check_regular().is_ok() {
        let l = level_diagnostics(s, x)?;
        (
            Some(l.umbilicity_deficit / scale),
            Some(l.normal_ricci_mix / scale),
        )
    } else {
        (None, None)
    };
    Ok(PointSample {
        residual: p.soliton_residual() / scale,
        d_norm,
        grad: p.grad_norm() / scale,
        ricci: p.geometry().norm(&p.geometry().ricci()) / scale,
        umbilicity,
        mix,
    })
}

fn max_opt(acc: Option<f64>, v: Option<f64>) -> Option<f64> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

fn gather(s: &SolitonChart, points: &[Vec<f64>]) -> Result<Evidence> {
    if points.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let samples: Vec<PointSample> = points
        .par_iter()
        .map(|x| sample_point(s, x))
        .collect::<Result<_>>()?;
    let mut e = Evidence {
        samples: samples.len(),
        ..Evidence::default()
    };
    for p in &samples {
        e.soliton_residual_max = e.soliton_residual_max.max(p.residual);
        e.d_norm_max = max_opt(e.d_norm_max, p.d_norm);
        e.grad_max = e.grad_max.max(p.grad);
        e.ricci_max = e.ricci_max.max(p.ricci);
        e.umbilicity_max = max_opt(e.umbilicity_max, p.umbilicity);
        e.normal_ricci_mix_max = max_opt(e.normal_ricci_mix_max, p.mix);
    }
    Ok(e)
}

/// Warping-function data reduced to what the decision needs.
struct WarpSummary {
    start: [f64; 2],
    end: [f64; 2],
    phi_min: f64,
    phi_max: f64,
    dphi_max: f64,
    lambda: Option<f64>,
    shape: FiberShape,
}

struct Decision {
    drivers: Vec<Driver>,
    notes: Vec<String>,
}

impl Decision {
    fn check(&mut self, name: &'static str, value: f64, threshold: f64) -> bool {
        let passed = value < threshold;
        self.drivers.push(Driver {
            name,
            value,
            threshold,
            passed,
        });
        passed
    }
}

fn decide(e: &mut Evidence, warp: Option<WarpSummary>, t: &Thresholds, d: &mut Decision) -> Branch {
    let residual = e
        .ode_residual
        .map_or(e.soliton_residual_max, |o| o.max(e.soliton_residual_max));
    if !d.check("soliton_residual_max", residual, t.soliton) {
        return Branch::NotASoliton;
    }
    match e.d_norm_max {
        Some(dn) => {
            if !d.check("d_norm_max", dn, t.d_tensor) {
                return Branch::NotDFlat;
            }
        }
        None => d
            .notes
            .push("D is not defined below dimension 3; gate skipped".into()),
    }
    if d.check("grad_max", e.grad_max, t.gradient) {
        if d.check("ricci_max", e.ricci_max, t.ricci_flat) {
            return Branch::RicciFlatConstantPotential;
        }
        d.notes.push("gradient vanishes but Ric does not".into());
        return Branch::Inconclusive;
    }
    let Some(w) = warp else {
        d.notes
            .push("no fibration available; only pointwise level-set diagnostics".into());
        return Branch::Inconclusive;
    };
    e.phi_min = Some(w.phi_min);
    e.phi_max = Some(w.phi_max);
    e.dphi_max = Some(w.dphi_max);
    e.fiber_lambda = w.lambda;
    e.fiber_shape = Some(w.shape);
    let scale = w.phi_max.max(f64::MIN_POSITIVE);
    let tip = if w.start[0] <= t.tip * scale {
        Some((PhiBehavior::TipAtStart, w.start[1]))
    } else if w.end[0] <= t.tip * scale {
        Some((PhiBehavior::TipAtEnd, w.end[1]))
    } else {
        None
    };
    if let Some((behavior, slope)) = tip {
        e.phi_behavior = Some(behavior);
        e.tip_slope = Some(slope.abs());
        d.check("tip_phi", w.start[0].min(w.end[0]) / scale, t.tip);
        if !d.check("tip_smoothness", (slope.abs() - 1.0).abs(), t.smoothness) {
            d.notes
                .push("warping function closes with a cone angle".into());
            return Branch::Inconclusive;
        }
        return match w.shape {
            FiberShape::Round => Branch::Bryant,
            FiberShape::Unknown => {
                d.notes
                    .push("round fiber required; fiber shape unverified".into());
                Branch::Bryant
            }
            FiberShape::NotRound => {
                d.notes
                    .push("a tip requires a round fiber, which is not the case".into());
                Branch::Inconclusive
            }
        };
    }
    let constant = w.dphi_max <= t.warp_derivative * scale;
    e.phi_behavior = Some(if constant {
        PhiBehavior::Constant
    } else {
        PhiBehavior::Varying
    });
    d.check("dphi_max", w.dphi_max / scale, t.warp_derivative);
    if !constant {
        d.notes
            .push("warping function neither closes nor is constant".into());
        return Branch::Inconclusive;
    }
    match w.lambda {
        Some(lambda) if d.check("fiber_lambda", lambda.abs(), t.fiber_lambda) => {
            Branch::ProductRicciFlatFiber
        }
        Some(_) => Branch::Inconclusive,
        None => {
            d.notes.push("fiber is not Einstein".into());
            Branch::Inconclusive
        }
    }
}

fn report(
    n: usize,
    mut evidence: Evidence,
    warp: Option<WarpSummary>,
    t: &Thresholds,
    mut notes: Vec<String>,
) -> ClassificationReport {
    let mut d = Decision {
        drivers: Vec::new(),
        notes: Vec::new(),
    };
    let branch = decide(&mut evidence, warp, t, &mut d);
    notes.extend(d.notes);
    ClassificationReport {
        branch,
        evidence,
        thresholds_used: *t,
        drivers: d.drivers,
        notes,
        statement: statement(n),
    }
}

/// Classifies a steady soliton chart from samples of its domain.
pub fn classify_chart(s: &SolitonChart, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let points = s.chart().domain().sample(opts.samples, opts.seed);
    classify_chart_at(s, &points, opts)
}

/// As [`classify_chart`] with caller-chosen sample points.
pub fn classify_chart_at(
    s: &SolitonChart,
    points: &[Vec<f64>],
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    if !s.is_steady() {
        return Err(Error::NonzeroRho(s.rho()));
    }
    let evidence = gather(s, points)?;
    let warp = s.fibration().map(|fib| {
        let (lo, hi) = fib.radial_range();
        let count = opts.samples.max(8);
        let mut phi_min = f64::INFINITY;
        let mut phi_max: f64 = 0.0;
        let mut dphi_max: f64 = 0.0;
        for k in 0..=count {
            let r = lo + (hi - lo) * k as f64 / count as f64;
            let [p, dp, _] = fib.warp_derivatives(r);
            phi_min = phi_min.min(p);
            phi_max = phi_max.max(p);
            dphi_max = dphi_max.max(dp.abs());
        }
        let [p0, dp0, _] = fib.warp_derivatives(lo);
        let [p1, dp1, _] = fib.warp_derivatives(hi);
        WarpSummary {
            start: [p0, dp0],
            end: [p1, dp1],
            phi_min,
            phi_max,
            dphi_max,
            lambda: fib.fiber().einstein_lambda,
            shape: fib.fiber().shape,
        }
    });
    Ok(report(
        s.dim(),
        evidence,
        warp,
        &opts.thresholds,
        Vec::new(),
    ))
}

/// Chart of a profile over `fiber`. Without fiber data the fiber is the
/// simply connected space form with the profile's `λ`, with unknown shape;
/// the returned notes say so.
pub fn profile_soliton(
    p: &WarpedProfile,
    fiber: Option<&FiberSpec>,
) -> Result<(SolitonChart, Vec<String>)> {
    let mut notes = Vec::new();
    let fiber = match fiber {
        Some(f) => f.clone(),
        None => {
            notes.push(format!(
                "fiber assumed to be the simply connected space form with lambda = {}",
                p.lambda
            ));
            FiberSpec {
                shape: FiberShape::Unknown,
                ..FiberSpec::space_form(p.n - 1, p.lambda)
            }
        }
    };
    Ok((profile_to_chart(p, &fiber)?, notes))
}

/// `count` points at log-spaced radii strictly inside the radial range,
/// paired with seeded fiber samples.
pub fn radial_sample_points(s: &SolitonChart, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let fib = s.fibration().ok_or(Error::NoFibration)?;
    let (lo, hi) = fib.radial_range();
    let count = count.max(2);
    let fiber_points = fib.fiber_domain().sample(count, seed);
    if fiber_points.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    Ok((0..count)
        .map(|k| {
            let t = 1e-4 * (0.99f64 / 1e-4).powf(k as f64 / (count - 1) as f64);
            let mut x = vec![lo + (hi - lo) * t];
            x.extend_from_slice(&fiber_points[k % fiber_points.len()]);
            x
        })
        .collect())
}

/// Classifies a profile; see [`profile_soliton`] for the fiber used.
pub fn classify_profile(
    p: &WarpedProfile,
    fiber: Option<&FiberSpec>,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    let (s, notes) = profile_soliton(p, fiber)?;
    let shape = s.fibration().ok_or(Error::NoFibration)?.fiber().shape;
    let points = radial_sample_points(&s, opts.samples, opts.seed)?;
    let mut evidence = gather(&s, &points)?;
    evidence.ode_residual = Some(p.ode_residual());
    let last = p.len() - 1;
    let warp = WarpSummary {
        start: [p.phi[0], p.dphi[0]],
        end: [p.phi[last], p.dphi[last]],
        phi_min: p.phi.iter().copied().fold(f64::INFINITY, f64::min),
        phi_max: p.phi.iter().copied().fold(0.0, f64::max),
        dphi_max: p.dphi.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        lambda: Some(p.lambda),
        shape,
    };
    Ok(report(p.n, evidence, Some(warp), &opts.thresholds, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{CoordinateChart, DerivativeMode, Domain};

    fn flat(n: usize, linear: bool) -> SolitonChart {
        let chart = CoordinateChart::diagonal(
            "flat",
            n,
            Domain::new(vec![(-1.0, 1.0); n]),
            DerivativeMode::analytic(4),
            move |x| vec![x[0].lift(1.0); n],
        );
        SolitonChart::steady(
            chart,
            move |x| if linear { x[0].clone() } else { x[0].lift(2.0) },
        )
    }

    #[test]
    fn flat_constant_potential() {
        let r = classify_chart(&flat(5, false), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.branch, Branch::RicciFlatConstantPotential);
        assert!(r.drivers.iter().any(|d| d.name == "grad_max" && d.passed));
        assert_eq!(r.statement, statement(5));
    }

    #[test]
    fn linear_potential_without_fibration_is_inconclusive() {
        let r = classify_chart(&flat(4, true), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.branch, Branch::Inconclusive);
        assert_eq!(r.evidence.umbilicity_max, Some(0.0));
    }

    #[test]
    fn shrinkers_are_rejected() {
        let chart = CoordinateChart::diagonal(
            "flat",
            3,
            Domain::new(vec![(-1.0, 1.0); 3]),
            DerivativeMode::analytic(4),
            |x| vec![x[0].lift(1.0); 3],
        );
        let s = SolitonChart::new(chart, |x| &x[0] * &x[0] * 0.25, 0.5);
        assert!(matches!(
            classify_chart(&s, &ClassifyOptions::default()),
            Err(Error::NonzeroRho(_))
        ));
    }
}
