//! Reference geometries with known properties, used as fixtures and oracles.
//!
//! Every entry lists its expected properties with a tolerance and a
//! provenance note; [`sweep`] checks all of them on seeded samples.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bryant::{bryant_chart, integrate, BryantConfig};
use crate::chart::{CoordinateChart, DerivativeMode, Domain};
use crate::classifier::{classify_chart_at, Branch, ClassifyOptions};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::level_set::constancy_scan;
use crate::soliton::SolitonChart;
use crate::warped::{
    flat_chart, sphere_chart, warped_chart, ClosedFormRadial, FiberShape, FiberSpec,
};

pub const NAMES: [&str; 10] = [
    "cigar",
    "flat",
    "gaussian_shrinker",
    "round_sphere",
    "product_line_cross_fiber",
    "euclidean_schwarzschild",
    "warped_control_non_einstein_fiber",
    "perturbed_non_soliton",
    "cigar_cross_flat",
    "bryant",
];

pub type Params = BTreeMap<String, String>;

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the reference literature for this geometry.
    Reference,
    /// Computed independently (closed form, conformal oracle, numerics).
    Derived,
    /// Immediate from the definitions.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Property {
    /// `max ‖Ric + ∇²f − ρg‖ / (1 + ‖Rm‖) < tol`.
    SolitonResidual,
    /// At least `fraction` of samples have relative residual above `tol`.
    NotSoliton {
        fraction: f64,
    },
    /// `max |R + |∇F|² − value| < tol`.
    HamiltonConstant {
        value: f64,
    },
    ScalarAt {
        point: Vec<f64>,
        value: f64,
    },
    ScalarConstant {
        value: f64,
    },
    RiemannVanishes,
    RicciVanishes,
    DVanishes,
    /// `max ‖D‖ > tol`.
    DNonvanishing,
    /// `max ‖W‖ > tol`.
    WeylNonvanishing,
    /// Spread of `R` on the slice `r = level` exceeds `tol`.
    ConstancySpread {
        level: f64,
    },
    Branch {
        branch: Branch,
    },
    /// The classifier refuses non-steady input.
    NotSteady,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expected {
    pub name: &'static str,
    pub property: Property,
    pub tolerance: f64,
    pub provenance: Provenance,
    pub note: &'static str,
}

impl Expected {
    fn new(
        name: &'static str,
        property: Property,
        tolerance: f64,
        provenance: Provenance,
        note: &'static str,
    ) -> Self {
        Expected {
            name,
            property,
            tolerance,
            provenance,
            note,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: String,
    pub params: Params,
    pub soliton: SolitonChart,
    /// Region sampled by checks; may be smaller than the chart domain.
    pub sample_domain: Domain,
    pub expected: Vec<Expected>,
}

impl CatalogEntry {
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_domain.sample(count, seed)
    }

    pub fn expects(&self, name: &str) -> Option<&Expected> {
        self.expected.iter().find(|e| e.name == name)
    }

    pub fn expected_branch(&self) -> Option<Branch> {
        self.expected.iter().find_map(|e| match e.property {
            Property::Branch { branch } => Some(branch),
            _ => None,
        })
    }
}

/// Reads typed parameters and records the resolved value of each.
struct ParamReader<'a> {
    params: &'a Params,
    resolved: Params,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a Params) -> Self {
        ParamReader {
            params,
            resolved: Params::new(),
        }
    }

    fn read<T: std::str::FromStr + ToString>(
        &mut self,
        key: &'static str,
        default: T,
        valid: impl Fn(&T) -> bool,
        what: &str,
    ) -> Result<T> {
        let value = match self.params.get(key) {
            None => default,
            Some(v) => v
                .parse::<T>()
                .ok()
                .filter(&valid)
                .ok_or_else(|| Error::InvalidParams(format!("{key} = {v:?} is not {what}")))?,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    fn f64(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.read(key, default, |x: &f64| x.is_finite(), "a finite number")
    }

    fn usize(&mut self, key: &'static str, default: usize) -> Result<usize> {
        self.read(key, default, |_| true, "a non-negative integer")
    }

    fn choice(&mut self, key: &'static str, options: &[&'static str]) -> Result<&'static str> {
        let picked = match self.params.get(key) {
            None => options[0],
            Some(v) => options.iter().find(|o| **o == v).copied().ok_or_else(|| {
                Error::InvalidParams(format!("{key} must be one of {options:?}, got {v:?}"))
            })?,
        };
        self.resolved.insert(key.to_string(), picked.to_string());
        Ok(picked)
    }

    fn finish(self) -> Result<Params> {
        if let Some(k) = self.params.keys().find(|k| !self.resolved.contains_key(*k)) {
            return Err(Error::InvalidParams(format!("unknown parameter {k:?}")));
        }
        Ok(self.resolved)
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParams(msg()))
    }
}

/// Conformal factor `1/(1 + x² + y²)` of the cigar.
fn cigar_factor(x: &[Jet]) -> Jet {
    (&x[0] * &x[0] + &x[1] * &x[1] + 1.0).recip()
}

fn cigar_potential(x: &[Jet]) -> Jet {
    (&x[0] * &x[0] + &x[1] * &x[1] + 1.0).ln()
}

/// `(dx² + dy²)/(1 + x² + y²)` times `k` flat directions.
fn cigar_chart(k: usize, half_width: f64) -> CoordinateChart {
    let n = 2 + k;
    let mut bounds = vec![(-half_width, half_width); 2];
    bounds.extend(std::iter::repeat_n((-1.0, 1.0), k));
    let label = if k == 0 {
        "cigar".to_string()
    } else {
        format!("cigar x R^{k}")
    };
    CoordinateChart::diagonal(
        label,
        n,
        Domain::new(bounds),
        DerivativeMode::analytic(8),
        move |x| {
            let c = cigar_factor(x);
            let mut d = vec![c.clone(), c];
            d.extend(std::iter::repeat_n(x[0].lift(1.0), k));
            d
        },
    )
}

/// Riemannian Schwarzschild `(1−2m/ρ)dτ² + (1−2m/ρ)⁻¹dρ² + ρ²dΩ²` on
/// `(τ, ρ, θ, ϑ)`, kept a relative `margin` outside the horizon.
pub fn schwarzschild_chart(m: f64, margin: f64) -> CoordinateChart {
    use std::f64::consts::PI;
    let bounds = vec![
        (-1.0, 1.0),
        (2.0 * m * (1.0 + margin), 6.0 * m),
        (0.3, PI - 0.3),
        (-PI, PI),
    ];
    CoordinateChart::diagonal(
        format!("euclidean_schwarzschild(m={m})"),
        4,
        Domain::new(bounds),
        DerivativeMode::analytic(12),
        move |x| {
            let lapse = 1.0 - (2.0 * m) * x[1].recip();
            let rho2 = &x[1] * &x[1];
            let s = x[2].sin();
            vec![
                lapse.clone(),
                lapse.recip(),
                rho2.clone(),
                &rho2 * &(&s * &s),
            ]
        },
    )
}

/// Conformally flat fiber `e^{2a sin y₁} δ` on a box, whose scalar curvature
/// varies.
fn lumpy_fiber(dim: usize, amplitude: f64) -> CoordinateChart {
    use std::f64::consts::PI;
    CoordinateChart::diagonal(
        format!("lumpy(dim={dim}, a={amplitude})"),
        dim,
        Domain::new(vec![(-PI, PI); dim]),
        DerivativeMode::analytic(12),
        move |y| {
            let c = (y[0].sin() * (2.0 * amplitude)).exp();
            vec![c; dim]
        },
    )
}

fn box_domain(s: &SolitonChart) -> Domain {
    Domain::new(s.chart().domain().bounds().to_vec())
}

fn zero(x: &[Jet]) -> Jet {
    x[0].lift(0.0)
}

use Provenance::{Derived, Reference, Trivial};

pub fn make(name: &str, params: &Params) -> Result<CatalogEntry> {
    let mut p = ParamReader::new(params);
    let (name, description, soliton, sample_domain, expected): (
        &'static str,
        String,
        SolitonChart,
        Option<Domain>,
        Vec<Expected>,
    ) = match name {
        "cigar" => {
            let s = SolitonChart::steady(cigar_chart(0, 2.5), cigar_potential)
                .with_hamilton_constant(4.0);
            (
                "cigar",
                "Hamilton's cigar (dx²+dy²)/(1+x²+y²), F = log(1+x²+y²)".into(),
                s,
                None,
                vec![
                    Expected::new(
                        "is_soliton",
                        Property::SolitonResidual,
                        1e-8,
                        Reference,
                        "closed-form steady soliton",
                    ),
                    Expected::new(
                        "hamilton_constant",
                        Property::HamiltonConstant { value: 4.0 },
                        1e-8,
                        Derived,
                        "R = 4/(1+r²) and |∇F|² = 4r²/(1+r²) from the conformal factor",
                    ),
                    Expected::new(
                        "scalar_at_origin",
                        Property::ScalarAt {
                            point: vec![0.0, 0.0],
                            value: 4.0,
                        },
                        1e-10,
                        Derived,
                        "R = −e^{−2u}Δ(2u) with e^{2u} = 1/(1+r²)",
                    ),
                    Expected::new(
                        "branch",
                        Property::Branch {
                            branch: Branch::Inconclusive,
                        },
                        0.0,
                        Derived,
                        "two-dimensional, no fibration supplied; D undefined",
                    ),
                ],
            )
        }
        "flat" => {
            let n = p.usize("n", 5)?;
            require(n >= 2, || format!("flat needs n >= 2, got {n}"))?;
            let potential = p.choice("potential", &["const", "linear"])?;
            let mut expected = vec![
                Expected::new(
                    "is_soliton",
                    Property::SolitonResidual,
                    1e-12,
                    Trivial,
                    "Ric = 0 and ∇²F = 0",
                ),
                Expected::new(
                    "riemann_zero",
                    Property::RiemannVanishes,
                    1e-12,
                    Trivial,
                    "Euclidean metric",
                ),
            ];
            if n >= 3 {
                expected.push(Expected::new(
                    "d_zero",
                    Property::DVanishes,
                    1e-12,
                    Trivial,
                    "every curvature term vanishes",
                ));
            }
            let s = if potential == "const" {
                expected.push(Expected::new(
                    "branch",
                    Property::Branch {
                        branch: Branch::RicciFlatConstantPotential,
                    },
                    0.0,
                    Trivial,
                    "constant potential",
                ));
                SolitonChart::steady(flat_chart(n), |x| x[0].lift(1.0))
            } else {
                expected.push(Expected::new(
                    "branch",
                    Property::Branch {
                        branch: Branch::ProductRicciFlatFiber,
                    },
                    0.0,
                    Trivial,
                    "R x T^{n-1} with F = t",
                ));
                use std::f64::consts::PI;
                let radial = ClosedFormRadial::new((-PI, PI), |r| r.lift(1.0), |r| r.clone());
                warped_chart(
                    Arc::new(radial),
                    &FiberSpec::flat(n - 1),
                    n,
                    DerivativeMode::analytic(12),
                    format!("flat(dim={n})"),
                )?
            };
            let dom = box_domain(&s);
            (
                "flat",
                format!("Euclidean R^{n} with {potential} potential"),
                s,
                Some(dom),
                expected,
            )
        }
        "gaussian_shrinker" => {
            let n = p.usize("n", 3)?;
            require(n >= 2, || {
                format!("gaussian_shrinker needs n >= 2, got {n}")
            })?;
            let chart = flat_chart(n).with_domain(Domain::new(vec![(-2.0, 2.0); n]));
            let s = SolitonChart::new(
                chart,
                |x| x.iter().fold(x[0].lift(0.0), |acc, xi| acc + xi * xi) * 0.25,
                0.5,
            );
            (
                "gaussian_shrinker",
                format!("Gaussian shrinker on R^{n}: f = |x|²/4, rho = 1/2"),
                s,
                None,
                vec![
                    Expected::new(
                        "is_soliton",
                        Property::SolitonResidual,
                        1e-12,
                        Trivial,
                        "∇²f = g/2",
                    ),
                    Expected::new(
                        "riemann_zero",
                        Property::RiemannVanishes,
                        1e-12,
                        Trivial,
                        "Euclidean metric",
                    ),
                    Expected::new("not_steady", Property::NotSteady, 0.0, Trivial, "rho = 1/2"),
                ],
            )
        }
        "round_sphere" => {
            let n = p.usize("n", 3)?;
            let a = p.f64("radius", 1.0)?;
            require(n >= 2, || format!("round_sphere needs n >= 2, got {n}"))?;
            require(a > 0.0, || {
                format!("sphere radius must be positive, got {a}")
            })?;
            let rho = (n as f64 - 1.0) / (a * a);
            let s = SolitonChart::new(sphere_chart(n, a, 0.2), zero, rho);
            let scalar = n as f64 * rho;
            (
                "round_sphere",
                format!("round S^{n} of radius {a} as a trivial shrinker"),
                s,
                None,
                vec![
                    Expected::new(
                        "is_soliton",
                        Property::SolitonResidual,
                        1e-10,
                        Trivial,
                        "Einstein with Ric = rho g",
                    ),
                    Expected::new(
                        "scalar_constant",
                        Property::ScalarConstant { value: scalar },
                        1e-9,
                        Trivial,
                        "R = n(n-1)/a²",
                    ),
                    Expected::new("not_steady", Property::NotSteady, 0.0, Trivial, "rho > 0"),
                ],
            )
        }
        "product_line_cross_fiber" => {
            let kind = p.choice("fiber", &["schwarzschild", "flat"])?;
            let m = p.f64("m", 1.0)?;
            let dim = p.usize("dim", 4)?;
            let fiber = if kind == "schwarzschild" {
                require(m > 0.0, || format!("mass must be positive, got {m}"))?;
                FiberSpec::from_chart(schwarzschild_chart(m, 0.05), FiberShape::NotRound)?
            } else {
                require(dim >= 1, || "flat fiber needs dim >= 1".into())?;
                FiberSpec::flat(dim)
            };
            let n = fiber.fiber_dim + 1;
            let radial = ClosedFormRadial::new((-2.0, 2.0), |r| r.lift(1.0), |r| r.clone());
            let s = warped_chart(
                Arc::new(radial),
                &fiber,
                n,
                DerivativeMode::analytic(12),
                format!("R x {kind}"),
            )?;
            let dom = box_domain(&s);
            let mut expected = vec![
                Expected::new(
                    "is_soliton",
                    Property::SolitonResidual,
                    1e-8,
                    Derived,
                    "Ricci-flat fiber and ∇²F = 0",
                ),
                Expected::new(
                    "branch",
                    Property::Branch {
                        branch: Branch::ProductRicciFlatFiber,
                    },
                    0.0,
                    Reference,
                    "product branch with Ricci-flat fiber",
                ),
            ];
            if n >= 3 {
                expected.push(Expected::new(
                    "d_zero",
                    Property::DVanishes,
                    1e-8,
                    Reference,
                    "product branch has D = 0",
                ));
            }
            (
                "product_line_cross_fiber",
                format!("R x {kind} fiber with F = t"),
                s,
                Some(dom),
                expected,
            )
        }
        "euclidean_schwarzschild" => {
            let m = p.f64("m", 1.0)?;
            require(m > 0.0, || format!("mass must be positive, got {m}"))?;
            let s = SolitonChart::steady(schwarzschild_chart(m, 0.05), zero);
            (
                "euclidean_schwarzschild",
                format!("Riemannian Schwarzschild with m = {m} and constant potential"),
                s,
                None,
                vec![
                    Expected::new(
                        "ricci_zero",
                        Property::RicciVanishes,
                        1e-6,
                        Derived,
                        "vacuum metric; Ricci-flatness checked against the closed form",
                    ),
                    Expected::new(
                        "weyl_nonzero",
                        Property::WeylNonvanishing,
                        1e-3,
                        Derived,
                        "Kretschmann 48m²/ρ⁶ is nonzero",
                    ),
                    Expected::new(
                        "branch",
                        Property::Branch {
                            branch: Branch::RicciFlatConstantPotential,
                        },
                        0.0,
                        Trivial,
                        "Ricci-flat with constant potential",
                    ),
                ],
            )
        }
        "warped_control_non_einstein_fiber" => {
            let n = p.usize("n", 4)?;
            let a = p.f64("amplitude", 0.3)?;
            require(n >= 3, || format!("warped control needs n >= 3, got {n}"))?;
            require(a != 0.0, || "amplitude must be nonzero".into())?;
            let fiber = FiberSpec::from_chart(lumpy_fiber(n - 1, a), FiberShape::NotRound)?;
            let radial = ClosedFormRadial::new((0.5, 2.5), |r| r.clone(), |r| r.clone());
            let s = warped_chart(
                Arc::new(radial),
                &fiber,
                n,
                DerivativeMode::analytic(12),
                "warped control".into(),
            )?;
            let dom = box_domain(&s);
            (
                "warped_control_non_einstein_fiber",
                format!(
                    "dr² + r² ḡ over a non-Einstein {}-dimensional fiber, F = r",
                    n - 1
                ),
                s,
                Some(dom),
                vec![
                    Expected::new(
                        "constancy_spread",
                        Property::ConstancySpread { level: 1.5 },
                        1e-3,
                        Derived,
                        "fiber scalar curvature varies along the level",
                    ),
                    Expected::new(
                        "d_nonzero",
                        Property::DNonvanishing,
                        1e-2,
                        Derived,
                        "negative control",
                    ),
                    Expected::new(
                        "branch",
                        Property::Branch {
                            branch: Branch::NotASoliton,
                        },
                        0.0,
                        Derived,
                        "negative control",
                    ),
                ],
            )
        }
        "perturbed_non_soliton" => {
            let factor = p.f64("factor", 1.1)?;
            require(factor != 1.0, || "factor 1 reproduces the cigar".into())?;
            let s = SolitonChart::steady(cigar_chart(0, 2.5), move |x| cigar_potential(x) * factor);
            (
                "perturbed_non_soliton",
                format!("cigar metric with potential scaled by {factor}"),
                s,
                None,
                vec![
                    Expected::new(
                        "not_soliton",
                        Property::NotSoliton { fraction: 0.9 },
                        1e-3,
                        Derived,
                        "residual is (factor − 1)∇²F",
                    ),
                    Expected::new(
                        "branch",
                        Property::Branch {
                            branch: Branch::NotASoliton,
                        },
                        0.0,
                        Derived,
                        "negative control",
                    ),
                ],
            )
        }
        "cigar_cross_flat" => {
            let k = p.usize("k", 2)?;
            require(k >= 1, || "cigar_cross_flat needs k >= 1".into())?;
            let s = SolitonChart::steady(cigar_chart(k, 2.0), cigar_potential)
                .with_hamilton_constant(4.0);
            (
                "cigar_cross_flat",
                format!("cigar x R^{k} with the cigar potential"),
                s,
                None,
                vec![
                    Expected::new(
                        "is_soliton",
                        Property::SolitonResidual,
                        1e-8,
                        Derived,
                        "products of steady solitons are steady",
                    ),
                    Expected::new(
                        "hamilton_constant",
                        Property::HamiltonConstant { value: 4.0 },
                        1e-8,
                        Derived,
                        "flat factors add nothing",
                    ),
                    Expected::new(
                        "d_nonzero",
                        Property::DNonvanishing,
                        1e-2,
                        Derived,
                        "W(·,·,·,∇f) does not cancel C",
                    ),
                    Expected::new(
                        "branch",
                        Property::Branch {
                            branch: Branch::NotDFlat,
                        },
                        0.0,
                        Derived,
                        "D ≠ 0",
                    ),
                ],
            )
        }
        "bryant" => {
            let n = p.usize("n", 5)?;
            let r_max = p.f64("r_max", 100.0)?;
            let c = p.f64("normalization", 1.0)?;
            let mut cfg = BryantConfig::new(n);
            cfg.r_max = r_max;
            cfg.normalization = c;
            let s = bryant_chart(&integrate(&cfg)?)?.with_hamilton_constant(c);
            let mut bounds = s.chart().domain().bounds().to_vec();
            bounds[0] = (0.1, 0.9 * r_max);
            (
                "bryant",
                format!("numerical Bryant soliton, n = {n}, R(0) = {c}"),
                s,
                Some(Domain::new(bounds)),
                vec![
                    Expected::new(
                        "is_soliton",
                        Property::SolitonResidual,
                        1e-5,
                        Derived,
                        "assembled from the integrated profile",
                    ),
                    Expected::new(
                        "hamilton_constant",
                        Property::HamiltonConstant { value: c },
                        1e-6,
                        Derived,
                        "normalized by R(0) with ∇F(0) = 0",
                    ),
                    Expected::new(
                        "d_zero",
                        Property::DVanishes,
                        1e-4,
                        Reference,
                        "rotationally symmetric",
                    ),
                    Expected::new(
                        "branch",
                        Property::Branch {
                            branch: Branch::Bryant,
                        },
                        0.0,
                        Reference,
                        "tip with round fiber",
                    ),
                ],
            )
        }
        other => return Err(Error::UnknownName(other.to_string())),
    };
    let params = p.finish()?;
    let sample_domain = sample_domain.unwrap_or_else(|| box_domain(&soliton));
    Ok(CatalogEntry {
        name,
        description,
        params,
        soliton,
        sample_domain,
        expected,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub observed: Option<f64>,
    pub detail: String,
    pub tolerance: f64,
    pub provenance: Provenance,
    pub note: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryReport {
    pub name: &'static str,
    pub samples: usize,
    pub checks: Vec<PropertyCheck>,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Pointwise quantities used by the checks.
struct PointValues {
    rel_residual: f64,
    riemann: f64,
    ricci: f64,
    scalar: f64,
    energy: Option<f64>,
    d_norm: Option<f64>,
    weyl: Option<f64>,
}

fn point_values(s: &SolitonChart, x: &[f64]) -> Result<PointValues> {
    let n = s.dim();
    let p = s.expand(x, 3)?;
    let geo = p.geometry();
    let riemann = geo.riemann_norm();
    Ok(PointValues {
        rel_residual: p.soliton_residual() / (1.0 + riemann),
        riemann,
        ricci: geo.norm(&geo.ricci()),
        scalar: geo.scalar(),
        energy: if s.is_steady() {
            Some(p.hamilton()?.energy)
        } else {
            None
        },
        d_norm: if n >= 3 {
            Some(geo.norm(&p.d_direct()?))
        } else {
            None
        },
        weyl: if n >= 3 {
            Some(geo.norm(&geo.weyl()?))
        } else {
            None
        },
    })
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Checks every expected property of `entry` on `samples` seeded points.
pub fn check_entry(entry: &CatalogEntry, samples: usize, seed: u64) -> Result<EntryReport> {
    let points = entry.sample_points(samples, seed);
    if points.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let s = &entry.soliton;
    let values: Vec<PointValues> = points
        .par_iter()
        .map(|x| point_values(s, x))
        .collect::<Result<_>>()?;
    let mut checks = Vec::with_capacity(entry.expected.len());
    for e in &entry.expected {
        let tol = e.tolerance;
        let (passed, observed, detail) = match &e.property {
            Property::SolitonResidual => {
                let v = max_of(values.iter().map(|p| p.rel_residual));
                (
                    v < tol,
                    Some(v),
                    "max relative soliton residual".to_string(),
                )
            }
            Property::NotSoliton { fraction } => {
                let above = values.iter().filter(|p| p.rel_residual > tol).count();
                let f = above as f64 / values.len() as f64;
                (
                    f >= *fraction,
                    Some(f),
                    format!("fraction of samples above {tol:e}"),
                )
            }
            Property::HamiltonConstant { value } => {
                let energies: Vec<f64> = values.iter().filter_map(|p| p.energy).collect();
                let v = max_of(energies.iter().map(|x| (x - value).abs()));
                (
                    !energies.is_empty() && v < tol,
                    Some(v),
                    format!("max |R + |∇F|² − {value}|"),
                )
            }
            Property::ScalarAt { point, value } => {
                let r = s.expand(point, 2)?.geometry().scalar();
                ((r - value).abs() < tol, Some(r), format!("R at {point:?}"))
            }
            Property::ScalarConstant { value } => {
                let v = max_of(values.iter().map(|p| (p.scalar - value).abs()));
                (v < tol, Some(v), format!("max |R − {value}|"))
            }
            Property::RiemannVanishes => {
                let v = max_of(values.iter().map(|p| p.riemann));
                (v < tol, Some(v), "max ‖Rm‖".into())
            }
            Property::RicciVanishes => {
                let v = max_of(values.iter().map(|p| p.ricci));
                (v < tol, Some(v), "max ‖Ric‖".into())
            }
            Property::DVanishes => {
                let v = max_of(values.iter().filter_map(|p| p.d_norm));
                (v < tol, Some(v), "max ‖D‖".into())
            }
            Property::DNonvanishing => {
                let v = max_of(values.iter().filter_map(|p| p.d_norm));
                (v > tol, Some(v), "max ‖D‖".into())
            }
            Property::WeylNonvanishing => {
                let v = max_of(values.iter().filter_map(|p| p.weyl));
                (v > tol, Some(v), "max ‖W‖".into())
            }
            Property::ConstancySpread { level } => {
                let r = constancy_scan(s, *level, samples.max(2))?;
                (
                    r.scalar_spread > tol,
                    Some(r.scalar_spread),
                    format!("spread of R on r = {level}"),
                )
            }
            Property::Branch { branch } => {
                let opts = ClassifyOptions {
                    seed,
                    ..ClassifyOptions::default()
                };
                let got = classify_chart_at(s, &points, &opts)?.branch;
                (got == *branch, None, format!("classified as {got}"))
            }
            Property::NotSteady => {
                let refused = matches!(
                    classify_chart_at(s, &points, &ClassifyOptions::default()),
                    Err(Error::NonzeroRho(_))
                );
                (refused, None, "classifier refuses rho != 0".into())
            }
        };
        checks.push(PropertyCheck {
            name: e.name,
            passed,
            observed,
            detail,
            tolerance: tol,
            provenance: e.provenance,
            note: e.note,
        });
    }
    Ok(EntryReport {
        name: entry.name,
        samples: points.len(),
        checks,
    })
}

/// Builds every catalog entry with default parameters and checks it.
pub fn sweep(samples: usize, seed: u64) -> Result<Vec<EntryReport>> {
    NAMES
        .iter()
        .map(|name| check_entry(&make(name, &Params::new())?, samples, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> Params {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn unknown_names_and_bad_params_are_rejected() {
        assert!(matches!(
            make("torus", &Params::new()),
            Err(Error::UnknownName(_))
        ));
        assert!(matches!(
            make("round_sphere", &params(&[("radius", "-1")])),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            make("flat", &params(&[("colour", "red")])),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            make("product_line_cross_fiber", &params(&[("fiber", "sphere")])),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn every_expectation_has_a_note() {
        for name in NAMES.iter().filter(|n| **n != "bryant") {
            let e = make(name, &Params::new()).unwrap();
            assert!(!e.expected.is_empty());
            assert!(e
                .expected
                .iter()
                .all(|x| !x.note.is_empty() && x.tolerance >= 0.0));
        }
    }

    #[test]
    fn cigar_entry_passes() {
        let r = check_entry(&make("cigar", &Params::new()).unwrap(), 12, 3).unwrap();
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn schwarzschild_is_ricci_flat_not_flat() {
        let r = check_entry(
            &make("euclidean_schwarzschild", &Params::new()).unwrap(),
            8,
            1,
        )
        .unwrap();
        assert!(r.passed(), "{r:#?}");
    }
}
