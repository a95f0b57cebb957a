//! Warped products `dr² + φ(r)² ḡ` over an Einstein fiber `Ric(ḡ) = λ ḡ`.
//!
//! Fiber tensors are reported against the coordinate components of ḡ, so in
//! an assembled chart with `g_ab = φ² ḡ_ab` the fiber block of Ricci is
//! `(λ − φφ″ − (n−2)φ′²) ḡ_ab`, and the fiber Hessian of `F` is `φφ′F′ ḡ_ab`.
//! Radial potentials follow the steady sign convention `Ric = ∇²F`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chart::{CoordinateChart, DerivativeMode, Domain, FieldFn};
use crate::error::{Error, Result};
use crate::geometry::LocalGeometry;
use crate::jet::{Jet, JetSpace};
use crate::ode::{dopri5, Tolerances};
use crate::soliton::SolitonChart;
use crate::tensor::Tensor;

pub const CSV_HEADER: [&str; 8] = ["r", "phi", "dphi", "d2phi", "d3phi", "F", "dF", "d2F"];

/// Relative tolerance on the steady ODE residual below which a profile is
/// treated as a steady soliton.
pub const STEADY_TOL: f64 = 1e-8;

/// Margin kept from coordinate singularities of fiber charts.
pub const POLE_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WarpedCurvature {
    pub r11: f64,
    /// `R_ab = fiber_coeff · ḡ_ab`.
    pub fiber_coeff: f64,
    pub scalar: f64,
}

/// Ricci and scalar curvature of `dr² + φ² ḡ` with `Ric(ḡ) = λ ḡ`.
pub fn warped_curvature(
    n: usize,
    lambda: f64,
    phi: f64,
    dphi: f64,
    d2phi: f64,
) -> Result<WarpedCurvature> {
    if phi <= 0.0 || !phi.is_finite() {
        return Err(Error::NonpositivePhi { r: f64::NAN, phi });
    }
    let m = n as f64 - 1.0;
    Ok(WarpedCurvature {
        r11: -m * d2phi / phi,
        fiber_coeff: lambda - phi * d2phi - (m - 1.0) * dphi * dphi,
        scalar: m * (lambda - 2.0 * phi * d2phi) / (phi * phi)
            - m * (m - 1.0) * (dphi / phi).powi(2),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WarpedHessian {
    pub rr: f64,
    pub ra: f64,
    /// `∇_a∇_b F = fiber_coeff · ḡ_ab`.
    pub fiber_coeff: f64,
}

/// Hessian of a radial function `F(r)`.
pub fn warped_hessian(df: f64, d2f: f64, phi: f64, dphi: f64) -> Result<WarpedHessian> {
    if phi <= 0.0 || !phi.is_finite() {
        return Err(Error::NonpositivePhi { r: f64::NAN, phi });
    }
    Ok(WarpedHessian {
        rr: d2f,
        ra: 0.0,
        fiber_coeff: phi * dphi * df,
    })
}

/// `(φ″, F″)` from the steady soliton equations for a warped product.
pub fn steady_rhs(phi: f64, dphi: f64, df: f64, n: usize, lambda: f64) -> Result<(f64, f64)> {
    if phi <= 0.0 || !phi.is_finite() {
        return Err(Error::NonpositivePhi { r: f64::NAN, phi });
    }
    let m = n as f64 - 1.0;
    let d2phi = (lambda - (m - 1.0) * dphi * dphi - phi * dphi * df) / phi;
    Ok((d2phi, -m * d2phi / phi))
}

/// Taylor coefficients of `(φ, F)` about a point where the state is
/// `(φ, φ′, F, F′)`, generated order by order from the steady equations.
pub fn steady_taylor(
    state: [f64; 4],
    n: usize,
    lambda: f64,
    order: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let [phi0, dphi0, f0, df0] = state;
    if phi0 <= 0.0 {
        return Err(Error::NonpositivePhi {
            r: f64::NAN,
            phi: phi0,
        });
    }
    let m = n as f64 - 1.0;
    let len = order.max(1) + 1;
    let mut p = vec![0.0; len];
    let mut q = vec![0.0; len];
    p[0] = phi0;
    p[1] = dphi0;
    q[0] = f0;
    q[1] = df0;
    let top = len - 1;
    let space = JetSpace::get(1, top);
    for k in 2..=top {
        let phi = Jet::from_coeffs(&space, top, p.clone());
        let dphi = phi.derivative(0);
        let df = Jet::from_coeffs(&space, top, q.clone()).derivative(0);
        let d2phi = (lambda - (m - 1.0) * (&dphi * &dphi) - &(&phi * &dphi) * &df) / &phi;
        p[k] = d2phi.coeffs()[k - 2] / (k * (k - 1)) as f64;
        let phi = Jet::from_coeffs(&space, top, p.clone());
        let d2phi = phi.derivative(0).derivative(0);
        let d2f = -m * (&d2phi / &phi);
        q[k] = d2f.coeffs()[k - 2] / (k * (k - 1)) as f64;
    }
    p.truncate(order + 1);
    q.truncate(order + 1);
    Ok((p, q))
}

/// Whether the fiber is known to be a round sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberShape {
    Round,
    NotRound,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct FiberSpec {
    pub fiber_dim: usize,
    pub einstein_lambda: Option<f64>,
    pub shape: FiberShape,
    pub chart: Option<CoordinateChart>,
}

/// Hyperspherical chart of the round sphere of radius `radius`; polar angles
/// stay `margin` away from the poles.
pub fn sphere_chart(dim: usize, radius: f64, margin: f64) -> CoordinateChart {
    use std::f64::consts::PI;
    let mut bounds = vec![(margin, PI - margin); dim];
    bounds[dim - 1] = (-PI, PI);
    let a2 = radius * radius;
    CoordinateChart::diagonal(
        format!("round_sphere(dim={dim}, radius={radius})"),
        dim,
        Domain::new(bounds),
        DerivativeMode::analytic(12),
        move |x| {
            let mut out = Vec::with_capacity(dim);
            let mut w = x[0].lift(a2);
            for i in 0..dim {
                out.push(w.clone());
                if i + 1 < dim {
                    let s = x[i].sin();
                    w = &w * &(&s * &s);
                }
            }
            out
        },
    )
}

/// Euclidean metric on a coordinate box (a fundamental domain of a flat torus).
pub fn flat_chart(dim: usize) -> CoordinateChart {
    use std::f64::consts::PI;
    CoordinateChart::diagonal(
        format!("flat(dim={dim})"),
        dim,
        Domain::new(vec![(-PI, PI); dim]),
        DerivativeMode::analytic(12),
        move |x| vec![x[0].lift(1.0); dim],
    )
}

/// Upper half-space model with `Ric = λ g`, `λ < 0`, `dim ≥ 2`.
pub fn hyperbolic_chart(dim: usize, lambda: f64) -> CoordinateChart {
    let a2 = (dim as f64 - 1.0) / -lambda;
    let mut bounds = vec![(-1.0, 1.0); dim];
    bounds[0] = (0.5, 2.0);
    CoordinateChart::diagonal(
        format!("hyperbolic(dim={dim}, lambda={lambda})"),
        dim,
        Domain::new(bounds),
        DerivativeMode::analytic(12),
        move |x| {
            let c = (&x[0] * &x[0]).recip() * a2;
            vec![c; dim]
        },
    )
}

impl FiberSpec {
    pub fn round_sphere(dim: usize, radius: f64) -> Self {
        let lambda = if dim >= 2 {
            (dim as f64 - 1.0) / (radius * radius)
        } else {
            0.0
        };
        FiberSpec {
            fiber_dim: dim,
            einstein_lambda: Some(lambda),
            shape: FiberShape::Round,
            chart: Some(sphere_chart(dim, radius, POLE_MARGIN)),
        }
    }

    pub fn flat(dim: usize) -> Self {
        FiberSpec {
            fiber_dim: dim,
            einstein_lambda: Some(0.0),
            shape: if dim == 1 {
                FiberShape::Round
            } else {
                FiberShape::NotRound
            },
            chart: Some(flat_chart(dim)),
        }
    }

    /// Simply connected space form with Einstein constant `lambda`.
    pub fn space_form(dim: usize, lambda: f64) -> Self {
        if dim < 2 || lambda == 0.0 {
            FiberSpec::flat(dim)
        } else if lambda > 0.0 {
            FiberSpec::round_sphere(dim, ((dim as f64 - 1.0) / lambda).sqrt())
        } else {
            FiberSpec {
                fiber_dim: dim,
                einstein_lambda: Some(lambda),
                shape: FiberShape::NotRound,
                chart: Some(hyperbolic_chart(dim, lambda)),
            }
        }
    }

    /// Fiber described by an explicit chart; `λ` is fitted from samples.
    pub fn from_chart(chart: CoordinateChart, shape: FiberShape) -> Result<Self> {
        let dim = chart.dim();
        let points = chart.domain().sample(8, 11);
        if points.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for x in &points {
            let geo = LocalGeometry::new(&chart, x, 2)?;
            num += geo.scalar();
            den += dim as f64;
        }
        let mut spec = FiberSpec {
            fiber_dim: dim,
            einstein_lambda: Some(num / den),
            shape,
            chart: Some(chart),
        };
        if spec.einstein_residual(&points)? > 1e-6 {
            spec.einstein_lambda = None;
        }
        Ok(spec)
    }

    /// `max ‖Ric(ḡ) − λ ḡ‖` over `points` of the fiber chart.
    pub fn einstein_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let chart = self.chart.as_ref().ok_or(Error::MissingFiberChart)?;
        let lambda = self.einstein_lambda.unwrap_or(0.0);
        let dim = chart.dim();
        let mut worst: f64 = 0.0;
        for x in points {
            let geo = LocalGeometry::new(chart, x, 2)?;
            let g = Tensor::from_fn(dim, 2, |ij| geo.metric()[ij[0] * dim + ij[1]]);
            worst = worst.max(geo.norm(&geo.ricci().sub(&g.scaled(lambda))));
        }
        Ok(worst)
    }
}

/// Radial functions of a fibration, as Taylor coefficients about any `r` in range.
pub trait RadialData: Send + Sync {
    fn range(&self) -> (f64, f64);
    /// `[φ, φ′, φ″/2, …]` about `r`.
    fn warp(&self, r: f64, order: usize) -> Vec<f64>;
    /// Taylor coefficients of the steady-convention potential `F` about `r`.
    fn potential(&self, r: f64, order: usize) -> Vec<f64>;
}

type RadialFn = Arc<dyn Fn(&Jet) -> Jet + Send + Sync>;

/// Radial data given by closed-form functions of `r`.
#[derive(Clone)]
pub struct ClosedFormRadial {
    pub range: (f64, f64),
    warp: RadialFn,
    potential: RadialFn,
}

impl ClosedFormRadial {
    pub fn new(
        range: (f64, f64),
        warp: impl Fn(&Jet) -> Jet + Send + Sync + 'static,
        potential: impl Fn(&Jet) -> Jet + Send + Sync + 'static,
    ) -> Self {
        ClosedFormRadial {
            range,
            warp: Arc::new(warp),
            potential: Arc::new(potential),
        }
    }

    fn taylor(f: &RadialFn, r: f64, order: usize) -> Vec<f64> {
        let space = JetSpace::get(1, order);
        f(&Jet::variable(&space, order, 0, r)).coeffs().to_vec()
    }
}

impl RadialData for ClosedFormRadial {
    fn range(&self) -> (f64, f64) {
        self.range
    }

    fn warp(&self, r: f64, order: usize) -> Vec<f64> {
        ClosedFormRadial::taylor(&self.warp, r, order)
    }

    fn potential(&self, r: f64, order: usize) -> Vec<f64> {
        ClosedFormRadial::taylor(&self.potential, r, order)
    }
}

/// Declares that coordinate 0 is a radial coordinate and coordinates `1..n`
/// parametrize the fiber, so that `r = const` slices are level sets.
#[derive(Clone)]
pub struct Fibration {
    radial: Arc<dyn RadialData>,
    fiber: FiberSpec,
    fiber_domain: Domain,
}

impl std::fmt::Debug for Fibration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fibration")
            .field("range", &self.radial.range())
            .field("fiber", &self.fiber)
            .finish()
    }
}

impl Fibration {
    pub fn new(radial: Arc<dyn RadialData>, fiber: FiberSpec, fiber_domain: Domain) -> Self {
        Fibration {
            radial,
            fiber,
            fiber_domain,
        }
    }

    pub fn radial_range(&self) -> (f64, f64) {
        self.radial.range()
    }

    pub fn fiber(&self) -> &FiberSpec {
        &self.fiber
    }

    pub fn fiber_domain(&self) -> &Domain {
        &self.fiber_domain
    }

    pub fn radial(&self) -> &Arc<dyn RadialData> {
        &self.radial
    }

    /// `(φ, φ′, φ″)` at `r`.
    pub fn warp_derivatives(&self, r: f64) -> [f64; 3] {
        let t = self.radial.warp(r, 2);
        [t[0], t[1], 2.0 * t[2]]
    }

    /// `(F, F′, F″)` at `r`.
    pub fn potential_derivatives(&self, r: f64) -> [f64; 3] {
        let t = self.radial.potential(r, 2);
        [t[0], t[1], 2.0 * t[2]]
    }
}

/// Sampled warping function and potential with derivatives.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WarpedProfile {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    pub d3phi: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "dF")]
    pub df: Vec<f64>,
    #[serde(rename = "d2F")]
    pub d2f: Vec<f64>,
    pub n: usize,
    pub lambda: f64,
    #[serde(skip)]
    steady: bool,
}

impl WarpedProfile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: Vec<f64>,
        phi: Vec<f64>,
        dphi: Vec<f64>,
        d2phi: Vec<f64>,
        d3phi: Vec<f64>,
        f: Vec<f64>,
        df: Vec<f64>,
        d2f: Vec<f64>,
        n: usize,
        lambda: f64,
    ) -> Result<Self> {
        let len = r.len();
        if [&phi, &dphi, &d2phi, &d3phi, &f, &df, &d2f]
            .iter()
            .any(|c| c.len() != len)
        {
            return Err(Error::Format("profile columns differ in length".into()));
        }
        if len < 2 {
            return Err(Error::GridTooCoarse(format!("{len} grid points")));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("dimension {n} < 2")));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("grid is not strictly increasing".into()));
        }
        if [&r, &phi, &dphi, &d2phi, &d3phi, &f, &df, &d2f]
            .iter()
            .any(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Format("non-finite profile value".into()));
        }
        for i in 1..len - 1 {
            if phi[i] <= 0.0 {
                return Err(Error::NonpositivePhi {
                    r: r[i],
                    phi: phi[i],
                });
            }
        }
        let mut profile = WarpedProfile {
            r,
            phi,
            dphi,
            d2phi,
            d3phi,
            f,
            df,
            d2f,
            n,
            lambda,
            steady: false,
        };
        profile.steady = profile.ode_residual() < STEADY_TOL;
        Ok(profile)
    }

    /// Samples closed-form `φ(r)` and `F(r)` on `grid`.
    pub fn from_fn(
        grid: Vec<f64>,
        n: usize,
        lambda: f64,
        warp: impl Fn(&Jet) -> Jet,
        potential: impl Fn(&Jet) -> Jet,
    ) -> Result<Self> {
        let space = JetSpace::get(1, 3);
        let mut cols: Vec<Vec<f64>> = (0..7).map(|_| Vec::with_capacity(grid.len())).collect();
        for &r in &grid {
            let x = Jet::variable(&space, 3, 0, r);
            let p = warp(&x);
            let q = potential(&x);
            cols[0].push(p.partial(&[0]));
            cols[1].push(p.partial(&[1]));
            cols[2].push(p.partial(&[2]));
            cols[3].push(p.partial(&[3]));
            cols[4].push(q.partial(&[0]));
            cols[5].push(q.partial(&[1]));
            cols[6].push(q.partial(&[2]));
        }
        let mut it = cols.into_iter();
        let mut next = || it.next().expect("seven columns");
        WarpedProfile::new(
            grid,
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
            n,
            lambda,
        )
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r[0], self.r[self.len() - 1])
    }

    /// True when the profile satisfies the steady equations at every node.
    pub fn is_steady(&self) -> bool {
        self.steady
    }

    /// Largest scale-relative residual of the steady equations (and of `φ‴`
    /// against the differentiated equation) over nodes with `φ > 0`.
    pub fn ode_residual(&self) -> f64 {
        let m = self.n as f64 - 1.0;
        let lambda = self.lambda;
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let (p, p1, p2, p3) = (self.phi[i], self.dphi[i], self.d2phi[i], self.d3phi[i]);
            let (f1, f2) = (self.df[i], self.d2f[i]);
            if p <= 0.0 {
                continue;
            }
            let terms = [lambda, p * p2, (m - 1.0) * p1 * p1, p * p1 * f1];
            let scale = 1.0 + terms.iter().map(|t| t.abs()).sum::<f64>();
            let e1 = (p * p1 * f1 - (lambda - p * p2 - (m - 1.0) * p1 * p1)).abs() / scale;
            let e2 = (f2 + m * p2 / p).abs() / (1.0 + f2.abs() + (m * p2 / p).abs());
            // d/dr of φφ″ + (n−2)φ′² + φφ′F′ = λ
            let dterms = [
                p1 * p2,
                p * p3,
                2.0 * (m - 1.0) * p1 * p2,
                p1 * p1 * f1,
                p * p2 * f1,
                p * p1 * f2,
            ];
            let e3 = (dterms.iter().sum::<f64>()).abs()
                / (1.0 + dterms.iter().map(|t| t.abs()).sum::<f64>());
            worst = worst.max(e1).max(e2).max(e3);
        }
        worst
    }

    /// Index `i` with `r[i] ≤ r ≤ r[i+1]`.
    fn interval(&self, r: f64) -> usize {
        let k = self.r.partition_point(|&x| x <= r);
        k.saturating_sub(1).min(self.len() - 2)
    }

    fn nearest(&self, r: f64) -> usize {
        let i = self.interval(r);
        if (r - self.r[i]).abs() <= (self.r[i + 1] - r).abs() {
            i
        } else {
            i + 1
        }
    }

    /// `(φ, φ′, F, F′)` at `r`, integrating the steady equations from the
    /// nearest node when the profile is steady.
    pub fn state_at(&self, r: f64) -> Result<[f64; 4]> {
        if self.steady {
            let mut i = self.nearest(r);
            if r == self.r[i] {
                return Ok([self.phi[i], self.dphi[i], self.f[i], self.df[i]]);
            }
            // a tip node with φ = 0 is singular for the equations
            if self.phi[i] <= 0.0 {
                i = if i + 1 < self.len() { i + 1 } else { i - 1 };
            }
            let y0 = [self.phi[i], self.dphi[i], self.f[i], self.df[i]];
            let (n, lambda) = (self.n, self.lambda);
            let tol = Tolerances {
                rtol: 1e-13,
                atol: 1e-15,
                h0: None,
                max_steps: 100_000,
            };
            dopri5(
                |_, y: &[f64; 4]| {
                    let (p2, f2) = steady_rhs(y[0], y[1], y[3], n, lambda)?;
                    Ok([y[1], p2, y[3], f2])
                },
                self.r[i],
                y0,
                r,
                &tol,
                |_, _| Ok(()),
            )
        } else {
            let (p, q) = self.hermite_taylor(r, 1);
            Ok([p[0], p[1], q[0], q[1]])
        }
    }

    /// Taylor coefficients of `φ` and `F` about `r` to `order`.
    pub fn taylor(&self, r: f64, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.steady {
            let state = self.state_at(r)?;
            if state[0] > 0.0 {
                return steady_taylor(state, self.n, self.lambda, order);
            }
            // at a tip only the node data is regular
            Ok(self.hermite_taylor(r, order))
        } else {
            Ok(self.hermite_taylor(r, order))
        }
    }

    /// `φ(r)` from the node Hermite interpolant, without integration.
    pub fn interpolate_phi(&self, r: f64) -> f64 {
        self.hermite_taylor(r, 0).0[0]
    }

    /// Septic Hermite interpolation of `φ` (matching `φ … φ‴`) and quintic of
    /// `F` (matching `F … F″`) on the interval containing `r`.
    fn hermite_taylor(&self, r: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
        let i = self.interval(r);
        let (a, b) = (self.r[i], self.r[i + 1]);
        let h = b - a;
        let t = (r - a) / h;
        let phi = hermite(
            &[self.phi[i], self.dphi[i], self.d2phi[i], self.d3phi[i]],
            &[
                self.phi[i + 1],
                self.dphi[i + 1],
                self.d2phi[i + 1],
                self.d3phi[i + 1],
            ],
            h,
        );
        let f = hermite(
            &[self.f[i], self.df[i], self.d2f[i]],
            &[self.f[i + 1], self.df[i + 1], self.d2f[i + 1]],
            h,
        );
        (poly_taylor(&phi, t, h, order), poly_taylor(&f, t, h, order))
    }

    /// Curvature from the formulas at node `i`.
    pub fn curvature_at_node(&self, i: usize) -> Result<WarpedCurvature> {
        warped_curvature(
            self.n,
            self.lambda,
            self.phi[i],
            self.dphi[i],
            self.d2phi[i],
        )
        .map_err(|_| Error::NonpositivePhi {
            r: self.r[i],
            phi: self.phi[i],
        })
    }

    /// Scalar curvature at every node (NaN where `φ = 0`).
    pub fn scalar_curvature(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.curvature_at_node(i).map_or(f64::NAN, |c| c.scalar))
            .collect()
    }

    /// `R + F′²` at every node.
    pub fn energy(&self) -> Vec<f64> {
        self.scalar_curvature()
            .iter()
            .zip(&self.df)
            .map(|(s, d)| s + d * d)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for i in 0..self.len() {
            let row = [
                self.r[i],
                self.phi[i],
                self.dphi[i],
                self.d2phi[i],
                self.d3phi[i],
                self.f[i],
                self.df[i],
                self.d2f[i],
            ];
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the eight CSV columns. Missing `n` or `λ` are inferred from the
    /// steady equations by least squares.
    pub fn read_csv<R: Read>(reader: R, n: Option<usize>, lambda: Option<f64>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header != CSV_HEADER {
            return Err(Error::Format(format!(
                "expected header {}, found {}",
                CSV_HEADER.join(","),
                header.join(",")
            )));
        }
        let mut cols = vec![Vec::new(); 8];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 8 {
                return Err(Error::Format(format!(
                    "row {} has {} fields",
                    line + 2,
                    record.len()
                )));
            }
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Format(format!("row {}: cannot parse `{field}`", line + 2))
                })?;
                cols[c].push(v);
            }
        }
        let n = match n {
            Some(n) => n,
            None => infer_dimension(&cols[1], &cols[3], &cols[7])?,
        };
        let lambda = match lambda {
            Some(l) => l,
            None => infer_lambda(n, &cols[1], &cols[2], &cols[3], &cols[6]),
        };
        let mut it = cols.into_iter();
        let mut next = || it.next().expect("eight columns");
        WarpedProfile::new(
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
            next(),
            n,
            lambda,
        )
    }

    pub fn load_csv(path: impl AsRef<Path>, n: Option<usize>, lambda: Option<f64>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        WarpedProfile::read_csv(std::io::BufReader::new(file), n, lambda)
    }
}

impl RadialData for WarpedProfile {
    fn range(&self) -> (f64, f64) {
        WarpedProfile::range(self)
    }

    fn warp(&self, r: f64, order: usize) -> Vec<f64> {
        self.taylor(r, order)
            .map(|t| t.0)
            .unwrap_or_else(|_| vec![f64::NAN; order + 1])
    }

    fn potential(&self, r: f64, order: usize) -> Vec<f64> {
        self.taylor(r, order)
            .map(|t| t.1)
            .unwrap_or_else(|_| vec![f64::NAN; order + 1])
    }
}

/// `n − 1 = −Σ F″ q / Σ q²` with `q = φ″/φ`, from `F″ = −(n−1)φ″/φ`.
fn infer_dimension(phi: &[f64], d2phi: &[f64], d2f: &[f64]) -> Result<usize> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..phi.len() {
        if phi[i] > 0.0 {
            let q = d2phi[i] / phi[i];
            num -= d2f[i] * q;
            den += q * q;
        }
    }
    if den < 1e-20 {
        return Err(Error::Format(
            "cannot infer the dimension from a profile with φ″ ≡ 0; pass it explicitly".into(),
        ));
    }
    let n = num / den + 1.0;
    if !n.is_finite() || n < 1.5 {
        return Err(Error::Format(format!(
            "inferred dimension {n:.3} is not valid"
        )));
    }
    Ok(n.round() as usize)
}

/// Mean of `φφ″ + (n−2)φ′² + φφ′F′`, which equals λ on a steady profile.
fn infer_lambda(n: usize, phi: &[f64], dphi: &[f64], d2phi: &[f64], df: &[f64]) -> f64 {
    let m = n as f64 - 1.0;
    let values: Vec<f64> = (0..phi.len())
        .filter(|&i| phi[i] > 0.0)
        .map(|i| phi[i] * d2phi[i] + (m - 1.0) * dphi[i] * dphi[i] + phi[i] * dphi[i] * df[i])
        .collect();
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Monomial coefficients in `t ∈ [0, 1]` of the Hermite interpolant matching
/// `left[j] = u^{(j)}(a)` and `right[j] = u^{(j)}(b)` with `b − a = h`.
fn hermite(left: &[f64], right: &[f64], h: f64) -> Vec<f64> {
    let k = left.len();
    let deg = 2 * k;
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    let mut rhs = DVector::<f64>::zeros(deg);
    for j in 0..k {
        let hj = h.powi(j as i32);
        // at t = 0 only the t^j term survives
        m[(j, j)] = falling(j, j);
        rhs[j] = left[j] * hj;
        for p in j..deg {
            m[(k + j, p)] = falling(p, j);
        }
        rhs[k + j] = right[j] * hj;
    }
    m.lu()
        .solve(&rhs)
        .expect("Hermite system is nonsingular")
        .iter()
        .copied()
        .collect()
}

/// `p (p−1) ⋯ (p−j+1)`.
fn falling(p: usize, j: usize) -> f64 {
    (0..j).map(|i| (p - i) as f64).product()
}

/// Taylor coefficients in `r` about `t` of the polynomial `Σ c_p t^p`, with
/// `r = a + h t`.
fn poly_taylor(c: &[f64], t: f64, h: f64, order: usize) -> Vec<f64> {
    let mut fact = 1.0;
    (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            let d: f64 = (k..c.len())
                .map(|p| c[p] * falling(p, k) * t.powi((p - k) as i32))
                .sum();
            d / h.powi(k as i32) / fact
        })
        .collect()
}

/// Builds the chart `dr² + φ(r)² ḡ` and steady potential `F(r)` from a
/// profile and a fiber with an explicit chart.
pub fn profile_to_chart(profile: &WarpedProfile, fiber: &FiberSpec) -> Result<SolitonChart> {
    if profile.len() < 2 {
        return Err(Error::GridTooCoarse(format!(
            "{} grid points",
            profile.len()
        )));
    }
    let radial: Arc<dyn RadialData> = Arc::new(profile.clone());
    let mode = if profile.is_steady() {
        DerivativeMode::analytic(8)
    } else {
        DerivativeMode::analytic(3)
    };
    warped_chart(
        radial,
        fiber,
        profile.n,
        mode,
        format!("warped_profile(n={})", profile.n),
    )
}

/// Assembles a warped chart from any radial data over `fiber`.
pub fn warped_chart(
    radial: Arc<dyn RadialData>,
    fiber: &FiberSpec,
    n: usize,
    mode: DerivativeMode,
    label: String,
) -> Result<SolitonChart> {
    let fiber_chart = fiber.chart.clone().ok_or(Error::MissingFiberChart)?;
    if fiber_chart.dim() + 1 != n {
        return Err(Error::InvalidParams(format!(
            "fiber dimension {} does not match total dimension {n}",
            fiber_chart.dim()
        )));
    }
    let (lo, hi) = radial.range();
    let mut bounds = vec![(lo, hi)];
    bounds.extend_from_slice(fiber_chart.domain().bounds());
    let fiber_domain = fiber_chart.domain().clone();
    let domain = {
        let fd = fiber_domain.clone();
        Domain::new(bounds).with_predicate(Arc::new(move |x: &[f64]| fd.contains(&x[1..])))
    };
    let warp_data = radial.clone();
    let fiber_metric = fiber_chart.metric_fn().clone();
    let m = n - 1;
    let metric: FieldFn = Arc::new(move |x: &[Jet]| {
        let order = x[0].order();
        let phi = x[0].compose(&warp_data.warp(x[0].value(), order));
        let phi2 = &phi * &phi;
        let gbar = fiber_metric(&x[1..]);
        let zero = x[0].lift(0.0);
        let mut out = vec![zero; n * n];
        out[0] = x[0].lift(1.0);
        for a in 0..m {
            for b in 0..m {
                out[(a + 1) * n + b + 1] = &phi2 * &gbar[a * m + b];
            }
        }
        out
    });
    let chart = CoordinateChart::new(label, n, domain, mode, metric);
    let pot = radial.clone();
    let fibration = Fibration::new(radial, fiber.clone(), fiber_domain);
    Ok(SolitonChart::steady(chart, move |x: &[Jet]| {
        let order = x[0].order();
        x[0].compose(&pot.potential(x[0].value(), order))
    })
    .with_fibration(fibration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn curvature_formula_examples() {
        for n in 3..=6 {
            let lambda = n as f64 - 2.0;
            let r = 0.7;
            let c = warped_curvature(n, lambda, r, 1.0, 0.0).unwrap();
            assert!(c.r11.abs() + c.fiber_coeff.abs() + c.scalar.abs() < 1e-14);
            let s = PI / 3.0;
            let c = warped_curvature(n, lambda, s.sin(), s.cos(), -s.sin()).unwrap();
            let expect = (n * (n - 1)) as f64;
            assert!((c.scalar - expect).abs() < 1e-12 * expect);
        }
        let c = warped_curvature(5, 2.5, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(c.scalar, 4.0 * 2.5);
        assert!(warped_curvature(4, 2.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn hessian_and_rhs_examples() {
        let h = warped_hessian(2.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!((h.rr, h.ra, h.fiber_coeff), (1.0, 0.0, 4.0));
        assert_eq!(steady_rhs(1.0, 0.0, 3.0, 5, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(steady_rhs(1.0, 1.0, 0.0, 4, 2.0).unwrap(), (0.0, 0.0));
        assert!(steady_rhs(-1.0, 0.0, 0.0, 4, 2.0).is_err());
    }

    #[test]
    fn steady_taylor_matches_rhs_and_its_derivative() {
        let state = [1.3, 0.4, 0.2, 0.9];
        let (n, lambda) = (5, 3.0);
        let (p, q) = steady_taylor(state, n, lambda, 6).unwrap();
        let (p2, f2) = steady_rhs(state[0], state[1], state[3], n, lambda).unwrap();
        assert!((2.0 * p[2] - p2).abs() < 1e-14);
        assert!((2.0 * q[2] - f2).abs() < 1e-14);
        // Compare against a tight integration: Taylor series at small offset.
        let dr = 1e-2;
        let y = dopri5(
            |_, y: &[f64; 4]| {
                let (a, b) = steady_rhs(y[0], y[1], y[3], n, lambda)?;
                Ok([y[1], a, y[3], b])
            },
            0.0,
            state,
            dr,
            &Tolerances {
                rtol: 1e-14,
                atol: 1e-16,
                h0: None,
                max_steps: 10_000,
            },
            |_, _| Ok(()),
        )
        .unwrap();
        let eval = |c: &[f64]| c.iter().rev().fold(0.0, |acc, v| acc * dr + v);
        assert!((eval(&p) - y[0]).abs() < 1e-13);
        assert!((eval(&q) - y[2]).abs() < 1e-13);
    }

    #[test]
    fn hermite_reproduces_septic_polynomials() {
        let c = [0.3, -1.0, 0.5, 0.25, -0.125, 0.2, 0.1, -0.05];
        let u = |x: f64, k: usize| -> f64 {
            (k..8)
                .map(|p| c[p] * falling(p, k) * x.powi((p - k) as i32))
                .sum()
        };
        let (a, b) = (0.5, 0.9);
        let coeffs = hermite(
            &[u(a, 0), u(a, 1), u(a, 2), u(a, 3)],
            &[u(b, 0), u(b, 1), u(b, 2), u(b, 3)],
            b - a,
        );
        let r = 0.77;
        let t = poly_taylor(&coeffs, (r - a) / (b - a), b - a, 5);
        let mut fact = 1.0;
        for (k, tk) in t.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((tk * fact - u(r, k)).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid: Vec<f64> = (1..20).map(|i| 0.1 * i as f64).collect();
        let p = WarpedProfile::from_fn(grid, 4, 2.0, |r| r.sin(), |r| r * r * 0.5).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("r,phi,dphi,d2phi,d3phi,F,dF,d2F\n"));
        let q = WarpedProfile::read_csv(buf.as_slice(), Some(4), Some(2.0)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn flat_profile_is_steady_and_sphere_profile_is_not() {
        let grid: Vec<f64> = (1..30).map(|i| 0.1 * i as f64).collect();
        let flat =
            WarpedProfile::from_fn(grid.clone(), 4, 2.0, |r| r.clone(), |r| r.lift(0.0)).unwrap();
        assert!(flat.is_steady());
        let sphere = WarpedProfile::from_fn(grid, 4, 2.0, |r| r.sin(), |r| r.lift(0.0)).unwrap();
        assert!(!sphere.is_steady());
    }

    #[test]
    fn rejects_bad_profiles() {
        let bad = WarpedProfile::read_csv("r,phi\n1,2\n".as_bytes(), Some(3), Some(1.0));
        assert!(matches!(bad, Err(Error::Format(_))));
        let grid = vec![0.0, 1.0, 2.0];
        let neg = WarpedProfile::from_fn(grid, 3, 1.0, |r| 1.0 - r, |r| r.lift(0.0));
        assert!(matches!(neg, Err(Error::NonpositivePhi { .. })));
    }
}
