//! Gradient Ricci solitons `Ric + ∇²f = ρ g` on a coordinate chart and the
//! pointwise identities they satisfy, centred on the D-tensor.
//!
//! The potential is always stored as `f`. Steady solitons written with the
//! opposite sign, `Ric = ∇²F`, are built with [`SolitonChart::steady`], which
//! stores `f = −F`; then `D = C + W(·,·,·,∇f)` and `D = C − W(·,·,·,∇F)` are
//! one code path.

use std::sync::Arc;

use serde::Serialize;

use crate::chart::{field_jets, CoordinateChart, DerivativeMode, FieldFn};
use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative, orthonormal_frame, values, LocalGeometry};
use crate::jet::Jet;
use crate::tensor::Tensor;
use crate::warped::Fibration;

/// Relative critical-point threshold on `|∇f|`.
pub const CRITICAL_GRADIENT: f64 = 1e-7;

/// A tensor is declared zero when `norm < tol · (1 + ‖Rm‖)`.
pub fn vanishes(norm: f64, tol: f64, riemann_norm: f64) -> bool {
    norm < tol * (1.0 + riemann_norm)
}

/// A chart together with a potential `f` and soliton constant `ρ`.
#[derive(Clone)]
pub struct SolitonChart {
    chart: CoordinateChart,
    potential: FieldFn,
    potential_mode: DerivativeMode,
    rho: f64,
    hamilton_constant: Option<f64>,
    fibration: Option<Fibration>,
}

impl std::fmt::Debug for SolitonChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolitonChart")
            .field("chart", &self.chart)
            .field("rho", &self.rho)
            .field("hamilton_constant", &self.hamilton_constant)
            .field("fibration", &self.fibration.is_some())
            .finish()
    }
}

impl SolitonChart {
    /// `f` is evaluated on coordinate jets; its derivatives follow the chart's mode.
    pub fn new(
        chart: CoordinateChart,
        f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static,
        rho: f64,
    ) -> Self {
        let potential_mode = chart.mode().clone();
        SolitonChart {
            chart,
            potential: Arc::new(move |x: &[Jet]| vec![f(x)]),
            potential_mode,
            rho,
            hamilton_constant: None,
            fibration: None,
        }
    }

    /// Steady soliton `Ric = ∇²F`; stores `f = −F` and `ρ = 0`.
    pub fn steady(
        chart: CoordinateChart,
        potential_f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        SolitonChart::new(chart, move |x| -potential_f(x), 0.0)
    }

    pub fn with_potential_mode(mut self, mode: DerivativeMode) -> Self {
        self.potential_mode = mode;
        self
    }

    pub fn with_fibration(mut self, fibration: Fibration) -> Self {
        self.fibration = Some(fibration);
        self
    }

    pub fn with_hamilton_constant(mut self, c0: f64) -> Self {
        self.hamilton_constant = Some(c0);
        self
    }

    pub fn chart(&self) -> &CoordinateChart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_steady(&self) -> bool {
        self.rho == 0.0
    }

    pub fn hamilton_constant(&self) -> Option<f64> {
        self.hamilton_constant
    }

    pub fn fibration(&self) -> Option<&Fibration> {
        self.fibration.as_ref()
    }

    pub fn potential_mode(&self) -> &DerivativeMode {
        &self.potential_mode
    }

    /// Highest derivative order both the metric and potential can supply.
    pub fn max_order(&self) -> usize {
        self.chart
            .mode()
            .max_order()
            .min(self.potential_mode.max_order())
    }

    /// Value of `f` at `x`.
    pub fn potential_at(&self, x: &[f64]) -> f64 {
        (self.potential)(&Jet::seeds(x, 0))[0].value()
    }

    /// Jet expansion of metric and potential about `x` to derivative order `order`.
    pub fn expand(&self, x: &[f64], order: usize) -> Result<SolitonPoint<'_>> {
        SolitonPoint::new(self, x, order)
    }
}

/// Metric and potential jets about one point.
pub struct SolitonPoint<'a> {
    soliton: &'a SolitonChart,
    geo: LocalGeometry,
    f: f64,
    /// `∂_i f`, order `K − 1`.
    df: Tensor<Jet>,
    /// `∇^i f`, order `K − 1`.
    grad: Tensor<Jet>,
    /// `∇_i∇_j f`, order `K − 2`.
    hess: Tensor<Jet>,
}

impl<'a> SolitonPoint<'a> {
    fn new(soliton: &'a SolitonChart, x: &[f64], order: usize) -> Result<Self> {
        let geo = LocalGeometry::new(&soliton.chart, x, order)?;
        let f = field_jets(&soliton.potential, x, order, &soliton.potential_mode)?
            .pop()
            .expect("one potential component");
        let n = geo.dim();
        let df = Tensor::from_fn(n, 1, |i| f.derivative(i[0]));
        let ginv = geo.inverse_metric_jets();
        let grad = Tensor::from_fn(n, 1, |i| {
            let mut acc = df.get(&[0]).lift(0.0);
            for j in 0..n {
                acc.add_product(ginv.get(&[i[0], j]), df.get(&[j]));
            }
            acc
        });
        let gamma = geo.christoffel_jets();
        let hess = Tensor::from_fn(n, 2, |ij| {
            let mut acc = df.get(&[ij[0]]).derivative(ij[1]);
            for k in 0..n {
                acc.add_scaled_product(gamma.get(&[k, ij[0], ij[1]]), df.get(&[k]), -1.0);
            }
            acc
        });
        Ok(SolitonPoint {
            soliton,
            geo,
            f: f.value(),
            df,
            grad,
            hess,
        })
    }

    pub fn geometry(&self) -> &LocalGeometry {
        &self.geo
    }

    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    pub fn potential(&self) -> f64 {
        self.f
    }

    /// Covector `∂_i f`.
    pub fn df(&self) -> Vec<f64> {
        self.df.data().iter().map(Jet::value).collect()
    }

    /// Vector `∇^i f`.
    pub fn grad(&self) -> Vec<f64> {
        self.grad.data().iter().map(Jet::value).collect()
    }

    pub fn grad_norm(&self) -> f64 {
        self.df()
            .iter()
            .zip(self.grad())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// `∇²f` in coordinates.
    pub fn hessian(&self) -> Tensor<f64> {
        values(&self.hess)
    }

    fn metric_values(&self) -> Tensor<f64> {
        let n = self.dim();
        Tensor::from_fn(n, 2, |ij| self.geo.metric()[ij[0] * n + ij[1]])
    }

    /// `‖Ric + ∇²f − ρ g‖_g`.
    pub fn soliton_residual(&self) -> f64 {
        let t = self
            .geo
            .ricci()
            .add(&self.hessian())
            .sub(&self.metric_values().scaled(self.soliton.rho));
        self.geo.norm(&t)
    }

    pub fn check_regular(&self) -> Result<()> {
        let grad_norm = self.grad_norm();
        if grad_norm < CRITICAL_GRADIENT * (1.0 + self.f.abs()) {
            Err(Error::CriticalPoint { grad_norm })
        } else {
            Ok(())
        }
    }

    /// Orthonormal frame with `e₁ = ∇f/|∇f|`.
    pub fn adapted_frame(&self) -> Result<Vec<Vec<f64>>> {
        self.check_regular()?;
        orthonormal_frame(self.geo.metric(), &self.grad())
    }

    /// `(‖∇R + 2 Ric(∇F)‖, R + |∇F|²)` with `F = −f`; steady only.
    pub fn hamilton(&self) -> Result<HamiltonReport> {
        if !self.soliton.is_steady() {
            return Err(Error::NonzeroRho(self.soliton.rho));
        }
        let n = self.dim();
        let dr = self.geo.scalar_gradient()?;
        let ric = self.geo.ricci();
        let grad = self.grad();
        // ∇_i R + 2 R_ij ∇^j F = ∇_i R − 2 R_ij ∇^j f
        let t = Tensor::from_fn(n, 1, |i| {
            dr[i[0]] - 2.0 * (0..n).map(|j| ric.get(&[i[0], j]) * grad[j]).sum::<f64>()
        });
        let grad_norm = self.grad_norm();
        Ok(HamiltonReport {
            grad_residual: self.geo.norm(&t),
            energy: self.geo.scalar() + grad_norm * grad_norm,
        })
    }

    /// D-tensor from Schouten and Einstein tensors, as jets of order `K − 2`.
    fn d_direct_jets(&self) -> Result<Tensor<Jet>> {
        self.geo.require_dim(3)?;
        let n = self.dim();
        let nf = n as f64;
        let conf = self.geo.conformal().expect("n ≥ 3");
        let (a, e) = (&conf.schouten, &conf.einstein);
        let g = self.geo.metric_jets();
        let zero = a.get(&[0, 0]).lift(0.0);
        // E_il ∇^l f
        let e_grad = Tensor::from_fn(n, 1, |i| {
            let mut acc = zero.clone();
            for l in 0..n {
                acc.add_product(e.get(&[i[0], l]), self.grad.get(&[l]));
            }
            acc
        });
        let c1 = 1.0 / (nf - 2.0);
        let c2 = 1.0 / ((nf - 1.0) * (nf - 2.0));
        Ok(Tensor::from_fn(n, 3, |ijk| {
            let (i, j, k) = (ijk[0], ijk[1], ijk[2]);
            let mut acc = zero.clone();
            acc.add_scaled_product(a.get(&[j, k]), self.df.get(&[i]), c1);
            acc.add_scaled_product(a.get(&[i, k]), self.df.get(&[j]), -c1);
            acc.add_scaled_product(g.get(&[j, k]), e_grad.get(&[i]), c2);
            acc.add_scaled_product(g.get(&[i, k]), e_grad.get(&[j]), -c2);
            acc
        }))
    }

    pub fn d_direct(&self) -> Result<Tensor<f64>> {
        Ok(values(&self.d_direct_jets()?))
    }

    /// `C_ijk + W_ijkl ∇^l f`.
    pub fn d_via_weyl(&self) -> Result<Tensor<f64>> {
        let c = self.geo.cotton()?;
        let w = self.geo.weyl()?;
        Ok(c.add(&w.contract_vector(3, &self.grad())))
    }

    pub fn d_tensor(&self, method: DMethod) -> Result<Tensor<f64>> {
        match method {
            DMethod::Direct => self.d_direct(),
            DMethod::ViaWeyl => self.d_via_weyl(),
        }
    }

    /// Residuals of the two Bach routes and of the Bach-from-D formula against
    /// the Cotton route.
    pub fn bach_consistency(&self) -> Result<BachResiduals> {
        self.geo.require_dim(4)?;
        self.geo.require_order(4)?;
        let n = self.dim();
        let nf = n as f64;
        let b = self.geo.bach()?;
        let b_weyl = self.geo.bach_from_weyl()?;
        let d = self.d_direct_jets()?;
        let dd = covariant_derivative(&d, self.geo.christoffel_jets());
        let ginv = self.geo.inverse_metric();
        let c = self.geo.cotton()?;
        let grad = self.grad();
        // −(1/(n−2)) (∇^k D_ikj + ((n−3)/(n−2)) C_jli ∇^l f)
        let b_from_d = Tensor::from_fn(n, 2, |ij| {
            let (i, j) = (ij[0], ij[1]);
            let mut div = 0.0;
            for k in 0..n {
                for a in 0..n {
                    div += ginv[k * n + a] * dd.get(&[a, i, k, j]).value();
                }
            }
            let cf: f64 = (0..n).map(|l| c.get(&[j, l, i]) * grad[l]).sum();
            -(div + (nf - 3.0) / (nf - 2.0) * cf) / (nf - 2.0)
        });
        Ok(BachResiduals {
            routes: self.geo.norm(&b.sub(&b_weyl)),
            from_d: self.geo.norm(&b.sub(&b_from_d)),
            bach_norm: self.geo.norm(&b),
        })
    }

    /// The four equivalent conditions of the D-flatness characterization,
    /// as residual norms in the adapted frame.
    pub fn prop23(&self) -> Result<Prop23Report> {
        self.geo.require_dim(4)?;
        self.geo.require_order(5)?;
        let frame = self.adapted_frame()?;
        let n = self.dim();
        let grad = self.grad();
        let d = self.d_direct()?;
        let c = self.geo.cotton()?;
        let w = self.geo.weyl()?.frame_components(&frame);
        let div_b = self.geo.bach_divergence()?;

        let w_normal: f64 = crate::tensor::multi_indices(n, 3)
            .map(|jkl| w.get(&[0, jkl[0], jkl[1], jkl[2]]).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut w1a1b = 0.0;
        for a in 1..n {
            for b in 1..n {
                w1a1b += w.get(&[0, a, 0, b]).powi(2);
            }
        }
        let w1a1b = w1a1b.sqrt();
        let c_grad = c.contract_vector(0, &grad);
        let div_b_grad: f64 = div_b.data().iter().zip(&grad).map(|(a, b)| a * b).sum();
        Ok(Prop23Report {
            a: self.geo.norm(&d),
            b: self.geo.norm(&c) + w_normal,
            c: self.geo.norm(&c_grad) + w1a1b,
            d: div_b_grad.abs() + w1a1b,
        })
    }

    /// Algebraic structure of D: skew in its first pair, trace-free, and
    /// `D(·,·,∇f) = C(·,·,∇f)` because `W(·,·,∇f,∇f) = 0`.
    pub fn d_structure(&self) -> Result<DStructure> {
        let n = self.dim();
        let d = self.d_direct()?;
        let via_weyl = self.d_via_weyl()?;
        let c = self.geo.cotton()?;
        let ginv = self.geo.inverse_metric();
        let grad = self.grad();
        let skew = Tensor::from_fn(n, 3, |ijk| d.get(ijk) + d.get(&[ijk[1], ijk[0], ijk[2]]));
        let trace = Tensor::from_fn(n, 1, |j| {
            let mut acc = 0.0;
            for i in 0..n {
                for k in 0..n {
                    acc += ginv[i * n + k] * d.get(&[i, j[0], k]);
                }
            }
            acc
        });
        Ok(DStructure {
            skew: self.geo.norm(&skew),
            trace: self.geo.norm(&trace),
            grad_contraction: self.geo.norm(
                &d.contract_vector(2, &grad)
                    .sub(&c.contract_vector(2, &grad)),
            ),
            routes: self.geo.norm(&d.sub(&via_weyl)),
            d_norm: self.geo.norm(&d),
        })
    }

    /// Both sides of the identity linking `|D|²` to the umbilicity of the
    /// level set and the tangential gradient of `R`.
    pub fn d_norm_identity(&self, soliton_tol: f64) -> Result<NormIdentity> {
        self.geo.require_dim(3)?;
        self.geo.require_order(3)?;
        let residual = self.soliton_residual();
        let threshold = soliton_tol * (1.0 + self.geo.riemann_norm());
        if residual > threshold {
            return Err(Error::NotASoliton {
                residual,
                threshold,
            });
        }
        let frame = self.adapted_frame()?;
        let n = self.dim();
        let nf = n as f64;
        let d = self.d_direct()?;
        let lhs = self.geo.norm(&d).powi(2);
        let grad_norm = self.grad_norm();
        let h = self
            .hessian()
            .frame_components(&frame)
            .scaled(1.0 / grad_norm);
        let mean: f64 = (1..n).map(|a| h.get(&[a, a])).sum();
        let mut deficit = 0.0;
        for a in 1..n {
            for b in 1..n {
                let trace_part = if a == b { mean / (nf - 1.0) } else { 0.0 };
                deficit += (h.get(&[a, b]) - trace_part).powi(2);
            }
        }
        let dr = self.geo.scalar_gradient()?;
        let dr = Tensor::from_fn(n, 1, |i| dr[i[0]]).frame_components(&frame);
        let tangential: f64 = (1..n).map(|a| dr.get(&[a]).powi(2)).sum();
        let rhs = 2.0 * grad_norm.powi(4) / (nf - 2.0).powi(2) * deficit
            + tangential / (2.0 * (nf - 1.0) * (nf - 2.0));
        Ok(NormIdentity {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DMethod {
    /// From the Schouten and Einstein tensors.
    Direct,
    /// Cotton plus Weyl contracted with `∇f`.
    ViaWeyl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonReport {
    pub grad_residual: f64,
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BachResiduals {
    /// Cotton-divergence route against Weyl double-divergence route.
    pub routes: f64,
    /// Cotton-divergence route against the formula through `∇D`.
    pub from_d: f64,
    pub bach_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prop23Report {
    /// `‖D‖`.
    pub a: f64,
    /// `‖C‖ + ‖W(e₁,·,·,·)‖`.
    pub b: f64,
    /// `‖C(∇f,·,·)‖ + ‖W(e₁,e_a,e₁,e_b)‖`.
    pub c: f64,
    /// `|div B · ∇f| + ‖W(e₁,e_a,e₁,e_b)‖`.
    pub d: f64,
}

impl Prop23Report {
    pub fn max(&self) -> f64 {
        self.a.max(self.b).max(self.c).max(self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DStructure {
    /// `‖D_ijk + D_jik‖`.
    pub skew: f64,
    /// `‖g^{ik} D_ijk‖`.
    pub trace: f64,
    /// `‖D(·,·,∇f) − C(·,·,∇f)‖`.
    pub grad_contraction: f64,
    /// Direct formula against Cotton plus Weyl.
    pub routes: f64,
    pub d_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Every soliton diagnostic available at one point.
#[derive(Clone, Debug, Serialize)]
pub struct SolitonPointReport {
    pub point: Vec<f64>,
    pub soliton_residual: f64,
    pub grad_f: Vec<f64>,
    pub riemann_norm: f64,
    pub d_direct: Option<Tensor<f64>>,
    pub d_via_weyl: Option<Tensor<f64>>,
    pub hamilton: Option<HamiltonReport>,
    pub bach: Option<BachResiduals>,
    pub prop23: Option<Prop23Report>,
}

pub fn soliton_residual(s: &SolitonChart, x: &[f64]) -> Result<f64> {
    Ok(s.expand(x, 2)?.soliton_residual())
}

pub fn hamilton_identities(s: &SolitonChart, x: &[f64]) -> Result<HamiltonReport> {
    if !s.is_steady() {
        return Err(Error::NonzeroRho(s.rho()));
    }
    s.expand(x, 3)?.hamilton()
}

pub fn d_tensor(s: &SolitonChart, x: &[f64], method: DMethod) -> Result<Tensor<f64>> {
    let order = match method {
        DMethod::Direct => 2,
        DMethod::ViaWeyl => 3,
    };
    if s.dim() < 3 {
        return Err(Error::DimensionTooSmall {
            required: 3,
            actual: s.dim(),
        });
    }
    s.expand(x, order)?.d_tensor(method)
}

pub fn bach_consistency(s: &SolitonChart, x: &[f64]) -> Result<BachResiduals> {
    if s.dim() < 4 {
        return Err(Error::DimensionTooSmall {
            required: 4,
            actual: s.dim(),
        });
    }
    s.expand(x, 4)?.bach_consistency()
}

pub fn prop23_report(s: &SolitonChart, x: &[f64]) -> Result<Prop23Report> {
    if s.dim() < 4 {
        return Err(Error::DimensionTooSmall {
            required: 4,
            actual: s.dim(),
        });
    }
    s.expand(x, 5)?.prop23()
}

/// Default soliton gate used to decide whether the identity is asserted.
pub const DEFAULT_SOLITON_TOL: f64 = 1e-4;

pub fn d_structure(s: &SolitonChart, x: &[f64]) -> Result<DStructure> {
    if s.dim() < 3 {
        return Err(Error::DimensionTooSmall {
            required: 3,
            actual: s.dim(),
        });
    }
    s.expand(x, 3)?.d_structure()
}

pub fn d_norm_identity(s: &SolitonChart, x: &[f64]) -> Result<NormIdentity> {
    if s.dim() < 3 {
        return Err(Error::DimensionTooSmall {
            required: 3,
            actual: s.dim(),
        });
    }
    s.expand(x, 3)?.d_norm_identity(DEFAULT_SOLITON_TOL)
}

/// All diagnostics at `x`, each computed when the dimension and the
/// available derivative order allow it.
pub fn point_report(s: &SolitonChart, x: &[f64]) -> Result<SolitonPointReport> {
    let n = s.dim();
    let order = s.max_order().min(if n >= 4 { 5 } else { 3 }).max(2);
    let p = s.expand(x, order)?;
    let prop23 = if p.check_regular().is_ok() {
        p.prop23().ok()
    } else {
        None
    };
    Ok(SolitonPointReport {
        point: x.to_vec(),
        soliton_residual: p.soliton_residual(),
        grad_f: p.grad(),
        riemann_norm: p.geometry().riemann_norm(),
        d_direct: p.d_direct().ok(),
        d_via_weyl: p.d_via_weyl().ok(),
        hamilton: p.hamilton().ok(),
        bach: p.bach_consistency().ok(),
        prop23,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Domain;

    /// Cigar × ℝ^k with `F = log(1 + x² + y²)`.
    fn cigar_cross_flat(k: usize) -> SolitonChart {
        let n = 2 + k;
        let chart = CoordinateChart::diagonal(
            "cigar x flat",
            n,
            Domain::new(vec![(-3.0, 3.0); n]),
            DerivativeMode::analytic(8),
            move |x| {
                let c = (1.0 + &x[0] * &x[0] + &x[1] * &x[1]).recip();
                let mut d = vec![c.clone(), c];
                d.extend((0..k).map(|_| x[0].lift(1.0)));
                d
            },
        );
        SolitonChart::steady(chart, |x| (1.0 + &x[0] * &x[0] + &x[1] * &x[1]).ln())
    }

    fn flat(n: usize, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static, rho: f64) -> SolitonChart {
        let chart = CoordinateChart::diagonal(
            "flat",
            n,
            Domain::new(vec![(-5.0, 5.0); n]),
            DerivativeMode::analytic(8),
            move |x| vec![x[0].lift(1.0); n],
        );
        SolitonChart::new(chart, f, rho)
    }

    #[test]
    fn flat_examples() {
        let shrinker = flat(
            3,
            |x| (&x[0] * &x[0] + &x[1] * &x[1] + &x[2] * &x[2]) * 0.25,
            0.5,
        );
        assert!(soliton_residual(&shrinker, &[0.3, -1.0, 2.0]).unwrap() < 1e-14);
        let quad = flat(3, |x| &x[0] * &x[0] * 0.5, 0.0);
        assert!((soliton_residual(&quad, &[0.3, -1.0, 2.0]).unwrap() - 1.0).abs() < 1e-14);
        let cubic = flat(4, |x| &x[0] * &x[0] * &x[0], 0.0);
        let b = bach_consistency(&cubic, &[0.5, 0.1, 0.2, 0.3]).unwrap();
        assert!(b.routes < 1e-12);
    }

    #[test]
    fn d_tensor_routes_agree_on_nontrivial_soliton() {
        for k in [1, 2, 3] {
            let s = cigar_cross_flat(k);
            let x: Vec<f64> = (0..2 + k).map(|i| 0.4 - 0.3 * i as f64).collect();
            let p = s.expand(&x, 4).unwrap();
            assert!(p.soliton_residual() < 1e-12);
            let d1 = p.d_direct().unwrap();
            let d2 = p.d_via_weyl().unwrap();
            let norm = p.geometry().norm(&d1);
            assert!(norm > 1e-2, "k={k}: |D| = {norm}");
            assert!(p.geometry().norm(&d1.sub(&d2)) < 1e-10 * norm, "k={k}");
        }
    }

    #[test]
    fn d_structure_on_nontrivial_soliton() {
        let s = cigar_cross_flat(2);
        let d = d_structure(&s, &[0.4, 0.1, -0.2, 0.3]).unwrap();
        assert!(d.d_norm > 1e-2);
        assert!(d.skew < 1e-14 && d.trace < 1e-12, "{d:?}");
        assert!(d.grad_contraction < 1e-12 && d.routes < 1e-12, "{d:?}");
    }

    #[test]
    fn bach_from_d_matches_on_soliton() {
        for k in [2, 3] {
            let s = cigar_cross_flat(k);
            let x: Vec<f64> = (0..2 + k).map(|i| 0.4 - 0.3 * i as f64).collect();
            let b = bach_consistency(&s, &x).unwrap();
            assert!(b.bach_norm > 1e-3, "k={k}: |B| = {}", b.bach_norm);
            assert!(b.routes < 1e-10 * b.bach_norm, "k={k}: {b:?}");
            assert!(b.from_d < 1e-10 * b.bach_norm, "k={k}: {b:?}");
        }
    }

    #[test]
    fn norm_identity_on_nontrivial_soliton() {
        for k in [1, 2, 3] {
            let s = cigar_cross_flat(k);
            let x: Vec<f64> = (0..2 + k).map(|i| 0.4 - 0.3 * i as f64).collect();
            let id = d_norm_identity(&s, &x).unwrap();
            assert!(id.lhs > 1e-4);
            assert!(id.residual < 1e-10 * id.lhs, "k={k}: {id:?}");
        }
    }

    #[test]
    fn cigar_energy_is_four() {
        let chart = CoordinateChart::diagonal(
            "cigar",
            2,
            Domain::new(vec![(-5.0, 5.0); 2]),
            DerivativeMode::analytic(8),
            |x| {
                let c = (1.0 + &x[0] * &x[0] + &x[1] * &x[1]).recip();
                vec![c.clone(), c]
            },
        );
        let s = SolitonChart::steady(chart, |x| (1.0 + &x[0] * &x[0] + &x[1] * &x[1]).ln());
        for x in [[0.0, 0.0], [1.0, 0.0], [2.0, 3.0]] {
            let h = hamilton_identities(&s, &x).unwrap();
            assert!((h.energy - 4.0).abs() < 1e-12);
            assert!(h.grad_residual < 1e-12);
            assert!(soliton_residual(&s, &x).unwrap() < 1e-12);
        }
        assert!(matches!(
            d_norm_identity(&s, &[1.0, 1.0]),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn critical_points_are_rejected() {
        let s = cigar_cross_flat(2);
        assert!(matches!(
            d_norm_identity(&s, &[0.0, 0.0, 0.1, 0.2]),
            Err(Error::CriticalPoint { .. })
        ));
    }

    #[test]
    fn prop23_on_flat_linear_potential() {
        let s = flat(5, |x| x[0].clone(), 0.0);
        let r = prop23_report(&s, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert!(r.max() < 1e-14);
    }
}
