//! Pointwise curvature and conformal tensors of a coordinate chart.
//!
//! Everything is computed in jet arithmetic: the metric is expanded to order
//! `K` about the point, and each derived tensor is carried as a jet whose
//! order drops by one per differentiation (`Γ` at `K−1`, curvature at `K−2`,
//! Cotton at `K−3`, Bach at `K−4`, div Bach at `K−5`). Covariant derivatives
//! use Christoffel symbols explicitly.
//!
//! Sign conventions: `R^m_{ijl}` is the component of `R(∂_i, ∂_j)∂_l` with
//! `R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_{[X,Y]}`, and the lowered tensor is
//! `R_ijkl = g_km R^m_{ijl}`. The unit sphere then has
//! `R_ijkl = g_ik g_jl − g_il g_jk`, Ricci is `R_jl = g^{ik} R_ijkl`, and
//! `R = n(n−1)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chart::CoordinateChart;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor::{multi_indices, Tensor};

/// Γ, Riemann, Ricci and scalar curvature at a point.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureBundle {
    pub point: Vec<f64>,
    /// `gamma[[k, i, j]] = Γ^k_ij`.
    pub gamma: Tensor<f64>,
    pub riemann: Tensor<f64>,
    pub ricci: Tensor<f64>,
    pub scalar: f64,
}

/// Schouten, Einstein, Weyl, Cotton and (when available) Bach tensors.
#[derive(Clone, Debug, Serialize)]
pub struct ConformalBundle {
    pub schouten: Tensor<f64>,
    pub einstein: Tensor<f64>,
    pub weyl: Tensor<f64>,
    pub cotton: Tensor<f64>,
    pub bach: Option<Tensor<f64>>,
}

pub(crate) struct ConformalJets {
    pub schouten: Tensor<Jet>,
    pub einstein: Tensor<Jet>,
    pub weyl: Tensor<Jet>,
    pub cotton: Option<Tensor<Jet>>,
    /// `∇^l W_ijkl`.
    pub weyl_divergence: Option<Tensor<Jet>>,
    /// Bach from the divergence of Cotton.
    pub bach: Option<Tensor<Jet>>,
    /// Bach from the double divergence of Weyl.
    pub bach_from_weyl: Option<Tensor<Jet>>,
    /// `∇^i B_ij`.
    pub bach_divergence: Option<Tensor<Jet>>,
}

/// Jet expansions of the metric and its curvature about one point.
pub struct LocalGeometry {
    n: usize,
    order: usize,
    point: Vec<f64>,
    g: Tensor<Jet>,
    ginv: Tensor<Jet>,
    gamma: Tensor<Jet>,
    riemann: Tensor<Jet>,
    ricci: Tensor<Jet>,
    scalar: Jet,
    conformal: Option<ConformalJets>,
    g_values: Vec<f64>,
    ginv_values: Vec<f64>,
}

pub(crate) fn values(t: &Tensor<Jet>) -> Tensor<f64> {
    t.map(Jet::value)
}

/// Covariant derivative of a fully covariant tensor; the new index comes first.
pub(crate) fn covariant_derivative(t: &Tensor<Jet>, gamma: &Tensor<Jet>) -> Tensor<Jet> {
    let n = t.dim();
    let rank = t.rank();
    let mut idx = vec![0; rank];
    Tensor::from_fn(n, rank + 1, |full| {
        let m = full[0];
        let inner = &full[1..];
        let mut acc = t.get(inner).derivative(m);
        for s in 0..rank {
            idx.copy_from_slice(inner);
            for q in 0..n {
                idx[s] = q;
                acc.add_scaled_product(gamma.get(&[q, m, inner[s]]), t.get(&idx), -1.0);
            }
        }
        acc
    })
}

fn jet_sum(terms: impl Iterator<Item = (Jet, Jet)>, seed: Jet) -> Jet {
    terms.fold(seed, |mut acc, (a, b)| {
        acc.add_product(&a, &b);
        acc
    })
}

fn inverse_series(g: &Tensor<Jet>, g0inv: &[f64]) -> Tensor<Jet> {
    let n = g.dim();
    let order = g.get(&[0, 0]).order();
    let zero = g.get(&[0, 0]).lift(0.0);
    // M = −g0⁻¹ N with N = g − g0; g⁻¹ = Σ_k M^k g0⁻¹.
    let m = Tensor::from_fn(n, 2, |ij| {
        let mut acc = zero.clone();
        for k in 0..n {
            let mut nk = g.get(&[k, ij[1]]).clone();
            let c = nk.value();
            nk = nk - c;
            acc.add_scaled(&nk, -g0inv[ij[0] * n + k]);
        }
        acc
    });
    let apply_g0inv = |p: &Tensor<Jet>| {
        Tensor::from_fn(n, 2, |ij| {
            let mut acc = zero.clone();
            for k in 0..n {
                acc.add_scaled(p.get(&[ij[0], k]), g0inv[k * n + ij[1]]);
            }
            acc
        })
    };
    let mut power = Tensor::from_fn(n, 2, |ij| zero.lift(if ij[0] == ij[1] { 1.0 } else { 0.0 }));
    let mut sum = apply_g0inv(&power);
    for _ in 0..order {
        power = Tensor::from_fn(n, 2, |ij| {
            let mut acc = zero.clone();
            for k in 0..n {
                acc.add_product(power.get(&[ij[0], k]), m.get(&[k, ij[1]]));
            }
            acc
        });
        let term = apply_g0inv(&power);
        for ij in multi_indices(n, 2) {
            *sum.get_mut(&ij) += term.get(&ij);
        }
    }
    sum
}

impl LocalGeometry {
    /// Expands the chart metric about `x` to derivative order `order ≥ 2`.
    pub fn new(chart: &CoordinateChart, x: &[f64], order: usize) -> Result<Self> {
        chart.check_point(x)?;
        if order < 2 {
            return Err(Error::InsufficientDerivativeOrder {
                required: 2,
                available: order,
            });
        }
        let n = chart.dim();
        let flat = chart.metric_jets(x, order)?;
        let g = Tensor::from_fn(n, 2, |ij| {
            let (i, j) = (ij[0], ij[1]);
            if i == j {
                flat[i * n + i].clone()
            } else {
                (&flat[i * n + j] + &flat[j * n + i]).scale(0.5)
            }
        });
        let g_values: Vec<f64> = g.data().iter().map(Jet::value).collect();
        let chol = DMatrix::from_row_slice(n, n, &g_values).cholesky();
        let ginv0 = match chol {
            Some(c) => c.inverse(),
            None => return Err(Error::MetricNotPositiveDefinite(x.to_vec())),
        };
        let ginv0: Vec<f64> = (0..n * n).map(|k| ginv0[(k / n, k % n)]).collect();
        let ginv = inverse_series(&g, &ginv0);
        let ginv_values: Vec<f64> = ginv.data().iter().map(Jet::value).collect();

        // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let dg = Tensor::from_fn(n, 3, |kij| g.get(&kij[1..]).derivative(kij[0]));
        let first_kind = Tensor::from_fn(n, 3, |lij| {
            let (l, i, j) = (lij[0], lij[1], lij[2]);
            (dg.get(&[i, j, l]) + dg.get(&[j, i, l]) - dg.get(&[l, i, j])).scale(0.5)
        });
        let gamma = Tensor::from_fn(n, 3, |kij| {
            let seed = first_kind.get(&[0, 0, 0]).lift(0.0);
            jet_sum(
                (0..n).map(|l| {
                    (
                        ginv.get(&[kij[0], l]).clone(),
                        first_kind.get(&[l, kij[1], kij[2]]).clone(),
                    )
                }),
                seed,
            )
        });

        // R^m_{ijl} for i < j, then lower into R_ijkl = g_km R^m_{ijl}.
        let dgamma = Tensor::from_fn(n, 4, |imjl| gamma.get(&imjl[1..]).derivative(imjl[0]));
        let curv_order = order - 2;
        let zero2 = dgamma.get(&[0, 0, 0, 0]).lift(0.0);
        let mut upper = Tensor::filled(n, 4, zero2.clone());
        for i in 0..n {
            for j in (i + 1)..n {
                for m in 0..n {
                    for l in 0..n {
                        let mut acc = dgamma.get(&[i, m, j, l]) - dgamma.get(&[j, m, i, l]);
                        for q in 0..n {
                            acc.add_product(gamma.get(&[m, i, q]), gamma.get(&[q, j, l]));
                            acc.add_scaled_product(
                                gamma.get(&[m, j, q]),
                                gamma.get(&[q, i, l]),
                                -1.0,
                            );
                        }
                        *upper.get_mut(&[m, j, i, l]) = -&acc;
                        *upper.get_mut(&[m, i, j, l]) = acc;
                    }
                }
            }
        }
        let riemann = Tensor::from_fn(n, 4, |ijkl| {
            let (i, j, k, l) = (ijkl[0], ijkl[1], ijkl[2], ijkl[3]);
            if i == j {
                return zero2.clone();
            }
            jet_sum(
                (0..n).map(|m| (g.get(&[k, m]).clone(), upper.get(&[m, i, j, l]).clone())),
                zero2.clone(),
            )
        });
        let ricci = Tensor::from_fn(n, 2, |jl| {
            let mut acc = zero2.clone();
            for i in 0..n {
                for k in 0..n {
                    acc.add_product(ginv.get(&[i, k]), riemann.get(&[i, jl[0], k, jl[1]]));
                }
            }
            acc
        });
        let mut scalar = zero2.clone();
        for j in 0..n {
            for l in 0..n {
                scalar.add_product(ginv.get(&[j, l]), ricci.get(&[j, l]));
            }
        }
        debug_assert_eq!(scalar.order(), curv_order);

        let mut geometry = LocalGeometry {
            n,
            order,
            point: x.to_vec(),
            g,
            ginv,
            gamma,
            riemann,
            ricci,
            scalar,
            conformal: None,
            g_values,
            ginv_values,
        };
        if n >= 3 {
            geometry.conformal = Some(geometry.conformal_jets());
        }
        Ok(geometry)
    }

    fn conformal_jets(&self) -> ConformalJets {
        let n = self.n;
        let nf = n as f64;
        let (g, ric, r) = (&self.g, &self.ricci, &self.scalar);
        let schouten = Tensor::from_fn(n, 2, |ij| {
            let mut acc = ric.get(ij).clone();
            acc.add_scaled_product(r, g.get(ij), -1.0 / (2.0 * (nf - 1.0)));
            acc
        });
        let einstein = Tensor::from_fn(n, 2, |ij| {
            let mut acc = ric.get(ij).clone();
            acc.add_scaled_product(r, g.get(ij), -0.5);
            acc
        });
        let a = &schouten;
        let weyl = Tensor::from_fn(n, 4, |ijkl| {
            let (i, j, k, l) = (ijkl[0], ijkl[1], ijkl[2], ijkl[3]);
            let mut acc = self.riemann.get(ijkl).clone();
            let c = -1.0 / (nf - 2.0);
            acc.add_scaled_product(g.get(&[i, k]), a.get(&[j, l]), c);
            acc.add_scaled_product(g.get(&[i, l]), a.get(&[j, k]), -c);
            acc.add_scaled_product(g.get(&[j, k]), a.get(&[i, l]), -c);
            acc.add_scaled_product(g.get(&[j, l]), a.get(&[i, k]), c);
            acc
        });

        let mut out = ConformalJets {
            schouten,
            einstein,
            weyl,
            cotton: None,
            weyl_divergence: None,
            bach: None,
            bach_from_weyl: None,
            bach_divergence: None,
        };
        if self.order < 3 {
            return out;
        }
        let da = covariant_derivative(&out.schouten, &self.gamma);
        let cotton = Tensor::from_fn(n, 3, |ijk| {
            da.get(&[ijk[0], ijk[1], ijk[2]]) - da.get(&[ijk[1], ijk[0], ijk[2]])
        });
        if n >= 4 {
            let dw = covariant_derivative(&out.weyl, &self.gamma);
            let ginv = &self.ginv;
            out.weyl_divergence = Some(Tensor::from_fn(n, 3, |ijk| {
                let mut acc = dw.get(&[0, 0, 0, 0, 0]).lift(0.0);
                for b in 0..n {
                    for l in 0..n {
                        acc.add_product(ginv.get(&[l, b]), dw.get(&[b, ijk[0], ijk[1], ijk[2], l]));
                    }
                }
                acc
            }));
        }
        if self.order >= 4 && n >= 4 {
            let ginv = &self.ginv;
            // R^{kl} = g^{ka} g^{lb} R_ab
            let ric_up = Tensor::from_fn(n, 2, |kl| {
                let mut acc = ric.get(&[0, 0]).lift(0.0);
                for a in 0..n {
                    let mut row = ric.get(&[0, 0]).lift(0.0);
                    for b in 0..n {
                        row.add_product(ginv.get(&[kl[1], b]), ric.get(&[a, b]));
                    }
                    acc.add_product(ginv.get(&[kl[0], a]), &row);
                }
                acc
            });
            let weyl = &out.weyl;
            let ricci_weyl = Tensor::from_fn(n, 2, |ij| {
                let mut acc = weyl.get(&[0, 0, 0, 0]).lift(0.0);
                for k in 0..n {
                    for l in 0..n {
                        acc.add_product(ric_up.get(&[k, l]), weyl.get(&[ij[0], k, ij[1], l]));
                    }
                }
                acc
            });
            let dc = covariant_derivative(&cotton, &self.gamma);
            let div_c = Tensor::from_fn(n, 2, |ij| {
                let mut acc = dc.get(&[0, 0, 0, 0]).lift(0.0);
                for k in 0..n {
                    for a in 0..n {
                        acc.add_product(ginv.get(&[k, a]), dc.get(&[a, k, ij[0], ij[1]]));
                    }
                }
                acc
            });
            let bach = Tensor::from_fn(n, 2, |ij| {
                (div_c.get(ij) + ricci_weyl.get(ij)).scale(1.0 / (nf - 2.0))
            });
            let u = out.weyl_divergence.as_ref().expect("n ≥ 4");
            let du = covariant_derivative(u, &self.gamma);
            out.bach_from_weyl = Some(Tensor::from_fn(n, 2, |ij| {
                let mut acc = du.get(&[0, 0, 0, 0]).lift(0.0);
                for k in 0..n {
                    for a in 0..n {
                        acc.add_product(ginv.get(&[k, a]), du.get(&[a, ij[0], k, ij[1]]));
                    }
                }
                let mut b = acc.scale(1.0 / (nf - 3.0));
                b.add_scaled(ricci_weyl.get(ij), 1.0 / (nf - 2.0));
                b
            }));
            if self.order >= 5 {
                let db = covariant_derivative(&bach, &self.gamma);
                out.bach_divergence = Some(Tensor::from_fn(n, 1, |j| {
                    let mut acc = db.get(&[0, 0, 0]).lift(0.0);
                    for i in 0..n {
                        for a in 0..n {
                            acc.add_product(ginv.get(&[i, a]), db.get(&[a, i, j[0]]));
                        }
                    }
                    acc
                }));
            }
            out.bach = Some(bach);
        }
        out.cotton = Some(cotton);
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    /// Metric components (row-major).
    pub fn metric(&self) -> &[f64] {
        &self.g_values
    }

    pub fn inverse_metric(&self) -> &[f64] {
        &self.ginv_values
    }

    pub(crate) fn metric_jets(&self) -> &Tensor<Jet> {
        &self.g
    }

    pub(crate) fn inverse_metric_jets(&self) -> &Tensor<Jet> {
        &self.ginv
    }

    pub(crate) fn christoffel_jets(&self) -> &Tensor<Jet> {
        &self.gamma
    }

    pub(crate) fn conformal(&self) -> Option<&ConformalJets> {
        self.conformal.as_ref()
    }

    pub fn curvature(&self) -> CurvatureBundle {
        CurvatureBundle {
            point: self.point.clone(),
            gamma: values(&self.gamma),
            riemann: values(&self.riemann),
            ricci: values(&self.ricci),
            scalar: self.scalar.value(),
        }
    }

    pub fn riemann(&self) -> Tensor<f64> {
        values(&self.riemann)
    }

    pub fn ricci(&self) -> Tensor<f64> {
        values(&self.ricci)
    }

    pub fn scalar(&self) -> f64 {
        self.scalar.value()
    }

    /// `‖Rm‖_g`, the scale used by relative vanishing thresholds.
    pub fn riemann_norm(&self) -> f64 {
        self.riemann().metric_norm(&self.ginv_values)
    }

    /// Covector `∂_i R`; needs order ≥ 3.
    pub fn scalar_gradient(&self) -> Result<Vec<f64>> {
        self.require_order(3)?;
        Ok((0..self.n)
            .map(|i| self.scalar.derivative(i).value())
            .collect())
    }

    pub fn norm(&self, t: &Tensor<f64>) -> f64 {
        t.metric_norm(&self.ginv_values)
    }

    pub(crate) fn require_order(&self, required: usize) -> Result<()> {
        if self.order < required {
            Err(Error::InsufficientDerivativeOrder {
                required,
                available: self.order,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn require_dim(&self, required: usize) -> Result<()> {
        if self.n < required {
            Err(Error::DimensionTooSmall {
                required,
                actual: self.n,
            })
        } else {
            Ok(())
        }
    }

    pub fn conformal_bundle(&self) -> Result<ConformalBundle> {
        self.require_dim(3)?;
        self.require_order(3)?;
        let c = self.conformal.as_ref().expect("n ≥ 3");
        Ok(ConformalBundle {
            schouten: values(&c.schouten),
            einstein: values(&c.einstein),
            weyl: values(&c.weyl),
            cotton: values(c.cotton.as_ref().expect("order ≥ 3")),
            bach: c.bach.as_ref().map(values),
        })
    }

    pub fn weyl(&self) -> Result<Tensor<f64>> {
        self.require_dim(3)?;
        Ok(values(&self.conformal.as_ref().expect("n ≥ 3").weyl))
    }

    pub fn cotton(&self) -> Result<Tensor<f64>> {
        self.require_dim(3)?;
        self.require_order(3)?;
        Ok(values(
            self.conformal
                .as_ref()
                .expect("n ≥ 3")
                .cotton
                .as_ref()
                .expect("order ≥ 3"),
        ))
    }

    /// `∇^l W_ijkl`.
    pub fn weyl_divergence(&self) -> Result<Tensor<f64>> {
        self.require_dim(4)?;
        self.require_order(3)?;
        Ok(values(
            self.conformal
                .as_ref()
                .and_then(|c| c.weyl_divergence.as_ref())
                .expect("n ≥ 4 and order ≥ 3"),
        ))
    }

    /// Bach tensor from `∇^k C_kij` plus the Ricci–Weyl term.
    pub fn bach(&self) -> Result<Tensor<f64>> {
        self.require_dim(4)?;
        self.require_order(4)?;
        Ok(values(
            self.conformal
                .as_ref()
                .and_then(|c| c.bach.as_ref())
                .expect("bach"),
        ))
    }

    /// Bach tensor from `∇^k∇^l W_ikjl` plus the Ricci–Weyl term.
    pub fn bach_from_weyl(&self) -> Result<Tensor<f64>> {
        self.require_dim(4)?;
        self.require_order(4)?;
        Ok(values(
            self.conformal
                .as_ref()
                .and_then(|c| c.bach_from_weyl.as_ref())
                .expect("bach"),
        ))
    }

    /// Covector `∇^i B_ij`.
    pub fn bach_divergence(&self) -> Result<Tensor<f64>> {
        self.require_dim(4)?;
        self.require_order(5)?;
        Ok(values(
            self.conformal
                .as_ref()
                .and_then(|c| c.bach_divergence.as_ref())
                .expect("div bach"),
        ))
    }
}

/// Γ, Rm, Ric and R at `point`.
pub fn curvature_bundle(chart: &CoordinateChart, point: &[f64]) -> Result<CurvatureBundle> {
    Ok(LocalGeometry::new(chart, point, 2)?.curvature())
}

/// Conformal tensors at `point`; Bach is included when `n ≥ 4` and the chart
/// can supply fourth derivatives.
pub fn conformal_bundle(chart: &CoordinateChart, point: &[f64]) -> Result<ConformalBundle> {
    let n = chart.dim();
    if n < 3 {
        return Err(Error::DimensionTooSmall {
            required: 3,
            actual: n,
        });
    }
    let order = if n >= 4 && chart.mode().max_order() >= 4 {
        4
    } else {
        3
    };
    LocalGeometry::new(chart, point, order)?.conformal_bundle()
}

/// `‖C_ijk + ((n−2)/(n−3)) ∇^l W_ijkl‖_g`, an identity for every metric with `n ≥ 4`.
pub fn weyl_divergence_check(chart: &CoordinateChart, point: &[f64]) -> Result<f64> {
    let n = chart.dim();
    if n < 4 {
        return Err(Error::DimensionTooSmall {
            required: 4,
            actual: n,
        });
    }
    let geo = LocalGeometry::new(chart, point, 3)?;
    weyl_divergence_residual(&geo)
}

pub(crate) fn weyl_divergence_residual(geo: &LocalGeometry) -> Result<f64> {
    let nf = geo.dim() as f64;
    let c = geo.cotton()?;
    let u = geo.weyl_divergence()?;
    Ok(geo.norm(&c.add(&u.scaled((nf - 2.0) / (nf - 3.0)))))
}

fn inner(g: &[f64], n: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * u[i] * v[j];
        }
    }
    s
}

/// g-orthonormal frame with `e₁ = v/|v|`, completed by Gram–Schmidt over the
/// coordinate axes in index order; `g` is row-major.
pub fn orthonormal_frame(g: &[f64], v: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = v.len();
    let norm = inner(g, n, v, v).max(0.0).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let mut frame = vec![v.iter().map(|x| x / norm).collect::<Vec<f64>>()];
    for axis in 0..n {
        if frame.len() == n {
            break;
        }
        let mut w = vec![0.0; n];
        w[axis] = 1.0;
        let axis_norm = inner(g, n, &w, &w).sqrt();
        // Two passes of classical Gram–Schmidt.
        for _ in 0..2 {
            for e in &frame {
                let p = inner(g, n, &w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= p * ei;
                }
            }
        }
        let wn = inner(g, n, &w, &w).max(0.0).sqrt();
        if wn < 1e-6 * axis_norm {
            continue;
        }
        frame.push(w.iter().map(|x| x / wn).collect());
    }
    Ok(frame)
}

/// Orthonormal frame at `point` whose first vector is `v/|v|`.
pub fn adapted_frame(chart: &CoordinateChart, point: &[f64], v: &[f64]) -> Result<Vec<Vec<f64>>> {
    chart.check_point(point)?;
    orthonormal_frame(&chart.metric_at(point), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{DerivativeMode, Domain, FdSteps};
    use std::sync::Arc;

    fn sphere(n: usize) -> CoordinateChart {
        let mut bounds = vec![(0.05, std::f64::consts::PI - 0.05); n];
        bounds[n - 1] = (-10.0, 10.0);
        CoordinateChart::diagonal(
            "sphere",
            n,
            Domain::new(bounds),
            DerivativeMode::analytic(8),
            move |x| {
                let mut out = Vec::with_capacity(n);
                let mut w = x[0].lift(1.0);
                for i in 0..n {
                    out.push(w.clone());
                    if i + 1 < n {
                        let s = x[i].sin();
                        w = &w * &(&s * &s);
                    }
                }
                out
            },
        )
    }

    fn cigar() -> CoordinateChart {
        CoordinateChart::diagonal(
            "cigar",
            2,
            Domain::new(vec![(-5.0, 5.0); 2]),
            DerivativeMode::analytic(8),
            |x| {
                let c = (1.0 + &x[0] * &x[0] + &x[1] * &x[1]).recip();
                vec![c.clone(), c]
            },
        )
    }

    fn lumpy(n: usize) -> CoordinateChart {
        let metric: crate::chart::FieldFn = Arc::new(move |x: &[Jet]| {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let phase = 0.3 * (i * j) as f64 + 0.1 * (i + j) as f64;
                    let mut v = (&x[i] + &x[j] * 0.7 + phase).sin() * 0.08;
                    if i == j {
                        v = v + 1.0 + &x[i] * &x[(i + 1) % n] * 0.1;
                    }
                    out.push(v);
                }
            }
            out
        });
        CoordinateChart::new(
            "lumpy",
            n,
            Domain::new(vec![(-1.0, 1.0); n]),
            DerivativeMode::analytic(8),
            metric,
        )
    }

    #[test]
    fn unit_sphere_curvature() {
        let chart = sphere(4);
        let x = [0.7, 1.1, 2.0, 0.3];
        let geo = LocalGeometry::new(&chart, &x, 3).unwrap();
        let g = Tensor::from_fn(4, 2, |ij| geo.metric()[ij[0] * 4 + ij[1]]);
        let expected = Tensor::from_fn(4, 4, |i| {
            g.get(&[i[0], i[2]]) * g.get(&[i[1], i[3]])
                - g.get(&[i[0], i[3]]) * g.get(&[i[1], i[2]])
        });
        assert!(geo.riemann().sub(&expected).max_abs() < 1e-12);
        assert!((geo.scalar() - 12.0).abs() < 1e-12);
        let conf = geo.conformal_bundle().unwrap();
        assert!(conf.schouten.sub(&g).max_abs() < 1e-12);
        assert!(conf.weyl.max_abs() < 1e-12);
        assert!(conf.cotton.max_abs() < 1e-11);
    }

    #[test]
    fn cigar_tip_curvature() {
        let geo = LocalGeometry::new(&cigar(), &[0.0, 0.0], 2).unwrap();
        assert!((geo.scalar() - 4.0).abs() < 1e-12);
        let geo = LocalGeometry::new(&cigar(), &[1.0, 0.5], 2).unwrap();
        assert!((geo.scalar() - 4.0 / 2.25).abs() < 1e-12);
    }

    #[test]
    fn weyl_divergence_identity_holds_generically() {
        for n in [4, 5] {
            let chart = lumpy(n);
            let x: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.15).collect();
            let geo = LocalGeometry::new(&chart, &x, 3).unwrap();
            let c = geo.cotton().unwrap();
            assert!(geo.norm(&c) > 1e-3, "test metric should have Cotton ≠ 0");
            let res = weyl_divergence_residual(&geo).unwrap();
            assert!(res < 1e-10 * geo.norm(&c), "n={n}: residual {res}");
        }
    }

    #[test]
    fn bach_routes_agree_and_divergence_matches() {
        let chart = lumpy(4);
        let x = [0.05, -0.1, 0.2, 0.0];
        let geo = LocalGeometry::new(&chart, &x, 5).unwrap();
        let b1 = geo.bach().unwrap();
        let b2 = geo.bach_from_weyl().unwrap();
        assert!(geo.norm(&b1) > 1e-3);
        assert!(geo.norm(&b1.sub(&b2)) < 1e-10 * geo.norm(&b1));
        // Symmetric and trace-free in dimension four.
        let mut trace = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                assert!((b1.get(&[i, j]) - b1.get(&[j, i])).abs() < 1e-10);
                trace += geo.inverse_metric()[i * 4 + j] * b1.get(&[i, j]);
            }
        }
        assert!(trace.abs() < 1e-10);
        // In dimension four Bach is divergence free.
        assert!(geo.norm(&geo.bach_divergence().unwrap()) < 1e-9);
    }

    #[test]
    fn riemann_symmetries() {
        let geo = LocalGeometry::new(&lumpy(4), &[0.1, 0.2, -0.3, 0.05], 2).unwrap();
        let r = geo.riemann();
        for idx in multi_indices(4, 4) {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let v = r.get(&idx);
            assert!((v + r.get(&[j, i, k, l])).abs() < 1e-12);
            assert!((v + r.get(&[i, j, l, k])).abs() < 1e-12);
            assert!((v - r.get(&[k, l, i, j])).abs() < 1e-11);
            let bianchi = v + r.get(&[j, k, i, l]) + r.get(&[k, i, j, l]);
            assert!(bianchi.abs() < 1e-11);
        }
    }

    #[test]
    fn finite_difference_mode_matches_analytic() {
        let chart = lumpy(4);
        let x = [0.1, -0.2, 0.15, 0.3];
        let exact = LocalGeometry::new(&chart, &x, 4).unwrap();
        let fd_chart = chart.with_mode(DerivativeMode::FiniteDifference(FdSteps::default()));
        let approx = LocalGeometry::new(&fd_chart, &x, 4).unwrap();
        let rel = |a: &Tensor<f64>, b: &Tensor<f64>| exact.norm(&a.sub(b)) / exact.norm(a);
        assert!(rel(&exact.riemann(), &approx.riemann()) < 1e-5);
        assert!(rel(&exact.cotton().unwrap(), &approx.cotton().unwrap()) < 1e-5);
        let hybrid =
            LocalGeometry::new(&chart.with_mode(DerivativeMode::analytic(2)), &x, 4).unwrap();
        assert!(rel(&exact.bach().unwrap(), &hybrid.bach().unwrap()) < 1e-5);
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = [2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 3.0];
        let frame = orthonormal_frame(&g, &[0.0, 1.0, 0.0]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((inner(&g, 3, &frame[a], &frame[b]) - expect).abs() < 1e-14);
            }
        }
        assert!(orthonormal_frame(&g, &[0.0; 3]).is_err());
    }
}
