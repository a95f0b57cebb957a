//! Extrinsic geometry of the level sets of the potential.
//!
//! With `e₁ = ∇f/|∇f|` the second fundamental form is
//! `h_ab = ∇_a∇_b f / |∇f|` on the tangential frame `e₂ … e_n`. The normal is
//! `e₁`, so for a steady soliton stored as `f = −F` with `F` increasing
//! outward, level spheres have `h = −(φ′/φ) δ`: the outward normal `−e₁`
//! sees `+φ′/φ`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::soliton::SolitonChart;
use crate::tensor::Tensor;

/// Relative gap separating distinct eigenvalues.
pub const EIGEN_GAP: f64 = 1e-4;

/// Seed for fiber samples in constancy scans.
pub const SCAN_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenCluster {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetReport {
    pub point: Vec<f64>,
    /// `e₁` in coordinates.
    pub unit_normal: Vec<f64>,
    pub grad_norm: f64,
    /// `h_ab` for `a, b = 2..n`, stored with indices `0..n−1`.
    pub h: Tensor<f64>,
    pub mean_curvature: f64,
    /// `‖h − (H/(n−1)) δ‖`.
    pub umbilicity_deficit: f64,
    /// `max_a |Ric(e₁, e_a)|`.
    pub normal_ricci_mix: f64,
    /// `Ric(e₁, e₁)`.
    pub normal_eigenvalue: f64,
    /// Clustered eigenvalues of Ric restricted to the level set.
    pub tangential_eigs: Vec<EigenCluster>,
    /// Clustered eigenvalues of the full Ricci tensor.
    pub ricci_eigs: Vec<EigenCluster>,
}

/// Groups sorted eigenvalues whose consecutive gap is below
/// `rel_gap · max(1, max |v|)`.
pub fn cluster_eigenvalues(values: &[f64], rel_gap: f64) -> Vec<EigenCluster> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for x in v {
        match out.last_mut() {
            Some((sum, count)) if x - last <= rel_gap * scale => {
                *sum += x;
                *count += 1;
            }
            _ => out.push((x, 1)),
        }
        last = x;
    }
    out.into_iter()
        .map(|(sum, count)| EigenCluster {
            value: sum / count as f64,
            multiplicity: count,
        })
        .collect()
}

fn symmetric_eigs(t: &Tensor<f64>, skip: usize) -> Vec<f64> {
    let n = t.dim();
    let m = n - skip;
    let mat = DMatrix::from_fn(m, m, |a, b| {
        0.5 * (t.get(&[a + skip, b + skip]) + t.get(&[b + skip, a + skip]))
    });
    SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

pub fn level_diagnostics(s: &SolitonChart, x: &[f64]) -> Result<LevelSetReport> {
    let p = s.expand(x, 2)?;
    let frame = p.adapted_frame()?;
    let n = p.dim();
    let grad_norm = p.grad_norm();
    let hess = p.hessian().frame_components(&frame);
    let h = Tensor::from_fn(n - 1, 2, |ab| hess.get(&[ab[0] + 1, ab[1] + 1]) / grad_norm);
    let mean: f64 = (0..n - 1).map(|a| h.get(&[a, a])).sum();
    let deficit = (0..n - 1)
        .flat_map(|a| (0..n - 1).map(move |b| (a, b)))
        .map(|(a, b)| {
            let trace = if a == b { mean / (n as f64 - 1.0) } else { 0.0 };
            (h.get(&[a, b]) - trace).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    let ric = p.geometry().ricci().frame_components(&frame);
    let mix = (1..n).fold(0.0f64, |m, a| m.max(ric.get(&[0, a]).abs()));
    Ok(LevelSetReport {
        point: x.to_vec(),
        unit_normal: frame[0].clone(),
        grad_norm,
        h,
        mean_curvature: mean,
        umbilicity_deficit: deficit,
        normal_ricci_mix: mix,
        normal_eigenvalue: *ric.get(&[0, 0]),
        tangential_eigs: cluster_eigenvalues(&symmetric_eigs(&ric, 1), EIGEN_GAP),
        ricci_eigs: cluster_eigenvalues(&symmetric_eigs(&ric, 0), EIGEN_GAP),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstancyReport {
    pub level: f64,
    pub samples: usize,
    pub scalar_spread: f64,
    pub grad_norm_sq_spread: f64,
    pub mean_curvature_spread: f64,
}

/// Spreads of `R`, `|∇f|²` and `H` over the slice `r = level` of the
/// declared fibration.
pub fn constancy_scan(s: &SolitonChart, level: f64, samples: usize) -> Result<ConstancyReport> {
    let fibration = s.fibration().ok_or(Error::NoFibration)?;
    if samples < 2 {
        return Err(Error::InvalidParams(format!(
            "constancy scan needs ≥ 2 samples, got {samples}"
        )));
    }
    let (lo, hi) = fibration.radial_range();
    if !(level > lo && level < hi) {
        return Err(Error::LevelNotRegular(level));
    }
    let fiber_points = fibration.fiber_domain().sample(samples, SCAN_SEED);
    if fiber_points.len() < samples {
        return Err(Error::EmptySampleSet);
    }
    let values: Vec<(f64, f64, f64)> = fiber_points
        .par_iter()
        .map(|theta| {
            let mut x = Vec::with_capacity(theta.len() + 1);
            x.push(level);
            x.extend_from_slice(theta);
            let report = match level_diagnostics(s, &x) {
                Err(Error::CriticalPoint { .. }) => return Err(Error::LevelNotRegular(level)),
                other => other?,
            };
            let scalar = s.expand(&x, 2)?.geometry().scalar();
            Ok((
                scalar,
                report.grad_norm * report.grad_norm,
                report.mean_curvature,
            ))
        })
        .collect::<Result<_>>()?;
    let spread = |pick: fn(&(f64, f64, f64)) -> f64| {
        let (mn, mx) = values
            .iter()
            .map(pick)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        mx - mn
    };
    Ok(ConstancyReport {
        level,
        samples,
        scalar_spread: spread(|v| v.0),
        grad_norm_sq_spread: spread(|v| v.1),
        mean_curvature_spread: spread(|v| v.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{CoordinateChart, DerivativeMode, Domain};
    use crate::jet::Jet;

    fn flat(n: usize, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> SolitonChart {
        let chart = CoordinateChart::diagonal(
            "flat",
            n,
            Domain::new(vec![(-5.0, 5.0); n]),
            DerivativeMode::analytic(6),
            move |x| vec![x[0].lift(1.0); n],
        );
        SolitonChart::new(chart, f, 0.0)
    }

    #[test]
    fn hyperplanes_are_totally_geodesic() {
        let s = flat(3, |x| x[0].clone());
        let r = level_diagnostics(&s, &[0.2, 0.3, -1.0]).unwrap();
        assert_eq!(r.mean_curvature, 0.0);
        assert_eq!(r.umbilicity_deficit, 0.0);
        assert_eq!(r.h.max_abs(), 0.0);
    }

    #[test]
    fn euclidean_spheres_have_h_over_r() {
        let s = flat(3, |x| (&x[0] * &x[0] + &x[1] * &x[1] + &x[2] * &x[2]) * 0.5);
        let x = [2.0 / 3.0, 4.0 / 3.0, -4.0 / 3.0];
        let r = level_diagnostics(&s, &x).unwrap();
        assert!((r.mean_curvature - 1.0).abs() < 1e-14);
        assert!(r.umbilicity_deficit < 1e-14);
        for a in 0..2 {
            assert!((r.h.get(&[a, a]) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn clusters_respect_relative_gap() {
        let c = cluster_eigenvalues(&[2.0, 1.0, 1.0 + 1e-6, 1.0 - 1e-6], 1e-4);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].multiplicity, 3);
        assert_eq!(c[1].multiplicity, 1);
        assert_eq!(cluster_eigenvalues(&[0.0; 4], 1e-4).len(), 1);
    }

    #[test]
    fn scan_requires_fibration() {
        let s = flat(3, |x| x[0].clone());
        assert!(matches!(
            constancy_scan(&s, 0.0, 4),
            Err(Error::NoFibration)
        ));
    }
}
