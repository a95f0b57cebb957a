//! The Bryant steady soliton: a rotationally symmetric warped product over
//! the unit round sphere, built from a power series at the tip and adaptive
//! integration of the steady warped-product equations.
//!
//! Normalization fixes the scalar curvature at the tip, `R(0) = c`. Since
//! `∇F(0) = 0`, this is also the Hamilton constant `R + |∇F|²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{dopri5, Tolerances};
use crate::soliton::SolitonChart;
use crate::warped::{profile_to_chart, steady_rhs, FiberSpec, WarpedProfile};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BryantConfig {
    pub n: usize,
    /// Target scalar curvature at the tip.
    pub normalization: f64,
    pub r_max: f64,
    pub r_seed: f64,
    /// Highest power of `r` kept in the tip series.
    pub series_order: usize,
    #[serde(skip)]
    pub tolerances: Tolerances,
}

impl BryantConfig {
    pub fn new(n: usize) -> Self {
        BryantConfig {
            n,
            normalization: 1.0,
            r_max: 1e3,
            r_seed: 1e-3,
            series_order: 7,
            tolerances: Tolerances {
                rtol: 1e-10,
                atol: 1e-14,
                h0: None,
                max_steps: 1_000_000,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::DimensionTooSmall {
                required: 3,
                actual: self.n,
            });
        }
        if !(self.normalization > 0.0) {
            return Err(Error::NormalizationNonpositive(self.normalization));
        }
        if !(self.r_seed > 0.0 && self.r_seed < self.r_max) {
            return Err(Error::InvalidParams(format!(
                "need 0 < r_seed < r_max, got r_seed = {}, r_max = {}",
                self.r_seed, self.r_max
            )));
        }
        if self.series_order < 3 {
            return Err(Error::InvalidParams(
                "series order must be at least 3".into(),
            ));
        }
        Ok(())
    }

    /// Fiber Einstein constant of the unit round `S^{n−1}`.
    pub fn lambda(&self) -> f64 {
        self.n as f64 - 2.0
    }
}

/// Power series at the tip: `φ = Σ phi[j] r^j`, `F = Σ potential[j] r^j`
/// with `F(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OriginSeries {
    pub phi: Vec<f64>,
    pub potential: Vec<f64>,
}

fn poly_mul(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if i + j < len {
                out[i + j] += x * y;
            }
        }
    }
    out
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c)
        .collect()
}

/// Coefficients of `φφ″ + (n−2)φ′² + φφ′F′ − λ` and `φF″ + (n−1)φ″`.
fn series_residuals(
    phi: &[f64],
    dpot: &[f64],
    n: usize,
    lambda: f64,
    len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = n as f64 - 1.0;
    let d1 = poly_deriv(phi);
    let d2 = poly_deriv(&d1);
    let dd = poly_deriv(dpot);
    let mut e1 = poly_mul(phi, &d2, len);
    for (e, v) in e1.iter_mut().zip(poly_mul(&d1, &d1, len)) {
        *e += (m - 1.0) * v;
    }
    let pp = poly_mul(phi, &d1, len);
    for (e, v) in e1.iter_mut().zip(poly_mul(&pp, dpot, len)) {
        *e += v;
    }
    e1[0] -= lambda;
    let mut e2 = poly_mul(phi, &dd, len);
    for (e, v) in e2.iter_mut().zip(d2.iter().chain(std::iter::repeat(&0.0))) {
        *e += m * v;
    }
    (e1, e2)
}

/// Odd series for `φ` and `F′` solved order by order; the order-one system
/// is singular and its free parameter is fixed by `R(0) = n F″(0)`.
pub fn origin_series(cfg: &BryantConfig) -> Result<OriginSeries> {
    cfg.validate()?;
    let n = cfg.n;
    let nf = n as f64;
    let lambda = cfg.lambda();
    let top = cfg.series_order | 1;
    let len = top + 3;
    let mut phi = vec![0.0; len];
    let mut dpot = vec![0.0; len];
    phi[1] = 1.0;
    dpot[1] = cfg.normalization / nf;
    phi[3] = -dpot[1] / (6.0 * (nf - 1.0));
    let mut m = 2;
    while 2 * m < top {
        // unknowns p = φ_{2m+1}, q = (F′)_{2m−1}
        let (e1, e2) = series_residuals(&phi, &dpot, n, lambda, len);
        let (k1, k2) = (e1[2 * m], e2[2 * m - 1]);
        let mf = m as f64;
        let a11 = (2.0 * mf + 1.0) * (2.0 * mf + 2.0 * nf - 4.0);
        let a12 = 1.0;
        let a21 = (nf - 1.0) * (2.0 * mf + 1.0) * (2.0 * mf);
        let a22 = 2.0 * mf - 1.0;
        let det = a11 * a22 - a12 * a21;
        phi[2 * m + 1] = (-k1 * a22 + k2 * a12) / det;
        dpot[2 * m - 1] = (-k2 * a11 + k1 * a21) / det;
        m += 1;
    }
    // Remaining F′ coefficient at the top odd power from the second equation.
    let (_, e2) = series_residuals(&phi, &dpot, n, lambda, len);
    let j = top;
    dpot[j] = -e2[j - 1] / j as f64;
    phi.truncate(top + 1);
    let mut potential = vec![0.0; top + 2];
    for (j, q) in dpot.iter().enumerate().take(top + 1) {
        potential[j + 1] = q / (j as f64 + 1.0);
    }
    Ok(OriginSeries { phi, potential })
}

impl OriginSeries {
    fn eval(c: &[f64], r: f64, k: usize) -> f64 {
        let mut acc = 0.0;
        for (j, cj) in c.iter().enumerate().rev() {
            if j < k {
                break;
            }
            let falling: f64 = (0..k).map(|i| (j - i) as f64).product();
            acc += cj * falling * r.powi((j - k) as i32);
        }
        acc
    }

    /// `k`-th derivative of `φ` at `r`.
    pub fn phi(&self, r: f64, k: usize) -> f64 {
        OriginSeries::eval(&self.phi, r, k)
    }

    /// `k`-th derivative of `F` at `r`.
    pub fn potential(&self, r: f64, k: usize) -> f64 {
        OriginSeries::eval(&self.potential, r, k)
    }

    /// Scale-relative residual of the steady equations at `r`.
    pub fn residual(&self, r: f64, n: usize, lambda: f64) -> f64 {
        let (p, p1, p2) = (self.phi(r, 0), self.phi(r, 1), self.phi(r, 2));
        let (f1, f2) = (self.potential(r, 1), self.potential(r, 2));
        let m = n as f64 - 1.0;
        let terms = [p * p2, (m - 1.0) * p1 * p1, p * p1 * f1, -lambda];
        let e1 = terms.iter().sum::<f64>().abs() / terms.iter().map(|t| t.abs()).sum::<f64>();
        let e2 = (p * f2 + m * p2).abs() / ((p * f2).abs() + (m * p2).abs());
        e1.max(e2)
    }
}

fn phi_third(n: usize, s: [f64; 4], p2: f64, f2: f64) -> f64 {
    let m = n as f64 - 1.0;
    let [p, p1, _, f1] = s;
    -(p1 * p2 + 2.0 * (m - 1.0) * p1 * p2 + p1 * p1 * f1 + p * p2 * f1 + p * p1 * f2) / p
}

/// Integrates from the series handoff to `r_max`; every accepted step
/// becomes a profile node, preceded by the tip node `r = 0`.
pub fn integrate(cfg: &BryantConfig) -> Result<WarpedProfile> {
    let series = origin_series(cfg)?;
    let n = cfg.n;
    let lambda = cfg.lambda();
    let mut cols: [Vec<f64>; 8] = Default::default();
    let mut push = |r: f64, s: [f64; 4], p2: f64, p3: f64, f2: f64| {
        for (c, v) in cols.iter_mut().zip([r, s[0], s[1], p2, p3, s[2], s[3], f2]) {
            c.push(v);
        }
    };
    push(
        0.0,
        [0.0, 1.0, 0.0, 0.0],
        0.0,
        series.phi(0.0, 3),
        series.potential(0.0, 2),
    );
    let r0 = cfg.r_seed;
    let y0 = [
        series.phi(r0, 0),
        series.phi(r0, 1),
        series.potential(r0, 0),
        series.potential(r0, 1),
    ];
    let rhs = |_: f64, y: &[f64; 4]| -> Result<[f64; 4]> {
        let (p2, f2) = steady_rhs(y[0], y[1], y[3], n, lambda)?;
        Ok([y[1], p2, y[3], f2])
    };
    let mut record = |r: f64, y: &[f64; 4]| -> Result<()> {
        if y[0] <= 0.0 || !y[0].is_finite() {
            return Err(Error::PhiNonpositiveEncountered { r, phi: y[0] });
        }
        let (p2, f2) = steady_rhs(y[0], y[1], y[3], n, lambda)?;
        push(r, *y, p2, phi_third(n, *y, p2, f2), f2);
        Ok(())
    };
    record(r0, &y0)?;
    dopri5(rhs, r0, y0, cfg.r_max, &cfg.tolerances, &mut record)?;
    let [r, phi, dphi, d2phi, d3phi, f, df, d2f] = cols;
    WarpedProfile::new(r, phi, dphi, d2phi, d3phi, f, df, d2f, n, lambda)
}

/// Assembled Bryant chart over the unit round sphere.
pub fn bryant_chart(profile: &WarpedProfile) -> Result<SolitonChart> {
    let fiber = FiberSpec::round_sphere(profile.n - 1, 1.0);
    profile_to_chart(profile, &fiber)
}

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residual_std_error: f64,
    pub points: usize,
}

pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let k = pts.len();
    if k < 3 || pts.len() < x.len() {
        return None;
    }
    let kf = k as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Some(LogLogFit {
        exponent: slope,
        intercept,
        residual_std_error: (sse / (kf - 2.0)).sqrt(),
        points: k,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub window: (f64, f64),
    /// `None` when `R` is not positive on the whole window.
    pub curvature_decay: Option<LogLogFit>,
    pub volume_growth: Option<LogLogFit>,
    pub phi_growth: Option<LogLogFit>,
    pub energy_constant: f64,
    pub energy_spread: f64,
}

/// Number of log-spaced samples in the tail window.
pub const TAIL_SAMPLES: usize = 64;

/// Area of the unit sphere `S^{d}`.
pub fn unit_sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    // ω_0 = 2, ω_1 = 2π, ω_d = 2π ω_{d−2} / (d − 1)
    let mut w = [2.0, 2.0 * PI];
    if d < 2 {
        return w[d];
    }
    for k in 2..=d {
        let next = 2.0 * PI * w[k % 2] / (k as f64 - 1.0);
        w[k % 2] = next;
    }
    w[d % 2]
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Log-log fits over the last decade `[r_max/10, r_max]` of the profile.
pub fn asymptotics(p: &WarpedProfile) -> Result<AsymptoticsReport> {
    let (r_lo, r_hi) = p.range();
    let lo = r_hi / 10.0;
    if !(lo >= r_lo && r_hi > 0.0) {
        return Err(Error::TailTooShort(format!(
            "profile spans [{r_lo}, {r_hi}]"
        )));
    }
    let radii: Vec<f64> = (0..TAIL_SAMPLES)
        .map(|k| lo * 10f64.powf(k as f64 / (TAIL_SAMPLES - 1) as f64))
        .map(|r| r.min(r_hi))
        .collect();
    let mut scalar = Vec::with_capacity(radii.len());
    let mut phi = Vec::with_capacity(radii.len());
    for &r in &radii {
        let (tp, _) = p.taylor(r, 2)?;
        phi.push(tp[0]);
        let c = crate::warped::warped_curvature(p.n, p.lambda, tp[0], tp[1], 2.0 * tp[2])?;
        scalar.push(c.scalar);
    }
    // Vol(B_r) = ω_{n−1} ∫_{r_lo}^r φ^{n−1}, four-point Gauss–Legendre per node interval.
    let omega = unit_sphere_area(p.n - 1);
    let power = (p.n - 1) as i32;
    let mut cumulative = vec![0.0; p.len()];
    for i in 0..p.len() - 1 {
        let (a, b) = (p.r[i], p.r[i + 1]);
        let half = 0.5 * (b - a);
        let mut s = 0.0;
        for (xg, wg) in GAUSS4 {
            let r = a + half * (1.0 + xg);
            s += wg * p.interpolate_phi(r).powi(power);
        }
        cumulative[i + 1] = cumulative[i] + half * s;
    }
    let volume: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let i =
                p.r.partition_point(|&x| x <= r)
                    .saturating_sub(1)
                    .min(p.len() - 2);
            let (a, b) = (p.r[i], r);
            let half = 0.5 * (b - a);
            let s: f64 = GAUSS4
                .iter()
                .map(|(xg, wg)| wg * p.interpolate_phi(a + half * (1.0 + xg)).powi(power))
                .sum();
            omega * (cumulative[i] + half * s)
        })
        .collect();
    let energy: Vec<f64> = p.energy().into_iter().filter(|e| e.is_finite()).collect();
    let mean = energy.iter().sum::<f64>() / energy.len().max(1) as f64;
    let (mn, mx) = energy
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    Ok(AsymptoticsReport {
        window: (lo, r_hi),
        curvature_decay: log_log_fit(&radii, &scalar),
        volume_growth: log_log_fit(&radii, &volume),
        phi_growth: log_log_fit(&radii, &phi),
        energy_constant: mean,
        energy_spread: mx - mn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_leading_terms() {
        for n in 3..=6 {
            let cfg = BryantConfig::new(n);
            let s = origin_series(&cfg).unwrap();
            assert_eq!(s.phi(0.0, 1), 1.0);
            assert_eq!(s.phi(0.0, 2), 0.0);
            assert_eq!(s.potential(0.0, 1), 0.0);
            // R(0) = n F″(0)
            assert!((n as f64 * s.potential(0.0, 2) - 1.0).abs() < 1e-15);
            let nf = n as f64;
            assert!((s.phi[3] + 1.0 / (6.0 * nf * (nf - 1.0))).abs() < 1e-16);
            assert!(s.residual(cfg.r_seed, n, cfg.lambda()) < 1e-10);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = BryantConfig::new(4);
        cfg.normalization = 0.0;
        assert!(matches!(
            origin_series(&cfg),
            Err(Error::NormalizationNonpositive(_))
        ));
        assert!(matches!(
            origin_series(&BryantConfig::new(2)),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn sphere_area_recursion() {
        use std::f64::consts::PI;
        assert!((unit_sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn fit_recovers_power_law() {
        let x: Vec<f64> = (1..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.5)).collect();
        let f = log_log_fit(&x, &y).unwrap();
        assert!((f.exponent + 1.5).abs() < 1e-12);
        assert!(f.residual_std_error < 1e-12);
        assert!(log_log_fit(&x, &vec![0.0; x.len()]).is_none());
    }

    #[test]
    fn energy_is_conserved_in_three_dimensions() {
        let mut cfg = BryantConfig::new(3);
        cfg.r_max = 100.0;
        let p = integrate(&cfg).unwrap();
        let a = asymptotics(&p).unwrap();
        assert!(a.energy_spread < 1e-7, "spread {}", a.energy_spread);
        assert!(p.dphi.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn normalization_scales_the_profile() {
        // g_c and g_{4c} differ by the homothety r ↦ r/2.
        let mut a = BryantConfig::new(4);
        a.r_max = 60.0;
        let mut b = a.clone();
        b.normalization = 4.0;
        let (pa, pb) = (integrate(&a).unwrap(), integrate(&b).unwrap());
        for r in [0.5, 1.0, 3.0, 10.0, 50.0] {
            let sa = pa.state_at(r).unwrap();
            let sb = pb.state_at(r / 2.0).unwrap();
            assert!((sa[0] - 2.0 * sb[0]).abs() < 1e-8 * sa[0], "r = {r}");
            let ra = crate::warped::warped_curvature(
                4,
                2.0,
                sa[0],
                sa[1],
                steady_rhs(sa[0], sa[1], sa[3], 4, 2.0).unwrap().0,
            )
            .unwrap();
            let rb = crate::warped::warped_curvature(
                4,
                2.0,
                sb[0],
                sb[1],
                steady_rhs(sb[0], sb[1], sb[3], 4, 2.0).unwrap().0,
            )
            .unwrap();
            assert!(
                (ra.scalar - rb.scalar / 4.0).abs() < 1e-7 * ra.scalar,
                "r = {r}"
            );
        }
    }

    #[test]
    fn assembled_chart_is_a_soliton() {
        let mut cfg = BryantConfig::new(4);
        cfg.r_max = 50.0;
        let s = bryant_chart(&integrate(&cfg).unwrap()).unwrap();
        for r in [0.5, 1.0, 2.0, 4.0] {
            assert!(s.expand(&[r, 1.1, 0.9, 0.4], 2).unwrap().soliton_residual() < 1e-8);
        }
    }
}
