//! Coordinate charts: a metric on a coordinate domain plus derivative access.
//!
//! Metric and potential evaluators are written once against [`Jet`] inputs.
//! Derivatives up to the chart's analytic order come straight out of the jet
//! arithmetic; anything above that is filled in by central finite differences
//! of the analytic data (or of plain values for finite-difference charts),
//! using tensor-product stencils with one Richardson halving.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};

/// Evaluator returning the components of a field at jet-valued coordinates.
pub type FieldFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Coordinate box, optionally cut down by a predicate.
#[derive(Clone)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
    predicate: Option<Predicate>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("bounds", &self.bounds)
            .field("predicate", &self.predicate.is_some())
            .finish()
    }
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Domain {
            bounds,
            predicate: None,
        }
    }

    pub fn with_predicate(mut self, predicate: Predicate) -> Self {
        self.predicate = Some(predicate);
        self
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
            && self.predicate.as_ref().is_none_or(|p| p(x))
    }

    /// Uniform samples from the domain; identical seeds give identical points.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count && attempts < 1000 * count.max(1) {
            attempts += 1;
            let x: Vec<f64> = self
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// Per-derivative-level finite-difference steps.
#[derive(Clone, Debug, PartialEq)]
pub struct FdSteps {
    /// `base[k-1]` is the step for `k`-th order differences, scaled by `1 + |x_i|`.
    pub base: Vec<f64>,
    pub richardson: bool,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            base: vec![1e-3, 5e-3, 1e-2, 2e-2, 3e-2],
            richardson: true,
        }
    }
}

impl FdSteps {
    pub fn max_level(&self) -> usize {
        self.base.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DerivativeMode {
    /// Jet-exact derivatives up to `order`; with a fallback, higher orders are
    /// finite differences of the order-`order` jets.
    Analytic {
        order: usize,
        fallback: Option<FdSteps>,
    },
    /// Every derivative from stencils of plain metric values.
    FiniteDifference(FdSteps),
}

impl DerivativeMode {
    pub fn analytic(order: usize) -> Self {
        DerivativeMode::Analytic {
            order,
            fallback: Some(FdSteps::default()),
        }
    }

    /// Highest derivative order this mode can deliver.
    pub fn max_order(&self) -> usize {
        match self {
            DerivativeMode::Analytic { order, fallback } => {
                order + fallback.as_ref().map_or(0, FdSteps::max_level)
            }
            DerivativeMode::FiniteDifference(steps) => steps.max_level(),
        }
    }

    pub fn analytic_order(&self) -> usize {
        match self {
            DerivativeMode::Analytic { order, .. } => *order,
            DerivativeMode::FiniteDifference(_) => 0,
        }
    }

    fn fd(&self) -> Option<&FdSteps> {
        match self {
            DerivativeMode::Analytic { fallback, .. } => fallback.as_ref(),
            DerivativeMode::FiniteDifference(steps) => Some(steps),
        }
    }
}

/// A metric `g_ij` on a coordinate domain.
#[derive(Clone)]
pub struct CoordinateChart {
    dim: usize,
    domain: Domain,
    metric: FieldFn,
    mode: DerivativeMode,
    label: String,
}

impl fmt::Debug for CoordinateChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordinateChart")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("mode", &self.mode)
            .finish()
    }
}

impl CoordinateChart {
    /// `metric` returns the `dim × dim` components in row-major order.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        domain: Domain,
        mode: DerivativeMode,
        metric: FieldFn,
    ) -> Self {
        assert_eq!(domain.bounds().len(), dim, "domain/dimension mismatch");
        CoordinateChart {
            dim,
            domain,
            metric,
            mode,
            label: label.into(),
        }
    }

    /// Chart whose metric is diagonal; `diag` returns the `dim` diagonal entries.
    pub fn diagonal(
        label: impl Into<String>,
        dim: usize,
        domain: Domain,
        mode: DerivativeMode,
        diag: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Self {
        let metric: FieldFn = Arc::new(move |x: &[Jet]| {
            let d = diag(x);
            let n = d.len();
            let zero = x[0].lift(0.0);
            let mut out = vec![zero; n * n];
            for (i, v) in d.into_iter().enumerate() {
                out[i * n + i] = v;
            }
            out
        });
        CoordinateChart::new(label, dim, domain, mode, metric)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mode(&self) -> &DerivativeMode {
        &self.mode
    }

    pub fn metric_fn(&self) -> &FieldFn {
        &self.metric
    }

    pub fn with_mode(&self, mode: DerivativeMode) -> CoordinateChart {
        CoordinateChart {
            mode,
            ..self.clone()
        }
    }

    pub fn with_domain(&self, domain: Domain) -> CoordinateChart {
        assert_eq!(domain.bounds().len(), self.dim);
        CoordinateChart {
            domain,
            ..self.clone()
        }
    }

    pub fn with_label(&self, label: impl Into<String>) -> CoordinateChart {
        CoordinateChart {
            label: label.into(),
            ..self.clone()
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain(x.to_vec()))
        }
    }

    /// Plain metric components at `x` (row-major).
    pub fn metric_at(&self, x: &[f64]) -> Vec<f64> {
        (self.metric)(&Jet::seeds(x, 0))
            .iter()
            .map(Jet::value)
            .collect()
    }

    /// Metric components as jets of the requested order.
    pub fn metric_jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        field_jets(&self.metric, x, order, &self.mode)
    }
}

/// Jets of `field` at `x` to `order`, using analytic data where the mode
/// allows it and finite differences above that.
pub fn field_jets(
    field: &FieldFn,
    x: &[f64],
    order: usize,
    mode: &DerivativeMode,
) -> Result<Vec<Jet>> {
    let analytic = mode.analytic_order();
    if order <= analytic {
        return Ok(field(&Jet::seeds(x, order)));
    }
    let available = mode.max_order();
    let steps = match mode.fd() {
        Some(steps) if order <= available => steps,
        _ => {
            return Err(Error::InsufficientDerivativeOrder {
                required: order,
                available,
            })
        }
    };

    let n = x.len();
    let base_space = JetSpace::get(n, analytic);
    let base_len = base_space.len(analytic);
    let eval = |y: &[f64]| -> Vec<f64> {
        field(&Jet::seeds(y, analytic))
            .iter()
            .flat_map(|j| j.coeffs().to_vec())
            .collect()
    };
    let center = eval(x);
    let components = center.len() / base_len;

    let space = JetSpace::get(n, order);
    let mut stencil = StencilCache::new(x, steps);
    let mut coeffs = vec![vec![0.0; space.len(order)]; components];
    for t in 0..space.len(order) {
        let alpha = space.exponents(t).to_vec();
        let degree: usize = alpha.iter().map(|&a| a as usize).sum();
        if degree <= analytic {
            let b = base_space.position(&alpha).expect("monomial in base space");
            for (c, row) in coeffs.iter_mut().enumerate() {
                row[t] = center[c * base_len + b];
            }
            continue;
        }
        // α = β + γ with |β| = analytic order, β taken greedily from the front.
        let mut beta = vec![0u8; n];
        let mut left = analytic as u8;
        for i in 0..n {
            let take = alpha[i].min(left);
            beta[i] = take;
            left -= take;
        }
        let gamma: Vec<u8> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let b = base_space.position(&beta).expect("monomial in base space");
        let derivative = stencil.derivative(&gamma, &eval);
        let ratio = multi_factorial(&beta) / multi_factorial(&alpha);
        for (c, row) in coeffs.iter_mut().enumerate() {
            row[t] = ratio * derivative[c * base_len + b];
        }
    }
    Ok(coeffs
        .into_iter()
        .map(|c| Jet::from_coeffs(&space, order, c))
        .collect())
}

fn multi_factorial(alpha: &[u8]) -> f64 {
    alpha
        .iter()
        .map(|&a| (1..=a as usize).map(|k| k as f64).product::<f64>())
        .product()
}

/// Second-order accurate central weights for the `m`-th derivative at
/// integer offsets.
fn central_weights(m: usize) -> &'static [(i8, f64)] {
    match m {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        5 => &[
            (-3, -0.5),
            (-2, 2.0),
            (-1, -2.5),
            (1, 2.5),
            (2, -2.0),
            (3, 0.5),
        ],
        6 => &[
            (-3, 1.0),
            (-2, -6.0),
            (-1, 15.0),
            (0, -20.0),
            (1, 15.0),
            (2, -6.0),
            (3, 1.0),
        ],
        _ => panic!("no central stencil for derivative order {m}"),
    }
}

struct StencilCache<'a> {
    x: &'a [f64],
    steps: &'a FdSteps,
    values: HashMap<(usize, bool, Vec<i8>), Vec<f64>>,
}

impl<'a> StencilCache<'a> {
    fn new(x: &'a [f64], steps: &'a FdSteps) -> Self {
        StencilCache {
            x,
            steps,
            values: HashMap::new(),
        }
    }

    fn derivative(&mut self, gamma: &[u8], eval: &dyn Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let level: usize = gamma.iter().map(|&g| g as usize).sum();
        let coarse = self.difference(gamma, level, false, eval);
        if !self.steps.richardson {
            return coarse;
        }
        let fine = self.difference(gamma, level, true, eval);
        fine.iter()
            .zip(&coarse)
            .map(|(f, c)| (4.0 * f - c) / 3.0)
            .collect()
    }

    fn difference(
        &mut self,
        gamma: &[u8],
        level: usize,
        halved: bool,
        eval: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Vec<f64> {
        let scale = if halved { 0.5 } else { 1.0 };
        let h: Vec<f64> = self
            .x
            .iter()
            .map(|xi| scale * self.steps.base[level - 1] * (1.0 + xi.abs()))
            .collect();
        let mut terms: Vec<(Vec<i8>, f64)> = vec![(Vec::new(), 1.0)];
        for &g in gamma {
            let mut next = Vec::new();
            for (offsets, w) in &terms {
                for &(o, wo) in central_weights(g as usize) {
                    let mut off = offsets.clone();
                    off.push(o);
                    next.push((off, w * wo));
                }
            }
            terms = next;
        }
        let denom: f64 = gamma
            .iter()
            .zip(&h)
            .map(|(&g, hi)| hi.powi(g as i32))
            .product();
        let mut acc: Vec<f64> = Vec::new();
        for (offsets, w) in terms {
            let key = (level, halved, offsets.clone());
            if !self.values.contains_key(&key) {
                let y: Vec<f64> = self
                    .x
                    .iter()
                    .zip(&offsets)
                    .zip(&h)
                    .map(|((xi, &o), hi)| xi + o as f64 * hi)
                    .collect();
                self.values.insert(key.clone(), eval(&y));
            }
            let v = &self.values[&key];
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += w * vi;
            }
        }
        acc.iter().map(|a| a / denom).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> FieldFn {
        Arc::new(|x: &[Jet]| vec![(&x[0] * &x[1]).sin() + x[0].exp() * &x[1]])
    }

    #[test]
    fn fd_jets_track_analytic_jets() {
        let f = wavy();
        let x = [0.3, -0.4];
        let exact = field_jets(&f, &x, 4, &DerivativeMode::analytic(4)).unwrap();
        let fd = field_jets(
            &f,
            &x,
            4,
            &DerivativeMode::FiniteDifference(FdSteps::default()),
        )
        .unwrap();
        let hybrid = field_jets(&f, &x, 4, &DerivativeMode::analytic(2)).unwrap();
        let space = exact[0].space().clone();
        for t in 0..space.len(4) {
            let alpha = space.exponents(t);
            let e = exact[0].partial(alpha);
            let degree: usize = alpha.iter().map(|&a| a as usize).sum();
            let tol_fd = [1e-12, 1e-9, 1e-7, 1e-6, 1e-5][degree];
            assert!((fd[0].partial(alpha) - e).abs() < tol_fd, "fd {alpha:?}");
            assert!(
                (hybrid[0].partial(alpha) - e).abs() < 1e-7,
                "hybrid {alpha:?} {}",
                hybrid[0].partial(alpha) - e
            );
        }
    }

    #[test]
    fn insufficient_order_is_reported() {
        let f = wavy();
        let mode = DerivativeMode::Analytic {
            order: 2,
            fallback: None,
        };
        let err = field_jets(&f, &[0.0, 0.0], 3, &mode).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientDerivativeOrder {
                required: 3,
                available: 2
            }
        ));
    }

    #[test]
    fn sampling_is_seeded_and_respects_predicate() {
        let domain = Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0)])
            .with_predicate(Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0));
        let a = domain.sample(20, 7);
        let b = domain.sample(20, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p[0] * p[0] + p[1] * p[1] < 1.0));
    }
}
