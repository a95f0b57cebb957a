//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] of order `p` in `n` variables stores the Taylor coefficients
//! `c_α = ∂^α u / α!` of a scalar field `u` at a base point for every
//! multi-index with `|α| ≤ p`. Arithmetic on jets propagates all partial
//! derivatives up to that order exactly, so metric components written once in
//! terms of jets yield analytic derivatives of any order the pipeline needs.
//!
//! Monomials are stored in graded order, so a jet of order `q < p` is a
//! prefix of the coefficient vector of order `p`. Binary operations between
//! jets of different orders truncate to the smaller order. Differentiation
//! lowers the order by one.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

/// Index tables shared by every jet with the same variable count and maximal order.
pub struct JetSpace {
    nvars: usize,
    max_order: usize,
    exponents: Vec<Vec<u8>>,
    /// `degree_end[d]` is the number of monomials of degree `≤ d`.
    degree_end: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// `(a, b, c)` with `m_a · m_b = m_c`, sorted by the degree of `m_c`.
    mul: Vec<(u32, u32, u32)>,
    mul_end: Vec<usize>,
    /// Per variable: `(src, dst, factor)` with `∂_i m_src = factor · m_dst`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    deriv_end: Vec<Vec<usize>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("max_order", &self.max_order)
            .field("monomials", &self.exponents.len())
            .finish()
    }
}

fn monomials_of_degree(nvars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, nvars: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == nvars {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k as u8);
            rec(prefix, nvars, left - k, out);
            prefix.pop();
        }
    }
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    rec(&mut Vec::with_capacity(nvars), nvars, degree, out);
}

impl JetSpace {
    fn build(nvars: usize, max_order: usize) -> Self {
        let mut exponents = Vec::new();
        let mut degree_end = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            monomials_of_degree(nvars, d, &mut exponents);
            degree_end.push(exponents.len());
        }
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut mul = Vec::new();
        for (a, ea) in exponents.iter().enumerate() {
            let da = degree(ea);
            for (b, eb) in exponents.iter().enumerate() {
                if da + degree(eb) > max_order {
                    continue;
                }
                let ec: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                mul.push((a as u32, b as u32, index[&ec] as u32));
            }
        }
        mul.sort_by_key(|&(_, _, c)| c);
        let mut mul_end = vec![0; max_order + 1];
        for d in 0..=max_order {
            mul_end[d] = mul.partition_point(|&(_, _, c)| (c as usize) < degree_end[d]);
        }

        let mut deriv = Vec::with_capacity(nvars);
        let mut deriv_end = Vec::with_capacity(nvars);
        for i in 0..nvars {
            let mut table = Vec::new();
            for (src, e) in exponents.iter().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[i] -= 1;
                table.push((src as u32, index[&lowered] as u32, e[i] as f64));
            }
            let ends = (0..=max_order)
                .map(|d| table.partition_point(|&(s, _, _)| (s as usize) < degree_end[d]))
                .collect();
            deriv.push(table);
            deriv_end.push(ends);
        }

        JetSpace {
            nvars,
            max_order,
            exponents,
            degree_end,
            index,
            mul,
            mul_end,
            deriv,
            deriv_end,
        }
    }

    /// Shared space for `nvars` variables up to `max_order`; cached process-wide.
    pub fn get(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, max_order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, max_order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of monomials of degree at most `order`.
    pub fn len(&self, order: usize) -> usize {
        self.degree_end[order]
    }

    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exponents[k]
    }

    pub fn position(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }
}

/// Truncated Taylor polynomial in the variables of a [`JetSpace`].
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, order: usize, value: f64) -> Self {
        assert!(order <= space.max_order, "jet order exceeds space");
        let mut coeffs = vec![0.0; space.len(order)];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    /// The coordinate function `x_i` expanded about `value`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, i: usize, value: f64) -> Self {
        let mut jet = Jet::constant(space, order, value);
        if order > 0 {
            let mut e = vec![0u8; space.nvars];
            e[i] = 1;
            jet.coeffs[space.index[&e]] = 1.0;
        }
        jet
    }

    /// Seed jets `x_i + ε_i` for every coordinate of `point`.
    pub fn seeds(point: &[f64], order: usize) -> Vec<Jet> {
        let space = JetSpace::get(point.len(), order);
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(&space, order, i, x))
            .collect()
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, order: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.len(order));
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Constant jet living in the same space and order as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        Jet::constant(&self.space, self.order, value)
    }

    /// Partial derivative `∂^α u` at the base point (zero past the jet's order).
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        let degree: usize = alpha.iter().map(|&a| a as usize).sum();
        if degree > self.order {
            return 0.0;
        }
        let k = self.space.index[alpha];
        let norm: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
        self.coeffs[k] * norm
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.len(order)].to_vec(),
        }
    }

    /// `∂u/∂x_i` as a jet of one order less.
    pub fn derivative(&self, i: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut coeffs = vec![0.0; self.space.len(order)];
        let table = &self.space.deriv[i];
        let end = self.space.deriv_end[i][self.order];
        for &(src, dst, factor) in &table[..end] {
            coeffs[dst as usize] += factor * self.coeffs[src as usize];
        }
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += a * b`, truncating to the smallest order involved.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            self.coeffs.truncate(self.space.len(order));
            self.order = order;
        }
        let end = self.space.mul_end[order];
        for &(i, j, k) in &self.space.mul[..end] {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    /// `self += s · a · b`.
    pub fn add_scaled_product(&mut self, a: &Jet, b: &Jet, s: f64) {
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            self.coeffs.truncate(self.space.len(order));
            self.order = order;
        }
        let end = self.space.mul_end[order];
        for &(i, j, k) in &self.space.mul[..end] {
            self.coeffs[k as usize] += s * a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    /// `self += s * a`.
    pub fn add_scaled(&mut self, a: &Jet, s: f64) {
        if a.order < self.order {
            self.coeffs.truncate(self.space.len(a.order));
            self.order = a.order;
        }
        for (c, x) in self.coeffs.iter_mut().zip(&a.coeffs) {
            *c += s * x;
        }
    }

    fn binary(&self, other: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space), "mixed jet spaces");
        let order = self.order.min(other.order);
        let len = self.space.len(order);
        let coeffs = self.coeffs[..len]
            .iter()
            .zip(&other.coeffs[..len])
            .map(|(&a, &b)| op(a, b))
            .collect();
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space), "mixed jet spaces");
        let order = self.order.min(other.order);
        let mut out = Jet::constant(&self.space, order, 0.0);
        out.add_product(self, other);
        out
    }

    /// Evaluates `g(self)` from the Taylor coefficients `t_k = g^{(k)}(u₀)/k!`
    /// of a univariate function at `u₀ = self.value()`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let top = self.order.min(taylor.len().saturating_sub(1));
        let mut acc = self.lift(taylor.get(top).copied().unwrap_or(0.0));
        for k in (0..top).rev() {
            acc = acc.product(&delta);
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let u = self.value();
        let taylor: Vec<f64> = (0..=self.order)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / u.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&taylor)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let u = self.value();
        let mut taylor = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            taylor.push(binom * u.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&taylor)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, k: u32) -> Jet {
        let mut acc = self.lift(1.0);
        for _ in 0..k {
            acc = acc.product(self);
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let taylor: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose(&taylor)
    }

    pub fn ln(&self) -> Jet {
        let u = self.value();
        let taylor: Vec<f64> = (0..=self.order)
            .map(|k| {
                if k == 0 {
                    u.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * u.powi(k as i32))
                }
            })
            .collect();
        self.compose(&taylor)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let taylor: Vec<f64> = (0..=self.order)
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&taylor)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let taylor: Vec<f64> = (0..=self.order)
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&taylor)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let taylor: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { s } else { c } / factorial(k))
            .collect();
        self.compose(&taylor)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let taylor: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { c } else { s } / factorial(k))
            .collect();
        self.compose(&taylor)
    }
}

macro_rules! jet_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.binary(b, |x, y| x + y));
jet_binop!(Sub, sub, |a, b| a.binary(b, |x, y| x - y));
jet_binop!(Mul, mul, |a, b| a.product(b));
jet_binop!(Div, div, |a, b| a.product(&b.recip()));

macro_rules! jet_scalar_op {
    ($tr:ident, $method:ident, $jet_f:expr, $scalar_f:expr) => {
        impl $tr<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                let f: fn(&Jet, f64) -> Jet = $jet_f;
                f(self, rhs)
            }
        }
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<&Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(f64, &Jet) -> Jet = $scalar_f;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

fn shifted(j: &Jet, s: f64) -> Jet {
    let mut out = j.clone();
    out.coeffs[0] += s;
    out
}

jet_scalar_op!(Add, add, |j, s| shifted(j, s), |s, j| shifted(j, s));
jet_scalar_op!(Sub, sub, |j, s| shifted(j, -s), |s, j| shifted(&-j, s));
jet_scalar_op!(Mul, mul, |j, s| j.scale(s), |s, j| j.scale(s));
jet_scalar_op!(Div, div, |j, s| j.scale(1.0 / s), |s, j| j.recip().scale(s));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, -1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn space_sizes_match_binomials() {
        for n in 1..=5 {
            for k in 0..=5 {
                let s = JetSpace::get(n, k);
                assert_eq!(s.len(k), binomial(n + k, k));
                assert_eq!(s.mul.len(), binomial(2 * n + k, k));
            }
        }
    }

    #[test]
    fn polynomial_partials_are_exact() {
        // u = x² y + 3 y³ at (2, -1)
        let x = Jet::seeds(&[2.0, -1.0], 4);
        let u = &x[0] * &x[0] * &x[1] + (&x[1] * &x[1] * &x[1]) * 3.0;
        assert_eq!(u.value(), -4.0 - 3.0);
        assert_eq!(u.partial(&[1, 0]), -(2.0 * 2.0));
        assert_eq!(u.partial(&[0, 1]), 4.0 + 9.0);
        assert_eq!(u.partial(&[1, 1]), 4.0);
        assert_eq!(u.partial(&[0, 3]), 18.0);
        assert_eq!(u.partial(&[2, 1]), 2.0);
        assert_eq!(u.partial(&[1, 3]), 0.0);
    }

    #[test]
    fn derivative_matches_partials() {
        let x = Jet::seeds(&[0.3, 0.7], 5);
        let u = (&x[0] * &x[1]).sin() + x[1].exp() / (&x[0] + 2.0);
        let du = u.derivative(1);
        assert_eq!(du.order(), 4);
        for k in 0..du.space().len(4) {
            let mut a = du.space().exponents(k).to_vec();
            let lhs = du.partial(&a);
            a[1] += 1;
            assert!((lhs - u.partial(&a)).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::seeds(&[0.4], 6);
        let t = &x[0];
        let checks: Vec<(Jet, Box<dyn Fn(usize) -> f64>)> = vec![
            (t.exp(), Box::new(|_| 0.4f64.exp())),
            (
                t.sin(),
                Box::new(|k| [0.4f64.sin(), 0.4f64.cos(), -0.4f64.sin(), -0.4f64.cos()][k % 4]),
            ),
            (
                t.cosh(),
                Box::new(|k| {
                    if k % 2 == 0 {
                        0.4f64.cosh()
                    } else {
                        0.4f64.sinh()
                    }
                }),
            ),
            (
                t.recip(),
                Box::new(|k| {
                    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                    s * factorial(k) / 0.4f64.powi(k as i32 + 1)
                }),
            ),
        ];
        for (jet, exact) in checks {
            for k in 0..=6u8 {
                let d = jet.partial(&[k]);
                let e = exact(k as usize);
                assert!((d - e).abs() < 1e-10 * (1.0 + e.abs()), "k={k}: {d} vs {e}");
            }
        }
        let s = t.sqrt();
        assert!((s.partial(&[2]) + 0.25 * 0.4f64.powf(-1.5)).abs() < 1e-12);
        let l = t.ln();
        assert!((l.partial(&[3]) - 2.0 / 0.4f64.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn mixed_orders_truncate() {
        let x = Jet::seeds(&[1.0, 2.0], 3);
        let a = &x[0] * &x[1];
        let b = a.derivative(0); // = y, order 2
        let c = &a * &b;
        assert_eq!(c.order(), 2);
        // x y², ∂x∂y = 2y
        assert_eq!(c.partial(&[1, 1]), 4.0);
    }
}
