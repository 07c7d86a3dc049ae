//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `f^(α)(p) / α!` of a scalar for
//! every multi-index `α` over a fixed set of seeded directions with
//! `|α| <= order`. Arithmetic is exact up to the truncation order, so the
//! mixed partial for multi-index `α` is recovered as `α! * coeff(α)`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use super::Scalar;

/// Monomial layout and product tables for jets with `vars` seeded directions
/// truncated at `order`.
///
/// Monomials are enumerated degree by degree, so the monomials of any lower
/// order form a prefix of the coefficient vector.
pub struct JetSpace {
    vars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    mul_table: Vec<[u32; 3]>,
    /// Per direction: (source index, destination index in the order-1 space, factor).
    deriv_table: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("vars", &self.vars)
            .field("order", &self.order)
            .field("len", &self.monomials.len())
            .finish()
    }
}

fn monomials_of_degree(vars: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(vars: usize, left: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == vars {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k as u8);
            rec(vars, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if vars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(vars, degree, &mut Vec::with_capacity(vars), &mut out);
    out
}

impl JetSpace {
    fn build(vars: usize, order: usize) -> Self {
        let mut monomials = Vec::new();
        for d in 0..=order {
            monomials.extend(monomials_of_degree(vars, d));
        }
        let lookup: HashMap<Vec<u8>, usize> = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();

        let mut mul_table = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (j, b) in monomials.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_table.push([i as u32, j as u32, lookup[&sum] as u32]);
            }
        }

        let mut deriv_table = vec![Vec::new(); vars];
        if order > 0 {
            let lower_len = monomials
                .iter()
                .take_while(|m| m.iter().map(|&v| v as usize).sum::<usize>() < order)
                .count();
            for (v, table) in deriv_table.iter_mut().enumerate() {
                for (src, m) in monomials.iter().enumerate() {
                    if m[v] == 0 {
                        continue;
                    }
                    let mut lowered = m.clone();
                    lowered[v] -= 1;
                    let dst = lookup[&lowered];
                    debug_assert!(dst < lower_len);
                    table.push((src as u32, dst as u32, m[v] as f64));
                }
            }
        }

        JetSpace {
            vars,
            order,
            monomials,
            lookup,
            mul_table,
            deriv_table,
        }
    }

    /// Shared space for `vars` seeded directions truncated at `order`.
    pub fn get(vars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((vars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(vars, order)))
            .clone()
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn index_of(&self, multi_degree: &[u8]) -> Option<usize> {
        self.lookup.get(multi_degree).copied()
    }

    pub fn monomial(&self, index: usize) -> &[u8] {
        &self.monomials[index]
    }
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("vars", &self.space.vars)
            .field("order", &self.space.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.vars == other.space.vars && self.space.order == other.space.order && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// The seeded coordinate `direction` with base value `value`.
    pub fn variable(space: &Arc<JetSpace>, direction: usize, value: f64) -> Self {
        assert!(direction < space.vars, "direction out of range");
        let mut jet = Jet::constant(space, value);
        if space.order > 0 {
            // degree-1 monomials follow the constant in direction order
            jet.coeffs[1 + direction] = 1.0;
        }
        jet
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.len());
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient for `multi_degree` (0 when above the order).
    pub fn coeff(&self, multi_degree: &[u8]) -> f64 {
        self.space.index_of(multi_degree).map(|i| self.coeffs[i]).unwrap_or(0.0)
    }

    /// Mixed partial `∂^α` where `α` counts how often each seed appears.
    pub fn partial(&self, multi_degree: &[u8]) -> f64 {
        let factorial: f64 = multi_degree
            .iter()
            .map(|&k| (1..=k as u32).map(f64::from).product::<f64>())
            .product();
        self.coeff(multi_degree) * factorial
    }

    /// Partial along a list of seed directions, e.g. `[0, 0, 2]` for `∂²₀∂₂`.
    pub fn partial_along(&self, directions: &[usize]) -> f64 {
        let mut degree = vec![0u8; self.space.vars];
        for &d in directions {
            degree[d] += 1;
        }
        self.partial(&degree)
    }

    pub fn first(&self, direction: usize) -> f64 {
        if self.space.order == 0 {
            return 0.0;
        }
        self.coeffs[1 + direction]
    }

    /// Exact derivative along one seed; the result has order reduced by one.
    pub fn derivative(&self, direction: usize) -> Jet {
        assert!(self.space.order > 0, "cannot differentiate an order-0 jet");
        let lower = JetSpace::get(self.space.vars, self.space.order - 1);
        let mut coeffs = vec![0.0; lower.len()];
        for &(src, dst, factor) in &self.space.deriv_table[direction] {
            coeffs[dst as usize] += factor * self.coeffs[src as usize];
        }
        Jet { space: lower, coeffs }
    }

    /// Drop all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.space.order);
        if order == self.space.order {
            return self.clone();
        }
        let lower = JetSpace::get(self.space.vars, order);
        let coeffs = self.coeffs[..lower.len()].to_vec();
        Jet { space: lower, coeffs }
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_constant(&self, value: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn same_space(&self, other: &Jet) {
        debug_assert!(
            self.space.vars == other.space.vars && self.space.order == other.space.order,
            "jet space mismatch: ({}, {}) vs ({}, {})",
            self.space.vars,
            self.space.order,
            other.space.vars,
            other.space.order
        );
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &[i, j, k] in &self.space.mul_table {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// Evaluate `Σ_k taylor[k] (self - self₀)^k`, where `taylor[k] = f^(k)(self₀)/k!`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let order = self.space.order;
        debug_assert!(taylor.len() > order);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant(&self.space, taylor[order]);
        for k in (0..order).rev() {
            acc = acc.mul_ref(&delta);
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    fn taylor_table(&self, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..=self.space.order).map(f).collect()
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let mut out = self.compose(&self.taylor_table(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * a.powi(-(k as i32) - 1)
        }));
        out.coeffs[0] = 1.0 / a;
        out
    }
}

fn binomial_real(p: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (p - i as f64) / (i as f64 + 1.0))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.same_space(&rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.same_space(&rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        self.mul_ref(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let mut out = self.mul_ref(&rhs.recip());
        // keep the value bit-identical to plain f64 division
        out.coeffs[0] = self.value() / rhs.value();
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for c in &mut self.coeffs {
            *c = -*c;
        }
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn lift(&self, c: f64) -> Self {
        Jet::constant(&self.space, c)
    }

    fn sqrt(&self) -> Self {
        let mut out = self.powf(0.5);
        out.coeffs[0] = self.value().sqrt();
        out
    }

    fn powf(&self, p: f64) -> Self {
        let a = self.value();
        self.compose(&self.taylor_table(|k| binomial_real(p, k) * a.powf(p - k as f64)))
    }

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            let mut out = self.powi(-n).recip();
            out.coeffs[0] = self.value().powi(n);
            return out;
        }
        let mut result = self.lift(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_ref(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        result.coeffs[0] = self.value().powi(n);
        result
    }

    fn sin(&self) -> Self {
        let a = self.value();
        let (s, c) = a.sin_cos();
        self.compose(&self.taylor_table(|k| {
            let d = match k % 4 {
                0 => s,
                1 => c,
                2 => -s,
                _ => -c,
            };
            d / factorial(k)
        }))
    }

    fn cos(&self) -> Self {
        let a = self.value();
        let (s, c) = a.sin_cos();
        self.compose(&self.taylor_table(|k| {
            let d = match k % 4 {
                0 => c,
                1 => -s,
                2 => -c,
                _ => s,
            };
            d / factorial(k)
        }))
    }

    fn sinh(&self) -> Self {
        let a = self.value();
        let (s, c) = (a.sinh(), a.cosh());
        self.compose(&self.taylor_table(|k| if k % 2 == 0 { s } else { c } / factorial(k)))
    }

    fn cosh(&self) -> Self {
        let a = self.value();
        let (s, c) = (a.sinh(), a.cosh());
        self.compose(&self.taylor_table(|k| if k % 2 == 0 { c } else { s } / factorial(k)))
    }

    fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&self.taylor_table(|k| e / factorial(k)))
    }

    fn ln(&self) -> Self {
        let a = self.value();
        self.compose(&self.taylor_table(|k| {
            if k == 0 {
                a.ln()
            } else {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign / (k as f64 * a.powi(k as i32))
            }
        }))
    }

    fn abs(&self) -> Self {
        if self.value() < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_orders_are_prefixes() {
        let big = JetSpace::get(3, 4);
        let small = JetSpace::get(3, 2);
        for i in 0..small.len() {
            assert_eq!(big.monomial(i), small.monomial(i));
        }
        assert_eq!(big.len(), 35);
    }

    #[test]
    fn cube_second_derivative() {
        let space = JetSpace::get(1, 3);
        let u = Jet::variable(&space, 0, 2.0);
        let f = u.powi(3);
        assert_eq!(f.value(), 8.0);
        assert!((f.partial(&[1]) - 12.0).abs() < 1e-12);
        assert!((f.partial(&[2]) - 12.0).abs() < 1e-12);
        assert!((f.partial(&[3]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_lowers_order() {
        let space = JetSpace::get(2, 3);
        let x = Jet::variable(&space, 0, 0.5);
        let y = Jet::variable(&space, 1, -1.5);
        let f = x.clone() * x.clone() * y.clone() + y.sin();
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        // ∂x f = 2xy
        assert!((fx.value() - 2.0 * 0.5 * -1.5).abs() < 1e-14);
        // ∂y ∂x f = 2x
        assert!((fx.partial(&[0, 1]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constants_have_no_higher_terms() {
        let space = JetSpace::get(2, 4);
        let c = Jet::constant(&space, 7.0);
        assert!(c.coeffs()[1..].iter().all(|&v| v == 0.0));
        let f = c.sqrt().exp().cosh();
        assert!(f.coeffs()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recip_and_division_are_inverse() {
        let space = JetSpace::get(2, 4);
        let x = Jet::variable(&space, 0, 1.3);
        let y = Jet::variable(&space, 1, 0.4);
        let f = (x.clone() * y.clone()).add_constant(2.0);
        let back = (f.clone() / f.clone()).coeffs().to_vec();
        assert!((back[0] - 1.0).abs() < 1e-14);
        assert!(back[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn sqrt_at_zero_is_singular() {
        let space = JetSpace::get(1, 1);
        let u = Jet::variable(&space, 0, 0.0);
        assert!(!u.sqrt().is_finite());
    }
}
