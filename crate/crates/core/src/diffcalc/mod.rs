//! Exact partial derivatives of chart functions via jets, plus a central
//! finite-difference oracle used for cross-validation.

mod jet;

pub use jet::{Jet, JetSpace};

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{FinslerError, Result};

/// Highest derivative order any computation in this crate needs.
pub const MAX_ORDER: usize = 4;

/// Number-like values that chart functions can be evaluated over.
pub trait Scalar:
    Clone
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> f64;
    /// A constant living in the same space as `self`.
    fn lift(&self, c: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn abs(&self) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

/// A real function of `arity` chart variables that can be lifted to jets.
pub trait ScalarField: Send + Sync {
    fn arity(&self) -> usize;
    fn eval(&self, z: &[f64]) -> f64;
    fn eval_jet(&self, z: &[Jet]) -> Jet;
    fn contains(&self, _z: &[f64]) -> bool {
        true
    }
}

/// Convenience for fields written once, generically over [`Scalar`].
pub trait GenericField: Send + Sync {
    fn arity(&self) -> usize;
    fn eval_generic<S: Scalar>(&self, z: &[S]) -> S;
    fn contains(&self, _z: &[f64]) -> bool {
        true
    }
}

impl<T: GenericField> ScalarField for T {
    fn arity(&self) -> usize {
        GenericField::arity(self)
    }
    fn eval(&self, z: &[f64]) -> f64 {
        self.eval_generic(z)
    }
    fn eval_jet(&self, z: &[Jet]) -> Jet {
        self.eval_generic(z)
    }
    fn contains(&self, z: &[f64]) -> bool {
        GenericField::contains(self, z)
    }
}

fn check_point(field: &dyn ScalarField, point: &[f64]) -> Result<()> {
    if point.len() != field.arity() {
        return Err(FinslerError::Dimension {
            expected: field.arity(),
            got: point.len(),
        });
    }
    if !field.contains(point) {
        return Err(FinslerError::Domain {
            what: "scalar field".into(),
            point: point.to_vec(),
        });
    }
    Ok(())
}

/// Jet of `field` at `point`, seeded along `seeds` and truncated at `order`.
pub fn seeded_jet(field: &dyn ScalarField, point: &[f64], seeds: &[usize], order: usize) -> Result<Jet> {
    if order > MAX_ORDER {
        return Err(FinslerError::UnsupportedOrder(order));
    }
    check_point(field, point)?;
    let space = JetSpace::get(seeds.len(), order);
    let z: Vec<Jet> = point
        .iter()
        .enumerate()
        .map(|(i, &v)| match seeds.iter().position(|&s| s == i) {
            Some(k) => Jet::variable(&space, k, v),
            None => Jet::constant(&space, v),
        })
        .collect();
    Ok(field.eval_jet(&z))
}

/// Exact mixed partial of `field` at `point`; `multi_index` lists chart
/// directions, one entry per differentiation (so `[0, 0]` is `∂²/∂z₀²`).
pub fn partial(field: &dyn ScalarField, point: &[f64], multi_index: &[usize]) -> Result<f64> {
    if multi_index.len() > MAX_ORDER {
        return Err(FinslerError::UnsupportedOrder(multi_index.len()));
    }
    if let Some(&bad) = multi_index.iter().find(|&&d| d >= point.len()) {
        return Err(FinslerError::InvalidParameter(format!(
            "direction {bad} out of range for arity {}",
            point.len()
        )));
    }
    let mut seeds: Vec<usize> = multi_index.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let jet = seeded_jet(field, point, &seeds, multi_index.len())?;
    let mut degree = vec![0u8; seeds.len()];
    for d in multi_index {
        let k = seeds.binary_search(d).expect("seed present");
        degree[k] += 1;
    }
    let value = jet.partial(&degree);
    if !value.is_finite() || !jet.value().is_finite() {
        return Err(FinslerError::SingularEvaluation(format!(
            "non-finite derivative at {point:?}"
        )));
    }
    Ok(value)
}

fn central_difference(field: &dyn ScalarField, point: &mut Vec<f64>, multi_index: &[usize], h: f64) -> f64 {
    match multi_index.split_first() {
        None => field.eval(point),
        Some((&dir, rest)) => {
            let saved = point[dir];
            point[dir] = saved + h;
            let plus = central_difference(field, point, rest, h);
            point[dir] = saved - h;
            let minus = central_difference(field, point, rest, h);
            point[dir] = saved;
            (plus - minus) / (2.0 * h)
        }
    }
}

/// Central-difference estimate of the same partial as [`partial`], with one
/// level of Richardson extrapolation (`(4 D(h/2) - D(h)) / 3`).
pub fn fd_partial(field: &dyn ScalarField, point: &[f64], multi_index: &[usize], step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(FinslerError::InvalidStep(step));
    }
    check_point(field, point)?;
    let mut p = point.to_vec();
    let coarse = central_difference(field, &mut p, multi_index, step);
    let fine = central_difference(field, &mut p, multi_index, step / 2.0);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// A reasonable finite-difference step for a derivative of the given order.
pub fn fd_step_for_order(order: usize) -> f64 {
    match order {
        0 | 1 => 1e-4,
        2 => 1e-3,
        3 => 5e-3,
        _ => 1e-2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cube;
    impl GenericField for Cube {
        fn arity(&self) -> usize {
            1
        }
        fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
            z[0].powi(3)
        }
    }

    struct Sine;
    impl GenericField for Sine {
        fn arity(&self) -> usize {
            1
        }
        fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
            z[0].sin()
        }
    }

    struct Seven;
    impl GenericField for Seven {
        fn arity(&self) -> usize {
            3
        }
        fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
            z[0].lift(7.0)
        }
    }

    struct Norm;
    impl GenericField for Norm {
        fn arity(&self) -> usize {
            2
        }
        fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
            (z[0].clone() * z[0].clone() + z[1].clone() * z[1].clone()).sqrt()
        }
    }

    #[test]
    fn cube_second_partial() {
        assert!((partial(&Cube, &[2.0], &[0, 0]).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_partials() {
        for d in 0..3 {
            assert_eq!(partial(&Seven, &[1.0, 2.0, 3.0], &[d]).unwrap(), 0.0);
        }
    }

    #[test]
    fn order_above_four_is_rejected() {
        assert_eq!(
            partial(&Cube, &[1.0], &[0, 0, 0, 0, 0]),
            Err(FinslerError::UnsupportedOrder(5))
        );
    }

    #[test]
    fn singular_point_is_reported() {
        assert!(matches!(
            partial(&Norm, &[0.0, 0.0], &[0]),
            Err(FinslerError::SingularEvaluation(_))
        ));
    }

    #[test]
    fn fd_examples() {
        let d = fd_partial(&Sine, &[0.0], &[0], 1e-4).unwrap();
        assert!((d - 1.0).abs() < 1e-7);
        let d2 = fd_partial(&Cube, &[2.0], &[0, 0], 1e-3).unwrap();
        assert!((d2 - 12.0).abs() < 1e-5);
    }

    #[test]
    fn fd_rejects_bad_step() {
        assert_eq!(
            fd_partial(&Sine, &[0.0], &[0], 0.0),
            Err(FinslerError::InvalidStep(0.0))
        );
        assert!(fd_partial(&Sine, &[0.0], &[0], -1.0).is_err());
    }
}
