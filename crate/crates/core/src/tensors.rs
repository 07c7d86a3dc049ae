//! Fundamental tensor, Cartan tensor and structure validity checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::structure::{sample_fiber, FinslerStructure};

/// Smallest eigenvalue a fundamental tensor may have.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Dense `n×n×n` array, index order `[i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `g_ij(x, y)` together with its inverse.
#[derive(Debug, Clone)]
pub struct MetricTensorValue {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub f_value: f64,
    /// `|g_ij yⁱ yʲ - F²|`.
    pub euler_residual: f64,
}

impl MetricTensorValue {
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        u.dot(&(&self.g * v))
    }

    /// `y_k = g_kj yʲ`.
    pub fn lowered_y(&self) -> DVector<f64> {
        &self.g * DVector::from_column_slice(&self.y)
    }
}

#[derive(Debug, Clone)]
pub struct CartanTensorValue {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `C_ijk = ¼ ∂³F²/∂yⁱ∂yʲ∂yᵏ`.
    pub c: Tensor3,
    /// `Cⁱ_jk = g^{ir} C_rjk`.
    pub c_mixed: Tensor3,
}

fn fiber_seeds(n: usize) -> Vec<usize> {
    (n..2 * n).collect()
}

/// Fiber Hessian of `F²/2` and `F` itself, without validity checks.
pub(crate) fn raw_metric(s: &FinslerStructure, x: &[f64], y: &[f64]) -> (DMatrix<f64>, f64) {
    let n = s.dim();
    let jet = s.f2_jet(x, y, &fiber_seeds(n), 2);
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * jet.partial_along(&[i, j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    (g, s.eval(x, y))
}

pub(crate) fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Positive-definite check plus inverse; reports the offending eigenvalue.
pub(crate) fn checked_inverse(g: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let degenerate = |eigenvalue| FinslerError::MetricDegeneracy {
        eigenvalue,
        x: x.to_vec(),
        y: y.to_vec(),
    };
    if g.iter().any(|v| !v.is_finite()) {
        return Err(FinslerError::SingularEvaluation(format!(
            "fundamental tensor not finite at x={x:?}, y={y:?}"
        )));
    }
    let min = min_eigenvalue(g);
    if !(min > EIGENVALUE_FLOOR) {
        return Err(degenerate(min));
    }
    match g.clone().cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => Err(degenerate(min)),
    }
}

/// `g_ij = ½ ∂²F²/∂yⁱ∂yʲ` at `(x, y)`.
pub fn fundamental_tensor(s: &FinslerStructure, x: &[f64], y: &[f64]) -> Result<MetricTensorValue> {
    s.check_base(x)?;
    s.check_fiber(y)?;
    let (g, f) = raw_metric(s, x, y);
    if !f.is_finite() {
        return Err(FinslerError::SingularEvaluation(format!(
            "F is not finite at x={x:?}, y={y:?}"
        )));
    }
    let g_inv = checked_inverse(&g, x, y)?;
    let yv = DVector::from_column_slice(y);
    let euler_residual = (yv.dot(&(&g * &yv)) - f * f).abs();
    Ok(MetricTensorValue {
        x: x.to_vec(),
        y: y.to_vec(),
        g,
        g_inv,
        f_value: f,
        euler_residual,
    })
}

/// `g_y(u, v)`.
pub fn g_inner(s: &FinslerStructure, x: &[f64], y: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(fundamental_tensor(s, x, y)?.inner(u, v))
}

pub fn cartan_tensor(s: &FinslerStructure, x: &[f64], y: &[f64]) -> Result<CartanTensorValue> {
    let metric = fundamental_tensor(s, x, y)?;
    let n = s.dim();
    let jet = s.f2_jet(x, y, &fiber_seeds(n), 3);
    let mut c = Tensor3::zeros(n);
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = 0.25 * jet.partial_along(&[i, j, k]);
                for (a, b, d) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                    c.set(a, b, d, v);
                }
            }
        }
    }
    let mut c_mixed = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = (0..n).map(|r| metric.g_inv[(i, r)] * c.get(r, j, k)).sum();
                c_mixed.set(i, j, k, v);
            }
        }
    }
    Ok(CartanTensorValue {
        x: x.to_vec(),
        y: y.to_vec(),
        c,
        c_mixed,
    })
}

/// Tolerances used by [`verify_structure`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidityTolerances {
    pub homogeneity: f64,
    pub metric_homogeneity: f64,
    pub eigenvalue_floor: f64,
    pub euler: f64,
}

impl Default for ValidityTolerances {
    fn default() -> Self {
        ValidityTolerances {
            homogeneity: 1e-9,
            metric_homogeneity: 1e-8,
            eigenvalue_floor: EIGENVALUE_FLOOR,
            euler: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst observed value (a violation, or the minimum for floor checks).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidityReport {
    pub structure: String,
    pub samples: usize,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl ValidityReport {
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    worst: f64,
    tolerance: f64,
    floor: bool,
    witness: Option<Witness>,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64, floor: bool) -> Self {
        Tracker {
            name,
            worst: if floor { f64::INFINITY } else { 0.0 },
            tolerance,
            floor,
            witness: None,
        }
    }

    fn record(&mut self, value: f64, x: &[f64], y: &[f64]) {
        let value = if value.is_nan() {
            if self.floor {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            value
        };
        let worse = if self.floor {
            value < self.worst
        } else {
            value > self.worst
        };
        if worse || self.witness.is_none() {
            if worse {
                self.worst = value;
            }
            self.witness = Some(Witness {
                x: x.to_vec(),
                y: y.to_vec(),
            });
        }
    }

    fn finish(self) -> CheckOutcome {
        let passed = if self.floor {
            self.worst > self.tolerance
        } else {
            self.worst < self.tolerance
        };
        CheckOutcome {
            name: self.name,
            worst: self.worst,
            tolerance: self.tolerance,
            passed,
            witness: self.witness,
        }
    }
}

fn sup_norm(m: &DMatrix<f64>) -> f64 {
    m.iter()
        .fold(0.0, |a, v| if v.is_nan() { f64::NAN } else { a.max(v.abs()) })
}

/// Sample `count` points from `sampler` and report the worst violation of
/// positivity, 1-homogeneity of `F`, 0-homogeneity of `g`, positive
/// definiteness and the Euler identity.
pub fn verify_structure(
    s: &FinslerStructure,
    sampler: &mut dyn FnMut() -> (Vec<f64>, Vec<f64>),
    count: usize,
    tol: ValidityTolerances,
) -> ValidityReport {
    let mut positivity = Tracker::new("positivity", 0.0, true);
    let mut homogeneity = Tracker::new("homogeneity", tol.homogeneity, false);
    let mut metric_hom = Tracker::new("metric_homogeneity", tol.metric_homogeneity, false);
    let mut definiteness = Tracker::new("positive_definiteness", tol.eigenvalue_floor, true);
    let mut euler = Tracker::new("euler_identity", tol.euler, false);

    for _ in 0..count {
        let (x, y) = sampler();
        let (g, f) = raw_metric(s, &x, &y);
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        positivity.record(f / ynorm, &x, &y);

        let mut hom: f64 = 0.0;
        let mut ghom: f64 = 0.0;
        for lambda in [0.5, 2.0, 10.0] {
            let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let (gl, fl) = raw_metric(s, &x, &ly);
            hom = hom.max((fl - lambda * f).abs() / (lambda * f).abs());
            ghom = ghom.max(sup_norm(&(&gl - &g)) / sup_norm(&g).max(1.0));
            if fl.is_nan() || gl.iter().any(|v| v.is_nan()) {
                hom = f64::NAN;
            }
        }
        homogeneity.record(hom, &x, &y);
        metric_hom.record(ghom, &x, &y);
        definiteness.record(min_eigenvalue(&g), &x, &y);
        let yv = DVector::from_column_slice(&y);
        euler.record((yv.dot(&(&g * &yv)) - f * f).abs() / (f * f), &x, &y);
    }

    let checks: Vec<CheckOutcome> = [positivity, homogeneity, metric_hom, definiteness, euler]
        .into_iter()
        .map(Tracker::finish)
        .collect();
    let passed = checks.iter().all(|c| c.passed);
    ValidityReport {
        structure: s.label().to_string(),
        samples: count,
        checks,
        passed,
    }
}

/// [`verify_structure`] with points drawn from the structure's own domain.
pub fn verify_structure_seeded(s: &FinslerStructure, seed: u64, count: usize) -> ValidityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = s.dim();
    let domain = s.domain().clone();
    let mut sampler = move || {
        let x = domain.sample(n, &mut rng);
        let y = sample_fiber(n, &mut rng);
        (x, y)
    };
    verify_structure(s, &mut sampler, count, ValidityTolerances::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn euclidean_metric_is_identity() {
        let s = catalog::euclidean(2);
        let m = fundamental_tensor(&s, &[0.3, -2.0], &[1.0, 2.5]).unwrap();
        assert!((&m.g - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!((&m.g_inv - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn zero_fiber_is_singular() {
        let s = catalog::euclidean(2);
        assert!(matches!(
            fundamental_tensor(&s, &[0.0, 0.0], &[0.0, 0.0]),
            Err(FinslerError::SingularEvaluation(_))
        ));
    }

    #[test]
    fn sphere_polar_at_equator() {
        let s = catalog::sphere_polar(1.0, 2).unwrap().structure;
        let m = fundamental_tensor(&s, &[std::f64::consts::FRAC_PI_2, 0.4], &[0.0, 1.0]).unwrap();
        assert!((&m.g - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn pond_fundamental_tensor_and_inner_product() {
        let s = catalog::pond();
        let m = fundamental_tensor(&s, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((m.f_value - 1.5).abs() < 1e-14);
        assert!((m.inner(&[0.0, 1.0], &[0.0, 1.0]) - 2.25).abs() < 1e-12);
        let gi = g_inner(&s, &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!((gi - 2.25).abs() < 1e-12);
        assert!(m.euler_residual < 1e-12);
    }

    #[test]
    fn g_inner_is_dot_product_for_euclidean() {
        let s = catalog::euclidean(3);
        let v = g_inner(&s, &[0.0; 3], &[1.0, 0.0, 0.0], &[1.0, 2.0, 3.0], &[-1.0, 0.5, 2.0]).unwrap();
        assert!((v - 6.0).abs() < 1e-14);
    }

    #[test]
    fn riemannian_cartan_tensor_vanishes() {
        let s = catalog::sphere_polar(1.0, 3).unwrap().structure;
        let c = cartan_tensor(&s, &[1.0, 0.8, 0.3], &[0.4, -1.0, 2.0]).unwrap();
        assert!(c.c.max_abs() < 1e-10);
    }

    #[test]
    fn cartan_contraction_vanishes() {
        let s = catalog::pond();
        let (x, y) = ([0.7, -1.1], [1.0, 1.0]);
        let c = cartan_tensor(&s, &x, &y).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let v: f64 = (0..2).map(|i| c.c.get(i, j, k) * y[i]).sum();
                assert!(v.abs() < 1e-8, "{v}");
            }
        }
        assert!(c.c.max_abs() > 1e-3, "pond metric is not Riemannian");
    }

    #[test]
    fn degenerate_metric_names_eigenvalue() {
        // F² = y1² - y2² style indefinite form
        let f = (crate::dsl::Expr::y(1).powi(2) - 0.5 * crate::dsl::Expr::y(2).powi(2)).sqrt();
        let s = FinslerStructure::from_expr("indefinite", 2, f, crate::structure::Domain::Everywhere).unwrap();
        match fundamental_tensor(&s, &[0.0, 0.0], &[1.0, 0.1]) {
            Err(FinslerError::MetricDegeneracy { eigenvalue, .. }) => {
                assert!((eigenvalue + 0.5).abs() < 1e-12)
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn verify_euclidean_is_clean() {
        let r = verify_structure_seeded(&catalog::euclidean(2), 42, 200);
        assert!(r.passed);
        assert!(r.check("homogeneity").unwrap().worst < 1e-10);
        assert!(r.check("euler_identity").unwrap().worst < 1e-10);
    }

    #[test]
    fn verify_pond_on_valid_disk() {
        let r = verify_structure_seeded(&catalog::pond(), 42, 500);
        assert!(r.passed, "{r:#?}");
        for c in &r.checks {
            if c.name != "positivity" && c.name != "positive_definiteness" {
                assert!(c.worst < 1e-7, "{}: {}", c.name, c.worst);
            }
        }
    }

    #[test]
    fn verify_pond_on_oversized_disk_fails() {
        let s = catalog::pond_unchecked(3.5 * 3.5);
        let r = verify_structure_seeded(&s, 42, 500);
        assert!(!r.passed);
        let pd = r.check("positive_definiteness").unwrap();
        assert!(!pd.passed);
        let w = pd.witness.as_ref().unwrap();
        assert!(w.x[0] * w.x[0] + w.x[1] * w.x[1] > 9.0);
    }
}
