//! Randers metrics from Zermelo navigation data.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diffcalc::ScalarField;
use crate::dsl::{BaseExpr, Expr};
use crate::error::{FinslerError, Result};
use crate::structure::{Domain, FinslerStructure};

/// Number of interior points sampled when validating the wind.
const VALIDATION_SAMPLES: usize = 4000;
/// Directions probed just inside the boundary of a ball domain.
const BOUNDARY_DIRECTIONS: usize = 720;

/// Background metric `h` (constant), wind `W(x)` and domain.
#[derive(Debug, Clone)]
pub struct ZermeloData {
    pub n: usize,
    pub h: DMatrix<f64>,
    pub wind: Vec<Expr>,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaRange {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl ZermeloData {
    pub fn euclidean(wind: Vec<Expr>, domain: Domain) -> Self {
        let n = wind.len();
        ZermeloData {
            n,
            h: DMatrix::identity(n, n),
            wind,
            domain,
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.n == 0 || self.wind.len() != self.n {
            return Err(FinslerError::Dimension {
                expected: self.n,
                got: self.wind.len(),
            });
        }
        if self.h.nrows() != self.n || self.h.ncols() != self.n {
            return Err(FinslerError::Dimension {
                expected: self.n,
                got: self.h.nrows(),
            });
        }
        for w in &self.wind {
            let u = w.usage();
            if u.max_fiber > 0 || u.uses_s || u.max_base > self.n {
                return Err(FinslerError::Construction(format!(
                    "wind component '{w}' must be a function of x1..x{}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// `W(x)`.
    pub fn wind_at(&self, x: &[f64]) -> Vec<f64> {
        self.wind
            .iter()
            .map(|w| {
                BaseExpr {
                    expr: w.clone(),
                    n: self.n,
                }
                .eval(x)
            })
            .collect()
    }

    /// `λ(x) = 1 − h(W, W)`.
    pub fn lambda_at(&self, x: &[f64]) -> f64 {
        let w = nalgebra::DVector::from_vec(self.wind_at(x));
        1.0 - w.dot(&(&self.h * &w))
    }

    /// Validation points: uniform interior samples plus, for balls, a ring
    /// just inside the boundary.
    fn probe_points(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pts: Vec<Vec<f64>> = (0..VALIDATION_SAMPLES)
            .map(|_| self.domain.sample(self.n, &mut rng))
            .collect();
        if let Domain::Ball { center, radius_sq } = &self.domain {
            let r = radius_sq.sqrt() * (1.0 - 1e-9);
            let c = |i: usize| center.get(i).copied().unwrap_or(0.0);
            if self.n == 2 {
                for k in 0..BOUNDARY_DIRECTIONS {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / BOUNDARY_DIRECTIONS as f64;
                    pts.push(vec![c(0) + r * a.cos(), c(1) + r * a.sin()]);
                }
            } else {
                for _ in 0..BOUNDARY_DIRECTIONS {
                    let p = Domain::ball(1.0).sample(self.n, &mut rng);
                    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                    pts.push((0..self.n).map(|i| c(i) + r * p[i] / norm).collect());
                }
            }
        }
        pts.retain(|p| self.domain.contains(p));
        pts
    }

    /// Range of `λ` over the validation points.
    pub fn lambda_range(&self) -> LambdaRange {
        let pts = self.probe_points();
        let (min, max) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let l = self.lambda_at(p);
            (lo.min(l), hi.max(l))
        });
        LambdaRange {
            min,
            max,
            samples: pts.len(),
        }
    }

    /// The Randers norm as an expression:
    /// `√((h(y,W)² + λ h(y,y))/λ²) − h(y,W)/λ`.
    pub fn randers_expr(&self) -> Expr {
        let n = self.n;
        let hw: Vec<Expr> = (0..n)
            .map(|j| {
                sum((0..n)
                    .filter(|&i| self.h[(i, j)] != 0.0)
                    .map(|i| scaled(self.h[(i, j)], self.wind[i].clone())))
            })
            .collect();
        let hyw = sum((0..n).map(|j| Expr::y(j + 1) * hw[j].clone()));
        let hyy = sum((0..n).flat_map(|i| {
            (0..n)
                .filter(move |&j| self.h[(i, j)] != 0.0)
                .map(move |j| scaled(self.h[(i, j)], Expr::y(i + 1) * Expr::y(j + 1)))
        }));
        let hww = sum((0..n).map(|i| self.wind[i].clone() * hw[i].clone()));
        let lambda = Expr::num(1.0) - hww;
        ((hyw.clone().powi(2) + lambda.clone() * hyy) / lambda.clone().powi(2)).sqrt() - hyw / lambda
    }
}

fn scaled(c: f64, e: Expr) -> Expr {
    if c == 1.0 {
        e
    } else {
        Expr::num(c) * e
    }
}

fn sum(terms: impl Iterator<Item = Expr>) -> Expr {
    terms.reduce(|a, b| a + b).unwrap_or(Expr::num(0.0))
}

/// Randers structure of the navigation data; fails if `h` is not positive
/// definite or `h(W, W) ≥ 1` at a sampled domain point.
pub fn randers_from_zermelo(z: &ZermeloData) -> Result<FinslerStructure> {
    z.check_shape()?;
    let eig = nalgebra::SymmetricEigen::new(z.h.clone()).eigenvalues;
    if eig.iter().any(|&e| !(e > 0.0)) {
        return Err(FinslerError::Construction(
            "background metric h is not positive definite".into(),
        ));
    }
    for p in z.probe_points() {
        let lambda = z.lambda_at(&p);
        if !(lambda > 0.0) {
            return Err(FinslerError::Construction(format!(
                "h(W,W) = {:.6} >= 1 at x = {p:?}: the wind is too strong on this domain",
                1.0 - lambda
            )));
        }
    }
    randers_unchecked(z)
}

/// Same closed form without the wind-strength validation.
pub fn randers_unchecked(z: &ZermeloData) -> Result<FinslerStructure> {
    z.check_shape()?;
    FinslerStructure::from_expr("randers", z.n, z.randers_expr(), z.domain.clone())
}
