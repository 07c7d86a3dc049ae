//! Finsler structures on a coordinate chart.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcalc::{Jet, JetSpace, ScalarField};
use crate::dsl::{ChartExpr, Expr};
use crate::error::{FinslerError, Result};

/// Open region of the base chart on which a structure is declared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Everywhere,
    /// `|x - center|² < radius_sq`; an empty center means the origin.
    Ball {
        #[serde(default)]
        center: Vec<f64>,
        radius_sq: f64,
    },
    /// Open box; `None` bounds are unbounded.
    Box {
        lo: Vec<Option<f64>>,
        hi: Vec<Option<f64>>,
    },
}

/// Half-width used to sample unbounded coordinates.
const UNBOUNDED_SAMPLE_HALF_WIDTH: f64 = 2.0;
/// Fraction of a bounded interval kept clear of each end when sampling a box.
const BOX_SAMPLE_MARGIN: f64 = 0.1;

impl Domain {
    pub fn ball(radius_sq: f64) -> Self {
        Domain::Ball {
            center: Vec::new(),
            radius_sq,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Everywhere => true,
            Domain::Ball { center, radius_sq } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let c = center.get(i).copied().unwrap_or(0.0);
                        (v - c) * (v - c)
                    })
                    .sum();
                r2 < *radius_sq
            }
            Domain::Box { lo, hi } => x.iter().enumerate().all(|(i, &v)| {
                let above = lo.get(i).copied().flatten().map_or(true, |l| v > l);
                let below = hi.get(i).copied().flatten().map_or(true, |h| v < h);
                above && below
            }),
        }
    }

    /// Draw a base point for property sampling.
    ///
    /// Balls are sampled uniformly; boxes keep a margin from finite faces so
    /// that polar-type charts are not sampled at their coordinate singularities.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::Everywhere => (0..n)
                .map(|_| rng.gen_range(-UNBOUNDED_SAMPLE_HALF_WIDTH..UNBOUNDED_SAMPLE_HALF_WIDTH))
                .collect(),
            Domain::Ball { center, radius_sq } => {
                let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let u: f64 = rng.gen();
                let r = radius_sq.sqrt() * u.powf(1.0 / n as f64);
                dir.iter()
                    .enumerate()
                    .map(|(i, d)| center.get(i).copied().unwrap_or(0.0) + r * d / norm)
                    .collect()
            }
            Domain::Box { .. } => {
                let (lo, hi) = self.sampling_box(n);
                (0..n).map(|i| rng.gen_range(lo[i]..hi[i])).collect()
            }
        }
    }

    /// Finite box used for sampling and rejection.
    pub fn sampling_box(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let w = UNBOUNDED_SAMPLE_HALF_WIDTH;
        match self {
            Domain::Everywhere => (vec![-w; n], vec![w; n]),
            Domain::Ball { center, radius_sq } => {
                let r = radius_sq.sqrt();
                let c = |i: usize| center.get(i).copied().unwrap_or(0.0);
                ((0..n).map(|i| c(i) - r).collect(), (0..n).map(|i| c(i) + r).collect())
            }
            Domain::Box { lo, hi } => {
                let mut l = Vec::with_capacity(n);
                let mut h = Vec::with_capacity(n);
                for i in 0..n {
                    let a = lo.get(i).copied().flatten();
                    let b = hi.get(i).copied().flatten();
                    let (a, b) = match (a, b) {
                        (Some(a), Some(b)) => {
                            let m = BOX_SAMPLE_MARGIN * (b - a);
                            (a + m, b - m)
                        }
                        (Some(a), None) => (a + BOX_SAMPLE_MARGIN, a + 2.0 * w),
                        (None, Some(b)) => (b - 2.0 * w, b - BOX_SAMPLE_MARGIN),
                        (None, None) => (-w, w),
                    };
                    l.push(a);
                    h.push(b);
                }
                (l, h)
            }
        }
    }
}

/// Random nonzero fiber vector with a log-uniform length in `[0.2, 5]`.
pub fn sample_fiber<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let len = (rng.gen_range(0.2f64.ln()..5.0f64.ln())).exp();
    dir.iter().map(|d| len * d / norm).collect()
}

/// A Finsler function `F(x, y)` on an `n`-dimensional chart.
#[derive(Clone)]
pub struct FinslerStructure {
    n: usize,
    label: String,
    norm: Arc<dyn ScalarField>,
    expr: Option<Expr>,
    domain: Domain,
}

impl fmt::Debug for FinslerStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinslerStructure")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish()
    }
}

impl FinslerStructure {
    /// Structure whose norm is the chart expression `f` over `x1..xn, y1..yn`.
    pub fn from_expr(label: impl Into<String>, n: usize, f: Expr, domain: Domain) -> Result<Self> {
        if n == 0 {
            return Err(FinslerError::InvalidParameter("dimension must be positive".into()));
        }
        let usage = f.usage();
        if usage.uses_s {
            return Err(FinslerError::InvalidParameter(
                "a Finsler function cannot use the profile variable s".into(),
            ));
        }
        if usage.max_base > n || usage.max_fiber > n {
            return Err(FinslerError::Dimension {
                expected: n,
                got: usage.max_base.max(usage.max_fiber),
            });
        }
        Ok(FinslerStructure {
            n,
            label: label.into(),
            norm: Arc::new(ChartExpr { expr: f.clone(), n }),
            expr: Some(f),
            domain,
        })
    }

    /// Structure backed by an arbitrary chart field of arity `2n`.
    pub fn from_field(label: impl Into<String>, n: usize, field: Arc<dyn ScalarField>, domain: Domain) -> Result<Self> {
        if field.arity() != 2 * n {
            return Err(FinslerError::Dimension {
                expected: 2 * n,
                got: field.arity(),
            });
        }
        Ok(FinslerStructure {
            n,
            label: label.into(),
            norm: field,
            expr: None,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && self.domain.contains(x)
    }

    pub(crate) fn check_base(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(FinslerError::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(FinslerError::Domain {
                what: self.label.clone(),
                point: x.to_vec(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_fiber(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n {
            return Err(FinslerError::Dimension {
                expected: self.n,
                got: y.len(),
            });
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(FinslerError::SingularEvaluation(
                "F is not differentiable at the zero vector".into(),
            ));
        }
        Ok(())
    }

    /// `F(x, y)` without domain checks.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(2 * self.n);
        z.extend_from_slice(x);
        z.extend_from_slice(y);
        self.norm.eval(&z)
    }

    /// `F(x, y)` with domain and fiber checks.
    pub fn norm(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_base(x)?;
        if y.len() != self.n {
            return Err(FinslerError::Dimension {
                expected: self.n,
                got: y.len(),
            });
        }
        let v = self.eval(x, y);
        if !v.is_finite() {
            return Err(FinslerError::SingularEvaluation(format!(
                "F is not finite at x={x:?}, y={y:?}"
            )));
        }
        Ok(v)
    }

    /// Jet of `F²` seeded along the given chart directions (indices into
    /// `(x1..xn, y1..yn)`).
    pub fn f2_jet(&self, x: &[f64], y: &[f64], seeds: &[usize], order: usize) -> Jet {
        let space = JetSpace::get(seeds.len(), order);
        let z: Vec<Jet> = x
            .iter()
            .chain(y.iter())
            .enumerate()
            .map(|(i, &v)| match seeds.iter().position(|&s| s == i) {
                Some(k) => Jet::variable(&space, k, v),
                None => Jet::constant(&space, v),
            })
            .collect();
        let f = self.norm.eval_jet(&z);
        &f * &f
    }

    /// `count` tangent vectors `(x, y)` drawn sequentially from one seeded stream.
    pub fn sample_tangents(&self, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = self.domain.sample(self.n, &mut rng);
                let y = sample_fiber(self.n, &mut rng);
                (x, y)
            })
            .collect()
    }

    /// `count` flags `(x, y, X)`; the edge is drawn like a fiber vector.
    pub fn sample_flags(&self, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = self.domain.sample(self.n, &mut rng);
                let y = sample_fiber(self.n, &mut rng);
                let edge = sample_fiber(self.n, &mut rng);
                (x, y, edge)
            })
            .collect()
    }

    /// `F²` as a chart field, for use with [`crate::diffcalc::partial`].
    pub fn f_squared_field(&self) -> FSquared {
        FSquared {
            norm: self.norm.clone(),
            domain: self.domain.clone(),
            n: self.n,
        }
    }
}

/// `F²` viewed as a scalar field on the chart.
pub struct FSquared {
    norm: Arc<dyn ScalarField>,
    domain: Domain,
    n: usize,
}

impl ScalarField for FSquared {
    fn arity(&self) -> usize {
        self.norm.arity()
    }
    fn eval(&self, z: &[f64]) -> f64 {
        let f = self.norm.eval(z);
        f * f
    }
    fn eval_jet(&self, z: &[Jet]) -> Jet {
        let f = self.norm.eval_jet(z);
        &f * &f
    }
    fn contains(&self, z: &[f64]) -> bool {
        self.domain.contains(&z[..self.n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_sampling_stays_inside() {
        let d = Domain::ball(8.9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let p = d.sample(2, &mut rng);
            assert!(d.contains(&p));
        }
    }

    #[test]
    fn box_sampling_keeps_margin() {
        let d = Domain::Box {
            lo: vec![Some(0.0), None],
            hi: vec![Some(std::f64::consts::PI), None],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = d.sample(2, &mut rng);
            assert!(p[0] > 0.1 * std::f64::consts::PI && p[0] < 0.9 * std::f64::consts::PI);
            assert!(d.contains(&p));
        }
        assert!(!d.contains(&[0.0, 1.0]));
    }

    #[test]
    fn rejects_dimension_overflow() {
        let f = (Expr::y(1).powi(2) + Expr::y(3).powi(2)).sqrt();
        assert!(FinslerStructure::from_expr("bad", 2, f, Domain::Everywhere).is_err());
    }

    #[test]
    fn domain_json_shape() {
        let d: Domain = serde_json::from_str(r#"{"ball": {"radius_sq": 8.9}}"#).unwrap();
        assert_eq!(d, Domain::ball(8.9));
        let d: Domain = serde_json::from_str(r#""everywhere""#).unwrap();
        assert_eq!(d, Domain::Everywhere);
    }
}
