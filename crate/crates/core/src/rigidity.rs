//! Warped structures, special solutions of `ρ'' = −Kρ + B`, the Obata
//! residual and constant-curvature checks.
//!
//! A warped structure on the chart `(t, u2..un) = (x1, x2..xn)` has
//! `F² = y1² + w(t)² L(u, v)` where `w = ρ'` is the warp and `L` the square
//! of a level metric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::connections::{cartan_connection, constant_curvature_scan, contracted_curvature};
use crate::diffcalc::{seeded_jet, ScalarField};
use crate::dsl::{parse_profile, BaseExpr, ChartExpr, Env, Expr, Func};
use crate::error::{FinslerError, Result};
use crate::geodesics::{integrate_geodesic, Integrator};
use crate::structure::{Domain, FinslerStructure};
use crate::tensors::{cartan_tensor, fundamental_tensor};
use crate::transnormal::{classify_by_critical_points, finsler_gradient, Topology, TransnormalProfile};

/// Closed-form solution of `ρ'' + Kρ = B` with `ρ(0) = rho0`, `ρ'(0) = drho0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialSolution {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub rho0: f64,
    pub drho0: f64,
}

pub fn special_solution(k: f64, b: f64, rho0: f64, drho0: f64) -> SpecialSolution {
    SpecialSolution { k, b, rho0, drho0 }
}

impl SpecialSolution {
    /// `[ρ, ρ', ρ'', ρ''']` at `t`.
    pub fn eval(&self, t: f64) -> [f64; 4] {
        let SpecialSolution { k, b, rho0, drho0 } = *self;
        if k > 0.0 {
            let w = k.sqrt();
            let (a1, b1) = (rho0 - b / k, drho0 / w);
            let (s, c) = (w * t).sin_cos();
            let p = a1 * c + b1 * s;
            let q = -a1 * s + b1 * c;
            [b / k + p, w * q, -w * w * p, -w * w * w * q]
        } else if k < 0.0 {
            let m = (-k).sqrt();
            let (a1, b1) = (rho0 - b / k, drho0 / m);
            let (s, c) = ((m * t).sinh(), (m * t).cosh());
            let p = a1 * c + b1 * s;
            let q = a1 * s + b1 * c;
            [b / k + p, m * q, m * m * p, m * m * m * q]
        } else {
            [rho0 + drho0 * t + 0.5 * b * t * t, drho0 + b * t, b, 0.0]
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.eval(t)[0]
    }

    /// `|ρ'' + Kρ − B|` at `t`.
    pub fn residual(&self, t: f64) -> f64 {
        let [r, _, r2, _] = self.eval(t);
        (r2 + self.k * r - self.b).abs()
    }

    /// Zeros of `ρ'` in `[t0, t1]`, ascending.
    pub fn critical_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let SpecialSolution { k, b, rho0, drho0 } = *self;
        let mut out = Vec::new();
        if k > 0.0 {
            let w = k.sqrt();
            let (a1, b1) = (rho0 - b / k, drho0 / w);
            if a1 == 0.0 && b1 == 0.0 {
                return out;
            }
            // ρ' ∝ sin(ψ − ωt) with (a1, b1) ∝ (cos ψ, sin ψ).
            let psi = b1.atan2(a1);
            let period = std::f64::consts::PI;
            let k_lo = ((w * t0 - psi) / period).ceil() as i64;
            let k_hi = ((w * t1 - psi) / period).floor() as i64;
            for j in k_lo..=k_hi {
                out.push((psi + j as f64 * period) / w);
            }
        } else if k < 0.0 {
            let m = (-k).sqrt();
            let a1 = rho0 - b / k;
            let b1 = drho0 / m;
            if a1 != 0.0 && (b1 / a1).abs() < 1.0 {
                let t = (-b1 / a1).atanh() / m;
                if (t0..=t1).contains(&t) {
                    out.push(t);
                }
            }
        } else if b != 0.0 {
            let t = -drho0 / b;
            if (t0..=t1).contains(&t) {
                out.push(t);
            }
        }
        out
    }
}

/// Constant-curvature metrics on the level coordinates `x_k..x_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum LevelMetric {
    /// `Σ v_k²`.
    Flat,
    /// Polar chart of the round sphere of curvature `c²`:
    /// `L_k = v_k² + sin²(c u_k) L_{k+1}`, `L_n = v_n²`.
    Round { c: f64 },
    /// Hyperbolic space of curvature −1: `v_k² + sinh²(u_k) · Round{1}`.
    Hyperbolic,
}

impl LevelMetric {
    pub fn curvature(&self) -> f64 {
        match self {
            LevelMetric::Flat => 0.0,
            LevelMetric::Round { c } => c * c,
            LevelMetric::Hyperbolic => -1.0,
        }
    }

    /// `L` over chart coordinates `start..=n` (1-based).
    pub fn expr(&self, start: usize, n: usize) -> Expr {
        debug_assert!(start <= n);
        let sq = |e: Expr| e.powi(2);
        match *self {
            LevelMetric::Flat => (start..=n)
                .map(|k| sq(Expr::y(k)))
                .reduce(|a, b| a + b)
                .expect("non-empty level"),
            LevelMetric::Round { c } => {
                let mut acc = sq(Expr::y(n));
                for k in (start..n).rev() {
                    let arg = if c == 1.0 {
                        Expr::x(k)
                    } else {
                        Expr::num(c) * Expr::x(k)
                    };
                    acc = sq(Expr::y(k)) + sq(arg.sin()) * acc;
                }
                acc
            }
            LevelMetric::Hyperbolic => {
                if start == n {
                    return sq(Expr::y(n));
                }
                let inner = LevelMetric::Round { c: 1.0 }.expr(start + 1, n);
                sq(Expr::y(start)) + sq(Expr::call(Func::Sinh, Expr::x(start))) * inner
            }
        }
    }

    /// Open coordinate bounds for `start..=n`.
    pub fn bounds(&self, start: usize, n: usize) -> Vec<(Option<f64>, Option<f64>)> {
        let pi = std::f64::consts::PI;
        (start..=n)
            .map(|k| match *self {
                LevelMetric::Flat => (None, None),
                _ if k == n => (None, None),
                LevelMetric::Round { c } => (Some(0.0), Some(pi / c)),
                LevelMetric::Hyperbolic if k == start => (Some(0.0), None),
                LevelMetric::Hyperbolic => (Some(0.0), Some(pi)),
            })
            .collect()
    }
}

/// `F² = y1² + w(x1)² L` with its ingredients.
#[derive(Debug, Clone)]
pub struct WarpedStructure {
    pub n: usize,
    /// `w = ρ'` as an expression in `t` (= `x1`).
    pub warp: Expr,
    pub level: LevelMetric,
    pub t_range: (f64, f64),
    pub structure: FinslerStructure,
}

/// Probes of the open `t` interval when checking the warp sign.
const WARP_PROBES: usize = 200;
/// Stand-in length for a half-infinite `t` interval when probing.
const UNBOUNDED_PROBE: f64 = 10.0;

impl WarpedStructure {
    pub fn warp_at(&self, t: f64) -> f64 {
        BaseExpr {
            expr: self.warp.clone(),
            n: 1,
        }
        .eval(&[t])
    }

    /// Level metric `L` as a chart expression.
    pub fn level_expr(&self) -> Expr {
        self.level.expr(2, self.n)
    }
}

/// Assemble a warped structure; the warp must depend on `t` only and be
/// positive on the open interval `t_range`.
pub fn build_warped(
    label: &str,
    n: usize,
    warp: Expr,
    level: LevelMetric,
    t_range: (f64, f64),
) -> Result<WarpedStructure> {
    if n < 2 {
        return Err(FinslerError::InvalidParameter(format!(
            "warped structures need n >= 2, got {n}"
        )));
    }
    let u = warp.usage();
    if u.max_base > 1 || u.max_fiber > 0 || u.uses_s {
        return Err(FinslerError::Construction(format!(
            "warp '{warp}' must be a function of t alone"
        )));
    }
    if let LevelMetric::Round { c } = level {
        if !(c > 0.0 && c.is_finite()) {
            return Err(FinslerError::InvalidParameter(format!("level curvature scale c = {c}")));
        }
    }
    let (lo, hi) = t_range;
    if !(lo < hi) {
        return Err(FinslerError::InvalidParameter(format!("empty t range ({lo}, {hi})")));
    }
    let (plo, phi) = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => (lo, lo + UNBOUNDED_PROBE),
        (false, true) => (hi - UNBOUNDED_PROBE, hi),
        (false, false) => (-UNBOUNDED_PROBE, UNBOUNDED_PROBE),
    };
    let w = BaseExpr {
        expr: warp.clone(),
        n: 1,
    };
    for k in 1..WARP_PROBES {
        let t = plo + (phi - plo) * k as f64 / WARP_PROBES as f64;
        let v = w.eval(&[t]);
        if !(v > 0.0) {
            return Err(FinslerError::Construction(format!(
                "warp '{warp}' is not positive at t = {t} (value {v})"
            )));
        }
    }
    let level_expr = level.expr(2, n);
    let f = (Expr::y(1).powi(2) + warp.clone().powi(2) * level_expr).sqrt();
    let finite = |v: f64| v.is_finite().then_some(v);
    let mut lo_b = vec![finite(lo)];
    let mut hi_b = vec![finite(hi)];
    for (l, h) in level.bounds(2, n) {
        lo_b.push(l);
        hi_b.push(h);
    }
    let domain = if lo_b.iter().chain(&hi_b).all(Option::is_none) {
        Domain::Everywhere
    } else {
        Domain::Box { lo: lo_b, hi: hi_b }
    };
    let structure = FinslerStructure::from_expr(label, n, f, domain)?;
    Ok(WarpedStructure {
        n,
        warp,
        level,
        t_range,
        structure,
    })
}

/// `dt² + sin²(Ct) · level` on `t ∈ (0, π/C)`.
pub fn build_sphere_polar(c: f64, n: usize, level: LevelMetric) -> Result<WarpedStructure> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(FinslerError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let arg = if c == 1.0 {
        Expr::x(1)
    } else {
        Expr::num(c) * Expr::x(1)
    };
    build_warped("sphere-polar", n, arg.sin(), level, (0.0, std::f64::consts::PI / c))
}

/// `ρ`, `∂ρ` and `∂²ρ` at a base point.
fn base_derivatives(rho: &dyn ScalarField, x: &[f64]) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    let n = x.len();
    let seeds: Vec<usize> = (0..n).collect();
    let jet = seeded_jet(rho, x, &seeds, 2)?;
    let d1 = (0..n).map(|i| jet.first(i)).collect();
    let d2 = DMatrix::from_fn(n, n, |i, j| jet.partial_along(&[i, j]));
    Ok((jet.value(), d1, d2))
}

/// `∇_j∇_iρ = ∂_i∂_jρ − ∂_sρ Γˢ_ij` together with `g` and `ρ(x)`.
pub fn horizontal_hessian(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    x: &[f64],
    y: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    if rho.arity() != s.dim() {
        return Err(FinslerError::Dimension {
            expected: s.dim(),
            got: rho.arity(),
        });
    }
    let conn = cartan_connection(s, x, y)?;
    let (value, d1, d2) = base_derivatives(rho, x)?;
    let n = s.dim();
    let h = DMatrix::from_fn(n, n, |i, j| {
        d2[(i, j)] - (0..n).map(|k| d1[k] * conn.gamma.get(k, i, j)).sum::<f64>()
    });
    let g = fundamental_tensor(s, x, y)?.g;
    Ok((h, g, value))
}

/// `∇ᴴ∇ᴴρ + C²ρ g` at `(x, y)`.
pub fn obata_tensor_residual(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    c: f64,
    x: &[f64],
    y: &[f64],
) -> Result<DMatrix<f64>> {
    let (h, g, value) = horizontal_hessian(s, rho, x, y)?;
    Ok(h + g * (c * c * value))
}

/// `∇ᴴ∇ᴴρ − φ(ρ) g` at `(x, y)` for `φ` an expression in `s`.
pub fn phi_tensor_residual(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    phi: &Expr,
    x: &[f64],
    y: &[f64],
) -> Result<DMatrix<f64>> {
    let u = phi.usage();
    if u.max_base > 0 || u.max_fiber > 0 {
        return Err(FinslerError::InvalidParameter(format!(
            "phi '{phi}' must be a function of s only"
        )));
    }
    let (h, g, value) = horizontal_hessian(s, rho, x, y)?;
    let phi_val = phi.eval(&Env::profile(&value));
    Ok(h - g * phi_val)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KFormReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub samples: usize,
    /// `max |Rⁱ_k − K(F²δⁱ_k − yⁱ y_k)|`.
    pub max_deviation: f64,
    /// Same, divided by `F²` at each sample.
    pub max_relative: f64,
    pub witness: Option<SampleWitness>,
    pub failures: usize,
}

/// Compare `Rⁱ_k` with the constant-curvature model `K(F²δⁱ_k − yⁱ y_k)`.
pub fn k_form_check(s: &FinslerStructure, k: f64, samples: usize, seed: u64) -> KFormReport {
    let mut report = KFormReport {
        k,
        samples,
        max_deviation: 0.0,
        max_relative: 0.0,
        witness: None,
        failures: 0,
    };
    for (x, y) in s.sample_tangents(samples, seed) {
        let Ok(cv) = contracted_curvature(s, &x, &y) else {
            report.failures += 1;
            continue;
        };
        let n = s.dim();
        let yl = &cv.g * nalgebra::DVector::from_column_slice(&y);
        let model = DMatrix::from_fn(n, n, |i, j| {
            let delta = if i == j { cv.f_squared } else { 0.0 };
            k * (delta - y[i] * yl[j])
        });
        let dev = (&cv.r_jac - model).amax();
        if !dev.is_finite() {
            report.failures += 1;
            continue;
        }
        report.max_relative = report.max_relative.max(dev / cv.f_squared);
        if dev > report.max_deviation || report.witness.is_none() {
            report.max_deviation = report.max_deviation.max(dev);
            report.witness = Some(SampleWitness { x, y, value: dev });
        }
    }
    report
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// 1-based `(i, j)`.
    pub entry: (usize, usize),
    pub value: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub samples: usize,
    /// `max(|g₁₁ − 1|, |g₁β|)`.
    pub radial_defect: f64,
    /// `max |g_αβ − w² f_αβ|`.
    pub level_defect: f64,
    pub passed: bool,
    pub witness: Option<BlockWitness>,
}

pub const BLOCK_RADIAL_TOLERANCE: f64 = 1e-10;
pub const BLOCK_LEVEL_TOLERANCE: f64 = 1e-8;

/// Check `g₁₁ = 1`, `g₁β = 0` and `g_αβ = w² f_αβ` at sampled tangent vectors.
pub fn adapted_block_check(w: &WarpedStructure, samples: usize, seed: u64) -> Result<BlockReport> {
    let s = &w.structure;
    let n = w.n;
    let level = ChartExpr {
        expr: w.level_expr(),
        n,
    };
    let mut radial_defect: f64 = 0.0;
    let mut level_defect: f64 = 0.0;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (x, y) in s.sample_tangents(samples, seed) {
        let g = fundamental_tensor(s, &x, &y)?.g;
        let z: Vec<f64> = x.iter().chain(&y).copied().collect();
        let seeds: Vec<usize> = (n + 1..2 * n).collect();
        let lj = seeded_jet(&level, &z, &seeds, 2)?;
        let w2 = w.warp_at(x[0]).powi(2);
        for i in 0..n {
            for j in 0..n {
                let expected = match (i, j) {
                    (0, 0) => 1.0,
                    (0, _) | (_, 0) => 0.0,
                    _ => w2 * 0.5 * lj.partial_along(&[i - 1, j - 1]),
                };
                let dev = (g[(i, j)] - expected).abs();
                // Scale radial entries so both tolerances compare on one axis.
                let tol = if i == 0 || j == 0 {
                    radial_defect = radial_defect.max(dev);
                    BLOCK_RADIAL_TOLERANCE
                } else {
                    level_defect = level_defect.max(dev);
                    BLOCK_LEVEL_TOLERANCE
                };
                if dev / tol > worst {
                    worst = dev / tol;
                    witness = Some(BlockWitness {
                        x: x.clone(),
                        y: y.clone(),
                        entry: (i + 1, j + 1),
                        value: g[(i, j)],
                        expected,
                    });
                }
            }
        }
    }
    Ok(BlockReport {
        samples,
        radial_defect,
        level_defect,
        passed: radial_defect < BLOCK_RADIAL_TOLERANCE && level_defect < BLOCK_LEVEL_TOLERANCE,
        witness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicOdeReport {
    pub geodesics: usize,
    pub points: usize,
    pub max_residual: f64,
}

const ODE_T_MAX: f64 = 1.0;
const ODE_STRIDE: usize = 10;

/// Along unit-speed geodesics, finite-difference `(ρ∘γ)'' + C²(ρ∘γ)` for
/// `ρ = −cos(C x1)/C`.
pub fn along_geodesic_residual(s: &FinslerStructure, c: f64, geodesics: usize, seed: u64) -> Result<GeodesicOdeReport> {
    let rho = sphere_rho(c, s.dim())?;
    let tangents = s.sample_tangents(10 * geodesics.max(1), seed);
    let mut max_residual: f64 = 0.0;
    let mut points = 0;
    let mut done = 0;
    for (x, y) in tangents {
        if done == geodesics {
            break;
        }
        let f = s.norm(&x, &y)?;
        let v: Vec<f64> = y.iter().map(|c| c / f).collect();
        let Ok(path) = integrate_geodesic(s, &x, &v, ODE_T_MAX, Integrator::default()) else {
            continue;
        };
        let xs = &path.samples;
        if xs.len() < 2 * ODE_STRIDE + 1 {
            continue;
        }
        let vals: Vec<f64> = xs.iter().map(|p| rho.eval(&p.x)).collect();
        let mut i = ODE_STRIDE;
        while i + ODE_STRIDE < xs.len() {
            let h1 = xs[i].t - xs[i - ODE_STRIDE].t;
            let h2 = xs[i + ODE_STRIDE].t - xs[i].t;
            if (h1 - h2).abs() < 1e-12 {
                let second = (vals[i + ODE_STRIDE] - 2.0 * vals[i] + vals[i - ODE_STRIDE]) / (h1 * h1);
                max_residual = max_residual.max((second + c * c * vals[i]).abs());
                points += 1;
            }
            i += ODE_STRIDE;
        }
        done += 1;
    }
    Ok(GeodesicOdeReport {
        geodesics: done,
        points,
        max_residual,
    })
}

/// Largest Cartan tensor component along a geodesic from `(x, y)`.
pub fn cartan_along_geodesic(s: &FinslerStructure, x: &[f64], y: &[f64], t_max: f64) -> Result<f64> {
    let path = integrate_geodesic(s, x, y, t_max, Integrator::default())?;
    let mut worst: f64 = 0.0;
    for p in path.samples.iter().step_by(50) {
        worst = worst.max(cartan_tensor(s, &p.x, &p.v)?.c.max_abs());
    }
    Ok(worst)
}

/// `ρ = −cos(C x1)/C` on an `n`-dimensional chart.
pub fn sphere_rho(c: f64, n: usize) -> Result<BaseExpr> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(FinslerError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let arg = if c == 1.0 {
        Expr::x(1)
    } else {
        Expr::num(c) * Expr::x(1)
    };
    Ok(BaseExpr {
        expr: -(arg.cos()) / Expr::num(c),
        n,
    })
}

/// `𝔟(s) = 1 − C²s²`, the transnormality function of [`sphere_rho`].
pub fn sphere_profile_expr(c: f64) -> Expr {
    parse_profile(&format!("1-{}*s^2", c * c)).expect("well-formed profile")
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub mean: f64,
    pub dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    pub structure: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    pub scan: ScanSummary,
    pub obata_residual_max: f64,
    pub profile_deviation: f64,
    pub classification: Option<Topology>,
    pub verdict: String,
    pub passed: bool,
}

pub const RIGIDITY_CURVATURE_TOLERANCE: f64 = 1e-4;
pub const OBATA_TOLERANCE: f64 = 2e-5;
pub const PROFILE_TOLERANCE: f64 = 1e-6;

/// Range of `−cos(Ct)/C` over the `x1` extent of the domain.
fn sphere_rho_range(s: &FinslerStructure, c: f64) -> (f64, f64) {
    let (lo, hi) = match s.domain() {
        Domain::Box { lo, hi } => (lo.first().copied().flatten(), hi.first().copied().flatten()),
        _ => (None, None),
    };
    let full = (-1.0 / c, 1.0 / c);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return full;
    };
    if hi - lo >= 2.0 * std::f64::consts::PI / c {
        return full;
    }
    let steps = 2000;
    let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=steps {
        let t = lo + (hi - lo) * k as f64 / steps as f64;
        let v = -(c * t).cos() / c;
        mn = mn.min(v);
        mx = mx.max(v);
    }
    (mn, mx)
}

/// Curvature scan, Obata residual, transnormality of `ρ = −cos(C x1)/C` and
/// critical-point classification, combined into one verdict.
pub fn rigidity_report(s: &FinslerStructure, c: f64, samples: usize, seed: u64) -> Result<RigidityReport> {
    let rho = sphere_rho(c, s.dim())?;
    let scan = constant_curvature_scan(s, samples, seed);
    let mut obata: f64 = 0.0;
    let mut profile_dev: f64 = 0.0;
    let profile_expr = sphere_profile_expr(c);
    let profile = TransnormalProfile::new(profile_expr, sphere_rho_range(s, c))?;
    for (x, y) in s.sample_tangents(samples, seed.wrapping_add(1)) {
        match obata_tensor_residual(s, &rho, c, &x, &y) {
            Ok(r) => obata = obata.max(r.amax()),
            Err(_) => obata = f64::INFINITY,
        }
        match finsler_gradient(s, &rho, &x) {
            Ok(g) => {
                let expected = profile.b_at(rho.eval(&x));
                profile_dev = profile_dev.max((g.b_hat() - expected).abs());
            }
            Err(FinslerError::CriticalPoint(_)) => {}
            Err(_) => profile_dev = f64::INFINITY,
        }
    }
    let classification = classify_by_critical_points(&profile).ok().map(|c| c.label);
    let k_target = c * c;
    let mut reasons = Vec::new();
    if !((scan.mean_k - k_target).abs() < RIGIDITY_CURVATURE_TOLERANCE) {
        reasons.push(format!("curvature {} != {}", scan.mean_k, k_target));
    }
    if !(scan.max_dev < RIGIDITY_CURVATURE_TOLERANCE) {
        reasons.push(format!("curvature spread {:e}", scan.max_dev));
    }
    if !(obata < OBATA_TOLERANCE) {
        reasons.push(format!("obata residual {obata:e}"));
    }
    if !(profile_dev < PROFILE_TOLERANCE) {
        reasons.push(format!("profile deviation {profile_dev:e}"));
    }
    if classification != Some(Topology::Sphere) {
        reasons.push(format!(
            "classification {}",
            classification.map_or("invalid", |t| t.label())
        ));
    }
    let passed = reasons.is_empty();
    let verdict = if passed {
        format!("finslerian-sphere: K={k_target}")
    } else {
        format!("fail: {}", reasons.join("; "))
    };
    Ok(RigidityReport {
        structure: s.label().to_string(),
        c,
        seed,
        scan: ScanSummary {
            mean: scan.mean_k,
            dev: scan.max_dev,
        },
        obata_residual_max: obata,
        profile_deviation: profile_dev,
        classification,
        verdict,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::dsl::parse;
    use std::f64::consts::PI;

    #[test]
    fn special_solution_examples() {
        let s = special_solution(1.0, 0.0, -1.0, 0.0);
        for t in [0.0, 0.4, 2.0, 5.5] {
            assert!((s.rho(t) + t.cos()).abs() < 1e-15);
        }
        let s = special_solution(0.0, 0.0, 2.0, -0.5);
        assert!((s.rho(3.0) - 0.5).abs() < 1e-15);
        let s = special_solution(4.0, 0.0, -0.5, 0.0);
        assert!((s.rho(0.7) + (1.4f64).cos() / 2.0).abs() < 1e-15);
        let crit = s.critical_times(0.0, PI / 2.0 + 1e-12);
        assert_eq!(crit.len(), 2);
        assert!(crit[0].abs() < 1e-15 && (crit[1] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn special_solution_derivatives_match_fd() {
        for (k, b) in [(2.0, 0.3), (-1.5, 1.0), (0.0, -0.7)] {
            let s = special_solution(k, b, 0.4, -0.2);
            let h = 1e-4;
            for t in [0.3, 1.1] {
                let [_, d1, d2, d3] = s.eval(t);
                let fd = |i: usize| (s.eval(t + h)[i] - s.eval(t - h)[i]) / (2.0 * h);
                assert!((fd(0) - d1).abs() < 1e-6);
                assert!((fd(1) - d2).abs() < 1e-6);
                assert!((fd(2) - d3).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hyperbolic_and_linear_critical_times() {
        // ρ = cosh t has its minimum at 0.
        let s = special_solution(-1.0, 0.0, 1.0, 0.0);
        assert_eq!(s.critical_times(-1.0, 1.0), vec![0.0]);
        let s = special_solution(0.0, 2.0, 0.0, -1.0);
        assert_eq!(s.critical_times(0.0, 1.0), vec![0.5]);
    }

    #[test]
    fn sphere_polar_formula() {
        let w = catalog::sphere_polar(1.0, 2).unwrap();
        let (t, a, b) = (0.8f64, 0.3, -1.7);
        let expected = (a * a + t.sin().powi(2) * b * b).sqrt();
        assert!((w.structure.eval(&[t, 0.4], &[a, b]) - expected).abs() < 1e-15);
    }

    #[test]
    fn level_metric_expressions() {
        assert_eq!(LevelMetric::Flat.expr(2, 3).to_string(), "y2^2+y3^2");
        assert_eq!(
            LevelMetric::Round { c: 1.0 }.expr(2, 3).to_string(),
            "y2^2+sin(x2)^2*y3^2"
        );
        assert_eq!(LevelMetric::Hyperbolic.expr(2, 2).to_string(), "y2^2");
    }

    #[test]
    fn non_positive_warp_rejected() {
        let warp = parse("cos(x1)", 1).unwrap();
        let r = build_warped("bad", 2, warp, LevelMetric::Flat, (0.0, PI));
        assert!(matches!(r, Err(FinslerError::Construction(_))));
        let warp = parse("x2", 2).unwrap();
        assert!(build_warped("bad", 2, warp, LevelMetric::Flat, (0.0, 1.0)).is_err());
    }

    #[test]
    fn obata_on_sphere_and_flat_controls() {
        let w = catalog::sphere_polar(1.0, 2).unwrap();
        let rho = sphere_rho(1.0, 2).unwrap();
        let r = obata_tensor_residual(&w.structure, &rho, 1.0, &[0.9, 0.2], &[0.3, 1.1]).unwrap();
        assert!(r.amax() < 1e-12, "{}", r.amax());

        let e = catalog::euclidean(2);
        let x1 = BaseExpr {
            expr: parse("x1", 2).unwrap(),
            n: 2,
        };
        let r = obata_tensor_residual(&e, &x1, 0.0, &[0.4, 1.0], &[1.0, 2.0]).unwrap();
        assert!(r.amax() < 1e-15);
        let half_sq = BaseExpr {
            expr: parse("(x1^2+x2^2)/2", 2).unwrap(),
            n: 2,
        };
        let r = phi_tensor_residual(&e, &half_sq, &parse_profile("1").unwrap(), &[0.4, 1.0], &[1.0, 2.0]).unwrap();
        assert!(r.amax() < 1e-8);
    }

    #[test]
    fn k_form_examples() {
        let r = k_form_check(&catalog::euclidean(3), 0.0, 20, 42);
        assert!(r.max_deviation < 1e-12 && r.failures == 0);
        let r = k_form_check(&catalog::sphere_polar(1.0, 2).unwrap().structure, 1.0, 50, 42);
        assert!(r.max_deviation < 1e-4, "{}", r.max_deviation);
        let r = k_form_check(&catalog::cosh_warp(3).unwrap().structure, -1.0, 30, 43);
        assert!(r.max_deviation < 1e-4, "{}", r.max_deviation);
    }

    #[test]
    fn block_form_and_negative_control() {
        for w in [catalog::sphere_polar(1.0, 3).unwrap(), catalog::cosh_warp(3).unwrap()] {
            let r = adapted_block_check(&w, 30, 42).unwrap();
            assert!(r.passed, "{} {:?}", w.structure.label(), r);
        }
        let mut w = catalog::sphere_polar(1.0, 2).unwrap();
        let f2 =
            Expr::y(1).powi(2) + Expr::num(0.05) * Expr::y(1) * Expr::y(2) + w.warp.clone().powi(2) * w.level_expr();
        w.structure = FinslerStructure::from_expr("perturbed", 2, f2.sqrt(), w.structure.domain().clone()).unwrap();
        let r = adapted_block_check(&w, 10, 42).unwrap();
        assert!(!r.passed);
        let wit = r.witness.unwrap();
        assert!(wit.entry.0 == 1 || wit.entry.1 == 1);
    }

    #[test]
    fn rigidity_verdicts() {
        let w = catalog::sphere_polar(2.0, 2).unwrap();
        let r = rigidity_report(&w.structure, 2.0, 60, 42).unwrap();
        assert!(r.passed, "{}", r.verdict);
        assert_eq!(r.verdict, "finslerian-sphere: K=4");
        let r = rigidity_report(&w.structure, 1.0, 30, 42).unwrap();
        assert!(!r.passed);
        let r = rigidity_report(&catalog::euclidean(2), 1.0, 30, 42).unwrap();
        assert!(r.verdict.starts_with("fail"));
    }

    #[test]
    fn riemannian_cartan_stays_zero() {
        let w = catalog::sphere_polar(1.0, 2).unwrap();
        let worst = cartan_along_geodesic(&w.structure, &[1.2, 0.0], &[0.3, 0.8], 1.0).unwrap();
        assert!(worst < 1e-10);
    }
}
