//! Finsler gradients, transnormal functions and their wavefronts.
//!
//! The gradient of `ρ` at `x` is the Legendre dual of `dρ`: the vector `v`
//! with `g_v(v, ·) = dρ`. Since `g_v(v, ·) = ½ ∂F²/∂y (x, v)`, this is solved
//! by Newton iteration with Jacobian `g_v`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diffcalc::{seeded_jet, GenericField, Jet, JetSpace, ScalarField};
use crate::dsl::{Env, Expr, ProfileExpr};
use crate::error::{FinslerError, Result};
use crate::geodesics::{rk4_integrate, rk4_step, GeodesicPath, Integrator, Method, PathSample, DEFAULT_STEP};
use crate::quadrature;
use crate::structure::FinslerStructure;
use crate::tensors::checked_inverse;

const NEWTON_MAX_ITERATIONS: usize = 50;
/// Newton accepts a gradient once the Legendre residual is this small
/// relative to `‖dρ‖∞`.
const LEGENDRE_ACCEPT: f64 = 1e-8;
const LEGENDRE_TARGET: f64 = 1e-14;
/// Level projection tolerance on `|ρ − c|`.
const LEVEL_TOLERANCE: f64 = 1e-10;
/// Offset above a critical value at which arrival flows stop.
const CRITICAL_OFFSET: f64 = 1e-10;
/// Arrival flows stop once `|ρ − target|` is this small (relative).
const ARRIVAL_TOLERANCE: f64 = 1e-13;
/// Longest flow line followed when measuring arrival lengths.
/// Largest arc-length step of the arrival flow; RK4 error at this step is
/// far below the wavefront tolerances.
const ARRIVAL_STEP: f64 = 1e-2;
const MAX_FLOW_LENGTH: f64 = 100.0;

#[derive(Debug, Clone, Serialize)]
pub struct GradientValue {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    /// `dρ(x)`.
    pub covector: Vec<f64>,
    /// `F(x, grad ρ) = F*(dρ)`.
    pub multiplier: f64,
    /// `‖g_grad(grad, ·) − dρ‖∞`.
    pub residual: f64,
    pub iterations: usize,
}

impl GradientValue {
    /// `g_grad(grad, grad) = F(grad)²`, the transnormality function value.
    pub fn b_hat(&self) -> f64 {
        self.multiplier * self.multiplier
    }
}

/// `dρ(x)`.
pub fn differential(rho: &dyn ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    let seeds: Vec<usize> = (0..x.len()).collect();
    let jet = seeded_jet(rho, x, &seeds, 1)?;
    let d: Vec<f64> = (0..x.len()).map(|i| jet.first(i)).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(FinslerError::SingularEvaluation(format!("d rho not finite at {x:?}")));
    }
    Ok(d)
}

/// `(½ ∂F²/∂y, g)` at `(x, v)`.
fn legendre_map(s: &FinslerStructure, x: &[f64], v: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = s.dim();
    let seeds: Vec<usize> = (n..2 * n).collect();
    let jet = s.f2_jet(x, v, &seeds, 2);
    let p = DVector::from_fn(n, |k, _| 0.5 * jet.first(k));
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * jet.partial_along(&[i, j]));
    (p, g)
}

/// Solve `g_v(v, ·) = ω` for `v`.
pub fn legendre_inverse(s: &FinslerStructure, x: &[f64], omega: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
    let n = s.dim();
    let w = DVector::from_column_slice(omega);
    let scale = w.amax();
    if !(scale > 0.0) {
        return Err(FinslerError::CriticalPoint(x.to_vec()));
    }
    let (_, g0) = legendre_map(s, x, omega);
    let g0_inv = checked_inverse(&g0, x, omega)?;
    let mut v: DVector<f64> = g0_inv * &w;
    let residual_of = |v: &DVector<f64>| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        if v.iter().all(|c| *c == 0.0) || v.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let (p, g) = legendre_map(s, x, v.as_slice());
        let r = &p - &w;
        let norm = r.amax();
        norm.is_finite().then_some((norm, r, g))
    };
    let (mut res, mut r, mut g) = residual_of(&v)
        .ok_or_else(|| FinslerError::SingularEvaluation(format!("Legendre map undefined at x={x:?}")))?;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITERATIONS && res > LEGENDRE_TARGET * scale {
        iterations += 1;
        let Ok(g_inv) = checked_inverse(&g, x, v.as_slice()) else {
            break;
        };
        let step = g_inv * &r;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &v - &step * alpha;
            if let Some((cres, cr, cg)) = residual_of(&cand) {
                if cres < res {
                    accepted = Some((cand, cres, cr, cg));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, cres, cr, cg)) => {
                v = cand;
                res = cres;
                r = cr;
                g = cg;
            }
            None => break,
        }
    }
    if res > LEGENDRE_ACCEPT * scale {
        return Err(FinslerError::ConvergenceFailure {
            iterations,
            residual: res,
        });
    }
    Ok((v.iter().copied().collect::<Vec<_>>(), res, iterations)).map(|(v, res, it)| {
        debug_assert_eq!(v.len(), n);
        (v, res, it)
    })
}

/// Finsler gradient of `ρ` at `x`.
pub fn finsler_gradient(s: &FinslerStructure, rho: &dyn ScalarField, x: &[f64]) -> Result<GradientValue> {
    s.check_base(x)?;
    let d = differential(rho, x)?;
    if d.iter().all(|v| v.abs() < 1e-14) {
        return Err(FinslerError::CriticalPoint(x.to_vec()));
    }
    let (grad, residual, iterations) = legendre_inverse(s, x, &d)?;
    let multiplier = s.eval(x, &grad);
    Ok(GradientValue {
        x: x.to_vec(),
        grad,
        covector: d,
        multiplier,
        residual,
        iterations,
    })
}

/// `ρ`, its value range, and the transnormality function `𝔟(s)`.
#[derive(Debug, Clone)]
pub struct TransnormalProfile {
    pub rho: Option<Expr>,
    pub b: Expr,
    pub range: (f64, f64),
    /// Endpoints of the range at which `𝔟` vanishes.
    pub critical_values: Vec<f64>,
    /// A point where `ρ` attains the (single) critical value, if known.
    pub critical_point: Option<Vec<f64>>,
}

const ZERO_TOLERANCE: f64 = 1e-12;
const INTERIOR_PROBES: usize = 400;

impl TransnormalProfile {
    pub fn new(b: Expr, range: (f64, f64)) -> Result<Self> {
        let u = b.usage();
        if u.max_base > 0 || u.max_fiber > 0 {
            return Err(FinslerError::InvalidProfile(format!(
                "profile '{b}' must be a function of s only"
            )));
        }
        if !(range.0 < range.1) {
            return Err(FinslerError::InvalidProfile(format!(
                "empty range [{}, {}]",
                range.0, range.1
            )));
        }
        let mut p = TransnormalProfile {
            rho: None,
            b,
            range,
            critical_values: Vec::new(),
            critical_point: None,
        };
        let zero = ZERO_TOLERANCE * p.scale();
        p.critical_values = [range.0, range.1]
            .into_iter()
            .filter(|&e| p.b_at(e).abs() <= zero)
            .collect();
        Ok(p)
    }

    pub fn with_rho(mut self, rho: Expr) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_critical_point(mut self, o: Vec<f64>) -> Self {
        self.critical_point = Some(o);
        self
    }

    pub fn b_at(&self, s: f64) -> f64 {
        ProfileExpr { expr: self.b.clone() }.eval_generic(&[s])
    }

    pub fn b_prime(&self, s: f64) -> f64 {
        let space = JetSpace::get(1, 1);
        let sj = Jet::variable(&space, 0, s);
        self.b.eval(&Env::profile(&sj)).first(0)
    }

    fn scale(&self) -> f64 {
        let (a, c) = self.range;
        (0..=INTERIOR_PROBES)
            .map(|k| self.b_at(a + (c - a) * k as f64 / INTERIOR_PROBES as f64).abs())
            .fold(1.0, f64::max)
    }

    /// Error unless `𝔟 > 0` at interior probes of `(lo, hi)`.
    fn check_interior(&self, lo: f64, hi: f64) -> Result<()> {
        for k in 1..INTERIOR_PROBES {
            let s = lo + (hi - lo) * k as f64 / INTERIOR_PROBES as f64;
            let b = self.b_at(s);
            if !(b > 0.0) {
                return Err(FinslerError::InvalidProfile(format!(
                    "b({s}) = {b} is not positive inside ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Quadrature tolerance for wavefront radii.
const RADIUS_TOLERANCE: f64 = 1e-12;

/// `∫ₐᶜ ds/√𝔟(s)`, with `s = a + u²` (or `c − u²`) at a simple zero of `𝔟`.
pub fn wavefront_radius(profile: &TransnormalProfile, a: f64, c: f64) -> Result<f64> {
    if a == c {
        return Ok(0.0);
    }
    if c < a {
        return wavefront_radius(profile, c, a);
    }
    profile.check_interior(a, c)?;
    let zero = ZERO_TOLERANCE * profile.scale();
    let vanishes = |s: f64| profile.b_at(s).abs() <= zero;
    let (za, zc) = (vanishes(a), vanishes(c));
    if za && zc {
        let m = 0.5 * (a + c);
        return Ok(half_singular(profile, a, m, true)? + half_singular(profile, m, c, false)?);
    }
    if za {
        return half_singular(profile, a, c, true);
    }
    if zc {
        return half_singular(profile, a, c, false);
    }
    quadrature::integrate(&|s| 1.0 / profile.b_at(s).sqrt(), a, c, RADIUS_TOLERANCE)
}

/// Integral over `[a, c]` with the zero of `𝔟` at the left (`at_left`) or
/// right endpoint.
fn half_singular(profile: &TransnormalProfile, a: f64, c: f64, at_left: bool) -> Result<f64> {
    let end = if at_left { a } else { c };
    let slope = profile.b_prime(end);
    let outward = if at_left { slope } else { -slope };
    if !(outward > 0.0) {
        return Err(FinslerError::InvalidProfile(format!(
            "b vanishes to second order at s = {end}; the radius integral may diverge"
        )));
    }
    let u_max = (c - a).sqrt();
    let f = |u: f64| {
        let s = if at_left { a + u * u } else { c - u * u };
        2.0 * u / profile.b_at(s).sqrt()
    };
    quadrature::integrate(&f, 0.0, u_max, RADIUS_TOLERANCE)
}

/// Unit gradient field `grad ρ / F(grad ρ)`.
fn unit_gradient(s: &FinslerStructure, rho: &dyn ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    let g = finsler_gradient(s, rho, x)?;
    Ok(g.grad.iter().map(|c| c / g.multiplier).collect())
}

fn path_from_states(
    raw: Vec<(f64, Vec<f64>)>,
    velocity: impl Fn(&[f64]) -> Vec<f64>,
    step: f64,
    truncated: bool,
) -> GeodesicPath {
    let mut samples: Vec<PathSample> = raw
        .into_iter()
        .map(|(t, x)| {
            let v = velocity(&x);
            PathSample {
                t,
                a: vec![0.0; x.len()],
                x,
                v,
            }
        })
        .collect();
    let m = samples.len();
    if m > 1 {
        for i in 0..m {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(m - 1));
            let dt = samples[hi].t - samples[lo].t;
            if dt > 0.0 {
                let a: Vec<f64> = (0..samples[i].v.len())
                    .map(|k| (samples[hi].v[k] - samples[lo].v[k]) / dt)
                    .collect();
                samples[i].a = a;
            }
        }
    }
    GeodesicPath {
        samples,
        step,
        method: Method::Rk4,
        initial_speed: 1.0,
        speed_drift: 0.0,
        truncated,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralCurve {
    pub path: GeodesicPath,
    /// Geodesic with the same initial position and velocity.
    pub geodesic: Option<GeodesicPath>,
    /// Largest position difference to that geodesic at common times.
    pub max_geodesic_deviation: f64,
}

/// Integrate `ẋ = grad ρ / F(grad ρ)` from `x0` for arc length `t_max`.
pub fn integral_curve(s: &FinslerStructure, rho: &dyn ScalarField, x0: &[f64], t_max: f64) -> Result<IntegralCurve> {
    let v0 = unit_gradient(s, rho, x0)?;
    let rhs = |x: &[f64]| unit_gradient(s, rho, x);
    let valid = |x: &[f64]| s.contains(x);
    let (raw, truncated) = rk4_integrate(x0.to_vec(), t_max, DEFAULT_STEP, rhs, valid);
    let mut path = path_from_states(
        raw,
        |x| unit_gradient(s, rho, x).unwrap_or_else(|_| vec![f64::NAN; x.len()]),
        DEFAULT_STEP,
        truncated,
    );
    let speeds = path.samples.iter().map(|p| (s.eval(&p.x, &p.v) - 1.0).abs());
    path.speed_drift = speeds.fold(0.0, f64::max);
    let geodesic = crate::geodesics::integrate_geodesic(s, x0, &v0, t_max, Integrator::default()).ok();
    let max_geodesic_deviation = match &geodesic {
        Some(g) => path
            .samples
            .iter()
            .zip(&g.samples)
            .map(|(a, b)| a.x.iter().zip(&b.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max),
        None => f64::NAN,
    };
    Ok(IntegralCurve {
        path,
        geodesic,
        max_geodesic_deviation,
    })
}

/// Move `p` onto `ρ⁻¹(c)` by Newton steps along the gradient
/// (`x ← x + (c − ρ)/dρ(grad) · grad`), halving steps that leave the domain.
pub fn project_to_level(s: &FinslerStructure, rho: &dyn ScalarField, p: &[f64], c: f64) -> Option<Vec<f64>> {
    let tol = LEVEL_TOLERANCE * c.abs().max(1.0);
    let mut x = p.to_vec();
    for _ in 0..60 {
        let val = rho.eval(&x);
        if (val - c).abs() < tol {
            return Some(x);
        }
        let g = finsler_gradient(s, rho, &x).ok()?;
        let rate = g.b_hat();
        let mut t = (c - val) / rate;
        let mut moved = None;
        for _ in 0..30 {
            let cand: Vec<f64> = x.iter().zip(&g.grad).map(|(xi, gi)| xi + t * gi).collect();
            if s.contains(&cand) && (rho.eval(&cand) - c).abs() < (val - c).abs() {
                moved = Some(cand);
                break;
            }
            t *= 0.5;
        }
        x = moved?;
    }
    ((rho.eval(&x) - c).abs() < tol).then_some(x)
}

/// Up to `count` points of `ρ⁻¹(c)`, from seeded domain samples projected
/// onto the level.
pub fn sample_level(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    c: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(count);
    let max_attempts = 50 * count.max(1);
    for _ in 0..max_attempts {
        if out.len() == count {
            break;
        }
        let p = s.domain().sample(s.dim(), rng);
        if let Some(q) = project_to_level(s, rho, &p, c) {
            out.push(q);
        }
    }
    if out.is_empty() && count > 0 {
        return Err(FinslerError::EmptyLevel(c));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelStatistics {
    pub level: f64,
    pub samples: usize,
    pub mean_b: f64,
    pub min_b: f64,
    pub max_b: f64,
    /// `max_b − min_b`.
    pub spread: f64,
}

/// Sample each level set and evaluate `g(grad ρ, grad ρ)` there.
pub fn transnormality_test(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    levels: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<LevelStatistics>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(levels.len());
    for &c in levels {
        let pts = sample_level(s, rho, c, samples, &mut rng)?;
        let mut values = Vec::with_capacity(pts.len());
        for p in &pts {
            values.push(finsler_gradient(s, rho, p)?.b_hat());
        }
        let mean_b = values.iter().sum::<f64>() / values.len() as f64;
        let min_b = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max_b = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(LevelStatistics {
            level: c,
            samples: values.len(),
            mean_b,
            min_b,
            max_b,
            spread: max_b - min_b,
        });
    }
    Ok(out)
}

/// Arc length of the gradient flow line from `p` to the level `target`.
///
/// Flows forward along `grad ρ / F(grad ρ)` when `ρ(p) < target` and
/// backward otherwise; either way the elapsed parameter is the Finsler
/// length of the forward-oriented curve. When `center` is given, `target`
/// is a critical value attained at `center`: the flow stops slightly above
/// it and the short remaining segment is closed by `F(center, q − center)`.
pub fn arrival_length(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    p: &[f64],
    target: f64,
    center: Option<&[f64]>,
) -> Result<f64> {
    let start = rho.eval(p);
    let forward = start < target;
    let stop = match (center, forward) {
        (Some(_), true) => target - CRITICAL_OFFSET,
        (Some(_), false) => target + CRITICAL_OFFSET,
        (None, _) => target,
    };
    if (start - stop).abs() < LEVEL_TOLERANCE {
        return Ok(0.0);
    }
    let sign = if forward { 1.0 } else { -1.0 };
    let rhs = |x: &[f64]| -> Result<Vec<f64>> { Ok(unit_gradient(s, rho, x)?.iter().map(|c| sign * c).collect()) };
    let valid = |x: &[f64]| {
        if !s.contains(x) {
            return false;
        }
        let r = rho.eval(x);
        if forward {
            r <= stop
        } else {
            r >= stop
        }
    };
    // Steps are capped by the first-order arc length still needed,
    // `|ρ − stop| / F(grad ρ)`, so they never jump across the target level
    // or through a critical point.
    let tol = ARRIVAL_TOLERANCE * stop.abs().max(1.0);
    let mut x = p.to_vec();
    let mut t = 0.0;
    loop {
        let remaining = (rho.eval(&x) - stop).abs();
        if remaining <= tol {
            break;
        }
        let rate = finsler_gradient(s, rho, &x)?.multiplier;
        let mut h = ARRIVAL_STEP.min(remaining / rate);
        let next = loop {
            if let Some(next) = rk4_step(&x, h, &rhs, &valid) {
                break Some(next);
            }
            h *= 0.5;
            if h < 1e-15 {
                break None;
            }
        };
        let Some(next) = next else {
            return Err(FinslerError::Domain {
                what: format!("gradient flow towards level {target}"),
                point: x,
            });
        };
        x = next;
        t += h;
        if t > MAX_FLOW_LENGTH {
            return Err(FinslerError::Domain {
                what: format!("gradient flow towards level {target} (no arrival)"),
                point: x,
            });
        }
    }
    let q = x;
    let tail = match center {
        Some(o) => {
            let d: Vec<f64> = q.iter().zip(o).map(|(a, b)| a - b).collect();
            if d.iter().all(|v| *v == 0.0) {
                0.0
            } else {
                s.eval(o, &d)
            }
        }
        None => 0.0,
    };
    Ok(t + tail)
}

#[derive(Debug, Clone, Serialize)]
pub struct WavefrontSummary {
    pub level: f64,
    pub expected_radius: f64,
    pub measured_radius: f64,
    pub deviation: f64,
    pub samples: usize,
}

/// Compare `wavefront_radius(a, c)` with measured flow lengths from sampled
/// points of `ρ⁻¹(c)` back to the base level `a`.
///
/// `a` is the profile's critical value when the critical point is known,
/// otherwise the lower end of the range.
pub fn wavefront_check(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    profile: &TransnormalProfile,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<(WavefrontSummary, Vec<f64>)> {
    let (a, center) = match (&profile.critical_point, profile.critical_values.first()) {
        (Some(o), Some(&a)) => (a, Some(o.as_slice())),
        _ => (profile.range.0, None),
    };
    let expected = wavefront_radius(profile, a, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_level(s, rho, c, samples, &mut rng)?;
    let mut lengths = Vec::with_capacity(pts.len());
    for p in &pts {
        lengths.push(arrival_length(s, rho, p, a, center)?);
    }
    let measured = lengths.iter().sum::<f64>() / lengths.len() as f64;
    let deviation = lengths.iter().map(|l| (l - expected).abs()).fold(0.0, f64::max);
    Ok((
        WavefrontSummary {
            level: c,
            expected_radius: expected,
            measured_radius: measured,
            deviation,
            samples: lengths.len(),
        },
        lengths,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSphereReport {
    pub level: f64,
    pub expected_radius: f64,
    pub radii: Vec<f64>,
    pub max_deviation: f64,
}

/// Arrival lengths from the critical point to sampled points of `ρ⁻¹(c)`,
/// compared with `r_c = ∫ₐᶜ ds/√𝔟`.
pub fn level_sphere_check(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    profile: &TransnormalProfile,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<LevelSphereReport> {
    if profile.critical_values.len() != 1 || profile.critical_point.is_none() {
        return Err(FinslerError::InvalidProfile(
            "level sphere check needs exactly one critical value with a known critical point".into(),
        ));
    }
    let (summary, radii) = wavefront_check(s, rho, profile, c, samples, seed)?;
    Ok(LevelSphereReport {
        level: c,
        expected_radius: summary.expected_radius,
        max_deviation: summary.deviation,
        radii,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDerivativeReport {
    pub curves: usize,
    pub points: usize,
    pub max_residual: f64,
}

/// Finite-difference spacing (in samples) for `(ρ∘γ)''`.
const FD_STRIDE: usize = 10;

/// Along unit-speed gradient curves, compare `(ρ∘γ)''` with `½𝔟'(ρ)`.
pub fn rho_second_derivative_check(
    s: &FinslerStructure,
    rho: &dyn ScalarField,
    profile: &TransnormalProfile,
    curves: usize,
    seed: u64,
) -> Result<SecondDerivativeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual: f64 = 0.0;
    let mut points = 0;
    let mut done = 0;
    let mut attempts = 0;
    while done < curves && attempts < 50 * curves.max(1) {
        attempts += 1;
        let x0 = s.domain().sample(s.dim(), &mut rng);
        let Ok(curve) = integral_curve(s, rho, &x0, 0.5) else {
            continue;
        };
        let xs = &curve.path.samples;
        if xs.len() < 2 * FD_STRIDE + 1 {
            continue;
        }
        let h = xs[FD_STRIDE].t - xs[0].t;
        let vals: Vec<f64> = xs.iter().map(|p| rho.eval(&p.x)).collect();
        let mut i = FD_STRIDE;
        while i + FD_STRIDE < xs.len() {
            let uniform = ((xs[i + FD_STRIDE].t - xs[i].t) - h).abs() < 1e-12;
            if uniform {
                let second = (vals[i + FD_STRIDE] - 2.0 * vals[i] + vals[i - FD_STRIDE]) / (h * h);
                let expected = 0.5 * profile.b_prime(vals[i]);
                max_residual = max_residual.max((second - expected).abs());
                points += 1;
            }
            i += FD_STRIDE;
        }
        done += 1;
    }
    Ok(SecondDerivativeReport {
        curves: done,
        points,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Product,
    Euclidean,
    Sphere,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::Product => "product",
            Topology::Euclidean => "euclidean",
            Topology::Sphere => "sphere",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub label: Topology,
    pub critical_values: Vec<f64>,
    pub description: String,
}

/// Count the zeros of `𝔟` at the ends of the range.
pub fn classify_by_critical_points(profile: &TransnormalProfile) -> Result<Classification> {
    let (a, c) = profile.range;
    profile.check_interior(a, c)?;
    let label = match profile.critical_values.len() {
        0 => Topology::Product,
        1 => Topology::Euclidean,
        _ => Topology::Sphere,
    };
    let description = match label {
        Topology::Product => "no critical value: conformal to an interval times a regular level",
        Topology::Euclidean => "one critical value: conformal to Euclidean space",
        Topology::Sphere => "two critical values: conformal to a sphere",
    };
    Ok(Classification {
        label,
        critical_values: profile.critical_values.clone(),
        description: description.to_string(),
    })
}

/// Points of the level `ρ = c` in the plane, found by bisection along
/// `points` rays from `center` (levels are assumed star-shaped about it).
pub fn level_polyline(
    rho: &dyn ScalarField,
    center: &[f64],
    c: f64,
    points: usize,
    r_max: f64,
) -> Result<Vec<Vec<f64>>> {
    if center.len() != 2 || rho.arity() != 2 {
        return Err(FinslerError::Dimension {
            expected: 2,
            got: center.len(),
        });
    }
    let base = rho.eval(center);
    let mut out = Vec::with_capacity(points);
    for k in 0..points {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
        let dir = [theta.cos(), theta.sin()];
        let at = |r: f64| [center[0] + r * dir[0], center[1] + r * dir[1]];
        let side = |r: f64| (rho.eval(&at(r)) - c) * (c - base).signum();
        if side(r_max) < 0.0 {
            return Err(FinslerError::EmptyLevel(c));
        }
        let (mut lo, mut hi) = (0.0, r_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if side(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(at(0.5 * (lo + hi)).to_vec());
    }
    Ok(out)
}
