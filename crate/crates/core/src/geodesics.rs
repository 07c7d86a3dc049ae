//! Geodesic flow `ẍ + 2G(x, ẋ) = 0`, the exponential map and parallel
//! transport along curves.

use nalgebra::DVector;
use serde::Serialize;

use crate::connections::{cartan_connection, spray_coefficients};
use crate::error::{FinslerError, Result};
use crate::structure::FinslerStructure;
use crate::tensors::fundamental_tensor;

pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `ẍ` at the sample; used for Hermite interpolation of the velocity.
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "rk4")]
    Rk4,
    #[serde(rename = "rk45-adaptive")]
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Rk4 {
        step: f64,
    },
    /// Dormand–Prince 5(4) with mixed absolute/relative tolerance.
    Rk45 {
        tolerance: f64,
        initial_step: f64,
    },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk4 { step: DEFAULT_STEP }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    pub step: f64,
    pub method: Method,
    pub initial_speed: f64,
    /// `max_t |F(x(t), ẋ(t)) − F(x₀, ẋ₀)|`.
    pub speed_drift: f64,
    /// The path stopped early at the domain boundary or a singular point.
    pub truncated: bool,
}

impl GeodesicPath {
    pub fn start(&self) -> &PathSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("paths are never empty")
    }

    pub fn t_end(&self) -> f64 {
        self.end().t
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.x.as_slice())
    }

    /// Index `i` with `t_i <= t <= t_{i+1}` (clamped).
    fn bracket(&self, t: f64) -> usize {
        let k = self.samples.partition_point(|s| s.t <= t);
        k.saturating_sub(1).min(self.samples.len().saturating_sub(2))
    }
}

/// A parametrized curve in the base chart.
pub trait Curve {
    fn interval(&self) -> (f64, f64);
    /// Position and velocity at parameter `t`.
    fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>);
    fn suggested_step(&self) -> f64 {
        DEFAULT_STEP
    }
}

fn hermite(p0: &[f64], m0: &[f64], p1: &[f64], m1: &[f64], h: f64, s: f64) -> Vec<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..p0.len())
        .map(|i| h00 * p0[i] + h10 * h * m0[i] + h01 * p1[i] + h11 * h * m1[i])
        .collect()
}

impl Curve for GeodesicPath {
    fn interval(&self) -> (f64, f64) {
        (self.start().t, self.end().t)
    }

    fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        if self.samples.len() == 1 {
            let s = &self.samples[0];
            return (s.x.clone(), s.v.clone());
        }
        let i = self.bracket(t);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        (
            hermite(&a.x, &a.v, &b.x, &b.v, h, s),
            hermite(&a.v, &a.a, &b.v, &b.a, h, s),
        )
    }

    fn suggested_step(&self) -> f64 {
        self.step
    }
}

/// A curve given by a closure `t ↦ (x(t), ẋ(t))`.
pub struct ParametricCurve<F> {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    pub f: F,
}

impl<F: Fn(f64) -> (Vec<f64>, Vec<f64>)> Curve for ParametricCurve<F> {
    fn interval(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }
    fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (self.f)(t)
    }
    fn suggested_step(&self) -> f64 {
        self.step
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// One classical RK4 step; `None` if any stage fails or the result is invalid.
pub(crate) fn rk4_step<R, V>(state: &[f64], h: f64, rhs: &R, valid: &V) -> Option<Vec<f64>>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    V: Fn(&[f64]) -> bool,
{
    let k1 = rhs(state).ok()?;
    let s2 = axpy(state, h / 2.0, &k1);
    let k2 = rhs(&s2).ok()?;
    let s3 = axpy(state, h / 2.0, &k2);
    let k3 = rhs(&s3).ok()?;
    let s4 = axpy(state, h, &k3);
    let k4 = rhs(&s4).ok()?;
    let out: Vec<f64> = (0..state.len())
        .map(|i| state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    (out.iter().all(|v| v.is_finite()) && valid(&out)).then_some(out)
}

/// Fixed-step RK4 from `t = 0` to `t_max`. When a step fails, the largest
/// admissible partial step is located by bisection, appended, and the
/// integration stops with the truncation flag set.
pub(crate) fn rk4_integrate<R, V>(
    state0: Vec<f64>,
    t_max: f64,
    h: f64,
    rhs: R,
    valid: V,
) -> (Vec<(f64, Vec<f64>)>, bool)
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    V: Fn(&[f64]) -> bool,
{
    let steps = (t_max / h).ceil().max(0.0) as usize;
    let mut out = vec![(0.0, state0)];
    for k in 0..steps {
        let (t, state) = out.last().cloned().expect("non-empty");
        let t_next = if k + 1 == steps { t_max } else { (k + 1) as f64 * h };
        let dt = t_next - t;
        if dt <= 0.0 {
            break;
        }
        if let Some(next) = rk4_step(&state, dt, &rhs, &valid) {
            out.push((t_next, next));
            continue;
        }
        let (mut lo, mut hi) = (0.0, dt);
        let mut best = None;
        for _ in 0..200 {
            if hi - lo <= 1e-15 * t_next.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match rk4_step(&state, mid, &rhs, &valid) {
                Some(s) => {
                    lo = mid;
                    best = Some(s);
                }
                None => hi = mid,
            }
        }
        if let Some(s) = best {
            out.push((t + lo, s));
        }
        return (out, true);
    }
    (out, false)
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp_step<R, V>(state: &[f64], h: f64, rhs: &R, valid: &V) -> Option<(Vec<f64>, f64)>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    V: Fn(&[f64]) -> bool,
{
    let m = state.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let mut s = state.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = DP_A[stage][j];
            if a != 0.0 {
                for i in 0..m {
                    s[i] += h * a * kj[i];
                }
            }
        }
        if stage > 0 && !valid(&s) {
            return None;
        }
        k.push(rhs(&s).ok()?);
    }
    let mut y5 = state.to_vec();
    let mut err: f64 = 0.0;
    for i in 0..m {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for st in 0..7 {
            d5 += DP_B5[st] * k[st][i];
            d4 += DP_B4[st] * k[st][i];
        }
        y5[i] += h * d5;
        err = err.max((h * (d5 - d4)).abs());
    }
    (y5.iter().all(|v| v.is_finite()) && valid(&y5)).then_some((y5, err))
}

fn dp_integrate<R, V>(state0: Vec<f64>, t_max: f64, tol: f64, h0: f64, rhs: R, valid: V) -> (Vec<(f64, Vec<f64>)>, bool)
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    V: Fn(&[f64]) -> bool,
{
    let mut out = vec![(0.0, state0)];
    let mut h = h0;
    let h_min = 1e-12 * t_max.max(1.0);
    while out.last().expect("non-empty").0 < t_max {
        let (t, state) = out.last().cloned().expect("non-empty");
        let dt = h.min(t_max - t);
        match dp_step(&state, dt, &rhs, &valid) {
            Some((next, err)) => {
                let scale = tol * (1.0 + state.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                let ratio = err / scale;
                if ratio <= 1.0 {
                    let t_next = if dt == t_max - t { t_max } else { t + dt };
                    out.push((t_next, next));
                }
                let factor = if ratio == 0.0 { 5.0 } else { 0.9 * ratio.powf(-0.2) };
                h = dt * factor.clamp(0.2, 5.0);
            }
            None => h = dt / 4.0,
        }
        if h < h_min {
            return (out, true);
        }
    }
    (out, false)
}

/// Integrate the geodesic through `(x0, y0)` for parameter time `t_max`.
pub fn integrate_geodesic(
    s: &FinslerStructure,
    x0: &[f64],
    y0: &[f64],
    t_max: f64,
    integrator: Integrator,
) -> Result<GeodesicPath> {
    let n = s.dim();
    if x0.len() != n || y0.len() != n {
        return Err(FinslerError::Dimension {
            expected: n,
            got: if x0.len() != n { x0.len() } else { y0.len() },
        });
    }
    let (method, step) = match integrator {
        Integrator::Rk4 { step } => (Method::Rk4, step),
        Integrator::Rk45 {
            tolerance,
            initial_step,
        } => {
            if !(tolerance > 0.0) {
                return Err(FinslerError::InvalidParameter(format!(
                    "tolerance must be positive, got {tolerance}"
                )));
            }
            (Method::Rk45, initial_step)
        }
    };
    if !(step > 0.0) || !step.is_finite() {
        return Err(FinslerError::InvalidStep(step));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(FinslerError::InvalidParameter(format!(
            "t_max must be finite and >= 0, got {t_max}"
        )));
    }
    s.check_fiber(y0)?;
    if !s.contains(x0) {
        return Err(FinslerError::EmptyPath);
    }
    let f0 = s.norm(x0, y0)?;
    let rhs = |z: &[f64]| -> Result<Vec<f64>> {
        let (x, v) = z.split_at(n);
        let g = spray_coefficients(s, x, v)?;
        let mut out = v.to_vec();
        out.extend(g.iter().map(|gi| -2.0 * gi));
        Ok(out)
    };
    rhs(&[x0, y0].concat()).map_err(|_| FinslerError::EmptyPath)?;
    let valid = |z: &[f64]| s.contains(&z[..n]);
    let state0 = [x0, y0].concat();
    let (raw, truncated) = match integrator {
        Integrator::Rk4 { step } => rk4_integrate(state0, t_max, step, rhs, valid),
        Integrator::Rk45 {
            tolerance,
            initial_step,
        } => dp_integrate(state0, t_max, tolerance, initial_step, rhs, valid),
    };
    if truncated && raw.len() == 1 && t_max > 0.0 {
        return Err(FinslerError::EmptyPath);
    }
    let mut samples = Vec::with_capacity(raw.len());
    let mut drift: f64 = 0.0;
    for (t, z) in raw {
        let (x, v) = z.split_at(n);
        let a = rhs(&z).map(|d| d[n..].to_vec()).unwrap_or_else(|_| vec![f64::NAN; n]);
        drift = drift.max((s.eval(x, v) - f0).abs());
        samples.push(PathSample {
            t,
            x: x.to_vec(),
            v: v.to_vec(),
            a,
        });
    }
    Ok(GeodesicPath {
        samples,
        step,
        method,
        initial_speed: f0,
        speed_drift: drift,
        truncated,
    })
}

/// Endpoint of the unit-speed geodesic from `x0` in direction `v` after arc
/// length `r`.
pub fn exponential_map(s: &FinslerStructure, x0: &[f64], v: &[f64], r: f64) -> Result<Vec<f64>> {
    s.check_fiber(v)?;
    let f = s.norm(x0, v)?;
    if !(f > 0.0) {
        return Err(FinslerError::SingularEvaluation(format!(
            "F(x0, v) = {f} is not positive"
        )));
    }
    let y0: Vec<f64> = v.iter().map(|c| c / f).collect();
    let path = integrate_geodesic(s, x0, &y0, r, Integrator::default())?;
    if path.truncated && r - path.t_end() > 1e-9 {
        return Err(FinslerError::Domain {
            what: format!(
                "exponential map of {} (left the chart at t = {})",
                s.label(),
                path.t_end()
            ),
            point: path.end().x.clone(),
        });
    }
    Ok(path.end().x.clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportResult {
    pub v_end: Vec<f64>,
    /// `(t, v(t))` at every step.
    pub samples: Vec<(f64, Vec<f64>)>,
    /// `max_t |g_ẋ(v, v) − g_ẋ₀(v₀, v₀)|`.
    pub norm_drift: f64,
}

/// Solve `v̇ⁱ + Γⁱ_jk(x, ẋ) ẋʲ vᵏ = 0` along `curve` (reference direction `ẋ`).
pub fn parallel_transport(s: &FinslerStructure, curve: &dyn Curve, v0: &[f64]) -> Result<TransportResult> {
    let n = s.dim();
    if v0.len() != n {
        return Err(FinslerError::Dimension {
            expected: n,
            got: v0.len(),
        });
    }
    let (t0, t1) = curve.interval();
    let h = curve.suggested_step();
    if !(h > 0.0) {
        return Err(FinslerError::InvalidStep(h));
    }
    let rhs = |t: f64, v: &[f64]| -> Result<Vec<f64>> {
        let (x, xd) = curve.eval(t);
        let c = cartan_connection(s, &x, &xd)?;
        Ok((0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        acc += c.gamma.get(i, j, k) * xd[j] * v[k];
                    }
                }
                -acc
            })
            .collect())
    };
    let norm_sq = |t: f64, v: &[f64]| -> Result<f64> {
        let (x, xd) = curve.eval(t);
        let m = fundamental_tensor(s, &x, &xd)?;
        let vv = DVector::from_column_slice(v);
        Ok(vv.dot(&(&m.g * &vv)))
    };
    let q0 = norm_sq(t0, v0)?;
    let steps = ((t1 - t0) / h).ceil().max(0.0) as usize;
    let mut v = v0.to_vec();
    let mut t = t0;
    let mut samples = vec![(t0, v.clone())];
    let mut drift: f64 = 0.0;
    for k in 0..steps {
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        let dt = t_next - t;
        let k1 = rhs(t, &v)?;
        let k2 = rhs(t + dt / 2.0, &axpy(&v, dt / 2.0, &k1))?;
        let k3 = rhs(t + dt / 2.0, &axpy(&v, dt / 2.0, &k2))?;
        let k4 = rhs(t_next, &axpy(&v, dt, &k3))?;
        for i in 0..n {
            v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = t_next;
        drift = drift.max((norm_sq(t, &v)? - q0).abs());
        samples.push((t, v.clone()));
    }
    Ok(TransportResult {
        v_end: v,
        samples,
        norm_drift: drift,
    })
}

/// Hausdorff distance between two polylines given by their vertices.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn point_segment(p: &[f64], s0: &[f64], s1: &[f64]) -> f64 {
        let d: Vec<f64> = s1.iter().zip(s0).map(|(u, v)| u - v).collect();
        let len2: f64 = d.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            (p.iter()
                .zip(s0)
                .zip(&d)
                .map(|((pi, si), di)| (pi - si) * di)
                .sum::<f64>()
                / len2)
                .clamp(0.0, 1.0)
        } else {
            0.0
        };
        p.iter()
            .zip(s0)
            .zip(&d)
            .map(|((pi, si), di)| (pi - si - t * di).powi(2))
            .sum::<f64>()
            .sqrt()
    }
    fn directed(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter()
            .map(|p| {
                if b.len() == 1 {
                    return point_segment(p, &b[0], &b[0]);
                }
                b.windows(2)
                    .map(|w| point_segment(p, &w[0], &w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}
