//! Spray, nonlinear and Cartan connections, horizontal covariant
//! derivatives and curvature.
//!
//! Everything here is computed from a single jet of `F²` in all `2n` chart
//! variables at `(x, y)`. Derivatives of `g` and of the spray are read off
//! jet arithmetic, so no finite differences are involved:
//!
//! * order 3 gives `g` and `Gⁱ` to first order (spray, `Gⁱ_j`, `Γⁱ_jk`);
//! * order 4 gives `Gⁱ` to second order (the Jacobi endomorphism `Rⁱ_k`).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::diffcalc::{Jet, JetSpace};
use crate::dsl::{Env, Expr};
use crate::error::{FinslerError, Result};
use crate::structure::FinslerStructure;
use crate::tensors::{checked_inverse, Tensor3};

/// Relative threshold below which a flag is treated as degenerate.
pub const DEGENERATE_FLAG_THRESHOLD: f64 = 1e-12;

/// Jets of `g`, `g⁻¹` and the spray at one tangent vector.
pub(crate) struct LocalJets {
    pub n: usize,
    pub f2: Jet,
    pub g: Vec<Vec<Jet>>,
    pub g_inv: Vec<Vec<Jet>>,
    pub spray: Vec<Jet>,
}

fn invert_jet_matrix(a: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = a.len();
    let space = a[0][0].space().clone();
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&space, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = m[c][c].recip();
        for k in 0..n {
            m[c][k] = &m[c][k] * &p;
            inv[c][k] = &inv[c][k] * &p;
        }
        for r in 0..n {
            if r == c {
                continue;
            }
            let factor = m[r][c].clone();
            for k in 0..n {
                m[r][k] = m[r][k].clone() - &factor * &m[c][k];
                inv[r][k] = inv[r][k].clone() - &factor * &inv[c][k];
            }
        }
    }
    inv
}

impl LocalJets {
    /// Build from a jet of `F²` of order `order ≥ 2` in all chart variables.
    pub fn new(s: &FinslerStructure, x: &[f64], y: &[f64], order: usize) -> Result<Self> {
        debug_assert!((2..=crate::diffcalc::MAX_ORDER).contains(&order));
        s.check_base(x)?;
        s.check_fiber(y)?;
        let n = s.dim();
        let seeds: Vec<usize> = (0..2 * n).collect();
        let f2 = s.f2_jet(x, y, &seeds, order);
        if !f2.is_finite() {
            return Err(FinslerError::SingularEvaluation(format!(
                "F² or its derivatives are not finite at x={x:?}, y={y:?}"
            )));
        }
        let low = order - 2;
        let dy: Vec<Jet> = (0..n).map(|k| f2.derivative(n + k)).collect();
        let g: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|j| dy[i].derivative(n + j).scale(0.5)).collect())
            .collect();
        let g0 = DMatrix::from_fn(n, n, |i, j| g[i][j].value());
        checked_inverse(&g0, x, y)?;
        let g_inv = invert_jet_matrix(&g);

        let space = JetSpace::get(2 * n, low);
        let yv: Vec<Jet> = (0..n).map(|j| Jet::variable(&space, n + j, y[j])).collect();
        let bracket: Vec<Jet> = (0..n)
            .map(|k| {
                let mut acc = f2.derivative(k).truncate(low).scale(-1.0);
                for (j, yj) in yv.iter().enumerate() {
                    acc = acc + &dy[k].derivative(j) * yj;
                }
                acc
            })
            .collect();
        let spray = (0..n)
            .map(|i| {
                let mut acc = Jet::constant(&space, 0.0);
                for (k, b) in bracket.iter().enumerate() {
                    acc = acc + &g_inv[i][k] * b;
                }
                acc.scale(0.25)
            })
            .collect();
        Ok(LocalJets { n, f2, g, g_inv, spray })
    }

    pub fn g_value(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.g[i][j].value())
    }

    pub fn g_inv_value(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.g_inv[i][j].value())
    }

    pub fn spray_value(&self) -> Vec<f64> {
        self.spray.iter().map(Jet::value).collect()
    }

    /// `Nⁱ_j = Gⁱ_j = ∂Gⁱ/∂yʲ`.
    pub fn nonlinear(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.spray[i].first(self.n + j))
    }

    /// `δ_r T = ∂T/∂xʳ − Nˢ_r ∂T/∂yˢ` for a jet of order ≥ 1.
    pub fn delta(&self, t: &Jet, nl: &DMatrix<f64>, r: usize) -> f64 {
        let n = self.n;
        t.first(r) - (0..n).map(|s| nl[(s, r)] * t.first(n + s)).sum::<f64>()
    }

    /// `Γⁱ_jk` and the `δ_j g_rk` used to form it.
    pub fn cartan_gamma(&self) -> (Tensor3, Tensor3) {
        let n = self.n;
        let nl = self.nonlinear();
        let mut dg = Tensor3::zeros(n);
        for j in 0..n {
            for r in 0..n {
                for k in 0..n {
                    dg.set(j, r, k, self.delta(&self.g[r][k], &nl, j));
                }
            }
        }
        let g_inv = self.g_inv_value();
        let mut gamma = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v: f64 = (0..n)
                        .map(|r| g_inv[(i, r)] * (dg.get(j, r, k) + dg.get(k, j, r) - dg.get(r, j, k)))
                        .sum();
                    gamma.set(i, j, k, 0.5 * v);
                }
            }
        }
        (gamma, dg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SprayValue {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `Gⁱ`.
    pub g: Vec<f64>,
    /// `Gⁱ_j = ∂Gⁱ/∂yʲ`, row `i`, column `j`.
    #[serde(serialize_with = "ser_matrix")]
    pub gy: DMatrix<f64>,
    /// `max_i |Gⁱ_j yʲ − 2Gⁱ|`.
    pub euler_residual: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// `Gⁱ = ¼ g^{ik}(∂²F²/∂yᵏ∂xʲ yʲ − ∂F²/∂xᵏ)` and its fiber derivative.
pub fn spray(s: &FinslerStructure, x: &[f64], y: &[f64]) -> Result<SprayValue> {
    let local = LocalJets::new(s, x, y, 3)?;
    let g = local.spray_value();
    let gy = local.nonlinear();
    let gyy = &gy * DVector::from_column_slice(y);
    let euler_residual = (0..s.dim()).map(|i| (gyy[i] - 2.0 * g[i]).abs()).fold(0.0, f64::max);
    Ok(SprayValue {
        x: x.to_vec(),
        y: y.to_vec(),
        g,
        gy,
        euler_residual,
    })
}

/// Spray coefficients only; cheaper than [`spray`] (order-2 jets, plain inverse).
pub fn spray_coefficients(s: &FinslerStructure, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    s.check_base(x)?;
    s.check_fiber(y)?;
    let n = s.dim();
    let seeds: Vec<usize> = (0..2 * n).collect();
    let f2 = s.f2_jet(x, y, &seeds, 2);
    if !f2.is_finite() {
        return Err(FinslerError::SingularEvaluation(format!(
            "F² or its derivatives are not finite at x={x:?}, y={y:?}"
        )));
    }
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * f2.partial_along(&[n + i, n + j]));
    let g_inv = checked_inverse(&g, x, y)?;
    let bracket = DVector::from_fn(n, |k, _| {
        (0..n).map(|j| f2.partial_along(&[n + k, j]) * y[j]).sum::<f64>() - f2.first(k)
    });
    Ok((g_inv * bracket * 0.25).iter().copied().collect())
}

#[derive(Debug, Clone)]
pub struct CartanConnectionValue {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `Γⁱ_jk` stored at `[i][j][k]`.
    pub gamma: Tensor3,
    /// `δg_rk/δxʲ` stored at `[j][r][k]`.
    pub delta_g: Tensor3,
    pub nonlinear: DMatrix<f64>,
}

/// `Γⁱ_jk = ½ g^{ir}(δ_j g_rk + δ_k g_jr − δ_r g_jk)`.
pub fn cartan_connection(s: &FinslerStructure, x: &[f64], y: &[f64]) -> Result<CartanConnectionValue> {
    let local = LocalJets::new(s, x, y, 3)?;
    let (gamma, delta_g) = local.cartan_gamma();
    Ok(CartanConnectionValue {
        x: x.to_vec(),
        y: y.to_vec(),
        gamma,
        delta_g,
        nonlinear: local.nonlinear(),
    })
}

/// Tensor fields accepted by [`horizontal_covariant_derivative`].
#[derive(Debug, Clone)]
pub enum TensorField {
    /// A scalar function; may depend on `x` and `y`.
    Scalar(Expr),
    /// The differential `dρ` of a base function `ρ(x)`.
    Differential(Expr),
    /// The fundamental tensor `g_ij`.
    Metric,
    /// The mixed Cartan tensor `Cⁱ_jk`.
    Cartan,
    /// Arbitrary components over the chart, listed in row-major order with
    /// upper indices first.
    Components {
        upper: usize,
        lower: usize,
        components: Vec<Expr>,
    },
}

/// A tensor at one point; components row-major, upper indices first, the
/// derivative index (if any) last.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    pub n: usize,
    pub upper: usize,
    pub lower: usize,
    pub data: Vec<f64>,
}

impl TensorValue {
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[flat_index(self.n, index)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Valence (0,2) as a matrix.
    pub fn as_matrix(&self) -> Option<DMatrix<f64>> {
        (self.upper + self.lower == 2).then(|| DMatrix::from_row_slice(self.n, self.n, &self.data))
    }
}

fn flat_index(n: usize, index: &[usize]) -> usize {
    index.iter().fold(0, |acc, &i| acc * n + i)
}

fn unflatten(n: usize, mut flat: usize, rank: usize) -> Vec<usize> {
    let mut out = vec![0; rank];
    for slot in out.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
    out
}

fn is_supported(upper: usize, lower: usize) -> bool {
    matches!((upper, lower), (0, 0) | (0, 1) | (0, 2) | (1, 2))
}

/// Components of `field` as order-1 jets in all chart variables.
fn component_jets(
    s: &FinslerStructure,
    field: &TensorField,
    x: &[f64],
    y: &[f64],
) -> Result<(usize, usize, Vec<Jet>, LocalJets)> {
    let n = s.dim();
    let chart_jets = |order: usize| -> Vec<Jet> {
        let space = JetSpace::get(2 * n, order);
        x.iter()
            .chain(y)
            .enumerate()
            .map(|(i, &v)| Jet::variable(&space, i, v))
            .collect()
    };
    let check_expr = |e: &Expr, base_only: bool| -> Result<()> {
        let u = e.usage();
        if u.uses_s || u.max_base > n || u.max_fiber > n || (base_only && u.max_fiber > 0) {
            return Err(FinslerError::InvalidParameter(format!(
                "expression '{e}' is not a field on this {n}-dimensional chart"
            )));
        }
        Ok(())
    };
    match field {
        TensorField::Scalar(e) => {
            check_expr(e, false)?;
            let z = chart_jets(1);
            let (xs, ys) = z.split_at(n);
            let local = LocalJets::new(s, x, y, 3)?;
            Ok((0, 0, vec![e.eval(&Env::chart(xs, ys))], local))
        }
        TensorField::Differential(e) => {
            check_expr(e, true)?;
            let z = chart_jets(2);
            let rho = e.eval(&Env::base(&z[..n]));
            let comps = (0..n).map(|i| rho.derivative(i)).collect();
            let local = LocalJets::new(s, x, y, 3)?;
            Ok((0, 1, comps, local))
        }
        TensorField::Metric => {
            let local = LocalJets::new(s, x, y, 3)?;
            let comps = local.g.iter().flatten().cloned().collect();
            Ok((0, 2, comps, local))
        }
        TensorField::Cartan => {
            let local = LocalJets::new(s, x, y, 4)?;
            let mut lowered = Vec::with_capacity(n * n * n);
            for r in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        lowered.push(local.g[r][j].derivative(n + k).scale(0.5));
                    }
                }
            }
            let mut comps = Vec::with_capacity(n * n * n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let space = lowered[0].space().clone();
                        let mut acc = Jet::constant(&space, 0.0);
                        for r in 0..n {
                            let gi = local.g_inv[i][r].truncate(1);
                            acc = acc + &gi * &lowered[(r * n + j) * n + k];
                        }
                        comps.push(acc);
                    }
                }
            }
            Ok((1, 2, comps, local))
        }
        TensorField::Components {
            upper,
            lower,
            components,
        } => {
            if !is_supported(*upper, *lower) {
                return Err(FinslerError::UnsupportedValence(format!("({upper},{lower})")));
            }
            let expected = n.pow((upper + lower) as u32);
            if components.len() != expected {
                return Err(FinslerError::Dimension {
                    expected,
                    got: components.len(),
                });
            }
            let z = chart_jets(1);
            let (xs, ys) = z.split_at(n);
            let mut comps = Vec::with_capacity(expected);
            for e in components {
                check_expr(e, false)?;
                comps.push(e.eval(&Env::chart(xs, ys)));
            }
            let local = LocalJets::new(s, x, y, 3)?;
            Ok((*upper, *lower, comps, local))
        }
    }
}

/// Cartan horizontal covariant derivative `∇_r T` of `field` at `(x, y)`.
///
/// For `T` of valence `(p, q)` the result has valence `(p, q + 1)` with the
/// derivative index last:
/// `∇_r Tⁱ_jk = δ_r Tⁱ_jk + Tˢ_jk Γⁱ_sr − Tⁱ_sk Γˢ_jr − Tⁱ_js Γˢ_kr`.
pub fn horizontal_covariant_derivative(
    s: &FinslerStructure,
    field: &TensorField,
    x: &[f64],
    y: &[f64],
) -> Result<TensorValue> {
    let n = s.dim();
    let (upper, lower, comps, local) = component_jets(s, field, x, y)?;
    let nl = local.nonlinear();
    let (gamma, _) = local.cartan_gamma();
    let rank = upper + lower;
    let values: Vec<f64> = comps.iter().map(Jet::value).collect();
    let mut data = vec![0.0; n.pow(rank as u32 + 1)];
    for (flat, out) in data.iter_mut().enumerate() {
        let idx = unflatten(n, flat, rank + 1);
        let r = idx[rank];
        let t_idx = &idx[..rank];
        let mut v = local.delta(&comps[flat_index(n, t_idx)], &nl, r);
        for slot in 0..rank {
            let mut moved = t_idx.to_vec();
            for s_ in 0..n {
                moved[slot] = s_;
                let t = values[flat_index(n, &moved)];
                if slot < upper {
                    v += t * gamma.get(t_idx[slot], s_, r);
                } else {
                    v -= t * gamma.get(s_, t_idx[slot], r);
                }
            }
        }
        *out = v;
    }
    Ok(TensorValue {
        n,
        upper,
        lower: lower + 1,
        data,
    })
}

#[derive(Debug, Clone)]
pub struct CurvatureValue {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `Rⁱ_k`, row `i`, column `k`.
    pub r_jac: DMatrix<f64>,
    /// `g_ij(x, y)`.
    pub g: DMatrix<f64>,
    pub f_squared: f64,
}

impl CurvatureValue {
    /// `K(x, y, X)` from the stored data.
    pub fn flag_curvature(&self, edge: &[f64]) -> Result<f64> {
        let e = DVector::from_column_slice(edge);
        let yv = DVector::from_column_slice(&self.y);
        let gx = &self.g * &e;
        let xx = e.dot(&gx);
        let yy = yv.dot(&(&self.g * &yv));
        let xy = yv.dot(&gx);
        let denom = xx * yy - xy * xy;
        if !(denom > DEGENERATE_FLAG_THRESHOLD * xx * yy) {
            return Err(FinslerError::DegenerateFlag);
        }
        let rx = &self.r_jac * &e;
        Ok(gx.dot(&rx) / denom)
    }

    /// `max |g_ir Rʳ_k − g_kr Rʳ_i|`.
    pub fn symmetry_defect(&self) -> f64 {
        let gr = &self.g * &self.r_jac;
        (&gr - gr.transpose()).amax()
    }

    /// `max_i |Rⁱ_k yᵏ|`.
    pub fn contraction_defect(&self) -> f64 {
        (&self.r_jac * DVector::from_column_slice(&self.y)).amax()
    }
}

/// `Rⁱ_k = 2∂Gⁱ/∂xᵏ − yʲ∂²Gⁱ/∂xʲ∂yᵏ + 2Gʲ∂²Gⁱ/∂yʲ∂yᵏ − Gⁱ_j Gʲ_k`.
pub fn contracted_curvature(s: &FinslerStructure, x: &[f64], y: &[f64]) -> Result<CurvatureValue> {
    let local = LocalJets::new(s, x, y, 4)?;
    let n = s.dim();
    let g_val = local.spray_value();
    let nl = local.nonlinear();
    let r_jac = DMatrix::from_fn(n, n, |i, k| {
        let gi = &local.spray[i];
        let mut v = 2.0 * gi.first(k);
        for j in 0..n {
            v -= y[j] * gi.partial_along(&[j, n + k]);
            v += 2.0 * g_val[j] * gi.partial_along(&[n + j, n + k]);
            v -= nl[(i, j)] * nl[(j, k)];
        }
        v
    });
    Ok(CurvatureValue {
        x: x.to_vec(),
        y: y.to_vec(),
        r_jac,
        g: local.g_value(),
        f_squared: local.f2.value(),
    })
}

/// `K = g(R(X,y)y, X) / (g(X,X)g(y,y) − g(X,y)²)`, all products at `g_y`.
pub fn flag_curvature(s: &FinslerStructure, x: &[f64], y: &[f64], edge: &[f64]) -> Result<f64> {
    if edge.len() != s.dim() {
        return Err(FinslerError::Dimension {
            expected: s.dim(),
            got: edge.len(),
        });
    }
    contracted_curvature(s, x, y)?.flag_curvature(edge)
}

#[derive(Debug, Clone, Serialize)]
pub struct FlagWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub edge: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureScan {
    pub structure: String,
    pub samples: usize,
    pub seed: u64,
    #[serde(rename = "mean_K")]
    pub mean_k: f64,
    pub max_dev: f64,
    /// Flags with the largest deviation from the mean.
    pub witnesses: Vec<FlagWitness>,
    /// Samples whose evaluation failed (degenerate flag or singular point).
    pub failures: usize,
}

const SCAN_WITNESSES: usize = 3;

/// Flag curvature over `samples` random flags, reduced in sample order.
pub fn constant_curvature_scan(s: &FinslerStructure, samples: usize, seed: u64) -> CurvatureScan {
    let flags = s.sample_flags(samples, seed);
    let values: Vec<Option<f64>> = flags
        .par_iter()
        .map(|(x, y, e)| flag_curvature(s, x, y, e).ok().filter(|k| k.is_finite()))
        .collect();
    let ok: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|k| (i, k)))
        .collect();
    let failures = samples - ok.len();
    let mean_k = if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().map(|(_, k)| k).sum::<f64>() / ok.len() as f64
    };
    let max_dev = ok.iter().map(|(_, k)| (k - mean_k).abs()).fold(0.0, f64::max);
    let mut ranked = ok.clone();
    ranked.sort_by(|a, b| {
        let da = (a.1 - mean_k).abs();
        let db = (b.1 - mean_k).abs();
        db.total_cmp(&da).then(a.0.cmp(&b.0))
    });
    let witnesses = ranked
        .iter()
        .take(SCAN_WITNESSES)
        .map(|&(i, k)| FlagWitness {
            x: flags[i].0.clone(),
            y: flags[i].1.clone(),
            edge: flags[i].2.clone(),
            k,
        })
        .collect();
    CurvatureScan {
        structure: s.label().to_string(),
        samples,
        seed,
        mean_k,
        max_dev: if ok.is_empty() { f64::NAN } else { max_dev },
        witnesses,
        failures,
    }
}

/// Analytic curvature data of `dt² + w(t)² f` at one `t`, with `w = ρ'`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct WarpedCurvatureComponents {
    pub t: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Displayed radial component coefficient `ρ'''/ρ'`.
    pub radial_raw: f64,
    /// Mixed component coefficient `−ρ'ρ'''` (multiplies `f_γβ`).
    pub mixed_raw: f64,
    /// Level component coefficient `k̄ − ρ''²` (multiplies `f_γβ δ − f_δβ δ`).
    pub tangential_raw: f64,
    /// Assembled flag curvature of flags containing `∂/∂t`: `−ρ'''/ρ'`.
    pub radial_k: f64,
    /// Flag curvature of flags tangent to the level: `(k̄ − ρ''²)/ρ'²`.
    pub tangential_k: f64,
}

/// Curvature components of the warped form from the warp `ρ'(t)` (an
/// expression in `t`) and the constant curvature `k̄` of the level metric.
pub fn warped_curvature_components(warp: &Expr, level_curvature: f64, t: f64) -> Result<WarpedCurvatureComponents> {
    let u = warp.usage();
    if u.max_base > 1 || u.max_fiber > 0 || u.uses_s {
        return Err(FinslerError::InvalidParameter(format!(
            "warp '{warp}' must depend on t only"
        )));
    }
    let space = JetSpace::get(1, 2);
    let tj = [Jet::variable(&space, 0, t)];
    let w = warp.eval(&Env::base(&tj));
    let (rho1, rho2, rho3) = (w.value(), w.partial(&[1]), w.partial(&[2]));
    if !(rho1.is_finite() && rho2.is_finite() && rho3.is_finite()) {
        return Err(FinslerError::SingularEvaluation(format!("warp not finite at t={t}")));
    }
    if rho1.abs() < 1e-14 {
        return Err(FinslerError::CriticalPointSingularity(t));
    }
    Ok(WarpedCurvatureComponents {
        t,
        rho1,
        rho2,
        rho3,
        radial_raw: rho3 / rho1,
        mixed_raw: -rho1 * rho3,
        tangential_raw: level_curvature - rho2 * rho2,
        radial_k: -rho3 / rho1,
        tangential_k: (level_curvature - rho2 * rho2) / (rho1 * rho1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::dsl::parse;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn euclidean_spray_and_connection_vanish() {
        let s = catalog::euclidean(3);
        let sp = spray(&s, &[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]).unwrap();
        assert!(sp.g.iter().all(|v| v.abs() < 1e-15));
        assert!(sp.gy.amax() < 1e-15);
        let c = cartan_connection(&s, &[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]).unwrap();
        assert!(c.gamma.max_abs() < 1e-15);
    }

    #[test]
    fn spray_shortcut_matches_full_spray() {
        let s = catalog::pond();
        let (x, y) = ([0.4, -1.3], [0.7, 1.9]);
        let a = spray(&s, &x, &y).unwrap().g;
        let b = spray_coefficients(&s, &x, &y).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn spray_euler_identity() {
        let s = catalog::pond();
        let sp = spray(&s, &[0.5, 1.0], &[1.0, 0.3]).unwrap();
        assert!(sp.euler_residual < 1e-12);
    }

    #[test]
    fn jet_matrix_inverse() {
        let space = JetSpace::get(1, 2);
        let t = Jet::variable(&space, 0, 0.3);
        let one = Jet::constant(&space, 1.0);
        let a = vec![
            vec![one.clone() + t.clone() * t.clone(), t.clone()],
            vec![t.clone(), one.clone() * 2.0],
        ];
        let inv = invert_jet_matrix(&a);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::constant(&space, 0.0);
                for k in 0..2 {
                    acc = acc + &a[i][k] * &inv[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - target).abs() < 1e-14);
                assert!(acc.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn hcd_of_scalar_is_gradient() {
        let s = catalog::euclidean(2);
        let rho = parse("x1", 2).unwrap();
        let d =
            horizontal_covariant_derivative(&s, &TensorField::Scalar(rho.clone()), &[0.3, 0.4], &[1.0, 0.0]).unwrap();
        assert_eq!(d.data, vec![1.0, 0.0]);
        let h = horizontal_covariant_derivative(&s, &TensorField::Differential(rho), &[0.3, 0.4], &[1.0, 0.0]).unwrap();
        assert!(h.max_abs() < 1e-15);
    }

    #[test]
    fn unsupported_valence_is_rejected() {
        let s = catalog::euclidean(2);
        let field = TensorField::Components {
            upper: 2,
            lower: 0,
            components: vec![Expr::num(1.0); 4],
        };
        assert!(matches!(
            horizontal_covariant_derivative(&s, &field, &[0.0, 0.0], &[1.0, 0.0]),
            Err(FinslerError::UnsupportedValence(_))
        ));
    }

    #[test]
    fn metric_is_parallel_on_pond() {
        let s = catalog::pond();
        let d = horizontal_covariant_derivative(&s, &TensorField::Metric, &[0.8, -0.6], &[1.0, 2.0]).unwrap();
        assert!(d.max_abs() < 1e-10, "{}", d.max_abs());
    }

    #[test]
    fn sphere_jacobi_endomorphism_matches_constant_curvature() {
        let s = catalog::sphere_polar(1.0, 2).unwrap().structure;
        let (x, y) = ([1.0, 0.0], [1.0, 0.0]);
        let c = contracted_curvature(&s, &x, &y).unwrap();
        let f2 = c.f_squared;
        let yl = &c.g * DVector::from_column_slice(&y);
        for i in 0..2 {
            for k in 0..2 {
                let model = f2 * if i == k { 1.0 } else { 0.0 } - y[i] * yl[k];
                assert!((c.r_jac[(i, k)] - model).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flag_curvature_of_unit_sphere() {
        let s = catalog::sphere_polar(1.0, 2).unwrap().structure;
        let k = flag_curvature(&s, &[1.2, 0.3], &[0.4, 1.0], &[1.0, -0.2]).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_flag_is_rejected() {
        let s = catalog::euclidean(2);
        assert_eq!(
            flag_curvature(&s, &[0.0, 0.0], &[1.0, 2.0], &[2.0, 4.0]),
            Err(FinslerError::DegenerateFlag)
        );
    }

    #[test]
    fn scan_is_deterministic_and_flat_for_euclidean() {
        let s = catalog::euclidean(2);
        let a = constant_curvature_scan(&s, 200, 42);
        let b = constant_curvature_scan(&s, 200, 42);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.mean_k.abs() < 1e-9 && a.max_dev < 1e-9);
        assert_eq!(a.failures, 0);
    }

    #[test]
    fn sphere_scan_with_c_two() {
        let s = catalog::sphere_polar(2.0, 2).unwrap().structure;
        let r = constant_curvature_scan(&s, 200, 42);
        assert!((r.mean_k - 4.0).abs() < 1e-6, "{}", r.mean_k);
        assert!(r.max_dev < 1e-4);
    }

    #[test]
    fn warped_components() {
        let sphere = parse("sin(t)", 1).unwrap();
        let c = warped_curvature_components(&sphere, 1.0, FRAC_PI_4).unwrap();
        assert!((c.radial_raw + 1.0).abs() < 1e-14);
        assert!((c.radial_k - 1.0).abs() < 1e-14);
        assert!((c.tangential_k - 1.0).abs() < 1e-14);

        let hyper = parse("cosh(t)", 1).unwrap();
        let c = warped_curvature_components(&hyper, 0.0, 0.7).unwrap();
        assert!((c.radial_raw - 1.0).abs() < 1e-14);
        assert!((c.radial_k + 1.0).abs() < 1e-14);

        let flat = parse("1", 1).unwrap();
        let c = warped_curvature_components(&flat, 0.5, 2.0).unwrap();
        assert_eq!((c.radial_raw, c.mixed_raw), (0.0, 0.0));
        assert_eq!(c.tangential_raw, 0.5);

        assert_eq!(
            warped_curvature_components(&parse("cos(t)", 1).unwrap(), 1.0, FRAC_PI_2 - 0.0),
            Err(FinslerError::CriticalPointSingularity(FRAC_PI_2))
        );
    }
}
