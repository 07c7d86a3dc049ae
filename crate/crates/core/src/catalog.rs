//! Ready-made structures and profiles.

use crate::dsl::{parse, parse_profile, Expr, Func};
use crate::error::{FinslerError, Result};
use crate::rigidity::{build_sphere_polar, build_warped, LevelMetric, WarpedStructure};
use crate::structure::{Domain, FinslerStructure};
use crate::transnormal::TransnormalProfile;
use crate::zermelo::{randers_from_zermelo, randers_unchecked, ZermeloData};

/// Default squared radius of the pond disk; the wind reaches unit strength
/// at radius² = 9.
pub const POND_RADIUS_SQ: f64 = 8.9;

pub fn euclidean(n: usize) -> FinslerStructure {
    let f = (1..=n)
        .map(|k| Expr::y(k).powi(2))
        .reduce(|a, b| a + b)
        .expect("n >= 1")
        .sqrt();
    FinslerStructure::from_expr("euclidean", n, f, Domain::Everywhere).expect("valid euclidean norm")
}

/// `F = √(Σ a_k(x) y_k²)`.
pub fn riemannian_diagonal(label: &str, diag: Vec<Expr>, domain: Domain) -> Result<FinslerStructure> {
    let n = diag.len();
    if n == 0 {
        return Err(FinslerError::InvalidParameter("empty diagonal".into()));
    }
    let f = diag
        .into_iter()
        .enumerate()
        .map(|(k, a)| a * Expr::y(k + 1).powi(2))
        .reduce(|a, b| a + b)
        .expect("non-empty")
        .sqrt();
    FinslerStructure::from_expr(label, n, f, domain)
}

/// Rotational wind `W = (x2, −x1)/3` over the disk of squared radius `r2`.
pub fn pond_zermelo(r2: f64) -> ZermeloData {
    let wind = vec![
        parse("(1/3)*x2", 2).expect("wind"),
        parse("-(1/3)*x1", 2).expect("wind"),
    ];
    ZermeloData::euclidean(wind, Domain::ball(r2))
}

pub fn pond() -> FinslerStructure {
    randers_from_zermelo(&pond_zermelo(POND_RADIUS_SQ))
        .expect("pond disk lies inside the admissible region")
        .with_label("pond")
}

/// Pond wind on an arbitrary disk, without checking `h(W, W) < 1`.
pub fn pond_unchecked(r2: f64) -> FinslerStructure {
    randers_unchecked(&pond_zermelo(r2))
        .expect("well-formed wind")
        .with_label("pond")
}

/// `ρ = x1² + x2²` with its profile `𝔟(s) = 4s` on the pond.
pub fn pond_profile() -> TransnormalProfile {
    TransnormalProfile::new(parse_profile("4*s").expect("profile"), (0.0, POND_RADIUS_SQ))
        .expect("valid profile")
        .with_rho(pond_rho())
        .with_critical_point(vec![0.0, 0.0])
}

pub fn pond_rho() -> Expr {
    parse("x1^2+x2^2", 2).expect("rho")
}

/// `dt² + sin²(Ct)` times the round level metric of curvature `C²`.
pub fn sphere_polar(c: f64, n: usize) -> Result<WarpedStructure> {
    build_sphere_polar(c, n, LevelMetric::Round { c })
}

/// `dt² + cosh²(t) f`, hyperbolic of curvature −1.
pub fn cosh_warp(n: usize) -> Result<WarpedStructure> {
    let level = if n == 2 {
        LevelMetric::Flat
    } else {
        LevelMetric::Hyperbolic
    };
    build_warped(
        "cosh-warp",
        n,
        Expr::call(Func::Cosh, Expr::x(1)),
        level,
        (f64::NEG_INFINITY, f64::INFINITY),
    )
}

/// `dt² + sin²(t) f` on `(0, π)`, round of curvature 1.
pub fn sin_warp(n: usize) -> Result<WarpedStructure> {
    build_warped(
        "sin-warp",
        n,
        Expr::x(1).sin(),
        LevelMetric::Round { c: 1.0 },
        (0.0, std::f64::consts::PI),
    )
}

/// `dt² + t² f` on `t > 0`: Euclidean space in polar form.
pub fn flat_warp(n: usize) -> Result<WarpedStructure> {
    build_warped(
        "flat-warp",
        n,
        Expr::x(1),
        LevelMetric::Round { c: 1.0 },
        (0.0, f64::INFINITY),
    )
}
