use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse, parse_profile, Expr};
use crate::catalog;
use crate::error::{FinslerError, Result};
use crate::rigidity::{build_sphere_polar, build_warped, LevelMetric, WarpedStructure};
use crate::structure::{Domain, FinslerStructure};
use crate::transnormal::TransnormalProfile;
use crate::zermelo::{randers_from_zermelo, randers_unchecked, ZermeloData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    RiemannianDiagonal,
    RandersZermelo,
    SpherePolar,
    Warped,
    #[serde(rename = "custom-F")]
    CustomF,
}

/// Optional transnormal data attached to a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransnormalSpec {
    pub rho: String,
    pub b: String,
    pub range: (f64, f64),
    #[serde(default)]
    pub critical_point: Option<Vec<f64>>,
}

impl TransnormalSpec {
    pub fn profile(&self, n: usize) -> Result<TransnormalProfile> {
        let rho = parse(&self.rho, n)?;
        let b = parse_profile(&self.b)?;
        let mut p = TransnormalProfile::new(b, self.range)?.with_rho(rho);
        if let Some(o) = &self.critical_point {
            p = p.with_critical_point(o.clone());
        }
        Ok(p)
    }
}

/// `{"kind": .., "n": .., "params": {..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub n: usize,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transnormal: Option<TransnormalSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagonalParams {
    diag: Vec<String>,
    #[serde(default = "everywhere")]
    domain: Domain,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RandersParams {
    wind: Vec<String>,
    #[serde(default)]
    h: Option<Vec<Vec<f64>>>,
    #[serde(default = "everywhere")]
    domain: Domain,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereParams {
    #[serde(rename = "C")]
    c: f64,
    #[serde(default)]
    level: Option<LevelMetric>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WarpedParams {
    warp: String,
    level: LevelMetric,
    /// `null` bounds are infinite.
    t_range: (Option<f64>, Option<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    #[serde(rename = "F")]
    f: String,
    #[serde(default = "everywhere")]
    domain: Domain,
}

fn everywhere() -> Domain {
    Domain::Everywhere
}

fn params<T: for<'de> Deserialize<'de>>(spec: &MetricSpec) -> Result<T> {
    let v = if spec.params.is_null() {
        json!({})
    } else {
        spec.params.clone()
    };
    serde_json::from_value(v)
        .map_err(|e| FinslerError::InvalidParameter(format!("parameters for {:?}: {e}", spec.kind)))
}

/// A built metric with the intermediate data the checks need.
#[derive(Debug, Clone)]
pub struct Built {
    pub structure: FinslerStructure,
    pub warped: Option<WarpedStructure>,
    pub zermelo: Option<ZermeloData>,
    /// Set when a Randers structure was built although its navigation data
    /// violate `h(W, W) < 1` somewhere on the domain.
    pub construction_error: Option<FinslerError>,
}

fn parse_all(texts: &[String], n: usize) -> Result<Vec<Expr>> {
    texts.iter().map(|t| parse(t, n)).collect()
}

fn check_len(what: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(FinslerError::InvalidParameter(format!(
            "{what} has {got} components, expected {n}"
        )));
    }
    Ok(())
}

/// Build a spec; Randers data that fail validation are still built (without
/// the check) so that their defects can be reported.
pub fn build(spec: &MetricSpec) -> Result<Built> {
    let n = spec.n;
    if n < 1 {
        return Err(FinslerError::InvalidParameter("dimension must be positive".into()));
    }
    let mut built = match spec.kind {
        MetricKind::Euclidean => Built {
            structure: catalog::euclidean(n),
            warped: None,
            zermelo: None,
            construction_error: None,
        },
        MetricKind::RiemannianDiagonal => {
            let p: DiagonalParams = params(spec)?;
            check_len("diag", p.diag.len(), n)?;
            let diag = parse_all(&p.diag, n)?;
            Built {
                structure: catalog::riemannian_diagonal("riemannian-diagonal", diag, p.domain)?,
                warped: None,
                zermelo: None,
                construction_error: None,
            }
        }
        MetricKind::RandersZermelo => {
            let p: RandersParams = params(spec)?;
            check_len("wind", p.wind.len(), n)?;
            let h = match p.h {
                None => DMatrix::identity(n, n),
                Some(rows) => {
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(FinslerError::InvalidParameter(format!("h must be {n}x{n}")));
                    }
                    DMatrix::from_fn(n, n, |i, j| rows[i][j])
                }
            };
            let z = ZermeloData {
                n,
                h,
                wind: parse_all(&p.wind, n)?,
                domain: p.domain,
            };
            let (structure, construction_error) = match randers_from_zermelo(&z) {
                Ok(s) => (s, None),
                Err(e @ FinslerError::Construction(_)) => (randers_unchecked(&z)?, Some(e)),
                Err(e) => return Err(e),
            };
            Built {
                structure,
                warped: None,
                zermelo: Some(z),
                construction_error,
            }
        }
        MetricKind::SpherePolar => {
            let p: SphereParams = params(spec)?;
            let level = p.level.unwrap_or(LevelMetric::Round { c: p.c });
            let w = build_sphere_polar(p.c, n, level)?;
            Built {
                structure: w.structure.clone(),
                warped: Some(w),
                zermelo: None,
                construction_error: None,
            }
        }
        MetricKind::Warped => {
            let p: WarpedParams = params(spec)?;
            let warp = parse(&p.warp, 1)?;
            let range = (
                p.t_range.0.unwrap_or(f64::NEG_INFINITY),
                p.t_range.1.unwrap_or(f64::INFINITY),
            );
            let w = build_warped("warped", n, warp, p.level, range)?;
            Built {
                structure: w.structure.clone(),
                warped: Some(w),
                zermelo: None,
                construction_error: None,
            }
        }
        MetricKind::CustomF => {
            let p: CustomParams = params(spec)?;
            let f = parse(&p.f, n)?;
            Built {
                structure: FinslerStructure::from_expr("custom-F", n, f, p.domain)?,
                warped: None,
                zermelo: None,
                construction_error: None,
            }
        }
    };
    if let Some(label) = &spec.label {
        built.structure = built.structure.with_label(label.clone());
        if let Some(w) = &mut built.warped {
            w.structure = w.structure.clone().with_label(label.clone());
        }
    }
    Ok(built)
}

/// Build a spec, failing on any invalid parameter.
pub fn build_structure(spec: &MetricSpec) -> Result<FinslerStructure> {
    let built = build(spec)?;
    match built.construction_error {
        Some(e) => Err(e),
        None => Ok(built.structure),
    }
}

pub const PRESETS: [&str; 7] = [
    "euclidean",
    "sphere",
    "cosh-warp",
    "sin-warp",
    "flat-warp",
    "pond",
    "pond-bad-domain",
];

fn pond_spec(radius_sq: f64, label: &str) -> MetricSpec {
    MetricSpec {
        kind: MetricKind::RandersZermelo,
        n: 2,
        params: json!({
            "wind": ["(1/3)*x2", "-(1/3)*x1"],
            "domain": {"ball": {"radius_sq": radius_sq}},
        }),
        label: Some(label.into()),
        transnormal: Some(TransnormalSpec {
            rho: "x1^2+x2^2".into(),
            b: "4*s".into(),
            range: (0.0, radius_sq),
            critical_point: Some(vec![0.0, 0.0]),
        }),
    }
}

fn warped_spec(label: &str, n: usize, warp: &str, level: LevelMetric, range: (Option<f64>, Option<f64>)) -> MetricSpec {
    MetricSpec {
        kind: MetricKind::Warped,
        n,
        params: json!({"warp": warp, "level": level, "t_range": [range.0, range.1]}),
        label: Some(label.into()),
        transnormal: None,
    }
}

/// Named spec; `c` is used by `sphere` only.
pub fn preset(name: &str, n: usize, c: f64) -> Result<MetricSpec> {
    let pi = std::f64::consts::PI;
    let round = LevelMetric::Round { c: 1.0 };
    let spec = match name {
        "euclidean" => MetricSpec {
            kind: MetricKind::Euclidean,
            n,
            params: Value::Null,
            label: None,
            transnormal: None,
        },
        "sphere" => {
            let rho = if c == 1.0 {
                "-cos(x1)".to_string()
            } else {
                format!("-cos({c}*x1)/{c}")
            };
            MetricSpec {
                kind: MetricKind::SpherePolar,
                n,
                params: json!({"C": c}),
                label: Some("sphere-polar".into()),
                transnormal: Some(TransnormalSpec {
                    rho,
                    b: format!("1-{}*s^2", c * c),
                    range: (-1.0 / c, 1.0 / c),
                    critical_point: None,
                }),
            }
        }
        "cosh-warp" => {
            let level = if n == 2 {
                LevelMetric::Flat
            } else {
                LevelMetric::Hyperbolic
            };
            warped_spec("cosh-warp", n, "cosh(t)", level, (None, None))
        }
        "sin-warp" => warped_spec("sin-warp", n, "sin(t)", round, (Some(0.0), Some(pi))),
        "flat-warp" => warped_spec("flat-warp", n, "t", round, (Some(0.0), None)),
        "pond" => pond_spec(catalog::POND_RADIUS_SQ, "pond"),
        "pond-bad-domain" => pond_spec(3.5 * 3.5, "pond-bad-domain"),
        other => {
            return Err(FinslerError::InvalidParameter(format!(
                "unknown preset '{other}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    if name.starts_with("pond") && n != 2 {
        return Err(FinslerError::InvalidParameter(
            "the pond preset is 2-dimensional".into(),
        ));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_spec() {
        let s: MetricSpec = serde_json::from_str(r#"{"kind": "euclidean", "n": 2}"#).unwrap();
        let f = build_structure(&s).unwrap();
        assert_eq!(f.eval(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn sphere_polar_spec() {
        let s: MetricSpec = serde_json::from_str(r#"{"kind": "sphere-polar", "n": 2, "params": {"C": 1}}"#).unwrap();
        let f = build_structure(&s).unwrap();
        let (t, a, b) = (1.1f64, 0.5, 2.0);
        let expected = (a * a + t.sin().powi(2) * b * b).sqrt();
        assert!((f.eval(&[t, 0.0], &[a, b]) - expected).abs() < 1e-15);
    }

    #[test]
    fn pond_specs() {
        let f = build_structure(&preset("pond", 2, 1.0).unwrap()).unwrap();
        assert!((f.eval(&[1.0, 0.0], &[0.0, 1.0]) - 1.5).abs() < 1e-14);
        let bad = preset("pond-bad-domain", 2, 1.0).unwrap();
        match build_structure(&bad) {
            Err(FinslerError::Construction(msg)) => assert!(msg.contains("h(W,W)")),
            other => panic!("{other:?}"),
        }
        let lenient = build(&bad).unwrap();
        assert!(lenient.construction_error.is_some());
    }

    #[test]
    fn json_round_trip_of_presets() {
        for name in PRESETS {
            let n = if name.starts_with("pond") { 2 } else { 3 };
            let spec = preset(name, n, 2.0).unwrap();
            let text = serde_json::to_string(&spec).unwrap();
            let back: MetricSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
            build(&back).unwrap();
        }
    }

    #[test]
    fn bad_parameters() {
        let s: MetricSpec =
            serde_json::from_str(r#"{"kind": "randers-zermelo", "n": 2, "params": {"wind": ["x2"]}}"#).unwrap();
        assert!(matches!(build(&s), Err(FinslerError::InvalidParameter(_))));
        let s: MetricSpec = serde_json::from_str(r#"{"kind": "sphere-polar", "n": 2, "params": {}}"#).unwrap();
        assert!(build(&s).is_err());
        assert!(preset("torus", 2, 1.0).is_err());
    }
}
