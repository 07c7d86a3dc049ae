//! The rotating pond: Zermelo navigation with wind `W = (x2, −x1)/3` on a
//! disk and the transnormal function `ρ = x1² + x2²`.
//!
//! Artifacts written to the output directory:
//!
//! | file | content |
//! |---|---|
//! | `check.json` | structure validation and `λ` range |
//! | `b_table.csv` | `g(grad ρ, grad ρ)` per level against the profile and the closed form `2·level` |
//! | `wavefront_levels.csv` | level polylines (`level, index, x1, x2`) |
//! | `wavefront_summary.json` | measured and predicted wavefront radii |
//! | `spiral_trace.csv` | integral curve of `grad ρ / F(grad ρ)` |
//! | `geodesic_trace.csv` | geodesic with the same initial data |
//! | `gamma_closed_form.csv` | the closed-form spiral `γ(t) = (√2t/2)(cos(t/3) − sin(t/3), sin(t/3) + cos(t/3))` |
//! | `wind_spiral.csv` | the spiral `r = t`, `θ = θ₀ − (t − t₀)/3` traced by the wind |
//! | `summary.json` | every deviation, with the internal checks that set the exit code |

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use anyhow::Context as _;
use finsler::catalog;
use finsler::geodesics::hausdorff_distance;
use finsler::tensors::verify_structure_seeded;
use finsler::transnormal::integral_curve;
use finsler::{BaseExpr, FinslerStructure};
use serde::Serialize;

use crate::commands::{level_passes, level_summaries, level_table, CmdResult, LevelSummary, Outcome};
use crate::config::RunConfig;
use crate::output::{to_json, write_text, Table};

const LEVELS: [f64; 3] = [1.0, 2.0, 4.0];
const SPIRAL_T0: f64 = 0.1;
const SPIRAL_T1: f64 = 4.0;
const CLOSED_FORM_STEP: f64 = 1e-3;
const POLYLINE_POINTS: usize = 128;

const B_TOLERANCE: f64 = 1e-6;
const RADIUS_TOLERANCE: f64 = 1e-3;
const HAUSDORFF_TOLERANCE: f64 = 1e-3;
const GEODESIC_TOLERANCE: f64 = 1e-4;
const GEODESIC_T_MAX: f64 = 2.0;

/// The closed-form spiral with `|γ(t)| = t`, turning counterclockwise.
pub fn gamma(t: f64) -> [f64; 2] {
    let a = t / 3.0;
    let k = std::f64::consts::SQRT_2 * t / 2.0;
    [k * (a.cos() - a.sin()), k * (a.sin() + a.cos())]
}

/// `r = t`, turning clockwise with the wind, through `gamma(t0)`.
pub fn wind_spiral(t: f64, t0: f64) -> [f64; 2] {
    let theta = FRAC_PI_4 + t0 / 3.0 - (t - t0) / 3.0;
    [t * theta.cos(), t * theta.sin()]
}

fn samples_between(f: impl Fn(f64) -> [f64; 2], t0: f64, t1: f64) -> Vec<(f64, [f64; 2])> {
    let steps = ((t1 - t0) / CLOSED_FORM_STEP).round() as usize;
    (0..=steps)
        .map(|k| {
            let t = t0 + (t1 - t0) * k as f64 / steps as f64;
            (t, f(t))
        })
        .collect()
}

fn curve_table(points: &[(f64, [f64; 2])]) -> Table {
    let mut t = Table::new(["t", "x1", "x2"]);
    for (s, p) in points {
        t.push(&[*s, p[0], p[1]]);
    }
    t
}

#[derive(Serialize)]
struct Criterion {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
}

impl Criterion {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Criterion {
            name,
            value,
            tolerance,
            passed: value < tolerance,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    structure: String,
    seed: u64,
    samples: usize,
    /// Consistency of the computation with itself; sets the exit code.
    internal: Vec<Criterion>,
    /// Agreement with the closed forms `g(grad ρ, grad ρ) = 2ρ`,
    /// `r = √(2c)` and the spiral `γ`; reported only.
    closed_form: Vec<Criterion>,
    spiral_end_t: f64,
    artifacts: Vec<&'static str>,
    passed: bool,
}

fn b_table(levels: &[LevelSummary]) -> Table {
    let mut t = Table::new([
        "level",
        "samples",
        "b_hat_mean",
        "b_hat_spread",
        "b_profile",
        "b_closed_form",
        "deviation_profile",
        "deviation_closed_form",
    ]);
    for l in levels {
        let closed = 2.0 * l.level;
        t.push(&[
            l.level,
            l.samples as f64,
            l.b_mean,
            l.b_spread,
            l.b_expected,
            closed,
            (l.b_mean - l.b_expected).abs(),
            (l.b_mean - closed).abs(),
        ]);
    }
    t
}

fn relative_b_deviation(levels: &[LevelSummary], target: impl Fn(&LevelSummary) -> f64) -> f64 {
    levels
        .iter()
        .map(|l| {
            let want = target(l);
            let worst = (l.b_mean - want).abs().max(l.b_spread);
            worst / want.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

pub fn run(dir: &Path, seed_flag: Option<u64>, config: Option<&Path>, samples: usize) -> CmdResult {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cfg.seed(seed_flag)?;
    let s: FinslerStructure = catalog::pond();
    let profile = catalog::pond_profile();
    let rho = BaseExpr {
        expr: catalog::pond_rho(),
        n: 2,
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let validity = verify_structure_seeded(&s, seed, samples);
    let lambda = catalog::pond_zermelo(catalog::POND_RADIUS_SQ).lambda_range();
    write_text(
        &dir.join("check.json"),
        &to_json(&serde_json::json!({
            "structure": s.label(),
            "seed": seed,
            "samples": samples,
            "passed": validity.passed,
            "checks": validity.checks,
            "lambda_range": lambda,
        }))?,
    )?;

    let levels = level_summaries(&s, &rho, &profile, &LEVELS, samples, seed)?;
    b_table(&levels).write(&dir.join("b_table.csv"))?;
    level_table(&s, &rho, &profile, &LEVELS, POLYLINE_POINTS, seed)?.write(&dir.join("wavefront_levels.csv"))?;
    write_text(
        &dir.join("wavefront_summary.json"),
        &to_json(&serde_json::json!({"seed": seed, "levels": levels}))?,
    )?;

    let start = gamma(SPIRAL_T0);
    let spiral = integral_curve(&s, &rho, &start, SPIRAL_T1 - SPIRAL_T0)?;
    let trace: Vec<(f64, [f64; 2])> = spiral
        .path
        .samples
        .iter()
        .map(|p| (SPIRAL_T0 + p.t, [p.x[0], p.x[1]]))
        .collect();
    curve_table(&trace).write(&dir.join("spiral_trace.csv"))?;
    if let Some(g) = &spiral.geodesic {
        let pts: Vec<(f64, [f64; 2])> = g.samples.iter().map(|p| (SPIRAL_T0 + p.t, [p.x[0], p.x[1]])).collect();
        curve_table(&pts).write(&dir.join("geodesic_trace.csv"))?;
    }
    let closed = samples_between(gamma, SPIRAL_T0, SPIRAL_T1);
    curve_table(&closed).write(&dir.join("gamma_closed_form.csv"))?;
    // The trace has |x| = t, so its end parameter bounds the comparable
    // stretch of the wind spiral.
    let t_end = trace.last().map_or(SPIRAL_T0, |p| p.0);
    let wind = samples_between(|t| wind_spiral(t, SPIRAL_T0), SPIRAL_T0, t_end);
    curve_table(&wind).write(&dir.join("wind_spiral.csv"))?;

    let trace_pts: Vec<Vec<f64>> = trace.iter().map(|p| p.1.to_vec()).collect();
    let closed_pts: Vec<Vec<f64>> = closed.iter().map(|p| p.1.to_vec()).collect();
    let wind_pts: Vec<Vec<f64>> = wind.iter().map(|p| p.1.to_vec()).collect();
    let short = integral_curve(&s, &rho, &start, GEODESIC_T_MAX)?;

    let internal = vec![
        Criterion::new(
            "structure_check_failures",
            validity.checks.iter().filter(|c| !c.passed).count() as f64,
            0.5,
        ),
        Criterion::new(
            "b_hat_vs_profile",
            relative_b_deviation(&levels, |l| l.b_expected),
            B_TOLERANCE,
        ),
        Criterion::new(
            "radius_vs_quadrature",
            levels.iter().map(|l| l.deviation).fold(0.0, f64::max),
            RADIUS_TOLERANCE,
        ),
        Criterion::new(
            "spiral_vs_wind_spiral_hausdorff",
            hausdorff_distance(&trace_pts, &wind_pts),
            HAUSDORFF_TOLERANCE,
        ),
        Criterion::new(
            "integral_curve_vs_geodesic",
            short.max_geodesic_deviation,
            GEODESIC_TOLERANCE,
        ),
    ];
    let internal_ok =
        internal.iter().all(|c| c.passed) && levels.iter().all(|l| level_passes(l, RADIUS_TOLERANCE, B_TOLERANCE));
    let closed_form = vec![
        Criterion::new(
            "b_hat_vs_2rho",
            relative_b_deviation(&levels, |l| 2.0 * l.level),
            B_TOLERANCE,
        ),
        Criterion::new(
            "radius_vs_sqrt_2c",
            levels
                .iter()
                .map(|l| (l.measured_radius - (2.0 * l.level).sqrt()).abs())
                .fold(0.0, f64::max),
            RADIUS_TOLERANCE,
        ),
        Criterion::new(
            "spiral_vs_gamma_hausdorff",
            hausdorff_distance(&trace_pts, &closed_pts),
            HAUSDORFF_TOLERANCE,
        ),
    ];
    let summary = Summary {
        command: "pond-demo",
        structure: s.label().to_string(),
        seed,
        samples,
        internal,
        closed_form,
        spiral_end_t: t_end,
        artifacts: vec![
            "check.json",
            "b_table.csv",
            "wavefront_levels.csv",
            "wavefront_summary.json",
            "spiral_trace.csv",
            "geodesic_trace.csv",
            "gamma_closed_form.csv",
            "wind_spiral.csv",
            "summary.json",
        ],
        passed: internal_ok,
    };
    let text = to_json(&summary)?;
    write_text(&dir.join("summary.json"), &text)?;
    Ok(Outcome {
        passed: internal_ok,
        stdout: text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_spirals_have_radius_t() {
        for t in [0.1, 1.0, 2.5] {
            let g = gamma(t);
            let w = wind_spiral(t, 0.1);
            assert!((g[0].hypot(g[1]) - t).abs() < 1e-14);
            assert!((w[0].hypot(w[1]) - t).abs() < 1e-14);
        }
        let (g, w) = (gamma(0.1), wind_spiral(0.1, 0.1));
        assert!((g[0] - w[0]).abs() < 1e-15 && (g[1] - w[1]).abs() < 1e-15);
    }

    #[test]
    fn closed_form_sampling_covers_interval() {
        let pts = samples_between(gamma, 0.1, 4.0);
        assert_eq!(pts.len(), 3901);
        assert_eq!(pts[0].0, 0.1);
        assert_eq!(pts.last().unwrap().0, 4.0);
    }
}
