use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use finsler::dsl::Built;
use finsler::geodesics::Integrator;
use finsler::rigidity::rigidity_report;
use finsler::tensors::{verify_structure, ValidityTolerances};
use finsler::transnormal::{level_polyline, sample_level, wavefront_check, Classification};
use finsler::zermelo::LambdaRange;
use finsler::{
    classify_by_critical_points, constant_curvature_scan, integrate_geodesic, k_form_check, parse, parse_profile,
    transnormality_test, BaseExpr, FinslerError, FinslerStructure, MetricSpec, TransnormalProfile,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{build_spec, parse_list, resolve_spec, Format, RunConfig};
use crate::output::{numbered, to_json, write_text, Table};
use crate::Common;

pub enum CmdError {
    /// Bad flags, unreadable or invalid configuration: exit 2.
    Usage(anyhow::Error),
    /// A computation could not complete: exit 1.
    Failed(anyhow::Error),
}

impl From<anyhow::Error> for CmdError {
    fn from(e: anyhow::Error) -> Self {
        CmdError::Usage(e)
    }
}

impl From<FinslerError> for CmdError {
    fn from(e: FinslerError) -> Self {
        CmdError::Failed(e.into())
    }
}

pub type CmdResult = Result<Outcome, CmdError>;

pub struct Outcome {
    pub passed: bool,
    pub stdout: String,
}

fn usage(msg: impl std::fmt::Display) -> CmdError {
    CmdError::Usage(anyhow!("{msg}"))
}

/// Everything a command needs from the common flags.
pub struct Context {
    pub cfg: RunConfig,
    pub seed: u64,
    pub spec: MetricSpec,
    pub built: Built,
}

impl Context {
    pub fn load(common: &Common, tolerance_keys: &[&str]) -> Result<Self, CmdError> {
        let cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.check_tolerance_keys(tolerance_keys)?;
        let seed = cfg.seed(common.seed)?;
        let spec = resolve_spec(&cfg, common.metric.as_deref(), common.n, common.c)?;
        let built = build_spec(&spec)?;
        Ok(Context { cfg, seed, spec, built })
    }

    fn structure(&self) -> &FinslerStructure {
        &self.built.structure
    }

    fn c(&self, common: &Common) -> f64 {
        common.c.or(self.cfg.c).unwrap_or(1.0)
    }

    fn out(&self, common: &Common) -> Option<PathBuf> {
        self.cfg.output_path(common.out.clone())
    }
}

/// Write `json` to `--out` when given; always echo it to stdout.
fn emit_json<T: Serialize>(ctx: &Context, common: &Common, report: &T, passed: bool) -> CmdResult {
    let text = to_json(report)?;
    if let Some(p) = ctx.out(common) {
        write_text(&p, &text)?;
    }
    Ok(Outcome { passed, stdout: text })
}

#[derive(Serialize)]
struct CheckReport<'a> {
    command: &'static str,
    structure: &'a str,
    seed: u64,
    samples: usize,
    passed: bool,
    checks: &'a [finsler::tensors::CheckOutcome],
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_range: Option<LambdaRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    construction_error: Option<String>,
}

const CHECK_KEYS: [&str; 3] = ["homogeneity", "metric_homogeneity", "euler"];

pub fn check(common: &Common, samples: usize) -> CmdResult {
    let ctx = Context::load(common, &CHECK_KEYS)?;
    let s = ctx.structure();
    let defaults = ValidityTolerances::default();
    let tol = ValidityTolerances {
        homogeneity: ctx.cfg.tolerance("homogeneity", defaults.homogeneity),
        metric_homogeneity: ctx.cfg.tolerance("metric_homogeneity", defaults.metric_homogeneity),
        euler: ctx.cfg.tolerance("euler", defaults.euler),
        ..defaults
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let n = s.dim();
    let domain = s.domain().clone();
    let mut sampler = || {
        let x = domain.sample(n, &mut rng);
        let y = finsler::structure::sample_fiber(n, &mut rng);
        (x, y)
    };
    let report = verify_structure(s, &mut sampler, samples, tol);
    let construction_error = ctx.built.construction_error.as_ref().map(|e| e.to_string());
    let passed = report.passed && construction_error.is_none();
    let out = CheckReport {
        command: "check",
        structure: s.label(),
        seed: ctx.seed,
        samples,
        passed,
        checks: &report.checks,
        lambda_range: ctx.built.zermelo.as_ref().map(|z| z.lambda_range()),
        construction_error,
    };
    emit_json(&ctx, common, &out, passed)
}

#[derive(Serialize)]
struct CurvatureReport<'a> {
    command: &'static str,
    structure: &'a str,
    seed: u64,
    samples: usize,
    #[serde(rename = "mean_K")]
    mean_k: f64,
    max_dev: f64,
    failures: usize,
    witnesses: &'a [finsler::connections::FlagWitness],
    #[serde(skip_serializing_if = "Option::is_none")]
    expect: Option<f64>,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_form: Option<finsler::rigidity::KFormReport>,
    passed: bool,
}

const CURVATURE_TOLERANCE: f64 = 1e-4;

pub fn curvature(common: &Common, samples: usize, expect: Option<f64>) -> CmdResult {
    let ctx = Context::load(common, &["curvature"])?;
    let s = ctx.structure();
    let tol = ctx.cfg.tolerance("curvature", CURVATURE_TOLERANCE);
    let scan = constant_curvature_scan(s, samples, ctx.seed);
    let k_form = expect.map(|k| k_form_check(s, k, samples, ctx.seed.wrapping_add(1)));
    let passed = scan.failures < samples
        && match expect {
            Some(k) => (scan.mean_k - k).abs() < tol && scan.max_dev < tol,
            None => true,
        };
    if ctx.cfg.format(common.format) == Format::Csv {
        let n = s.dim();
        let mut t = Table::new(
            numbered("x", n)
                .chain(numbered("y", n))
                .chain(numbered("e", n))
                .chain(["K".to_string()]),
        );
        for (x, y, e) in s.sample_flags(samples, ctx.seed) {
            let k = finsler::flag_curvature(s, &x, &y, &e).unwrap_or(f64::NAN);
            t.push(&[x, y, e, vec![k]].concat());
        }
        let csv = t.to_csv()?;
        return match ctx.out(common) {
            Some(p) => {
                write_text(&p, &csv)?;
                let summary = to_json(&serde_json::json!({
                    "command": "curvature",
                    "seed": ctx.seed,
                    "csv": p.to_string_lossy(),
                    "mean_K": scan.mean_k,
                    "passed": passed,
                }))?;
                Ok(Outcome {
                    passed,
                    stdout: summary,
                })
            }
            None => Ok(Outcome { passed, stdout: csv }),
        };
    }
    let report = CurvatureReport {
        command: "curvature",
        structure: s.label(),
        seed: ctx.seed,
        samples,
        mean_k: scan.mean_k,
        max_dev: scan.max_dev,
        failures: scan.failures,
        witnesses: &scan.witnesses,
        expect,
        tolerance: tol,
        k_form,
        passed,
    };
    emit_json(&ctx, common, &report, passed)
}

#[derive(Serialize)]
struct GeodesicReport<'a> {
    command: &'static str,
    structure: &'a str,
    seed: u64,
    csv: String,
    samples: usize,
    t_end: f64,
    end: Vec<f64>,
    initial_speed: f64,
    speed_drift: f64,
    truncated: bool,
    passed: bool,
}

/// Relative speed drift accepted for a geodesic path.
const SPEED_DRIFT_TOLERANCE: f64 = 1e-6;

pub fn geodesic(common: &Common, x0: &str, y0: &str, t_max: f64, step: f64) -> CmdResult {
    let ctx = Context::load(common, &["speed_drift"])?;
    let s = ctx.structure();
    let x0 = parse_list(x0)?;
    let y0 = parse_list(y0)?;
    let n = s.dim();
    if x0.len() != n || y0.len() != n {
        return Err(usage(format!("x0 and y0 need {n} components")));
    }
    let path = match integrate_geodesic(s, &x0, &y0, t_max, Integrator::Rk4 { step }) {
        Err(
            e @ (FinslerError::InvalidStep(_) | FinslerError::InvalidParameter(_) | FinslerError::Dimension { .. }),
        ) => return Err(usage(e)),
        other => other?,
    };
    let mut table = Table::new(
        std::iter::once("t".to_string())
            .chain(numbered("x", n))
            .chain(numbered("y", n))
            .chain(["F".to_string()]),
    );
    for p in &path.samples {
        let f = s.eval(&p.x, &p.v);
        table.push(&[vec![p.t], p.x.clone(), p.v.clone(), vec![f]].concat());
    }
    let csv_path = ctx.out(common).unwrap_or_else(|| PathBuf::from("geodesic.csv"));
    table.write(&csv_path)?;
    let tol = ctx.cfg.tolerance("speed_drift", SPEED_DRIFT_TOLERANCE);
    let passed = path.speed_drift < tol * path.initial_speed;
    let report = GeodesicReport {
        command: "geodesic",
        structure: s.label(),
        seed: ctx.seed,
        csv: csv_path.to_string_lossy().into_owned(),
        samples: path.samples.len(),
        t_end: path.t_end(),
        end: path.end().x.clone(),
        initial_speed: path.initial_speed,
        speed_drift: path.speed_drift,
        truncated: path.truncated,
        passed,
    };
    Ok(Outcome {
        passed,
        stdout: to_json(&report)?,
    })
}

/// Transnormal data; each flag overrides the metric spec's `transnormal`.
#[derive(Args, Clone, Default)]
pub struct ProfileArgs {
    /// Scalar field ρ(x1..xn).
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    /// Profile 𝔟(s) with g(grad ρ, grad ρ) = 𝔟(ρ).
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Value range "a,c" of ρ.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Point where ρ attains its critical value.
    #[arg(long, allow_hyphen_values = true)]
    pub critical_point: Option<String>,
}

impl ProfileArgs {
    fn profile(&self, spec: &MetricSpec) -> Result<TransnormalProfile, CmdError> {
        let base = spec.transnormal.as_ref();
        let rho = self.rho.clone().or_else(|| base.map(|t| t.rho.clone()));
        let b = self
            .b
            .clone()
            .or_else(|| base.map(|t| t.b.clone()))
            .ok_or_else(|| usage("no profile: give --b and --range or use a metric with transnormal data"))?;
        let range = match &self.range {
            Some(r) => match parse_list(r)?.as_slice() {
                [a, c] => (*a, *c),
                _ => return Err(usage("--range needs two values a,c")),
            },
            None => base
                .map(|t| t.range)
                .ok_or_else(|| usage("no range: give --range a,c"))?,
        };
        let critical = match &self.critical_point {
            Some(p) => Some(parse_list(p)?),
            // A user-supplied ρ invalidates the spec's critical point.
            None if self.rho.is_none() => base.and_then(|t| t.critical_point.clone()),
            None => None,
        };
        let b = parse_profile(&b).map_err(usage)?;
        let mut p = TransnormalProfile::new(b, range).map_err(usage)?;
        if let Some(r) = rho {
            p = p.with_rho(parse(&r, spec.n).map_err(usage)?);
        }
        if let Some(o) = critical {
            if o.len() != spec.n {
                return Err(usage(format!("critical point needs {} components", spec.n)));
            }
            p = p.with_critical_point(o);
        }
        Ok(p)
    }
}

#[derive(Serialize)]
pub struct LevelSummary {
    pub level: f64,
    pub expected_radius: f64,
    pub measured_radius: f64,
    pub deviation: f64,
    pub samples: usize,
    pub b_expected: f64,
    pub b_mean: f64,
    pub b_spread: f64,
}

#[derive(Serialize)]
struct WavefrontReport<'a> {
    command: &'static str,
    structure: &'a str,
    seed: u64,
    rho: String,
    b: String,
    radius_tolerance: f64,
    b_tolerance: f64,
    levels: Vec<LevelSummary>,
    csv: String,
    passed: bool,
}

const RADIUS_TOLERANCE: f64 = 1e-3;
const B_TOLERANCE: f64 = 1e-6;

/// Per-level transnormality statistics and wavefront radii.
pub fn level_summaries(
    s: &FinslerStructure,
    rho: &BaseExpr,
    profile: &TransnormalProfile,
    levels: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<LevelSummary>, FinslerError> {
    let mut out = Vec::with_capacity(levels.len());
    for &c in levels {
        let stats = transnormality_test(s, rho, &[c], samples, seed)?.remove(0);
        let (w, _) = wavefront_check(s, rho, profile, c, samples, seed)?;
        out.push(LevelSummary {
            level: c,
            expected_radius: w.expected_radius,
            measured_radius: w.measured_radius,
            deviation: w.deviation,
            samples: w.samples,
            b_expected: profile.b_at(c),
            b_mean: stats.mean_b,
            b_spread: stats.spread,
        });
    }
    Ok(out)
}

pub fn level_passes(l: &LevelSummary, radius_tol: f64, b_tol: f64) -> bool {
    let scale = l.b_expected.abs().max(1.0);
    l.deviation < radius_tol && (l.b_mean - l.b_expected).abs() < b_tol * scale && l.b_spread < b_tol * scale
}

/// Level points: ordered polylines for planar fields with a known critical
/// point, otherwise sampled points.
pub fn level_table(
    s: &FinslerStructure,
    rho: &BaseExpr,
    profile: &TransnormalProfile,
    levels: &[f64],
    points: usize,
    seed: u64,
) -> Result<Table, FinslerError> {
    let n = s.dim();
    let mut t = Table::new(
        ["level".to_string(), "index".to_string()]
            .into_iter()
            .chain(numbered("x", n)),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &c in levels {
        let pts = match (&profile.critical_point, n) {
            (Some(o), 2) => polyline(rho, o, c, points)?,
            _ => sample_level(s, rho, c, points, &mut rng)?,
        };
        for (i, p) in pts.iter().enumerate() {
            t.push(&[vec![c, i as f64], p.clone()].concat());
        }
    }
    Ok(t)
}

fn polyline(rho: &BaseExpr, center: &[f64], c: f64, points: usize) -> Result<Vec<Vec<f64>>, FinslerError> {
    let mut r_max = 1.0;
    loop {
        match level_polyline(rho, center, c, points, r_max) {
            Err(FinslerError::EmptyLevel(_)) if r_max < 1e6 => r_max *= 2.0,
            other => return other,
        }
    }
}

pub fn wavefront(common: &Common, args: &ProfileArgs, levels: &str, samples: usize, points: usize) -> CmdResult {
    let ctx = Context::load(common, &["radius", "b"])?;
    let s = ctx.structure();
    let profile = args.profile(&ctx.spec)?;
    let rho_expr = profile
        .rho
        .clone()
        .ok_or_else(|| usage("no scalar field: give --rho"))?;
    let rho = BaseExpr {
        expr: rho_expr.clone(),
        n: s.dim(),
    };
    let levels = parse_list(levels)?;
    if samples == 0 || points == 0 {
        return Err(usage("samples and points must be positive"));
    }
    let radius_tol = ctx.cfg.tolerance("radius", RADIUS_TOLERANCE);
    let b_tol = ctx.cfg.tolerance("b", B_TOLERANCE);
    let summaries = level_summaries(s, &rho, &profile, &levels, samples, ctx.seed)?;
    let passed = summaries.iter().all(|l| level_passes(l, radius_tol, b_tol));
    let dir = ctx.out(common).unwrap_or_else(|| PathBuf::from("wavefront"));
    let table = level_table(s, &rho, &profile, &levels, points, ctx.seed)?;
    let csv = dir.join("levels.csv");
    table.write(&csv)?;
    let report = WavefrontReport {
        command: "wavefront",
        structure: s.label(),
        seed: ctx.seed,
        rho: rho_expr.to_string(),
        b: profile.b.to_string(),
        radius_tolerance: radius_tol,
        b_tolerance: b_tol,
        levels: summaries,
        csv: csv.to_string_lossy().into_owned(),
        passed,
    };
    let text = to_json(&report)?;
    write_text(&dir.join("summary.json"), &text)?;
    Ok(Outcome { passed, stdout: text })
}

pub fn rigidity(common: &Common, samples: usize) -> CmdResult {
    let ctx = Context::load(common, &[])?;
    let c = ctx.c(common);
    let report = rigidity_report(ctx.structure(), c, samples, ctx.seed)?;
    #[derive(Serialize)]
    struct Wrapped<'a> {
        command: &'static str,
        #[serde(flatten)]
        report: &'a finsler::rigidity::RigidityReport,
    }
    let passed = report.passed;
    emit_json(
        &ctx,
        common,
        &Wrapped {
            command: "rigidity",
            report: &report,
        },
        passed,
    )
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    command: &'static str,
    seed: u64,
    b: String,
    range: (f64, f64),
    #[serde(flatten)]
    classification: &'a Classification,
}

pub fn classify(common: &Common, args: &ProfileArgs) -> CmdResult {
    // A metric is optional here: the classifier only reads the profile.
    let needs_metric = common.metric.is_some() || common.config.is_some();
    let (ctx, spec) = if needs_metric {
        let ctx = Context::load(common, &[])?;
        let spec = ctx.spec.clone();
        (Some(ctx), spec)
    } else {
        let spec = finsler::dsl::preset("euclidean", common.n.unwrap_or(1), 1.0).map_err(usage)?;
        (None, spec)
    };
    let seed = match &ctx {
        Some(c) => c.seed,
        None => RunConfig::default().seed(common.seed)?,
    };
    let profile = args.profile(&spec)?;
    let classification = match classify_by_critical_points(&profile) {
        Ok(c) => c,
        Err(e @ FinslerError::InvalidProfile(_)) => return Err(CmdError::Failed(e.into())),
        Err(e) => return Err(e.into()),
    };
    let report = ClassifyReport {
        command: "classify",
        seed,
        b: profile.b.to_string(),
        range: profile.range,
        classification: &classification,
    };
    let text = to_json(&report)?;
    if let Some(p) = common
        .out
        .as_deref()
        .map(Path::to_path_buf)
        .or_else(|| ctx.as_ref().and_then(|c| c.out(common)))
    {
        write_text(&p, &text)?;
    }
    Ok(Outcome {
        passed: true,
        stdout: text,
    })
}
