//! Run configuration: metric reference, seed, tolerances and output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use finsler::dsl::{build, preset, Built, PRESETS};
use finsler::MetricSpec;
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "FINSLER_SEED";

/// A preset name, a path to a spec file, or an inline spec.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MetricRef {
    Inline(MetricSpec),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Contents of a `--config` file. Every field is optional; command-line
/// flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: Option<MetricRef>,
    pub n: Option<usize>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub output: Option<OutputSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative spec paths are resolved against the config file.
        Ok(match cfg.metric {
            Some(MetricRef::Named(ref name)) if looks_like_path(name) => {
                let base = path.parent().unwrap_or(Path::new("."));
                RunConfig {
                    metric: Some(MetricRef::Named(base.join(name).to_string_lossy().into_owned())),
                    ..cfg
                }
            }
            _ => cfg,
        })
    }

    /// Seed from the config, overridden by `FINSLER_SEED`, overridden by an
    /// explicit flag.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            return v
                .trim()
                .parse()
                .map_err(|_| anyhow!("{SEED_ENV}={v:?} is not a non-negative integer"));
        }
        Ok(self.seed.unwrap_or(DEFAULT_SEED))
    }

    /// Tolerance `key`, checked against the keys the command understands.
    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    pub fn check_tolerance_keys(&self, known: &[&str]) -> Result<()> {
        for (k, v) in &self.tolerances {
            if !known.contains(&k.as_str()) {
                bail!("unknown tolerance '{k}' (known: {})", known.join(", "));
            }
            if !(*v > 0.0) {
                bail!("tolerance '{k}' must be positive, got {v}");
            }
        }
        Ok(())
    }

    pub fn output_path(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.output.as_ref().and_then(|o| o.path.clone()))
    }

    pub fn format(&self, flag: Option<Format>) -> Format {
        flag.or_else(|| self.output.as_ref().and_then(|o| o.format))
            .unwrap_or(Format::Json)
    }
}

fn looks_like_path(s: &str) -> bool {
    s.ends_with(".json") || s.contains('/') || s.contains(std::path::MAIN_SEPARATOR)
}

/// Load the metric spec named by `metric` (flag first, then config).
pub fn resolve_spec(cfg: &RunConfig, metric: Option<&str>, n: Option<usize>, c: Option<f64>) -> Result<MetricSpec> {
    let n = n.or(cfg.n).unwrap_or(2);
    let c = c.or(cfg.c).unwrap_or(1.0);
    if !(c > 0.0) || !c.is_finite() {
        bail!("C must be positive and finite, got {c}");
    }
    if n == 0 {
        bail!("dimension must be at least 1");
    }
    let reference = match metric {
        Some(m) => MetricRef::Named(m.to_string()),
        None => cfg
            .metric
            .clone()
            .ok_or_else(|| anyhow!("no metric given (use --metric or a config with \"metric\")"))?,
    };
    match reference {
        MetricRef::Inline(spec) => Ok(spec),
        MetricRef::Named(name) => {
            let path = Path::new(&name);
            if path.is_file() {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing metric spec {}", path.display()))
            } else if looks_like_path(&name) {
                bail!("metric file {name} does not exist")
            } else if PRESETS.contains(&name.as_str()) {
                Ok(preset(&name, n, c)?)
            } else {
                bail!(
                    "unknown metric '{name}': not a file and not a preset ({})",
                    PRESETS.join(", ")
                )
            }
        }
    }
}

pub fn build_spec(spec: &MetricSpec) -> Result<Built> {
    build(spec).map_err(|e| anyhow!("invalid metric: {e}"))
}

/// Parse `"a,b,c"` into floats.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| anyhow!("'{t}' is not a number"))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(anyhow!("'{t}' is not finite"))
                    }
                })
        })
        .collect()
}
