//! Run configuration: a TOML file whose values command-line flags override.

use std::path::{Path, PathBuf};

use ridgeline::correspondence::CurveMode;
use ridgeline::curvature::Mode;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub inputs: Inputs,
    pub curvature: CurvatureSettings,
    pub curve: CurveSettings,
    pub template: TemplateSettings,
    pub stats: StatsSettings,
    pub simulate: SimulateSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub mesh: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub models: Option<PathBuf>,
}

impl Inputs {
    /// Make relative paths relative to `base` (the config file's directory).
    fn resolve(&mut self, base: &Path) {
        for slot in [
            &mut self.mesh,
            &mut self.landmarks,
            &mut self.spec,
            &mut self.template,
            &mut self.samples,
            &mut self.models,
        ] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureSettings {
    /// Neighbourhood radius (mm).
    pub radius: Option<f64>,
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSetting {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<CurveMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSettings {
    pub pairs: Vec<PairSetting>,
    pub mode: Option<CurveMode>,
    /// Number of cutting-plane angles.
    pub angles: Option<usize>,
    pub flexible: Option<bool>,
    pub lambda: Option<f64>,
    pub grid: Option<usize>,
    pub edf: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSettings {
    pub iterations: Option<usize>,
    /// RMS template change (mm) below which iteration stops.
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Size,
    Hotelling,
    Component,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSettings {
    pub metric: Option<Metric>,
    /// 1-based principal component for the per-component test.
    pub component: Option<usize>,
    pub perms: Option<usize>,
    /// Components in the Hotelling test; defaults to the smallest number
    /// reaching `variance`.
    pub q: Option<usize>,
    pub variance: Option<f64>,
    /// Scale configurations to unit centroid size before PCA.
    pub scale: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    X2,
    X3,
    Flat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub form: Option<Form>,
    /// Grid points per side of the bias surface.
    pub n: Option<usize>,
    pub radius: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub li: Option<f64>,
    pub ms: Option<f64>,
    pub delta: Option<f64>,
    pub reps: Option<usize>,
}

fn positive(field: &str, value: Option<f64>) -> CliResult<()> {
    match value {
        Some(v) if !(v.is_finite() && v > 0.0) => Err(CliError::config(field, format!("must be positive, got {v}"))),
        _ => Ok(()),
    }
}

fn non_negative(field: &str, value: Option<f64>) -> CliResult<()> {
    match value {
        Some(v) if !(v.is_finite() && v >= 0.0) => {
            Err(CliError::config(field, format!("must be non-negative, got {v}")))
        }
        _ => Ok(()),
    }
}

fn at_least(field: &str, value: Option<usize>, min: usize) -> CliResult<()> {
    match value {
        Some(v) if v < min => Err(CliError::config(field, format!("must be at least {min}, got {v}"))),
        _ => Ok(()),
    }
}

impl Settings {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut settings = Self::parse(&text).map_err(|e| match e {
            CliError::Config { field, message } => {
                CliError::Config { field, message: format!("{message} (in {})", path.display()) }
            }
            e => e,
        })?;
        settings.inputs.resolve(path.parent().unwrap_or(Path::new("")));
        Ok(settings)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|span| field_at(text, span)).unwrap_or_else(|| "config".into());
            CliError::config(&field, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialise")
    }

    pub fn validate(&self) -> CliResult<()> {
        at_least("threads", self.threads, 1)?;
        positive("curvature.radius", self.curvature.radius)?;
        for (i, p) in self.curve.pairs.iter().enumerate() {
            if p.from.is_empty() || p.to.is_empty() || p.from == p.to {
                return Err(CliError::config(&format!("curve.pairs[{i}]"), "needs two distinct landmark names"));
            }
        }
        at_least("curve.angles", self.curve.angles, 2)?;
        non_negative("curve.lambda", self.curve.lambda)?;
        at_least("curve.grid", self.curve.grid, 3)?;
        positive("curve.edf", self.curve.edf)?;
        at_least("template.iterations", self.template.iterations, 1)?;
        positive("template.tolerance", self.template.tolerance)?;
        at_least("stats.component", self.stats.component, 1)?;
        at_least("stats.perms", self.stats.perms, 1)?;
        at_least("stats.q", self.stats.q, 1)?;
        if let Some(v) = self.stats.variance {
            if !(v > 0.0 && v <= 1.0) {
                return Err(CliError::config("stats.variance", format!("must lie in (0, 1], got {v}")));
            }
        }
        at_least("simulate.n", self.simulate.n, 3)?;
        positive("simulate.radius", self.simulate.radius)?;
        non_negative("simulate.a", self.simulate.a)?;
        non_negative("simulate.b", self.simulate.b)?;
        non_negative("simulate.li", self.simulate.li)?;
        positive("simulate.ms", self.simulate.ms)?;
        non_negative("simulate.delta", self.simulate.delta)?;
        at_least("simulate.reps", self.simulate.reps, 1)?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }
}

/// Dotted path of the key or value at `span`: the enclosing `[table]`
/// header joined with the key on that line.
fn field_at(text: &str, span: std::ops::Range<usize>) -> String {
    let start = span.start.min(text.len());
    let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim().trim_matches('"');
    let table = text[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    match (table, key.is_empty() || key.starts_with('[')) {
        (Some(t), false) => format!("{t}.{key}"),
        (None, false) => key.to_string(),
        (Some(t), true) => t,
        (None, true) => "config".into(),
    }
}

/// Overwrite `slot` when the flag was given.
pub fn overlay<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}
