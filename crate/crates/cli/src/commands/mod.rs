mod export;
mod geometry;
mod models;
mod simulate;
mod stats;

use std::path::Path;

use ridgeline::correspondence::CurveMode;
use ridgeline::pipeline::CurveOptions;
use serde_json::Value;

use crate::args::{Command, ExportCommand, ModelCommand, SimulateCommand, StatsCommand, TemplateCommand};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::settings::Settings;

pub fn run(command: &Command, s: &Settings, out: &mut Output) -> CliResult<Value> {
    match command {
        Command::Curvature(_) => geometry::curvature(s, out),
        Command::Curve(_) => geometry::curve(s, out),
        Command::Template(TemplateCommand::Make(_)) => models::template_make(s, out),
        Command::Template(TemplateCommand::Iterate(_)) => models::template_iterate(s, out),
        Command::Model(ModelCommand::Build(_)) => models::model_build(s, out, false),
        Command::Model(ModelCommand::Slide(_)) => models::model_build(s, out, true),
        Command::Stats(StatsCommand::Pca(_)) => stats::pca(s, out),
        Command::Stats(StatsCommand::Permtest(_)) => stats::permtest(s, out),
        Command::Simulate(SimulateCommand::Bias(_)) => simulate::bias(s, out),
        Command::Simulate(SimulateCommand::Ridge(_)) => simulate::ridge(s, out),
        Command::Export(ExportCommand::Fixture(a)) => export::fixture(a, s, out),
        Command::Export(ExportCommand::Mesh(a)) => export::mesh(a, out),
    }
}

fn require<'a>(value: &'a Option<std::path::PathBuf>, field: &str, flag: &str) -> CliResult<&'a Path> {
    value.as_deref().ok_or_else(|| CliError::config(field, format!("required (pass {flag} or set it in the config)")))
}

/// Curve settings with the command's default for the flexible stage.
fn curve_options(s: &Settings, flexible_default: bool) -> CurveOptions {
    let mut o = CurveOptions::default();
    if let Some(n) = s.curve.angles {
        o.search.n_angles = n;
    }
    o.flexible = s.curve.flexible.unwrap_or(flexible_default);
    if let Some(l) = s.curve.lambda {
        o.ridge.lambda = l;
    }
    if let Some(g) = s.curve.grid {
        o.ridge.n_grid = g;
    }
    if let Some(e) = s.curve.edf {
        o.fit.target_edf = e;
    }
    o
}

fn mode_name(mode: CurveMode) -> &'static str {
    match mode {
        CurveMode::Valley => "valley",
        CurveMode::Ridge => "ridge",
        CurveMode::Minlen => "minlen",
    }
}
