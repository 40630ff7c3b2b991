use ridgeline::correspondence::CurveMode;
use ridgeline::curvature::{CurvatureField, CurvatureOptions, Mode};
use ridgeline::meshcore::load_mesh;
use ridgeline::pipeline::estimate_curve;
use ridgeline::refpath::PathCriterion;
use serde_json::{json, Value};

use super::{curve_options, mode_name, require};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::samples::load_sample;
use crate::settings::Settings;

pub fn curvature(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let mesh = load_mesh(require(&s.inputs.mesh, "inputs.mesh", "MESH")?)?;
    let opts = CurvatureOptions {
        radius: s.curvature.radius.unwrap_or(10.0),
        mode: s.curvature.mode.unwrap_or(Mode::Valley),
        ..Default::default()
    };
    let field = CurvatureField::compute(&mesh, &opts)?;
    out.write_text("curvature.csv", &field.to_csv())?;
    Ok(json!({ "vertices": mesh.vertex_count(), "undefined": field.undefined_count() }))
}

pub fn curve(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let mesh_path = require(&s.inputs.mesh, "inputs.mesh", "MESH")?;
    let lm_path = require(&s.inputs.landmarks, "inputs.landmarks", "--landmarks")?;
    if s.curve.pairs.is_empty() {
        return Err(CliError::config("curve.pairs", "no landmark pair given (pass --pair NAME1,NAME2)"));
    }
    let (mesh, landmarks) = load_sample(mesh_path, lm_path)?;
    let mut ends = Vec::new();
    for p in &s.curve.pairs {
        ends.push((landmarks.get(&p.from)?, landmarks.get(&p.to)?));
    }
    let modes: Vec<CurveMode> =
        s.curve.pairs.iter().map(|p| p.mode.or(s.curve.mode).unwrap_or(CurveMode::Valley)).collect();

    let opts = curve_options(s, false);
    let valley = if modes.iter().any(|&m| m != CurveMode::Minlen) {
        let copts = CurvatureOptions {
            radius: s.curvature.radius.unwrap_or(10.0),
            mode: Mode::Valley,
            ..Default::default()
        };
        Some(CurvatureField::compute(&mesh, &copts)?)
    } else {
        None
    };
    let ridge = valley.as_ref().map(|f| f.with_mode(Mode::Ridge));
    let flat = CurvatureField::from_strength(vec![0.0; mesh.vertex_count()], Mode::Valley);

    let mut summaries = Vec::new();
    for ((pair, &(l1, l2)), &mode) in s.curve.pairs.iter().zip(&ends).zip(&modes) {
        let mut o = opts;
        let field = match mode {
            CurveMode::Valley => valley.as_ref().unwrap(),
            CurveMode::Ridge => ridge.as_ref().unwrap(),
            CurveMode::Minlen => {
                o.search.criterion = PathCriterion::MinLength;
                o.flexible = false;
                &flat
            }
        };
        let name = format!("{}-{}", pair.from, pair.to);
        let est = estimate_curve(&mesh, field, l1, l2, &o)
            .map_err(|e| ridgeline::Error::Sample { sample: name.clone(), source: Box::new(e) })?;
        out.write_text(&format!("{name}.csv"), &est.curve.to_csv())?;
        let reference = est.reference_summary();
        let convergence = est.solution.as_ref().map(|sol| {
            json!({
                "iterations": sol.iterations,
                "converged": sol.converged,
                "stalled": sol.stalled,
                "gradient_norm": sol.gradient_norm,
                "objective": sol.objective(),
                "objective_trace": sol.objective_trace,
                "lambda": sol.lambda,
            })
        });
        let sidecar = json!({
            "from": pair.from,
            "to": pair.to,
            "mode": mode_name(mode),
            "flexible": o.flexible,
            "gamma_deg": reference.gamma.to_degrees(),
            "reference_score": reference.score,
            "reference_length": reference.length,
            "refined": reference.refined,
            "length": est.curve.length(),
            "points": est.curve.len(),
            "edf": est.surface.as_ref().map(|f| f.edf),
            "convergence": convergence,
        });
        out.write_json(&format!("{name}.json"), &sidecar)?;
        summaries.push(json!({ "pair": name, "length": est.curve.length() }));
    }
    Ok(json!({ "curves": summaries }))
}
