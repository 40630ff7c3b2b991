use ridgeline::simlab::bias::{bias_csv, bias_study, BiasForm, BiasOptions};
use ridgeline::simlab::ridge::{run_sim, SimConfig};
use serde_json::{json, Value};

use crate::error::CliResult;
use crate::output::Output;
use crate::settings::{Form, Settings};

pub fn bias(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let form = match s.simulate.form.unwrap_or(Form::X2) {
        Form::X2 => BiasForm::NegX2,
        Form::X3 => BiasForm::NegX3,
        Form::Flat => BiasForm::Flat,
    };
    let opts = BiasOptions {
        n: s.simulate.n.unwrap_or(41),
        radius: s.simulate.radius.unwrap_or(0.5),
        ..Default::default()
    };
    let rows = bias_study(form, &opts)?;
    out.write_text("bias.csv", &bias_csv(&rows))?;
    let (lo, hi) = opts.domain;
    let interior: Vec<_> = rows.iter().filter(|r| r.x - lo > 0.5 && hi - r.x > 0.5).collect();
    let max_error = interior.iter().filter_map(|r| r.relative_error()).map(f64::abs).fold(0.0, f64::max);
    let failed = rows.iter().filter(|r| r.estimated_kappa.is_none()).count();
    let summary = json!({
        "form": form,
        "radius": opts.radius,
        "n": opts.n,
        "interior_columns": interior.len(),
        "max_interior_relative_error": max_error,
        "failed_columns": failed,
    });
    out.write_json("bias.json", &summary)?;
    Ok(summary)
}

pub fn ridge(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let d = SimConfig::default();
    let config = SimConfig {
        a: s.simulate.a.unwrap_or(d.a),
        b: s.simulate.b.unwrap_or(d.b),
        li: s.simulate.li.unwrap_or(d.li),
        ms: s.simulate.ms,
        delta: s.simulate.delta.unwrap_or(d.delta),
        radius: s.simulate.radius.unwrap_or(d.radius),
        n_reps: s.simulate.reps.unwrap_or(d.n_reps),
        seed: s.seed(),
        ..d
    };
    let result = run_sim(&config)?;
    out.write_text("results.csv", &result.to_csv())?;
    let failures: Vec<_> = result
        .replicates
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({ "rep": r.rep, "error": e })))
        .collect();
    let mut warnings = Vec::new();
    if config.a == 0.0 {
        warnings.push("a = 0 is the straight-ridge limit".to_string());
    }
    for f in &result.summary.extrapolated {
        warnings.push(format!("{f} is outside the studied range"));
    }
    let summary = json!({
        "config": config,
        "grid_spacing": config.spacing(),
        "mean": result.summary.mean,
        "sd": result.summary.sd,
        "failures": result.summary.failures,
        "n_reps": result.summary.n_reps,
        "warnings": warnings,
        "failed_replicates": failures,
    });
    out.write_json("summary.json", &summary)?;
    Ok(json!({ "mean": result.summary.mean, "sd": result.summary.sd, "failures": result.summary.failures }))
}
