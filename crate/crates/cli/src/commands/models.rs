use std::path::Path;

use rayon::prelude::*;
use ridgeline::correspondence::{
    build_model, estimate_anatomy, iterate_template_mean, make_template, Anatomy, BuildOptions, ModelSpec,
    TemplateModel,
};
use ridgeline::meshcore::{save_mesh, Mesh, MeshFormat};
use ridgeline::Point3;
use serde_json::{json, Value};

use super::{curve_options, require};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::samples::{load_sample, ModelSet, NamedModel, SampleList};
use crate::settings::Settings;

fn load_spec(s: &Settings) -> CliResult<ModelSpec> {
    let path = require(&s.inputs.spec, "inputs.spec", "--spec")?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut spec: ModelSpec = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| CliError::config("spec", format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::config("spec", format!("{}: {e}", path.display())))?
    };
    if let Some(r) = s.curvature.radius {
        spec.curvature_radius = r;
    }
    spec.validate()?;
    Ok(spec)
}

fn load_template(path: &Path, spec: &ModelSpec) -> CliResult<TemplateModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let t: TemplateModel = serde_json::from_str(&text).map_err(ridgeline::Error::from)?;
    if t.labels != spec.labels() {
        return Err(CliError::config("inputs.template", "template points do not match the model layout"));
    }
    Ok(t)
}

fn build_options(s: &Settings) -> BuildOptions {
    let curve = curve_options(s, true);
    BuildOptions { curve, ..Default::default() }
}

fn anatomy_of(mesh_path: &Path, lm_path: &Path, spec: &ModelSpec, opts: &BuildOptions) -> CliResult<(Mesh, Anatomy)> {
    let (mesh, landmarks) = load_sample(mesh_path, lm_path)?;
    let anatomy = estimate_anatomy(&mesh, &landmarks, spec, &opts.curve)?;
    Ok((mesh, anatomy))
}

/// Points and patch faces as an ASCII PLY.
fn write_ply(out: &mut Output, name: &str, points: &[Point3<f64>], spec: &ModelSpec) -> CliResult<()> {
    let mesh = Mesh::new(points.to_vec(), spec.faces()?)?;
    save_mesh(&mesh, &out.path(name), MeshFormat::PlyAscii)?;
    out.record(name)
}

pub fn template_make(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let spec = load_spec(s)?;
    let opts = build_options(s);
    let (mesh, anatomy) = anatomy_of(
        require(&s.inputs.mesh, "inputs.mesh", "MESH")?,
        require(&s.inputs.landmarks, "inputs.landmarks", "--landmarks")?,
        &spec,
        &opts,
    )?;
    let template = make_template(&mesh, &anatomy, &spec, &opts)?;
    out.write_json("template.json", &template)?;
    write_ply(out, "template.ply", &template.points, &spec)?;
    Ok(json!({ "points": template.points.len(), "symmetric": template.symmetric }))
}

pub fn model_build(s: &Settings, out: &mut Output, slide: bool) -> CliResult<Value> {
    let spec = load_spec(s)?;
    let template = match (&s.inputs.template, slide) {
        (Some(p), _) => Some(load_template(p, &spec)?),
        (None, true) => return Err(CliError::config("inputs.template", "required (pass --template)")),
        (None, false) => None,
    };
    let opts = build_options(s);
    let (mesh, anatomy) = anatomy_of(
        require(&s.inputs.mesh, "inputs.mesh", "MESH")?,
        require(&s.inputs.landmarks, "inputs.landmarks", "--landmarks")?,
        &spec,
        &opts,
    )?;
    let model = build_model(&mesh, &anatomy, &spec, template.as_ref().map(|t| t.points.as_slice()), &opts)?;
    out.write_json("model.json", &model)?;
    write_ply(out, "model.ply", &model.points, &spec)?;
    Ok(json!({ "points": model.points.len(), "energy": model.energy, "converged": model.converged }))
}

pub fn template_iterate(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let spec = load_spec(s)?;
    let list = SampleList::load(require(&s.inputs.samples, "inputs.samples", "--samples")?)?;
    let initial = load_template(require(&s.inputs.template, "inputs.template", "--template")?, &spec)?;
    let opts = build_options(s);
    let loaded: Vec<(Mesh, Anatomy)> = list
        .samples
        .par_iter()
        .map(|e| {
            anatomy_of(&e.mesh, &e.landmarks, &spec, &opts).map_err(|err| match err {
                CliError::Core(c) => CliError::Core(ridgeline::Error::Sample { sample: e.name.clone(), source: Box::new(c) }),
                other => other,
            })
        })
        .collect::<CliResult<_>>()?;
    let refs: Vec<(&Mesh, &Anatomy)> = loaded.iter().map(|(m, a)| (m, a)).collect();
    let tolerance = s.template.tolerance.unwrap_or(0.01);
    let iterations = s.template.iterations.unwrap_or(10);
    let (template, models, report) = iterate_template_mean(&refs, &spec, &initial, &opts, tolerance, iterations)
        .map_err(|e| match e {
            ridgeline::Error::Sample { sample, source } => {
                let name = sample.parse::<usize>().ok().and_then(|i| list.samples.get(i)).map(|e| e.name.clone());
                ridgeline::Error::Sample { sample: name.unwrap_or(sample), source }
            }
            e => e,
        })?;
    let set = ModelSet {
        labels: spec.labels(),
        models: list
            .samples
            .iter()
            .zip(models)
            .map(|(e, m)| NamedModel::new(&e.name, e.group.clone(), m))
            .collect(),
    };
    out.write_json("template.json", &template)?;
    write_ply(out, "template.ply", &template.points, &spec)?;
    out.write_json("models.json", &set)?;
    out.write_json("report.json", &report)?;
    Ok(json!({ "samples": set.models.len(), "iterations": report.iterations, "converged": report.converged }))
}
