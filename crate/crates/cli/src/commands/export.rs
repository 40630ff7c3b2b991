use std::collections::BTreeMap;

use ridgeline::meshcore::{load_mesh, save_mesh, LandmarkSet, MeshFormat};
use ridgeline::simlab::face::{face_family, face_spec};
use ridgeline::simlab::surfaces::height_field_rect;
use ridgeline::Point3;
use serde_json::{json, Value};

use crate::args::{FixtureArgs, FixtureKind, MeshArgs, MeshFormatArg};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::samples::{SampleEntry, SampleList};
use crate::settings::Settings;

pub fn fixture(a: &FixtureArgs, s: &Settings, out: &mut Output) -> CliResult<Value> {
    if !(a.spacing.is_finite() && a.spacing > 0.0) {
        return Err(CliError::config("spacing", format!("must be positive, got {}", a.spacing)));
    }
    match a.kind {
        FixtureKind::Face => face_fixture(a, s, out),
        FixtureKind::Valley => valley_fixture(a, out),
    }
}

fn face_fixture(a: &FixtureArgs, s: &Settings, out: &mut Output) -> CliResult<Value> {
    if a.n < 2 {
        return Err(CliError::config("n", "a face fixture needs at least two samples"));
    }
    let family = face_family(a.n, s.seed());
    let mut samples = Vec::new();
    for (i, (params, group)) in family.iter().enumerate() {
        let name = format!("face_{i:02}");
        let mesh = params.mesh(a.spacing)?;
        let mesh_file = format!("{name}.ply");
        save_mesh(&mesh, &out.path(&mesh_file), MeshFormat::PlyBinary)?;
        out.record(&mesh_file)?;
        let lm_file = format!("{name}.landmarks.json");
        out.write_text(&lm_file, &LandmarkSet::from_points(params.raw_landmarks()).to_json())?;
        samples.push(SampleEntry {
            name,
            mesh: mesh_file.into(),
            landmarks: lm_file.into(),
            group: Some(format!("group{group}")),
        });
    }
    out.write_json("spec.json", &face_spec())?;
    let list = SampleList { samples };
    out.write_text("samples.toml", &toml::to_string(&list).expect("sample list serialises"))?;
    let params: Vec<_> = family.iter().map(|(p, g)| json!({ "params": p, "group": g })).collect();
    out.write_json("params.json", &params)?;
    Ok(json!({ "samples": a.n }))
}

/// A valley z = 0.08 (x − c(y))² whose floor c(y) = 10 + 2 sin(πy/20) bends
/// across [0, 20]², with landmarks on the floor at y = 2 and y = 18.
fn valley_fixture(a: &FixtureArgs, out: &mut Output) -> CliResult<Value> {
    let floor = |y: f64| 10.0 + 2.0 * (std::f64::consts::PI * y / 20.0).sin();
    let n = (20.0 / a.spacing).round() as usize + 1;
    let mesh = height_field_rect(n, n, (0.0, 20.0), (0.0, 20.0), |x, y| 0.08 * (x - floor(y)).powi(2))?;
    save_mesh(&mesh, &out.path("valley.ply"), MeshFormat::PlyBinary)?;
    out.record("valley.ply")?;
    let landmarks: BTreeMap<String, Point3<f64>> = [("top", 18.0), ("bottom", 2.0)]
        .into_iter()
        .map(|(name, y)| (name.to_string(), Point3::new(floor(y), y, 0.0)))
        .collect();
    out.write_text("valley.landmarks.json", &LandmarkSet::from_points(landmarks).to_json())?;
    let config = "\
[inputs]
mesh = \"valley.ply\"
landmarks = \"valley.landmarks.json\"

[curvature]
radius = 2.0

[curve]
pairs = [{ from = \"bottom\", to = \"top\" }]
mode = \"valley\"
flexible = true
";
    out.write_text("valley.toml", config)?;
    Ok(json!({ "vertices": mesh.vertex_count() }))
}

pub fn mesh(a: &MeshArgs, out: &mut Output) -> CliResult<Value> {
    let mesh = load_mesh(&a.input)?;
    let format = match a.format {
        MeshFormatArg::Obj => MeshFormat::Obj,
        MeshFormatArg::Ply => MeshFormat::PlyAscii,
        MeshFormatArg::PlyBinary => MeshFormat::PlyBinary,
    };
    let mut name = std::path::PathBuf::from(&a.name);
    if name.extension().is_none() {
        name.set_extension(if format == MeshFormat::Obj { "obj" } else { "ply" });
    }
    let name = name.to_string_lossy().into_owned();
    save_mesh(&mesh, &out.path(&name), format)?;
    out.record(&name)?;
    Ok(json!({ "vertices": mesh.vertex_count(), "triangles": mesh.triangles().len() }))
}
