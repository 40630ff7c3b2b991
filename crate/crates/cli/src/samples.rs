//! Sample lists and saved model sets.

use std::path::{Path, PathBuf};

use ridgeline::correspondence::Model;
use ridgeline::meshcore::{load_mesh, LandmarkSet, Mesh};
use ridgeline::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// `samples.toml`: one `[[sample]]` table per mesh. Relative paths are
/// taken from the file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleList {
    #[serde(rename = "sample")]
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub name: String,
    pub mesh: PathBuf,
    pub landmarks: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl SampleList {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut list: SampleList =
            toml::from_str(&text).map_err(|e| CliError::config("samples", format!("{}: {e}", path.display())))?;
        if list.samples.is_empty() {
            return Err(CliError::config("samples", format!("{} lists no samples", path.display())));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut list.samples {
            s.mesh = base.join(&s.mesh);
            s.landmarks = base.join(&s.landmarks);
        }
        Ok(list)
    }
}

/// Mesh plus landmarks snapped onto it.
pub fn load_sample(mesh: &Path, landmarks: &Path) -> CliResult<(Mesh, LandmarkSet)> {
    let mesh = load_mesh(mesh)?;
    let raw = LandmarkSet::load_json(landmarks)?;
    let lms = LandmarkSet::snapped(&mesh, &raw);
    Ok((mesh, lms))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    #[serde(default)]
    pub group: Option<String>,
    pub points: Vec<Point3<f64>>,
    #[serde(default)]
    pub energy: Vec<(f64, f64)>,
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

impl NamedModel {
    pub fn new(name: &str, group: Option<String>, model: Model) -> Self {
        NamedModel { name: name.to_string(), group, points: model.points, energy: model.energy, converged: model.converged }
    }
}

/// Models of a sample sharing one point layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSet {
    pub labels: Vec<String>,
    pub models: Vec<NamedModel>,
}

impl ModelSet {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let set: ModelSet = serde_json::from_str(&text).map_err(ridgeline::Error::from)?;
        if let Some(m) = set.models.iter().find(|m| m.points.len() != set.labels.len()) {
            return Err(CliError::config(
                "models",
                format!("model '{}' has {} points, labels list {}", m.name, m.points.len(), set.labels.len()),
            ));
        }
        Ok(set)
    }

    pub fn configs(&self) -> Vec<Vec<Point3<f64>>> {
        self.models.iter().map(|m| m.points.clone()).collect()
    }

    /// Binary labels from the group names: the alphabetically first group
    /// is `false`.
    pub fn binary_labels(&self) -> CliResult<(Vec<bool>, [String; 2])> {
        let groups: Vec<&str> = self
            .models
            .iter()
            .map(|m| {
                m.group.as_deref().ok_or_else(|| CliError::config("models", format!("model '{}' has no group", m.name)))
            })
            .collect::<CliResult<_>>()?;
        let mut names: Vec<&str> = groups.clone();
        names.sort_unstable();
        names.dedup();
        if names.len() != 2 {
            return Err(CliError::config("models", format!("need exactly two groups, found {names:?}")));
        }
        let labels = groups.iter().map(|g| *g == names[1]).collect();
        Ok((labels, [names[0].to_string(), names[1].to_string()]))
    }
}
