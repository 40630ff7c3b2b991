//! Discrete surface models: anatomical curves between landmarks, transects
//! across patches, sliding against a template and the iterated mean.

use std::collections::HashSet;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::procrustes::{align, gpa, rms_distance, symmetrize};
use super::resample_equal_arclength;
use super::sliding::{slide, SlideCurve, SlideOptions};
use super::tps::BendingEnergy;
use crate::curvature::{CurvatureField, CurvatureOptions, Mode};
use crate::meshcore::{LandmarkSet, Mesh, SurfaceCurve};
use crate::pipeline::{estimate_curve, CurveOptions};
use crate::refpath::{localize, optimal_reference_path, PathCriterion, PathSearchOptions, RegionOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    Valley,
    Ridge,
    Minlen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub name: String,
    pub from: String,
    pub to: String,
    pub mode: CurveMode,
    /// Samples including both landmark ends.
    pub points: usize,
}

/// A patch spanned by transects joining sample i of `first` to sample i of
/// `second`, for every interior i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub name: String,
    pub first: String,
    pub second: String,
    /// Samples per transect including both ends.
    pub points: usize,
}

fn default_radius() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub landmarks: Vec<String>,
    pub curves: Vec<CurveSpec>,
    #[serde(default)]
    pub patches: Vec<PatchSpec>,
    /// Bilateral partners (landmarks, curves or patches); unlisted names
    /// are their own mirror image.
    #[serde(default)]
    pub mirror: Vec<(String, String)>,
    /// Curvature neighbourhood radius (mm).
    #[serde(default = "default_radius")]
    pub curvature_radius: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for name in self.landmarks.iter().chain(self.curves.iter().map(|c| &c.name)).chain(self.patches.iter().map(|p| &p.name)) {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("name '{name}' is used twice")));
            }
        }
        for c in &self.curves {
            for lm in [&c.from, &c.to] {
                if !self.landmarks.contains(lm) {
                    return Err(Error::UnknownLandmark(lm.clone()));
                }
            }
            if c.from == c.to {
                return Err(Error::invalid(format!("curve '{}' starts and ends at the same landmark", c.name)));
            }
            if c.points < 3 {
                return Err(Error::invalid(format!("curve '{}' needs at least 3 points", c.name)));
            }
        }
        for p in &self.patches {
            let first = self.curve(&p.first)?;
            let second = self.curve(&p.second)?;
            if first.points != second.points {
                return Err(Error::invalid(format!("patch '{}' joins curves with different point counts", p.name)));
            }
            if p.points < 3 {
                return Err(Error::invalid(format!("patch '{}' needs at least 3 points per transect", p.name)));
            }
        }
        for (a, b) in &self.mirror {
            for n in [a, b] {
                if !seen.contains(n.as_str()) {
                    return Err(Error::invalid(format!("mirror entry '{n}' is not a landmark, curve or patch")));
                }
            }
        }
        Ok(())
    }

    fn curve(&self, name: &str) -> Result<&CurveSpec> {
        self.curves
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::invalid(format!("unknown curve '{name}'")))
    }

    fn curve_offsets(&self) -> Vec<usize> {
        let mut at = self.landmarks.len();
        self.curves
            .iter()
            .map(|c| {
                let o = at;
                at += c.points - 2;
                o
            })
            .collect()
    }

    /// Number of points contributed by landmarks and curves.
    fn curve_block(&self) -> usize {
        self.landmarks.len() + self.curves.iter().map(|c| c.points - 2).sum::<usize>()
    }

    fn patch_offsets(&self) -> Vec<usize> {
        let mut at = self.curve_block();
        self.patches
            .iter()
            .map(|p| {
                let o = at;
                let rows = self.curve(&p.first).map(|c| c.points - 2).unwrap_or(0);
                at += rows * (p.points - 2);
                o
            })
            .collect()
    }

    pub fn point_count(&self) -> usize {
        let last = self.patches.len();
        if last == 0 {
            return self.curve_block();
        }
        let off = self.patch_offsets();
        let p = &self.patches[last - 1];
        let rows = self.curve(&p.first).map(|c| c.points - 2).unwrap_or(0);
        off[last - 1] + rows * (p.points - 2)
    }

    fn landmark_index(&self, name: &str) -> Result<usize> {
        self.landmarks.iter().position(|l| l == name).ok_or_else(|| Error::UnknownLandmark(name.to_string()))
    }

    /// Configuration index of sample `i` of curve `c`.
    fn curve_point(&self, c: usize, i: usize) -> Result<usize> {
        let spec = &self.curves[c];
        if i == 0 {
            self.landmark_index(&spec.from)
        } else if i == spec.points - 1 {
            self.landmark_index(&spec.to)
        } else {
            Ok(self.curve_offsets()[c] + i - 1)
        }
    }

    /// Configuration index of sample `k` on the transect through row `i`.
    fn patch_point(&self, p: usize, i: usize, k: usize) -> Result<usize> {
        let spec = &self.patches[p];
        let first = self.curves.iter().position(|c| c.name == spec.first).unwrap();
        let second = self.curves.iter().position(|c| c.name == spec.second).unwrap();
        if k == 0 {
            self.curve_point(first, i)
        } else if k == spec.points - 1 {
            self.curve_point(second, i)
        } else {
            Ok(self.patch_offsets()[p] + (i - 1) * (spec.points - 2) + k - 1)
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.landmarks.iter().map(|l| format!("landmark:{l}")).collect();
        for c in &self.curves {
            out.extend((1..c.points - 1).map(|i| format!("curve:{}:{i}", c.name)));
        }
        for p in &self.patches {
            let rows = self.curve(&p.first).map(|c| c.points).unwrap_or(2);
            for i in 1..rows - 1 {
                out.extend((1..p.points - 1).map(|k| format!("patch:{}:{i}:{k}", p.name)));
            }
        }
        out
    }

    fn mirror_of<'a>(&'a self, name: &'a str) -> &'a str {
        for (a, b) in &self.mirror {
            if a == name {
                return b;
            }
            if b == name {
                return a;
            }
        }
        name
    }

    /// Whether curve `c` maps onto its mirror partner in the same direction
    /// (false: reversed).
    fn curve_mirror(&self, c: usize) -> Result<(usize, bool)> {
        let spec = &self.curves[c];
        let partner = self.mirror_of(&spec.name);
        let m = self.curves.iter().position(|x| x.name == partner).ok_or_else(|| {
            Error::invalid(format!("mirror of curve '{}' is not a curve", spec.name))
        })?;
        let other = &self.curves[m];
        if other.points != spec.points {
            return Err(Error::invalid(format!("curves '{}' and '{}' differ in point count", spec.name, other.name)));
        }
        let (f, t) = (self.mirror_of(&spec.from), self.mirror_of(&spec.to));
        if f == other.from && t == other.to {
            Ok((m, true))
        } else if f == other.to && t == other.from {
            Ok((m, false))
        } else {
            Err(Error::invalid(format!("mirror of curve '{}' does not join mirrored landmarks", spec.name)))
        }
    }

    /// Relabelling under reflection: entry j is the index of j's bilateral
    /// counterpart.
    pub fn relabel_table(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let mut table = vec![usize::MAX; self.point_count()];
        for (j, l) in self.landmarks.iter().enumerate() {
            table[j] = self.landmark_index(self.mirror_of(l))?;
        }
        for c in 0..self.curves.len() {
            let (m, same) = self.curve_mirror(c)?;
            let n = self.curves[c].points;
            for i in 1..n - 1 {
                let mi = if same { i } else { n - 1 - i };
                table[self.curve_point(c, i)?] = self.curve_point(m, mi)?;
            }
        }
        for p in 0..self.patches.len() {
            let spec = &self.patches[p];
            let partner = self.mirror_of(&spec.name);
            let q = self.patches.iter().position(|x| x.name == partner).ok_or_else(|| {
                Error::invalid(format!("mirror of patch '{}' is not a patch", spec.name))
            })?;
            let other = &self.patches[q];
            let (f, s) = (self.mirror_of(&spec.first), self.mirror_of(&spec.second));
            let same_sides = if f == other.first && s == other.second {
                true
            } else if f == other.second && s == other.first {
                false
            } else {
                return Err(Error::invalid(format!("mirror of patch '{}' does not join mirrored curves", spec.name)));
            };
            let first = self.curves.iter().position(|c| c.name == spec.first).unwrap();
            let (_, same_rows) = self.curve_mirror(first)?;
            let rows = self.curves[first].points;
            let m = spec.points;
            for i in 1..rows - 1 {
                let mi = if same_rows { i } else { rows - 1 - i };
                for k in 1..m - 1 {
                    let mk = if same_sides { k } else { m - 1 - k };
                    table[self.patch_point(p, i, k)?] = self.patch_point(q, mi, mk)?;
                }
            }
        }
        for (i, &j) in table.iter().enumerate() {
            if j == usize::MAX || table[j] != i {
                return Err(Error::invalid(format!("mirror table is not an involution at point {i}")));
            }
        }
        Ok(table)
    }

    /// Triangles over each patch grid, for export.
    pub fn faces(&self) -> Result<Vec<[usize; 3]>> {
        let mut out = Vec::new();
        for (p, spec) in self.patches.iter().enumerate() {
            let rows = self.curve(&spec.first)?.points;
            for i in 1..rows - 2 {
                for k in 0..spec.points - 1 {
                    let a = self.patch_point(p, i, k)?;
                    let b = self.patch_point(p, i, k + 1)?;
                    let c = self.patch_point(p, i + 1, k + 1)?;
                    let d = self.patch_point(p, i + 1, k)?;
                    out.push([a, b, c]);
                    out.push([a, c, d]);
                }
            }
        }
        Ok(out)
    }
}

/// Landmarks (in spec order) and the estimated anatomical curves, each
/// running from its `from` to its `to` landmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Anatomy {
    pub landmarks: Vec<Point3<f64>>,
    pub curves: Vec<SurfaceCurve>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub labels: Vec<String>,
    pub points: Vec<Point3<f64>>,
    /// Bending energy before and after each sliding stage: curve samples
    /// against the curve part of the template, then transect samples against
    /// all of it. Empty without a template.
    pub energy: Vec<(f64, f64)>,
    /// True unless some sliding stage hit its sweep limit.
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateModel {
    pub labels: Vec<String>,
    pub points: Vec<Point3<f64>>,
    pub symmetric: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TransectOptions {
    pub region: RegionOptions,
    pub n_angles: usize,
}

impl Default for TransectOptions {
    fn default() -> Self {
        TransectOptions { region: RegionOptions::default(), n_angles: 180 }
    }
}

/// Curve estimation, transect search and sliding settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub curve: CurveOptions,
    pub transect: TransectOptions,
    pub slide: SlideOptions,
}

/// Estimate every anatomical curve of `spec` on one mesh.
pub fn estimate_anatomy(mesh: &Mesh, landmarks: &LandmarkSet, spec: &ModelSpec, opts: &CurveOptions) -> Result<Anatomy> {
    spec.validate()?;
    let points: Vec<Point3<f64>> = spec.landmarks.iter().map(|l| landmarks.get(l)).collect::<Result<_>>()?;
    let needs_field = spec.curves.iter().any(|c| c.mode != CurveMode::Minlen);
    let valley = if needs_field {
        Some(CurvatureField::compute(
            mesh,
            &CurvatureOptions { radius: spec.curvature_radius, mode: Mode::Valley, ..Default::default() },
        )?)
    } else {
        None
    };
    let ridge = valley.as_ref().map(|f| f.with_mode(Mode::Ridge));
    let flat = CurvatureField::from_strength(vec![0.0; mesh.vertex_count()], Mode::Valley);
    let curves = spec
        .curves
        .iter()
        .map(|c| {
            let l1 = points[spec.landmark_index(&c.from)?];
            let l2 = points[spec.landmark_index(&c.to)?];
            let mut o = *opts;
            let field = match c.mode {
                CurveMode::Valley => valley.as_ref().unwrap(),
                CurveMode::Ridge => ridge.as_ref().unwrap(),
                CurveMode::Minlen => {
                    o.search.criterion = PathCriterion::MinLength;
                    o.flexible = false;
                    &flat
                }
            };
            estimate_curve(mesh, field, l1, l2, &o)
                .map(|e| e.curve)
                .map_err(|e| e.context(format!("curve '{}'", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Anatomy { landmarks: points, curves })
}

/// Minimum-length plane cuts between paired points, each resampled to
/// `points` samples. The first and last samples are the given endpoints.
pub fn make_intermediate_transects(
    mesh: &Mesh,
    pairs: &[(Point3<f64>, Point3<f64>)],
    points: usize,
    opts: &TransectOptions,
) -> Result<Vec<(SurfaceCurve, Vec<Point3<f64>>)>> {
    let search = PathSearchOptions { criterion: PathCriterion::MinLength, n_angles: opts.n_angles, refine: true };
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let region = localize(mesh, a, b, &opts.region)?;
            let cut = optimal_reference_path(&region, &[], &search)?.best;
            let mut samples = resample_equal_arclength(&cut.path, points)?;
            samples[0] = a;
            samples[points - 1] = b;
            Ok((cut.path, samples))
        })
        .collect()
}

/// Assemble the model of one sample; with a template the curve samples and
/// then the transect samples are slid to minimise bending energy.
pub fn build_model(
    mesh: &Mesh,
    anatomy: &Anatomy,
    spec: &ModelSpec,
    template: Option<&[Point3<f64>]>,
    opts: &BuildOptions,
) -> Result<Model> {
    spec.validate()?;
    let total = spec.point_count();
    if let Some(t) = template {
        if t.len() != total {
            return Err(Error::invalid(format!("template has {} points, model needs {total}", t.len())));
        }
    }
    let mut points = anatomy.landmarks.clone();
    let mut slide_curves = Vec::new();
    for (c, cs) in spec.curves.iter().enumerate() {
        let samples = resample_equal_arclength(&anatomy.curves[c], cs.points)?;
        let first = points.len();
        points.extend_from_slice(&samples[1..cs.points - 1]);
        slide_curves.push(SlideCurve::new(anatomy.curves[c].clone(), (first..points.len()).collect()));
    }
    let mut energy = Vec::new();
    let mut converged = true;
    if let Some(t) = template {
        let block = spec.curve_block();
        let be = BendingEnergy::new(&t[..block])?;
        let out = slide(&be, &points, &slide_curves, &opts.slide)?;
        energy.push((out.initial_energy(), out.final_energy()));
        converged &= out.converged;
        points = out.points;
    }

    let mut transect_curves = Vec::new();
    for (p, ps) in spec.patches.iter().enumerate() {
        let rows = spec.curve(&ps.first)?.points;
        let pairs: Vec<_> = (1..rows - 1)
            .map(|i| Ok((points[spec.patch_point(p, i, 0)?], points[spec.patch_point(p, i, ps.points - 1)?])))
            .collect::<Result<_>>()?;
        let cuts = make_intermediate_transects(mesh, &pairs, ps.points, &opts.transect)
            .map_err(|e| e.context(format!("patch '{}'", ps.name)))?;
        for (curve, samples) in cuts {
            let first = points.len();
            points.extend_from_slice(&samples[1..ps.points - 1]);
            transect_curves.push(SlideCurve::new(curve, (first..points.len()).collect()));
        }
    }
    debug_assert_eq!(points.len(), total);
    if let (Some(t), false) = (template, transect_curves.is_empty()) {
        let be = BendingEnergy::new(t)?;
        let out = slide(&be, &points, &transect_curves, &opts.slide)?;
        energy.push((out.initial_energy(), out.final_energy()));
        converged &= out.converged;
        points = out.points;
    }
    Ok(Model { labels: spec.labels(), points, energy, converged })
}

/// Model of one sample built without sliding, symmetrised when the layout
/// declares bilateral partners.
pub fn make_template(mesh: &Mesh, anatomy: &Anatomy, spec: &ModelSpec, opts: &BuildOptions) -> Result<TemplateModel> {
    let model = build_model(mesh, anatomy, spec, None, opts)?;
    let symmetric = !spec.mirror.is_empty();
    let points = if symmetric { symmetrize(&model.points, &spec.relabel_table()?)? } else { model.points };
    Ok(TemplateModel { labels: model.labels, points, symmetric })
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    /// RMS change of the template per round (mm).
    pub changes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Slide every sample against the current template, replace the template by
/// the Procrustes mean, and repeat until it moves less than `tolerance` mm
/// RMS or `max_iterations` rounds have run.
pub fn iterate_template_mean(
    samples: &[(&Mesh, &Anatomy)],
    spec: &ModelSpec,
    initial: &TemplateModel,
    opts: &BuildOptions,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(TemplateModel, Vec<Model>, IterationReport)> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut template = initial.points.clone();
    let mut changes = Vec::new();
    let mut models = Vec::new();
    let mut converged = false;
    for _ in 0..max_iterations {
        models = samples
            .par_iter()
            .enumerate()
            .map(|(i, (mesh, anatomy))| {
                build_model(mesh, anatomy, spec, Some(&template), opts)
                    .map_err(|e| Error::Sample { sample: i.to_string(), source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = if models.len() == 1 {
            models[0].points.clone()
        } else {
            let configs: Vec<Vec<Point3<f64>>> = models.iter().map(|m| m.points.clone()).collect();
            gpa(&configs, false)?.mean
        };
        let mean = align(&mean, &template, false);
        let change = rms_distance(&mean, &template);
        changes.push(change);
        template = mean;
        if change < tolerance {
            converged = true;
            break;
        }
    }
    let iterations = changes.len();
    Ok((
        TemplateModel { labels: spec.labels(), points: template, symmetric: false },
        models,
        IterationReport { changes, iterations, converged },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::symmetry_error;
    use crate::simlab::face::{face_spec, FaceParams};
    use crate::simlab::surfaces::{height_field, hemicylinder};

    fn face_anatomy(p: &FaceParams) -> (Mesh, Anatomy) {
        let mesh = p.mesh(1.0).unwrap();
        let lms = p.landmarks(&mesh);
        let anatomy = estimate_anatomy(&mesh, &lms, &face_spec(), &CurveOptions::default()).unwrap();
        (mesh, anatomy)
    }

    #[test]
    fn planar_transects_are_straight() {
        let mesh = height_field(21, 0.0, 10.0, |_, _| 0.0).unwrap();
        let pairs = [(Point3::new(2.0, 3.0, 0.0), Point3::new(8.0, 6.0, 0.0))];
        let out = make_intermediate_transects(&mesh, &pairs, 7, &TransectOptions::default()).unwrap();
        let samples = &out[0].1;
        assert_eq!(samples[0], pairs[0].0);
        assert_eq!(samples[6], pairs[0].1);
        for (k, p) in samples.iter().enumerate() {
            let expected = pairs[0].0 + (pairs[0].1 - pairs[0].0) * (k as f64 / 6.0);
            assert!((p - expected).norm() < 1e-6, "{k}: {p} vs {expected}");
        }
    }

    #[test]
    fn cylinder_transects_follow_the_circle() {
        let r = 2.0;
        let mesh = hemicylinder(r, 10.0, 60, 50).unwrap();
        let at = |deg: f64| {
            let t = deg.to_radians();
            mesh.closest_point(&Point3::new(r * t.cos(), 5.0, r * t.sin())).point
        };
        let pairs = [(at(150.0), at(30.0))];
        let out = make_intermediate_transects(&mesh, &pairs, 9, &TransectOptions::default()).unwrap();
        for p in &out[0].1 {
            assert!((p.y - 5.0).abs() < 0.05, "{p}");
            assert!(((p.x * p.x + p.z * p.z).sqrt() - r).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn face_curves_follow_the_features() {
        let p = FaceParams::default();
        let (_, anatomy) = face_anatomy(&p);
        let midline_err = anatomy.curves[0].points().iter().map(|q| q.x.abs()).fold(0.0, f64::max);
        assert!(midline_err < 0.5, "midline off by {midline_err}");
        let mut valley_err: f64 = 0.0;
        for q in anatomy.curves[1].points() {
            // the valley floor of the summed profile, found on a fine 1D grid
            let floor = (0..4000)
                .map(|k| 5.0 + k as f64 * 0.005)
                .min_by(|a, b| p.height(*a, q.y).total_cmp(&p.height(*b, q.y)))
                .unwrap();
            valley_err = valley_err.max((q.x - floor).abs());
        }
        assert!(valley_err < 1.0, "valley off by {valley_err}");
    }

    #[test]
    fn template_is_symmetric_and_complete() {
        let p = FaceParams::default();
        let (mesh, anatomy) = face_anatomy(&p);
        let spec = face_spec();
        let opts = BuildOptions::default();
        let raw = build_model(&mesh, &anatomy, &spec, None, &opts).unwrap();
        assert_eq!(raw.points.len(), spec.point_count());
        assert_eq!(&raw.points[..6], &anatomy.landmarks[..]);
        assert!(raw.energy.is_empty());
        let table = spec.relabel_table().unwrap();
        let template = make_template(&mesh, &anatomy, &spec, &opts).unwrap();
        assert!(template.symmetric);
        assert!(symmetry_error(&template.points, &table).unwrap() < 1e-6);
        // the face itself is symmetric, so symmetrising barely moves it
        assert!(rms_distance(&align(&raw.points, &template.points, false), &template.points) < 0.5);
    }

    #[test]
    fn iteration_on_identical_samples_settles() {
        let p = FaceParams::default();
        let (mesh, anatomy) = face_anatomy(&p);
        let spec = face_spec();
        let opts = BuildOptions::default();
        let template = make_template(&mesh, &anatomy, &spec, &opts).unwrap();
        let samples = [(&mesh, &anatomy), (&mesh, &anatomy)];
        let (mean, models, report) = iterate_template_mean(&samples, &spec, &template, &opts, 0.05, 5).unwrap();
        assert!(report.converged, "{report:?}");
        assert_eq!(models.len(), 2);
        assert_eq!(models[0].points, models[1].points);
        assert_eq!(mean.points.len(), spec.point_count());
        assert_eq!(models[0].energy.len(), 2);
        for &(before, after) in &models[0].energy {
            assert!(after <= before);
        }
    }

    #[test]
    fn template_size_is_checked() {
        let p = FaceParams::default();
        let mesh = p.mesh(2.0).unwrap();
        let anatomy = Anatomy { landmarks: vec![], curves: vec![] };
        let short = vec![Point3::origin(); 3];
        assert!(build_model(&mesh, &anatomy, &face_spec(), Some(&short), &BuildOptions::default()).is_err());
    }
}
