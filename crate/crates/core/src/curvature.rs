//! Per-vertex principal curvatures from local quadratic patch fits, with the
//! derived shape index and curvature-strength fields.
//!
//! Curvatures are signed so that they are positive where the surface bends
//! toward its normal: with outward normals a valley floor has positive
//! cross-curvature and a crest negative.

use std::f64::consts::{FRAC_2_PI, FRAC_1_PI};

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::meshcore::Mesh;
use crate::{Error, Result};

/// Which shape class contributes to the strength field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Valley,
    Ridge,
}

/// Reported shape-index scale. `Printed` is the (0, 1) variant
/// ½ − atan(·)/π kept for compatibility; masks always use the symmetric scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeIndexScale {
    #[default]
    Koenderink,
    Printed,
}

/// Distance used to gather a patch around a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PatchMetric {
    /// 3D distance from the seed vertex.
    #[default]
    Euclidean,
    /// Distance after projecting out the given direction, e.g. the height
    /// axis of a graph surface.
    Projected(Vector3<f64>),
}

#[derive(Debug, Clone, Copy)]
pub struct CurvatureOptions {
    /// Neighbourhood radius (mm).
    pub radius: f64,
    pub mode: Mode,
    pub metric: PatchMetric,
    pub scale: ShapeIndexScale,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            radius: 10.0,
            mode: Mode::Valley,
            metric: PatchMetric::Euclidean,
            scale: ShapeIndexScale::Koenderink,
        }
    }
}

/// Orthonormal frame at a vertex; `normal` is the height axis of the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub origin: Point3<f64>,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl TangentFrame {
    /// Frame with arbitrary but deterministic tangent axes.
    pub fn from_normal(origin: Point3<f64>, normal: Vector3<f64>) -> Self {
        let n = normal.normalize();
        let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vector3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let e1 = (helper - n * n.dot(&helper)).normalize();
        let e2 = n.cross(&e1);
        TangentFrame { origin, e1, e2, normal: n }
    }

    pub fn local(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let d = p - self.origin;
        (d.dot(&self.e1), d.dot(&self.e2), d.dot(&self.normal))
    }
}

/// Coefficients of z = ½(a u² + 2b uv + c v²) in `frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub frame: TangentFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalCurvature {
    pub kappa1: f64,
    pub kappa2: f64,
    pub dir1: Vector3<f64>,
    pub dir2: Vector3<f64>,
    /// κ₁ = κ₂: the directions are the frame axes and carry no information.
    pub umbilic: bool,
}

/// Least-squares patch fit at `vertex` over its Euclidean neighbourhood.
pub fn fit_patch(mesh: &Mesh, vertex: usize, radius: f64) -> Result<PatchFit> {
    let hood = mesh.neighborhood(vertex, radius)?;
    let frame = TangentFrame::from_normal(mesh.vertices()[vertex], mesh.vertex_normal(vertex)?);
    let pts: Vec<_> = hood.iter().map(|&v| mesh.vertices()[v]).collect();
    fit_points(&frame, &pts, vertex)
}

/// Fit the pure quadratic to `points` expressed in `frame`. `vertex` only
/// labels errors.
pub fn fit_points(frame: &TangentFrame, points: &[Point3<f64>], vertex: usize) -> Result<PatchFit> {
    if points.len() < 6 {
        return Err(Error::SparseNeighbourhood {
            vertex,
            count: points.len(),
        });
    }
    let mut design = DMatrix::zeros(points.len(), 3);
    let mut rhs = DVector::zeros(points.len());
    for (r, p) in points.iter().enumerate() {
        let (u, v, z) = frame.local(p);
        design[(r, 0)] = 0.5 * u * u;
        design[(r, 1)] = u * v;
        design[(r, 2)] = 0.5 * v * v;
        rhs[r] = z;
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::RankDeficient { vertex });
    }
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::RankDeficient { vertex })?;
    Ok(PatchFit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        frame: *frame,
    })
}

/// Eigen-decomposition of the Weingarten matrix [[a, b], [b, c]], with
/// directions lifted into 3D through the frame.
pub fn principal_curvatures(fit: &PatchFit) -> PrincipalCurvature {
    let (a, b, c) = (fit.a, fit.b, fit.c);
    let mean = (a + c) / 2.0;
    let half_gap = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let umbilic = half_gap <= 1e-12 * (1.0 + a.abs() + c.abs());
    let theta = if umbilic { 0.0 } else { 0.5 * (2.0 * b).atan2(a - c) };
    let (s, co) = theta.sin_cos();
    let f = &fit.frame;
    PrincipalCurvature {
        kappa1: mean + half_gap,
        kappa2: mean - half_gap,
        dir1: f.e1 * co + f.e2 * s,
        dir2: -f.e1 * s + f.e2 * co,
        umbilic,
    }
}

/// Shape index (2/π)·atan((κ₁+κ₂)/(κ₁−κ₂)) on the symmetric [−1, 1] scale,
/// caps at +1 for positive κ. `None` for a planar point.
pub fn shape_index(kappa1: f64, kappa2: f64) -> Option<f64> {
    let (k1, k2) = (kappa1.max(kappa2), kappa1.min(kappa2));
    if k1 == 0.0 && k2 == 0.0 {
        return None;
    }
    if k1 == k2 {
        return Some(k1.signum());
    }
    Some(FRAC_2_PI * ((k1 + k2) / (k1 - k2)).atan())
}

/// The (0, 1) variant ½ − (1/π)·atan((κ₁+κ₂)/(κ₁−κ₂)).
pub fn shape_index_printed(kappa1: f64, kappa2: f64) -> Option<f64> {
    shape_index(kappa1, kappa2).map(|s| 0.5 - FRAC_1_PI * s * std::f64::consts::FRAC_PI_2)
}

/// Shape index of a fitted point with caps at +1, i.e. evaluated on the
/// curvatures of the outward-bending convention.
pub fn surface_shape_index(pc: &PrincipalCurvature) -> Option<f64> {
    shape_index(-pc.kappa2, -pc.kappa1)
}

/// Curvature strength ν. Valley: max(κ₁, κ₂) where S < 0; ridge: −min(κ₁, κ₂)
/// where S > 0; zero elsewhere and at undefined points.
pub fn strength(pc: Option<&PrincipalCurvature>, mode: Mode) -> f64 {
    let Some(pc) = pc else { return 0.0 };
    let Some(s) = surface_shape_index(pc) else { return 0.0 };
    let nu = match mode {
        Mode::Valley if s < 0.0 => pc.kappa1.max(pc.kappa2),
        Mode::Ridge if s > 0.0 => -pc.kappa1.min(pc.kappa2),
        _ => 0.0,
    };
    nu.max(0.0)
}

/// Below this bend over the patch (|κ|·radius) both curvatures are rounding
/// noise and the point is planar.
const PLANAR_BEND: f64 = 1e-10;

fn flatten_rounding_noise(mut pc: PrincipalCurvature, radius: f64) -> PrincipalCurvature {
    if pc.kappa1.abs().max(pc.kappa2.abs()) * radius < PLANAR_BEND {
        pc.kappa1 = 0.0;
        pc.kappa2 = 0.0;
    }
    pc
}

/// Per-vertex curvature, shape index and strength. Vertices whose patch fit
/// fails (too few points, rank deficiency) carry `None` and ν = 0.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub curvatures: Vec<Option<PrincipalCurvature>>,
    pub shape_index: Vec<Option<f64>>,
    pub strength: Vec<f64>,
    pub mode: Mode,
    pub scale: ShapeIndexScale,
}

impl CurvatureField {
    pub fn compute(mesh: &Mesh, opts: &CurvatureOptions) -> Result<Self> {
        if !(opts.radius > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {}", opts.radius)));
        }
        let (oriented, flipped) = mesh.orient_consistently();
        let mesh = if flipped > 0 { &oriented } else { mesh };
        let normals = mesh.vertex_normals()?;
        let curvatures = (0..mesh.vertex_count())
            .into_par_iter()
            .map(|v| {
                let centre = mesh.vertices()[v];
                let hood = match opts.metric {
                    PatchMetric::Euclidean => mesh.neighborhood(v, opts.radius)?,
                    PatchMetric::Projected(axis) => {
                        let axis = axis.normalize();
                        mesh.neighborhood_by(v, opts.radius, |p| {
                            let d = p - centre;
                            (d - axis * axis.dot(&d)).norm()
                        })?
                    }
                };
                let pts: Vec<_> = hood.iter().map(|&w| mesh.vertices()[w]).collect();
                let frame = TangentFrame::from_normal(centre, normals[v]);
                match fit_points(&frame, &pts, v) {
                    Ok(fit) => Ok(Some(flatten_rounding_noise(principal_curvatures(&fit), opts.radius))),
                    Err(Error::SparseNeighbourhood { .. } | Error::RankDeficient { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_curvatures(curvatures, opts.mode, opts.scale))
    }

    pub fn from_curvatures(
        curvatures: Vec<Option<PrincipalCurvature>>,
        mode: Mode,
        scale: ShapeIndexScale,
    ) -> Self {
        let shape_index = curvatures
            .iter()
            .map(|pc| {
                pc.and_then(|pc| match scale {
                    ShapeIndexScale::Koenderink => surface_shape_index(&pc),
                    ShapeIndexScale::Printed => shape_index_printed(-pc.kappa2, -pc.kappa1),
                })
            })
            .collect();
        let strength = curvatures.iter().map(|pc| strength(pc.as_ref(), mode)).collect();
        CurvatureField {
            curvatures,
            shape_index,
            strength,
            mode,
            scale,
        }
    }

    /// Same curvatures, strength recomputed for another mode.
    pub fn with_mode(&self, mode: Mode) -> Self {
        Self::from_curvatures(self.curvatures.clone(), mode, self.scale)
    }

    /// Strength field from an explicit per-vertex array (synthetic studies).
    pub fn from_strength(strength: Vec<f64>, mode: Mode) -> Self {
        CurvatureField {
            curvatures: vec![None; strength.len()],
            shape_index: vec![None; strength.len()],
            strength,
            mode,
            scale: ShapeIndexScale::Koenderink,
        }
    }

    pub fn len(&self) -> usize {
        self.strength.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strength.is_empty()
    }

    pub fn undefined_count(&self) -> usize {
        self.curvatures.iter().filter(|c| c.is_none()).count()
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("vertex_index,kappa1,kappa2,shape_index,strength\n");
        for (v, pc) in self.curvatures.iter().enumerate() {
            out.push_str(&format!(
                "{v},{},{},{},{}\n",
                opt(pc.map(|p| p.kappa1)),
                opt(pc.map(|p| p.kappa2)),
                opt(self.shape_index[v]),
                self.strength[v]
            ));
        }
        out
    }
}
