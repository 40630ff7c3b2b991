//! Re-coordinatisation of a local region around its reference path.
//!
//! Each region vertex gets s, the arc length of its closest point on the
//! path, and d, its signed distance from that point. The side of the cutting
//! plane gives the sign.

use nalgebra::{Point2, Point3, Vector3};
use serde::Serialize;

use crate::meshcore::{delaunay_2d, SurfaceCurve, Triangulation2d};
use crate::psplines::Sample;
use crate::refpath::{LocalRegion, PlaneCut};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatPoint {
    pub s: f64,
    pub d: f64,
    pub nu: f64,
    /// Region vertex index.
    pub vertex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlattenOptions {
    /// Negate d, i.e. measure it positive against the plane normal.
    pub flip_sign: bool,
}

/// The (s, d) domain with its triangulation and the 3D position of every
/// 2D vertex.
#[derive(Debug, Clone)]
pub struct FlatDomain {
    pub points: Vec<FlatPoint>,
    triangulation: Triangulation2d,
    /// 3D position per triangulation vertex.
    positions: Vec<Point3<f64>>,
    path: SurfaceCurve,
    /// Per path segment: unit direction in the surface, across the path,
    /// on the side the plane normal points to.
    across: Vec<Vector3<f64>>,
    flip_sign: bool,
    /// The mesh connectivity folded over in the plane and Delaunay was used.
    pub rebuilt: bool,
}

/// Closest point of the polyline to `p`: (arc length, foot, segment).
fn foot_on(path: &SurfaceCurve, p: &Point3<f64>) -> (f64, Point3<f64>, usize) {
    let pts = path.points();
    let arc = path.arc_lengths();
    let mut best = (f64::INFINITY, 0.0, pts[0], 0);
    for i in 0..pts.len() - 1 {
        let (a, b) = (pts[i], pts[i + 1]);
        let ab = b - a;
        let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let foot = a + ab * t;
        let dist = (p - foot).norm_squared();
        if dist < best.0 {
            best = (dist, arc[i] + t * (arc[i + 1] - arc[i]), foot, i);
        }
    }
    (best.1, best.2, best.3)
}

impl FlatDomain {
    /// (s, d) of an arbitrary 3D point.
    pub fn map_point(&self, p: &Point3<f64>) -> (f64, f64) {
        let (s, foot, seg) = foot_on(&self.path, p);
        let off = p - foot;
        let side = if off.dot(&self.across[seg]) >= 0.0 { 1.0 } else { -1.0 };
        let sign = if self.flip_sign { -side } else { side };
        (s, sign * off.norm())
    }

    pub fn length(&self) -> f64 {
        self.path.length()
    }

    pub fn path(&self) -> &SurfaceCurve {
        &self.path
    }

    pub fn triangulation(&self) -> &Triangulation2d {
        &self.triangulation
    }

    /// +1 when d is positive along the cutting plane's normal, −1 if flipped.
    pub fn sign_convention(&self) -> f64 {
        if self.flip_sign {
            -1.0
        } else {
            1.0
        }
    }

    pub fn s_range(&self) -> (f64, f64) {
        (0.0, self.length())
    }

    pub fn d_range(&self) -> (f64, f64) {
        let lo = self.points.iter().map(|p| p.d).fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().map(|p| p.d).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.points
            .iter()
            .map(|p| Sample { s: p.s, d: p.d, value: p.nu })
            .collect()
    }

    /// Barycentric interpolation of the stored 3D positions at `(s, d)`.
    pub fn interpolate_to_3d(&self, q: Point2<f64>) -> Result<Point3<f64>> {
        let bc = self.triangulation.locate(q)?;
        let tri = self.triangulation.triangles()[bc.triangle];
        // coordinate-wise combination, x then y then z
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|k| bc.weights[k] * self.positions[tri[k]][c]).sum();
        }
        if let Some(k) = (0..3).find(|&k| bc.weights[k] == 1.0) {
            return Ok(self.positions[tri[k]]);
        }
        Ok(Point3::new(out[0], out[1], out[2]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,s,d,nu\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.vertex, p.s, p.d, p.nu));
        }
        out
    }
}

fn segments_cross(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let o = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| (q - p).perp(&(r - p));
    let (d1, d2) = (o(a, b, c), o(a, b, d));
    let (d3, d4) = (o(c, d, a), o(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Whether the region triangles, mapped into the plane, form an embedding:
/// uniform orientation, no degenerate triangles and a boundary free of
/// crossings.
fn inherited_is_valid(points: &[Point2<f64>], triangles: &[[usize; 3]], boundary: &[(usize, usize)]) -> bool {
    let mut sign = 0.0;
    for t in triangles {
        let area = (points[t[1]] - points[t[0]]).perp(&(points[t[2]] - points[t[0]])) / 2.0;
        if area.abs() <= 1e-12 {
            return false;
        }
        if sign == 0.0 {
            sign = area.signum();
        } else if area.signum() != sign {
            return false;
        }
    }
    for i in 0..boundary.len() {
        for j in i + 1..boundary.len() {
            let (a, b) = boundary[i];
            let (c, d) = boundary[j];
            if a == c || a == d || b == c || b == d {
                continue;
            }
            if segments_cross(points[a], points[b], points[c], points[d]) {
                return false;
            }
        }
    }
    true
}

/// In-surface direction perpendicular to each path segment, oriented along
/// the plane normal. Falls back to the plane normal where the two are
/// orthogonal.
fn across_directions(region: &LocalRegion, cut: &PlaneCut) -> Result<Vec<Vector3<f64>>> {
    let normals = region.mesh().orient_consistently().0.vertex_normals()?;
    let at = |j: usize| -> Vector3<f64> {
        cut.stencils[j].iter().map(|&(v, w)| normals[v] * w).sum()
    };
    let pts = cut.path.points();
    Ok((0..pts.len() - 1)
        .map(|i| {
            let tangent = (pts[i + 1] - pts[i]).normalize();
            let n = at(i) + at(i + 1);
            let b = n.cross(&tangent);
            let dot = b.dot(&cut.plane_normal);
            if b.norm() < 1e-12 || dot.abs() < 1e-9 * b.norm() {
                cut.plane_normal
            } else {
                b.normalize() * dot.signum()
            }
        })
        .collect())
}

/// Flatten `region` around `cut`. `values` holds ν per region vertex.
pub fn flatten(region: &LocalRegion, cut: &PlaneCut, values: &[f64], opts: &FlattenOptions) -> Result<FlatDomain> {
    let mesh = region.mesh();
    if mesh.vertex_count() == 0 {
        return Err(Error::invalid("empty region"));
    }
    if cut.path.len() < 2 {
        return Err(Error::invalid("reference path needs at least 2 points"));
    }
    if values.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "expected {} strength values, got {}",
            mesh.vertex_count(),
            values.len()
        )));
    }
    let mut domain = FlatDomain {
        points: Vec::new(),
        triangulation: Triangulation2d::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )?,
        positions: Vec::new(),
        path: cut.path.clone(),
        across: across_directions(region, cut)?,
        flip_sign: opts.flip_sign,
        rebuilt: false,
    };
    domain.points = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let (s, d) = domain.map_point(p);
            let nu = if values[v].is_finite() { values[v] } else { 0.0 };
            FlatPoint { s, d, nu, vertex: v }
        })
        .collect();
    let flat: Vec<Point2<f64>> = domain.points.iter().map(|p| Point2::new(p.s, p.d)).collect();

    if inherited_is_valid(&flat, mesh.triangles(), &mesh.boundary_edges()) {
        domain.triangulation = Triangulation2d::new(flat, mesh.triangles().to_vec())?;
        domain.positions = mesh.vertices().to_vec();
    } else {
        let tris = delaunay_2d(&flat)?;
        let mut used = vec![usize::MAX; flat.len()];
        let mut pts = Vec::new();
        let mut pos = Vec::new();
        for t in &tris {
            for &v in t {
                if used[v] == usize::MAX {
                    used[v] = pts.len();
                    pts.push(flat[v]);
                    pos.push(mesh.vertices()[v]);
                }
            }
        }
        let tris = tris.iter().map(|t| [used[t[0]], used[t[1]], used[t[2]]]).collect();
        domain.triangulation = Triangulation2d::new(pts, tris)?;
        domain.positions = pos;
        domain.rebuilt = true;
    }
    Ok(domain)
}
