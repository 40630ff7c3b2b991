//! Triangle meshes, landmarks, surface curves and 2D triangulations.

mod io;
mod triangulation;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_mesh, save_mesh, MeshFormat};
pub use triangulation::{barycentric, delaunay_2d, BarycentricCoords, Triangulation2d};

/// Smallest admissible triangle area (mm²).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// An immutable triangulated surface.
///
/// Vertex adjacency and vertex-to-triangle incidence are built once at
/// construction so neighbourhood queries need no further bookkeeping.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    normals: Option<Vec<Vector3<f64>>>,
    adjacency: Vec<Vec<usize>>,
    incidence: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= n {
                    return Err(Error::VertexOutOfRange { index: i, len: n });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} repeats a vertex ({}, {}, {})",
                    tri[0], tri[1], tri[2]
                )));
            }
            let area = triangle_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if area < MIN_TRIANGLE_AREA {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has area {area:.3e} mm² (below {MIN_TRIANGLE_AREA:e}); \
                     collapse or remove it before loading, e.g. merge coincident vertices"
                )));
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut incidence = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                adjacency[a].push(b);
                adjacency[b].push(a);
                incidence[a].push(t);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Mesh {
            vertices,
            triangles,
            normals: None,
            adjacency,
            incidence,
        })
    }

    /// Attach per-vertex normals (normalised here).
    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} normals for {} vertices",
                normals.len(),
                self.vertices.len()
            )));
        }
        let normals = normals
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                n.try_normalize(1e-300)
                    .ok_or_else(|| Error::InvalidMesh(format!("zero normal at vertex {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn stored_normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Sorted vertex neighbours of `v` along mesh edges.
    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Triangles incident to `v`.
    pub fn incident_triangles(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    /// Per-vertex unit normals: the normalised average of the unit normals of
    /// the triangles containing each vertex. Stored normals take precedence.
    pub fn vertex_normals(&self) -> Result<Vec<Vector3<f64>>> {
        if let Some(n) = &self.normals {
            return Ok(n.clone());
        }
        (0..self.vertices.len()).map(|v| self.vertex_normal(v)).collect()
    }

    /// Unit normal of one vertex, computed as in [`Mesh::vertex_normals`].
    pub fn vertex_normal(&self, v: usize) -> Result<Vector3<f64>> {
        self.vertex(v)?;
        if let Some(n) = &self.normals {
            return Ok(n[v]);
        }
        let inc = &self.incidence[v];
        if inc.is_empty() {
            return Err(Error::IsolatedVertex { vertex: v });
        }
        let sum: Vector3<f64> = inc.iter().map(|&t| self.face_normal(t)).sum();
        sum.try_normalize(1e-12)
            .ok_or_else(|| Error::Degenerate(format!("face normals cancel at vertex {v}")))
    }

    /// Vertices reachable from `seed` through edges whose endpoints all stay
    /// within Euclidean distance `radius` of the seed. Includes the seed.
    pub fn neighborhood(&self, seed: usize, radius: f64) -> Result<Vec<usize>> {
        let centre = self.vertex(seed)?;
        self.neighborhood_by(seed, radius, |p| (p - centre).norm())
    }

    /// Same traversal as [`Mesh::neighborhood`] with a caller-supplied
    /// distance-from-seed function.
    pub fn neighborhood_by<F>(&self, seed: usize, radius: f64, dist: F) -> Result<Vec<usize>>
    where
        F: Fn(&Point3<f64>) -> f64,
    {
        self.vertex(seed)?;
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        let mut seen = HashSet::from([seed]);
        let mut out = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if seen.contains(&w) {
                    continue;
                }
                if dist(&self.vertices[w]) <= radius {
                    seen.insert(w);
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    fn vertex(&self, v: usize) -> Result<Point3<f64>> {
        self.vertices
            .get(v)
            .copied()
            .ok_or(Error::VertexOutOfRange {
                index: v,
                len: self.vertices.len(),
            })
    }

    pub fn median_edge_length(&self) -> f64 {
        let mut lengths: Vec<f64> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| {
                list.iter()
                    .filter(move |&&b| b > a)
                    .map(move |&b| (a, b))
            })
            .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .collect();
        if lengths.is_empty() {
            return 0.0;
        }
        lengths.sort_by(f64::total_cmp);
        lengths[lengths.len() / 2]
    }

    /// Closest point on the surface to `p` (brute force over triangles).
    pub fn closest_point(&self, p: &Point3<f64>) -> SurfacePoint {
        self.closest_point_in(p, 0..self.triangles.len())
            .expect("mesh has at least one triangle")
    }

    /// Closest point restricted to a subset of triangles.
    pub fn closest_point_in<I>(&self, p: &Point3<f64>, triangles: I) -> Option<SurfacePoint>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut best: Option<SurfacePoint> = None;
        for t in triangles {
            let [a, b, c] = self.triangles[t];
            let (q, w) = closest_point_on_triangle(
                p,
                &self.vertices[a],
                &self.vertices[b],
                &self.vertices[c],
            );
            let d = (q - p).norm();
            if best.as_ref().is_none_or(|b| d < b.distance) {
                best = Some(SurfacePoint {
                    triangle: t,
                    weights: w,
                    point: q,
                    distance: d,
                });
            }
        }
        best
    }

    /// Return a copy whose triangles are consistently wound, propagating the
    /// orientation of the largest triangle through edge adjacency. Returns the
    /// number of flipped triangles alongside.
    pub fn orient_consistently(&self) -> (Mesh, usize) {
        let nt = self.triangles.len();
        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_tris.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut tris = self.triangles.clone();
        let mut done = vec![false; nt];
        let mut flipped = 0;
        let mut order: Vec<usize> = (0..nt).collect();
        order.sort_by(|&a, &b| self.triangle_area(b).total_cmp(&self.triangle_area(a)));
        for &start in &order {
            if done[start] {
                continue;
            }
            done[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(t) = queue.pop_front() {
                let tri = tris[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    for &u in &edge_tris[&(a.min(b), a.max(b))] {
                        if done[u] {
                            continue;
                        }
                        // consistent neighbours traverse the shared edge as b -> a
                        let other = tris[u];
                        let same_direction = (0..3).any(|j| other[j] == a && other[(j + 1) % 3] == b);
                        if same_direction {
                            tris[u] = [other[0], other[2], other[1]];
                            flipped += 1;
                        }
                        done[u] = true;
                        queue.push_back(u);
                    }
                }
            }
        }
        let mut mesh = self.clone();
        mesh.triangles = tris;
        (mesh, flipped)
    }

    /// Edges with exactly one incident triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(e, _)| e)
            .collect()
    }

    /// Apply a map to every vertex, keeping connectivity.
    pub fn map_vertices<F>(&self, f: F) -> Result<Mesh>
    where
        F: Fn(&Point3<f64>) -> Point3<f64>,
    {
        Mesh::new(
            self.vertices.iter().map(f).collect(),
            self.triangles.clone(),
        )
    }
}

pub(crate) fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// A location on the surface: triangle plus barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub triangle: usize,
    pub weights: [f64; 3],
    pub point: Point3<f64>,
    pub distance: f64,
}

impl SurfacePoint {
    /// Interpolate a per-vertex scalar at this location.
    pub fn interpolate(&self, mesh: &Mesh, values: &[f64]) -> f64 {
        let tri = mesh.triangles()[self.triangle];
        (0..3).map(|k| self.weights[k] * values[tri[k]]).sum()
    }
}

/// Closest point on triangle `abc` to `p` with its barycentric weights.
pub(crate) fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (Point3<f64>, [f64; 3]) {
    // Region tests after Ericson, Real-Time Collision Detection 5.1.5.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Named landmarks snapped onto a mesh surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkSet {
    points: BTreeMap<String, Point3<f64>>,
}

impl LandmarkSet {
    /// Snap raw positions to the nearest surface point of `mesh`.
    pub fn snapped(mesh: &Mesh, raw: &BTreeMap<String, Point3<f64>>) -> Self {
        let points = raw
            .iter()
            .map(|(k, p)| (k.clone(), mesh.closest_point(p).point))
            .collect();
        LandmarkSet { points }
    }

    /// Landmarks taken as given, without snapping.
    pub fn from_points(points: BTreeMap<String, Point3<f64>>) -> Self {
        LandmarkSet { points }
    }

    pub fn get(&self, name: &str) -> Result<Point3<f64>> {
        self.points
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLandmark(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Point3<f64>)> {
        self.points.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parse a JSON object mapping name to `[x, y, z]`.
    pub fn parse_json(text: &str) -> Result<BTreeMap<String, Point3<f64>>> {
        let raw: BTreeMap<String, [f64; 3]> = serde_json::from_str(text)?;
        Ok(raw
            .into_iter()
            .map(|(k, [x, y, z])| (k, Point3::new(x, y, z)))
            .collect())
    }

    pub fn load_json(path: &Path) -> Result<BTreeMap<String, Point3<f64>>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_json(&text)
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, [f64; 3]> = self
            .points
            .iter()
            .map(|(k, p)| (k.as_str(), [p.x, p.y, p.z]))
            .collect();
        serde_json::to_string_pretty(&raw).expect("landmarks serialise")
    }
}

/// An ordered polyline on the surface with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCurve {
    points: Vec<Point3<f64>>,
    arc: Vec<f64>,
}

impl SurfaceCurve {
    /// Build from points; consecutive points must be distinct.
    pub fn from_points(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate("empty curve".into()));
        }
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        for w in points.windows(2) {
            let step = (w[1] - w[0]).norm();
            if !(step > 0.0) {
                return Err(Error::Degenerate(format!(
                    "repeated point at arc length {}",
                    arc.last().unwrap()
                )));
            }
            arc.push(arc.last().unwrap() + step);
        }
        Ok(SurfaceCurve { points, arc })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Point at arc length `s` (clamped to the curve).
    pub fn point_at(&self, s: f64) -> Point3<f64> {
        let s = s.clamp(0.0, self.length());
        let j = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(j) => return self.points[j],
            Err(j) => j,
        };
        if j == 0 {
            return self.points[0];
        }
        if j >= self.points.len() {
            return *self.points.last().unwrap();
        }
        let t = (s - self.arc[j - 1]) / (self.arc[j] - self.arc[j - 1]);
        self.points[j - 1] + (self.points[j] - self.points[j - 1]) * t
    }

    /// Closest point on the polyline: (arc length, point, distance).
    pub fn project(&self, p: &Point3<f64>) -> (f64, Point3<f64>, f64) {
        if self.points.len() == 1 {
            return (0.0, self.points[0], (p - self.points[0]).norm());
        }
        let mut best = (0.0, self.points[0], f64::INFINITY);
        for j in 1..self.points.len() {
            let a = self.points[j - 1];
            let seg = self.points[j] - a;
            let t = ((p - a).dot(&seg) / seg.norm_squared()).clamp(0.0, 1.0);
            let q = a + seg * t;
            let d = (p - q).norm();
            if d < best.2 {
                best = (self.arc[j - 1] + t * (self.arc[j] - self.arc[j - 1]), q, d);
            }
        }
        best
    }

    pub fn reversed(&self) -> SurfaceCurve {
        let mut pts = self.points.clone();
        pts.reverse();
        SurfaceCurve::from_points(pts).expect("reversal keeps distinct points")
    }

    /// CSV with columns `index,s_mm,x_mm,y_mm,z_mm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,s_mm,x_mm,y_mm,z_mm\n");
        for (i, (p, s)) in self.points.iter().zip(&self.arc).enumerate() {
            out.push_str(&format!("{i},{s},{},{},{}\n", p.x, p.y, p.z));
        }
        out
    }
}
