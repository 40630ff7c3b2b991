//! Planar-cut reference paths between two landmarks.
//!
//! The mesh is first cut down to a cylinder around the landmark axis. Every
//! plane containing both landmarks is indexed by its rotation γ about that
//! axis; its intersection with the region gives a candidate path whose
//! length-standardised curvature integral (or length) is optimised over γ.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::meshcore::{Mesh, SurfaceCurve};
use crate::{Error, Result};

/// Connected piece of a mesh near the segment between two landmarks.
#[derive(Debug, Clone)]
pub struct LocalRegion {
    mesh: Mesh,
    /// Region vertex → source mesh vertex.
    source: Vec<usize>,
    l1: Point3<f64>,
    l2: Point3<f64>,
    radius: f64,
    /// γ = 0 direction: mean region normal with the axis component removed.
    reference: Vector3<f64>,
    edge_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOptions {
    /// Cylinder radius; `None` uses half the landmark distance and
    /// `Some(f64::INFINITY)` keeps the whole connected component.
    pub radius: Option<f64>,
    /// Axial extension beyond each landmark, in median edge lengths.
    pub axial_margin: f64,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            radius: None,
            axial_margin: 2.0,
        }
    }
}

impl LocalRegion {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn source_vertices(&self) -> &[usize] {
        &self.source
    }

    pub fn landmarks(&self) -> (Point3<f64>, Point3<f64>) {
        (self.l1, self.l2)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn axis(&self) -> Vector3<f64> {
        (self.l2 - self.l1).normalize()
    }

    pub fn median_edge_length(&self) -> f64 {
        self.edge_length
    }

    /// Pick per-region-vertex values out of a per-mesh-vertex array.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.source.iter().map(|&v| values[v]).collect()
    }

    /// Unit normal of the plane with orientation `gamma`.
    pub fn plane_normal(&self, gamma: f64) -> Vector3<f64> {
        let u = self.axis();
        let e = self.reference * gamma.cos() + u.cross(&self.reference) * gamma.sin();
        u.cross(&e)
    }
}

/// Region of `mesh` inside the cylinder around l₁l₂, reduced to the
/// component containing l₁.
pub fn localize(mesh: &Mesh, l1: Point3<f64>, l2: Point3<f64>, opts: &RegionOptions) -> Result<LocalRegion> {
    let length = (l2 - l1).norm();
    if !(length > 0.0) {
        return Err(Error::invalid("landmarks coincide"));
    }
    let u = (l2 - l1) / length;
    let radius = opts.radius.unwrap_or(length / 2.0);
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("region radius must be positive, got {radius}")));
    }
    let h = mesh.median_edge_length();
    let margin = opts.axial_margin * h;
    let inside: Vec<bool> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let d = p - l1;
            let t = d.dot(&u);
            (d - u * t).norm() <= radius && t >= -margin && t <= length + margin
        })
        .collect();
    let kept: Vec<usize> = (0..mesh.triangles().len())
        .filter(|&t| mesh.triangles()[t].iter().all(|&v| inside[v]))
        .collect();
    if kept.is_empty() {
        return Err(Error::Disconnected("l1".into(), "l2".into()));
    }
    let tol = h.max(1e-9);
    let start = mesh
        .closest_point_in(&l1, kept.iter().copied())
        .filter(|sp| sp.distance <= tol)
        .ok_or_else(|| Error::invalid("first landmark is not on the local region"))?;
    let end = mesh
        .closest_point_in(&l2, kept.iter().copied())
        .filter(|sp| sp.distance <= tol)
        .ok_or_else(|| Error::invalid("second landmark is not on the local region"))?;

    // triangle-level flood fill through shared vertices
    let mut is_kept = vec![false; mesh.triangles().len()];
    for &t in &kept {
        is_kept[t] = true;
    }
    let mut reached = vec![false; mesh.triangles().len()];
    reached[start.triangle] = true;
    let mut queue = VecDeque::from([start.triangle]);
    while let Some(t) = queue.pop_front() {
        for &v in &mesh.triangles()[t] {
            for &w in mesh.incident_triangles(v) {
                if is_kept[w] && !reached[w] {
                    reached[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    if !reached[end.triangle] {
        return Err(Error::Disconnected("l1".into(), "l2".into()));
    }
    let tris: Vec<usize> = kept.into_iter().filter(|&t| reached[t]).collect();
    let mut local = HashMap::new();
    let mut source = Vec::new();
    let mut triangles = Vec::with_capacity(tris.len());
    for &t in &tris {
        let mut tri = [0; 3];
        for (k, &v) in mesh.triangles()[t].iter().enumerate() {
            tri[k] = *local.entry(v).or_insert_with(|| {
                source.push(v);
                source.len() - 1
            });
        }
        triangles.push(tri);
    }
    let vertices = source.iter().map(|&v| mesh.vertices()[v]).collect();
    let sub = Mesh::new(vertices, triangles)?;

    let mut mean = Vector3::zeros();
    for t in 0..sub.triangles().len() {
        mean += sub.face_normal(t) * sub.triangle_area(t);
    }
    let mut reference = mean - u * u.dot(&mean);
    if reference.norm() <= 1e-9 * mean.norm().max(1e-300) {
        let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        reference = helper - u * u.dot(&helper);
    }
    Ok(LocalRegion {
        edge_length: sub.median_edge_length(),
        mesh: sub,
        source,
        l1,
        l2,
        radius,
        reference: reference.normalize(),
    })
}

/// Weights of region vertices whose combination gives a value at a path
/// point: crossing points interpolate along their edge, landmarks inside
/// their triangle.
pub type Stencil = Vec<(usize, f64)>;

/// A planar-cut path between the landmarks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaneCut {
    pub gamma: f64,
    pub plane_point: Point3<f64>,
    pub plane_normal: Vector3<f64>,
    pub path: SurfaceCurve,
    /// Per path point, in region vertex indices.
    pub stencils: Vec<Stencil>,
}

impl PlaneCut {
    /// Segment lengths w_j = ‖p_j − p_{j−1}‖, j ≥ 1.
    pub fn weights(&self) -> Vec<f64> {
        self.path
            .points()
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.path.length()
    }

    /// Values at the path points from per-region-vertex `values`.
    pub fn sample(&self, values: &[f64]) -> Vec<f64> {
        self.stencils
            .iter()
            .map(|st| st.iter().map(|&(v, w)| w * values[v]).sum())
            .collect()
    }

    /// Σ_{j≥1} w_j ν(p_j) / Σ w_j.
    pub fn standardized_integral(&self, values: &[f64]) -> Result<f64> {
        let nu = self.sample(values);
        let w = self.weights();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("plane cut has zero length".into()));
        }
        Ok(w.iter().zip(&nu[1..]).map(|(w, v)| w * v).sum::<f64>() / total)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Node {
    Vertex(usize),
    Edge(usize, usize),
    First,
    Second,
}

struct CutGraph {
    points: HashMap<Node, (Point3<f64>, Stencil)>,
    links: HashMap<Node, Vec<Node>>,
}

impl CutGraph {
    fn link(&mut self, a: Node, b: Node) {
        if a == b {
            return;
        }
        let la = self.links.entry(a).or_default();
        if !la.contains(&b) {
            la.push(b);
        }
        let lb = self.links.entry(b).or_default();
        if !lb.contains(&a) {
            lb.push(a);
        }
    }
}

#[derive(PartialEq)]
struct Queued(f64, Node);

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

/// Intersection path of the plane with orientation `gamma` from l₁ to l₂.
pub fn plane_cut(region: &LocalRegion, gamma: f64) -> Result<PlaneCut> {
    let mesh = &region.mesh;
    let (l1, l2) = (region.l1, region.l2);
    let m = region.plane_normal(gamma);
    let fail = |reason: &str| Error::NoCut {
        gamma,
        reason: reason.into(),
    };
    let f: Vec<f64> = mesh.vertices().iter().map(|p| (p - l1).dot(&m)).collect();
    let positive = |v: usize| f[v] >= 0.0;

    let mut graph = CutGraph {
        points: HashMap::new(),
        links: HashMap::new(),
    };
    let crossing = |a: usize, b: usize, graph: &mut CutGraph| -> Node {
        // a and b on opposite sides; a zero value counts as positive
        let (neg, pos) = if positive(a) { (b, a) } else { (a, b) };
        if f[pos] == 0.0 {
            let node = Node::Vertex(pos);
            graph
                .points
                .entry(node)
                .or_insert_with(|| (mesh.vertices()[pos], vec![(pos, 1.0)]));
            return node;
        }
        let node = Node::Edge(neg.min(pos), neg.max(pos));
        graph.points.entry(node).or_insert_with(|| {
            let t = f[neg] / (f[neg] - f[pos]);
            let p = mesh.vertices()[neg] + (mesh.vertices()[pos] - mesh.vertices()[neg]) * t;
            (p, vec![(neg, 1.0 - t), (pos, t)])
        });
        node
    };
    let mut segments: Vec<(Node, Node)> = Vec::new();
    for tri in mesh.triangles() {
        let signs: Vec<bool> = tri.iter().map(|&v| positive(v)).collect();
        if signs.iter().all(|&s| s) || signs.iter().all(|&s| !s) {
            continue;
        }
        let mut ends = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if positive(a) != positive(b) {
                ends.push(crossing(a, b, &mut graph));
            }
        }
        if ends.len() == 2 && ends[0] != ends[1] {
            segments.push((ends[0], ends[1]));
        }
    }
    if segments.is_empty() {
        return Err(fail("plane misses the region"));
    }
    for &(a, b) in &segments {
        graph.link(a, b);
    }

    // attach each landmark to the segment it lies on
    let tol = region.edge_length;
    for (landmark, node) in [(l1, Node::First), (l2, Node::Second)] {
        let mut best: Option<(f64, usize)> = None;
        for (i, &(a, b)) in segments.iter().enumerate() {
            let (pa, pb) = (graph.points[&a].0, graph.points[&b].0);
            let d = point_segment_distance(&landmark, &pa, &pb);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (d, i) = best.expect("segments is non-empty");
        if d > tol {
            return Err(fail("a landmark is not on the intersection"));
        }
        let sp = mesh.closest_point(&landmark);
        let tri = mesh.triangles()[sp.triangle];
        let stencil = (0..3).map(|k| (tri[k], sp.weights[k])).collect();
        graph.points.insert(node, (landmark, stencil));
        let (a, b) = segments[i];
        graph.link(node, a);
        graph.link(node, b);
    }

    // shortest route through the intersection graph
    let mut dist: HashMap<Node, f64> = HashMap::from([(Node::First, 0.0)]);
    let mut prev: HashMap<Node, Node> = HashMap::new();
    let mut heap = BinaryHeap::from([Queued(0.0, Node::First)]);
    while let Some(Queued(d, node)) = heap.pop() {
        if node == Node::Second {
            break;
        }
        if d > dist[&node] {
            continue;
        }
        let p = graph.points[&node].0;
        for &next in graph.links.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            let nd = d + (graph.points[&next].0 - p).norm();
            if dist.get(&next).is_none_or(|&old| nd < old) {
                dist.insert(next, nd);
                prev.insert(next, node);
                heap.push(Queued(nd, next));
            }
        }
    }
    if !dist.contains_key(&Node::Second) {
        return Err(fail("the landmarks lie on different intersection components"));
    }
    let mut route = vec![Node::Second];
    while let Some(&p) = prev.get(route.last().expect("route is non-empty")) {
        route.push(p);
    }
    route.reverse();

    // drop crossings crowding the landmarks
    let half = 0.5 * region.edge_length;
    let mut points = Vec::with_capacity(route.len());
    let mut stencils = Vec::with_capacity(route.len());
    let last = route.len() - 1;
    for (i, node) in route.iter().enumerate() {
        let (p, st) = &graph.points[node];
        if i != 0 && i != last && ((p - l1).norm() < half || (p - l2).norm() < half) {
            continue;
        }
        points.push(*p);
        stencils.push(st.clone());
    }
    let path = SurfaceCurve::from_points(points).map_err(|e| fail(&e.to_string()))?;
    Ok(PlaneCut {
        gamma,
        plane_point: l1,
        plane_normal: m,
        path,
        stencils,
    })
}

fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathCriterion {
    /// Maximise the standardised curvature integral.
    MaxCurvature,
    /// Minimise the path length.
    MinLength,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSearchOptions {
    pub criterion: PathCriterion,
    pub n_angles: usize,
    /// Golden-section refinement around the best grid angle.
    pub refine: bool,
}

impl Default for PathSearchOptions {
    fn default() -> Self {
        PathSearchOptions {
            criterion: PathCriterion::MaxCurvature,
            n_angles: 180,
            refine: true,
        }
    }
}

/// Outcome of the angle search.
#[derive(Debug, Clone)]
pub struct PathSearch {
    pub best: PlaneCut,
    /// Score of the returned cut: the standardised integral, or the length.
    pub score: f64,
    /// (γ, score) at every grid angle; `None` where no cut joined the
    /// landmarks.
    pub grid: Vec<(f64, Option<f64>)>,
    pub refined: bool,
}

/// Best cut over γ ∈ {kπ/n}, ties to the smaller angle, optionally refined.
/// `values` holds ν per region vertex (ignored for the length criterion).
pub fn optimal_reference_path(
    region: &LocalRegion,
    values: &[f64],
    opts: &PathSearchOptions,
) -> Result<PathSearch> {
    if opts.n_angles < 2 {
        return Err(Error::invalid(format!("need at least 2 angles, got {}", opts.n_angles)));
    }
    if values.len() != region.mesh.vertex_count() && opts.criterion == PathCriterion::MaxCurvature {
        return Err(Error::invalid("one value per region vertex is required"));
    }
    // internal objective: larger is better
    let score = |cut: &PlaneCut| -> Result<f64> {
        match opts.criterion {
            PathCriterion::MaxCurvature => cut.standardized_integral(values),
            PathCriterion::MinLength => Ok(-cut.length()),
        }
    };
    let evaluate = |gamma: f64| -> Option<(PlaneCut, f64)> {
        let cut = plane_cut(region, gamma).ok()?;
        let s = score(&cut).ok()?;
        Some((cut, s))
    };
    let n = opts.n_angles;
    let results: Vec<Option<(PlaneCut, f64)>> = (0..n)
        .into_par_iter()
        .map(|k| evaluate(k as f64 * PI / n as f64))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in results.iter().enumerate() {
        if let Some((_, s)) = r {
            if best.is_none_or(|(_, b)| *s > b) {
                best = Some((k, *s));
            }
        }
    }
    let (k_best, mut best_score) = best.ok_or_else(|| Error::NoCut {
        gamma: 0.0,
        reason: "no sampled angle joins the landmarks".into(),
    })?;
    let grid: Vec<(f64, Option<f64>)> = results
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let raw = r.as_ref().map(|(_, s)| *s);
            let shown = match opts.criterion {
                PathCriterion::MaxCurvature => raw,
                PathCriterion::MinLength => raw.map(|s| -s),
            };
            (k as f64 * PI / n as f64, shown)
        })
        .collect();
    let mut best_cut = results
        .into_iter()
        .nth(k_best)
        .flatten()
        .expect("best index has a cut")
        .0;

    let mut refined = false;
    if opts.refine {
        let step = PI / n as f64;
        let g0 = k_best as f64 * step;
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let value = |g: f64| evaluate(g).map(|(_, s)| s).unwrap_or(f64::NEG_INFINITY);
        let (mut a, mut b) = (g0 - step, g0 + step);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (value(c), value(d));
        for _ in 0..40 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = value(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = value(d);
            }
        }
        let g = (0.5 * (a + b)).rem_euclid(PI);
        if let Some((cut, s)) = evaluate(g) {
            if s > best_score {
                best_cut = cut;
                best_score = s;
                refined = true;
            }
        }
    }
    let score = match opts.criterion {
        PathCriterion::MaxCurvature => best_score,
        PathCriterion::MinLength => -best_score,
    };
    Ok(PathSearch {
        best: best_cut,
        score,
        grid,
        refined,
    })
}
