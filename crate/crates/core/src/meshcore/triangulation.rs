//! Planar triangulations: barycentric coordinates, Delaunay construction and
//! bucketed point location.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Point2;

use crate::{Error, Result};

/// Barycentric location inside a triangle of a [`Triangulation2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricCoords {
    pub triangle: usize,
    pub weights: [f64; 3],
}

/// Barycentric weights of `q` with respect to triangle `tri`.
pub fn barycentric(tri: [Point2<f64>; 3], q: Point2<f64>) -> Result<[f64; 3]> {
    let [a, b, c] = tri;
    let det = (b - a).perp(&(c - a));
    if det.abs() < 2e-12 {
        return Err(Error::Degenerate(format!(
            "triangle area {:.3e} below 1e-12",
            det.abs() / 2.0
        )));
    }
    let w1 = (c - b).perp(&(q - b)) / det;
    let w2 = (a - c).perp(&(q - c)) / det;
    let w3 = 1.0 - w1 - w2;
    Ok([w1, w2, w3])
}

fn orient(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    (b - a).perp(&(c - a))
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `abc`.
pub(crate) fn in_circle(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>, d: &Point2<f64>) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Delaunay triangulation of `points` (Bowyer–Watson). Duplicate points are
/// triangulated once, under the index of their first occurrence. Triangles
/// are returned counter-clockwise.
pub fn delaunay_2d(points: &[Point2<f64>]) -> Result<Vec<[usize; 3]>> {
    // dedupe exact duplicates
    let mut first: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut unique = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::invalid(format!("non-finite point {i}")));
        }
        let key = (p.x.to_bits(), p.y.to_bits());
        if let std::collections::btree_map::Entry::Vacant(e) = first.entry(key) {
            e.insert(i);
            unique.push(i);
        }
    }
    if unique.len() < 3 {
        return Err(Error::Degenerate("fewer than 3 distinct points".into()));
    }

    let (mut lo, mut hi) = (points[unique[0]], points[unique[0]]);
    for &i in &unique {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let span = (hi - lo).norm().max(f64::MIN_POSITIVE);
    let a0 = points[unique[0]];
    if unique
        .iter()
        .all(|&i| unique.iter().all(|&j| orient(&a0, &points[i], &points[j]).abs() <= 1e-12 * span * span))
    {
        return Err(Error::Degenerate("all points are collinear".into()));
    }

    // Work in centred, unit-scaled coordinates to keep predicates well scaled.
    let centre = Point2::from((lo.coords + hi.coords) / 2.0);
    let mut pts: Vec<Point2<f64>> = unique
        .iter()
        .map(|&i| Point2::from((points[i] - centre) / span))
        .collect();
    let n = pts.len();
    let big = 1.0e5;
    pts.push(Point2::new(-3.0 * big, -3.0 * big));
    pts.push(Point2::new(3.0 * big, -3.0 * big));
    pts.push(Point2::new(0.0, 3.0 * big));

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    for p in 0..n {
        let mut bad = Vec::new();
        let mut keep = Vec::with_capacity(tris.len() + 2);
        for t in tris.drain(..) {
            if in_circle(&pts[t[0]], &pts[t[1]], &pts[t[2]], &pts[p]) > 0.0 {
                bad.push(t);
            } else {
                keep.push(t);
            }
        }
        // boundary of the cavity: edges used by exactly one bad triangle
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if edges[&(a.min(b), a.max(b))] == 1 {
                    let mut nt = [a, b, p];
                    if orient(&pts[a], &pts[b], &pts[p]) < 0.0 {
                        nt.swap(0, 1);
                    }
                    keep.push(nt);
                }
            }
        }
        tris = keep;
    }
    let mut out: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&i| i < n))
        .filter(|t| orient(&pts[t[0]], &pts[t[1]], &pts[t[2]]) > 0.0)
        .map(|t| [unique[t[0]], unique[t[1]], unique[t[2]]])
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// A planar triangulation with a uniform bucket grid for point location.
#[derive(Debug, Clone)]
pub struct Triangulation2d {
    points: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    lo: Point2<f64>,
    cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<usize>>,
    boundary: Vec<(usize, usize)>,
}

impl Triangulation2d {
    pub fn new(points: Vec<Point2<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Degenerate("empty triangulation".into()));
        }
        let n = points.len();
        if let Some(&bad) = triangles.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::VertexOutOfRange { index: bad, len: n });
        }
        let mut lo = points[triangles[0][0]];
        let mut hi = lo;
        for &i in triangles.iter().flatten() {
            lo = lo.inf(&points[i]);
            hi = hi.sup(&points[i]);
        }
        let area = ((hi.x - lo.x) * (hi.y - lo.y)).max(f64::MIN_POSITIVE);
        let mut cell = (area / triangles.len() as f64).sqrt() * 2.0;
        if !(cell > 0.0) {
            cell = (hi - lo).norm().max(1.0);
        }
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).min(4096);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).min(4096);
        let cell = cell
            .max((hi.x - lo.x) / nx as f64)
            .max((hi.y - lo.y) / ny as f64);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let mut tlo = points[tri[0]];
            let mut thi = tlo;
            for &i in &tri[1..] {
                tlo = tlo.inf(&points[i]);
                thi = thi.sup(&points[i]);
            }
            let (x0, y0) = Self::cell_of(lo, cell, (nx, ny), &tlo);
            let (x1, y1) = Self::cell_of(lo, cell, (nx, ny), &thi);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    buckets[y * nx + x].push(t);
                }
            }
        }
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(e, _)| e)
            .collect();
        Ok(Triangulation2d {
            points,
            triangles,
            lo,
            cell,
            dims: (nx, ny),
            buckets,
            boundary,
        })
    }

    fn cell_of(lo: Point2<f64>, cell: f64, dims: (usize, usize), p: &Point2<f64>) -> (usize, usize) {
        let x = ((p.x - lo.x) / cell).floor().max(0.0) as usize;
        let y = ((p.y - lo.y) / cell).floor().max(0.0) as usize;
        (x.min(dims.0 - 1), y.min(dims.1 - 1))
    }

    pub fn points(&self) -> &[Point2<f64>] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Enclosing triangle and weights for `q`. Points within a relative
    /// tolerance of the hull boundary are accepted.
    pub fn locate(&self, q: Point2<f64>) -> Result<BarycentricCoords> {
        let (nx, ny) = self.dims;
        let inside_grid = q.x >= self.lo.x - self.cell
            && q.y >= self.lo.y - self.cell
            && q.x <= self.lo.x + self.cell * (nx as f64 + 1.0)
            && q.y <= self.lo.y + self.cell * (ny as f64 + 1.0);
        if inside_grid {
            let (cx, cy) = Self::cell_of(self.lo, self.cell, self.dims, &q);
            let tol = 1e-9;
            let mut best: Option<BarycentricCoords> = None;
            let mut best_min = f64::NEG_INFINITY;
            for &t in &self.buckets[cy * nx + cx] {
                let tri = self.triangles[t];
                let Ok(w) = barycentric(
                    [self.points[tri[0]], self.points[tri[1]], self.points[tri[2]]],
                    q,
                ) else {
                    continue;
                };
                let m = w[0].min(w[1]).min(w[2]);
                if m >= 0.0 {
                    return Ok(BarycentricCoords { triangle: t, weights: w });
                }
                if m > best_min {
                    best_min = m;
                    best = Some(BarycentricCoords { triangle: t, weights: w });
                }
            }
            if let Some(b) = best {
                if best_min >= -tol {
                    return Ok(b);
                }
            }
        }
        let near = self.nearest_boundary_point(q);
        Err(Error::OutsideHull {
            x: q.x,
            y: q.y,
            nx: near.x,
            ny: near.y,
        })
    }

    /// Closest point on the triangulation boundary.
    pub fn nearest_boundary_point(&self, q: Point2<f64>) -> Point2<f64> {
        let mut best = self.points[self.boundary[0].0];
        let mut best_d = f64::INFINITY;
        for &(a, b) in &self.boundary {
            let (pa, pb) = (self.points[a], self.points[b]);
            let ab = pb - pa;
            let t = ((q - pa).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let c = pa + ab * t;
            let d = (q - c).norm();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}
