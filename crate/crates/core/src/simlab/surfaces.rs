//! Closed-form test surfaces triangulated on regular grids.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::meshcore::Mesh;
use crate::Result;

/// Triangulate a parametric patch sampled on an `nu × nv` lattice over the
/// unit square. Vertex `(i, j)` has index `j * nu + i`. Each lattice cell is
/// split along its (i, j)–(i+1, j+1) diagonal, wound so the face normal is
/// ∂f/∂u × ∂f/∂v.
pub fn parametric_mesh<F>(nu: usize, nv: usize, f: F) -> Result<Mesh>
where
    F: Fn(f64, f64) -> Point3<f64>,
{
    let mut vertices = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            vertices.push(f(i as f64 / (nu - 1) as f64, j as f64 / (nv - 1) as f64));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nu - 1) * (nv - 1));
    for j in 0..nv - 1 {
        for i in 0..nu - 1 {
            let v00 = j * nu + i;
            let (v10, v01, v11) = (v00 + 1, v00 + nu, v00 + nu + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::new(vertices, triangles)
}

/// Height field `z = h(x, y)` on an `n × n` grid over `[lo, hi]²`.
pub fn height_field<H>(n: usize, lo: f64, hi: f64, h: H) -> Result<Mesh>
where
    H: Fn(f64, f64) -> f64,
{
    height_field_rect(n, n, (lo, hi), (lo, hi), h)
}

pub fn height_field_rect<H>(
    nx: usize,
    ny: usize,
    xr: (f64, f64),
    yr: (f64, f64),
    h: H,
) -> Result<Mesh>
where
    H: Fn(f64, f64) -> f64,
{
    parametric_mesh(nx, ny, |u, v| {
        let x = xr.0 + u * (xr.1 - xr.0);
        let y = yr.0 + v * (yr.1 - yr.0);
        Point3::new(x, y, h(x, y))
    })
}

/// Upper half of a cylinder of radius `radius` around the y axis, for
/// `y ∈ [0, length]`, normals pointing away from the axis.
pub fn hemicylinder(radius: f64, length: f64, n_around: usize, n_along: usize) -> Result<Mesh> {
    parametric_mesh(n_around, n_along, |u, v| {
        let t = std::f64::consts::PI * (1.0 - u);
        Point3::new(radius * t.cos(), v * length, radius * t.sin())
    })
}

/// Geodesic sphere: a subdivided icosahedron projected onto the sphere,
/// outward wound.
pub fn icosphere(radius: f64, subdivisions: usize) -> Result<Mesh> {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(
        verts.iter().map(|v| Point3::from(v * radius)).collect(),
        faces,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_field_normals_point_up() {
        let m = height_field(5, 0.0, 1.0, |x, y| 0.1 * x * y).unwrap();
        assert_eq!(m.vertex_count(), 25);
        assert_eq!(m.triangles().len(), 32);
        assert!(m.vertex_normals().unwrap().iter().all(|n| n.z > 0.9));
    }

    #[test]
    fn hemicylinder_and_sphere_are_outward() {
        let c = hemicylinder(2.0, 5.0, 17, 9).unwrap();
        for (p, n) in c.vertices().iter().zip(c.vertex_normals().unwrap()) {
            let radial = Vector3::new(p.x, 0.0, p.z).normalize();
            assert!(n.dot(&radial) > 0.9);
        }
        let s = icosphere(1.0, 2).unwrap();
        assert_eq!(s.vertex_count(), 162);
        for (p, n) in s.vertices().iter().zip(s.vertex_normals().unwrap()) {
            assert!(n.dot(&p.coords) > 0.99);
        }
    }

    #[test]
    fn sphere_vertex_normals_within_two_degrees_of_radial() {
        let s = icosphere(1.0, 3).unwrap();
        let limit = 2f64.to_radians().cos();
        for (p, n) in s.vertices().iter().zip(s.vertex_normals().unwrap()) {
            assert!(n.dot(&p.coords.normalize()) >= limit);
        }
    }
}
