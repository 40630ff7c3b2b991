//! Thin-plate splines in 3D with kernel U(r) = −r.
//!
//! The affine part is expressed in the affine hull of the source points, so
//! coplanar or collinear sources (a single planar curve, say) still give a
//! unique interpolant and energy.

use nalgebra::{DMatrix, Point3, Vector3};

use crate::{Error, Result};

fn kernel(r: f64) -> f64 {
    -r
}

/// Bending-energy operator of a fixed source configuration: J(Y) = Σ_c y_cᵀ B y_c.
#[derive(Debug, Clone)]
pub struct BendingEnergy {
    matrix: DMatrix<f64>,
    /// Rows of L⁻¹ giving the affine coefficients from the targets.
    affine_rows: DMatrix<f64>,
    centre: Point3<f64>,
    basis: Vec<Vector3<f64>>,
    source: Vec<Point3<f64>>,
}

#[derive(Debug, Clone)]
pub struct TpsMap {
    pub source: Vec<Point3<f64>>,
    pub target: Vec<Point3<f64>>,
    /// Kernel weights, one row per control point.
    pub weights: DMatrix<f64>,
    /// Rows: constant, then one per affine-hull direction.
    pub affine: DMatrix<f64>,
    pub energy: f64,
    centre: Point3<f64>,
    basis: Vec<Vector3<f64>>,
}

fn check_duplicates(points: &[Point3<f64>]) -> Result<()> {
    let scale = points.iter().map(|p| p.coords.amax()).fold(0.0, f64::max);
    let tol = 1e-12 * (1.0 + scale);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() <= tol {
                return Err(Error::Singular(format!("source points {i} and {j} coincide")));
            }
        }
    }
    Ok(())
}

/// Centroid and orthonormal directions spanning the points' affine hull.
fn affine_hull(points: &[Point3<f64>]) -> (Point3<f64>, Vec<Vector3<f64>>) {
    let n = points.len() as f64;
    let centre = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n);
    let mut scatter = nalgebra::Matrix3::zeros();
    for p in points {
        let d = p - centre;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let top = eig.eigenvalues.max();
    let mut dirs: Vec<(f64, Vector3<f64>)> = (0..3)
        .filter(|&k| eig.eigenvalues[k] > 1e-18 * top.max(f64::MIN_POSITIVE) && top > 0.0)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
        .collect();
    dirs.sort_by(|a, b| b.0.total_cmp(&a.0));
    (centre, dirs.into_iter().map(|(_, v)| v).collect())
}

impl BendingEnergy {
    pub fn new(source: &[Point3<f64>]) -> Result<Self> {
        let k = source.len();
        if k < 5 {
            return Err(Error::invalid(format!("thin-plate spline needs at least 5 points, got {k}")));
        }
        check_duplicates(source)?;
        let (centre, basis) = affine_hull(source);
        let m = 1 + basis.len();
        let size = k + m;
        let mut system = DMatrix::zeros(size, size);
        for i in 0..k {
            for j in 0..i {
                let u = kernel((source[i] - source[j]).norm());
                system[(i, j)] = u;
                system[(j, i)] = u;
            }
            system[(i, k)] = 1.0;
            system[(k, i)] = 1.0;
            for (a, e) in basis.iter().enumerate() {
                let x = (source[i] - centre).dot(e);
                system[(i, k + 1 + a)] = x;
                system[(k + 1 + a, i)] = x;
            }
        }
        let mut rhs = DMatrix::zeros(size, k);
        for i in 0..k {
            rhs[(i, i)] = 1.0;
        }
        let solved = system
            .lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("thin-plate spline system is singular".into()))?;
        let mut matrix = solved.rows(0, k).into_owned();
        // symmetrise away rounding
        matrix = (&matrix + matrix.transpose()) * 0.5;
        let affine_rows = solved.rows(k, m).into_owned();
        Ok(BendingEnergy { matrix, affine_rows, centre, basis, source: source.to_vec() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn energy(&self, target: &[Point3<f64>]) -> f64 {
        let y = targets_matrix(target);
        let by = &self.matrix * &y;
        y.dot(&by)
    }

    /// Interpolating map onto `target`.
    pub fn map(&self, target: &[Point3<f64>]) -> Result<TpsMap> {
        if target.len() != self.source.len() {
            return Err(Error::invalid(format!(
                "{} source points but {} target points",
                self.source.len(),
                target.len()
            )));
        }
        let y = targets_matrix(target);
        let weights = &self.matrix * &y;
        let affine = &self.affine_rows * &y;
        let energy = y.dot(&weights).max(0.0);
        Ok(TpsMap {
            source: self.source.clone(),
            target: target.to_vec(),
            weights,
            affine,
            energy,
            centre: self.centre,
            basis: self.basis.clone(),
        })
    }
}

fn targets_matrix(target: &[Point3<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(target.len(), 3, |i, c| target[i][c])
}

/// Interpolating thin-plate spline from `source` to `target`.
pub fn tps_fit(source: &[Point3<f64>], target: &[Point3<f64>]) -> Result<TpsMap> {
    BendingEnergy::new(source)?.map(target)
}

impl TpsMap {
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        let mut out = Vector3::zeros();
        for (i, s) in self.source.iter().enumerate() {
            let u = kernel((p - s).norm());
            for c in 0..3 {
                out[c] += self.weights[(i, c)] * u;
            }
        }
        for c in 0..3 {
            out[c] += self.affine[(0, c)];
            for (a, e) in self.basis.iter().enumerate() {
                out[c] += self.affine[(1 + a, c)] * (p - self.centre).dot(e);
            }
        }
        Point3::from(out)
    }

    /// Σ_c w_cᵀ K w_c, computed from the kernel matrix directly.
    pub fn kernel_energy(&self) -> f64 {
        let k = self.source.len();
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                let u = kernel((self.source[i] - self.source[j]).norm());
                for c in 0..3 {
                    total += self.weights[(i, c)] * u * self.weights[(j, c)];
                }
            }
        }
        total
    }
}
