//! Procrustes alignment, generalised Procrustes analysis and bilateral
//! symmetrisation.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::{Error, Result};

pub fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / points.len() as f64)
}

/// Root sum of squared distances from the centroid.
pub fn centroid_size(points: &[Point3<f64>]) -> f64 {
    let c = centroid(points);
    points.iter().map(|p| (p - c).norm_squared()).sum::<f64>().sqrt()
}

pub fn rms_distance(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}

/// Proper rotation R minimising Σ |R xᵢ − yᵢ|² for centred inputs.
fn optimal_rotation(moving: &[Vector3<f64>], target: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut cov = Matrix3::zeros();
    for (x, y) in moving.iter().zip(target) {
        cov += y * x.transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    u * fix * v_t
}

/// `moving` superimposed on `target` by translation, rotation and, if
/// `scale`, isotropic scaling.
pub fn align(moving: &[Point3<f64>], target: &[Point3<f64>], scale: bool) -> Vec<Point3<f64>> {
    let (cm, ct) = (centroid(moving), centroid(target));
    let xm: Vec<Vector3<f64>> = moving.iter().map(|p| p - cm).collect();
    let xt: Vec<Vector3<f64>> = target.iter().map(|p| p - ct).collect();
    let rot = optimal_rotation(&xm, &xt);
    let factor = if scale {
        let num: f64 = xm.iter().zip(&xt).map(|(x, y)| (rot * x).dot(y)).sum();
        let den: f64 = xm.iter().map(|x| x.norm_squared()).sum();
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    } else {
        1.0
    };
    xm.iter().map(|x| ct + rot * x * factor).collect()
}

#[derive(Debug, Clone)]
pub struct GpaResult {
    pub aligned: Vec<Vec<Point3<f64>>>,
    pub mean: Vec<Point3<f64>>,
    pub iterations: usize,
}

/// Generalised Procrustes analysis. All configurations are centred; with
/// `scale` they are also brought to unit centroid size. The first
/// configuration fixes the orientation of the mean.
pub fn gpa(configs: &[Vec<Point3<f64>>], scale: bool) -> Result<GpaResult> {
    if configs.len() < 2 {
        return Err(Error::invalid("Procrustes analysis needs at least 2 configurations"));
    }
    let k = configs[0].len();
    if let Some(i) = configs.iter().position(|c| c.len() != k) {
        return Err(Error::invalid(format!("configuration {i} has {} points, expected {k}", configs[i].len())));
    }
    let mut work = Vec::with_capacity(configs.len());
    for (i, c) in configs.iter().enumerate() {
        let size = centroid_size(c);
        if !(size > 0.0) {
            return Err(Error::Sample {
                sample: i.to_string(),
                source: Box::new(Error::Degenerate("all points coincide".into())),
            });
        }
        let cen = centroid(c);
        let f = if scale { 1.0 / size } else { 1.0 };
        work.push(c.iter().map(|p| Point3::from((p - cen) * f)).collect::<Vec<_>>());
    }
    let mut mean = work[0].clone();
    let mut iterations = 0;
    for _ in 0..100 {
        iterations += 1;
        for w in work.iter_mut() {
            *w = align(w, &mean, false);
            if scale {
                let s = centroid_size(w);
                w.iter_mut().for_each(|p| *p = Point3::from(p.coords / s));
            }
        }
        let mut next: Vec<Point3<f64>> = (0..k)
            .map(|j| Point3::from(work.iter().map(|w| w[j].coords).sum::<Vector3<f64>>() / work.len() as f64))
            .collect();
        if scale {
            let s = centroid_size(&next);
            next.iter_mut().for_each(|p| *p = Point3::from(p.coords / s));
        }
        let change = rms_distance(&next, &mean);
        mean = next;
        if change < 1e-10 {
            break;
        }
    }
    Ok(GpaResult { aligned: work, mean, iterations })
}

fn check_involution(pairs: &[usize], n: usize) -> Result<()> {
    if pairs.len() != n {
        return Err(Error::invalid(format!("relabel table has {} entries for {n} points", pairs.len())));
    }
    for (i, &j) in pairs.iter().enumerate() {
        if j >= n || pairs[j] != i {
            return Err(Error::invalid(format!("relabel table is not an involution at entry {i}")));
        }
    }
    Ok(())
}

/// Reflection through x = 0 followed by relabelling, superimposed on the
/// original by a rigid motion.
fn mirrored(config: &[Point3<f64>], pairs: &[usize]) -> Vec<Point3<f64>> {
    let reflected: Vec<Point3<f64>> = pairs.iter().map(|&j| Point3::new(-config[j].x, config[j].y, config[j].z)).collect();
    align(&reflected, config, false)
}

/// Average of a configuration and its aligned, relabelled reflection.
pub fn symmetrize(config: &[Point3<f64>], pairs: &[usize]) -> Result<Vec<Point3<f64>>> {
    check_involution(pairs, config.len())?;
    let m = mirrored(config, pairs);
    Ok(config.iter().zip(&m).map(|(p, q)| Point3::from((p.coords + q.coords) / 2.0)).collect())
}

/// Largest distance between a configuration and its aligned, relabelled
/// reflection.
pub fn symmetry_error(config: &[Point3<f64>], pairs: &[usize]) -> Result<f64> {
    check_involution(pairs, config.len())?;
    let m = mirrored(config, pairs);
    Ok(config.iter().zip(&m).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
}
