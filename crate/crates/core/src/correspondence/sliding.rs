//! Sliding semilandmarks along their curves to minimise bending energy
//! against a template.

use nalgebra::{DMatrix, Point3, Vector3};
use serde::Serialize;

use super::tps::BendingEnergy;
use crate::meshcore::SurfaceCurve;
use crate::{Error, Result};

/// Free points of a configuration that move along one curve. `members` are
/// configuration indices in curve order; the first may move down to
/// `bounds.0` and the last up to `bounds.1` (arc lengths).
#[derive(Debug, Clone)]
pub struct SlideCurve {
    pub curve: SurfaceCurve,
    pub members: Vec<usize>,
    pub bounds: (f64, f64),
}

impl SlideCurve {
    pub fn new(curve: SurfaceCurve, members: Vec<usize>) -> Self {
        let bounds = (0.0, curve.length());
        SlideCurve { curve, members, bounds }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SlideOptions {
    pub max_sweeps: usize,
    /// Stop when a sweep lowers J by less than this fraction.
    pub tolerance: f64,
    pub golden_iterations: usize,
}

impl Default for SlideOptions {
    fn default() -> Self {
        SlideOptions { max_sweeps: 1000, tolerance: 1e-6, golden_iterations: 60 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlideOutcome {
    pub points: Vec<Point3<f64>>,
    /// J before sliding and after each sweep.
    pub energy_trace: Vec<f64>,
    pub sweeps: usize,
    /// False when the sweep limit was reached first.
    pub converged: bool,
}

impl SlideOutcome {
    pub fn initial_energy(&self) -> f64 {
        self.energy_trace[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().unwrap()
    }
}

/// Coordinate descent: each free point in turn is moved to the minimiser of
/// J along its curve between its neighbours' current positions.
pub fn slide(
    energy: &BendingEnergy,
    image: &[Point3<f64>],
    curves: &[SlideCurve],
    opts: &SlideOptions,
) -> Result<SlideOutcome> {
    let k = energy.len();
    if image.len() != k {
        return Err(Error::invalid(format!("template has {k} points, image has {}", image.len())));
    }
    let b = energy.matrix();
    let mut points = image.to_vec();
    // arc position of every free point
    let mut params: Vec<Vec<f64>> = Vec::with_capacity(curves.len());
    for c in curves {
        let mut ts = Vec::with_capacity(c.members.len());
        for &m in &c.members {
            if m >= k {
                return Err(Error::VertexOutOfRange { index: m, len: k });
            }
            let (t, _, dist) = c.curve.project(&points[m]);
            if dist > 1e-6 {
                return Err(Error::invalid(format!("point {m} lies {dist} mm off its curve")));
            }
            ts.push(t);
        }
        params.push(ts);
    }

    let mut y = DMatrix::from_fn(k, 3, |i, c| points[i][c]);
    let mut g = b * &y;
    let mut current = y.dot(&g);
    let centre = points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / k as f64;
    let scale: f64 = (0..k).map(|i| b[(i, i)].abs() * (points[i].coords - centre).norm_squared()).sum();
    let threshold = 1e-13 * scale.max(current).max(f64::MIN_POSITIVE);

    let mut trace = vec![current];
    let mut converged = false;
    let mut sweeps = 0;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let before = current;
        for (c, curve) in curves.iter().enumerate() {
            let n = curve.members.len();
            for j in 0..n {
                let i = curve.members[j];
                let lo = if j == 0 { curve.bounds.0 } else { params[c][j - 1] };
                let hi = if j + 1 == n { curve.bounds.1 } else { params[c][j + 1] };
                let (lo, hi) = (lo.min(hi), lo.max(hi));
                let gi = Vector3::new(g[(i, 0)], g[(i, 1)], g[(i, 2)]);
                let bii = b[(i, i)];
                let yi = points[i];
                let delta_energy = |t: f64| {
                    let d = curve.curve.point_at(t) - yi;
                    2.0 * d.dot(&gi) + bii * d.norm_squared()
                };
                let (mut a, mut z) = (lo, hi);
                let mut x1 = z - phi * (z - a);
                let mut x2 = a + phi * (z - a);
                let (mut f1, mut f2) = (delta_energy(x1), delta_energy(x2));
                for _ in 0..opts.golden_iterations {
                    if f1 <= f2 {
                        z = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = z - phi * (z - a);
                        f1 = delta_energy(x1);
                    } else {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + phi * (z - a);
                        f2 = delta_energy(x2);
                    }
                }
                let mut best = (0.5 * (a + z), delta_energy(0.5 * (a + z)));
                for t in [lo, hi] {
                    let f = delta_energy(t);
                    if f < best.1 {
                        best = (t, f);
                    }
                }
                if best.1 < -threshold {
                    let p = curve.curve.point_at(best.0);
                    let d = p - yi;
                    for r in 0..k {
                        for col in 0..3 {
                            g[(r, col)] += b[(r, i)] * d[col];
                        }
                    }
                    for col in 0..3 {
                        y[(i, col)] = p[col];
                    }
                    points[i] = p;
                    params[c][j] = best.0;
                }
            }
        }
        // resynchronise with an exact evaluation
        g = b * &y;
        current = y.dot(&g);
        trace.push(current);
        if before - current <= opts.tolerance * before.abs() || current <= threshold {
            converged = true;
            break;
        }
    }
    Ok(SlideOutcome { points, energy_trace: trace, sweeps, converged })
}

/// Slide the interior samples of one curve against matching template
/// samples; the first and last samples are anchors.
pub fn slide_curve(
    image_curve: &SurfaceCurve,
    image_points: &[Point3<f64>],
    template_points: &[Point3<f64>],
    opts: &SlideOptions,
) -> Result<SlideOutcome> {
    let n = image_points.len();
    if template_points.len() != n {
        return Err(Error::invalid(format!(
            "{} image samples but {} template samples",
            n,
            template_points.len()
        )));
    }
    let energy = BendingEnergy::new(template_points)?;
    let lo = image_curve.project(&image_points[0]).0;
    let hi = image_curve.project(&image_points[n - 1]).0;
    let curve = SlideCurve { curve: image_curve.clone(), members: (1..n - 1).collect(), bounds: (lo, hi) };
    slide(&energy, image_points, &[curve], opts)
}
