//! Homologous point models: resampling, bending energy, sliding,
//! Procrustes machinery and template construction.

mod model;
mod procrustes;
mod sliding;
mod tps;

pub use model::{
    build_model, estimate_anatomy, BuildOptions, iterate_template_mean, make_intermediate_transects, make_template, Anatomy,
    CurveMode, CurveSpec, IterationReport, Model, ModelSpec, PatchSpec, TemplateModel, TransectOptions,
};
pub use procrustes::{align, centroid, centroid_size, gpa, rms_distance, symmetrize, symmetry_error, GpaResult};
pub use sliding::{slide, slide_curve, SlideCurve, SlideOptions, SlideOutcome};
pub use tps::{tps_fit, BendingEnergy, TpsMap};

use nalgebra::Point3;

use crate::meshcore::SurfaceCurve;
use crate::{Error, Result};

/// `n` points at arc lengths k·L/(n−1).
pub fn resample_equal_arclength(curve: &SurfaceCurve, n: usize) -> Result<Vec<Point3<f64>>> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    let len = curve.length();
    if !(len > 0.0) {
        return Err(Error::Degenerate("zero-length curve".into()));
    }
    let last = curve.points()[curve.len() - 1];
    Ok((0..n)
        .map(|k| if k == n - 1 { last } else { curve.point_at(len * k as f64 / (n - 1) as f64) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_resamples_to_midpoint() {
        let c = SurfaceCurve::from_points(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 4.0, 4.0)]).unwrap();
        let r = resample_equal_arclength(&c, 3).unwrap();
        assert_eq!(r[0], Point3::new(0.0, 0.0, 0.0));
        assert!((r[1] - Point3::new(1.0, 2.0, 2.0)).norm() < 1e-12);
        assert_eq!(r[2], Point3::new(2.0, 4.0, 4.0));
        let two = resample_equal_arclength(&c, 2).unwrap();
        assert_eq!(two, vec![c.points()[0], c.points()[1]]);
    }

    #[test]
    fn arc_resamples_to_equal_chords() {
        let pts = (0..1000)
            .map(|k| {
                let t = 2.0 * k as f64 / 999.0;
                Point3::new(5.0 * t.cos(), 5.0 * t.sin(), 0.0)
            })
            .collect();
        let c = SurfaceCurve::from_points(pts).unwrap();
        let r = resample_equal_arclength(&c, 21).unwrap();
        let chords: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let mean = chords.iter().sum::<f64>() / chords.len() as f64;
        for c in chords {
            assert!((c - mean).abs() < 1e-3 * mean);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let c = SurfaceCurve::from_points(vec![Point3::origin()]).unwrap();
        assert!(resample_equal_arclength(&c, 5).is_err());
        let c = SurfaceCurve::from_points(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]).unwrap();
        assert!(resample_equal_arclength(&c, 1).is_err());
    }
}
