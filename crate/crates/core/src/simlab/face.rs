//! A bilaterally symmetric face-like height field: a midline ridge flanked by
//! two curved valleys, with landmarks at the ends of each feature.

use std::collections::BTreeMap;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::surfaces::height_field_rect;
use crate::correspondence::{CurveMode, CurveSpec, ModelSpec, PatchSpec};
use crate::meshcore::{LandmarkSet, Mesh};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    pub ridge_height: f64,
    pub ridge_width: f64,
    /// Distance of the valleys from the midline (mm).
    pub valley_offset: f64,
    pub valley_depth: f64,
    pub valley_width: f64,
    /// Amplitude of the valleys' lateral bend (mm).
    pub valley_bend: f64,
    /// Extra lateral shift of the right valley (mm).
    pub asymmetry: f64,
}

impl Default for FaceParams {
    fn default() -> Self {
        FaceParams {
            ridge_height: 10.0,
            ridge_width: 5.0,
            valley_offset: 14.0,
            valley_depth: 3.0,
            valley_width: 3.0,
            valley_bend: 2.0,
            asymmetry: 0.0,
        }
    }
}

const HALF_WIDTH: f64 = 30.0;
const HALF_HEIGHT: f64 = 40.0;
const LANDMARK_Y: f64 = 30.0;

impl FaceParams {
    fn valley_x(&self, y: f64) -> f64 {
        self.valley_offset + self.valley_bend * (std::f64::consts::PI * y / 60.0).sin()
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        let g = |u: f64, w: f64| (-(u * u) / (2.0 * w * w)).exp();
        let c = self.valley_x(y);
        self.ridge_height * g(x, self.ridge_width)
            - self.valley_depth * (g(x - c, self.valley_width) + g(x + c + self.asymmetry, self.valley_width))
            - 0.004 * (x * x + 0.5 * y * y)
    }

    /// Face mesh at `spacing` mm over [−30, 30] × [−40, 40].
    pub fn mesh(&self, spacing: f64) -> Result<Mesh> {
        let nx = (2.0 * HALF_WIDTH / spacing).round() as usize + 1;
        let ny = (2.0 * HALF_HEIGHT / spacing).round() as usize + 1;
        height_field_rect(nx, ny, (-HALF_WIDTH, HALF_WIDTH), (-HALF_HEIGHT, HALF_HEIGHT), |x, y| self.height(x, y))
    }

    /// Feature end points before snapping.
    pub fn raw_landmarks(&self) -> BTreeMap<String, Point3<f64>> {
        let at = |x: f64, y: f64| Point3::new(x, y, self.height(x, y));
        let (top, bottom) = (LANDMARK_Y, -LANDMARK_Y);
        let mut out = BTreeMap::new();
        out.insert("nasion".into(), at(0.0, top));
        out.insert("subnasale".into(), at(0.0, bottom));
        out.insert("valley_top_l".into(), at(self.valley_x(top), top));
        out.insert("valley_bottom_l".into(), at(self.valley_x(bottom), bottom));
        out.insert("valley_top_r".into(), at(-self.valley_x(top) - self.asymmetry, top));
        out.insert("valley_bottom_r".into(), at(-self.valley_x(bottom) - self.asymmetry, bottom));
        out
    }

    pub fn landmarks(&self, mesh: &Mesh) -> LandmarkSet {
        LandmarkSet::snapped(mesh, &self.raw_landmarks())
    }
}

/// Model layout for the face: midline ridge, two valleys and a patch on each
/// side, with left/right partners declared.
pub fn face_spec() -> ModelSpec {
    let curve = |name: &str, from: &str, to: &str, mode| CurveSpec {
        name: name.into(),
        from: from.into(),
        to: to.into(),
        mode,
        points: 15,
    };
    let patch = |name: &str, second: &str| PatchSpec {
        name: name.into(),
        first: "midline".into(),
        second: second.into(),
        points: 6,
    };
    let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
    ModelSpec {
        landmarks: ["nasion", "subnasale", "valley_top_l", "valley_bottom_l", "valley_top_r", "valley_bottom_r"]
            .map(String::from)
            .to_vec(),
        curves: vec![
            curve("midline", "nasion", "subnasale", CurveMode::Ridge),
            curve("valley_l", "valley_top_l", "valley_bottom_l", CurveMode::Valley),
            curve("valley_r", "valley_top_r", "valley_bottom_r", CurveMode::Valley),
        ],
        patches: vec![patch("cheek_l", "valley_l"), patch("cheek_r", "valley_r")],
        mirror: vec![
            pair("valley_top_l", "valley_top_r"),
            pair("valley_bottom_l", "valley_bottom_r"),
            pair("valley_l", "valley_r"),
            pair("cheek_l", "cheek_r"),
        ],
        curvature_radius: 3.0,
    }
}

/// `n` faces split into two groups (alternating labels 0, 1). Group 1 has a
/// taller ridge and wider-set valleys.
pub fn face_family(n: usize, seed: u64) -> Vec<(FaceParams, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let group = (i % 2) as u8;
            let g = group as f64;
            let mut u = |half: f64| rng.gen_range(-half..=half);
            let p = FaceParams {
                ridge_height: 10.0 + 1.0 * g + u(1.0),
                ridge_width: 5.0 + u(0.5),
                valley_offset: 14.0 + 0.8 * g + u(1.0),
                valley_depth: 3.0 + u(0.5),
                valley_width: 3.0 + u(0.3),
                valley_bend: 2.0 + u(0.6),
                asymmetry: u(0.4),
            };
            (p, group)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_face_is_symmetric() {
        let p = FaceParams::default();
        for (x, y) in [(3.0, 4.0), (12.0, -20.0), (25.0, 33.0)] {
            assert!((p.height(x, y) - p.height(-x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_is_consistent() {
        let spec = face_spec();
        spec.validate().unwrap();
        assert_eq!(spec.point_count(), spec.labels().len());
        let table = spec.relabel_table().unwrap();
        // midline samples map to themselves, lateral ones do not
        assert!(table.iter().enumerate().filter(|&(i, &j)| i == j).count() >= 2 + 13);
        assert!(table.iter().enumerate().any(|(i, &j)| i != j));
    }

    #[test]
    fn family_is_seeded() {
        assert_eq!(face_family(4, 3), face_family(4, 3));
        assert_ne!(face_family(4, 3), face_family(4, 4));
        assert_eq!(face_family(4, 3).iter().map(|f| f.1).collect::<Vec<_>>(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn landmarks_are_on_the_mesh() {
        let p = FaceParams::default();
        let mesh = p.mesh(1.0).unwrap();
        let lms = p.landmarks(&mesh);
        assert_eq!(lms.len(), 6);
        for (_, l) in lms.iter() {
            assert!(mesh.closest_point(l).distance < 1e-6);
        }
    }
}
