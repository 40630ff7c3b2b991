//! Procrustes alignment, PCA and permutation tests on synthetic samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridgeline::correspondence::{centroid_size, gpa};
use ridgeline::shapestats::{pca, perm_test_hotelling, perm_test_t, ShapeSample};
use ridgeline::{Point3, Vector3};

/// Rotated, translated and scaled copies of a base shape; group members get
/// a stretched first landmark.
fn sample(n: usize, effect: f64, seed: u64) -> (Vec<Vec<Point3<f64>>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Point3<f64>> = (0..8)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 8.0;
            Point3::new(5.0 * t.cos(), 3.0 * t.sin(), 0.5 * (3.0 * t).cos())
        })
        .collect();
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
    let configs = labels
        .iter()
        .map(|&group| {
            let rot = nalgebra::Rotation3::from_scaled_axis(Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ));
            let shift = Vector3::new(rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0), 0.0);
            let scale = rng.gen_range(0.8..1.2);
            base.iter()
                .enumerate()
                .map(|(k, p)| {
                    let mut q = *p + Vector3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
                    if group && k == 0 {
                        q.x += effect;
                    }
                    rot * Point3::from(q.coords * scale) + shift
                })
                .collect()
        })
        .collect();
    (configs, labels)
}

#[test]
fn alignment_removes_pose() {
    let (configs, _) = sample(10, 0.0, 1);
    let fit = gpa(&configs, true).unwrap();
    for c in &fit.aligned {
        assert!((centroid_size(c) - centroid_size(&fit.mean)).abs() < 0.05 * centroid_size(&fit.mean));
        let rms = (c.iter().zip(&fit.mean).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / c.len() as f64).sqrt();
        assert!(rms < 0.1 * centroid_size(&fit.mean), "{rms}");
    }
}

#[test]
fn group_shape_difference_is_detected() {
    let (configs, labels) = sample(30, 1.5, 2);
    let s = ShapeSample::from_configs(&configs, labels.clone(), true).unwrap();
    let result = pca(&s.aligned).unwrap();
    let q = result.components_for(0.9).min(5);
    let test = perm_test_hotelling(&result.leading_scores(q), &labels, 999, 7).unwrap();
    assert!(test.p_value < 0.01, "{test:?}");
    // size carries no group signal here
    assert!(perm_test_t(&s.sizes, &labels, 999, 7).unwrap().p_value > 0.01);
}

#[test]
fn null_samples_are_not_flagged() {
    let (configs, labels) = sample(30, 0.0, 3);
    let s = ShapeSample::from_configs(&configs, labels.clone(), true).unwrap();
    let result = pca(&s.aligned).unwrap();
    let test = perm_test_hotelling(&result.leading_scores(3), &labels, 999, 7).unwrap();
    assert!(test.p_value > 0.01, "{test:?}");
}
