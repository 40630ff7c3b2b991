//! Curvature bias on graph surfaces z = f(x) with a known cross-sectional
//! curvature profile.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::surfaces::height_field;
use crate::curvature::{CurvatureField, CurvatureOptions, PatchMetric};
use crate::meshcore::Mesh;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasForm {
    /// z = −x²
    NegX2,
    /// z = −x³
    NegX3,
    /// z = 0
    Flat,
}

impl BiasForm {
    pub fn height(self, x: f64) -> f64 {
        match self {
            BiasForm::NegX2 => -x * x,
            BiasForm::NegX3 => -x * x * x,
            BiasForm::Flat => 0.0,
        }
    }

    fn slope(self, x: f64) -> f64 {
        match self {
            BiasForm::NegX2 => -2.0 * x,
            BiasForm::NegX3 => -3.0 * x * x,
            BiasForm::Flat => 0.0,
        }
    }

    fn second(self, x: f64) -> f64 {
        match self {
            BiasForm::NegX2 => -2.0,
            BiasForm::NegX3 => -6.0 * x,
            BiasForm::Flat => 0.0,
        }
    }

    /// Signed curvature z″/(1+z′²)^{3/2} of the cross-section at `x`.
    pub fn curvature(self, x: f64) -> f64 {
        self.second(x) / (1.0 + self.slope(x).powi(2)).powf(1.5)
    }

    /// Arc length of the profile from 0 to `x` (composite Simpson).
    pub fn arc_length(self, x: f64) -> f64 {
        let n = 2000;
        let h = x / n as f64;
        let g = |t: f64| (1.0 + self.slope(t).powi(2)).sqrt();
        let mut total = g(0.0) + g(x);
        for k in 1..n {
            total += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
        }
        total * h / 3.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BiasOptions {
    /// Grid points per side.
    pub n: usize,
    pub domain: (f64, f64),
    pub radius: f64,
}

impl Default for BiasOptions {
    fn default() -> Self {
        BiasOptions { n: 41, domain: (0.0, 10.0), radius: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasRow {
    pub x: f64,
    pub arc_length: f64,
    pub true_kappa: f64,
    /// `None` where the patch fit failed.
    pub estimated_kappa: Option<f64>,
}

impl BiasRow {
    pub fn relative_error(&self) -> Option<f64> {
        let e = self.estimated_kappa?;
        if self.true_kappa == 0.0 {
            return None;
        }
        Some((e - self.true_kappa) / self.true_kappa.abs())
    }
}

pub fn gen_bias_surface(form: BiasForm, opts: &BiasOptions) -> Result<Mesh> {
    height_field(opts.n, opts.domain.0, opts.domain.1, |x, _| form.height(x))
}

/// Cross-sectional curvature along the middle row: the principal curvature
/// whose direction is closest to the x axis, signed against the upward
/// normal. Neighbourhoods are measured in the (x, y) plane so a patch spans
/// the same grid footprint however steep the surface is.
pub fn bias_study(form: BiasForm, opts: &BiasOptions) -> Result<Vec<BiasRow>> {
    let mesh = gen_bias_surface(form, opts)?;
    let field = CurvatureField::compute(
        &mesh,
        &CurvatureOptions {
            radius: opts.radius,
            metric: PatchMetric::Projected(Vector3::z()),
            ..Default::default()
        },
    )?;
    let normals = mesh.vertex_normals()?;
    let row = opts.n / 2;
    let x_axis = Vector3::x();
    Ok((0..opts.n)
        .map(|i| {
            let v = row * opts.n + i;
            let x = mesh.vertices()[v].x;
            let estimated_kappa = field.curvatures[v].map(|pc| {
                let k = if pc.dir1.dot(&x_axis).abs() >= pc.dir2.dot(&x_axis).abs() { pc.kappa1 } else { pc.kappa2 };
                // fitted curvature is positive toward the normal; the profile
                // curvature is positive toward +z
                if normals[v].z < 0.0 {
                    -k
                } else {
                    k
                }
            });
            BiasRow {
                x,
                arc_length: form.arc_length(x - opts.domain.0),
                true_kappa: form.curvature(x),
                estimated_kappa,
            }
        })
        .collect())
}

pub fn bias_csv(rows: &[BiasRow]) -> String {
    let mut out = String::from("x,arc_length,true_kappa,estimated_kappa\n");
    for r in rows {
        let est = r.estimated_kappa.map(|k| k.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.x, r.arc_length, r.true_kappa, est));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_profiles() {
        assert_eq!(BiasForm::NegX2.curvature(0.0), -2.0);
        assert_eq!(BiasForm::NegX3.curvature(0.0), 0.0);
        let x: f64 = 1.3;
        assert!((BiasForm::NegX2.curvature(x) + 2.0 / (1.0 + 4.0 * x * x).powf(1.5)).abs() < 1e-15);
        // closed form arc length of a parabola
        let exact = 0.5 * x * (1.0 + 4.0 * x * x).sqrt() + 0.25 * (2.0 * x).asinh();
        assert!((BiasForm::NegX2.arc_length(x) - exact).abs() < 1e-10);
    }

    #[test]
    fn flat_surface_has_zero_curvature() {
        let rows = bias_study(BiasForm::Flat, &BiasOptions::default()).unwrap();
        for r in rows {
            assert!(r.estimated_kappa.unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn along_ridge_curvature_vanishes() {
        let opts = BiasOptions::default();
        let mesh = gen_bias_surface(BiasForm::NegX2, &opts).unwrap();
        let field = CurvatureField::compute(
            &mesh,
            &CurvatureOptions { radius: 0.5, metric: PatchMetric::Projected(Vector3::z()), ..Default::default() },
        )
        .unwrap();
        // interior vertex near the crest: the y-direction curvature is zero
        let v = 20 * 41 + 2;
        let pc = field.curvatures[v].unwrap();
        let (k_along, k_across) =
            if pc.dir1.y.abs() > pc.dir2.y.abs() { (pc.kappa1, pc.kappa2) } else { (pc.kappa2, pc.kappa1) };
        assert!(k_along.abs() < 0.05 * k_across.abs(), "{pc:?}");
    }

    #[test]
    fn quadratic_near_crest_is_underestimated() {
        let rows = bias_study(BiasForm::NegX2, &BiasOptions::default()).unwrap();
        // x = 0.5: the patch straddles a region of rapidly changing slope
        let r = rows[2];
        assert!((r.x - 0.5).abs() < 1e-12);
        let est = r.estimated_kappa.unwrap();
        assert!(est < 0.0 && est.abs() < r.true_kappa.abs(), "{r:?}");
        assert!(r.relative_error().unwrap().abs() < 0.3, "{r:?}");
    }
}
