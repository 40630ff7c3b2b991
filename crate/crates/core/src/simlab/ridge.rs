//! Ridge-recovery simulation on z = −b·(x − c(y))², c(y) = (y/a)^{1/3}.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::surfaces::height_field_rect;
use crate::correspondence::resample_equal_arclength;
use crate::curvature::{CurvatureField, CurvatureOptions, Mode};
use crate::meshcore::{Mesh, SurfaceCurve};
use crate::pipeline::{estimate_curve, CurveOptions};
use crate::{Error, Result};

/// Straight-ridge position used when a = 0.
pub const STRAIGHT_RIDGE_X: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Ridge movement; smaller values bend the ridge more. 0 means straight.
    pub a: f64,
    /// Cross-ridge curvature scale.
    pub b: f64,
    /// Across-ridge landmark displacement (mm).
    pub li: f64,
    /// Unit-scaled mesh spacing; `None` keeps the 41 × 41 grid on [0, 10]².
    pub ms: Option<f64>,
    /// Half-width of the uniform z noise.
    pub delta: f64,
    /// Curvature neighbourhood radius (mm).
    pub radius: f64,
    pub n_reps: usize,
    pub seed: u64,
    /// Arc positions (y) of the two landmarks on the true ridge.
    pub y_range: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            a: 0.5,
            b: 0.5,
            li: 0.0,
            ms: None,
            delta: 0.0,
            radius: 1.0,
            n_reps: 500,
            seed: 1,
            y_range: (1.0, 9.0),
        }
    }
}

impl SimConfig {
    /// Factors outside the studied ranges, by name.
    pub fn extrapolated(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(0.0..=0.5).contains(&self.a) {
            out.push("a");
        }
        if !(0.0..=0.5).contains(&self.b) {
            out.push("b");
        }
        if !(0.0..=0.1).contains(&self.li) {
            out.push("li");
        }
        if let Some(ms) = self.ms {
            if !(0.05..=0.1).contains(&ms) {
                out.push("ms");
            }
        }
        if !(0.0..=0.05).contains(&self.delta) {
            out.push("delta");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::invalid("n_reps must be at least 1"));
        }
        if self.a < 0.0 || self.b < 0.0 || self.li < 0.0 || self.delta < 0.0 {
            return Err(Error::invalid("a, b, li and delta must be non-negative"));
        }
        if let Some(ms) = self.ms {
            if !(ms > 0.0 && ms <= 0.5) {
                return Err(Error::invalid(format!("ms must lie in (0, 0.5], got {ms}")));
            }
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        let (y0, y1) = self.y_range;
        if !(0.0 <= y0 && y0 < y1 && y1 <= 10.0) {
            return Err(Error::invalid("y_range must lie inside [0, 10]"));
        }
        Ok(())
    }

    /// Grid points per side.
    pub fn grid_points(&self) -> usize {
        match self.ms {
            Some(ms) => (1.0 / ms).round() as usize + 1,
            None => 41,
        }
    }

    pub fn spacing(&self) -> f64 {
        10.0 / (self.grid_points() - 1) as f64
    }

    /// Ridge position c(y).
    pub fn ridge_x(&self, y: f64) -> f64 {
        if self.a == 0.0 {
            STRAIGHT_RIDGE_X
        } else {
            (y / self.a).cbrt()
        }
    }

    fn ridge_slope(&self, y: f64) -> f64 {
        if self.a == 0.0 {
            0.0
        } else {
            let h = 1e-6;
            (self.ridge_x(y + h) - self.ridge_x((y - h).max(0.0))) / (y + h - (y - h).max(0.0))
        }
    }
}

/// One simulated surface: noisy mesh, the true ridge and the landmarks.
#[derive(Debug, Clone)]
pub struct RidgeSurface {
    pub mesh: Mesh,
    pub truth: SurfaceCurve,
    pub landmarks: (Point3<f64>, Point3<f64>),
}

pub fn gen_ridge_surface(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<RidgeSurface> {
    config.validate()?;
    let n = config.grid_points();
    let (b, delta) = (config.b, config.delta);
    let clean = |x: f64, y: f64| -b * (x - config.ridge_x(y)).powi(2);
    let mut mesh = height_field_rect(n, n, (0.0, 10.0), (0.0, 10.0), clean)?;
    if delta > 0.0 {
        let vertices = mesh
            .vertices()
            .iter()
            .map(|p| Point3::new(p.x, p.y, p.z + rng.gen_range(-delta..=delta)))
            .collect();
        mesh = Mesh::new(vertices, mesh.triangles().to_vec())?;
    }
    let (y0, y1) = config.y_range;
    let truth_pts: Vec<Point3<f64>> = (0..=400)
        .map(|k| {
            let y = y0 + (y1 - y0) * k as f64 / 400.0;
            Point3::new(config.ridge_x(y), y, 0.0)
        })
        .collect();
    let truth = SurfaceCurve::from_points(truth_pts)?;
    let mut landmark = |y: f64| -> Point3<f64> {
        let mut p = Point3::new(config.ridge_x(y), y, 0.0);
        if config.li > 0.0 {
            // across-ridge direction in the (x, y) plane
            let across = Vector3::new(1.0, -config.ridge_slope(y), 0.0).normalize();
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            p += across * config.li * sign;
        }
        mesh.closest_point(&p).point
    };
    let l1 = landmark(y0);
    let l2 = landmark(y1);
    Ok(RidgeSurface { mesh, truth, landmarks: (l1, l2) })
}

/// Mean Euclidean distance between corresponding points of two curves, each
/// resampled to `n` equally spaced points.
pub fn curve_distance(a: &SurfaceCurve, b: &SurfaceCurve, n: usize) -> Result<f64> {
    let pa = resample_equal_arclength(a, n)?;
    let pb = resample_equal_arclength(b, n)?;
    Ok(pa.iter().zip(&pb).map(|(p, q)| (p - q).norm()).sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicate {
    pub rep: usize,
    pub distance: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub mean: f64,
    pub sd: f64,
    pub failures: usize,
    pub n_reps: usize,
    pub extrapolated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub replicates: Vec<Replicate>,
    pub summary: SimSummary,
}

impl SimResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,distance\n");
        for r in &self.replicates {
            let d = r.distance.map(|d| d.to_string()).unwrap_or_else(|| "NA".into());
            out.push_str(&format!("{},{}\n", r.rep, d));
        }
        out
    }
}

/// Random stream of replicate `rep`, independent of execution order.
pub fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn run_replicate(config: &SimConfig, opts: &CurveOptions, rep: usize) -> Result<f64> {
    let mut rng = replicate_rng(config.seed, rep);
    let surface = gen_ridge_surface(config, &mut rng)?;
    let field = CurvatureField::compute(
        &surface.mesh,
        &CurvatureOptions { radius: config.radius, mode: Mode::Ridge, ..Default::default() },
    )?;
    let (l1, l2) = surface.landmarks;
    let est = estimate_curve(&surface.mesh, &field, l1, l2, opts)?;
    curve_distance(&est.curve, &surface.truth, 21)
}

pub fn run_sim(config: &SimConfig) -> Result<SimResult> {
    run_sim_with(config, &CurveOptions::default())
}

pub fn run_sim_with(config: &SimConfig, opts: &CurveOptions) -> Result<SimResult> {
    config.validate()?;
    let replicates: Vec<Replicate> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| match run_replicate(config, opts, rep) {
            Ok(d) => Replicate { rep, distance: Some(d), error: None },
            Err(e) => Replicate { rep, distance: None, error: Some(e.to_string()) },
        })
        .collect();
    let ok: Vec<f64> = replicates.iter().filter_map(|r| r.distance).collect();
    let failures = replicates.len() - ok.len();
    let (mean, sd) = if ok.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let m = ok.iter().sum::<f64>() / ok.len() as f64;
        let var = if ok.len() > 1 {
            ok.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64
        } else {
            0.0
        };
        (m, var.sqrt())
    };
    Ok(SimResult {
        replicates,
        summary: SimSummary {
            mean,
            sd,
            failures,
            n_reps: config.n_reps,
            extrapolated: config.extrapolated().into_iter().map(String::from).collect(),
        },
    })
}
