//! Landmark pair to surface curve: localise, choose the reference cut,
//! flatten, smooth ν and optimise the offsets.

use nalgebra::Point3;
use serde::Serialize;

use crate::curvature::CurvatureField;
use crate::flatten::{flatten, FlatDomain, FlattenOptions};
use crate::meshcore::{Mesh, SurfaceCurve};
use crate::psplines::{fit_surface, PSplineSurface, SurfaceFitOptions};
use crate::refpath::{localize, optimal_reference_path, PathCriterion, PathSearch, PathSearchOptions, RegionOptions};
use crate::ridgeopt::{back_map, RidgeOptions, RidgeProblem, RidgeSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    pub region: RegionOptions,
    pub search: PathSearchOptions,
    /// Run the flexible stage; otherwise the reference cut is the answer.
    pub flexible: bool,
    pub flatten: FlattenOptions,
    pub fit: SurfaceFitOptions,
    pub ridge: RidgeOptions,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            region: RegionOptions::default(),
            search: PathSearchOptions::default(),
            flexible: true,
            flatten: FlattenOptions::default(),
            fit: SurfaceFitOptions::default(),
            ridge: RidgeOptions::default(),
        }
    }
}

/// Summary of the reference cut written next to each curve.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSummary {
    pub gamma: f64,
    pub score: f64,
    pub length: f64,
    pub refined: bool,
}

#[derive(Debug, Clone)]
pub struct CurveEstimate {
    pub reference: PathSearch,
    pub domain: Option<FlatDomain>,
    pub surface: Option<PSplineSurface>,
    pub solution: Option<RidgeSolution>,
    pub curve: SurfaceCurve,
}

impl CurveEstimate {
    pub fn reference_summary(&self) -> ReferenceSummary {
        ReferenceSummary {
            gamma: self.reference.best.gamma,
            score: self.reference.score,
            length: self.reference.best.length(),
            refined: self.reference.refined,
        }
    }
}

/// Estimate the curve between `l1` and `l2`. `field` covers the whole mesh.
pub fn estimate_curve(
    mesh: &Mesh,
    field: &CurvatureField,
    l1: Point3<f64>,
    l2: Point3<f64>,
    opts: &CurveOptions,
) -> Result<CurveEstimate> {
    if field.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "curvature field has {} entries for {} vertices",
            field.len(),
            mesh.vertex_count()
        )));
    }
    let region = localize(mesh, l1, l2, &opts.region)?;
    let values = region.restrict(&field.strength);
    let reference = optimal_reference_path(&region, &values, &opts.search)?;
    if !opts.flexible {
        let curve = reference.best.path.clone();
        return Ok(CurveEstimate { reference, domain: None, surface: None, solution: None, curve });
    }
    if opts.search.criterion == PathCriterion::MaxCurvature && reference.score <= 0.0 {
        return Err(Error::Degenerate(format!(
            "no {:?} signal between the landmarks",
            field.mode
        )));
    }
    let domain = flatten(&region, &reference.best, &values, &opts.flatten)?;
    let surface = fit_surface(&domain.samples(), domain.s_range(), domain.d_range(), &opts.fit)?;
    let problem = RidgeProblem::new(&surface, opts.ridge.n_grid, opts.ridge.lambda)?;
    let solution = problem.solve(&opts.ridge)?;
    let curve = back_map(&solution, &domain)?;
    Ok(CurveEstimate {
        reference,
        domain: Some(domain),
        surface: Some(surface),
        solution: Some(solution),
        curve,
    })
}
