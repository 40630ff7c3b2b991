//! Ridge and valley curve estimation on triangulated surfaces.
//!
//! The crate is organised as a pipeline. A [`meshcore::Mesh`] is scored by
//! local quadratic patch fits ([`curvature`]); two landmarks select a local
//! region in which the best planar cut is found ([`refpath`]). The region is
//! re-coordinatised around that cut ([`flatten`]), the curvature strength is
//! smoothed by a tensor-product p-spline ([`psplines`]) and a penalized
//! curvature integral is maximised by Newton's method ([`ridgeopt`]). The
//! resulting curves feed surface models with bending-energy sliding
//! ([`correspondence`]) and shape statistics ([`shapestats`]). [`simlab`]
//! holds the synthetic surfaces and evaluation studies.

pub mod correspondence;
pub mod curvature;
mod error;
pub mod flatten;
pub mod meshcore;
pub mod pipeline;
pub mod psplines;
pub mod refpath;
pub mod ridgeopt;
pub mod shapestats;
pub mod simlab;

pub use error::{Error, Result};

pub use nalgebra::{Point2, Point3, Vector2, Vector3};
