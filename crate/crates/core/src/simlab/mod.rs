//! Synthetic surfaces and evaluation studies.

pub mod bias;
pub mod face;
pub mod ridge;
pub mod surfaces;
