//! Numerical evolution of star-shaped hypersurfaces in hyperbolic space under
//! inverse curvature flows u̇ = v/F, with the exact sphere solution, a priori
//! bound monitors, and exponential-rate diagnostics.
//!
//! The hypersurface is stored as a radial graph over S^n through the
//! substitution φ = ∫ dr/ϑ(r), which keeps all quantities bounded for
//! arbitrarily long runs. Two parametrizations of the ambient space are
//! implemented: geodesic polar coordinates (ϑ = sinh r) and the conformal
//! ball of radius 2 (ϑ = r); both integrate the same hyperbolic flow.

pub mod cli;
pub mod config;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
mod harmonics;
pub mod rng;

pub use error::{Error, Result};
