//! Quaternionic geometry of the binary icosahedral group and its
//! fundamental domain on the 3-sphere.
//!
//! The 3-sphere is the set of unit quaternions; the binary icosahedral
//! group acts on it by left multiplication and the quotient is the
//! Poincaré dodecahedral space. The fundamental domain is the spherical
//! regular dodecahedron containing (1,0,0,0); one hundred twenty copies
//! tile the sphere in the pattern of the 120-cell.

mod domain;
mod group;
mod quaternion;

pub use domain::{FundamentalDomain, Location, BOUNDARY_TOL};
pub use group::{BinaryIcosahedralGroup, GroupElement};
pub use quaternion::{geodesic_distance, lift, project, Quaternion, UNIT_NORM_TOL};

/// Golden ratio, the constant behind every coordinate in the construction.
pub const GOLDEN_RATIO: f64 = 1.618033988749894848;

/// Errors produced by the geometric layer.
#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("point is not on the unit 3-sphere (|q| = {norm})")]
    NotUnit { norm: f64 },
    #[error("point lies outside the unit ball (|X| = {norm})")]
    OutsideBall { norm: f64 },
    #[error("point is not on the boundary of the fundamental domain")]
    NotBoundary,
    #[error("no group element reduces the point into the fundamental domain")]
    ReductionFailed,
}

/// Largest geodesic distance from the domain center to its boundary,
/// attained at the twenty vertices: arccos(sigma^2 / (2 sqrt 2)).
pub fn d_max() -> f64 {
    let s = GOLDEN_RATIO;
    (s * s / (2.0 * 2.0_f64.sqrt())).acos()
}

/// Euclidean radius of the smallest ball containing the visualization
/// domain: sin(d_max) = sqrt(1 - sigma^4 / 8).
pub fn r_max() -> f64 {
    let s = GOLDEN_RATIO;
    (1.0 - s.powi(4) / 8.0).sqrt()
}
