//! Scalar waves on accelerating universes whose spatial section is the
//! Poincaré dodecahedral space.
//!
//! The library is organized around the pipeline
//!
//! * [`geometry`] — quaternionic construction of the binary icosahedral
//!   group, the spherical dodecahedral fundamental domain, point reduction
//!   into the domain and boundary identification;
//! * [`mesh`] — tetrahedral meshing of the visualization domain with P2
//!   node enumeration and the node equivalence classes that realize the
//!   twisted periodic boundary condition;
//! * [`fem`] — P2 shape functions, the 31-point degree-7 tetrahedral
//!   quadrature, assembly of the weighted mass/stiffness/radial matrices
//!   and point evaluation of discrete fields;
//! * [`evolution`] — scale-factor models, compactly supported initial
//!   bumps, the two-level explicit time stepper, discrete energy and the
//!   asymptotic Norm diagnostic;
//! * [`spectral`] — mesh-free ground truth: admissible eigenvalues,
//!   half-integer Ferrers and spherical Bessel closed forms, per-mode
//!   closed solutions, a Runge-Kutta cross-check and asymptotic profiles;
//! * [`sky`] — causal radii, future horizons, circles-in-the-sky
//!   detection, Sachs-Wolfe deep-sky maps and tiling export to the
//!   universal cover.

pub mod acceptance;
pub mod cli;
pub mod evolution;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod sky;
pub mod spectral;
pub mod textio;

pub use geometry::{FundamentalDomain, GroupElement, Quaternion};
pub use mesh::TetMeshP2;


/// Crate-wide error type; each subsystem keeps its own variant payload.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Fem(#[from] fem::FemError),
    #[error(transparent)]
    Evolution(#[from] evolution::EvolutionError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Sky(#[from] sky::SkyError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
