//! Warped Riemannian metrics arising as Fisher information metrics of
//! location-scale families, with geodesics, curvature and Mahalanobis
//! distances.
//!
//! Models:
//! - the isotropic normal family on `Rᵈ` ([`warped::IsoNormalProfile`]);
//! - von Mises-Fisher distributions on spheres ([`model_vmf`]);
//! - Riemannian Gaussian distributions on SPD matrices ([`model_rgauss`]).

pub mod error;
pub mod geodesics;
pub mod interp;
pub mod model_rgauss;
pub mod model_vmf;
pub mod ode;
pub mod quadrature;
pub mod spd;
pub mod specfun;
pub mod warped;

pub use error::{Error, Result};
