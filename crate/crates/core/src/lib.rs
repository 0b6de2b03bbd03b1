//! Monodromy of Fuchsian systems, the Schlesinger isomonodromy flow, and
//! numerical detection of the integrable-direction distribution of a
//! deformation as the kernel of its differentiated monodromy map.

pub mod continuation;
pub mod detector;
pub mod error;
pub mod family;
pub mod fuchsian;
pub mod linalg;
pub mod monodromy;
pub mod ode;
pub mod paths;
pub mod sampling;
pub mod schlesinger;
pub mod torus;

pub use error::{Error, Result};
