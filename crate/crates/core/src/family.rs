//! Parameter families: maps from real parameter vectors to monodromy tuples.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fuchsian::{nilpotent_family, FuchsianSystem};
use crate::linalg::c;
use crate::monodromy::{adjoint_orbit_matrix, monodromy_tuple, MonodromyTuple};
use crate::ode::DEFAULT_REL_TOL;
use crate::paths::{canonical_generators, DEFAULT_RADIUS_FACTOR};

/// A deformation seen through its monodromy. Complex parameters are split
/// into `(re, im)` coordinate pairs listed by [`ParameterFamily::complex_pairs`].
///
/// Evaluation must be a pure function of `tau`.
pub trait ParameterFamily: Sync {
    fn dimension(&self) -> usize;

    fn coordinate_names(&self) -> Vec<String>;

    /// `(re index, im index)` for every complex parameter.
    fn complex_pairs(&self) -> Vec<(usize, usize)>;

    fn admissible(&self, _tau: &[f64]) -> bool {
        true
    }

    fn evaluate(&self, tau: &[f64]) -> Result<MonodromyTuple>;

    fn orbit_matrix(&self, tau: &[f64]) -> Result<DMatrix<f64>> {
        Ok(adjoint_orbit_matrix(&self.evaluate(tau)?))
    }
}

pub(crate) fn complex_names(prefixes: &[&str]) -> Vec<String> {
    prefixes
        .iter()
        .flat_map(|p| [format!("re({p})"), format!("im({p})")])
        .collect()
}

pub(crate) fn consecutive_pairs(n_complex: usize) -> Vec<(usize, usize)> {
    (0..n_complex).map(|k| (2 * k, 2 * k + 1)).collect()
}

/// The three-pole commuting nilpotent family
/// `Σ a_i N / (z − u_i)`, `N = [[0, 1], [0, 0]]`, with monodromy computed by
/// numerical continuation at a fixed basepoint.
///
/// Coordinates: `re a₁, im a₁, re a₂, im a₂, re a₃, im a₃, re u₁, …, im u₃`.
#[derive(Debug, Clone)]
pub struct Eq11Family {
    pub basepoint: Complex64,
    pub rel_tol: f64,
    pub radius_factor: f64,
}

impl Eq11Family {
    pub const DIMENSION: usize = 12;

    pub fn new(basepoint: Complex64, rel_tol: f64) -> Self {
        Eq11Family {
            basepoint,
            rel_tol,
            radius_factor: DEFAULT_RADIUS_FACTOR,
        }
    }

    /// Basepoint at distance 2 + extent to the lower left of the poles' centroid.
    pub fn around(u: &[Complex64; 3], rel_tol: f64) -> Self {
        let centroid = u.iter().sum::<Complex64>() / 3.0;
        let extent = u.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
        let b = centroid + Complex64::from_polar(extent + 2.0, -2.2);
        Eq11Family::new(b, rel_tol)
    }

    pub fn point(a: &[Complex64; 3], u: &[Complex64; 3]) -> Vec<f64> {
        a.iter().chain(u).flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn split(tau: &[f64]) -> ([Complex64; 3], [Complex64; 3]) {
        let z = |k: usize| c(tau[2 * k], tau[2 * k + 1]);
        ([z(0), z(1), z(2)], [z(3), z(4), z(5)])
    }

    pub fn system(&self, tau: &[f64]) -> Result<FuchsianSystem> {
        if tau.len() != Self::DIMENSION {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                Self::DIMENSION,
                tau.len()
            )));
        }
        let (a, u) = Self::split(tau);
        nilpotent_family(a, u)
    }

    pub fn a_coordinates() -> Vec<usize> {
        (0..6).collect()
    }

    pub fn u_coordinates() -> Vec<usize> {
        (6..12).collect()
    }
}

impl ParameterFamily for Eq11Family {
    fn dimension(&self) -> usize {
        Self::DIMENSION
    }

    fn coordinate_names(&self) -> Vec<String> {
        complex_names(&["a1", "a2", "a3", "u1", "u2", "u3"])
    }

    fn complex_pairs(&self) -> Vec<(usize, usize)> {
        consecutive_pairs(6)
    }

    fn admissible(&self, tau: &[f64]) -> bool {
        if tau.len() != Self::DIMENSION || tau.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let (_, u) = Self::split(tau);
        let sep = 1e-6;
        (0..3).all(|i| {
            (self.basepoint - u[i]).norm() > sep && (i + 1..3).all(|j| (u[i] - u[j]).norm() > sep)
        })
    }

    fn evaluate(&self, tau: &[f64]) -> Result<MonodromyTuple> {
        let system = self.system(tau)?;
        let loops = canonical_generators(self.basepoint, system.poles(), self.radius_factor)?;
        monodromy_tuple(&system, &loops, self.rel_tol)
    }
}

impl Default for Eq11Family {
    fn default() -> Self {
        Eq11Family::new(c(-3.0, -2.0), DEFAULT_REL_TOL)
    }
}

/// Affine test family `t = t₀ + L τ` with an affine-translation tuple.
#[derive(Debug, Clone)]
pub struct LinearFamily {
    pub offset: Vec<Complex64>,
    /// Realified `(2·len(offset)) × q` matrix.
    pub map: DMatrix<f64>,
}

impl ParameterFamily for LinearFamily {
    fn dimension(&self) -> usize {
        self.map.ncols()
    }

    fn coordinate_names(&self) -> Vec<String> {
        (0..self.dimension()).map(|k| format!("x{k}")).collect()
    }

    fn complex_pairs(&self) -> Vec<(usize, usize)> {
        consecutive_pairs(self.dimension() / 2)
    }

    fn evaluate(&self, tau: &[f64]) -> Result<MonodromyTuple> {
        let v = &self.map * nalgebra::DVector::from_column_slice(tau);
        Ok(MonodromyTuple::affine(
            self.offset
                .iter()
                .enumerate()
                .map(|(i, t)| t + c(v[2 * i], v[2 * i + 1]))
                .collect(),
        ))
    }
}
