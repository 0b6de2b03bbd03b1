//! Fuchsian systems `dY/dz = Σ A_i/(z − u_i) · Y` on the punctured sphere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, nilpotent, Mat2};

/// Pole-coincidence and pole-evaluation tolerance.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FuchsianSystem {
    poles: Vec<Complex64>,
    residues: Vec<Mat2>,
    min_pole_distance: f64,
}

impl FuchsianSystem {
    pub fn new(poles: Vec<Complex64>, residues: Vec<Mat2>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::DegenerateConfiguration("no poles".into()));
        }
        if poles.len() != residues.len() {
            return Err(Error::InvalidArgument(format!(
                "{} poles but {} residues",
                poles.len(),
                residues.len()
            )));
        }
        let mut min_d = f64::INFINITY;
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                let d = (poles[i] - poles[j]).norm();
                if d < POLE_TOL {
                    return Err(Error::DegenerateConfiguration(format!(
                        "poles {i} and {j} coincide"
                    )));
                }
                min_d = min_d.min(d);
            }
        }
        Ok(FuchsianSystem {
            poles,
            residues,
            min_pole_distance: min_d,
        })
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn residues(&self) -> &[Mat2] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// `f64::INFINITY` for a single pole.
    pub fn min_pole_distance(&self) -> f64 {
        self.min_pole_distance
    }

    /// `Σ A_i / (z − u_i)`.
    pub fn connection_eval(&self, z: Complex64) -> Result<Mat2> {
        let mut acc = Mat2::zeros();
        for (i, (u, a)) in self.poles.iter().zip(&self.residues).enumerate() {
            let d = z - u;
            if d.norm() < POLE_TOL {
                return Err(Error::PoleEvaluation {
                    pole: i,
                    distance: d.norm(),
                });
            }
            acc += a / d;
        }
        Ok(acc)
    }

    /// Unchecked evaluation for the integrator's inner loop.
    pub(crate) fn connection_unchecked(&self, z: Complex64) -> Mat2 {
        let mut acc = Mat2::zeros();
        for (u, a) in self.poles.iter().zip(&self.residues) {
            acc += a / (z - u);
        }
        acc
    }

    pub fn residue_at_infinity(&self) -> Mat2 {
        -self.residues.iter().fold(Mat2::zeros(), |acc, a| acc + a)
    }

    pub fn with_residues(&self, residues: Vec<Mat2>) -> Result<Self> {
        FuchsianSystem::new(self.poles.clone(), residues)
    }
}

/// Three poles with commuting nilpotent residues `A_i = a_i [[0, 1], [0, 0]]`.
pub fn nilpotent_family(a: [Complex64; 3], u: [Complex64; 3]) -> Result<FuchsianSystem> {
    let n = nilpotent();
    FuchsianSystem::new(u.to_vec(), a.iter().map(|&ai| n * ai).collect())
}

/// JSON shape: `{"poles": [[re,im],...], "residues": [[[[re,im],[re,im]],[[re,im],[re,im]]], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemJson {
    pub poles: Vec<[f64; 2]>,
    pub residues: Vec<[[[f64; 2]; 2]; 2]>,
}

impl From<&FuchsianSystem> for SystemJson {
    fn from(s: &FuchsianSystem) -> Self {
        SystemJson {
            poles: s.poles.iter().map(|z| [z.re, z.im]).collect(),
            residues: s.residues.iter().map(mat_to_json).collect(),
        }
    }
}

impl TryFrom<SystemJson> for FuchsianSystem {
    type Error = Error;
    fn try_from(j: SystemJson) -> Result<Self> {
        FuchsianSystem::new(
            j.poles.iter().map(|p| c(p[0], p[1])).collect(),
            j.residues.iter().map(mat_from_json).collect(),
        )
    }
}

pub fn mat_to_json(m: &Mat2) -> [[[f64; 2]; 2]; 2] {
    let e = |r: usize, k: usize| [m[(r, k)].re, m[(r, k)].im];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

pub fn mat_from_json(j: &[[[f64; 2]; 2]; 2]) -> Mat2 {
    let e = |r: usize, k: usize| c(j[r][k][0], j[r][k][1]);
    Mat2::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1))
}
