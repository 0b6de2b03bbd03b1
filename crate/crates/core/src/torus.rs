//! Linear foliations `dx + α dy` on complex 2-tori `ℂ²/Λ`.
//!
//! Monodromy is a translation `y ↦ y + t_i` along each lattice generator,
//! `t_i = e_{i1} + e_{i2} α`, and the leaves of the isomonodromic foliation
//! are the common level sets of `f_i = t₁ / t_i`, `i = 2, 3, 4`.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{complex_names, consecutive_pairs, ParameterFamily};
use crate::linalg::{c, numerical_rank, sorted_svd};
use crate::monodromy::MonodromyTuple;

pub const LATTICE_DET_TOL: f64 = 1e-10;
pub const INTEGRAL_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for the analytic kernel.
pub const ANALYTIC_RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusFoliation {
    lattice: [[Complex64; 2]; 4],
    /// Projective slope `(α₀ : α₁)` with max-norm 1.
    alpha: [Complex64; 2],
}

/// Real 4×4 determinant with columns `(Re e_i; Im e_i)`.
pub fn lattice_determinant(lattice: &[[Complex64; 2]; 4]) -> f64 {
    let m = Matrix4::from_fn(|r, k| {
        let e = lattice[k];
        match r {
            0 => e[0].re,
            1 => e[1].re,
            2 => e[0].im,
            _ => e[1].im,
        }
    });
    m.determinant()
}

/// Validated foliation; `alpha` is normalized to max-norm 1.
pub fn torus_family(lattice: [[Complex64; 2]; 4], alpha: [Complex64; 2]) -> Result<TorusFoliation> {
    if lattice.iter().flatten().chain(&alpha).any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument("non-finite torus data".into()));
    }
    let det = lattice_determinant(&lattice);
    if det.abs() <= LATTICE_DET_TOL {
        return Err(Error::DegenerateLattice { det: det.abs() });
    }
    let scale = alpha[0].norm().max(alpha[1].norm());
    if scale == 0.0 {
        return Err(Error::InvalidArgument("slope (0 : 0) is not a projective point".into()));
    }
    Ok(TorusFoliation {
        lattice,
        alpha: [alpha[0] / scale, alpha[1] / scale],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationMonodromy {
    pub tuple: MonodromyTuple,
    /// True when `α = ∞` and the translations are those of `dy`, i.e. `t_i = e_{i2}`.
    pub at_infinity: bool,
}

impl TorusFoliation {
    /// `e₁ = (1, 0)`, `e₂ = (i, 0)`, `e₃ = (0, 1)`, `e₄ = (0, i)`, `α = 1`.
    pub fn standard() -> Self {
        let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
        torus_family([[l, o], [i, o], [o, l], [o, i]], [l, l]).expect("standard lattice")
    }

    pub fn lattice(&self) -> &[[Complex64; 2]; 4] {
        &self.lattice
    }

    pub fn projective_slope(&self) -> [Complex64; 2] {
        self.alpha
    }

    /// `α₀ / α₁`, or `None` at infinity.
    pub fn slope(&self) -> Option<Complex64> {
        (self.alpha[1] != c(0.0, 0.0)).then(|| self.alpha[0] / self.alpha[1])
    }

    fn translations(&self) -> ([Complex64; 4], bool) {
        match self.slope() {
            Some(a) => (self.lattice.map(|e| e[0] + e[1] * a), false),
            None => (self.lattice.map(|e| e[1]), true),
        }
    }

    pub fn json(&self) -> TorusJson {
        TorusJson {
            lattice: self.lattice.map(|e| e.map(|z| [z.re, z.im])),
            alpha: self.alpha.map(|z| [z.re, z.im]),
        }
    }
}

pub fn translation_monodromy(t: &TorusFoliation) -> TranslationMonodromy {
    let (tr, at_infinity) = t.translations();
    TranslationMonodromy {
        tuple: MonodromyTuple::affine(tr.to_vec()),
        at_infinity,
    }
}

/// `(f₂, f₃, f₄)` with `f_i = t₁ / t_i`. Chart independent, so the slope
/// may be at infinity.
pub fn first_integrals(t: &TorusFoliation) -> Result<[Complex64; 3]> {
    let (tr, _) = t.translations();
    quotients(&tr)
}

fn quotients(tr: &[Complex64; 4]) -> Result<[Complex64; 3]> {
    for (k, ti) in tr.iter().enumerate().skip(1) {
        if ti.norm() <= INTEGRAL_TOL {
            return Err(Error::IndeterminateIntegral {
                index: k + 1,
                modulus: ti.norm(),
            });
        }
    }
    Ok([tr[0] / tr[1], tr[0] / tr[2], tr[0] / tr[3]])
}

fn realify_block(m: &mut DMatrix<f64>, row: usize, col: usize, z: Complex64) {
    m[(2 * row, 2 * col)] = z.re;
    m[(2 * row, 2 * col + 1)] = -z.im;
    m[(2 * row + 1, 2 * col)] = z.im;
    m[(2 * row + 1, 2 * col + 1)] = z.re;
}

/// Realified 6×18 Jacobian of `(f₂, f₃, f₄)` in the coordinates of
/// [`TorusFamily`]. Requires a finite slope.
pub fn analytic_jacobian(t: &TorusFoliation) -> Result<DMatrix<f64>> {
    let alpha = t.slope().ok_or(Error::SlopeAtInfinity)?;
    let (tr, _) = t.translations();
    quotients(&tr)?;
    let e = &t.lattice;
    let mut j = DMatrix::zeros(6, 18);
    for (row, i) in (1..4).enumerate() {
        let ti = tr[i];
        let t1 = tr[0];
        realify_block(&mut j, row, 0, 1.0 / ti);
        realify_block(&mut j, row, 1, alpha / ti);
        realify_block(&mut j, row, 2 * i, -t1 / (ti * ti));
        realify_block(&mut j, row, 2 * i + 1, -t1 * alpha / (ti * ti));
        realify_block(&mut j, row, 8, (e[0][1] * ti - t1 * e[i][1]) / (ti * ti));
    }
    Ok(j)
}

/// Orthonormal basis (18 × 12 generically) of the null space of
/// [`analytic_jacobian`].
pub fn analytic_kernel(t: &TorusFoliation) -> Result<DMatrix<f64>> {
    let j = analytic_jacobian(t)?;
    let svd = sorted_svd(&j);
    let rank = numerical_rank(&svd.singular_values, ANALYTIC_RANK_EPS);
    Ok(svd.v.columns(rank, 18 - rank).into_owned())
}

/// The torus foliations as a detector family in the finite chart.
///
/// Coordinates: `re e₁₁, im e₁₁, re e₁₂, im e₁₂, …, re e₄₂, im e₄₂, re α, im α`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TorusFamily;

impl TorusFamily {
    pub const DIMENSION: usize = 18;

    pub fn point(t: &TorusFoliation) -> Result<Vec<f64>> {
        let alpha = t.slope().ok_or(Error::SlopeAtInfinity)?;
        Ok(t.lattice
            .iter()
            .flatten()
            .chain(std::iter::once(&alpha))
            .flat_map(|z| [z.re, z.im])
            .collect())
    }

    fn unpack(tau: &[f64]) -> Result<([[Complex64; 2]; 4], Complex64)> {
        if tau.len() != Self::DIMENSION {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                Self::DIMENSION,
                tau.len()
            )));
        }
        let z = |k: usize| c(tau[2 * k], tau[2 * k + 1]);
        Ok(([[z(0), z(1)], [z(2), z(3)], [z(4), z(5)], [z(6), z(7)]], z(8)))
    }

    pub fn foliation(tau: &[f64]) -> Result<TorusFoliation> {
        let (lattice, alpha) = Self::unpack(tau)?;
        torus_family(lattice, [alpha, c(1.0, 0.0)])
    }
}

impl ParameterFamily for TorusFamily {
    fn dimension(&self) -> usize {
        Self::DIMENSION
    }

    fn coordinate_names(&self) -> Vec<String> {
        complex_names(&["e11", "e12", "e21", "e22", "e31", "e32", "e41", "e42", "alpha"])
    }

    fn complex_pairs(&self) -> Vec<(usize, usize)> {
        consecutive_pairs(9)
    }

    /// Nondegenerate lattice and nonvanishing translations.
    fn admissible(&self, tau: &[f64]) -> bool {
        let Ok((lattice, alpha)) = Self::unpack(tau) else {
            return false;
        };
        tau.iter().all(|x| x.is_finite())
            && lattice_determinant(&lattice).abs() > LATTICE_DET_TOL
            && lattice.iter().all(|e| (e[0] + e[1] * alpha).norm() > INTEGRAL_TOL)
    }

    fn evaluate(&self, tau: &[f64]) -> Result<MonodromyTuple> {
        let (lattice, alpha) = Self::unpack(tau)?;
        Ok(MonodromyTuple::affine(
            lattice.iter().map(|e| e[0] + e[1] * alpha).collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusJson {
    pub lattice: [[[f64; 2]; 2]; 4],
    pub alpha: [[f64; 2]; 2],
}

impl TryFrom<TorusJson> for TorusFoliation {
    type Error = Error;

    fn try_from(j: TorusJson) -> Result<Self> {
        let z = |p: [f64; 2]| c(p[0], p[1]);
        torus_family(j.lattice.map(|e| e.map(z)), j.alpha.map(z))
    }
}
