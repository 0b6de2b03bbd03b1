//! Analytic continuation of the fundamental solution along a path.
//!
//! Convention: `Y(start) = I`, `Y(end) = M`. Transport along `γ₁` followed by
//! `γ₂` is `M(γ₂) · M(γ₁)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fuchsian::FuchsianSystem;
use crate::linalg::{det, identity, is_finite, Mat2};
use crate::ode::{self, Options, Stats};
use crate::paths::{Path, Piece};

/// Paths must keep at least this distance from every pole.
pub const POLE_CLEARANCE: f64 = 1e-6;

pub const MIN_REL_TOL: f64 = 1e-14;
pub const MAX_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResult {
    pub matrix: Mat2,
    pub steps: usize,
    pub max_local_error_estimate: f64,
    pub rejected_steps: usize,
}

pub(crate) fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if (MIN_REL_TOL..=MAX_REL_TOL).contains(&rel_tol) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "rel-tol {rel_tol:e} outside [{MIN_REL_TOL:e}, {MAX_REL_TOL:e}]"
        )))
    }
}

fn check_clearance(system: &FuchsianSystem, path: &Path) -> Result<()> {
    for (i, &u) in system.poles().iter().enumerate() {
        let d = path.distance_to(u);
        if d < POLE_CLEARANCE {
            return Err(Error::PoleProximity {
                pole: i,
                distance: d,
                minimum: POLE_CLEARANCE,
            });
        }
    }
    Ok(())
}

fn to_state(m: &Mat2) -> [Complex64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn from_state(y: &[Complex64]) -> Mat2 {
    Mat2::new(y[0], y[1], y[2], y[3])
}

fn piece_rhs<'a>(
    system: &'a FuchsianSystem,
    piece: &'a Piece,
) -> impl FnMut(f64, &[Complex64], &mut [Complex64]) + 'a {
    move |s, y, dy| {
        let (z, dz) = piece.eval(s);
        let a = system.connection_unchecked(z) * dz;
        let out = a * from_state(y);
        dy.copy_from_slice(&to_state(&out));
    }
}

/// Adaptive Dormand–Prince transport of `Y' = A(z) Y` along `path`.
pub fn transport(system: &FuchsianSystem, path: &Path, rel_tol: f64) -> Result<TransportResult> {
    check_rel_tol(rel_tol)?;
    check_clearance(system, path)?;
    let length = path.length();
    let mut y = to_state(&identity());
    let mut stats = Stats::default();
    if length > 0.0 {
        let opts = Options {
            rel_tol,
            abs_tol: ode::DEFAULT_ABS_TOL,
            initial_step: length / 100.0,
            min_step: 1e-13 * length,
            rejection_cap: ode::REJECTION_CAP,
        };
        for piece in path.pieces() {
            let len = piece.length();
            if len == 0.0 {
                continue;
            }
            ode::integrate(piece_rhs(system, piece), 0.0, len, &mut y, &opts, &mut stats)?;
        }
    }
    finish(from_state(&y), stats)
}

/// Fixed-step transport with about `n_steps` equal steps spread over the
/// pieces in proportion to their length.
pub fn transport_fixed(system: &FuchsianSystem, path: &Path, n_steps: usize) -> Result<TransportResult> {
    check_clearance(system, path)?;
    let length = path.length();
    let mut y = to_state(&identity());
    let mut total = 0;
    if length > 0.0 {
        for piece in path.pieces() {
            let len = piece.length();
            if len == 0.0 {
                continue;
            }
            let n = ((n_steps as f64) * len / length).ceil().max(1.0) as usize;
            ode::integrate_fixed(piece_rhs(system, piece), 0.0, len, &mut y, n);
            total += n;
        }
    }
    finish(
        from_state(&y),
        Stats {
            steps: total,
            ..Stats::default()
        },
    )
}

fn finish(matrix: Mat2, stats: Stats) -> Result<TransportResult> {
    if !is_finite(&matrix) {
        return Err(Error::InvalidArgument("transport produced non-finite entries".into()));
    }
    if det(&matrix).norm() == 0.0 {
        return Err(Error::InvalidArgument("transport matrix is singular".into()));
    }
    Ok(TransportResult {
        matrix,
        steps: stats.steps,
        max_local_error_estimate: stats.max_error_estimate,
        rejected_steps: stats.rejected,
    })
}
