//! The Schlesinger isomonodromy flow
//!
//! ```text
//! ∂A_i/∂u_j = [A_j, A_i] / (u_j − u_i)            (j ≠ i)
//! ∂A_i/∂u_i = −Σ_{j≠i} [A_j, A_i] / (u_j − u_i)
//! ```
//!
//! integrated along prescribed pole motions. These are the classical
//! Schlesinger equations for `dY/dz = Σ A_i/(z − u_i) Y`; on commuting
//! residues every bracket vanishes and the residues are constant.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::continuation::check_rel_tol;
use crate::error::{Error, Result};
use crate::fuchsian::FuchsianSystem;
use crate::linalg::{commutator, Mat2};
use crate::monodromy::{class_distance, monodromy_tuple, MonodromyTuple};
use crate::ode::{self, Options, Stats};
use crate::paths::{canonical_generators, Path, DEFAULT_RADIUS_FACTOR};

pub const DEFAULT_COLLISION_MARGIN: f64 = 1e-3;

/// One path per pole, all parametrized by the same `τ ∈ [0, 1]` (fraction of
/// each path's arc length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolePath {
    pub paths: Vec<Path>,
    pub collision_margin: f64,
}

impl PolePath {
    pub fn new(paths: Vec<Path>, collision_margin: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("pole path without poles".into()));
        }
        if !(collision_margin > 0.0) {
            return Err(Error::InvalidArgument("collision margin must be positive".into()));
        }
        Ok(PolePath {
            paths,
            collision_margin,
        })
    }

    /// Moves pole `index` along a straight segment by `displacement`; the
    /// others stay put.
    pub fn single_segment(
        poles: &[Complex64],
        index: usize,
        displacement: Complex64,
    ) -> Result<Self> {
        let paths = poles
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                if i == index {
                    Path::segment(u, u + displacement)
                } else {
                    Path::point(u)
                }
            })
            .collect();
        PolePath::new(paths, DEFAULT_COLLISION_MARGIN)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn is_stationary(&self) -> bool {
        self.paths.iter().all(|p| p.length() == 0.0)
    }

    pub fn positions(&self, tau: f64) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.point_at_fraction(tau).0).collect()
    }

    pub fn velocities(&self, tau: f64) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.point_at_fraction(tau).1).collect()
    }

    pub fn reversed(&self) -> PolePath {
        PolePath {
            paths: self.paths.iter().map(Path::reversed).collect(),
            collision_margin: self.collision_margin,
        }
    }

    /// Sample count keeping every pole step below half the minimum pairwise
    /// distance along the path.
    fn tracking_samples(&self) -> usize {
        let longest = self.paths.iter().map(Path::length).fold(0.0, f64::max);
        let mut min_d = f64::INFINITY;
        for k in 0..=64 {
            let p = self.positions(k as f64 / 64.0);
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    min_d = min_d.min((p[i] - p[j]).norm());
                }
            }
        }
        if !min_d.is_finite() || min_d == 0.0 {
            return 64;
        }
        ((2.0 * longest / min_d).ceil() as usize).max(64)
    }
}

fn check_collisions(poles: &[Complex64], margin: f64) -> Result<()> {
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            let d = (poles[i] - poles[j]).norm();
            if d < margin {
                return Err(Error::Collision {
                    first: i,
                    second: j,
                    distance: d,
                    margin,
                });
            }
        }
    }
    Ok(())
}

/// `dA_i/dτ = Σ_{j≠i} [A_j, A_i]/(u_j − u_i) · (u̇_j − u̇_i)`.
pub fn schlesinger_rhs(
    residues: &[Mat2],
    poles: &[Complex64],
    velocities: &[Complex64],
    collision_margin: f64,
) -> Result<Vec<Mat2>> {
    if residues.len() != poles.len() || velocities.len() != poles.len() {
        return Err(Error::InvalidArgument("length mismatch in Schlesinger data".into()));
    }
    check_collisions(poles, collision_margin)?;
    Ok(rhs_unchecked(residues, poles, velocities))
}

fn rhs_unchecked(residues: &[Mat2], poles: &[Complex64], velocities: &[Complex64]) -> Vec<Mat2> {
    let n = poles.len();
    let mut out = vec![Mat2::zeros(); n];
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let dv = velocities[j] - velocities[i];
            if dv == Complex64::new(0.0, 0.0) {
                continue;
            }
            out[i] += commutator(&residues[j], &residues[i]) * (dv / (poles[j] - poles[i]));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_local_error_estimate: f64,
}

/// Evolves the residues along `pole_path`; the result sits at the path's final poles.
pub fn flow(system: &FuchsianSystem, pole_path: &PolePath, rel_tol: f64) -> Result<FuchsianSystem> {
    flow_with_stats(system, pole_path, rel_tol).map(|(s, _)| s)
}

pub fn flow_with_stats(
    system: &FuchsianSystem,
    pole_path: &PolePath,
    rel_tol: f64,
) -> Result<(FuchsianSystem, FlowStats)> {
    check_rel_tol(rel_tol)?;
    if pole_path.len() != system.len() {
        return Err(Error::InvalidArgument(format!(
            "pole path has {} poles, system has {}",
            pole_path.len(),
            system.len()
        )));
    }
    for (i, (p, u)) in pole_path.paths.iter().zip(system.poles()).enumerate() {
        if (p.start() - u).norm() > 1e-12 * u.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "pole path {i} does not start at pole {i}"
            )));
        }
    }
    if pole_path.is_stationary() {
        return Ok((system.clone(), FlowStats::default()));
    }
    let margin = pole_path.collision_margin;
    for k in 0..=pole_path.tracking_samples() {
        let t = k as f64 / pole_path.tracking_samples() as f64;
        check_collisions(&pole_path.positions(t), margin)?;
    }

    let n = system.len();
    let mut y: Vec<Complex64> = system
        .residues()
        .iter()
        .flat_map(|a| [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]])
        .collect();
    let opts = Options {
        rel_tol,
        abs_tol: ode::DEFAULT_ABS_TOL,
        initial_step: 1.0 / 100.0,
        min_step: 1e-13,
        rejection_cap: ode::REJECTION_CAP,
    };
    let mut stats = Stats::default();
    let mut residues = vec![Mat2::zeros(); n];
    let rhs = |tau: f64, state: &[Complex64], out: &mut [Complex64]| {
        for (i, r) in residues.iter_mut().enumerate() {
            let s = &state[4 * i..4 * i + 4];
            *r = Mat2::new(s[0], s[1], s[2], s[3]);
        }
        let d = rhs_unchecked(&residues, &pole_path.positions(tau), &pole_path.velocities(tau));
        for (i, m) in d.iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(&[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
        }
    };
    ode::integrate(rhs, 0.0, 1.0, &mut y, &opts, &mut stats)?;

    let evolved = y
        .chunks(4)
        .map(|s| Mat2::new(s[0], s[1], s[2], s[3]))
        .collect();
    let out = FuchsianSystem::new(pole_path.positions(1.0), evolved)?;
    Ok((
        out,
        FlowStats {
            steps: stats.steps,
            rejected_steps: stats.rejected,
            max_local_error_estimate: stats.max_error_estimate,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct DriftReport {
    pub drift: f64,
    pub converged: bool,
    pub basepoint: Complex64,
    pub initial: MonodromyTuple,
    pub flowed: MonodromyTuple,
    pub system: FuchsianSystem,
    pub flow_stats: FlowStats,
}

/// Class distance between the monodromy before and after the flow.
pub fn isomonodromy_drift(system: &FuchsianSystem, pole_path: &PolePath, rel_tol: f64) -> Result<f64> {
    isomonodromy_drift_report(system, pole_path, rel_tol).map(|r| r.drift)
}

pub fn isomonodromy_drift_report(
    system: &FuchsianSystem,
    pole_path: &PolePath,
    rel_tol: f64,
) -> Result<DriftReport> {
    let (flowed, flow_stats) = flow_with_stats(system, pole_path, rel_tol)?;
    let basepoint = tracking_basepoint(pole_path)?;
    let start = canonical_generators(basepoint, system.poles(), DEFAULT_RADIUS_FACTOR)?;
    let end = canonical_generators(basepoint, flowed.poles(), DEFAULT_RADIUS_FACTOR)?;
    let initial = monodromy_tuple(system, &start, rel_tol)?;
    let after = monodromy_tuple(&flowed, &end, rel_tol)?;
    let d = class_distance(&initial, &after)?;
    Ok(DriftReport {
        drift: d.distance,
        converged: d.converged,
        basepoint,
        initial,
        flowed: after,
        system: flowed,
        flow_stats,
    })
}

/// A basepoint outside every convex hull along the motion from which the
/// poles' angular order never changes, so that the loops deform continuously
/// with the poles. Among candidates on a large circle the one with the widest
/// worst-case angular separation wins; ties prefer the leftmost candidate.
pub fn tracking_basepoint(pole_path: &PolePath) -> Result<Complex64> {
    let samples = pole_path.tracking_samples();
    let configs: Vec<Vec<Complex64>> = (0..=samples)
        .map(|k| pole_path.positions(k as f64 / samples as f64))
        .collect();
    let all: Vec<Complex64> = configs.iter().flatten().copied().collect();
    let centroid = all.iter().sum::<Complex64>() / all.len() as f64;
    let extent = all.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
    let radius = 2.0 * extent + 1.0;

    const CANDIDATES: usize = 32;
    let mut best: Option<(f64, Complex64)> = None;
    for k in 0..CANDIDATES {
        let angle = std::f64::consts::PI + TAU * k as f64 / CANDIDATES as f64;
        let b = centroid + Complex64::from_polar(radius, angle);
        if let Some(sep) = order_separation(b, &configs) {
            if best.map_or(true, |(s, _)| sep > s) {
                best = Some((sep, b));
            }
        }
    }
    best.map(|(_, b)| b).ok_or_else(|| {
        Error::DegenerateConfiguration(
            "no basepoint keeps the generator order fixed along the pole motion".into(),
        )
    })
}

/// Smallest angular gap between poles seen from `b` over all configurations,
/// or `None` if the angular order changes or `b` falls inside a hull.
fn order_separation(b: Complex64, configs: &[Vec<Complex64>]) -> Option<f64> {
    let mut reference: Option<Vec<usize>> = None;
    let mut worst = f64::INFINITY;
    for poles in configs {
        let ls_order = sweep_order(b, poles)?;
        let args: Vec<f64> = poles.iter().map(|p| (p - b).arg()).collect();
        for w in ls_order.windows(2) {
            let gap = (args[w[1]] - args[w[0]]).rem_euclid(TAU);
            worst = worst.min(gap);
        }
        match &reference {
            None => reference = Some(ls_order),
            Some(r) if *r != ls_order => return None,
            _ => {}
        }
    }
    Some(worst)
}

fn sweep_order(b: Complex64, poles: &[Complex64]) -> Option<Vec<usize>> {
    let ls = canonical_generators(b, poles, DEFAULT_RADIUS_FACTOR).ok()?;
    if ls.inside_hull {
        return None;
    }
    Some(ls.order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::nilpotent_family;
    use crate::linalg::{c, frobenius, nilpotent, trace};

    #[test]
    fn commuting_residues_give_zero_rhs() {
        let s = nilpotent_family(
            [c(1.0, 0.5), c(-2.0, 0.0), c(0.3, 0.3)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)],
        )
        .unwrap();
        let v = [c(0.3, -1.0), c(2.0, 0.1), c(-0.7, 0.7)];
        let d = schlesinger_rhs(s.residues(), s.poles(), &v, 1e-3).unwrap();
        assert!(d.iter().all(|m| *m == Mat2::zeros()));
    }

    #[test]
    fn hand_commutator_example() {
        let one = c(1.0, 0.0);
        let z = c(0.0, 0.0);
        let a1 = Mat2::new(z, one, z, z);
        let a2 = Mat2::new(z, z, one, z);
        let d = schlesinger_rhs(&[a1, a2], &[z, one], &[z, one], 1e-3).unwrap();
        let expected = Mat2::new(-one, z, z, one);
        assert!(frobenius(&(d[0] - expected)) < 1e-15);
        assert!(frobenius(&(d[1] + expected)) < 1e-15);
        let zero = schlesinger_rhs(&[Mat2::zeros(); 2], &[z, one], &[z, one], 1e-3).unwrap();
        assert!(zero.iter().all(|m| *m == Mat2::zeros()));
    }

    #[test]
    fn collision_detected() {
        let z = c(0.0, 0.0);
        let r = schlesinger_rhs(&[nilpotent(); 2], &[z, c(1e-4, 0.0)], &[z, z], 1e-3);
        assert!(matches!(r, Err(Error::Collision { .. })));
    }

    #[test]
    fn eq11_flow_is_static() {
        let u = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.5)];
        let s = nilpotent_family([c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)], u).unwrap();
        let pp = PolePath::single_segment(&u, 0, c(0.5, 0.0)).unwrap();
        let f = flow(&s, &pp, 1e-10).unwrap();
        for (a, b) in f.residues().iter().zip(s.residues()) {
            assert!(frobenius(&(a - b)) <= 1e-9);
        }
        assert!((f.poles()[0] - c(0.5, 0.0)).norm() < 1e-15);

        let still = PolePath::new(u.iter().map(|&p| Path::point(p)).collect(), 1e-3).unwrap();
        assert_eq!(flow(&s, &still, 1e-10).unwrap(), s);
        assert_eq!(isomonodromy_drift(&s, &still, 1e-10).unwrap(), 0.0);
    }

    fn traceless(seed: &[f64]) -> Mat2 {
        let a = c(seed[0], seed[1]);
        Mat2::new(a, c(seed[2], seed[3]), c(seed[4], seed[5]), -a)
    }

    #[test]
    fn generic_flow_preserves_residue_classes_and_monodromy() {
        let u = [c(0.0, 0.0), c(1.5, 0.2), c(0.4, 1.6)];
        let res = vec![
            traceless(&[0.2, 0.1, 0.3, -0.2, 0.15, 0.05]),
            traceless(&[-0.1, 0.25, 0.1, 0.2, -0.3, 0.1]),
            traceless(&[0.05, -0.2, -0.25, 0.1, 0.2, 0.3]),
        ];
        let s = FuchsianSystem::new(u.to_vec(), res).unwrap();
        let pp = PolePath::single_segment(&u, 0, c(0.5, 0.0)).unwrap();
        let tol = 1e-10;
        let f = flow(&s, &pp, tol).unwrap();
        for (a, b) in f.residues().iter().zip(s.residues()) {
            assert!((trace(a) - trace(b)).norm() < 10.0 * tol);
            assert!((trace(&(a * a)) - trace(&(b * b))).norm() < 10.0 * tol);
        }
        assert!(f.residues().iter().zip(s.residues()).any(|(a, b)| frobenius(&(a - b)) > 1e-3));

        let back = flow(&f, &pp.reversed(), tol).unwrap();
        for (a, b) in back.residues().iter().zip(s.residues()) {
            assert!(frobenius(&(a - b)) < 100.0 * tol);
        }

        let drift = isomonodromy_drift(&s, &pp, tol).unwrap();
        assert!(drift < 1e-6, "drift {drift:e}");
    }
}
