#![allow(dead_code)]

use isofol::family::{Eq11Family, ParameterFamily};
use isofol::fuchsian::FuchsianSystem;
use isofol::linalg::{c, Mat2};
use isofol::sampling::{seeded_samples, Domain};
use isofol::torus::{first_integrals, TorusFamily};
use num_complex::Complex64;

pub fn pairwise_separated(z: &[Complex64], sep: f64) -> bool {
    (0..z.len()).all(|i| (i + 1..z.len()).all(|j| (z[i] - z[j]).norm() >= sep))
}

/// Generic points of the nilpotent family: `|a_i| ≥ 0.5`, poles in the unit
/// square at least 0.3 apart, compatible with the default basepoint.
pub fn eq11_generic(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut boxes = vec![[-2.0, 2.0]; 6];
    boxes.extend(vec![[-1.0, 1.0]; 6]);
    let fam = Eq11Family::default();
    seeded_samples(
        &Domain::new(boxes).unwrap(),
        |t| {
            let (a, u) = Eq11Family::split(t);
            fam.admissible(t) && a.iter().all(|z| z.norm() >= 0.5) && pairwise_separated(&u, 0.3)
        },
        count,
        seed,
    )
    .unwrap()
}

/// Points with `a₁ = a₂ = 0` and real `a₃ ∈ [0.5, 2]`.
pub fn eq11_locus(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut boxes = vec![[0.0, 0.0]; 4];
    boxes.extend([[0.5, 2.0], [0.0, 0.0]]);
    boxes.extend(vec![[-1.0, 1.0]; 6]);
    seeded_samples(
        &Domain::new(boxes).unwrap(),
        |t| pairwise_separated(&Eq11Family::split(t).1, 0.3),
        count,
        seed,
    )
    .unwrap()
}

/// Admissible torus points with all first integrals defined and probe
/// points clear of the boundary.
pub fn torus_samples(count: usize, seed: u64) -> Vec<Vec<f64>> {
    seeded_samples(
        &Domain::new(vec![[-1.0, 1.0]; 18]).unwrap(),
        |t| {
            TorusFamily.admissible(t)
                && TorusFamily::foliation(t)
                    .ok()
                    .and_then(|f| first_integrals(&f).ok())
                    .is_some()
                && isofol::torus::lattice_determinant(TorusFamily::foliation(t).unwrap().lattice()).abs() > 1e-3
        },
        count,
        seed,
    )
    .unwrap()
}

pub fn traceless(v: &[f64]) -> Mat2 {
    let p = c(v[0], v[1]);
    Mat2::new(p, c(v[2], v[3]), c(v[4], v[5]), -p)
}

/// Three poles at least `sep` apart in `[-2, 2]²` with traceless residues
/// whose entries lie in the unit box.
pub fn traceless_systems(count: usize, sep: f64, seed: u64) -> Vec<FuchsianSystem> {
    let mut boxes = vec![[-2.0, 2.0]; 6];
    boxes.extend(vec![[-1.0, 1.0]; 18]);
    seeded_samples(
        &Domain::new(boxes).unwrap(),
        |t| {
            let u: Vec<Complex64> = (0..3).map(|k| c(t[2 * k], t[2 * k + 1])).collect();
            pairwise_separated(&u, sep)
        },
        count,
        seed,
    )
    .unwrap()
    .into_iter()
    .map(|t| {
        let u = (0..3).map(|k| c(t[2 * k], t[2 * k + 1])).collect();
        let r = (0..3).map(|k| traceless(&t[6 + 6 * k..12 + 6 * k])).collect();
        FuchsianSystem::new(u, r).unwrap()
    })
    .collect()
}

pub fn rel_err(a: &Mat2, b: &Mat2) -> f64 {
    isofol::linalg::frobenius(&(a - b)) / isofol::linalg::frobenius(b)
}
