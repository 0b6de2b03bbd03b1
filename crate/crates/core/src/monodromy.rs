//! Framed monodromy tuples and their conjugacy-class structure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{transport, TransportResult};
use crate::error::{Error, Result};
use crate::fuchsian::{mat_to_json, FuchsianSystem, POLE_TOL};
use crate::linalg::{
    c, commutator, expm_traceless, frobenius, identity, inverse, realify_mat, realify_mats,
    realify_scalars, trace, Mat2, I,
};
use crate::paths::LoopSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    #[serde(rename = "linear-2x2")]
    Linear2x2,
    AffineTranslation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Elements {
    Linear(Vec<Mat2>),
    /// Translation lengths `t_i` of `y ↦ y + t_i`.
    Affine(Vec<Complex64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopDiagnostics {
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_local_error_estimate: f64,
}

impl From<&TransportResult> for LoopDiagnostics {
    fn from(r: &TransportResult) -> Self {
        LoopDiagnostics {
            steps: r.steps,
            rejected_steps: r.rejected_steps,
            max_local_error_estimate: r.max_local_error_estimate,
        }
    }
}

/// Monodromy elements indexed by pole (or lattice generator), together with
/// the generator order of the loop system that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyTuple {
    pub basepoint: Complex64,
    pub elements: Elements,
    pub order: Vec<usize>,
    pub diagnostics: Vec<LoopDiagnostics>,
}

impl MonodromyTuple {
    pub fn linear(basepoint: Complex64, matrices: Vec<Mat2>) -> Self {
        let order = (0..matrices.len()).collect();
        MonodromyTuple {
            basepoint,
            elements: Elements::Linear(matrices),
            order,
            diagnostics: Vec::new(),
        }
    }

    pub fn affine(translations: Vec<Complex64>) -> Self {
        let order = (0..translations.len()).collect();
        MonodromyTuple {
            basepoint: Complex64::new(0.0, 0.0),
            elements: Elements::Affine(translations),
            order,
            diagnostics: Vec::new(),
        }
    }

    pub fn kind(&self) -> GroupKind {
        match self.elements {
            Elements::Linear(_) => GroupKind::Linear2x2,
            Elements::Affine(_) => GroupKind::AffineTranslation,
        }
    }

    pub fn len(&self) -> usize {
        match &self.elements {
            Elements::Linear(m) => m.len(),
            Elements::Affine(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrices(&self) -> Option<&[Mat2]> {
        match &self.elements {
            Elements::Linear(m) => Some(m),
            Elements::Affine(_) => None,
        }
    }

    pub fn translations(&self) -> Option<&[Complex64]> {
        match &self.elements {
            Elements::Affine(t) => Some(t),
            Elements::Linear(_) => None,
        }
    }

    /// Realified elements: 8 reals per matrix or 2 per translation.
    pub fn realify(&self) -> Vec<f64> {
        match &self.elements {
            Elements::Linear(m) => realify_mats(m),
            Elements::Affine(t) => realify_scalars(t),
        }
    }

    /// `g M_i g⁻¹` for the linear kind, `a t_i` for the affine kind where `g`
    /// acts as `y ↦ a y + b` with `a = g[0][0]`.
    pub fn conjugated(&self, g: &Mat2) -> Result<MonodromyTuple> {
        let elements = match &self.elements {
            Elements::Linear(ms) => {
                let gi = inverse(g)
                    .ok_or_else(|| Error::InvalidArgument("singular conjugator".into()))?;
                Elements::Linear(ms.iter().map(|m| g * m * gi).collect())
            }
            Elements::Affine(ts) => Elements::Affine(ts.iter().map(|t| g[(0, 0)] * t).collect()),
        };
        Ok(MonodromyTuple {
            elements,
            ..self.clone()
        })
    }
}

/// Transport around every loop of `loops`; element `i` belongs to pole `i`.
pub fn monodromy_tuple(
    system: &FuchsianSystem,
    loops: &LoopSystem,
    rel_tol: f64,
) -> Result<MonodromyTuple> {
    if loops.poles.len() != system.len()
        || loops
            .poles
            .iter()
            .zip(system.poles())
            .any(|(a, b)| (a - b).norm() > POLE_TOL)
    {
        return Err(Error::InvalidArgument(
            "loop system poles do not match the system's poles".into(),
        ));
    }
    let results = loops
        .loops
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            transport(system, path, rel_tol).map_err(|e| Error::Loop {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonodromyTuple {
        basepoint: loops.basepoint,
        elements: Elements::Linear(results.iter().map(|r| r.matrix).collect()),
        order: loops.order.clone(),
        diagnostics: results.iter().map(LoopDiagnostics::from).collect(),
    })
}

/// `M_{order[n-1]} ⋯ M_{order[0]}`.
pub fn ordered_product(tuple: &MonodromyTuple) -> Result<Mat2> {
    let ms = tuple
        .matrices()
        .ok_or_else(|| Error::InvalidArgument("ordered product needs a linear tuple".into()))?;
    Ok(tuple.order.iter().fold(identity(), |acc, &i| ms[i] * acc))
}

/// Distance between transport around an enclosing loop and the ordered
/// product of the generators.
pub fn product_defect(
    tuple: &MonodromyTuple,
    system: &FuchsianSystem,
    loops: &LoopSystem,
    rel_tol: f64,
) -> Result<f64> {
    let product = ordered_product(tuple)?;
    let big = transport(system, &loops.enclosing_loop(), rel_tol)?;
    Ok(frobenius(&(big.matrix - product)))
}

/// Realified `(tr M_i ; tr M_i M_j for i < j ; tr M_1 M_2 M_3 when n = 3)`.
pub fn trace_invariants(tuple: &MonodromyTuple) -> Result<Vec<f64>> {
    let ms = tuple
        .matrices()
        .ok_or_else(|| Error::InvalidArgument("trace invariants need a linear tuple".into()))?;
    let mut out = Vec::new();
    for m in ms {
        out.push(trace(m));
    }
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            out.push(trace(&(ms[i] * ms[j])));
        }
    }
    if ms.len() == 3 {
        out.push(trace(&(ms[0] * ms[1] * ms[2])));
    }
    Ok(realify_scalars(&out))
}

/// Realified differential of the symmetry action at the tuple.
///
/// Linear kind: `ξ ↦ ([ξ, M_1], …, [ξ, M_n])`, an `8n × 8` matrix whose
/// columns follow the realification of `ξ`. Affine kind: `s ↦ (s t_1, …, s t_n)`,
/// a `2n × 2` matrix.
pub fn adjoint_orbit_matrix(tuple: &MonodromyTuple) -> DMatrix<f64> {
    match &tuple.elements {
        Elements::Linear(ms) => {
            let mut k = DMatrix::zeros(8 * ms.len(), 8);
            for col in 0..8 {
                let mut e = [0.0; 8];
                e[col] = 1.0;
                let xi = crate::linalg::mat_from_real(&e);
                let image: Vec<Mat2> = ms.iter().map(|m| commutator(&xi, m)).collect();
                k.set_column(col, &DVector::from_vec(realify_mats(&image)));
            }
            k
        }
        Elements::Affine(ts) => {
            let mut k = DMatrix::zeros(2 * ts.len(), 2);
            for (col, s) in [c(1.0, 0.0), I].into_iter().enumerate() {
                let image: Vec<Complex64> = ts.iter().map(|t| s * t).collect();
                k.set_column(col, &DVector::from_vec(realify_scalars(&image)));
            }
            k
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistance {
    pub distance: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `distance` is then the best value seen.
    pub converged: bool,
    /// Optimal group element: `g ∈ SL₂` (linear) or `diag(a, 1)` (affine).
    pub conjugator: Mat2,
}

pub const CLASS_DISTANCE_MAX_ITER: usize = 200;
const LM_LAMBDA0: f64 = 1e-3;
const LM_SUCCESS: f64 = 0.5;
const LM_FAILURE: f64 = 4.0;

fn sl2_basis() -> [Mat2; 6] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let h = Mat2::new(one, z, z, -one);
    let e = Mat2::new(z, one, z, z);
    let f = Mat2::new(z, z, one, z);
    [h, h * I, e, e * I, f, f * I]
}

fn residual(ms: &[Mat2], target: &[Mat2], g: &Mat2, gi: &Mat2) -> (Vec<Mat2>, Vec<f64>) {
    let conj: Vec<Mat2> = ms.iter().map(|m| g * m * gi).collect();
    let mut r = Vec::with_capacity(8 * ms.len());
    for (cm, t) in conj.iter().zip(target) {
        realify_mat(&(cm - t), &mut r);
    }
    (conj, r)
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `min_g (Σ ‖g M_i g⁻¹ − M'_i‖²)^{1/2}` over `SL₂(ℂ)` (linear kind) or over
/// affine maps `y ↦ a y + b` (affine kind), starting from the identity.
pub fn class_distance(t1: &MonodromyTuple, t2: &MonodromyTuple) -> Result<ClassDistance> {
    if t1.kind() != t2.kind() || t1.len() != t2.len() {
        return Err(Error::IncompatibleTuples(format!(
            "{:?}/{} vs {:?}/{}",
            t1.kind(),
            t1.len(),
            t2.kind(),
            t2.len()
        )));
    }
    match (&t1.elements, &t2.elements) {
        (Elements::Affine(a), Elements::Affine(b)) => Ok(affine_distance(a, b)),
        (Elements::Linear(a), Elements::Linear(b)) => Ok(linear_distance(a, b)),
        _ => unreachable!(),
    }
}

fn affine_distance(t: &[Complex64], target: &[Complex64]) -> ClassDistance {
    // linear least squares in a: one Gauss–Newton step is exact
    let norm2: f64 = t.iter().map(|z| z.norm_sqr()).sum();
    let a = if norm2 > 0.0 {
        t.iter().zip(target).map(|(x, y)| x.conj() * y).sum::<Complex64>() / norm2
    } else {
        c(1.0, 0.0)
    };
    let cost: f64 = t.iter().zip(target).map(|(x, y)| (a * x - y).norm_sqr()).sum();
    ClassDistance {
        distance: cost.sqrt(),
        iterations: 1,
        converged: true,
        conjugator: Mat2::new(a, c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
    }
}

fn linear_distance(ms: &[Mat2], target: &[Mat2]) -> ClassDistance {
    let basis = sl2_basis();
    let mut g = identity();
    let mut gi = identity();
    let (mut conj, mut r) = residual(ms, target, &g, &gi);
    let mut cost = sq(&r);
    let mut lambda = LM_LAMBDA0;
    let scale = 1.0 + ms.iter().map(|m| frobenius(m).powi(2)).sum::<f64>();

    for iter in 0..CLASS_DISTANCE_MAX_ITER {
        if cost <= 1e-30 * scale {
            return ClassDistance {
                distance: cost.sqrt(),
                iterations: iter,
                converged: true,
                conjugator: g,
            };
        }
        let mut jac = DMatrix::zeros(r.len(), 6);
        for (k, b) in basis.iter().enumerate() {
            let image: Vec<Mat2> = conj.iter().map(|m| commutator(b, m)).collect();
            jac.set_column(k, &DVector::from_vec(realify_mats(&image)));
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &rv;
        let mu = (jtj.trace() / 6.0).max(1e-300);
        if grad.norm() <= 1e-15 * scale.sqrt() * cost.sqrt().max(1e-300) {
            return ClassDistance {
                distance: cost.sqrt(),
                iterations: iter,
                converged: true,
                conjugator: g,
            };
        }

        let mut improved = false;
        let mut step_norm = 0.0;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for d in 0..6 {
                a[(d, d)] += lambda * mu;
            }
            let Some(delta) = a.lu().solve(&(-&grad)) else {
                lambda *= LM_FAILURE;
                continue;
            };
            let xi = basis
                .iter()
                .zip(delta.iter())
                .fold(Mat2::zeros(), |acc, (b, d)| acc + b * c(*d, 0.0));
            let g_new = expm_traceless(&xi) * g;
            let gi_new = inverse(&g_new).unwrap_or(gi);
            let (conj_new, r_new) = residual(ms, target, &g_new, &gi_new);
            let cost_new = sq(&r_new);
            if cost_new < cost {
                step_norm = delta.norm();
                let rel_gain = (cost - cost_new) / cost;
                g = g_new;
                gi = gi_new;
                conj = conj_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda * LM_SUCCESS).max(1e-12);
                improved = true;
                if rel_gain < 1e-14 {
                    step_norm = 0.0;
                }
                break;
            }
            lambda *= LM_FAILURE;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved || step_norm < 1e-13 {
            return ClassDistance {
                distance: cost.sqrt(),
                iterations: iter + 1,
                converged: true,
                conjugator: g,
            };
        }
    }
    ClassDistance {
        distance: cost.sqrt(),
        iterations: CLASS_DISTANCE_MAX_ITER,
        converged: false,
        conjugator: g,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TupleJson {
    pub kind: GroupKind,
    pub basepoint: [f64; 2],
    pub order: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrices: Option<Vec<[[[f64; 2]; 2]; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub translations: Option<Vec<[f64; 2]>>,
    pub diagnostics: Vec<LoopDiagnostics>,
}

impl From<&MonodromyTuple> for TupleJson {
    fn from(t: &MonodromyTuple) -> Self {
        let (matrices, translations) = match &t.elements {
            Elements::Linear(ms) => (Some(ms.iter().map(mat_to_json).collect()), None),
            Elements::Affine(ts) => (None, Some(ts.iter().map(|z| [z.re, z.im]).collect())),
        };
        TupleJson {
            kind: t.kind(),
            basepoint: [t.basepoint.re, t.basepoint.im],
            order: t.order.clone(),
            matrices,
            translations,
            diagnostics: t.diagnostics.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::nilpotent_family;
    use crate::linalg::{det, nilpotent};
    use crate::paths::canonical_generators;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-10;

    fn eq11_tuple(a: [f64; 3]) -> MonodromyTuple {
        MonodromyTuple::linear(
            c(0.0, 0.0),
            a.iter()
                .map(|&ai| identity() + nilpotent() * (2.0 * PI * ai * I))
                .collect(),
        )
    }

    #[test]
    fn eq11_monodromy_closed_form() {
        let u = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)];
        let s = nilpotent_family([c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)], u).unwrap();
        let ls = canonical_generators(c(-0.3, -2.0), &u, 0.4).unwrap();
        let t = monodromy_tuple(&s, &ls, TOL).unwrap();
        let ms = t.matrices().unwrap();
        for (i, m) in ms.iter().enumerate() {
            let exact = identity() + nilpotent() * (2.0 * PI * (i + 1) as f64 * I);
            assert!(frobenius(&(m - exact)) < 10.0 * TOL * frobenius(&exact));
        }
        let defect = product_defect(&t, &s, &ls, TOL).unwrap();
        assert!(defect < 100.0 * TOL, "{defect:e}");
    }

    #[test]
    fn zero_residues_give_identity() {
        let u = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)];
        let s = nilpotent_family([c(0.0, 0.0); 3], u).unwrap();
        let ls = canonical_generators(c(0.0, -2.0), &u, 0.4).unwrap();
        let t = monodromy_tuple(&s, &ls, TOL).unwrap();
        assert!(t.matrices().unwrap().iter().all(|m| *m == identity()));
        assert!(product_defect(&t, &s, &ls, TOL).unwrap() < 1e-14);
    }

    #[test]
    fn diagonal_residue_monodromy() {
        let lam = 0.37;
        let a = Mat2::new(c(lam, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-lam, 0.0));
        let s = FuchsianSystem::new(vec![c(0.0, 0.0)], vec![a]).unwrap();
        let ls = canonical_generators(c(1.0, 0.0), s.poles(), 0.4).unwrap();
        let t = monodromy_tuple(&s, &ls, TOL).unwrap();
        let e = (2.0 * PI * lam * I).exp();
        let exact = Mat2::new(e, c(0.0, 0.0), c(0.0, 0.0), e.inv());
        assert!(frobenius(&(t.matrices().unwrap()[0] - exact)) < 10.0 * TOL);
        let tr = trace_invariants(&t).unwrap();
        assert!((tr[0] - 2.0 * (2.0 * PI * lam).cos()).abs() < 1e-9);
        assert!(tr[1].abs() < 1e-9);
    }

    #[test]
    fn traces_on_unipotent_tuples() {
        for inv in [trace_invariants(&eq11_tuple([0.0; 3])).unwrap(), trace_invariants(&eq11_tuple([0.3, -1.2, 2.5])).unwrap()] {
            assert_eq!(inv.len(), 2 * 7);
            for pair in inv.chunks(2) {
                assert!((pair[0] - 2.0).abs() < 1e-12 && pair[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orbit_matrix_examples() {
        let k = adjoint_orbit_matrix(&eq11_tuple([0.0; 3]));
        assert_eq!(k.shape(), (24, 8));
        assert_eq!(k.norm(), 0.0);

        // commuting nilpotent tuple: rank 4 (two complex dimensions), image = {(a_i c)}
        let a = [1.0, 2.0, 3.0];
        let k = adjoint_orbit_matrix(&eq11_tuple(a));
        let svd = crate::linalg::sorted_svd(&k);
        assert_eq!(crate::linalg::numerical_rank(&svd.singular_values, 1e-10), 4);
        let p = crate::linalg::range_projector(&k, 1e-10);
        let z = c(0.0, 0.0);
        for cdir in [nilpotent(), Mat2::new(c(-1.0, 0.0), z, z, c(1.0, 0.0)), nilpotent() * I] {
            let v: Vec<Mat2> = a.iter().map(|&ai| cdir * c(ai, 0.0)).collect();
            let v = DVector::from_vec(realify_mats(&v));
            assert!((&v - &p * &v).norm() < 1e-10 * v.norm());
        }

        let t = MonodromyTuple::affine(vec![c(1.0, 0.0), I, c(1.0, 0.0), I]);
        let k = adjoint_orbit_matrix(&t);
        assert_eq!(k.shape(), (8, 2));
        assert_eq!(k.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(k.column(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn scalars_in_orbit_kernel() {
        let t = MonodromyTuple::linear(
            c(0.0, 0.0),
            vec![
                Mat2::new(c(1.0, 0.2), c(0.3, 0.0), c(-0.5, 0.1), c(0.7, 0.0)),
                Mat2::new(c(0.1, 0.0), c(2.0, 1.0), c(0.0, 0.4), c(-0.3, 0.2)),
            ],
        );
        let k = adjoint_orbit_matrix(&t);
        let mut scalar = DVector::zeros(8);
        scalar[0] = 1.0;
        scalar[6] = 1.0;
        assert!((&k * &scalar).norm() < 1e-15);
        scalar.fill(0.0);
        scalar[1] = 1.0;
        scalar[7] = 1.0;
        assert!((&k * &scalar).norm() < 1e-15);
    }

    #[test]
    fn class_distance_examples() {
        let t = eq11_tuple([1.0, 2.0, 3.0]);
        assert_eq!(class_distance(&t, &t).unwrap().distance, 0.0);

        let g = Mat2::new(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0));
        let generic = MonodromyTuple::linear(
            c(0.0, 0.0),
            vec![
                Mat2::new(c(1.0, 0.2), c(0.3, 0.0), c(-0.5, 0.1), c(0.7, 0.0)),
                Mat2::new(c(0.1, 0.0), c(2.0, 1.0), c(0.0, 0.4), c(-0.3, 0.2)),
            ],
        );
        let conj = generic.conjugated(&g).unwrap();
        let d = class_distance(&generic, &conj).unwrap();
        assert!(d.distance < 1e-8 && d.converged, "{d:?}");
        assert!(class_distance(&conj, &generic).unwrap().distance < 1e-8);

        let d = class_distance(&eq11_tuple([1.0; 3]), &eq11_tuple([2.0; 3])).unwrap();
        assert!(d.distance < 1e-6, "{d:?}");
        assert!((det(&d.conjugator) - 1.0).norm() < 1e-12);

        // non-proportional residues: different classes
        let d = class_distance(&eq11_tuple([1.0, 2.0, 3.0]), &eq11_tuple([1.0, 1.0, 1.0])).unwrap();
        assert!(d.distance > 1e-2);

        let a = MonodromyTuple::affine(vec![c(1.0, 0.0), I, c(1.0, 0.0), I]);
        let b = a.conjugated(&Mat2::new(c(0.3, 2.0), c(5.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        assert!(class_distance(&a, &b).unwrap().distance < 1e-14);
        assert!(class_distance(&a, &eq11_tuple([1.0; 3])).is_err());
    }
}
