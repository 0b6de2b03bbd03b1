//! Differentials of parameter-to-monodromy maps and their kernels.
//!
//! The framed kernel collects directions along which the realified tuple is
//! stationary; the class kernel collects directions whose variation is
//! absorbed by the infinitesimal group action.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::family::ParameterFamily;
use crate::linalg::{numerical_rank, pinv_solve, projector, range_projector, sorted_svd};
use crate::monodromy::{class_distance, MonodromyTuple};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_RANK_EPS: f64 = 1e-6;
pub const COMPLEX_STRUCTURE_TOL: f64 = 1e-8;
/// A scan fails once this fraction of its points fail.
pub const SCAN_FAILURE_FRACTION: f64 = 0.5;

const CORRECTOR_ITERATIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    Framed,
    Class,
}

fn ser_ratio<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_some(x)
    } else {
        s.serialize_none()
    }
}

fn de_ratio<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub tau: Vec<f64>,
    pub mode: KernelMode,
    /// Descending, one per coordinate.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Orthonormal, `q` entries each.
    pub kernel_basis: Vec<Vec<f64>>,
    /// Smallest kept over largest dropped singular value; infinite (`null` in
    /// JSON) when nothing is dropped, nothing is kept, or the dropped values vanish.
    #[serde(serialize_with = "ser_ratio", deserialize_with = "de_ratio")]
    pub gap_ratio: f64,
    pub complex_structure: bool,
}

impl KernelReport {
    pub fn dimension(&self) -> usize {
        self.singular_values.len()
    }

    pub fn kernel_dimension(&self) -> usize {
        self.kernel_basis.len()
    }

    /// Kernel basis as the columns of a `q × d` matrix.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let q = self.dimension();
        DMatrix::from_fn(q, self.kernel_dimension(), |r, k| self.kernel_basis[k][r])
    }

    pub fn min_kept(&self) -> Option<f64> {
        self.rank.checked_sub(1).map(|k| self.singular_values[k])
    }

    pub fn max_dropped(&self) -> Option<f64> {
        self.singular_values.get(self.rank).copied()
    }
}

/// Realified tuple at `tau`.
pub fn framed_map(family: &dyn ParameterFamily, tau: &[f64]) -> Result<Vec<f64>> {
    evaluate(family, tau).map(|t| t.realify())
}

fn evaluate(family: &dyn ParameterFamily, tau: &[f64]) -> Result<MonodromyTuple> {
    if tau.len() != family.dimension() {
        return Err(Error::InvalidArgument(format!(
            "expected {} coordinates, got {}",
            family.dimension(),
            tau.len()
        )));
    }
    family.evaluate(tau).map_err(|e| e.at_tau(tau))
}

/// Finite-difference step used for coordinate `k`: `h · max(1, |τ_k|)`.
pub fn coordinate_step(h: f64, tau_k: f64) -> f64 {
    h * tau_k.abs().max(1.0)
}

/// Central-difference Jacobian of [`framed_map`], one column per coordinate,
/// columns evaluated in parallel.
pub fn jacobian(family: &dyn ParameterFamily, tau: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {h:e} must be positive")));
    }
    let q = family.dimension();
    if tau.len() != q {
        return Err(Error::InvalidArgument(format!("expected {q} coordinates, got {}", tau.len())));
    }
    let names = family.coordinate_names();
    let probes: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..q)
        .map(|k| {
            let step = coordinate_step(h, tau[k]);
            let mut plus = tau.to_vec();
            let mut minus = tau.to_vec();
            plus[k] += step;
            minus[k] -= step;
            if family.admissible(&plus) && family.admissible(&minus) {
                Ok((plus, minus, step))
            } else {
                Err(Error::Boundary {
                    coordinate: k,
                    name: names.get(k).cloned().unwrap_or_default(),
                })
            }
        })
        .collect::<Result<_>>()?;
    let columns: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|(plus, minus, step)| {
            let fp = framed_map(family, plus)?;
            let fm = framed_map(family, minus)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
        })
        .collect::<Result<_>>()?;
    let m = columns.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(m, q, |r, k| columns[k][r]))
}

fn check_rank_eps(rank_eps: f64) -> Result<()> {
    if rank_eps > 0.0 && rank_eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rank-eps {rank_eps:e} outside (0, 1)")))
    }
}

fn kernel_report(j: &DMatrix<f64>, rank_eps: f64, mode: KernelMode) -> Result<KernelReport> {
    check_rank_eps(rank_eps)?;
    if j.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidJacobian);
    }
    let q = j.ncols();
    let (singular_values, v) = if j.nrows() == 0 {
        (vec![0.0; q], DMatrix::identity(q, q))
    } else {
        let svd = sorted_svd(j);
        (svd.singular_values, svd.v)
    };
    let rank = numerical_rank(&singular_values, rank_eps);
    let kernel_basis = (rank..q).map(|k| v.column(k).iter().copied().collect()).collect();
    let gap_ratio = if rank == 0 || rank == q || singular_values[rank] == 0.0 {
        f64::INFINITY
    } else {
        singular_values[rank - 1] / singular_values[rank]
    };
    Ok(KernelReport {
        tau: Vec::new(),
        mode,
        singular_values,
        rank,
        kernel_basis,
        gap_ratio,
        complex_structure: false,
    })
}

/// Kernel of `J`: right singular vectors whose singular values fall below
/// `rank_eps · σ_max`. The report's `tau` is left empty.
pub fn framed_kernel(j: &DMatrix<f64>, rank_eps: f64) -> Result<KernelReport> {
    kernel_report(j, rank_eps, KernelMode::Framed)
}

/// Kernel of `(I − K K⁺) J`: directions whose variation lies in the range of
/// the orbit matrix `K`.
pub fn class_kernel(j: &DMatrix<f64>, k: &DMatrix<f64>, rank_eps: f64) -> Result<KernelReport> {
    kernel_report(&(class_projector(j, k, rank_eps)? * j), rank_eps, KernelMode::Class)
}

fn class_projector(j: &DMatrix<f64>, k: &DMatrix<f64>, rank_eps: f64) -> Result<DMatrix<f64>> {
    check_rank_eps(rank_eps)?;
    if j.nrows() != k.nrows() {
        return Err(Error::InvalidArgument(format!(
            "jacobian has {} rows, orbit matrix {}",
            j.nrows(),
            k.nrows()
        )));
    }
    if k.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidJacobian);
    }
    let m = j.nrows();
    Ok(DMatrix::identity(m, m) - range_projector(k, rank_eps))
}

/// Everything needed for one kernel evaluation at a point.
struct Local {
    value: MonodromyTuple,
    j: DMatrix<f64>,
    /// Projector applied to residuals: identity (framed) or `I − K K⁺` (class).
    p: DMatrix<f64>,
    report: KernelReport,
}

fn local(
    family: &dyn ParameterFamily,
    tau: &[f64],
    mode: KernelMode,
    h: f64,
    rank_eps: f64,
) -> Result<Local> {
    check_rank_eps(rank_eps)?;
    let value = evaluate(family, tau)?;
    let j = jacobian(family, tau, h)?;
    let p = match mode {
        KernelMode::Framed => DMatrix::identity(j.nrows(), j.nrows()),
        KernelMode::Class => {
            let k = family.orbit_matrix(tau).map_err(|e| e.at_tau(tau))?;
            class_projector(&j, &k, rank_eps)?
        }
    };
    let mut report = kernel_report(&(&p * &j), rank_eps, mode)?;
    report.tau = tau.to_vec();
    report.complex_structure = complex_structure_check(&report, &family.complex_pairs());
    Ok(Local { value, j, p, report })
}

/// Jacobian plus kernel of the requested mode at `tau`, with the complex
/// structure flag filled in.
pub fn kernel_at(
    family: &dyn ParameterFamily,
    tau: &[f64],
    mode: KernelMode,
    h: f64,
    rank_eps: f64,
) -> Result<KernelReport> {
    local(family, tau, mode, h, rank_eps).map(|l| l.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub tau: Vec<f64>,
    pub rank: Option<usize>,
    pub kernel_dimension: Option<usize>,
    pub min_kept: Option<f64>,
    pub max_dropped: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDrop {
    pub index: usize,
    pub rank: usize,
    /// Extra kernel dimensions relative to the generic rank.
    pub surplus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMap {
    pub mode: KernelMode,
    pub coordinate_names: Vec<String>,
    pub points: Vec<ScanPoint>,
    /// Most frequent rank; ties resolve to the larger rank.
    pub generic_rank: usize,
    pub drops: Vec<RankDrop>,
    pub failures: usize,
}

impl RankMap {
    /// CSV with a header row; one row per sample.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        let mut header = self.coordinate_names.clone();
        header.extend(["rank", "min_kept_sigma", "max_dropped_sigma"].map(String::from));
        let mut rows = vec![header];
        for p in &self.points {
            let mut row: Vec<String> = p.tau.iter().map(|x| format!("{x:e}")).collect();
            row.push(p.rank.map(|r| r.to_string()).unwrap_or_default());
            row.push(opt(p.min_kept));
            row.push(opt(p.max_dropped));
            rows.push(row);
        }
        rows
    }
}

/// Kernel rank at every sample, in parallel. Per-point failures are
/// recorded; the scan fails when half or more of the points fail.
pub fn rank_scan(
    family: &dyn ParameterFamily,
    samples: &[Vec<f64>],
    mode: KernelMode,
    h: f64,
    rank_eps: f64,
) -> Result<RankMap> {
    rank_scan_with_reports(family, samples, mode, h, rank_eps).map(|(map, _)| map)
}

/// [`rank_scan`] that also returns the kernel report of every point that
/// did not fail.
pub fn rank_scan_with_reports(
    family: &dyn ParameterFamily,
    samples: &[Vec<f64>],
    mode: KernelMode,
    h: f64,
    rank_eps: f64,
) -> Result<(RankMap, Vec<Option<KernelReport>>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("rank scan needs at least one sample".into()));
    }
    check_rank_eps(rank_eps)?;
    let results: Vec<Result<KernelReport>> = samples
        .par_iter()
        .map(|tau| kernel_at(family, tau, mode, h, rank_eps))
        .collect();
    let points: Vec<ScanPoint> = samples
        .iter()
        .zip(&results)
        .map(|(tau, r)| match r {
            Ok(r) => ScanPoint {
                tau: tau.clone(),
                rank: Some(r.rank),
                kernel_dimension: Some(r.kernel_dimension()),
                min_kept: r.min_kept(),
                max_dropped: r.max_dropped(),
                error: None,
            },
            Err(e) => ScanPoint {
                tau: tau.clone(),
                rank: None,
                kernel_dimension: None,
                min_kept: None,
                max_dropped: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let failures = points.iter().filter(|p| p.rank.is_none()).count();
    if failures as f64 >= SCAN_FAILURE_FRACTION * points.len() as f64 {
        return Err(Error::Scan {
            failed: failures,
            total: points.len(),
        });
    }
    let mut counts = std::collections::BTreeMap::new();
    for r in points.iter().filter_map(|p| p.rank) {
        *counts.entry(r).or_insert(0usize) += 1;
    }
    let generic_rank = counts
        .iter()
        .max_by_key(|(&r, &n)| (n, r))
        .map(|(&r, _)| r)
        .unwrap_or(0);
    let drops = points
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            p.rank.filter(|&r| r < generic_rank).map(|rank| RankDrop {
                index,
                rank,
                surplus: generic_rank - rank,
            })
        })
        .collect();
    let map = RankMap {
        mode,
        coordinate_names: family.coordinate_names(),
        points,
        generic_rank,
        drops,
        failures,
    };
    Ok((map, results.into_iter().map(|r| r.ok()).collect()))
}

/// Largest normal component of the finite-difference brackets of the
/// projected basis fields `τ ↦ P(τ) v_i`. Zero for kernels of dimension < 2.
pub fn frobenius_residual(
    family: &dyn ParameterFamily,
    tau: &[f64],
    mode: KernelMode,
    h: f64,
    rank_eps: f64,
) -> Result<f64> {
    let base = kernel_at(family, tau, mode, h, rank_eps)?;
    let d = base.kernel_dimension();
    if d < 2 {
        return Ok(0.0);
    }
    let q = base.dimension();
    let basis = base.basis_matrix();
    let probes: Vec<Vec<f64>> = (0..d)
        .flat_map(|i| {
            let v = basis.column(i);
            [1.0, -1.0].map(|sign| tau.iter().zip(v.iter()).map(|(t, x)| t + sign * h * x).collect())
        })
        .collect();
    let projectors: Vec<DMatrix<f64>> = probes
        .par_iter()
        .map(|p| {
            let r = kernel_at(family, p, mode, h, rank_eps)?;
            if r.kernel_dimension() != d {
                return Err(Error::RankInstability {
                    expected: d,
                    found: r.kernel_dimension(),
                });
            }
            Ok(projector(&r.basis_matrix()))
        })
        .collect::<Result<_>>()?;
    let normal = DMatrix::identity(q, q) - projector(&basis);
    let derivative = |i: usize, j: usize| -> DVector<f64> {
        let vj = basis.column(j);
        (&projectors[2 * i] * vj - &projectors[2 * i + 1] * vj) / (2.0 * h)
    };
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in i + 1..d {
            let bracket = derivative(i, j) - derivative(j, i);
            worst = worst.max((&normal * bracket).norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DirectionSelector {
    /// The kernel vector paired with the smallest singular value.
    Default,
    /// Projected onto the initial kernel and normalized.
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafTrace {
    pub mode: KernelMode,
    /// Visited points, starting with `τ₀`.
    pub points: Vec<Vec<f64>>,
    /// Per-point distance of the tuple from the initial one: Euclidean on the
    /// framed map, [`class_distance`] in class mode.
    pub drift: Vec<f64>,
    pub kernel_dimension: usize,
    /// Set when the trace stopped before `n_steps`.
    pub terminated_early: Option<String>,
}

fn unit(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 1e-8).then(|| v / n)
}

fn drift(mode: KernelMode, reference: &MonodromyTuple, value: &MonodromyTuple) -> Result<f64> {
    Ok(match mode {
        KernelMode::Framed => {
            let (a, b) = (reference.realify(), value.realify());
            a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        }
        KernelMode::Class => class_distance(reference, value)?.distance,
    })
}

/// Residual of `value` against the leaf through `reference`.
fn leaf_residual(mode: KernelMode, reference: &MonodromyTuple, value: &MonodromyTuple) -> Result<Vec<f64>> {
    let target = match mode {
        KernelMode::Framed => reference.realify(),
        KernelMode::Class => {
            let g = class_distance(reference, value)?.conjugator;
            reference.conjugated(&g)?.realify()
        }
    };
    Ok(value.realify().iter().zip(&target).map(|(x, y)| x - y).collect())
}

/// Follows a leaf of the kernel distribution from `tau0`.
///
/// Each step moves by `step` along the current kernel direction, pulls the
/// point back onto the level set of `tau0` with a few projected
/// Gauss–Newton iterations, then re-evaluates the kernel and keeps the
/// direction of maximal overlap with the previous one. A rank change ends
/// the trace early with the points visited so far.
#[allow(clippy::too_many_arguments)]
pub fn leaf_trace(
    family: &dyn ParameterFamily,
    tau0: &[f64],
    selector: &DirectionSelector,
    step: f64,
    n_steps: usize,
    mode: KernelMode,
    h: f64,
    rank_eps: f64,
) -> Result<LeafTrace> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {step:e} must be positive")));
    }
    let mut here = local(family, tau0, mode, h, rank_eps)?;
    let d = here.report.kernel_dimension();
    if d == 0 {
        return Err(Error::EmptyKernel);
    }
    let reference = here.value.clone();
    let kernel_projector = |r: &KernelReport| projector(&r.basis_matrix());
    let mut direction = match selector {
        DirectionSelector::Default => here.report.basis_matrix().column(d - 1).into_owned(),
        DirectionSelector::Vector(v) => {
            if v.len() != tau0.len() {
                return Err(Error::InvalidArgument("direction has the wrong length".into()));
            }
            unit(kernel_projector(&here.report) * DVector::from_column_slice(v)).ok_or_else(|| {
                Error::InvalidArgument("direction is orthogonal to the kernel".into())
            })?
        }
    };

    let mut trace = LeafTrace {
        mode,
        points: vec![tau0.to_vec()],
        drift: vec![0.0],
        kernel_dimension: d,
        terminated_early: None,
    };
    let mut tau = DVector::from_column_slice(tau0);
    for _ in 0..n_steps {
        let mut next = &tau + &direction * step;
        let chord = &here.p * &here.j;
        let mut value = None;
        for _ in 0..CORRECTOR_ITERATIONS {
            if !family.admissible(next.as_slice()) {
                break;
            }
            let v = evaluate(family, next.as_slice())?;
            let r = DVector::from_vec(leaf_residual(mode, &reference, &v)?);
            let pr = &here.p * r;
            let scale = 1.0 + DVector::from_vec(reference.realify()).norm();
            if pr.norm() <= 1e-14 * scale {
                value = Some(v);
                break;
            }
            let delta = pinv_solve(&chord, pr.as_slice(), rank_eps);
            next -= DVector::from_vec(delta);
            value = Some(v);
        }
        if value.is_none() || !family.admissible(next.as_slice()) {
            trace.terminated_early = Some("left the admissible domain".into());
            break;
        }
        let next_local = match local(family, next.as_slice(), mode, h, rank_eps) {
            Ok(l) => l,
            Err(e) => {
                trace.terminated_early = Some(e.to_string());
                break;
            }
        };
        let nd = next_local.report.kernel_dimension();
        if nd != d {
            trace.terminated_early = Some(format!("kernel dimension changed from {d} to {nd}"));
            break;
        }
        let Some(dir) = unit(kernel_projector(&next_local.report) * &direction) else {
            trace.terminated_early = Some("direction left the kernel".into());
            break;
        };
        trace.drift.push(drift(mode, &reference, &next_local.value)?);
        trace.points.push(next.iter().copied().collect());
        direction = dir;
        tau = next;
        here = next_local;
    }
    Ok(trace)
}

/// Whether the kernel is closed under the coordinate-pairwise
/// multiplication by `i`. Unpaired coordinates are sent to zero.
pub fn complex_structure_check(report: &KernelReport, pairs: &[(usize, usize)]) -> bool {
    let d = report.kernel_dimension();
    if d == 0 {
        return true;
    }
    let q = report.dimension();
    let basis = report.basis_matrix();
    let normal = DMatrix::identity(q, q) - projector(&basis);
    basis.column_iter().all(|v| {
        let mut iv = DVector::zeros(q);
        for &(re, im) in pairs {
            iv[re] = -v[im];
            iv[im] = v[re];
        }
        let paired_norm = iv.norm();
        (&normal * iv).norm() <= COMPLEX_STRUCTURE_TOL && (paired_norm - 1.0).abs() <= COMPLEX_STRUCTURE_TOL
    })
}
