//! Small-matrix and realification helpers shared across the crate.
//!
//! Realification convention: complex data flattens row-major and every
//! entry contributes `(re, im)` in that order.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type Mat2 = Matrix2<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity() -> Mat2 {
    Mat2::identity()
}

/// `[[0, 1], [0, 0]]`.
pub fn nilpotent() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))
}

pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    a * b - b * a
}

pub fn det(m: &Mat2) -> Complex64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

pub fn trace(m: &Mat2) -> Complex64 {
    m[(0, 0)] + m[(1, 1)]
}

pub fn inverse(m: &Mat2) -> Option<Mat2> {
    let d = det(m);
    if d.norm() == 0.0 || !d.is_finite() {
        return None;
    }
    Some(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / d)
}

pub fn frobenius(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(m: &Mat2) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Exponential of a 2×2 matrix with zero trace: `cosh(μ) I + sinh(μ)/μ ξ`, `μ² = -det ξ`.
pub fn expm_traceless(xi: &Mat2) -> Mat2 {
    let mu2 = -det(xi);
    let mu = mu2.sqrt();
    let (ch, sh_over) = if mu.norm() < 1e-6 {
        // series in μ²
        (
            Complex64::new(1.0, 0.0) + mu2 / 2.0 + mu2 * mu2 / 24.0,
            Complex64::new(1.0, 0.0) + mu2 / 6.0 + mu2 * mu2 / 120.0,
        )
    } else {
        (mu.cosh(), mu.sinh() / mu)
    };
    identity() * ch + xi * sh_over
}

pub fn realify_mat(m: &Mat2, out: &mut Vec<f64>) {
    for r in 0..2 {
        for col in 0..2 {
            out.push(m[(r, col)].re);
            out.push(m[(r, col)].im);
        }
    }
}

pub fn realify_mats(ms: &[Mat2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(8 * ms.len());
    for m in ms {
        realify_mat(m, &mut out);
    }
    out
}

pub fn realify_scalars(zs: &[Complex64]) -> Vec<f64> {
    zs.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Inverse of [`realify_mat`] on an 8-slice.
pub fn mat_from_real(v: &[f64]) -> Mat2 {
    Mat2::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7]))
}

/// Real SVD with singular values sorted in descending order and a full set of
/// right singular vectors (columns of `v`), also when the matrix is wide.
pub struct SortedSvd {
    pub singular_values: Vec<f64>,
    /// `q × q`, column `k` pairs with `singular_values[k]`.
    pub v: DMatrix<f64>,
    /// `m × min(m, q)` left singular vectors, column `k` pairs with `singular_values[k]`.
    pub u: DMatrix<f64>,
}

pub fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let (m, q) = a.shape();
    let padded;
    let work = if m < q {
        let mut p = DMatrix::zeros(q, q);
        p.view_mut((0, 0), (m, q)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let svd = work.clone().svd(true, true);
    let u_full = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let k = sv.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));

    let mut v = DMatrix::zeros(q, q);
    let mut u = DMatrix::zeros(m, m.min(q));
    let mut values = Vec::with_capacity(q);
    for (dst, &src) in idx.iter().enumerate() {
        values.push(sv[src]);
        v.set_column(dst, &vt.row(src).transpose());
        if dst < m.min(q) {
            u.set_column(dst, &u_full.column(src).rows(0, m));
        }
    }
    SortedSvd {
        singular_values: values,
        v,
        u,
    }
}

/// Number of singular values at or above `rel_eps × σ_max`.
pub fn numerical_rank(singular_values: &[f64], rel_eps: f64) -> usize {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .take_while(|&&s| s >= rel_eps * smax)
        .count()
}

/// Orthogonal projector `K K⁺` onto the numerical range of `k`.
pub fn range_projector(k: &DMatrix<f64>, rel_eps: f64) -> DMatrix<f64> {
    let m = k.nrows();
    if k.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, m);
    }
    let svd = sorted_svd(k);
    let r = numerical_rank(&svd.singular_values, rel_eps);
    let ur = svd.u.columns(0, r);
    ur * ur.transpose()
}

/// Minimum-norm least-squares solution of `a x = b` with the same relative
/// rank policy as [`numerical_rank`].
pub fn pinv_solve(a: &DMatrix<f64>, b: &[f64], rel_eps: f64) -> Vec<f64> {
    let svd = sorted_svd(a);
    let r = numerical_rank(&svd.singular_values, rel_eps);
    let bvec = nalgebra::DVector::from_column_slice(b);
    let mut x = nalgebra::DVector::zeros(a.ncols());
    for k in 0..r {
        let coef = svd.u.column(k).dot(&bvec) / svd.singular_values[k];
        x += svd.v.column(k) * coef;
    }
    x.iter().copied().collect()
}

/// Orthogonal projector `B Bᵀ` for a basis with orthonormal columns.
pub fn projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    basis * basis.transpose()
}

/// Largest principal angle between the column spans of two orthonormal bases.
///
/// Computed as `asin ‖(I − B Bᵀ) A‖₂`, which stays accurate for small angles.
/// Subspaces of different dimension are at angle π/2.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() || a.nrows() != b.nrows() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let resid = a - b * (b.transpose() * a);
    let s = resid
        .singular_values()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);
    s.min(1.0).asin()
}

/// Columns are unit coordinate vectors `e_k` for each `k` in `coords`.
pub fn coordinate_basis(dim: usize, coords: &[usize]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(dim, coords.len());
    for (j, &k) in coords.iter().enumerate() {
        b[(k, j)] = 1.0;
    }
    b
}
