mod common;

use std::f64::consts::PI;

use isofol::detector::*;
use isofol::family::{Eq11Family, ParameterFamily};
use isofol::linalg::{c, coordinate_basis, identity, max_principal_angle, nilpotent, realify_mats, I};
use nalgebra::DMatrix;
use num_complex::Complex64;

use common::eq11_generic;

fn u() -> [Complex64; 3] {
    [c(0.0, 0.0), c(1.0, 0.5), c(-0.5, 1.0)]
}

fn family() -> Eq11Family {
    Eq11Family::new(c(-3.0, -2.0), 1e-10)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn framed_map_closed_form() {
    let a = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
    let f = framed_map(&family(), &Eq11Family::point(&a, &u())).unwrap();
    let exact: Vec<_> = a.iter().map(|&ai| identity() + nilpotent() * (2.0 * PI * I * ai)).collect();
    assert!(max_abs_diff(&f, &realify_mats(&exact)) < 1e-8);

    let zero = framed_map(&family(), &Eq11Family::point(&[c(0.0, 0.0); 3], &u())).unwrap();
    assert_eq!(zero, realify_mats(&[identity(); 3]));
}

#[test]
fn jacobian_columns() {
    let a = [c(1.0, 0.2), c(-0.7, 0.4), c(0.5, -1.1)];
    let j = jacobian(&family(), &Eq11Family::point(&a, &u()), 1e-5).unwrap();
    let o = isofol::linalg::Mat2::zeros();
    for i in 0..3 {
        let mut blocks = [o; 3];
        blocks[i] = nilpotent() * (2.0 * PI * I);
        let col: Vec<f64> = j.column(2 * i).iter().copied().collect();
        assert!(max_abs_diff(&col, &realify_mats(&blocks)) < 1e-6, "re a{}", i + 1);
        blocks[i] = nilpotent() * c(-2.0 * PI, 0.0);
        let col: Vec<f64> = j.column(2 * i + 1).iter().copied().collect();
        assert!(max_abs_diff(&col, &realify_mats(&blocks)) < 1e-6, "im a{}", i + 1);
    }
    for k in Eq11Family::u_coordinates() {
        assert!(j.column(k).abs().max() < 1e-6, "column {k}");
    }
}

#[test]
fn framed_kernel_is_complex_u_space() {
    let a = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
    let r = kernel_at(&family(), &Eq11Family::point(&a, &u()), KernelMode::Framed, 1e-5, 1e-6).unwrap();
    assert_eq!(r.kernel_dimension(), 6);
    let angle = max_principal_angle(&r.basis_matrix(), &coordinate_basis(12, &Eq11Family::u_coordinates()));
    assert!(angle < 1e-6, "{angle:e}");
    assert!(r.complex_structure);
}

/// `u`-coordinates plus the real and imaginary radial directions `δa = a`, `δa = i a`.
fn radial_oracle(a: &[Complex64; 3]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(12, 8);
    for (col, k) in Eq11Family::u_coordinates().into_iter().enumerate() {
        b[(k, col)] = 1.0;
    }
    for (col, s) in [(6, c(1.0, 0.0)), (7, I)] {
        for (i, ai) in a.iter().enumerate() {
            let v = s * ai;
            b[(2 * i, col)] = v.re;
            b[(2 * i + 1, col)] = v.im;
        }
    }
    b.qr().q()
}

#[test]
fn class_kernel_adds_radial_direction() {
    let a = [c(1.0, 0.0); 3];
    let r = kernel_at(&family(), &Eq11Family::point(&a, &u()), KernelMode::Class, 1e-5, 1e-6).unwrap();
    assert_eq!(r.kernel_dimension(), 8);
    let angle = max_principal_angle(&r.basis_matrix(), &radial_oracle(&a));
    assert!(angle < 1e-6, "{angle:e}");
    assert!(r.complex_structure);

    let framed = kernel_at(&family(), &Eq11Family::point(&a, &u()), KernelMode::Framed, 1e-5, 1e-6).unwrap();
    let (fb, cb) = (framed.basis_matrix(), r.basis_matrix());
    assert!((&fb - &cb * (cb.transpose() * &fb)).norm() < 1e-8);
}

#[test]
fn class_kernel_on_degenerate_locus() {
    let a = [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
    let r = kernel_at(&family(), &Eq11Family::point(&a, &u()), KernelMode::Class, 1e-5, 1e-6).unwrap();
    let p = r.basis_matrix() * r.basis_matrix().transpose();
    let captured = |k: usize| (p.column(k).norm() - 1.0).abs() < 1e-6;
    let excluded = |k: usize| p.column(k).norm() < 1e-6;
    assert!(captured(4) && captured(5), "d/da3 must be in the class kernel");
    assert!((0..4).all(excluded), "d/da1, d/da2 must stay outside");
    // on this locus the radial direction is d/da3 itself
    assert!(max_principal_angle(&r.basis_matrix(), &radial_oracle(&a)) < 1e-6);
}

#[test]
fn generic_points_match_oracles() {
    let fam = family();
    for tau in eq11_generic(3, 21) {
        let (a, _) = Eq11Family::split(&tau);
        let class = kernel_at(&fam, &tau, KernelMode::Class, 1e-5, 1e-6).unwrap();
        assert!(max_principal_angle(&class.basis_matrix(), &radial_oracle(&a)) < 1e-6);
        assert!(class.kernel_basis.iter().all(|v| v.len() == 12));
    }
}

#[test]
fn leaf_trace_keeps_residues() {
    let a = [c(1.0, 0.3), c(-0.8, 0.5), c(0.6, 1.2)];
    let tau0 = Eq11Family::point(&a, &u());
    let (step, n) = (1e-2, 10);
    let t = leaf_trace(&family(), &tau0, &DirectionSelector::Default, step, n, KernelMode::Framed, 1e-5, 1e-6)
        .unwrap();
    assert_eq!(t.points.len(), n + 1);
    let last = t.points.last().unwrap();
    let a_drift = max_abs_diff(&last[..6], &tau0[..6]);
    assert!(a_drift < step * step * n as f64, "{a_drift:e}");
    let u_moved = max_abs_diff(&last[6..], &tau0[6..]);
    assert!(u_moved > 0.5 * step * n as f64 / 6f64.sqrt(), "{u_moved:e}");
}

#[test]
fn evaluation_is_deterministic() {
    let fam = family();
    let tau = Eq11Family::point(&[c(0.3, 0.1), c(1.0, -1.0), c(0.2, 0.9)], &u());
    assert_eq!(fam.evaluate(&tau).unwrap(), fam.evaluate(&tau).unwrap());
}

#[test]
fn pole_collision_is_a_boundary() {
    let mut uu = u();
    uu[1] = uu[0] + c(1.02e-5, 0.0);
    let tau = Eq11Family::point(&[c(1.0, 0.0); 3], &uu);
    assert!(matches!(jacobian(&family(), &tau, 1e-5), Err(isofol::Error::Boundary { .. })));
}
