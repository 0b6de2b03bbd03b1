mod common;

use isofol::detector::*;
use isofol::family::ParameterFamily;
use isofol::linalg::max_principal_angle;
use isofol::sampling::{seeded_samples, Domain};
use isofol::torus::*;
use isofol::Error;

use common::torus_samples;

fn standard() -> Vec<f64> {
    TorusFamily::point(&TorusFoliation::standard()).unwrap()
}

#[test]
fn framed_map_at_standard_sample() {
    assert_eq!(framed_map(&TorusFamily, &standard()).unwrap(), vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn kernels_at_standard_sample() {
    let framed = kernel_at(&TorusFamily, &standard(), KernelMode::Framed, 1e-5, 1e-6).unwrap();
    assert_eq!(framed.kernel_dimension(), 10);
    assert!(framed.complex_structure);
    let class = kernel_at(&TorusFamily, &standard(), KernelMode::Class, 1e-5, 1e-6).unwrap();
    assert_eq!(class.kernel_dimension(), 12);
    assert_eq!(class.rank, 6);
    assert!(class.complex_structure);
    let ak = analytic_kernel(&TorusFoliation::standard()).unwrap();
    assert!(max_principal_angle(&class.basis_matrix(), &ak) < 1e-6);
}

#[test]
fn class_rank_is_constant() {
    let samples = torus_samples(20, 31);
    let map = rank_scan(&TorusFamily, &samples, KernelMode::Class, 1e-5, 1e-6).unwrap();
    assert_eq!(map.generic_rank, 6);
    assert!(map.drops.is_empty());
    assert_eq!(map.failures, 0);
    let json = serde_json::to_string(&map).unwrap();
    assert!(json.contains("\"generic_rank\":6"));
}

#[test]
fn kernel_is_integrable() {
    for tau in torus_samples(2, 32) {
        let r = frobenius_residual(&TorusFamily, &tau, KernelMode::Class, 1e-5, 1e-6).unwrap();
        assert!(r < 1e-5, "{r:e}");
    }
}

#[test]
fn leaf_trace_preserves_first_integrals() {
    let tau0 = torus_samples(1, 33).remove(0);
    let f0 = first_integrals(&TorusFamily::foliation(&tau0).unwrap()).unwrap();
    let t = leaf_trace(&TorusFamily, &tau0, &DirectionSelector::Default, 1e-3, 30, KernelMode::Class, 1e-5, 1e-6)
        .unwrap();
    assert_eq!(t.points.len(), 31);
    for p in &t.points {
        let f = first_integrals(&TorusFamily::foliation(p).unwrap()).unwrap();
        for k in 0..3 {
            assert!((f[k] - f0[k]).norm() < 1e-6);
        }
    }
}

#[test]
fn explicit_direction_is_followed() {
    // joint lattice scaling lies in the class kernel but not the framed one
    let tau0 = standard();
    let mut dir = vec![0.0; 18];
    dir[..16].copy_from_slice(&tau0[..16]);
    let t = leaf_trace(&TorusFamily, &tau0, &DirectionSelector::Vector(dir), 1e-2, 5, KernelMode::Class, 1e-5, 1e-6)
        .unwrap();
    assert_eq!(t.points.len(), 6);
    assert!(t.drift.iter().all(|&d| d < 1e-10));
    // a Jacobian row is normal to the framed kernel
    let row: Vec<f64> = jacobian(&TorusFamily, &tau0, 1e-5).unwrap().row(0).iter().copied().collect();
    let r = leaf_trace(&TorusFamily, &tau0, &DirectionSelector::Vector(row), 1e-2, 5, KernelMode::Framed, 1e-5, 1e-6);
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn near_degenerate_box_fails_to_sample() {
    // every lattice vector confined to a tiny box around (1, 0)
    let mut boxes = Vec::new();
    for _ in 0..4 {
        boxes.extend([[1.0, 1.0 + 1e-9], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]);
    }
    boxes.extend([[1.0, 1.0], [0.0, 0.0]]);
    let r = seeded_samples(&Domain::new(boxes).unwrap(), |t| TorusFamily.admissible(t), 5, 42);
    assert!(matches!(r, Err(Error::Sampling { .. })));
}
