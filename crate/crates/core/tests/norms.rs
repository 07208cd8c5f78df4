mod common;

use std::num::NonZeroUsize;

use common::{random_linear, random_qb, rel};
use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use qbmor_core::gramians::{h2_norm, quadratic_gramians, truncated_gramians, truncated_h2_error, truncated_h2_norm};
use qbmor_core::{QBSystem, ReducedModel};

fn sizes(seed: u64, max: usize) -> usize {
    2 + (seed as usize * 7) % (max - 1)
}

#[test]
fn truncated_trace_duality() {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let n = sizes(seed, 20);
        let sys = random_qb(1000 + seed, n, 1 + (seed as usize % 2), 1 + (seed as usize % 3), 0.8, 0.8);
        let rep = truncated_h2_norm(&sys).unwrap();
        worst = worst.max(rep.rel_gap());
    }
    println!("worst truncated gap {worst:.2e}");
    assert!(worst <= 1e-7);
}

#[test]
fn quadratic_trace_duality() {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let n = sizes(seed, 20);
        let sys = random_qb(2000 + seed, n, 1 + (seed as usize % 2), 1 + (seed as usize % 3), 0.5, 0.5);
        let rep = h2_norm(&sys, 1e-12, 200).unwrap();
        worst = worst.max(rep.rel_gap());
    }
    println!("worst quadratic gap {worst:.2e}");
    assert!(worst <= 1e-6);
}

#[test]
fn gramian_residuals_and_order() {
    let sys = random_qb(3, 8, 2, 2, 0.7, 0.7);
    let g = truncated_gramians(&sys).unwrap();
    let a = sys.a();
    let lyap = |x: &DMatrix<f64>| a * x + x * a.transpose();
    let bb = sys.b() * sys.b().transpose();
    let r = (lyap(&g.p_l) + &bb).norm() / (2.0 * a.norm() * g.p_l.norm() + bb.norm());
    assert!(r <= 1e-9);
    let h = sys.h().to_dense();
    let mut src = &h * g.p_l.kronecker(&g.p_l) * h.transpose() + &bb;
    for nk in sys.n_mats() {
        src += nk * &g.p_l * nk.transpose();
    }
    let r = (lyap(&g.p_t) + &src).norm() / (2.0 * a.norm() * g.p_t.norm() + src.norm());
    assert!(r <= 1e-9);
    let gap = (&g.p_t - &g.p_l).symmetric_eigenvalues().min();
    assert!(gap >= -1e-10 * g.p_t.norm());
}

#[test]
fn scalar_quadratic_fixed_point() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let sys = QBSystem::new(
        -one.clone(),
        qbmor_core::Hessian::dense(DMatrix::from_element(1, 1, 0.1)).unwrap(),
        vec![],
        one.clone(),
        one,
        None,
    )
    .unwrap();
    let g = quadratic_gramians(&sys, 1e-14, 100).unwrap();
    let exact = (2.0 - (4.0f64 - 0.04).sqrt()) / 0.02;
    assert!(rel(g.p[(0, 0)], exact) <= 1e-12);
    assert!(rel(h2_norm(&sys, 1e-14, 100).unwrap().value, exact.sqrt()) <= 1e-12);
}

#[test]
fn linear_degeneration_of_norms() {
    let sys = random_linear(5, 6, 2, 1);
    let g = truncated_gramians(&sys).unwrap();
    assert!((&g.p_t - &g.p_l).norm() <= 1e-14 * g.p_l.norm());
    let lin = (sys.c() * &g.p_l * sys.c().transpose()).trace().sqrt();
    assert!(rel(truncated_h2_norm(&sys).unwrap().value, lin) <= 1e-14);
    assert_eq!(quadratic_gramians(&sys, 1e-12, 10).unwrap().iterations_p, 1);
}

#[test]
fn error_of_exact_copy_vanishes() {
    let sys = random_qb(11, 5, 1, 1, 0.5, 0.5);
    let copy = ReducedModel::from_system(sys.clone()).unwrap();
    let e = truncated_h2_error(&sys, &copy).unwrap();
    let s = truncated_h2_norm(&sys).unwrap().value;
    assert!(e.value <= 1e-7 * s, "{} vs {}", e.value, s);
}

#[test]
fn error_symmetric_in_operands() {
    let a = random_qb(12, 4, 1, 1, 0.5, 0.5);
    let b = random_qb(13, 4, 1, 1, 0.5, 0.5);
    let ab = truncated_h2_error(&a, &ReducedModel::from_system(b.clone()).unwrap()).unwrap();
    let ba = truncated_h2_error(&b, &ReducedModel::from_system(a).unwrap()).unwrap();
    assert!(rel(ab.value, ba.value) <= 1e-10);
}

/// Composite Gauss-Legendre rule on `[0, t_end]`.
fn composite(panels: usize, t_end: f64, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let w = t_end / panels as f64;
    let mut out = Vec::new();
    for k in 0..panels {
        let a = k as f64 * w;
        for &(x, wt) in rule.as_node_weight_pairs() {
            out.push((a + 0.5 * w * (x + 1.0), 0.5 * w * wt));
        }
    }
    out
}

/// Squared truncated norm from the three leading kernels on a tensor grid.
/// The grid sum factors over the time axes, so the inner axes collapse into
/// the quadrature moment `Σ w g gᵀ`.
fn kernel_quadrature(sys: &QBSystem, grid: &[(f64, f64)]) -> f64 {
    let a = sys.a();
    let c = sys.c();
    let exps: Vec<(DMatrix<f64>, f64)> = grid.iter().map(|&(t, w)| ((a * t).exp(), w)).collect();
    let mut moment = DMatrix::zeros(sys.n(), sys.n());
    let mut k1 = 0.0;
    for (e, w) in &exps {
        let g = e * sys.b();
        k1 += w * (c * &g).norm_squared();
        moment += &g * g.transpose() * *w;
    }
    let h = sys.h().to_dense();
    let mut inner = &h * moment.kronecker(&moment) * h.transpose();
    for nk in sys.n_mats() {
        inner += nk * &moment * nk.transpose();
    }
    let k23: f64 = exps.iter().map(|(e, w)| w * (c * e * &inner * e.transpose() * c.transpose()).trace()).sum();
    k1 + k23
}

fn oracle(sys: &QBSystem) -> f64 {
    let slowest = sys.a().complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let t_end = 40.0 / slowest.abs();
    let rule = GaussLegendre::new(NonZeroUsize::new(16).unwrap());
    let mut panels = 8;
    let mut prev = kernel_quadrature(sys, &composite(panels, t_end, &rule));
    loop {
        panels *= 2;
        let next = kernel_quadrature(sys, &composite(panels, t_end, &rule));
        if (next - prev).abs() <= 1e-8 * next || panels >= 1024 {
            return next.sqrt();
        }
        prev = next;
    }
}

#[test]
fn truncated_norm_matches_kernel_quadrature() {
    for seed in 0..10 {
        let n = 1 + seed as usize % 4;
        let sys = random_qb(4000 + seed, n, 1 + seed as usize % 2, 1 + seed as usize % 2, 0.8, 0.8);
        let q = oracle(&sys);
        let v = truncated_h2_norm(&sys).unwrap().value;
        println!("n = {n}: gramian {v:.12e} quadrature {q:.12e} rel {:.2e}", rel(v, q));
        assert!(rel(v, q) <= 1e-6);
    }
}
