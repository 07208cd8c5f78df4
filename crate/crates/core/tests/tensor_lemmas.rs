mod common;

use common::{normal, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qbmor_core::kron::{commutation_matrix, error_system_perm, kron_vec, perm_m, perm_t};
use qbmor_core::tensor::convert;
use qbmor_core::Hessian;
use rand::Rng;

const CASES: u32 = 128;

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn sym_hessian(seed: u64, n: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let h = Hessian::dense(normal(&mut r, n, n * n)).unwrap();
    h.symmetrize().to_dense()
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn rel_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Integer-valued entries keep products exact.
fn int_matrix(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
    let mut g = rng(seed);
    DMatrix::from_fn(r, c, |_, _| g.random_range(-9..=9) as f64)
}

fn selector(n: usize, r: usize, first: bool) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(if first { n } else { r }, n + r);
    if first {
        s.view_mut((0, 0), (n, n)).fill_with_identity();
    } else {
        s.view_mut((0, n), (r, r)).fill_with_identity();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn trace_invariant_across_modes(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let h = normal(&mut r, n, n * n);
        let g = normal(&mut r, n, n * n);
        let d = (n, n, n);
        let t1 = (&h * g.transpose()).trace();
        for mu in [2u8, 3] {
            let tm = (convert(&h, d, 1, mu) * convert(&g, d, 1, mu).transpose()).trace();
            prop_assert!(rel_scalar(t1, tm) <= 1e-13 || (t1 - tm).abs() <= 1e-13);
        }
    }

    #[test]
    fn symmetric_hessian_swaps_kronecker_factors(seed in any::<u64>(), n in 1usize..=4) {
        let h1 = sym_hessian(seed, n);
        let mut r = rng(seed ^ 0x5eed);
        let b = normal(&mut r, n, n);
        let c = normal(&mut r, n, n);
        let lhs = &h1 * b.kronecker(&c) * h1.transpose();
        let rhs = &h1 * c.kronecker(&b) * h1.transpose();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-13);
    }

    #[test]
    fn symmetric_hessian_trace_cycle(seed in any::<u64>(), n in 1usize..=4) {
        let h1 = sym_hessian(seed, n);
        let h2 = convert(&h1, (n, n, n), 1, 2);
        let mut r = rng(seed ^ 0xabc);
        let a = normal(&mut r, n, n);
        let b = normal(&mut r, n, n);
        let c = normal(&mut r, n, n);
        let x = vec_of(&b).dot(&vec_of(&(&h2 * c.kronecker(&a) * h2.transpose())));
        let y = vec_of(&c).dot(&vec_of(&(&h2 * b.kronecker(&a) * h2.transpose())));
        let z = vec_of(&a).dot(&vec_of(&(&h1 * c.kronecker(&b) * h1.transpose())));
        let scale = x.abs().max(y.abs()).max(z.abs()).max(1.0);
        prop_assert!((x - y).abs() <= 1e-13 * scale);
        prop_assert!((x - z).abs() <= 1e-13 * scale);
    }

    #[test]
    fn symmetrized_modes_two_and_three_coincide(seed in any::<u64>(), n in 1usize..=4) {
        let h1 = sym_hessian(seed, n);
        let d = (n, n, n);
        prop_assert!(rel_diff(&convert(&h1, d, 1, 2), &convert(&h1, d, 1, 3)) <= 1e-15);
    }

    #[test]
    fn perm_t_vectorizes_kronecker_exactly(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4) {
        let mut r = rng(seed);
        let x = normal(&mut r, n, m);
        let y = normal(&mut r, n, m);
        let lhs = vec_of(&x.kronecker(&y));
        let rhs = perm_t(n, m).apply(&kron_vec(&vec_of(&x), &vec_of(&y)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn commutation_swaps_exactly(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4) {
        let mut r = rng(seed);
        let u = DVector::from_column_slice(normal(&mut r, n, 1).as_slice());
        let v = DVector::from_column_slice(normal(&mut r, m, 1).as_slice());
        prop_assert_eq!(commutation_matrix(n, m).apply(&kron_vec(&u, &v)), kron_vec(&v, &u));
    }

    #[test]
    fn perm_m_block_diagonalizes(seed in any::<u64>(), p in 1usize..=4, q in 1usize..=4, rr in 1usize..=4) {
        let a = int_matrix(seed, p, p);
        let b = int_matrix(seed + 1, q, q);
        let c = int_matrix(seed + 2, rr, rr);
        let mut bc = DMatrix::zeros(q + rr, q + rr);
        bc.view_mut((0, 0), (q, q)).copy_from(&b);
        bc.view_mut((q, q), (rr, rr)).copy_from(&c);
        let m = perm_m(p, q, rr).to_dense();
        let lhs = m.transpose() * a.kronecker(&bc) * &m;
        let ab = a.kronecker(&b);
        let ac = a.kronecker(&c);
        let mut rhs = DMatrix::zeros(p * (q + rr), p * (q + rr));
        rhs.view_mut((0, 0), (p * q, p * q)).copy_from(&ab);
        rhs.view_mut((p * q, p * q), (p * rr, p * rr)).copy_from(&ac);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn error_system_selection_identities(seed in any::<u64>(), n in 1usize..=3, r in 1usize..=3) {
        let w = n + r;
        let x = int_matrix(seed, w * w, 1).column(0).into_owned();
        let y = int_matrix(seed + 7, w * w, 1).column(0).into_owned();
        let f = selector(n, r, true).kronecker(&selector(n, r, true));
        let fh = selector(n, r, false).kronecker(&selector(n, r, false));
        let mm = error_system_perm(n, r).to_dense();
        let z = perm_t(w, w).to_dense() * mm.kronecker(&mm) * kron_vec(&x, &y);
        let part = |v: &DVector<f64>, k: usize| -> DVector<f64> {
            let off = [0, n * n, n * n + n * r, n * n + 2 * n * r][k];
            let len = [n * n, n * r, n * r, r * r][k];
            v.rows(off, len).into_owned()
        };
        let lhs_mixed = fh.kronecker(&f) * &z;
        let rhs_mixed = perm_t(n, r).apply(&kron_vec(&part(&x, 2), &part(&y, 2)));
        prop_assert_eq!(lhs_mixed, rhs_mixed);
        let lhs_hat = fh.kronecker(&fh) * &z;
        let rhs_hat = perm_t(r, r).apply(&kron_vec(&part(&x, 3), &part(&y, 3)));
        prop_assert_eq!(lhs_hat, rhs_hat);
    }
}

#[test]
fn symmetrize_is_idempotent() {
    for seed in 0..100 {
        let n = 1 + (seed as usize % 4);
        let mut r = rng(seed);
        let h = Hessian::dense(normal(&mut r, n, n * n)).unwrap();
        let once = h.symmetrize().to_dense();
        let twice = Hessian::dense(once.clone()).unwrap().symmetrize().to_dense();
        assert!(rel_diff(&once, &twice) <= 1e-15);
        let x = DVector::from_column_slice(normal(&mut r, n, 1).as_slice());
        let q0 = h.apply(&x, &x);
        let q1 = &once * kron_vec(&x, &x);
        assert!((&q0 - q1).norm() <= 1e-13 * q0.norm().max(1.0));
    }
}
