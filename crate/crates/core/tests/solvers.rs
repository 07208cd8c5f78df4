mod common;

use common::{normal, rng, stable_a};
use nalgebra::{DMatrix, DVector};
use qbmor_core::equations::{solve_lyapunov, solve_shifted_general, solve_sylvester_shifted, LyapunovSolver, ShiftedSolver};
use qbmor_core::spectral::spectral_decompose;
use qbmor_core::C64;
use rand::Rng;

const SIZES: [usize; 4] = [3, 20, 80, 200];

fn lyap_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let r = a * x + x * a.transpose() + q;
    r.norm() / (2.0 * a.norm() * x.norm() + q.norm())
}

fn shifts(seed: u64, r: usize) -> Vec<C64> {
    let mut g = rng(seed);
    let mut lam = Vec::new();
    while lam.len() < r {
        let re = -g.random_range(0.1..5.0);
        if lam.len() + 2 <= r && g.random_bool(0.5) {
            let im = g.random_range(0.1..3.0);
            lam.push(C64::new(re, -im));
            lam.push(C64::new(re, im));
        } else {
            lam.push(C64::new(re, 0.0));
        }
    }
    lam
}

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

#[test]
fn lyapunov_residuals() {
    for (i, &n) in SIZES.iter().enumerate() {
        let mut g = rng(10 + i as u64);
        let a = stable_a(&mut g, n);
        let f = normal(&mut g, n, 3);
        let q = &f * f.transpose();
        let s = LyapunovSolver::new(&a).unwrap();
        let x = s.solve(&q);
        let xt = s.solve_transposed(&q);
        let r1 = lyap_residual(&a, &x, &q);
        let r2 = lyap_residual(&a.transpose(), &xt, &q);
        println!("n = {n}: residuals {r1:.2e} {r2:.2e}");
        assert!(r1 <= 1e-9 && r2 <= 1e-9);
        assert!((&x - x.transpose()).norm() <= 1e-12 * x.norm());
    }
}

#[test]
fn lyapunov_matches_kronecker_oracle() {
    for seed in 0..5 {
        let n = 6;
        let mut g = rng(seed);
        let a = stable_a(&mut g, n);
        let q0 = normal(&mut g, n, n);
        let q = &q0 + q0.transpose();
        let id = DMatrix::<f64>::identity(n, n);
        let op = id.kronecker(&a) + a.kronecker(&id);
        let rhs = -DVector::from_column_slice(q.as_slice());
        let vx = op.lu().solve(&rhs).unwrap();
        let oracle = DMatrix::from_column_slice(n, n, vx.as_slice());
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!((&x - &oracle).norm() <= 1e-11 * oracle.norm());
    }
}

#[test]
fn unstable_lyapunov_rejected() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5]));
    assert!(solve_lyapunov(&a, &DMatrix::identity(2, 2)).is_err());
}

#[test]
fn shifted_sylvester_residuals() {
    for (i, &n) in SIZES.iter().enumerate() {
        let mut g = rng(40 + i as u64);
        let a = stable_a(&mut g, n);
        let lam = shifts(i as u64, 6);
        let rhs = to_c(&normal(&mut g, n, lam.len()));
        let d = DMatrix::from_diagonal(&DVector::from_vec(lam.clone()));
        let ac = to_c(&a);

        let v = solve_sylvester_shifted(&a, &lam, &rhs).unwrap();
        let res = (-&v * &d - &ac * &v - &rhs).norm() / (ac.norm() * v.norm() + rhs.norm());
        let s = ShiftedSolver::new(&a, None).unwrap();
        let w = s.solve(&lam, &rhs, true).unwrap();
        let res_t = (-&w * &d - ac.transpose() * &w - &rhs).norm() / (ac.norm() * w.norm() + rhs.norm());
        let m = -&a;
        let u = solve_shifted_general(&m, &lam, &rhs).unwrap();
        let res_g = (&u * &d + to_c(&m) * &u - &rhs).norm() / (ac.norm() * u.norm() + rhs.norm());
        println!("n = {n}: {res:.2e} {res_t:.2e} {res_g:.2e}");
        assert!(res <= 1e-9 && res_t <= 1e-9 && res_g <= 1e-9);
    }
}

#[test]
fn descriptor_shifted_solve() {
    let n = 30;
    let mut g = rng(77);
    let a = stable_a(&mut g, n);
    let e = DMatrix::<f64>::identity(n, n) + normal(&mut g, n, n) * 0.05;
    let lam = shifts(9, 4);
    let rhs = to_c(&normal(&mut g, n, 4));
    let v = ShiftedSolver::new(&a, Some(&e)).unwrap().solve(&lam, &rhs, false).unwrap();
    let d = DMatrix::from_diagonal(&DVector::from_vec(lam));
    let res = (-to_c(&e) * &v * &d - to_c(&a) * &v - &rhs).norm() / rhs.norm();
    assert!(res <= 1e-9);
}

#[test]
fn spectral_reconstruction() {
    for (i, &n) in SIZES.iter().enumerate() {
        let mut g = rng(70 + i as u64);
        let a = stable_a(&mut g, n);
        let sf = spectral_decompose(&a).unwrap();
        let rec = (sf.reconstruct() - &a).norm() / a.norm();
        let res = sf.residual(&a) / (a.norm() * sf.r.norm());
        println!("n = {n}: reconstruction {rec:.2e} residual {res:.2e} cond {:.2e}", sf.cond);
        assert!(rec <= 1e-9 && res <= 1e-9);
        for w in sf.lambda.windows(2) {
            assert!(w[0].re <= w[1].re);
        }
    }
}
