mod common;

use common::random_linear;
use nalgebra::DMatrix;
use qbmor_core::diagnostics::residuals;
use qbmor_core::irka::{tqb_irka, IrkaConfig, InitKind};
use qbmor_core::C64;

fn rel_c(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

#[test]
fn fixed_point_is_hermite_interpolant() {
    for seed in 0..5u64 {
        let (n, m, p, r) = (20, 1 + seed as usize % 2, 1 + seed as usize % 2, 2 + seed as usize % 3);
        let sys = random_linear(600 + seed, n, m, p);
        let mut cfg = IrkaConfig::new(r);
        cfg.tol = 1e-12;
        cfg.maxit = 500;
        cfg.init = InitKind::Random(seed);
        let (red, _, rep) = tqb_irka(&sys, &cfg).unwrap();
        println!("seed {seed}: {} iterations, converged {}", rep.iterations, rep.converged);
        assert!(rep.converged);
        let df = red.diagonal_form().unwrap();
        let rs = red.system();
        let mut worst = 0.0f64;
        for (i, lam) in df.lambda.iter().enumerate() {
            let s = -lam;
            let bt = DMatrix::from_fn(m, 1, |k, _| df.b_t[(i, k)]);
            let ct = DMatrix::from_fn(p, 1, |k, _| df.c_t[(k, i)]);
            let g = sys.transfer(s).unwrap();
            let gr = rs.transfer(s).unwrap();
            let d = sys.transfer_derivative(s).unwrap();
            let dr = rs.transfer_derivative(s).unwrap();
            worst = worst.max(rel_c(&(&g * &bt), &(&gr * &bt)));
            worst = worst.max(rel_c(&(ct.transpose() * &g), &(ct.transpose() * &gr)));
            let dv = ct.transpose() * &d * &bt;
            let dvr = ct.transpose() * &dr * &bt;
            worst = worst.max(rel_c(&dv, &dvr));
        }
        println!("worst interpolation mismatch {worst:.2e}");
        assert!(worst <= 1e-6);
        let res = residuals(&sys, &red).unwrap();
        println!("{:?}", res.measures());
        assert!(res.e_c <= 1e-8 && res.e_b <= 1e-8 && res.e_lambda <= 1e-8);
    }
}
