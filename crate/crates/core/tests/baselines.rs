use qbmor_core::bt::{balanced_truncation, balanced_truncation_scaled};
use qbmor_core::gramians::truncated_h2_error;
use qbmor_core::irka::{tqb_irka, IrkaConfig};
use qbmor_core::models::chafee_infante;
use qbmor_core::sweep::error_sweep;

const GAMMA: f64 = 0.01;

#[test]
fn balanced_truncation_against_irka() {
    let sys = chafee_infante(100).unwrap();
    let (bt, hsv) = balanced_truncation_scaled(&sys, 10, GAMMA).unwrap();
    assert!(hsv.windows(2).all(|w| w[0] >= w[1]));
    assert!(bt.is_hurwitz());
    let mut cfg = IrkaConfig::new(10);
    cfg.gamma = GAMMA;
    let (red, _, _) = tqb_irka(&sys, &cfg).unwrap();
    let e_bt = truncated_h2_error(&sys, &bt).unwrap().value;
    let e_irka = truncated_h2_error(&sys, &red).unwrap().value;
    println!("BT {e_bt:.3e}  TQB-IRKA {e_irka:.3e}");
    assert!(e_bt <= 10.0 * e_irka);
}

#[test]
fn unscaled_gramians_favour_the_quadratic_term() {
    let sys = chafee_infante(100).unwrap();
    let (plain, _) = balanced_truncation(&sys, 10).unwrap();
    let (scaled, _) = balanced_truncation_scaled(&sys, 10, GAMMA).unwrap();
    let e_plain = truncated_h2_error(&sys, &plain).unwrap().value;
    let e_scaled = truncated_h2_error(&sys, &scaled).unwrap().value;
    println!("unscaled {e_plain:.3e} scaled {e_scaled:.3e}");
    assert!(e_scaled < e_plain);
}

#[test]
fn irka_error_decays_with_order() {
    let sys = chafee_infante(100).unwrap();
    let mut cfg = IrkaConfig::new(2);
    cfg.gamma = GAMMA;
    let orders: Vec<usize> = (2..=10).collect();
    let pts = error_sweep(&sys, &orders, &cfg, 0, 3).unwrap();
    let errs: Vec<f64> = pts.iter().map(|p| p.error).collect();
    println!("{:?}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>());
    assert!(pts.iter().all(|p| p.converged));
    let violations: Vec<f64> = errs.windows(2).filter(|w| w[1] > w[0]).map(|w| w[1] / w[0] - 1.0).collect();
    assert!(violations.len() <= 1 && violations.iter().all(|&v| v <= 0.1), "{violations:?}");
}
