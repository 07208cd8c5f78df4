use std::time::Instant;

use qbmor_core::diagnostics::residuals;
use qbmor_core::gramians::truncated_h2_error;
use qbmor_core::irka::{tqb_irka, IrkaConfig};
use qbmor_core::models::chafee_infante;
use qbmor_core::rescale;
use qbmor_core::signals::InputSignal;
use qbmor_core::simulate::{output_errors, simulate, SimOptions};

#[test]
fn desk_scale_reduction() {
    let t0 = Instant::now();
    let sys = chafee_infante(100).unwrap();
    let mut cfg = IrkaConfig::new(10);
    cfg.gamma = 0.01;
    let (red, _, rep) = tqb_irka(&sys, &cfg).unwrap();
    println!("{} iterations, converged {}", rep.iterations, rep.converged);
    assert!(rep.converged && rep.iterations <= 30);
    assert!(red.is_hurwitz());

    let res = residuals(&rescale(&sys, cfg.gamma).unwrap(), &red.rescaled(cfg.gamma).unwrap()).unwrap();
    println!("{:?} {:?}", res.measures(), res.degraded);
    for (name, e) in res.measures() {
        assert!(e <= 1e-6, "{name} = {e:e}");
    }
    println!("truncated H2 error {:.3e}", truncated_h2_error(&sys, &red).unwrap().value);

    for (u, bound) in [(InputSignal::CiU1, 1e-2), (InputSignal::CiU2, 5e-2)] {
        let y = simulate(&sys, &u, 10.0, 500, &SimOptions::default()).unwrap();
        let yr = simulate(&red, &u, 10.0, 500, &SimOptions::default()).unwrap();
        let (mean, max) = output_errors(&y, &yr).unwrap();
        println!("{}: mean_rel {mean:.3e} max_rel {max:.3e}", u.name());
        assert!(mean <= bound);
    }
    let wall = t0.elapsed();
    println!("wall time {wall:?}");
    assert!(wall.as_secs() < 300);
}
