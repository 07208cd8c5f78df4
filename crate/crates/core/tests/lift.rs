use nalgebra::DMatrix;
use qbmor_core::models::{chafee_infante, fitzhugh_nagumo, CubicFhn};
use qbmor_core::signals::InputSignal;
use qbmor_core::simulate::{simulate, SimOptions};

/// `max_t ‖z − v∘v‖∞ / (1 + ‖v‖∞²)` for the lifted block `z` of `v`.
fn lift_residual(states: &DMatrix<f64>, v_off: usize, z_off: usize, k: usize) -> f64 {
    let mut worst = 0.0f64;
    for col in states.column_iter() {
        let v = col.rows(v_off, k);
        let z = col.rows(z_off, k);
        let vmax = v.amax();
        let err = (0..k).map(|i| (z[i] - v[i] * v[i]).abs()).fold(0.0, f64::max);
        worst = worst.max(err / (1.0 + vmax * vmax));
    }
    worst
}

fn with_states() -> SimOptions {
    SimOptions { store_states: true, ..SimOptions::default() }
}

#[test]
fn chafee_infante_lift_is_preserved() {
    let k = 100;
    let sys = chafee_infante(k).unwrap();
    for u in [InputSignal::CiU1, InputSignal::CiU2] {
        let tr = simulate(&sys, &u, 10.0, 500, &with_states()).unwrap();
        let r = lift_residual(tr.states.as_ref().unwrap(), 0, k, k);
        println!("{}: lift residual {r:.2e}", u.name());
        assert!(r <= 1e-6);
    }
}

#[test]
fn fitzhugh_nagumo_lift_is_preserved() {
    let k = 50;
    let sys = fitzhugh_nagumo(k).unwrap();
    for u in [InputSignal::FhnI0Sin, InputSignal::FhnI0Bump] {
        let tr = simulate(&sys, &u, 10.0, 500, &with_states()).unwrap();
        let r = lift_residual(tr.states.as_ref().unwrap(), 0, 2 * k, k);
        println!("{}: lift residual {r:.2e}", u.name());
        assert!(r <= 1e-6);
    }
}

#[test]
fn lifted_fhn_tracks_cubic_model() {
    let k = 10;
    let lifted = fitzhugh_nagumo(k).unwrap();
    let cubic = CubicFhn::new(k).unwrap();
    let tight = SimOptions { rtol: 1e-10, atol: 1e-12, ..SimOptions::default() };
    for u in [InputSignal::FhnI0Sin, InputSignal::FhnI0Bump] {
        let a = simulate(&lifted, &u, 10.0, 200, &tight).unwrap();
        let b = simulate(&cubic, &u, 10.0, 200, &tight).unwrap();
        let scale = b.outputs.amax();
        let diff = (&a.outputs - &b.outputs).amax() / scale;
        println!("{}: lifted vs cubic {diff:.2e}", u.name());
        assert!(diff <= 1e-5);
    }
}
