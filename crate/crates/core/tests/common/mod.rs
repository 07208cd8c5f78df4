#![allow(dead_code)]

use nalgebra::DMatrix;
use qbmor_core::{Hessian, QBSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn scaled(m: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let s = m.norm();
    if s > 0.0 {
        m * (target / s)
    } else {
        m
    }
}

/// Stable `A`: negative definite symmetric part plus a skew part.
pub fn stable_a(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let s = normal(rng, n, n);
    let g = normal(rng, n, n);
    -(&s * s.transpose()) / (n as f64) - DMatrix::identity(n, n) + (&g - g.transpose()) * 0.5
}

/// Random stable QB system with `‖H‖ = hn`, `‖N_k‖ = nn`.
pub fn random_qb(seed: u64, n: usize, m: usize, p: usize, hn: f64, nn: f64) -> QBSystem {
    let mut r = rng(seed);
    let a = stable_a(&mut r, n);
    let h = scaled(normal(&mut r, n, n * n), hn);
    let n_mats = (0..m).map(|_| scaled(normal(&mut r, n, n), nn)).collect();
    let b = normal(&mut r, n, m);
    let c = normal(&mut r, p, n);
    QBSystem::new(a, Hessian::dense(h).unwrap(), n_mats, b, c, None).unwrap()
}

pub fn random_linear(seed: u64, n: usize, m: usize, p: usize) -> QBSystem {
    random_qb(seed, n, m, p, 0.0, 0.0)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
