//! Inputs shared by the benchmarks.

use nalgebra::DMatrix;
use qbmor_core::irka::IrkaConfig;
use qbmor_core::models::chafee_infante;
use qbmor_core::{QBSystem, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scaling factor used for Chafee-Infante runs.
pub const GAMMA: f64 = 0.01;

pub fn normal(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut g))
}

/// Stable `A` with a negative definite symmetric part.
pub fn stable_matrix(seed: u64, n: usize) -> DMatrix<f64> {
    let s = normal(seed, n, n);
    let g = normal(seed + 1, n, n);
    -(&s * s.transpose()) / (n as f64) - DMatrix::identity(n, n) + (&g - g.transpose()) * 0.5
}

pub fn chafee(k: usize) -> Result<QBSystem> {
    chafee_infante(k)
}

pub fn irka_config(r: usize) -> IrkaConfig {
    let mut cfg = IrkaConfig::new(r);
    cfg.gamma = GAMMA;
    cfg
}
