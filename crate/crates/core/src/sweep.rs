//! Truncated H2 error against the reduced order.

use crate::error::Result;
use crate::gramians::truncated_h2_error;
use crate::irka::{tqb_irka, InitKind, IrkaConfig};
use crate::system::{QBSystem, ReducedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub r: usize,
    /// Truncated H2 norm of the error system for the kept run.
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Seed of the random start that was kept.
    pub seed: u64,
}

/// One TQB-IRKA run from random start `seed`, scored by its truncated H2
/// error. Runs that fail or end with an unstable model score `∞`.
fn scored(sys: &QBSystem, cfg: &IrkaConfig, seed: u64) -> Result<(f64, ReducedModel, SweepPoint)> {
    let mut c = cfg.clone();
    c.init = InitKind::Random(seed);
    let (red, _, rep) = tqb_irka(sys, &c)?;
    let error = if red.is_hurwitz() { truncated_h2_error(sys, &red).map(|e| e.value).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    let point = SweepPoint { r: c.r, error, iterations: rep.iterations, converged: rep.converged, seed };
    Ok((error, red, point))
}

/// Best of `starts` random starts (seeds `seed0, seed0 + 1, …`) at order
/// `cfg.r`, ranked by the truncated H2 error. Converged runs beat
/// unconverged ones; ties keep the lower seed.
pub fn best_of_starts(sys: &QBSystem, cfg: &IrkaConfig, seed0: u64, starts: usize) -> Result<(ReducedModel, SweepPoint)> {
    let mut best: Option<(ReducedModel, SweepPoint)> = None;
    for s in 0..starts.max(1) as u64 {
        let (err, red, point) = scored(sys, cfg, seed0.wrapping_add(s))?;
        let better = match &best {
            None => true,
            Some((_, b)) => (point.converged && !b.converged) || (point.converged == b.converged && err < b.error),
        };
        if better {
            best = Some((red, point));
        }
    }
    Ok(best.expect("at least one start"))
}

/// Runs [`best_of_starts`] for every order in `orders`.
pub fn error_sweep(sys: &QBSystem, orders: &[usize], cfg: &IrkaConfig, seed0: u64, starts: usize) -> Result<Vec<SweepPoint>> {
    orders
        .iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.r = r;
            best_of_starts(sys, &c, seed0, starts).map(|(_, p)| p)
        })
        .collect()
}
