//! Balanced truncation with the truncated Gramians.

use nalgebra::DMatrix;

use crate::basis::psd_sqrt_full;
use crate::error::{Error, Result};
use crate::gramians::truncated_gramians;
use crate::system::{project, rescale, QBSystem, ReducedModel};

/// Square-root balancing of `P_T`, `Q_T`: with `L_Qᵀ L_P = U Σ Zᵀ`,
/// `V = L_P Z_r Σ_r^{-1/2}` and `W = L_Q U_r Σ_r^{-1/2}`. Returns the
/// projected model and the full list of singular values.
pub fn balanced_truncation(sys: &QBSystem, r: usize) -> Result<(ReducedModel, Vec<f64>)> {
    balanced_truncation_scaled(sys, r, 1.0)
}

/// Balanced truncation with the Gramians of the system rescaled by `gamma`
/// (`H`, `N_k` scaled by `gamma`); the bases project the original system.
pub fn balanced_truncation_scaled(sys: &QBSystem, r: usize, gamma: f64) -> Result<(ReducedModel, Vec<f64>)> {
    let n = sys.n();
    if r == 0 || r > n {
        return Err(Error::Invalid(format!("reduced order {r} for n = {n}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let g = if gamma == 1.0 { truncated_gramians(sys)? } else { truncated_gramians(&rescale(sys, gamma)?)? };
    let lp = psd_sqrt_full(&g.p_t);
    let lq = psd_sqrt_full(&g.q_t);
    let svd = (lq.transpose() * &lp).svd(true, true);
    let u = svd.u.as_ref().ok_or(Error::SolverBreakdown)?;
    let zt = svd.v_t.as_ref().ok_or(Error::SolverBreakdown)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let hsv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let s1 = hsv[0];
    if let Some(k) = (0..r).find(|&k| !(hsv[k] > 1e-14 * s1) || hsv[k] == 0.0) {
        return Err(Error::RankDeficient(k));
    }
    let mut v = DMatrix::zeros(n, r);
    let mut w = DMatrix::zeros(n, r);
    for (c, &i) in idx.iter().take(r).enumerate() {
        let s = svd.singular_values[i].sqrt();
        v.set_column(c, &(&lp * zt.row(i).transpose() / s));
        w.set_column(c, &(&lq * u.column(i) / s));
    }
    Ok((project(sys, &v, &w)?, hsv))
}
