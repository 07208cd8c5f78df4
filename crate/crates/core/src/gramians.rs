//! Truncated and quadratic-type Gramians and the norms built from them.

use nalgebra::DMatrix;

use crate::basis::psd_factor;
use crate::equations::LyapunovSolver;
use crate::error::{Error, Result};
use crate::system::{error_system, QBSystem, ReducedModel};

#[derive(Debug, Clone)]
pub struct GramianBundle {
    pub p_l: DMatrix<f64>,
    pub q_l: DMatrix<f64>,
    pub p_t: DMatrix<f64>,
    pub q_t: DMatrix<f64>,
}

/// A norm evaluated through both the controllability and the observability
/// Gramian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    /// `sqrt(trace(C P Cᵀ))`
    pub value: f64,
    /// `sqrt(trace(Bᵀ Q B))`
    pub dual: f64,
}

impl NormReport {
    fn from_traces(tp: f64, tq: f64) -> NormReport {
        NormReport { value: tp.max(0.0).sqrt(), dual: tq.max(0.0).sqrt() }
    }

    /// Relative gap between the two squared traces.
    pub fn rel_gap(&self) -> f64 {
        let a = self.value * self.value;
        let b = self.dual * self.dual;
        let s = a.abs().max(b.abs());
        if s == 0.0 {
            0.0
        } else {
            (a - b).abs() / s
        }
    }
}

fn no_descriptor(sys: &QBSystem) -> Result<()> {
    if sys.e().is_some() {
        return Err(Error::Invalid("Gramians are computed for E = I only".into()));
    }
    Ok(())
}

fn symm(x: DMatrix<f64>) -> DMatrix<f64> {
    (&x + x.transpose()) * 0.5
}

/// `H (P ⊗ P) Hᵀ` through a square-root factor of `P`.
pub fn quad_term(sys: &QBSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sys.n();
    if sys.h().is_zero() {
        return DMatrix::zeros(n, n);
    }
    let l = psd_factor(p);
    let k = sys.h().apply_pairs(&l);
    symm(&k * k.transpose())
}

/// `H⁽²⁾ (P ⊗ Q) H⁽²⁾ᵀ` through square-root factors.
pub fn quad_term_mode2(sys: &QBSystem, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sys.n();
    if sys.h().is_zero() {
        return DMatrix::zeros(n, n);
    }
    let lp = psd_factor(p);
    let lq = psd_factor(q);
    let k = sys.h().apply_mode2_pairs(&lp, &lq);
    symm(&k * k.transpose())
}

fn bilinear_c(sys: &QBSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sys.n();
    let mut s = DMatrix::zeros(n, n);
    for nk in sys.n_mats() {
        s += nk * p * nk.transpose();
    }
    s
}

fn bilinear_o(sys: &QBSystem, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sys.n();
    let mut s = DMatrix::zeros(n, n);
    for nk in sys.n_mats() {
        s += nk.transpose() * q * nk;
    }
    s
}

/// `P_l`, `Q_l` from the linear Lyapunov equations and the truncated
/// Gramians
///
/// ```text
/// A P_T + P_T Aᵀ + Σ N_k P_l N_kᵀ + H (P_l ⊗ P_l) Hᵀ + B Bᵀ = 0
/// Aᵀ Q_T + Q_T A + Σ N_kᵀ Q_l N_k + H⁽²⁾ (P_l ⊗ Q_l) H⁽²⁾ᵀ + Cᵀ C = 0
/// ```
pub fn truncated_gramians(sys: &QBSystem) -> Result<GramianBundle> {
    no_descriptor(sys)?;
    let solver = LyapunovSolver::new(sys.a())?;
    let bb = sys.b() * sys.b().transpose();
    let cc = sys.c().transpose() * sys.c();
    let (p_l, q_l) = rayon::join(|| solver.solve(&bb), || solver.solve_transposed(&cc));
    let (p_t, q_t) = rayon::join(
        || solver.solve(&(bilinear_c(sys, &p_l) + quad_term(sys, &p_l) + &bb)),
        || solver.solve_transposed(&(bilinear_o(sys, &q_l) + quad_term_mode2(sys, &p_l, &q_l) + &cc)),
    );
    Ok(GramianBundle { p_l, q_l, p_t, q_t })
}

/// Converged quadratic-type Gramians with iteration counts.
#[derive(Debug, Clone)]
pub struct QuadraticGramians {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub iterations_p: usize,
    pub iterations_q: usize,
}

fn fixed_point<F>(start: DMatrix<f64>, tol: f64, maxit: usize, mut step: F) -> Result<(DMatrix<f64>, usize)>
where
    F: FnMut(&DMatrix<f64>) -> DMatrix<f64>,
{
    let mut x = start;
    for it in 1..=maxit {
        let next = step(&x);
        let nn = next.norm();
        if !nn.is_finite() || nn > 1e150 {
            return Err(Error::NoConvergence(it));
        }
        let diff = (&next - &x).norm();
        x = next;
        if diff <= tol * nn {
            return Ok((x, it));
        }
    }
    Err(Error::NoConvergence(maxit))
}

/// Picard iteration for the quadratic-type Gramians, seeded with `P_l`,
/// `Q_l` and stopped on relative Frobenius change.
pub fn quadratic_gramians(sys: &QBSystem, tol: f64, maxit: usize) -> Result<QuadraticGramians> {
    no_descriptor(sys)?;
    let solver = LyapunovSolver::new(sys.a())?;
    let bb = sys.b() * sys.b().transpose();
    let cc = sys.c().transpose() * sys.c();
    let p_l = solver.solve(&bb);
    let (p, iterations_p) = fixed_point(p_l, tol, maxit, |p| solver.solve(&(quad_term(sys, p) + bilinear_c(sys, p) + &bb)))?;
    let q_l = solver.solve_transposed(&cc);
    let (q, iterations_q) = fixed_point(q_l, tol, maxit, |q| {
        solver.solve_transposed(&(quad_term_mode2(sys, &p, q) + bilinear_o(sys, q) + &cc))
    })?;
    Ok(QuadraticGramians { p, q, iterations_p, iterations_q })
}

fn traces(sys: &QBSystem, p: &DMatrix<f64>, q: &DMatrix<f64>) -> (f64, f64) {
    let tp = (sys.c() * p * sys.c().transpose()).trace();
    let tq = (sys.b().transpose() * q * sys.b()).trace();
    (tp, tq)
}

/// Truncated H2 norm from the first three Volterra kernels.
pub fn truncated_h2_norm(sys: &QBSystem) -> Result<NormReport> {
    let g = truncated_gramians(sys)?;
    let (tp, tq) = traces(sys, &g.p_t, &g.q_t);
    Ok(NormReport::from_traces(tp, tq))
}

/// H2 norm from the quadratic-type Gramians.
pub fn h2_norm(sys: &QBSystem, tol: f64, maxit: usize) -> Result<NormReport> {
    let g = quadratic_gramians(sys, tol, maxit)?;
    let (tp, tq) = traces(sys, &g.p, &g.q);
    Ok(NormReport::from_traces(tp, tq))
}

/// Truncated H2 norm of the error system between `sys` and `red`.
pub fn truncated_h2_error(sys: &QBSystem, red: &ReducedModel) -> Result<NormReport> {
    let lam_max = red.eigenvalues()?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if red.r() > 0 && lam_max >= 0.0 {
        return Err(Error::NotStable(lam_max));
    }
    truncated_h2_norm(&error_system(sys, red)?)
}
