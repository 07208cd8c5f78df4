//! The TQB-IRKA fixed-point iteration.

use std::time::{Duration, Instant};

use log::{debug, info, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{orth, realify_basis};
use crate::equations::ShiftedSolver;
use crate::error::{Error, Result};
use crate::schur::C64;
use crate::spectral::eig_change;
use crate::system::{project, rescale, DiagonalForm, QBSystem, ReducedModel};
use crate::tensor::convert;

#[derive(Debug, Clone)]
pub enum InitKind {
    Random(u64),
    /// Reduced model of a linear run on `(A, 0, 0, B, C)` with `Ĥ = 0`, `N̂ = 0`.
    LinearIrka(u64),
    User(ReducedModel),
}

#[derive(Debug, Clone)]
pub struct IrkaConfig {
    pub r: usize,
    pub tol: f64,
    pub maxit: usize,
    pub gamma: f64,
    pub init: InitKind,
    pub reflect_unstable: bool,
    /// Basis construction uses `A + shift·I` (projection keeps `A`).
    pub shift: Option<f64>,
    /// Seed for the random padding of rank-deficient bases.
    pub seed: u64,
}

impl IrkaConfig {
    pub fn new(r: usize) -> Self {
        IrkaConfig { r, tol: 1e-5, maxit: 100, gamma: 1.0, init: InitKind::Random(0), reflect_unstable: true, shift: None, seed: 0 }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.r == 0 || self.r > n {
            return Err(Error::Invalid(format!("reduced order {} for n = {n}", self.r)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Invalid(format!("tolerance {} outside (0, 1)", self.tol)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::NonPositiveGamma(self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IrkaReport {
    pub iterations: usize,
    pub eig_change_history: Vec<f64>,
    pub converged: bool,
    pub final_eigs: Vec<C64>,
    pub wall_time: Duration,
    pub warnings: Vec<String>,
}

/// Solutions of the four shifted Sylvester equations for one iterate.
#[derive(Debug, Clone)]
pub struct RawBases {
    pub v1: DMatrix<C64>,
    pub v2: DMatrix<C64>,
    pub w1: DMatrix<C64>,
    pub w2: DMatrix<C64>,
    pub lambda: Vec<C64>,
}

impl RawBases {
    pub fn v(&self) -> DMatrix<C64> {
        &self.v1 + &self.v2
    }
    pub fn w(&self) -> DMatrix<C64> {
        &self.w1 + &self.w2
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionBases {
    pub raw: RawBases,
    /// Realified `V1 + V2`, `W1 + W2`.
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub v_orth: DMatrix<f64>,
    pub w_orth: DMatrix<f64>,
}

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// `V1, V2, W1, W2` for the shifts and transformed matrices in `df`, with
/// `solver` factoring the linear part of `sys`.
pub fn raw_bases(sys: &QBSystem, solver: &ShiftedSolver, df: &DiagonalForm) -> Result<RawBases> {
    let r = df.r();
    let lam = &df.lambda;
    let rhs_v1 = to_c(sys.b()) * df.b_t.transpose();
    let rhs_w1 = to_c(&sys.c().transpose()) * &df.c_t;
    let (v1, w1) = rayon::join(|| solver.solve(lam, &rhs_v1, false), || solver.solve(lam, &rhs_w1, true));
    let (v1, w1) = (v1?, w1?);

    let n = sys.n();
    let mut rhs_v2 = DMatrix::<C64>::zeros(n, r);
    let mut rhs_w2 = DMatrix::<C64>::zeros(n, r);
    for (nk, nt) in sys.n_mats().iter().zip(&df.n_t) {
        if nk.iter().all(|v| *v == 0.0) {
            continue;
        }
        let nkc = to_c(nk);
        rhs_v2 += &nkc * &v1 * nt.transpose();
        rhs_w2 += nkc.transpose() * &w1 * nt;
    }
    if !sys.h().is_zero() {
        // H(V1⊗V1)H̃ᵀ and 2·H⁽²⁾(V1⊗W1)H̃⁽²⁾ᵀ from the column-pair images
        let hv = sys.h().apply_pairs(&v1);
        rhs_v2 += hv * df.h_t.transpose();
        let hw = sys.h().apply_mode2_pairs(&v1, &w1);
        let ht2 = convert(&df.h_t, (r, r, r), 1, 2);
        rhs_w2 += hw * ht2.transpose() * C64::new(2.0, 0.0);
    }
    let (v2, w2) = rayon::join(|| solver.solve(lam, &rhs_v2, false), || solver.solve(lam, &rhs_w2, true));
    Ok(RawBases { v1, v2: v2?, w1, w2: w2?, lambda: lam.clone() })
}

fn finish_bases(raw: RawBases, seed: u64) -> Result<ProjectionBases> {
    let v = realify_basis(&raw.v(), &raw.lambda)?;
    let w = realify_basis(&raw.w(), &raw.lambda)?;
    let (v_orth, rv) = orth(&v, seed);
    let (w_orth, rw) = orth(&w, seed.wrapping_add(1));
    if rv < v.ncols() || rw < w.ncols() {
        debug!("basis rank {rv}/{rw} of {}, padded", v.ncols());
    }
    Ok(ProjectionBases { raw, v, w, v_orth, w_orth })
}

/// Projection bases for `sys` from the spectral data of `red`.
pub fn solve_bases(sys: &QBSystem, red: &ReducedModel) -> Result<ProjectionBases> {
    let df = red.diagonal_form()?;
    let solver = ShiftedSolver::new(sys.a(), sys.e())?;
    finish_bases(raw_bases(sys, &solver, &df)?, 0)
}

/// The bases of `red` against itself (hatted quantities).
pub fn reduced_hat_bases(red: &ReducedModel) -> Result<RawBases> {
    let df = red.diagonal_form()?;
    reduced_hat_bases_with(red.system(), &df)
}

/// Hatted bases with the reduced matrices of `sys` and spectral data `df`,
/// which may come from a different reduced model.
pub fn reduced_hat_bases_with(sys: &QBSystem, df: &DiagonalForm) -> Result<RawBases> {
    let solver = ShiftedSolver::new(sys.a(), sys.e())?;
    raw_bases(sys, &solver, df)
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn with_norm(m: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let nm = m.norm();
    if nm > 0.0 {
        m * (target / nm)
    } else {
        m
    }
}

/// Random Hurwitz starting model: `Â = −D − 0.1·SSᵀ + K` with `D` log-uniform
/// on `[0.1, 10]` and `K` skew, `Ĥ`, `N̂_k` of norm 0.1, `B̂`, `Ĉ` standard normal.
pub fn random_guess(r: usize, m: usize, p: usize, seed: u64) -> Result<ReducedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(r, |_, _| 10f64.powf(rng.random_range(-1.0..=1.0))));
    let s = normal_matrix(&mut rng, r, r);
    let g = normal_matrix(&mut rng, r, r);
    let a = -d - (&s * s.transpose()) * 0.1 + (&g - g.transpose()) * 0.5;
    let h = with_norm(normal_matrix(&mut rng, r, r * r), 0.1);
    let n_mats = (0..m).map(|_| with_norm(normal_matrix(&mut rng, r, r), 0.1)).collect();
    let b = normal_matrix(&mut rng, r, m);
    let c = normal_matrix(&mut rng, p, r);
    ReducedModel::new(a, h, n_mats, b, c)
}

pub fn initial_guess(sys: &QBSystem, cfg: &IrkaConfig) -> Result<ReducedModel> {
    let (r, m, p) = (cfg.r, sys.m(), sys.p());
    match &cfg.init {
        InitKind::Random(seed) => random_guess(r, m, p, *seed),
        InitKind::LinearIrka(seed) => {
            let lin = sys.linear_part();
            let mut lcfg = cfg.clone();
            lcfg.init = InitKind::Random(*seed);
            lcfg.gamma = 1.0;
            let (red, _, rep) = tqb_irka(&lin, &lcfg)?;
            if !rep.converged {
                warn!("linear start did not converge in {} iterations", rep.iterations);
            }
            let zero_n = vec![DMatrix::zeros(r, r); m];
            ReducedModel::new(red.a().clone(), DMatrix::zeros(r, r * r), zero_n, red.b().clone(), red.c().clone())
        }
        InitKind::User(red) => {
            if red.r() != r || red.system().m() != m || red.system().p() != p {
                return Err(Error::Dimension(format!("initial model r={} m={} p={}", red.r(), red.system().m(), red.system().p())));
            }
            Ok(red.clone())
        }
    }
}

fn replace_a(red: &ReducedModel, a: DMatrix<f64>) -> Result<ReducedModel> {
    ReducedModel::new(a, red.h_dense(), red.n_mats().to_vec(), red.b().clone(), red.c().clone())
}

/// Diagonal form with one retry on a slightly perturbed `Â`.
fn diagonal_form_retry(red: &ReducedModel, seed: u64, warnings: &mut Vec<String>) -> Result<DiagonalForm> {
    match red.diagonal_form() {
        Err(Error::NonDiagonalizable(c)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = red.r();
            let g = normal_matrix(&mut rng, r, r);
            let noise = with_norm(&g + g.transpose(), 1e-10 * red.a().norm());
            warnings.push(format!("reduced A nearly defective (cond {c:.3e}), perturbed"));
            let pert = replace_a(red, red.a() + noise)?;
            let sf = crate::spectral::spectral_decompose(pert.a())?;
            // transformed matrices stay those of the unperturbed iterate
            Ok(DiagonalForm::from_factors(red, sf))
        }
        other => other,
    }
}

/// Runs TQB-IRKA on `sys`. Hitting `maxit` is not an error: the iterate with
/// the smallest eigenvalue change is returned with `converged = false`.
pub fn tqb_irka(sys: &QBSystem, cfg: &IrkaConfig) -> Result<(ReducedModel, ProjectionBases, IrkaReport)> {
    cfg.check(sys.n())?;
    let start = Instant::now();
    let mut warnings = Vec::new();

    let lin = match cfg.shift {
        Some(s) => sys.shifted(s),
        None => sys.clone(),
    };
    let basis_sys = rescale(&lin, cfg.gamma)?;
    let solver = ShiftedSolver::new(basis_sys.a(), basis_sys.e())?;

    let mut red = initial_guess(sys, cfg)?;
    let mut eigs = red.eigenvalues()?;
    let mut history = Vec::new();
    let mut best: Option<(f64, ReducedModel, ProjectionBases)> = None;
    let mut theta = 1.0;
    let mut rising = 0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.maxit {
        iterations = it;
        let scaled = red.rescaled(cfg.gamma)?;
        let mut df = diagonal_form_retry(&scaled, cfg.seed.wrapping_add(it as u64), &mut warnings)?;
        if cfg.reflect_unstable && df.lambda.iter().any(|l| l.re >= 0.0) {
            let scale = df.lambda.iter().map(|l| l.norm()).fold(1.0, f64::max);
            warnings.push(format!("iteration {it}: unstable reduced eigenvalues mirrored"));
            df = df.reflected(1e-8 * scale);
        }
        let raw = raw_bases(&basis_sys, &solver, &df)?;
        let bases = finish_bases(raw, cfg.seed)?;
        let mut next = project(sys, &bases.v_orth, &bases.w_orth)?;
        if theta < 1.0 {
            let a = next.a() * theta + red.a() * (1.0 - theta);
            next = replace_a(&next, a)?;
        }
        let next_eigs = next.eigenvalues()?;
        let change = eig_change(&eigs, &next_eigs);
        debug!("iteration {it}: eigenvalue change {change:.3e}");

        if let Some(&prev) = history.last() {
            if change > prev {
                rising += 1;
                if rising >= 10 {
                    theta *= 0.5;
                    rising = 0;
                    warnings.push(format!("iteration {it}: damping set to {theta}"));
                }
            } else {
                rising = 0;
                theta = 1.0;
            }
        }
        history.push(change);
        red = next;
        eigs = next_eigs;
        if best.as_ref().map_or(true, |(c, _, _)| change <= *c) {
            best = Some((change, red.clone(), bases.clone()));
        }
        if !change.is_finite() {
            return Err(Error::NoConvergence(it));
        }
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }

    let (_, red, bases) = best.expect("at least one iteration");
    if converged {
        info!("converged in {iterations} iterations");
    } else {
        warnings.push(format!("no convergence in {} iterations", cfg.maxit));
    }
    let final_eigs = red.eigenvalues()?;
    let report = IrkaReport {
        iterations,
        eig_change_history: history,
        converged,
        final_eigs,
        wall_time: start.elapsed(),
        warnings,
    };
    Ok((red, bases, report))
}
