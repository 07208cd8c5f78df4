//! First-order optimality residuals of a reduced model and the perturbation
//! quantities that explain them.

use nalgebra::{DMatrix, DVector};

use crate::equations::solve_shifted_general;
use crate::error::{Error, Result};
use crate::hessian::Hessian;
use crate::irka::{reduced_hat_bases_with, solve_bases, ProjectionBases, RawBases};
use crate::kron::perm_t;
use crate::schur::C64;
use crate::system::{project, QBSystem, ReducedModel};
use crate::tensor::convert;

/// The five families of optimality quantities in the eigenbasis of `Â`.
/// Order-3 entries are stored as mode-1 matricizations.
#[derive(Debug, Clone)]
pub struct Phis {
    /// `(C V)ᵀ`, `r × p`
    pub c: DMatrix<C64>,
    /// `Wᵀ B`, `r × m`
    pub b: DMatrix<C64>,
    /// `W1_iᵀ N_k V1_j` at `(i, k·r + j)`
    pub n: DMatrix<C64>,
    /// `W1_iᵀ H (V1_j ⊗ V1_l)` at `(i, j·r + l)`
    pub h: DMatrix<C64>,
    /// `W1_iᵀ V_i + W2_iᵀ V1_i`
    pub lambda: DMatrix<C64>,
}

impl Phis {
    pub fn sub(&self, o: &Phis) -> Phis {
        Phis { c: &self.c - &o.c, b: &self.b - &o.b, n: &self.n - &o.n, h: &self.h - &o.h, lambda: &self.lambda - &o.lambda }
    }

    fn parts(&self) -> [&DMatrix<C64>; 5] {
        [&self.c, &self.b, &self.n, &self.h, &self.lambda]
    }

    /// Spectral norms of the five matricizations.
    pub fn norms(&self) -> [f64; 5] {
        self.parts().map(spectral_norm)
    }
}

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `H(x_j ⊗ y_l)` at column `j·b + l`.
fn pairs_xy(h: &Hessian, x: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
    let (n, a) = x.shape();
    let b = y.ncols();
    let mut xy = DMatrix::zeros(n, a + b);
    xy.columns_mut(0, a).copy_from(x);
    xy.columns_mut(a, b).copy_from(y);
    let all = h.apply_pairs(&xy);
    let w = a + b;
    let mut out = DMatrix::zeros(h.n(), a * b);
    for j in 0..a {
        for l in 0..b {
            out.set_column(j * b + l, &all.column(j * w + a + l));
        }
    }
    out
}

fn col_dots(x: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(x.ncols(), 1, |i, _| x.column(i).iter().zip(y.column(i).iter()).map(|(a, b)| a * b).sum())
}

fn n_family(sys: &QBSystem, w1: &DMatrix<C64>, v1: &DMatrix<C64>, v1b: Option<&DMatrix<C64>>) -> DMatrix<C64> {
    let r = v1.ncols();
    let m = sys.n_mats().len();
    let mut out = DMatrix::zeros(w1.ncols(), r * m);
    for (k, nk) in sys.n_mats().iter().enumerate() {
        let mut blk = w1.transpose() * to_c(nk) * v1;
        if let Some(v) = v1b {
            blk += w1.transpose() * to_c(nk) * v;
        }
        out.columns_mut(k * r, r).copy_from(&blk);
    }
    out
}

/// Left-hand sides for `sys` with bases `raw`.
pub fn phis(sys: &QBSystem, raw: &RawBases) -> Phis {
    let v = raw.v();
    let w = raw.w();
    let c = (to_c(sys.c()) * &v).transpose();
    let b = w.transpose() * to_c(sys.b());
    let n = n_family(sys, &raw.w1, &raw.v1, None);
    let h = raw.w1.transpose() * sys.h().apply_pairs(&raw.v1);
    let lambda = col_dots(&raw.w1, &v) + col_dots(&raw.w2, &raw.v1);
    Phis { c, b, n, h, lambda }
}

const FAMILIES: [&str; 5] = ["E_C", "E_B", "E_N", "E_H", "E_lambda"];

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub e_c: f64,
    pub e_b: f64,
    pub e_n: f64,
    pub e_h: f64,
    pub e_lambda: f64,
    pub phi: Phis,
    pub phi_hat: Option<Phis>,
    pub eps: Option<Phis>,
    /// Families that could not be evaluated, with the reason.
    pub degraded: Vec<String>,
}

impl ResidualReport {
    pub fn measures(&self) -> [(&'static str, f64); 5] {
        [(FAMILIES[0], self.e_c), (FAMILIES[1], self.e_b), (FAMILIES[2], self.e_n), (FAMILIES[3], self.e_h), (FAMILIES[4], self.e_lambda)]
    }

    pub fn max(&self) -> f64 {
        self.measures().iter().map(|m| m.1).fold(0.0, f64::max)
    }
}

/// `‖ε‖₂ / ‖Φ‖₂`. When `Φ` vanishes against `scale` (the largest `‖Φ‖₂`),
/// a vanishing `ε` gives 0 and anything else is measured against `scale`;
/// the flag reports the latter.
fn relative(eps: f64, phi: f64, scale: f64) -> (f64, bool) {
    let floor = 1e-14 * scale;
    if phi > floor {
        (eps / phi, false)
    } else if eps <= floor {
        (0.0, false)
    } else if scale > 0.0 {
        (eps / scale, true)
    } else {
        (f64::INFINITY, true)
    }
}

/// Optimality residuals of `red` for `sys`, with `bases` solved against the
/// spectral data of `red` (see [`residuals`]).
pub fn optimality_residuals(sys: &QBSystem, red: &ReducedModel, bases: &ProjectionBases) -> Result<ResidualReport> {
    let phi = phis(sys, &bases.raw);
    let df = red.diagonal_form()?;
    let hat = match reduced_hat_bases_with(red.system(), &df) {
        Ok(h) => h,
        Err(Error::SingularShift(s)) => {
            let nan = f64::NAN;
            return Ok(ResidualReport {
                e_c: nan,
                e_b: nan,
                e_n: nan,
                e_h: nan,
                e_lambda: nan,
                phi,
                phi_hat: None,
                eps: None,
                degraded: vec![format!("reduced bases: singular shift {s}")],
            });
        }
        Err(e) => return Err(e),
    };
    let phi_hat = phis(red.system(), &hat);
    let eps = phi.sub(&phi_hat);
    let pn = phi.norms();
    let en = eps.norms();
    let scale = pn.iter().cloned().fold(0.0, f64::max);
    let mut e = [0.0; 5];
    let mut degraded = Vec::new();
    for k in 0..5 {
        let (v, fallback) = relative(en[k], pn[k], scale);
        e[k] = v;
        if fallback {
            degraded.push(format!("{}: Φ vanishes, measured against max ‖Φ‖₂ = {scale:.3e}", FAMILIES[k]));
        }
    }
    Ok(ResidualReport { e_c: e[0], e_b: e[1], e_n: e[2], e_h: e[3], e_lambda: e[4], phi, phi_hat: Some(phi_hat), eps: Some(eps), degraded })
}

/// Solves the bases of `sys` against `red` and evaluates the residuals.
pub fn residuals(sys: &QBSystem, red: &ReducedModel) -> Result<ResidualReport> {
    let bases = solve_bases(sys, red)?;
    optimality_residuals(sys, red, &bases)
}

/// Perturbation quantities relating the full bases to the reduced ones.
#[derive(Debug, Clone)]
pub struct Perturbation {
    /// `V1 − V V̂1` (with the realified `V`).
    pub eps_v: DMatrix<C64>,
    /// `W1 − W (WᵀV)⁻ᵀ Ŵ1`.
    pub eps_w: DMatrix<C64>,
    /// `V̂ − (WᵀV)⁻¹ Wᵀ V_c`.
    pub gamma_v: DMatrix<C64>,
    /// `Ŵ − Vᵀ W_c`.
    pub gamma_w: DMatrix<C64>,
    /// Model projected with the realified bases.
    pub red_p: ReducedModel,
    pub hat: RawBases,
    /// `ε_X` evaluated from the four solves above.
    pub eps: Phis,
    /// `ε_X` as plain differences `Φ − Φ̂` for `red_p`.
    pub direct: Phis,
    /// Relative residuals of the identities defining `ε_v`, `ε_w`.
    pub identity_v: f64,
    pub identity_w: f64,
}

fn cond(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

fn inv_checked(m: DMatrix<C64>) -> Result<DMatrix<C64>> {
    let c = cond(&m);
    if !(c <= 1e13) {
        return Err(Error::ProjectorSingular(c));
    }
    m.try_inverse().ok_or(Error::ProjectorSingular(c))
}

fn rel_norm(x: &DMatrix<C64>, y: &DMatrix<C64>) -> f64 {
    let d = (x - y).norm();
    let s = y.norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// Solves for `ε_v`, `ε_w`, `Γ_v`, `Γ_w` and the perturbations they imply.
///
/// ```text
/// ε_v Λ + ΠA ε_v   = (Π − Π_v)(A V1 + B B̃ᵀ)
/// ε_w Λ + ΠᵀAᵀ ε_w = (Πᵀ − Π_w)(Aᵀ W1 + Cᵀ C̃)
/// Γ_v Λ + Â Γ_v    = (WᵀV)⁻¹Wᵀ [Σ N_k ε_v Ñ_kᵀ + H(ε_v⊗V1 + V1⊗ε_v − ε_v⊗ε_v) H̃ᵀ]
/// Γ_w Λ + Âᵀ Γ_w   = Vᵀ [Σ N_kᵀ ε_w Ñ_k + 2 H⁽²⁾(ε_v⊗W1 + V1⊗ε_w − ε_v⊗ε_w) H̃⁽²⁾ᵀ]
/// ```
pub fn perturbation_solves(sys: &QBSystem, red: &ReducedModel, bases: &ProjectionBases) -> Result<Perturbation> {
    if sys.e().is_some() {
        return Err(Error::Invalid("perturbation solves need E = I".into()));
    }
    let df = red.diagonal_form()?;
    let lam = &df.lambda;
    let r = lam.len();
    let raw = &bases.raw;
    let (vr, wr) = (&bases.v, &bases.w);
    let red_p = project(sys, vr, wr)?;
    let hat = reduced_hat_bases_with(red_p.system(), &df)?;

    let vrc = to_c(vr);
    let wrc = to_c(wr);
    let a = to_c(sys.a());
    let g = inv_checked(wrc.transpose() * &vrc)? * wrc.transpose();
    let pi = &vrc * &g;
    let pi_v = &raw.v1 * inv_checked(wrc.transpose() * &raw.v1)? * wrc.transpose();
    let pi_w = &raw.w1 * inv_checked(vrc.transpose() * &raw.w1)? * vrc.transpose();
    let z = g.transpose();

    let pa = (&pi * &a).map(|v| v.re);
    let pta = (pi.transpose() * a.transpose()).map(|v| v.re);
    let rhs_v = (&pi - &pi_v) * (&a * &raw.v1 + to_c(sys.b()) * df.b_t.transpose());
    let rhs_w = (pi.transpose() - &pi_w) * (a.transpose() * &raw.w1 + to_c(&sys.c().transpose()) * &df.c_t);
    let eps_v = solve_shifted_general(&pa, lam, &rhs_v)?;
    let eps_w = solve_shifted_general(&pta, lam, &rhs_w)?;

    let identity_v = rel_norm(&(&vrc * &hat.v1 + &eps_v), &raw.v1);
    let identity_w = rel_norm(&(&z * &hat.w1 + &eps_w), &raw.w1);

    let h = sys.h();
    let v1 = &raw.v1;
    let w1 = &raw.w1;
    let v1m = v1 - &eps_v;
    let w1m = w1 - &eps_w;

    // Γ_v
    let mut src = DMatrix::<C64>::zeros(sys.n(), r);
    for (nk, nt) in sys.n_mats().iter().zip(&df.n_t) {
        src += to_c(nk) * &eps_v * nt.transpose();
    }
    if !h.is_zero() {
        let hp = pairs_xy(h, &eps_v, &v1m) + pairs_xy(h, v1, &eps_v);
        src += hp * df.h_t.transpose();
    }
    let gamma_v = solve_shifted_general(red_p.a(), lam, &(&g * src))?;

    // Γ_w
    let mut src = DMatrix::<C64>::zeros(sys.n(), r);
    for (nk, nt) in sys.n_mats().iter().zip(&df.n_t) {
        src += to_c(&nk.transpose()) * &eps_w * nt;
    }
    if !h.is_zero() {
        let mode2 = h.apply_mode2_pairs(&eps_v, &w1m) + h.apply_mode2_pairs(v1, &eps_w);
        let ht2 = convert(&df.h_t, (r, r, r), 1, 2);
        src += mode2 * ht2.transpose() * C64::new(2.0, 0.0);
    }
    let gamma_w = solve_shifted_general(&red_p.a().transpose(), lam, &(vrc.transpose() * src))?;

    let eps_c = -(to_c(sys.c()) * &vrc * &gamma_v).transpose();
    let eps_b = -gamma_w.transpose() * &g * to_c(sys.b());
    let eps_n = {
        let m = sys.n_mats().len();
        let mut out = DMatrix::zeros(r, r * m);
        for (k, nk) in sys.n_mats().iter().enumerate() {
            let nkc = to_c(nk);
            let blk = eps_w.transpose() * &nkc * &v1m + w1.transpose() * &nkc * &eps_v;
            out.columns_mut(k * r, r).copy_from(&blk);
        }
        out
    };
    let eps_h = if h.is_zero() {
        DMatrix::zeros(r, r * r)
    } else {
        w1m.transpose() * (pairs_xy(h, &eps_v, &v1m) + pairs_xy(h, v1, &eps_v)) + eps_w.transpose() * h.apply_pairs(v1)
    };
    let hat_v = hat.v();
    let eps_l = -col_dots(&hat.w(), &gamma_v) - col_dots(&gamma_w, &(&hat_v - &gamma_v)) - col_dots(&raw.w2, &raw.v2)
        + col_dots(&hat.w2, &hat.v2);
    let eps = Phis { c: eps_c, b: eps_b, n: eps_n, h: eps_h, lambda: eps_l };
    let direct = phis(sys, raw).sub(&phis(red_p.system(), &hat));
    Ok(Perturbation { eps_v, eps_w, gamma_v, gamma_w, red_p, hat, eps, direct, identity_v, identity_w })
}

/// Relative disagreement per family between the Sylvester route and the
/// explicit Kronecker route.
#[derive(Debug, Clone, Copy)]
pub struct BruteForceReport {
    pub c: f64,
    pub b: f64,
    pub n: f64,
    pub h: f64,
    pub lambda: f64,
}

impl BruteForceReport {
    pub fn max(&self) -> f64 {
        [self.c, self.b, self.n, self.h, self.lambda].iter().cloned().fold(0.0, f64::max)
    }
}

fn vec_of(m: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

fn unvec(v: &DVector<C64>, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

fn kron_solve(op: &DMatrix<C64>, rhs: &DVector<C64>) -> Result<DVector<C64>> {
    op.clone().lu().solve(rhs).ok_or_else(|| Error::SingularShift("Kronecker operator".into()))
}

/// Recomputes the four bases through explicit Kronecker-product systems and
/// compares the resulting `Φ` with the Sylvester route. Only for `n ≤ 30`.
pub fn verify_against_bruteforce(sys: &QBSystem, red: &ReducedModel) -> Result<BruteForceReport> {
    let n = sys.n();
    if n > 30 {
        return Err(Error::TooLarge(n));
    }
    if sys.e().is_some() {
        return Err(Error::Invalid("Kronecker route needs E = I".into()));
    }
    let df = red.diagonal_form()?;
    let r = df.r();
    let (m, p) = (sys.m(), sys.p());
    let lam = DMatrix::from_diagonal(&DVector::from_vec(df.lambda.clone()));
    let a = to_c(sys.a());
    let i_n = DMatrix::<C64>::identity(n, n);
    let i_r = DMatrix::<C64>::identity(r, r);
    let op_v = -lam.kronecker(&i_n) - i_r.kronecker(&a);
    let op_w = -lam.kronecker(&i_n) - i_r.kronecker(&a.transpose());
    let t = perm_t(n, r);

    let vec_im = vec_of(&DMatrix::identity(m, m));
    let vec_ip = vec_of(&DMatrix::identity(p, p));
    let v1 = kron_solve(&op_v, &(df.b_t.kronecker(&to_c(sys.b())) * vec_im))?;
    let w1 = kron_solve(&op_w, &(df.c_t.transpose().kronecker(&to_c(&sys.c().transpose())) * vec_ip))?;

    let h = to_c(&sys.h().to_dense());
    let h2 = convert(&h, (n, n, n), 1, 2);
    let ht2 = convert(&df.h_t, (r, r, r), 1, 2);
    let mut rhs_v2 = df.h_t.kronecker(&h) * t.apply(&v1.kronecker(&v1));
    let mut rhs_w2 = ht2.kronecker(&h2) * t.apply(&v1.kronecker(&w1)) * C64::new(2.0, 0.0);
    for (nk, nt) in sys.n_mats().iter().zip(&df.n_t) {
        let nkc = to_c(nk);
        rhs_v2 += nt.kronecker(&nkc) * &v1;
        rhs_w2 += nt.transpose().kronecker(&nkc.transpose()) * &w1;
    }
    let v2 = kron_solve(&op_v, &rhs_v2)?;
    let w2 = kron_solve(&op_w, &rhs_w2)?;
    let brute = RawBases { v1: unvec(&v1, n, r), v2: unvec(&v2, n, r), w1: unvec(&w1, n, r), w2: unvec(&w2, n, r), lambda: df.lambda.clone() };

    let sylv = solve_bases(sys, red)?;
    let x = phis(sys, &sylv.raw);
    let y = phis(sys, &brute);
    let d = x.sub(&y);
    let dn = d.norms();
    let xn = x.norms();
    let rel = |k: usize| if xn[k] > 0.0 { dn[k] / xn[k] } else { dn[k] };
    Ok(BruteForceReport { c: rel(0), b: rel(1), n: rel(2), h: rel(3), lambda: rel(4) })
}
