//! Quadratic-bilinear systems
//!
//! ```text
//! E ẋ = A x + H (x ⊗ x) + Σ_k N_k x u_k + B u,    y = C x
//! ```
//!
//! and their Petrov-Galerkin reductions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hessian::{Hessian, Storage};
use crate::schur::C64;
use crate::spectral::{reflect_unstable, spectral_decompose, SpectralFactors};

#[derive(Debug, Clone)]
pub struct QBSystem {
    a: DMatrix<f64>,
    h: Hessian,
    n_mats: Vec<DMatrix<f64>>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    e: Option<DMatrix<f64>>,
    label: String,
}

fn shape(m: &DMatrix<f64>) -> String {
    format!("{}×{}", m.nrows(), m.ncols())
}

impl QBSystem {
    /// Validates dimensions and symmetrizes the Hessian.
    pub fn new(
        a: DMatrix<f64>,
        h: Hessian,
        n_mats: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        e: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square, got {}", shape(&a))));
        }
        if h.n() != n {
            return Err(Error::Dimension(format!("Hessian dimension {} differs from n = {n}", h.n())));
        }
        let m = b.ncols();
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B is {}, expected {n} rows", shape(&b))));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C is {}, expected {n} columns", shape(&c))));
        }
        if !n_mats.is_empty() && n_mats.len() != m {
            return Err(Error::Dimension(format!("{} bilinear matrices for {m} inputs", n_mats.len())));
        }
        for nk in &n_mats {
            if nk.nrows() != n || nk.ncols() != n {
                return Err(Error::Dimension(format!("N_k is {}, expected {n}×{n}", shape(nk))));
            }
        }
        if let Some(e) = &e {
            if e.nrows() != n || e.ncols() != n {
                return Err(Error::Dimension(format!("E is {}, expected {n}×{n}", shape(e))));
            }
            let lu = e.clone().lu();
            let d = lu.u().diagonal().map(f64::abs);
            if d.min() <= 1e-14 * d.max() {
                return Err(Error::Invalid("E must be invertible".into()));
            }
        }
        let h = if h.is_symmetric() { h } else { h.symmetrize() };
        let n_mats = if n_mats.is_empty() { vec![DMatrix::zeros(n, n); m] } else { n_mats };
        Ok(QBSystem { a, h, n_mats, b, c, e, label: String::new() })
    }

    /// Linear system `(A, 0, 0, B, C)`.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        QBSystem::new(a, Hessian::zeros(n), Vec::new(), b, c, None)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn h(&self) -> &Hessian {
        &self.h
    }
    pub fn n_mats(&self) -> &[DMatrix<f64>] {
        &self.n_mats
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn e(&self) -> Option<&DMatrix<f64>> {
        self.e.as_ref()
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_bilinear_free(&self) -> bool {
        self.n_mats.iter().all(|nk| nk.iter().all(|v| *v == 0.0))
    }

    /// Same system with the linear part replaced by `A + shift·I`.
    pub fn shifted(&self, shift: f64) -> QBSystem {
        let mut s = self.clone();
        for i in 0..s.n() {
            s.a[(i, i)] += shift;
        }
        s
    }

    /// Drops `H` and every `N_k`.
    pub fn linear_part(&self) -> QBSystem {
        let n = self.n();
        QBSystem {
            a: self.a.clone(),
            h: Hessian::zeros(n),
            n_mats: vec![DMatrix::zeros(n, n); self.m()],
            b: self.b.clone(),
            c: self.c.clone(),
            e: self.e.clone(),
            label: self.label.clone(),
        }
    }

    /// `A x + H (x ⊗ x) + Σ N_k x u_k + B u`.
    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n(), "state length mismatch");
        assert_eq!(u.len(), self.m(), "input length mismatch");
        let mut f = &self.a * x + self.h.apply(x, x) + &self.b * u;
        for (k, nk) in self.n_mats.iter().enumerate() {
            if u[k] != 0.0 {
                f += nk * x * u[k];
            }
        }
        f
    }

    /// `A + 2 H (I ⊗ x) + Σ N_k u_k`.
    pub fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let mut j = &self.a + self.h.jacobian_term(x) * 2.0;
        for (k, nk) in self.n_mats.iter().enumerate() {
            if u[k] != 0.0 {
                j += nk * u[k];
            }
        }
        j
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }

    /// Transfer function of the linear part, `C (sE − A)⁻¹ B`.
    pub fn transfer(&self, s: C64) -> Result<DMatrix<C64>> {
        let n = self.n();
        let e = self.e.clone().unwrap_or_else(|| DMatrix::identity(n, n));
        let m = e.map(|v| C64::new(v, 0.0)) * s - self.a.map(|v| C64::new(v, 0.0));
        let x = m.lu().solve(&self.b.map(|v| C64::new(v, 0.0))).ok_or_else(|| Error::SingularShift(format!("{s}")))?;
        Ok(self.c.map(|v| C64::new(v, 0.0)) * x)
    }

    /// Derivative of the linear transfer function, `−C (sE − A)⁻¹ E (sE − A)⁻¹ B`.
    pub fn transfer_derivative(&self, s: C64) -> Result<DMatrix<C64>> {
        let n = self.n();
        let e = self.e.clone().unwrap_or_else(|| DMatrix::identity(n, n)).map(|v| C64::new(v, 0.0));
        let m = &e * s - self.a.map(|v| C64::new(v, 0.0));
        let lu = m.lu();
        let x = lu.solve(&self.b.map(|v| C64::new(v, 0.0))).ok_or_else(|| Error::SingularShift(format!("{s}")))?;
        let y = lu.solve(&(&e * x)).ok_or_else(|| Error::SingularShift(format!("{s}")))?;
        Ok(-(self.c.map(|v| C64::new(v, 0.0)) * y))
    }
}

/// `H ← γH`, `N_k ← γN_k`. Driving the result with `ũ` gives `y/γ`, where
/// `y` is the output of `sys` under `γũ` (state `x̃ = x/γ`), so bases built
/// from it serve the original system.
pub fn rescale(sys: &QBSystem, gamma: f64) -> Result<QBSystem> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let mut s = sys.clone();
    if gamma != 1.0 {
        s.h = sys.h.scaled(gamma);
        s.n_mats = sys.n_mats.iter().map(|nk| nk * gamma).collect();
    }
    Ok(s)
}

/// A reduced QB model with dense Hessian `Ĥ` (`r × r²`) and `Ê = I`.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    sys: QBSystem,
}

impl ReducedModel {
    pub fn new(a: DMatrix<f64>, h: DMatrix<f64>, n_mats: Vec<DMatrix<f64>>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let h = Hessian::dense(h)?;
        Ok(ReducedModel { sys: QBSystem::new(a, h, n_mats, b, c, None)? })
    }

    /// Wraps a system whose Hessian is dense and `E` absent.
    pub fn from_system(sys: QBSystem) -> Result<Self> {
        if sys.e.is_some() {
            return Err(Error::Invalid("reduced models carry E = I".into()));
        }
        let h = match sys.h.storage() {
            Storage::Dense(_) => sys.h.clone(),
            _ => Hessian::dense(sys.h.to_dense())?.symmetrize(),
        };
        Ok(ReducedModel { sys: QBSystem { h, ..sys } })
    }

    pub fn r(&self) -> usize {
        self.sys.n()
    }
    pub fn system(&self) -> &QBSystem {
        &self.sys
    }
    pub fn into_system(self) -> QBSystem {
        self.sys
    }
    pub fn a(&self) -> &DMatrix<f64> {
        self.sys.a()
    }
    pub fn b(&self) -> &DMatrix<f64> {
        self.sys.b()
    }
    pub fn c(&self) -> &DMatrix<f64> {
        self.sys.c()
    }
    pub fn n_mats(&self) -> &[DMatrix<f64>] {
        self.sys.n_mats()
    }
    pub fn h_dense(&self) -> DMatrix<f64> {
        match self.sys.h.storage() {
            Storage::Dense(h) => h.clone(),
            _ => self.sys.h.to_dense(),
        }
    }

    pub fn rescaled(&self, gamma: f64) -> Result<ReducedModel> {
        Ok(ReducedModel { sys: rescale(&self.sys, gamma)? })
    }

    /// Eigenvalues of `Â` in [`eig_order`](crate::spectral::eig_order).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let mut l = crate::schur::complex_schur(self.a())?.eigenvalues();
        crate::spectral::sort_eigs(&mut l);
        Ok(l)
    }

    pub fn is_hurwitz(&self) -> bool {
        matches!(self.eigenvalues(), Ok(l) if l.iter().all(|l| l.re < 0.0))
    }

    /// Spectral factors of `Â` and the transformed matrices
    /// `B̃ = R⁻¹B̂`, `C̃ = ĈR`, `Ñ_k = R⁻¹N̂_kR`, `H̃ = R⁻¹Ĥ(R⊗R)`.
    pub fn diagonal_form(&self) -> Result<DiagonalForm> {
        let sf = spectral_decompose(self.a())?;
        Ok(DiagonalForm::from_factors(self, sf))
    }
}

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// A reduced model expressed in the eigenbasis of `Â`.
#[derive(Debug, Clone)]
pub struct DiagonalForm {
    pub factors: SpectralFactors,
    /// Shifts actually used (eigenvalues, possibly mirrored).
    pub lambda: Vec<C64>,
    pub b_t: DMatrix<C64>,
    pub c_t: DMatrix<C64>,
    pub n_t: Vec<DMatrix<C64>>,
    pub h_t: DMatrix<C64>,
}

impl DiagonalForm {
    pub fn from_factors(red: &ReducedModel, sf: SpectralFactors) -> DiagonalForm {
        let r = &sf.r;
        let rinv = &sf.rinv;
        let b_t = rinv * to_c(red.b());
        let c_t = to_c(red.c()) * r;
        let n_t = red.n_mats().iter().map(|nk| rinv * to_c(nk) * r).collect();
        let h_t = red.system().h().congruence(r, &rinv.transpose());
        DiagonalForm { lambda: sf.lambda.clone(), factors: sf, b_t, c_t, n_t, h_t }
    }

    pub fn reflected(mut self, eps_shift: f64) -> DiagonalForm {
        self.lambda = reflect_unstable(&self.lambda, eps_shift);
        self
    }

    pub fn r(&self) -> usize {
        self.lambda.len()
    }
}

/// `(WᵀEV)⁻¹` after a conditioning check.
fn gram_inverse(sys: &QBSystem, v: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let wtv = match sys.e() {
        Some(e) => w.transpose() * e * v,
        None => w.transpose() * v,
    };
    let sv = wtv.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= 1e13) {
        return Err(Error::SingularGram(cond));
    }
    wtv.try_inverse().ok_or(Error::SingularGram(cond))
}

/// Petrov-Galerkin projection: `Â = (WᵀV)⁻¹WᵀAV`, `Ĥ = (WᵀV)⁻¹WᵀH(V⊗V)`,
/// `N̂_k = (WᵀV)⁻¹WᵀN_kV`, `B̂ = (WᵀV)⁻¹WᵀB`, `Ĉ = CV`. With `E` present
/// `(WᵀEV)⁻¹` is used and the reduced `E` is the identity.
pub fn project(sys: &QBSystem, v: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<ReducedModel> {
    let n = sys.n();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
        return Err(Error::Dimension(format!("bases {} and {} for n = {n}", shape(v), shape(w))));
    }
    let g = gram_inverse(sys, v, w)?;
    let gwt = &g * w.transpose();
    let a = &gwt * (sys.a() * v);
    let b = &gwt * sys.b();
    let c = sys.c() * v;
    let n_mats = sys.n_mats().iter().map(|nk| &gwt * (nk * v)).collect();
    let h = &g * sys.h().congruence(v, w);
    let h = Hessian::dense(h)?;
    let red = QBSystem::new(a, h, n_mats, b, c, None)?;
    Ok(ReducedModel { sys: red })
}

/// Error system with `A^e = blkdiag(A, Â)`, `B^e = [B; B̂]`, `C^e = [C, −Ĉ]`,
/// `N^e_k = blkdiag(N_k, N̂_k)` and the block-diagonal Hessian acting on
/// each half of the state.
pub fn error_system(sys: &QBSystem, red: &ReducedModel) -> Result<QBSystem> {
    if sys.m() != red.system().m() || sys.p() != red.system().p() {
        return Err(Error::Dimension("full and reduced model have different input/output sizes".into()));
    }
    if sys.e().is_some() {
        return Err(Error::Invalid("error system needs E = I".into()));
    }
    let n = sys.n();
    let r = red.r();
    let mut a = DMatrix::zeros(n + r, n + r);
    a.view_mut((0, 0), (n, n)).copy_from(sys.a());
    a.view_mut((n, n), (r, r)).copy_from(red.a());
    let mut b = DMatrix::zeros(n + r, sys.m());
    b.rows_mut(0, n).copy_from(sys.b());
    b.rows_mut(n, r).copy_from(red.b());
    let mut c = DMatrix::zeros(sys.p(), n + r);
    c.columns_mut(0, n).copy_from(sys.c());
    c.columns_mut(n, r).copy_from(&(-red.c()));
    let n_mats = sys
        .n_mats()
        .iter()
        .zip(red.n_mats())
        .map(|(nk, nh)| {
            let mut m = DMatrix::zeros(n + r, n + r);
            m.view_mut((0, 0), (n, n)).copy_from(nk);
            m.view_mut((n, n), (r, r)).copy_from(nh);
            m
        })
        .collect();
    let h = Hessian::block_diag(vec![sys.h().clone(), red.system().h().clone()]);
    QBSystem::new(a, h, n_mats, b, c, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_rejects_nonpositive() {
        let sys = QBSystem::linear(DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!(matches!(rescale(&sys, 0.0), Err(Error::NonPositiveGamma(_))));
        assert!(rescale(&sys, 1.0).is_ok());
    }

    #[test]
    fn identity_projection_reproduces_linear_system() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let sys = QBSystem::linear(a.clone(), DMatrix::from_column_slice(2, 1, &[1.0, 1.0]), DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let i = DMatrix::identity(2, 2);
        let red = project(&sys, &i, &i).unwrap();
        assert_eq!(red.a(), &a);
        assert!(red.h_dense().iter().all(|v| *v == 0.0));
    }
}
