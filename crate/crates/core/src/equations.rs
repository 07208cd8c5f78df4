//! Lyapunov and diagonally shifted Sylvester equations.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schur::{complex_schur, ComplexSchur, C64};

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Solves `T z = y` for upper triangular `T + shift·I`, in place.
fn upper_solve(t: &DMatrix<C64>, shift: C64, z: &mut [C64]) {
    let n = z.len();
    for i in (0..n).rev() {
        let mut s = z[i];
        for j in (i + 1)..n {
            s -= t[(i, j)] * z[j];
        }
        z[i] = s / (t[(i, i)] + shift);
    }
}

/// Solves `(Tᴴ + shift·I) z = y` in place (`Tᴴ` is lower triangular).
fn lower_adjoint_solve(t: &DMatrix<C64>, shift: C64, z: &mut [C64]) {
    let n = z.len();
    for i in 0..n {
        let mut s = z[i];
        for j in 0..i {
            s -= t[(j, i)].conj() * z[j];
        }
        z[i] = s / (t[(i, i)].conj() + shift);
    }
}

/// Solves `(Tᵀ + shift·I) z = y` in place.
fn lower_transpose_solve(t: &DMatrix<C64>, shift: C64, z: &mut [C64]) {
    let n = z.len();
    for i in 0..n {
        let mut s = z[i];
        for j in 0..i {
            s -= t[(j, i)] * z[j];
        }
        z[i] = s / (t[(i, i)] + shift);
    }
}

/// Lyapunov solver built on one Schur factorization of `A`.
#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    schur: ComplexSchur,
}

impl LyapunovSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let schur = complex_schur(a)?;
        let max_re = schur.t.diagonal().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        if a.nrows() > 0 && max_re >= 0.0 {
            return Err(Error::NotStable(max_re));
        }
        Ok(LyapunovSolver { schur })
    }

    pub fn schur(&self) -> &ComplexSchur {
        &self.schur
    }

    /// `A X + X Aᵀ + Q = 0`.
    pub fn solve(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let (u, t) = (&self.schur.u, &self.schur.t);
        let n = t.nrows();
        let f = u.adjoint() * to_c(q) * u;
        // T Y + Y Tᴴ = -F, column j couples to columns k > j
        let mut y = DMatrix::<C64>::zeros(n, n);
        for j in (0..n).rev() {
            let mut rhs: Vec<C64> = f.column(j).iter().map(|v| -v).collect();
            for k in (j + 1)..n {
                let c = t[(j, k)].conj();
                if c.is_zero() {
                    continue;
                }
                let yk = y.column(k);
                for (r, v) in rhs.iter_mut().zip(yk.iter()) {
                    *r -= c * v;
                }
            }
            upper_solve(t, t[(j, j)].conj(), &mut rhs);
            y.column_mut(j).copy_from_slice(&rhs);
        }
        finish(u, &y)
    }

    /// `Aᵀ X + X A + Q = 0`.
    pub fn solve_transposed(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let (u, t) = (&self.schur.u, &self.schur.t);
        let n = t.nrows();
        let f = u.adjoint() * to_c(q) * u;
        // Tᴴ Y + Y T = -F solved row by row; column i of Z holds row i of Y
        let mut z = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            let mut rhs: Vec<C64> = f.row(i).iter().map(|v| -v).collect();
            for k in 0..i {
                let c = t[(k, i)].conj();
                if c.is_zero() {
                    continue;
                }
                let zk = z.column(k);
                for (r, v) in rhs.iter_mut().zip(zk.iter()) {
                    *r -= c * v;
                }
            }
            lower_transpose_solve(t, t[(i, i)].conj(), &mut rhs);
            z.column_mut(i).copy_from_slice(&rhs);
        }
        finish(u, &z.transpose())
    }
}

fn finish(u: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<f64> {
    let x = (u * y * u.adjoint()).map(|v| v.re);
    (&x + x.transpose()) * 0.5
}

/// Unique `X` with `A X + X Aᵀ + Q = 0` for Hurwitz `A`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a, q)?;
    Ok(LyapunovSolver::new(a)?.solve(q))
}

fn check_square(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!("Lyapunov data {}×{} / {}×{}", a.nrows(), a.ncols(), q.nrows(), q.ncols())));
    }
    Ok(())
}

/// Column-wise solver for `−E V Λ − A V = Rhs` with diagonal `Λ`, i.e.
/// `v_i = −(A + λ_i E)⁻¹ rhs_i`, and for the transposed operator.
#[derive(Debug, Clone)]
pub enum ShiftedSolver {
    /// `E = I`: one Schur factorization of `A` turns every shift into a
    /// triangular solve.
    Schur { schur: ComplexSchur, scale: f64 },
    /// General `E`: one LU per shift.
    Dense { a: DMatrix<f64>, e: DMatrix<f64>, scale: f64 },
}

const SINGULAR_TOL: f64 = 1e-14;

impl ShiftedSolver {
    pub fn new(a: &DMatrix<f64>, e: Option<&DMatrix<f64>>) -> Result<Self> {
        let scale = a.norm().max(f64::MIN_POSITIVE);
        match e {
            None => Ok(ShiftedSolver::Schur { schur: complex_schur(a)?, scale }),
            Some(e) => Ok(ShiftedSolver::Dense { a: a.clone(), e: e.clone(), scale }),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ShiftedSolver::Schur { schur, .. } => schur.t.nrows(),
            ShiftedSolver::Dense { a, .. } => a.nrows(),
        }
    }

    /// Solves `−E V Λ − A V = Rhs` (or with `Aᵀ`, `Eᵀ` when `transpose`).
    pub fn solve(&self, lam: &[C64], rhs: &DMatrix<C64>, transpose: bool) -> Result<DMatrix<C64>> {
        let n = self.dim();
        if rhs.nrows() != n || rhs.ncols() != lam.len() {
            return Err(Error::Dimension(format!("Sylvester rhs {}×{} for n = {n}, r = {}", rhs.nrows(), rhs.ncols(), lam.len())));
        }
        let r = lam.len();
        // conjugate columns are reused when shift and rhs are conjugate
        let twin: Vec<Option<usize>> = (0..r)
            .map(|i| {
                if i == 0 || lam[i].im == 0.0 {
                    return None;
                }
                let p = i - 1;
                let lam_ok = lam[p] == lam[i].conj();
                let rhs_ok = lam_ok && rhs.column(p).iter().zip(rhs.column(i).iter()).all(|(a, b)| *a == b.conj());
                if rhs_ok {
                    Some(p)
                } else {
                    None
                }
            })
            .collect();
        let cols: Vec<Result<Option<Vec<C64>>>> = (0..r)
            .into_par_iter()
            .map(|i| {
                if twin[i].is_some() {
                    return Ok(None);
                }
                let b = rhs.column(i).into_owned();
                self.solve_one(lam[i], &b, transpose).map(Some)
            })
            .collect();
        let mut out = DMatrix::zeros(n, r);
        let mut solved: Vec<Option<Vec<C64>>> = Vec::with_capacity(r);
        for c in cols {
            solved.push(c?);
        }
        for i in 0..r {
            match (&solved[i], twin[i]) {
                (Some(col), _) => out.column_mut(i).copy_from_slice(col),
                (None, Some(p)) => {
                    let src: Vec<C64> = out.column(p).iter().map(|v| v.conj()).collect();
                    out.column_mut(i).copy_from_slice(&src);
                }
                (None, None) => unreachable!(),
            }
        }
        Ok(out)
    }

    fn solve_one(&self, lam: C64, b: &DVector<C64>, transpose: bool) -> Result<Vec<C64>> {
        match self {
            ShiftedSolver::Schur { schur, scale } => {
                let t = &schur.t;
                let n = t.nrows();
                let dmin = (0..n).map(|i| (t[(i, i)] + lam).norm()).fold(f64::INFINITY, f64::min);
                if n > 0 && dmin <= SINGULAR_TOL * scale.max(lam.norm()) {
                    return Err(Error::SingularShift(format!("{lam}")));
                }
                // Aᵀ = Aᴴ = U Tᴴ Uᴴ for real A
                let mut z: Vec<C64> = (schur.u.adjoint() * b).iter().copied().collect();
                if transpose {
                    lower_adjoint_solve(t, lam, &mut z);
                } else {
                    upper_solve(t, lam, &mut z);
                }
                let x = &schur.u * DVector::from_vec(z);
                Ok(x.iter().map(|v| -v).collect())
            }
            ShiftedSolver::Dense { a, e, scale } => {
                let (a, e) = if transpose { (a.transpose(), e.transpose()) } else { (a.clone(), e.clone()) };
                let m = to_c(&a) + to_c(&e) * lam;
                let lu = m.lu();
                let u = lu.u();
                let umax = u.diagonal().iter().map(|v| v.norm()).fold(0.0, f64::max);
                let umin = u.diagonal().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
                if umin <= SINGULAR_TOL * umax.max(*scale) {
                    return Err(Error::SingularShift(format!("{lam}")));
                }
                let x = lu.solve(b).ok_or_else(|| Error::SingularShift(format!("{lam}")))?;
                Ok(x.iter().map(|v| -v).collect())
            }
        }
    }
}

/// `V` with `V(−diag Λ) − A V = Rhs`, column by column.
pub fn solve_sylvester_shifted(a: &DMatrix<f64>, lam: &[C64], rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if lam.is_empty() {
        return Ok(DMatrix::zeros(a.nrows(), 0));
    }
    ShiftedSolver::new(a, None)?.solve(lam, rhs, false)
}

/// Column-wise solve of `V diag(Λ) + M V = Rhs` for a general square `M`
/// (one LU per shift).
pub fn solve_shifted_general(m: &DMatrix<f64>, lam: &[C64], rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = m.nrows();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let cols: Vec<Result<DVector<C64>>> = (0..lam.len())
        .into_par_iter()
        .map(|i| {
            let mut s = to_c(m);
            for k in 0..n {
                s[(k, k)] += lam[i];
            }
            let lu = s.lu();
            let d = lu.u().diagonal();
            let umax = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let umin = d.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            if umin <= SINGULAR_TOL * umax.max(scale) {
                return Err(Error::SingularShift(format!("{}", lam[i])));
            }
            lu.solve(&rhs.column(i).into_owned()).ok_or_else(|| Error::SingularShift(format!("{}", lam[i])))
        })
        .collect();
    let mut out = DMatrix::zeros(n, lam.len());
    for (i, c) in cols.into_iter().enumerate() {
        out.set_column(i, &c?);
    }
    Ok(out)
}
