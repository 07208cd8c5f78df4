//! Real bases from complex solves, orthonormalization and PSD square roots.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::schur::C64;

/// Replaces each conjugate pair of columns by `(Re v, Im v)` and keeps real
/// columns as they are.
pub fn realify_basis(vc: &DMatrix<C64>, lam: &[C64]) -> Result<DMatrix<f64>> {
    let r = lam.len();
    if vc.ncols() != r {
        return Err(Error::Dimension(format!("{} columns for {} eigenvalues", vc.ncols(), r)));
    }
    let n = vc.nrows();
    let mut out = DMatrix::zeros(n, r);
    let mut k = 0;
    while k < r {
        let l = lam[k];
        let scale = l.norm().max(1.0);
        if l.im.abs() <= 1e-13 * scale {
            for i in 0..n {
                out[(i, k)] = vc[(i, k)].re;
            }
            k += 1;
        } else {
            if k + 1 >= r || (lam[k + 1] - l.conj()).norm() > 1e-10 * scale {
                return Err(Error::PairingViolation(k));
            }
            for i in 0..n {
                out[(i, k)] = vc[(i, k)].re;
                out[(i, k + 1)] = vc[(i, k)].im;
            }
            k += 2;
        }
    }
    Ok(out)
}

/// Orthonormal basis of the column span via QR with column pivoting. Rank
/// loss is padded with random orthogonal directions; the second return value
/// is the detected numerical rank.
pub fn orth(v: &DMatrix<f64>, seed: u64) -> (DMatrix<f64>, usize) {
    let (n, r) = v.shape();
    if r == 0 {
        return (DMatrix::zeros(n, 0), 0);
    }
    let qr = v.clone().col_piv_qr();
    let rr = qr.r();
    let q = qr.q();
    let d0 = rr[(0, 0)].abs();
    let mut rank = 0;
    for i in 0..r.min(n) {
        if rr[(i, i)].abs() > 1e-13 * d0 && d0 > 0.0 {
            rank += 1;
        } else {
            break;
        }
    }
    let mut out = DMatrix::zeros(n, r);
    for j in 0..rank {
        out.set_column(j, &q.column(j));
    }
    if rank < r {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = rank;
        while j < r {
            let mut x = nalgebra::DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            for _ in 0..2 {
                for k in 0..j {
                    let c = out.column(k).dot(&x);
                    x -= out.column(k) * c;
                }
            }
            let nx = x.norm();
            if nx > 1e-8 {
                out.set_column(j, &(x / nx));
                j += 1;
            }
        }
    }
    (out, rank)
}

/// `L` with `L Lᵀ ≈ P` from the symmetric eigendecomposition; negative
/// eigenvalues are clipped and negligible ones dropped.
pub fn psd_factor(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-16 * lmax;
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > floor).collect();
    let mut l = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        l.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    l
}

/// Square-root factor of the same size as `P` (clipped columns are zero).
pub fn psd_sqrt_full(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut l = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        l.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realify_pair() {
        let vc = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 2.0), C64::new(1.0, -2.0), C64::new(3.0, -1.0), C64::new(3.0, 1.0)]);
        let lam = [C64::new(-1.0, 1.0), C64::new(-1.0, -1.0)];
        let v = realify_basis(&vc, &lam).unwrap();
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, -1.0]));
        assert!(realify_basis(&vc, &[C64::new(-1.0, 1.0), C64::new(-2.0, 0.0)]).is_err());
    }

    #[test]
    fn orth_pads_rank_loss() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        let (q, rank) = orth(&v, 7);
        assert_eq!(rank, 1);
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
