//! Permutation matrices that show up around Kronecker products.
//!
//! A permutation is stored as an index map: row `i` carries its single one
//! in column `map[i]`, so `(P x)[i] = x[map[i]]`.

use nalgebra::{DMatrix, DVector, Scalar};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(q: usize) -> Self {
        Permutation { map: (0..q).collect() }
    }

    /// Builds a permutation from an index map, rejecting anything that is
    /// not a bijection.
    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let q = map.len();
        let mut seen = vec![false; q];
        for &j in &map {
            if j >= q || seen[j] {
                return Err(Error::Invalid(format!("index map is not a bijection on 0..{q}")));
            }
            seen[j] = true;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn transpose(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { map: inv }
    }

    /// `P x`
    pub fn apply<T: Scalar>(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.map.len(), "permutation length mismatch");
        DVector::from_iterator(self.map.len(), self.map.iter().map(|&j| x[j].clone()))
    }

    /// `Pᵀ x`
    pub fn apply_transpose<T: Scalar>(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.map.len(), "permutation length mismatch");
        let mut out = x.clone();
        for (i, &j) in self.map.iter().enumerate() {
            out[j] = x[i].clone();
        }
        out
    }

    /// `M P`: columns of `m` are permuted, column `map[i]` of the result is
    /// column `i` of `m`.
    pub fn right_apply<T: Scalar>(&self, m: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(m.ncols(), self.map.len(), "permutation length mismatch");
        let mut out = m.clone();
        for (i, &j) in self.map.iter().enumerate() {
            out.set_column(j, &m.column(i));
        }
        out
    }

    /// `P Q`
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len());
        Permutation { map: self.map.iter().map(|&j| other.map[j]).collect() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let q = self.map.len();
        let mut d = DMatrix::zeros(q, q);
        for (i, &j) in self.map.iter().enumerate() {
            d[(i, j)] = 1.0;
        }
        d
    }
}

/// Commutation matrix `S` with `S (u ⊗ v) = v ⊗ u` for `u ∈ Rⁿ`, `v ∈ Rᵐ`.
pub fn commutation_matrix(n: usize, m: usize) -> Permutation {
    assert!(n >= 1 && m >= 1);
    let mut map = vec![0; n * m];
    for a in 0..n {
        for b in 0..m {
            map[b * n + a] = a * m + b;
        }
    }
    Permutation { map }
}

/// `T_(n,m)` with `vec(X ⊗ Y) = T (vec X ⊗ vec Y)` for `X, Y` of shape n×m.
pub fn perm_t(n: usize, m: usize) -> Permutation {
    assert!(n >= 1 && m >= 1);
    let nn = n * n;
    let nm = n * m;
    let mut map = vec![0; nn * m * m];
    for j1 in 0..m {
        for j2 in 0..m {
            for i1 in 0..n {
                for i2 in 0..n {
                    let row = (i1 * n + i2) + (j1 * m + j2) * nn;
                    map[row] = (i1 + j1 * n) * nm + i2 + j2 * n;
                }
            }
        }
    }
    Permutation { map }
}

/// `M_pqr = [I_p ⊗ [I_q; 0], I_p ⊗ [0; I_r]]`, which block-diagonalizes
/// `A ⊗ blkdiag(B, C)` by congruence.
pub fn perm_m(p: usize, q: usize, r: usize) -> Permutation {
    assert!(p >= 1 && q >= 1 && r >= 1);
    let w = q + r;
    let mut map = vec![0; p * w];
    for a in 0..p {
        for b in 0..q {
            map[a * w + b] = a * q + b;
        }
        for c in 0..r {
            map[a * w + q + c] = p * q + a * r + c;
        }
    }
    Permutation { map }
}

/// Block-diagonal stacking of permutations.
pub fn block_diag(blocks: &[Permutation]) -> Permutation {
    let mut map = Vec::with_capacity(blocks.iter().map(Permutation::len).sum());
    let mut off = 0;
    for b in blocks {
        map.extend(b.map.iter().map(|&j| j + off));
        off += b.len();
    }
    Permutation { map }
}

/// The permutation pairing the partitioned error-system coordinates:
/// `blkdiag(M_{n,n,r}, M_{r,n,r})` of size `(n + r)²`.
pub fn error_system_perm(n: usize, r: usize) -> Permutation {
    block_diag(&[perm_m(n, n, r), perm_m(r, n, r)])
}

/// Dense Kronecker product of two vectors.
pub fn kron_vec<T: Scalar + nalgebra::ClosedMulAssign + Copy>(u: &DVector<T>, v: &DVector<T>) -> DVector<T> {
    let m = v.len();
    DVector::from_fn(u.len() * m, |k, _| u[k / m] * v[k % m])
}
