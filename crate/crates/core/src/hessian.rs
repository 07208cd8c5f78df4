//! Hessians of quadratic-bilinear systems.
//!
//! The quadratic term `H (x ⊗ x)` is carried by an order-3 tensor whose
//! mode-1 matricization is the `n × n²` matrix `H`. Entry `H[i, a·n + b]`
//! multiplies `x_a x_b` in row `i`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::kron::commutation_matrix;
use crate::tensor::{self, Field};

#[derive(Debug, Clone)]
pub enum Storage {
    /// Mode-1 matricization, `n × n²`.
    Dense(DMatrix<f64>),
    /// Row `i` equals `Σ_j A_j(i,:) ⊗ B_j(i,:)`.
    Factored(Vec<(CsrMatrix<f64>, CsrMatrix<f64>)>),
    /// Block-diagonal tensor: each block acts on its own consecutive index range.
    Blocks(Vec<Hessian>),
}

#[derive(Debug, Clone)]
pub struct Hessian {
    n: usize,
    storage: Storage,
    symmetric: bool,
}

pub(crate) fn csr_mul<T: Field>(a: &CsrMatrix<f64>, x: &[T]) -> Vec<T> {
    let (off, idx, val) = (a.row_offsets(), a.col_indices(), a.values());
    (0..a.nrows())
        .map(|i| {
            let mut s = T::zero();
            for k in off[i]..off[i + 1] {
                s += x[idx[k]].scale(val[k]);
            }
            s
        })
        .collect()
}

fn csr_tr_mul_add<T: Field>(a: &CsrMatrix<f64>, x: &[T], out: &mut [T]) {
    let (off, idx, val) = (a.row_offsets(), a.col_indices(), a.values());
    for i in 0..a.nrows() {
        let xi = x[i];
        if xi.is_zero() {
            continue;
        }
        for k in off[i]..off[i + 1] {
            out[idx[k]] += xi.scale(val[k]);
        }
    }
}

fn csr_mul_mat<T: Field>(a: &CsrMatrix<f64>, x: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let col = csr_mul(a, x.column(c).as_slice());
        out.column_mut(c).copy_from_slice(&col);
    }
    out
}

fn row_dot(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, i: usize) -> f64 {
    let ra = a.row(i);
    let rb = b.row(i);
    let (ia, va) = (ra.col_indices(), ra.values());
    let (ib, vb) = (rb.col_indices(), rb.values());
    let (mut p, mut q, mut s) = (0, 0, 0.0);
    while p < ia.len() && q < ib.len() {
        match ia[p].cmp(&ib[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                s += va[p] * vb[q];
                p += 1;
                q += 1;
            }
        }
    }
    s
}

fn scale_csr(a: &CsrMatrix<f64>, s: f64) -> CsrMatrix<f64> {
    let mut out = a.clone();
    for v in out.values_mut() {
        *v *= s;
    }
    out
}

fn to_field<T: Field>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_real)
}

impl Hessian {
    /// Dense Hessian from its mode-1 matricization. No symmetry is assumed.
    pub fn dense(h: DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n * n {
            return Err(Error::Dimension(format!("dense Hessian must be n×n², got {}×{}", h.nrows(), h.ncols())));
        }
        Ok(Hessian { n, storage: Storage::Dense(h), symmetric: false })
    }

    /// Factored Hessian; `symmetric` declares that the pairs already describe
    /// a symmetric tensor.
    pub fn factored(n: usize, pairs: Vec<(CsrMatrix<f64>, CsrMatrix<f64>)>, symmetric: bool) -> Result<Self> {
        for (a, b) in &pairs {
            for m in [a, b] {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Dimension(format!("Hessian factor must be {n}×{n}, got {}×{}", m.nrows(), m.ncols())));
                }
            }
        }
        Ok(Hessian { n, storage: Storage::Factored(pairs), symmetric })
    }

    pub fn zeros(n: usize) -> Self {
        Hessian { n, storage: Storage::Factored(Vec::new()), symmetric: true }
    }

    /// Block-diagonal Hessian from Hessians acting on consecutive state blocks.
    pub fn block_diag(blocks: Vec<Hessian>) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let symmetric = blocks.iter().all(|b| b.symmetric);
        Hessian { n, storage: Storage::Blocks(blocks), symmetric }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_zero(&self) -> bool {
        match &self.storage {
            Storage::Dense(h) => h.iter().all(|v| *v == 0.0),
            Storage::Factored(p) => p.iter().all(|(a, b)| a.nnz() == 0 || b.nnz() == 0),
            Storage::Blocks(bs) => bs.iter().all(Hessian::is_zero),
        }
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.n, "vector length {len} does not match Hessian dimension {}", self.n);
    }

    /// `H (u ⊗ v)` without forming the Kronecker product.
    pub fn apply<T: Field>(&self, u: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        self.check_len(u.len());
        self.check_len(v.len());
        DVector::from_vec(self.apply_slice(u.as_slice(), v.as_slice()))
    }

    fn apply_slice<T: Field>(&self, u: &[T], v: &[T]) -> Vec<T> {
        let n = self.n;
        match &self.storage {
            Storage::Dense(h) => {
                let mut out = vec![T::zero(); n];
                for a in 0..n {
                    if u[a].is_zero() {
                        continue;
                    }
                    for b in 0..n {
                        let w = u[a] * v[b];
                        if w.is_zero() {
                            continue;
                        }
                        let col = h.column(a * n + b);
                        for (o, &hv) in out.iter_mut().zip(col.iter()) {
                            *o += w.scale(hv);
                        }
                    }
                }
                out
            }
            Storage::Factored(pairs) => {
                let mut out = vec![T::zero(); n];
                for (a, b) in pairs {
                    let au = csr_mul(a, u);
                    let bv = csr_mul(b, v);
                    for i in 0..n {
                        out[i] += au[i] * bv[i];
                    }
                }
                out
            }
            Storage::Blocks(bs) => {
                let mut out = Vec::with_capacity(n);
                let mut o = 0;
                for b in bs {
                    out.extend(b.apply_slice(&u[o..o + b.n], &v[o..o + b.n]));
                    o += b.n;
                }
                out
            }
        }
    }

    /// `H^(2) (u ⊗ w)`, i.e. the vector with entries `wᵀ H (u ⊗ e_j)`.
    pub fn apply_mode2<T: Field>(&self, u: &DVector<T>, w: &DVector<T>) -> DVector<T> {
        self.check_len(u.len());
        self.check_len(w.len());
        DVector::from_vec(self.apply_mode2_slice(u.as_slice(), w.as_slice()))
    }

    fn apply_mode2_slice<T: Field>(&self, u: &[T], w: &[T]) -> Vec<T> {
        let n = self.n;
        match &self.storage {
            Storage::Dense(h) => {
                let mut out = vec![T::zero(); n];
                for a in 0..n {
                    if u[a].is_zero() {
                        continue;
                    }
                    for (j, o) in out.iter_mut().enumerate() {
                        let col = h.column(a * n + j);
                        let mut s = T::zero();
                        for (&wi, &hv) in w.iter().zip(col.iter()) {
                            s += wi.scale(hv);
                        }
                        *o += u[a] * s;
                    }
                }
                out
            }
            Storage::Factored(pairs) => {
                let mut out = vec![T::zero(); n];
                for (a, b) in pairs {
                    let au = csr_mul(a, u);
                    let t: Vec<T> = au.iter().zip(w).map(|(&x, &y)| x * y).collect();
                    csr_tr_mul_add(b, &t, &mut out);
                }
                out
            }
            Storage::Blocks(bs) => {
                let mut out = Vec::with_capacity(n);
                let mut o = 0;
                for b in bs {
                    out.extend(b.apply_mode2_slice(&u[o..o + b.n], &w[o..o + b.n]));
                    o += b.n;
                }
                out
            }
        }
    }

    /// `H (V ⊗ V)` as an `n × r²` matrix; column `j·r + l` is `H (V_j ⊗ V_l)`.
    pub fn apply_pairs<T: Field>(&self, v: &DMatrix<T>) -> DMatrix<T> {
        self.check_len(v.nrows());
        let n = self.n;
        let r = v.ncols();
        match &self.storage {
            Storage::Dense(h) => {
                let (x, _) = tensor::mode_product(&to_field::<T>(h), (n, n, n), 2, &v.transpose());
                let (x, _) = tensor::mode_product(&x, (n, r, n), 3, &v.transpose());
                x
            }
            Storage::Factored(pairs) => {
                let mut out = DMatrix::zeros(n, r * r);
                for (a, b) in pairs {
                    let av = csr_mul_mat(a, v);
                    let bv = csr_mul_mat(b, v);
                    for j in 0..r {
                        for l in 0..r {
                            let mut col = out.column_mut(j * r + l);
                            for i in 0..n {
                                col[i] += av[(i, j)] * bv[(i, l)];
                            }
                        }
                    }
                }
                out
            }
            Storage::Blocks(bs) => {
                let mut out = DMatrix::zeros(n, r * r);
                let mut o = 0;
                for b in bs {
                    let part = b.apply_pairs(&v.rows(o, b.n).into_owned());
                    out.rows_mut(o, b.n).copy_from(&part);
                    o += b.n;
                }
                out
            }
        }
    }

    /// `H^(2) (V ⊗ W)` as an `n × (a·b)` matrix for `V` with `a` columns and
    /// `W` with `b` columns; column `j·b + l` is `H^(2) (V_j ⊗ W_l)`.
    pub fn apply_mode2_pairs<T: Field>(&self, v: &DMatrix<T>, w: &DMatrix<T>) -> DMatrix<T> {
        self.check_len(v.nrows());
        self.check_len(w.nrows());
        let n = self.n;
        let (ra, rb) = (v.ncols(), w.ncols());
        match &self.storage {
            Storage::Dense(h) => {
                let (x, _) = tensor::mode_product(&to_field::<T>(h), (n, n, n), 1, &w.transpose());
                let (x, d) = tensor::mode_product(&x, (rb, n, n), 3, &v.transpose());
                tensor::convert(&x, d, 1, 2)
            }
            Storage::Factored(pairs) => {
                let mut out = DMatrix::zeros(n, ra * rb);
                for (a, b) in pairs {
                    let av = csr_mul_mat(a, v);
                    for j in 0..ra {
                        for l in 0..rb {
                            let t: Vec<T> = (0..n).map(|i| av[(i, j)] * w[(i, l)]).collect();
                            let mut col = vec![T::zero(); n];
                            csr_tr_mul_add(b, &t, &mut col);
                            let mut dst = out.column_mut(j * rb + l);
                            for i in 0..n {
                                dst[i] += col[i];
                            }
                        }
                    }
                }
                out
            }
            Storage::Blocks(bs) => {
                let mut out = DMatrix::zeros(n, ra * rb);
                let mut o = 0;
                for b in bs {
                    let part = b.apply_mode2_pairs(&v.rows(o, b.n).into_owned(), &w.rows(o, b.n).into_owned());
                    out.rows_mut(o, b.n).copy_from(&part);
                    o += b.n;
                }
                out
            }
        }
    }

    /// `Wᵀ H (V ⊗ V)`, an `r × r²` matrix.
    ///
    /// Dense storage goes through mode products: `Y⁽¹⁾ = WᵀH`,
    /// `Z⁽²⁾ = VᵀY⁽²⁾`, `X⁽³⁾ = VᵀZ⁽³⁾`. Factored storage evaluates
    /// `H (V ⊗ V)` row by row first.
    pub fn congruence<T: Field>(&self, v: &DMatrix<T>, w: &DMatrix<T>) -> DMatrix<T> {
        self.check_len(v.nrows());
        self.check_len(w.nrows());
        let n = self.n;
        let r = v.ncols();
        match &self.storage {
            Storage::Dense(h) => {
                let y1 = w.transpose() * to_field::<T>(h);
                let (x, d) = tensor::mode_product(&y1, (w.ncols(), n, n), 2, &v.transpose());
                let (x, _) = tensor::mode_product(&x, d, 3, &v.transpose());
                x
            }
            Storage::Factored(_) => w.transpose() * self.apply_pairs(v),
            Storage::Blocks(bs) => {
                let mut out = DMatrix::zeros(w.ncols(), r * r);
                let mut o = 0;
                for b in bs {
                    out += b.congruence(&v.rows(o, b.n).into_owned(), &w.rows(o, b.n).into_owned());
                    o += b.n;
                }
                out
            }
        }
    }

    /// `H (I ⊗ x)`; column `j` is `H (e_j ⊗ x)`.
    pub fn jacobian_term(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.check_len(x.len());
        let n = self.n;
        match &self.storage {
            Storage::Dense(h) => {
                let mut out = DMatrix::zeros(n, n);
                for j in 0..n {
                    let block = h.columns(j * n, n);
                    out.set_column(j, &(block * x));
                }
                out
            }
            Storage::Factored(pairs) => {
                let mut out = DMatrix::zeros(n, n);
                for (a, b) in pairs {
                    let bx = csr_mul(b, x.as_slice());
                    for (i, row) in a.row_iter().enumerate() {
                        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                            out[(i, j)] += v * bx[i];
                        }
                    }
                }
                out
            }
            Storage::Blocks(bs) => {
                let mut out = DMatrix::zeros(n, n);
                let mut o = 0;
                for b in bs {
                    let part = b.jacobian_term(&x.rows(o, b.n).into_owned());
                    out.view_mut((o, o), (b.n, b.n)).copy_from(&part);
                    o += b.n;
                }
                out
            }
        }
    }

    /// Dense mode-1 matricization.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        match &self.storage {
            Storage::Dense(h) => h.clone(),
            Storage::Factored(pairs) => {
                let mut out = DMatrix::zeros(n, n * n);
                for (a, b) in pairs {
                    for i in 0..n {
                        let ra = a.row(i);
                        let rb = b.row(i);
                        for (&ja, &va) in ra.col_indices().iter().zip(ra.values()) {
                            for (&jb, &vb) in rb.col_indices().iter().zip(rb.values()) {
                                out[(i, ja * n + jb)] += va * vb;
                            }
                        }
                    }
                }
                out
            }
            Storage::Blocks(bs) => {
                let mut out = DMatrix::zeros(n, n * n);
                let mut o = 0;
                for b in bs {
                    let d = b.to_dense();
                    let m = b.n;
                    for i in 0..m {
                        for a in 0..m {
                            for c in 0..m {
                                out[(o + i, (o + a) * n + o + c)] = d[(i, a * m + c)];
                            }
                        }
                    }
                    o += m;
                }
                out
            }
        }
    }

    /// Mode-`mu` matricization (1, 2 or 3) of the dense tensor.
    pub fn mode(&self, mu: u8) -> DMatrix<f64> {
        let n = self.n;
        tensor::convert(&self.to_dense(), (n, n, n), 1, mu)
    }

    /// Symmetric part `½ (H + H S)`; the quadratic form is unchanged.
    pub fn symmetrize(&self) -> Hessian {
        if self.symmetric {
            return self.clone();
        }
        let n = self.n;
        let storage = match &self.storage {
            Storage::Dense(h) => {
                let hs = commutation_matrix(n, n).right_apply(h);
                Storage::Dense((h + hs) * 0.5)
            }
            Storage::Factored(pairs) => Storage::Factored(
                pairs
                    .iter()
                    .flat_map(|(a, b)| [(scale_csr(a, 0.5), b.clone()), (scale_csr(b, 0.5), a.clone())])
                    .collect(),
            ),
            Storage::Blocks(bs) => Storage::Blocks(bs.iter().map(Hessian::symmetrize).collect()),
        };
        Hessian { n, storage, symmetric: true }
    }

    /// Checks `H(u⊗v) = H(v⊗u)` on fixed probe vectors.
    pub fn probe_symmetry(&self) -> bool {
        let n = self.n;
        if n == 0 {
            return true;
        }
        let u = DVector::from_fn(n, |i, _| (1.3 * i as f64 + 0.7).sin());
        let v = DVector::from_fn(n, |i, _| (0.9 * i as f64 * i as f64 + 0.2).cos());
        let huv = self.apply(&u, &v);
        let hvu = self.apply(&v, &u);
        let scale = huv.norm().max(hvu.norm());
        (huv - hvu).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    pub fn scaled(&self, s: f64) -> Hessian {
        let storage = match &self.storage {
            Storage::Dense(h) => Storage::Dense(h * s),
            Storage::Factored(pairs) => Storage::Factored(pairs.iter().map(|(a, b)| (scale_csr(a, s), b.clone())).collect()),
            Storage::Blocks(bs) => Storage::Blocks(bs.iter().map(|b| b.scaled(s)).collect()),
        };
        Hessian { n: self.n, storage, symmetric: self.symmetric }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    fn frobenius_sq(&self) -> f64 {
        match &self.storage {
            Storage::Dense(h) => h.norm_squared(),
            Storage::Factored(pairs) => {
                let mut s = 0.0;
                for i in 0..self.n {
                    for (a, b) in pairs {
                        for (c, d) in pairs {
                            s += row_dot(a, c, i) * row_dot(b, d, i);
                        }
                    }
                }
                s.max(0.0)
            }
            Storage::Blocks(bs) => bs.iter().map(Hessian::frobenius_sq).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;

    fn explicit(h: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        h * crate::kron::kron_vec(u, v)
    }

    #[test]
    fn symmetrize_single_product() {
        let mut h = DMatrix::zeros(2, 4);
        h[(0, 1)] = 1.0;
        let hs = Hessian::dense(h.clone()).unwrap().symmetrize();
        let d = hs.to_dense();
        assert_eq!(d[(0, 1)], 0.5);
        assert_eq!(d[(0, 2)], 0.5);
        let x = DVector::from_vec(vec![0.3, -1.7]);
        let a = explicit(&h, &x, &x);
        let b = hs.apply(&x, &x);
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn factored_matches_dense() {
        let n = 3;
        let mut a = CooMatrix::new(n, n);
        let mut b = CooMatrix::new(n, n);
        a.push(0, 1, 2.0);
        a.push(2, 0, -1.0);
        b.push(0, 2, 0.5);
        b.push(2, 2, 3.0);
        b.push(1, 1, 4.0);
        let hf = Hessian::factored(n, vec![(CsrMatrix::from(&a), CsrMatrix::from(&b))], false).unwrap();
        let hd = hf.to_dense();
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![0.25, 1.0, 3.0]);
        assert!((hf.apply(&u, &v) - explicit(&hd, &u, &v)).norm() < 1e-14);
        let hs = hf.symmetrize();
        let hds = Hessian::dense(hd).unwrap().symmetrize();
        assert!((hs.to_dense() - hds.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn zero_hessian() {
        let h = Hessian::zeros(4);
        let u = DVector::from_element(4, 1.0);
        assert_eq!(h.apply(&u, &u), DVector::zeros(4));
        assert!(h.is_zero());
    }
}
