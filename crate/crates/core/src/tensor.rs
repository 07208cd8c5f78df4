//! Matricizations of order-3 tensors.
//!
//! A tensor of shape `d1×d2×d3` is held in its mode-1 matricization. Entry
//! `(i, j, k)` lives at
//!
//! * mode 1: row `i`, column `k·d2 + j`
//! * mode 2: row `j`, column `k·d1 + i`
//! * mode 3: row `k`, column `j·d1 + i`
//!
//! so the frontal slice `X_k` is the column block `k·d2 .. (k+1)·d2` of the
//! mode-1 matrix.

use nalgebra::{ComplexField, DMatrix, Scalar};
use num_traits::Zero;

pub type Dims = (usize, usize, usize);

/// Scalar types the numerical kernels are generic over (`f64` and `Complex<f64>`).
pub trait Field: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Field for T {}

fn check(m_rows: usize, m_cols: usize, dims: Dims, mode: u8) {
    let (d1, d2, d3) = dims;
    let (r, c) = match mode {
        1 => (d1, d2 * d3),
        2 => (d2, d1 * d3),
        3 => (d3, d1 * d2),
        _ => panic!("mode must be 1, 2 or 3"),
    };
    assert!(m_rows == r && m_cols == c, "matricization shape {m_rows}×{m_cols} does not fit mode {mode} of {dims:?}");
}

#[inline]
fn pos(dims: Dims, mode: u8, i: usize, j: usize, k: usize) -> (usize, usize) {
    let (d1, d2, _) = dims;
    match mode {
        1 => (i, k * d2 + j),
        2 => (j, k * d1 + i),
        _ => (k, j * d1 + i),
    }
}

/// Converts the mode-`from` matricization of a tensor with shape `dims` to
/// its mode-`to` matricization.
pub fn convert<T: Scalar + Zero + Copy>(m: &DMatrix<T>, dims: Dims, from: u8, to: u8) -> DMatrix<T> {
    check(m.nrows(), m.ncols(), dims, from);
    if from == to {
        return m.clone();
    }
    let (d1, d2, d3) = dims;
    let (r, c) = match to {
        1 => (d1, d2 * d3),
        2 => (d2, d1 * d3),
        3 => (d3, d1 * d2),
        _ => panic!("mode must be 1, 2 or 3"),
    };
    let mut out = DMatrix::zeros(r, c);
    for k in 0..d3 {
        for j in 0..d2 {
            for i in 0..d1 {
                let src = pos(dims, from, i, j, k);
                let dst = pos(dims, to, i, j, k);
                out[dst] = m[src];
            }
        }
    }
    out
}

/// Mode-`mu` product `X ×_mu M` where `x1` is the mode-1 matricization of
/// `X`. Returns the mode-1 matricization of the result and its shape.
pub fn mode_product<T: Field>(x1: &DMatrix<T>, dims: Dims, mu: u8, m: &DMatrix<T>) -> (DMatrix<T>, Dims) {
    let xm = convert(x1, dims, 1, mu);
    let ym = m * xm;
    let new_dims = match mu {
        1 => (m.nrows(), dims.1, dims.2),
        2 => (dims.0, m.nrows(), dims.2),
        _ => (dims.0, dims.1, m.nrows()),
    };
    (convert(&ym, new_dims, mu, 1), new_dims)
}
