//! Complex Schur form of a real matrix.

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// `A = U T Uᴴ` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub u: DMatrix<C64>,
    pub t: DMatrix<C64>,
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal().iter().copied().collect()
    }
}

fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    for eps in [4.0 * f64::EPSILON, 64.0 * f64::EPSILON, 1e-13] {
        if let Some(s) = Schur::try_new(a.clone(), eps, 200 * n.max(10)) {
            return Ok(s.unpack());
        }
    }
    Err(Error::SolverBreakdown)
}

/// Eigenvalues of a real 2×2 block, complex pairs returned exactly conjugate.
fn eig2(a: f64, b: f64, c: f64, d: f64) -> (C64, C64) {
    let p = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let disc = h * h + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let s = if p >= 0.0 { s } else { -s };
        let l1 = p + s;
        // product form avoids cancellation in the smaller root
        let l2 = if l1 != 0.0 { (a * d - b * c) / l1 } else { p - s };
        (C64::new(l1, 0.0), C64::new(l2, 0.0))
    } else {
        let s = (-disc).sqrt();
        (C64::new(p, s), C64::new(p, -s))
    }
}

/// Real Schur factorization followed by unitary reduction of the 2×2 diagonal
/// blocks, so that `T` ends up triangular.
pub fn complex_schur(a: &DMatrix<f64>) -> Result<ComplexSchur> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("square matrix expected, got {}×{}", n, a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverBreakdown);
    }
    if n == 0 {
        return Ok(ComplexSchur { u: DMatrix::zeros(0, 0), t: DMatrix::zeros(0, 0) });
    }
    let (q, tr) = real_schur(a)?;
    let mut u = q.map(|v| C64::new(v, 0.0));
    let mut t = tr.map(|v| C64::new(v, 0.0));
    let mut m = n - 1;
    while m >= 1 {
        let sub = tr[(m, m - 1)];
        if sub != 0.0 {
            let (l1, l2) = eig2(tr[(m - 1, m - 1)], tr[(m - 1, m)], sub, tr[(m, m)]);
            let mu = l1 - C64::new(tr[(m, m)], 0.0);
            let rr = mu.norm().hypot(sub.abs());
            let c = mu / rr;
            let s = sub / rr;
            // G = [[conj(c), s], [-s, c]]
            let g00 = c.conj();
            let g01 = C64::new(s, 0.0);
            let g10 = C64::new(-s, 0.0);
            let g11 = c;
            for j in (m - 1)..n {
                let x = t[(m - 1, j)];
                let y = t[(m, j)];
                t[(m - 1, j)] = g00 * x + g01 * y;
                t[(m, j)] = g10 * x + g11 * y;
            }
            // right multiplication by Gᴴ = [[c, -s], [s, conj(c)]]
            for i in 0..=m {
                let x = t[(i, m - 1)];
                let y = t[(i, m)];
                t[(i, m - 1)] = x * c + y * s;
                t[(i, m)] = -x * s + y * c.conj();
            }
            for i in 0..n {
                let x = u[(i, m - 1)];
                let y = u[(i, m)];
                u[(i, m - 1)] = x * c + y * s;
                u[(i, m)] = -x * s + y * c.conj();
            }
            t[(m, m - 1)] = C64::new(0.0, 0.0);
            t[(m - 1, m - 1)] = l1;
            t[(m, m)] = l2;
            if m < 2 {
                break;
            }
            m -= 2;
        } else {
            m -= 1;
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(ComplexSchur { u, t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_rotation_block() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.3, -2.0, -2.0, 1.0, 0.0, 0.0, -3.0]);
        let s = complex_schur(&a).unwrap();
        let ac = a.map(|v| C64::new(v, 0.0));
        assert!((&s.u * &s.t * s.u.adjoint() - ac).norm() < 1e-13);
        let mut e = s.eigenvalues();
        e.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));
        assert!((e[0] - C64::new(-3.0, 0.0)).norm() < 1e-13);
        assert!((e[1] - C64::new(-1.0, -1.0)).norm() < 1e-13);
        assert!((e[2] - C64::new(-1.0, 1.0)).norm() < 1e-13);
    }
}
