//! Semi-discretized benchmark PDEs lifted to QB form.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::hessian::Hessian;
use crate::system::QBSystem;

/// Neighbour-sum stencil: ones on both off-diagonals and a doubled entry
/// `X(k, k−1) = 2` for a homogeneous Neumann end. With `left_neumann` the
/// first row carries `X(1, 2) = 2` as well.
fn stencil(k: usize, left_neumann: bool) -> Vec<Vec<(usize, f64)>> {
    (0..k)
        .map(|i| {
            let mut row = Vec::new();
            if i > 0 {
                row.push((i - 1, if i == k - 1 { 2.0 } else { 1.0 }));
            }
            if i + 1 < k {
                row.push((i + 1, if i == 0 && left_neumann { 2.0 } else { 1.0 }));
            }
            row
        })
        .collect()
}

/// Accumulates Hessian factor pairs; each pair holds at most one
/// `a ⊗ b` term per row.
struct Pairs {
    n: usize,
    pairs: Vec<(CooMatrix<f64>, CooMatrix<f64>)>,
}

impl Pairs {
    fn new(n: usize, count: usize) -> Self {
        Pairs { n, pairs: (0..count).map(|_| (CooMatrix::new(n, n), CooMatrix::new(n, n))).collect() }
    }

    fn term(&mut self, p: usize, row: usize, a: &[(usize, f64)], b: &[(usize, f64)]) {
        let (pa, pb) = &mut self.pairs[p];
        for &(j, v) in a {
            pa.push(row, j, v);
        }
        for &(j, v) in b {
            pb.push(row, j, v);
        }
    }

    fn build(self) -> Result<Hessian> {
        let pairs = self.pairs.iter().map(|(a, b)| (CsrMatrix::from(a), CsrMatrix::from(b))).collect();
        Hessian::factored(self.n, pairs, true)
    }
}

/// Chafee-Infante `v_t + v³ = v_xx + v` on `(0, 1)` with `v(0, t) = u(t)`,
/// `v_x(1, t) = 0`, lifted with `w = v²`. States `(v_1..v_k, w_1..w_k)` at
/// `x_j = j/k`; the Dirichlet node is eliminated. Output `v(1, t)`.
pub fn chafee_infante(k: usize) -> Result<QBSystem> {
    if k < 3 {
        return Err(Error::Invalid(format!("Chafee-Infante needs k ≥ 3, got {k}")));
    }
    let n = 2 * k;
    let h = 1.0 / k as f64;
    let ih2 = 1.0 / (h * h);
    let x = stencil(k, false);

    let mut a = DMatrix::zeros(n, n);
    for i in 0..k {
        a[(i, i)] = 1.0 - 2.0 * ih2;
        for &(j, v) in &x[i] {
            a[(i, j)] = v * ih2;
        }
        a[(k + i, k + i)] = 2.0 - 4.0 * ih2;
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(0, 0)] = ih2;
    let mut n1 = DMatrix::zeros(n, n);
    n1[(k, 0)] = 2.0 * ih2;
    let mut c = DMatrix::zeros(1, n);
    c[(0, k - 1)] = 1.0;

    let mut hp = Pairs::new(n, 3);
    for i in 0..k {
        // −v_i w_i
        hp.term(0, i, &[(i, -0.5)], &[(k + i, 1.0)]);
        hp.term(1, i, &[(k + i, -0.5)], &[(i, 1.0)]);
        // −2 w_i² + (2/h²) v_i (X v)_i
        let xs: Vec<(usize, f64)> = x[i].iter().map(|&(j, v)| (j, v * ih2)).collect();
        hp.term(0, k + i, &[(k + i, -2.0)], &[(k + i, 1.0)]);
        hp.term(1, k + i, &[(i, ih2)], &x[i]);
        hp.term(2, k + i, &xs, &[(i, 1.0)]);
    }
    Ok(QBSystem::new(a, hp.build()?, vec![n1], b, c, None)?.with_label(format!("chafee-infante k={k}")))
}

pub const FHN_EPS: f64 = 0.015;
pub const FHN_H: f64 = 0.5;
pub const FHN_GAMMA: f64 = 2.0;
pub const FHN_Q: f64 = 0.05;
pub const FHN_L: f64 = 0.3;

fn fhn_dx(k: usize) -> f64 {
    FHN_L / (k - 1) as f64
}

/// FitzHugh-Nagumo
///
/// ```text
/// ε v_t = ε² v_xx + v(v − 0.1)(1 − v) − w + q
///   w_t = h v − γ w + q
/// ```
///
/// on `[0, L]` with `v_x(0, t) = i₀(t)`, `v_x(L, t) = 0`, lifted with
/// `z = v²`. States `(v, w, z)` on `k` nodes including both ends; inputs
/// `(i₀, u₂)` where the constant `q` enters through `u₂ ≡ 1`; outputs
/// `v(0, t)`, `w(0, t)`.
pub fn fitzhugh_nagumo(k: usize) -> Result<QBSystem> {
    if k < 3 {
        return Err(Error::Invalid(format!("FitzHugh-Nagumo needs k ≥ 3, got {k}")));
    }
    let (eps, q) = (FHN_EPS, FHN_Q);
    let n = 3 * k;
    let dx = fhn_dx(k);
    let d2 = eps / (dx * dx);
    let x = stencil(k, true);
    let (iv, iw, iz) = (0, k, 2 * k);

    let mut a = DMatrix::zeros(n, n);
    for i in 0..k {
        a[(iv + i, iv + i)] = -2.0 * d2 - 0.1 / eps;
        for &(j, v) in &x[i] {
            a[(iv + i, iv + j)] = v * d2;
        }
        a[(iv + i, iz + i)] = 1.1 / eps;
        a[(iv + i, iw + i)] = -1.0 / eps;
        a[(iw + i, iv + i)] = FHN_H;
        a[(iw + i, iw + i)] = -FHN_GAMMA;
        a[(iz + i, iz + i)] = -4.0 * d2 - 0.2 / eps;
    }
    let mut b = DMatrix::zeros(n, 2);
    b[(iv, 0)] = -2.0 * eps / dx;
    for i in 0..k {
        b[(iv + i, 1)] = q / eps;
        b[(iw + i, 1)] = q;
    }
    let mut n1 = DMatrix::zeros(n, n);
    n1[(iz, iv)] = -4.0 * eps / dx;
    let mut n2 = DMatrix::zeros(n, n);
    for i in 0..k {
        n2[(iz + i, iv + i)] = 2.0 * q / eps;
    }
    let mut c = DMatrix::zeros(2, n);
    c[(0, iv)] = 1.0;
    c[(1, iw)] = 1.0;

    let mut hp = Pairs::new(n, 7);
    for i in 0..k {
        // −v_i z_i / ε
        hp.term(0, iv + i, &[(iv + i, -0.5 / eps)], &[(iz + i, 1.0)]);
        hp.term(1, iv + i, &[(iz + i, -0.5 / eps)], &[(iv + i, 1.0)]);
        // (2ε/Δx²) v_i (X v)_i + (2.2 v_i z_i − 2 z_i² − 2 v_i w_i) / ε
        let xs: Vec<(usize, f64)> = x[i].iter().map(|&(j, v)| (iv + j, v)).collect();
        let xd: Vec<(usize, f64)> = x[i].iter().map(|&(j, v)| (iv + j, v * d2)).collect();
        hp.term(0, iz + i, &[(iv + i, d2)], &xs);
        hp.term(1, iz + i, &xd, &[(iv + i, 1.0)]);
        hp.term(2, iz + i, &[(iv + i, 1.1 / eps)], &[(iz + i, 1.0)]);
        hp.term(3, iz + i, &[(iz + i, 1.1 / eps)], &[(iv + i, 1.0)]);
        hp.term(4, iz + i, &[(iz + i, -2.0 / eps)], &[(iz + i, 1.0)]);
        hp.term(5, iz + i, &[(iv + i, -1.0 / eps)], &[(iw + i, 1.0)]);
        hp.term(6, iz + i, &[(iw + i, -1.0 / eps)], &[(iv + i, 1.0)]);
    }
    Ok(QBSystem::new(a, hp.build()?, vec![n1, n2], b, c, None)?.with_label(format!("fitzhugh-nagumo k={k}")))
}

/// The FitzHugh-Nagumo discretization before lifting: states `(v, w)`,
/// cubic right-hand side.
#[derive(Debug, Clone)]
pub struct CubicFhn {
    pub k: usize,
    dx: f64,
    x: Vec<Vec<(usize, f64)>>,
}

impl CubicFhn {
    pub fn new(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::Invalid(format!("FitzHugh-Nagumo needs k ≥ 3, got {k}")));
        }
        Ok(CubicFhn { k, dx: fhn_dx(k), x: stencil(k, true) })
    }

    pub fn dim(&self) -> usize {
        2 * self.k
    }

    pub fn rhs(&self, s: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (k, eps) = (self.k, FHN_EPS);
        let d2 = eps / (self.dx * self.dx);
        let q = FHN_Q * u[1];
        let mut f = DVector::zeros(2 * k);
        for i in 0..k {
            let v = s[i];
            let w = s[k + i];
            let nb: f64 = self.x[i].iter().map(|&(j, c)| c * s[j]).sum();
            let mut dv = d2 * (nb - 2.0 * v) + (v * (v - 0.1) * (1.0 - v) - w + q) / eps;
            if i == 0 {
                dv -= 2.0 * eps / self.dx * u[0];
            }
            f[i] = dv;
            f[k + i] = FHN_H * v - FHN_GAMMA * w + q;
        }
        f
    }

    pub fn jacobian(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let (k, eps) = (self.k, FHN_EPS);
        let d2 = eps / (self.dx * self.dx);
        let mut j = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            let v = s[i];
            let fp = -3.0 * v * v + 2.2 * v - 0.1;
            j[(i, i)] = -2.0 * d2 + fp / eps;
            for &(c, val) in &self.x[i] {
                j[(i, c)] = val * d2;
            }
            j[(i, k + i)] = -1.0 / eps;
            j[(k + i, i)] = FHN_H;
            j[(k + i, k + i)] = -FHN_GAMMA;
        }
        j
    }

    /// Outputs `v(0, t)`, `w(0, t)`.
    pub fn output(&self, s: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![s[0], s[self.k]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let s = chafee_infante(10).unwrap();
        assert_eq!((s.n(), s.m(), s.p()), (20, 1, 1));
        let f = fitzhugh_nagumo(10).unwrap();
        assert_eq!((f.n(), f.m(), f.p()), (30, 2, 2));
    }

    #[test]
    fn lifted_rhs_matches_cubic_on_the_lift_manifold() {
        let k = 6;
        let sys = fitzhugh_nagumo(k).unwrap();
        let cubic = CubicFhn::new(k).unwrap();
        let v: Vec<f64> = (0..k).map(|i| 0.3 * (i as f64).sin() + 0.2).collect();
        let w: Vec<f64> = (0..k).map(|i| 0.1 * (i as f64).cos()).collect();
        let mut x = DVector::zeros(3 * k);
        let mut s = DVector::zeros(2 * k);
        for i in 0..k {
            x[i] = v[i];
            x[k + i] = w[i];
            x[2 * k + i] = v[i] * v[i];
            s[i] = v[i];
            s[k + i] = w[i];
        }
        let u = DVector::from_vec(vec![0.7, 1.0]);
        let fl = sys.rhs(&x, &u);
        let fc = cubic.rhs(&s, &u);
        for i in 0..2 * k {
            assert!((fl[i] - fc[i]).abs() <= 1e-10 * fc[i].abs().max(1.0), "row {i}");
        }
        for i in 0..k {
            let dz = 2.0 * v[i] * fc[i];
            assert!((fl[2 * k + i] - dz).abs() <= 1e-10 * dz.abs().max(1.0), "lift row {i}");
        }
    }
}
