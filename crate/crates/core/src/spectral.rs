//! Eigendecomposition of small reduced matrices and eigenvalue bookkeeping.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::schur::{complex_schur, C64};

/// `Â = R diag(Λ) R⁻¹`.
#[derive(Debug, Clone)]
pub struct SpectralFactors {
    pub r: DMatrix<C64>,
    pub lambda: Vec<C64>,
    pub rinv: DMatrix<C64>,
    pub cond: f64,
}

pub const COND_LIMIT: f64 = 1e12;

/// Ordering by real part, then `|Im|`, then `Im`: conjugate pairs stay
/// adjacent with the negative imaginary part first.
pub fn eig_order(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(a.im.total_cmp(&b.im))
}

pub fn sort_eigs(lam: &mut [C64]) {
    lam.sort_by(eig_order);
}

fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

fn cond2(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Eigenvalues and right eigenvectors of a real matrix, sorted by
/// [`eig_order`], with conjugate pairs carrying conjugate eigenvectors and
/// real eigenvalues carrying real eigenvectors.
pub fn spectral_decompose(a: &DMatrix<f64>) -> Result<SpectralFactors> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("square matrix expected, got {}×{}", n, a.ncols())));
    }
    let cs = complex_schur(a)?;
    let t = &cs.t;
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * tnorm;
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[i] = -s / d;
        }
        let x = &cs.u * nalgebra::DVector::from_vec(y);
        vecs.set_column(k, &(&x / C64::new(x.norm(), 0.0)));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig_order(&t[(i, i)], &t[(j, j)]));
    let mut lambda: Vec<C64> = idx.iter().map(|&i| t[(i, i)]).collect();
    let mut r = DMatrix::<C64>::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        r.set_column(c, &vecs.column(i));
    }
    let mut k = 0;
    while k < n {
        if lambda[k].im == 0.0 {
            // rotate the phase so the column is real
            let col = r.column(k);
            let (imax, _) = col.iter().enumerate().fold((0, -1.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
            let ph = col[imax].conj() / col[imax].norm();
            let re: Vec<C64> = col.iter().map(|v| C64::new((v * ph).re, 0.0)).collect();
            let nrm = re.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
            for (i, v) in re.iter().enumerate() {
                r[(i, k)] = v / nrm;
            }
            k += 1;
        } else {
            if k + 1 >= n || lambda[k + 1] != lambda[k].conj() {
                return Err(Error::PairingViolation(k));
            }
            // keep the positive-imaginary vector, mirror it into its partner
            let pos = r.column(k + 1).into_owned();
            r.set_column(k, &pos.map(|v| v.conj()));
            lambda[k + 1] = lambda[k].conj();
            k += 2;
        }
    }
    let cond = cond2(&r);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::NonDiagonalizable(cond));
    }
    let rinv = r.clone().try_inverse().ok_or(Error::NonDiagonalizable(f64::INFINITY))?;
    Ok(SpectralFactors { r, lambda, rinv, cond })
}

impl SpectralFactors {
    /// `R diag(Λ) R⁻¹`, real part.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.lambda.clone()));
        (&self.r * d * &self.rinv).map(|v| v.re)
    }

    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.lambda.clone()));
        (to_c(a) * &self.r - &self.r * d).norm()
    }
}

/// Mirrors eigenvalues with positive real part into the left half plane;
/// purely imaginary ones are pushed left by `eps_shift`.
pub fn reflect_unstable(lam: &[C64], eps_shift: f64) -> Vec<C64> {
    lam.iter()
        .map(|l| {
            if l.re > 0.0 {
                C64::new(-l.re, l.im)
            } else if l.re == 0.0 {
                C64::new(-eps_shift, l.im)
            } else {
                *l
            }
        })
        .collect()
}

/// Minimum-cost perfect assignment on a square cost matrix; `result[i]` is the
/// column assigned to row `i`.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols());
    // potentials, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

fn min_gap(lam: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..lam.len() {
        for j in (i + 1)..lam.len() {
            g = g.min((lam[i] - lam[j]).norm());
        }
    }
    g
}

/// Largest relative eigenvalue change `max_i |μ_i − λ_i| / |λ_i|` between
/// two iterates. Pairs follow the sorted order unless eigenvalues nearly
/// coincide, in which case an optimal assignment is used.
pub fn eig_change(old: &[C64], new: &[C64]) -> f64 {
    assert_eq!(old.len(), new.len());
    let n = old.len();
    if n == 0 {
        return 0.0;
    }
    let mut a = old.to_vec();
    let mut b = new.to_vec();
    sort_eigs(&mut a);
    sort_eigs(&mut b);
    let scale = a.iter().chain(b.iter()).map(|l| l.norm()).fold(0.0, f64::max);
    let rel = |x: C64, y: C64| {
        let d = (x - y).norm();
        if x.norm() > 0.0 {
            d / x.norm()
        } else {
            d
        }
    };
    let collide = min_gap(&a).min(min_gap(&b)) <= 1e-8 * scale;
    if collide {
        let cost = DMatrix::from_fn(n, n, |i, j| (a[i] - b[j]).norm());
        let asg = hungarian(&cost);
        (0..n).map(|i| rel(a[i], b[asg[i]])).fold(0.0, f64::max)
    } else {
        (0..n).map(|i| rel(a[i], b[i])).fold(0.0, f64::max)
    }
}
