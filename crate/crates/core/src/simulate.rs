//! Adaptive implicit one-step integration and output error metrics.

use std::io::Write;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::models::CubicFhn;
use crate::signals::InputSignal;
use crate::system::{QBSystem, ReducedModel};

/// `E ẋ = f(x, u)`, `y = g(x)`.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn inputs(&self) -> usize;
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    fn output(&self, x: &DVector<f64>) -> DVector<f64>;
    fn mass(&self) -> Option<&DMatrix<f64>> {
        None
    }
    /// A cheaper equivalent for repeated evaluation, if one exists.
    fn sparse_view(&self) -> Option<Box<dyn Dynamics + '_>> {
        None
    }
}

fn to_csr(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    CsrMatrix::from(&CooMatrix::from(m))
}

fn csr_mul_add(a: &CsrMatrix<f64>, x: &DVector<f64>, s: f64, out: &mut DVector<f64>) {
    let (off, idx, val) = (a.row_offsets(), a.col_indices(), a.values());
    for i in 0..a.nrows() {
        let mut acc = 0.0;
        for k in off[i]..off[i + 1] {
            acc += val[k] * x[idx[k]];
        }
        out[i] += s * acc;
    }
}

fn density(m: &DMatrix<f64>) -> f64 {
    m.iter().filter(|v| **v != 0.0).count() as f64 / m.len().max(1) as f64
}

/// QB system with `A` and `N_k` held in CSR form.
struct SparseQb<'a> {
    sys: &'a QBSystem,
    a: CsrMatrix<f64>,
    n_mats: Vec<CsrMatrix<f64>>,
}

impl Dynamics for SparseQb<'_> {
    fn dim(&self) -> usize {
        self.sys.n()
    }
    fn inputs(&self) -> usize {
        self.sys.m()
    }
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut f = self.sys.h().apply(x, x) + self.sys.b() * u;
        csr_mul_add(&self.a, x, 1.0, &mut f);
        for (k, nk) in self.n_mats.iter().enumerate() {
            if u[k] != 0.0 {
                csr_mul_add(nk, x, u[k], &mut f);
            }
        }
        f
    }
    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.sys.jacobian(x, u)
    }
    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        self.sys.output(x)
    }
    fn mass(&self) -> Option<&DMatrix<f64>> {
        self.sys.e()
    }
}

impl Dynamics for QBSystem {
    fn dim(&self) -> usize {
        self.n()
    }
    fn inputs(&self) -> usize {
        self.m()
    }
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        QBSystem::rhs(self, x, u)
    }
    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        QBSystem::jacobian(self, x, u)
    }
    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        QBSystem::output(self, x)
    }
    fn mass(&self) -> Option<&DMatrix<f64>> {
        self.e()
    }
    fn sparse_view(&self) -> Option<Box<dyn Dynamics + '_>> {
        if self.n() < 64 || density(self.a()) > 0.1 {
            return None;
        }
        let n_mats = self.n_mats().iter().map(to_csr).collect();
        Some(Box::new(SparseQb { sys: self, a: to_csr(self.a()), n_mats }))
    }
}

impl Dynamics for ReducedModel {
    fn dim(&self) -> usize {
        self.r()
    }
    fn inputs(&self) -> usize {
        self.system().m()
    }
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.system().rhs(x, u)
    }
    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.system().jacobian(x, u)
    }
    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        self.system().output(x)
    }
}

impl Dynamics for CubicFhn {
    fn dim(&self) -> usize {
        CubicFhn::dim(self)
    }
    fn inputs(&self) -> usize {
        2
    }
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        CubicFhn::rhs(self, x, u)
    }
    fn jacobian(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        CubicFhn::jacobian(self, x)
    }
    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        CubicFhn::output(self, x)
    }
}

/// One-step scheme used inside the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// TR-BDF2 with its embedded third order estimate. L-stable, and both
    /// implicit stages share one factorization.
    #[default]
    TrBdf2,
    /// Implicit midpoint with step doubling. Stiff components are not damped.
    Midpoint,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    pub scheme: Scheme,
    pub store_states: bool,
    pub x0: Option<DVector<f64>>,
    pub h0: Option<f64>,
    pub min_step: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { rtol: 1e-8, atol: 1e-10, scheme: Scheme::TrBdf2, store_states: false, x0: None, h0: None, min_step: 1e-12 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub jacobians: usize,
    pub factorizations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `n × samples`, when requested.
    pub states: Option<DMatrix<f64>>,
    /// `p × samples`
    pub outputs: DMatrix<f64>,
    pub stats: SimStats,
}

const TB_G: f64 = 2.0 - std::f64::consts::SQRT_2;
const TB_D: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
const TB_W: f64 = std::f64::consts::SQRT_2 / 4.0;
// b − b̂ for the stages at 0, γ, 1
const TB_E: [f64; 3] = [(4.0 * TB_W - 1.0) / 3.0, -1.0 / 3.0, 2.0 * TB_D / 3.0];

enum Factor {
    Dense(LU<f64, Dyn, Dyn>),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

impl Factor {
    fn new(m: DMatrix<f64>) -> Option<Factor> {
        let n = m.nrows();
        if n < 64 || density(&m) > 0.1 {
            return Some(Factor::Dense(m.lu()));
        }
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if v != 0.0 {
                    t.push(Triplet::new(i, j, v));
                }
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t).ok()?;
        a.sp_lu().ok().map(Factor::Sparse)
    }

    fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let x = match self {
            Factor::Dense(lu) => lu.solve(b)?,
            Factor::Sparse(lu) => {
                let rhs = faer::Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                let x = lu.solve(&rhs);
                DVector::from_fn(b.len(), |i, _| x[(i, 0)])
            }
        };
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

// Newton stops once the predicted remaining error is this fraction of the tolerance.
const NEWTON_KAPPA: f64 = 0.03;

struct Stepper<'a, D: Dynamics + ?Sized> {
    sys: &'a D,
    u: &'a InputSignal,
    rtol: f64,
    atol: f64,
    jac: Option<DMatrix<f64>>,
    lus: Vec<(f64, Factor)>,
    slow: bool,
    stats: SimStats,
}

type Attempt = (DVector<f64>, DVector<f64>, DVector<f64>);

enum StepFail {
    Newton,
    NonFinite,
}

impl<D: Dynamics + ?Sized> Stepper<'_, D> {
    fn weight(&self, a: &DVector<f64>, b: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..d.len() {
            let s = self.atol + self.rtol * a[i].abs().max(b[i].abs());
            m = m.max(d[i].abs() / s);
        }
        m
    }

    fn refresh_jacobian(&mut self, x: &DVector<f64>, t: f64) {
        self.jac = Some(self.sys.jacobian(x, &self.u.eval(t)));
        self.lus.clear();
        self.slow = false;
        self.stats.jacobians += 1;
    }

    fn mass_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.sys.mass() {
            Some(e) => e * x,
            None => x.clone(),
        }
    }

    /// Factorization of `E − c·J`.
    fn lu(&mut self, c: f64) -> std::result::Result<&Factor, StepFail> {
        if let Some(i) = self.lus.iter().position(|(cc, _)| *cc == c) {
            return Ok(&self.lus[i].1);
        }
        let n = self.sys.dim();
        let j = self.jac.as_ref().expect("Jacobian available");
        let m = match self.sys.mass() {
            Some(e) => e - j * c,
            None => DMatrix::identity(n, n) - j * c,
        };
        self.stats.factorizations += 1;
        if self.lus.len() >= 6 {
            self.lus.remove(0);
        }
        self.lus.push((c, Factor::new(m).ok_or(StepFail::Newton)?));
        Ok(&self.lus.last().unwrap().1)
    }

    /// Simplified Newton for `E z − c f(z, u) = rhs`.
    fn stage(&mut self, c: f64, rhs: &DVector<f64>, u: &DVector<f64>, guess: DVector<f64>) -> std::result::Result<DVector<f64>, StepFail> {
        let mut z = guess;
        let mut prev = f64::INFINITY;
        // no rate is trusted before two increments are seen
        let mut eta = 1.0;
        for it in 0..10 {
            self.stats.newton_iterations += 1;
            let g = self.mass_mul(&z) - self.sys.rhs(&z, u) * c - rhs;
            let delta = self.lu(c)?.solve(&(-g)).ok_or(StepFail::Newton)?;
            z += &delta;
            if z.iter().any(|v| !v.is_finite()) {
                return Err(StepFail::NonFinite);
            }
            let nd = self.weight(&z, &z, &delta);
            if it > 0 {
                let rate = nd / prev;
                if rate >= 0.9 {
                    return Err(StepFail::Newton);
                }
                eta = rate / (1.0 - rate);
            }
            if eta * nd <= NEWTON_KAPPA || nd <= 1e-12 {
                if it >= 4 {
                    self.slow = true;
                }
                return Ok(z);
            }
            prev = nd;
        }
        Err(StepFail::Newton)
    }

    fn midpoint(&mut self, x: &DVector<f64>, t: f64, h: f64) -> std::result::Result<DVector<f64>, StepFail> {
        // E (y − x) = (h/2) f(y); x⁺ = 2y − x
        let um = self.u.eval(t + 0.5 * h);
        let ex = self.mass_mul(x);
        let y = self.stage(0.5 * h, &ex, &um, x.clone())?;
        Ok(&y * 2.0 - x)
    }

    /// New state, local error estimate and right-hand side at the new state.
    /// `f0` is the right-hand side at `x`.
    fn attempt(&mut self, scheme: Scheme, x: &DVector<f64>, f0: &DVector<f64>, t: f64, h: f64) -> std::result::Result<Attempt, StepFail> {
        match scheme {
            Scheme::Midpoint => {
                let full = self.midpoint(x, t, h)?;
                let half = self.midpoint(x, t, 0.5 * h)?;
                let two = self.midpoint(&half, t + 0.5 * h, 0.5 * h)?;
                let est = (&two - &full) / 3.0;
                let f1 = self.sys.rhs(&two, &self.u.eval(t + h));
                Ok((two, est, f1))
            }
            Scheme::TrBdf2 => {
                let c = TB_D * h;
                let ex = self.mass_mul(x);
                let ug = self.u.eval(t + TB_G * h);
                let rhs = &ex + f0 * c;
                let z = self.stage(c, &rhs, &ug, x + f0 * (TB_G * h))?;
                // stage derivatives come from the stage equations, so the
                // Newton error does not leak into the estimate
                let fz = (self.mass_mul(&z) - rhs) / c;
                let rhs = &ex + (f0 + &fz) * (TB_W * h);
                let guess = x + (&z - x) / TB_G;
                let u1 = self.u.eval(t + h);
                let x1 = self.stage(c, &rhs, &u1, guess)?;
                let f1 = (self.mass_mul(&x1) - rhs) / c;
                let e = (f0 * TB_E[0] + fz * TB_E[1] + &f1 * TB_E[2]) * h;
                // filtered through (E − γhJ)⁻¹ so stiff components are not overestimated
                let est = self.lu(c)?.solve(&e).ok_or(StepFail::Newton)?;
                Ok((x1, est, f1))
            }
        }
    }
}

fn derivative(mass_lu: Option<&LU<f64, Dyn, Dyn>>, f: &DVector<f64>) -> DVector<f64> {
    match mass_lu {
        Some(lu) => lu.solve(f).unwrap_or_else(|| f.clone()),
        None => f.clone(),
    }
}

/// Integrates from `x0` (zero by default) over `[0, T]` and samples the
/// output at `samples` equidistant points including both ends.
pub fn simulate<D: Dynamics + ?Sized>(sys: &D, u: &InputSignal, t_end: f64, samples: usize, opts: &SimOptions) -> Result<Trajectory> {
    match sys.sparse_view() {
        Some(v) => integrate(&*v, u, t_end, samples, opts),
        None => integrate(sys, u, t_end, samples, opts),
    }
}

fn integrate<D: Dynamics + ?Sized>(sys: &D, u: &InputSignal, t_end: f64, samples: usize, opts: &SimOptions) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::Invalid(format!("horizon must be positive, got {t_end}")));
    }
    if samples < 2 {
        return Err(Error::Invalid("at least two samples are needed".into()));
    }
    if u.m() != sys.inputs() {
        return Err(Error::Dimension(format!("input has {} channels, system {}", u.m(), sys.inputs())));
    }
    let n = sys.dim();
    let times: Vec<f64> = (0..samples).map(|i| t_end * i as f64 / (samples - 1) as f64).collect();
    let mut x = opts.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    if x.len() != n {
        return Err(Error::Dimension(format!("initial state of length {} for n = {n}", x.len())));
    }
    let mass_lu = sys.mass().map(|e| e.clone().lu());
    let p = sys.output(&x).len();
    let mut outputs = DMatrix::zeros(p, samples);
    let mut states = if opts.store_states { Some(DMatrix::zeros(n, samples)) } else { None };
    let mut record = |k: usize, xs: &DVector<f64>, outputs: &mut DMatrix<f64>| {
        outputs.set_column(k, &sys.output(xs));
        if let Some(s) = states.as_mut() {
            s.set_column(k, xs);
        }
    };
    record(0, &x, &mut outputs);
    let mut next_sample = 1;

    let mut st = Stepper { sys, u, rtol: opts.rtol, atol: opts.atol, jac: None, lus: Vec::new(), slow: false, stats: SimStats::default() };
    let scheme = opts.scheme;
    let expo = 1.0 / 3.0;
    let mut t = 0.0;
    let mut h = opts.h0.unwrap_or(t_end * 1e-6).min(t_end);
    let mut fx = sys.rhs(&x, &u.eval(0.0));
    let mut dx = derivative(mass_lu.as_ref(), &fx);
    st.refresh_jacobian(&x, 0.0);
    let mut fresh = true;

    while next_sample < samples {
        let h_try = h.min(t_end - t);
        let attempt = st.attempt(scheme, &x, &fx, t, h_try);
        match attempt {
            Err(fail) => {
                st.stats.rejected += 1;
                if !fresh {
                    st.refresh_jacobian(&x, t);
                    fresh = true;
                    continue;
                }
                h = 0.25 * h_try;
                if h < opts.min_step {
                    return Err(match fail {
                        StepFail::NonFinite => Error::NonFiniteState(t),
                        StepFail::Newton => Error::NewtonDivergence(t),
                    });
                }
                continue;
            }
            Ok((x_new, est, f_new)) => {
                let err = st.weight(&x, &x_new, &est);
                let fac = if err > 0.0 { (0.9 * err.powf(-expo)).clamp(0.2, 4.0) } else { 4.0 };
                if err > 1.0 {
                    st.stats.rejected += 1;
                    h = h_try * fac.min(0.9);
                    if h < opts.min_step {
                        return Err(Error::NewtonDivergence(t));
                    }
                    continue;
                }
                if x_new.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState(t));
                }
                st.stats.accepted += 1;
                let t_new = if h_try == t_end - t { t_end } else { t + h_try };
                let dx_new = derivative(mass_lu.as_ref(), &f_new);
                while next_sample < samples && times[next_sample] <= t_new * (1.0 + 1e-14) {
                    let s = ((times[next_sample] - t) / h_try).clamp(0.0, 1.0);
                    let xs = hermite(&x, &dx, &x_new, &dx_new, h_try, s);
                    record(next_sample, &xs, &mut outputs);
                    next_sample += 1;
                }
                x = x_new;
                dx = dx_new;
                fx = f_new;
                t = t_new;
                // keep h (and the factorizations) unless the change is worthwhile
                if !(1.0..=1.5).contains(&fac) {
                    h = h_try * fac;
                }
                if st.slow {
                    st.refresh_jacobian(&x, t);
                    fresh = true;
                } else {
                    fresh = false;
                }
            }
        }
    }
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(t));
    }
    let stats = st.stats;
    Ok(Trajectory { times, states, outputs, stats })
}

fn hermite(x0: &DVector<f64>, d0: &DVector<f64>, x1: &DVector<f64>, d1: &DVector<f64>, h: f64, s: f64) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    x0 * h00 + d0 * (h10 * h) + x1 * h01 + d1 * (h11 * h)
}

/// `mean_t ‖y − ŷ‖ / max_t ‖y‖` and `max_t ‖y − ŷ‖ / max_t ‖y‖`.
pub fn output_errors(y: &Trajectory, yhat: &Trajectory) -> Result<(f64, f64)> {
    if y.times.len() != yhat.times.len() || y.outputs.shape() != yhat.outputs.shape() {
        return Err(Error::Dimension("trajectories on different grids".into()));
    }
    if y.times.iter().zip(&yhat.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(Error::Dimension("trajectories on different grids".into()));
    }
    let k = y.times.len();
    let scale = (0..k).map(|i| y.outputs.column(i).norm()).fold(0.0, f64::max);
    let errs: Vec<f64> = (0..k).map(|i| (y.outputs.column(i) - yhat.outputs.column(i)).norm()).collect();
    let mean = errs.iter().sum::<f64>() / k as f64;
    let max = errs.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(if max == 0.0 { (0.0, 0.0) } else { (f64::INFINITY, f64::INFINITY) });
    }
    Ok((mean / scale, max / scale))
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `t,y_1,…,y_p`; further trajectories on the same grid
/// add columns `<prefix>_1,…`.
pub fn write_csv<W: Write>(mut out: W, cols: &[(&str, &Trajectory)]) -> Result<()> {
    let Some((_, first)) = cols.first() else {
        return Ok(());
    };
    let mut header = vec!["t".to_string()];
    for (name, tr) in cols {
        if tr.times.len() != first.times.len() {
            return Err(Error::Dimension("trajectories on different grids".into()));
        }
        for j in 0..tr.outputs.nrows() {
            header.push(format!("{name}_{}", j + 1));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, t) in first.times.iter().enumerate() {
        let mut row = vec![fmt(*t)];
        for (_, tr) in cols {
            row.extend(tr.outputs.column(i).iter().map(|v| fmt(*v)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
