//! Log-barrier interior-point solver for the beamformer subproblem.
//!
//! With equalizers and weights fixed, every augmented MSE is a convex
//! quadratic in the real-composite beamformer vector. The RSMA problem is
//!
//! ```text
//! minimize   t + sum_k xi_k(W)
//! subject to xi_{0,k}(W) <= t,  k = 1..K
//!            tr(W W^H) <= Pt
//! ```
//!
//! and the SDMA variant drops `w_0`, `t` and the common constraints. The
//! problem is solved in the scaled variable `W / sqrt(Pt)` with a dense Newton
//! method on the barrier function.

use nalgebra::{DMatrix, DVector};

use super::{MultipleAccess, WmmseState};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::rates::Beamformers;

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpOptions {
    /// Barrier parameter growth per outer step.
    pub barrier_growth: f64,
    /// Centering stops once half the squared Newton decrement is below this.
    pub newton_tolerance: f64,
    /// Stop once the duality gap bound `m / tau` is below this.
    pub gap_tolerance: f64,
    /// Largest acceptable KKT residual at exit.
    pub kkt_tolerance: f64,
    pub max_newton_steps: usize,
}

impl Default for QcqpOptions {
    fn default() -> Self {
        Self {
            barrier_growth: 10.0,
            newton_tolerance: 1e-10,
            gap_tolerance: 1e-8,
            kkt_tolerance: 1e-8,
            max_newton_steps: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub beamformers: Beamformers,
    /// `max_k xi_{0,k} + sum_k xi_k` (SDMA: `sum_k xi_k`) at the returned point.
    pub objective: f64,
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

/// `x^T A x + b^T x + c`.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl Quadratic {
    fn zeros(n: usize) -> Self {
        Self { a: DMatrix::zeros(n, n), b: DVector::zeros(n), c: 0.0 }
    }

    pub(crate) fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x * 2.0 + &self.b
    }
}

/// Variable layout: one `2M` block per stream, then `t` for RSMA.
#[derive(Debug, Clone, Copy)]
struct Layout {
    antennas: usize,
    users: usize,
    mode: MultipleAccess,
}

impl Layout {
    fn block(&self, stream: usize) -> Option<usize> {
        match self.mode {
            MultipleAccess::Rsma => Some(2 * self.antennas * stream),
            MultipleAccess::Sdma if stream == 0 => None,
            MultipleAccess::Sdma => Some(2 * self.antennas * (stream - 1)),
        }
    }

    fn beam_dim(&self) -> usize {
        match self.mode {
            MultipleAccess::Rsma => 2 * self.antennas * (self.users + 1),
            MultipleAccess::Sdma => 2 * self.antennas * self.users,
        }
    }

    fn epigraph(&self) -> Option<usize> {
        match self.mode {
            MultipleAccess::Rsma => Some(self.beam_dim()),
            MultipleAccess::Sdma => None,
        }
    }

    fn dim(&self) -> usize {
        self.beam_dim() + usize::from(self.mode == MultipleAccess::Rsma)
    }

    fn pack(&self, bf: &Beamformers, scale: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        let m = self.antennas;
        for stream in 0..=self.users {
            if let Some(off) = self.block(stream) {
                let w = bf.stream(stream);
                for j in 0..m {
                    x[off + j] = w[j].re * scale;
                    x[off + m + j] = w[j].im * scale;
                }
            }
        }
        x
    }

    fn unpack(&self, x: &DVector<f64>, scale: f64, power_budget: f64) -> Beamformers {
        let m = self.antennas;
        let read = |stream: usize| match self.block(stream) {
            Some(off) => CVector::from_fn(m, |j, _| C64::new(x[off + j] * scale, x[off + m + j] * scale)),
            None => CVector::zeros(m),
        };
        Beamformers {
            common: read(0),
            private: (1..=self.users).map(read).collect(),
            power_budget,
        }
    }
}

/// Real and imaginary parts of `c^H u` as linear forms `p^T x_u`, `q^T x_u`.
fn linear_forms(c: &CVector) -> (DVector<f64>, DVector<f64>) {
    let m = c.len();
    let mut p = DVector::zeros(2 * m);
    let mut q = DVector::zeros(2 * m);
    for j in 0..m {
        p[j] = c[j].re;
        p[m + j] = c[j].im;
        q[j] = -c[j].im;
        q[m + j] = c[j].re;
    }
    (p, q)
}

/// Builds `lambda (|e|^2 (sum_{i in streams} |c^H u_i|^2 + sigma^2) - 2 Re(e c^H u_target) + 1) - log2 lambda`.
fn augmented_mse(
    layout: &Layout,
    outer: &DMatrix<f64>,
    p: &DVector<f64>,
    q: &DVector<f64>,
    streams: std::ops::RangeInclusive<usize>,
    target: usize,
    equalizer: C64,
    weight: f64,
    noise: f64,
) -> Quadratic {
    let n = layout.dim();
    let bm = 2 * layout.antennas;
    let mut quad = Quadratic::zeros(n);
    let alpha = weight * equalizer.norm_sqr();
    for stream in streams {
        if let Some(off) = layout.block(stream) {
            let mut view = quad.a.view_mut((off, off), (bm, bm));
            view += outer * alpha;
        }
    }
    if let Some(off) = layout.block(target) {
        let lin = (p * equalizer.re - q * equalizer.im) * (-2.0 * weight);
        let mut view = quad.b.rows_mut(off, bm);
        view += lin;
    }
    quad.c = alpha * noise + weight - weight.log2();
    quad
}

pub(crate) struct Problem {
    layout: Layout,
    pub(crate) common: Vec<Quadratic>,
    pub(crate) private: Vec<Quadratic>,
}

impl Problem {
    pub(crate) fn build(
        g_eff: &[CVector],
        state: &WmmseState,
        power_budget: f64,
        noise: f64,
        mode: MultipleAccess,
    ) -> Self {
        let users = g_eff.len();
        let antennas = g_eff[0].len();
        let layout = Layout { antennas, users, mode };
        let scale = power_budget.sqrt();
        let mut common = Vec::new();
        let mut private = Vec::with_capacity(users);
        for (k, g) in g_eff.iter().enumerate() {
            let c = g * C64::new(scale, 0.0);
            let (p, q) = linear_forms(&c);
            let outer = &p * p.transpose() + &q * q.transpose();
            if mode == MultipleAccess::Rsma {
                common.push(augmented_mse(
                    &layout,
                    &outer,
                    &p,
                    &q,
                    0..=users,
                    0,
                    state.common_equalizers[k],
                    state.common_weights[k],
                    noise,
                ));
            }
            private.push(augmented_mse(
                &layout,
                &outer,
                &p,
                &q,
                1..=users,
                k + 1,
                state.private_equalizers[k],
                state.private_weights[k],
                noise,
            ));
        }
        Self { layout, common, private }
    }

    /// WMMSE objective with the common terms aggregated by their maximum.
    fn objective(&self, x: &DVector<f64>) -> f64 {
        let common = self
            .common
            .iter()
            .map(|q| q.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let common = if common.is_finite() { common } else { 0.0 };
        common + self.private.iter().map(|q| q.value(x)).sum::<f64>()
    }
}

/// Smooth function in the barrier problem: objective or constraint `f_i(x) <= 0`.
struct Term {
    quad: Quadratic,
}

pub fn solve_beamformer_qcqp(
    g_eff: &[CVector],
    state: &WmmseState,
    power_budget: f64,
    noise: f64,
    mode: MultipleAccess,
    start: Option<&Beamformers>,
    opts: &QcqpOptions,
) -> Result<QcqpSolution> {
    if g_eff.is_empty() {
        return Err(Error::Dimension("no users".into()));
    }
    if !(power_budget > 0.0) {
        return Err(Error::Domain(format!("power budget must be positive, got {power_budget}")));
    }
    let weights_ok = state
        .common_weights
        .iter()
        .chain(&state.private_weights)
        .all(|&w| w > 0.0 && w.is_finite());
    if !weights_ok {
        return Err(Error::Domain("WMMSE weights must be positive and finite".into()));
    }

    let problem = Problem::build(g_eff, state, power_budget, noise, mode);
    let layout = problem.layout;
    let n = layout.dim();
    let beam_dim = layout.beam_dim();
    let scale = power_budget.sqrt();

    // objective
    let mut f0 = Quadratic::zeros(n);
    for q in &problem.private {
        f0.a += &q.a;
        f0.b += &q.b;
        f0.c += q.c;
    }
    // constraints
    let mut constraints = Vec::with_capacity(g_eff.len() + 1);
    if let Some(t) = layout.epigraph() {
        f0.b[t] += 1.0;
        for q in &problem.common {
            let mut c = q.clone();
            c.b[t] -= 1.0;
            constraints.push(Term { quad: c });
        }
    }
    let mut power = Quadratic::zeros(n);
    for i in 0..beam_dim {
        power.a[(i, i)] = 1.0;
    }
    power.c = -1.0;
    constraints.push(Term { quad: power });
    let m = constraints.len() as f64;

    // strictly feasible start
    let mut x = match start {
        Some(bf) => layout.pack(bf, 1.0 / scale),
        None => DVector::zeros(n),
    };
    let beam_norm2: f64 = x.rows(0, beam_dim).norm_squared();
    if beam_norm2 > 0.25 {
        let s = (0.25 / beam_norm2).sqrt();
        x.rows_mut(0, beam_dim).scale_mut(s);
    }
    if !x.iter().all(|v| v.is_finite()) {
        x.fill(0.0);
    }
    if let Some(t) = layout.epigraph() {
        x[t] = 0.0;
        let worst = problem.common.iter().map(|q| q.value(&x)).fold(f64::NEG_INFINITY, f64::max);
        x[t] = worst + 1.0;
    }

    let hess0 = &f0.a * 2.0;
    let con_hess: Vec<DMatrix<f64>> = constraints.iter().map(|c| &c.quad.a * 2.0).collect();

    let mut tau = 1.0;
    let mut steps = 0usize;
    loop {
        // centering
        loop {
            let slack: Vec<f64> = constraints.iter().map(|c| -c.quad.value(&x)).collect();
            let g0 = f0.gradient(&x);
            let con_grad: Vec<DVector<f64>> = constraints.iter().map(|c| c.quad.gradient(&x)).collect();
            let mut grad = &g0 * tau;
            let mut hess = &hess0 * tau;
            for ((gi, hi), &si) in con_grad.iter().zip(&con_hess).zip(&slack) {
                grad.axpy(1.0 / si, gi, 1.0);
                hess += hi / si;
                hess.ger(1.0 / (si * si), gi, gi, 1.0);
            }

            let step = newton_direction(&hess, &grad);
            let decrement2 = -grad.dot(&step);
            if !(decrement2 > 2.0 * opts.newton_tolerance) || steps >= opts.max_newton_steps {
                break;
            }
            steps += 1;

            // exact change of each quadratic along the step: t g^T d + t^2 d^T A d
            let d_f0 = (g0.dot(&step), step.dot(&(&f0.a * &step)));
            let d_con: Vec<(f64, f64)> = constraints
                .iter()
                .zip(&con_grad)
                .map(|(c, gi)| (gi.dot(&step), step.dot(&(&c.quad.a * &step))))
                .collect();
            let slope = grad.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-16 {
                let mut feasible = true;
                let mut change = tau * (t * d_f0.0 + t * t * d_f0.1);
                for (&(lin, quad), &si) in d_con.iter().zip(&slack) {
                    let delta = t * lin + t * t * quad;
                    let ratio = -delta / si;
                    if !(ratio > -1.0) {
                        feasible = false;
                        break;
                    }
                    change -= ratio.ln_1p();
                }
                if feasible && change <= 0.01 * t * slope {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            x.axpy(t, &step, 1.0);
        }
        if m / tau < opts.gap_tolerance || steps >= opts.max_newton_steps {
            break;
        }
        tau *= opts.barrier_growth;
    }

    let residual = kkt_residual(&f0, &constraints, &x);
    let beamformers = layout.unpack(&x, scale, power_budget);
    let objective = problem.objective(&x);
    if residual > opts.kkt_tolerance || !objective.is_finite() {
        return Err(Error::SolverNotConverged {
            best: Box::new(beamformers),
            residual,
        });
    }
    Ok(QcqpSolution {
        beamformers,
        objective,
        kkt_residual: residual,
        newton_steps: steps,
    })
}

/// KKT residual at `x` with multipliers fitted by nonnegative least squares:
/// the worst of relative stationarity, complementarity and infeasibility.
/// With at most K + 1 constraints every support set can be tried.
fn kkt_residual(f0: &Quadratic, constraints: &[Term], x: &DVector<f64>) -> f64 {
    let g0 = f0.gradient(x);
    let scale = g0.amax().max(1.0);
    let grads: Vec<DVector<f64>> = constraints.iter().map(|c| c.quad.gradient(x)).collect();
    let values: Vec<f64> = constraints.iter().map(|c| c.quad.value(x)).collect();
    let infeasibility = values.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let m = constraints.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let mut lambda = vec![0.0; m];
        if !support.is_empty() {
            let jac = DMatrix::from_fn(x.len(), support.len(), |r, c| grads[support[c]][r]);
            let normal = jac.transpose() * &jac;
            let rhs = -(jac.transpose() * &g0);
            let Some(sol) = normal.lu().solve(&rhs) else {
                continue;
            };
            if sol.iter().any(|&l| !(l >= 0.0)) {
                continue;
            }
            for (&i, &l) in support.iter().zip(sol.iter()) {
                lambda[i] = l;
            }
        }
        let mut r = g0.clone();
        for (l, gi) in lambda.iter().zip(&grads) {
            r.axpy(*l, gi, 1.0);
        }
        let complementarity = lambda
            .iter()
            .zip(&values)
            .fold(0.0f64, |acc, (l, v)| acc.max((l * v).abs()));
        best = best.min((r.amax() / scale).max(complementarity));
    }
    best.max(infeasibility)
}

/// Solves `H d = -g`, regularizing `H` if it is not numerically positive definite.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let mut shift = 0.0;
    let diag_scale = hess.diagonal().amax().max(1e-300);
    for _ in 0..30 {
        let mut h = hess.clone();
        if shift > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += shift;
            }
        }
        if let Some(chol) = h.cholesky() {
            return -chol.solve(grad);
        }
        shift = if shift == 0.0 { 1e-14 * diag_scale } else { shift * 10.0 };
    }
    -grad / diag_scale
}

/// Evaluates the WMMSE objective `max_k xi_{0,k} + sum_k xi_k` at `bf` for fixed
/// equalizers and weights.
pub fn wmmse_objective(
    g_eff: &[CVector],
    state: &WmmseState,
    bf: &Beamformers,
    noise: f64,
    mode: MultipleAccess,
) -> f64 {
    let problem = Problem::build(g_eff, state, bf.power_budget, noise, mode);
    let x = problem.layout.pack(bf, 1.0 / bf.power_budget.sqrt());
    let mut x = x;
    if let Some(t) = problem.layout.epigraph() {
        x[t] = 0.0;
    }
    problem.objective(&x)
}
