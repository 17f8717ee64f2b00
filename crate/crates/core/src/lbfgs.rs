//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion for the search direction, bracketing/zoom line search
//! with safeguarded cubic interpolation. Steps that only satisfy sufficient
//! decrease are still taken (the pair is dropped from memory when its
//! curvature is not positive), which keeps the method moving on objectives
//! with kinks. When no step gives sufficient decrease the memory is cleared
//! and steepest descent is tried once before giving up.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evaluations: usize,
    /// Length of the first trial step (before any curvature information).
    pub initial_step_length: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evaluations: 40,
            initial_step_length: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

struct Probe {
    alpha: f64,
    value: f64,
    grad: DVector<f64>,
    slope: f64,
}

struct Evaluator<F> {
    f: F,
    count: usize,
}

impl<F> Evaluator<F>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    fn eval(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.count += 1;
        let (v, g) = (self.f)(x)?;
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("objective or gradient".into()));
        }
        Ok((v, g))
    }

    fn probe(&mut self, x: &DVector<f64>, d: &DVector<f64>, alpha: f64) -> Result<Probe> {
        let trial = x + d * alpha;
        let (value, grad) = self.eval(&trial)?;
        let slope = grad.dot(d);
        Ok(Probe { alpha, value, grad, slope })
    }
}

/// Minimizer of the cubic through two points with values and slopes, safeguarded
/// to the inner part of the interval.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let width = right - left;
    let mid = 0.5 * (a + b);
    if disc >= 0.0 {
        let d2 = disc.sqrt().copysign(b - a);
        let denom = hi.slope - lo.slope + 2.0 * d2;
        if denom != 0.0 {
            let t = b - (b - a) * (hi.slope + d2 - d1) / denom;
            if t.is_finite() && t > left + 0.1 * width && t < right - 0.1 * width {
                return t;
            }
        }
    }
    mid
}

enum Search {
    /// Step satisfying the strong Wolfe conditions.
    Wolfe(Probe),
    /// Best step with sufficient decrease when curvature could not be met.
    Armijo(Probe),
    Failed,
}

fn line_search<F>(
    ev: &mut Evaluator<F>,
    x: &DVector<f64>,
    f0: f64,
    d: &DVector<f64>,
    slope0: f64,
    alpha0: f64,
    opts: &LbfgsOptions,
) -> Result<Search>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let armijo = |p: &Probe| p.value <= f0 + opts.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -opts.c2 * slope0;
    let mut best: Option<Probe> = None;
    let keep = |p: &Probe, best: &mut Option<Probe>| {
        if armijo(p) && p.value < f0 && best.as_ref().is_none_or(|b| p.value < b.value) {
            *best = Some(Probe { alpha: p.alpha, value: p.value, grad: p.grad.clone(), slope: p.slope });
        }
    };

    let mut prev = Probe { alpha: 0.0, value: f0, grad: DVector::zeros(0), slope: slope0 };
    let mut alpha = alpha0;
    let mut evals = 0;
    let (mut lo, mut hi);
    loop {
        let p = ev.probe(x, d, alpha)?;
        evals += 1;
        keep(&p, &mut best);
        if !armijo(&p) || (evals > 1 && p.value >= prev.value) {
            lo = prev;
            hi = p;
            break;
        }
        if curvature(&p) {
            return Ok(Search::Wolfe(p));
        }
        if p.slope >= 0.0 {
            lo = p;
            hi = prev;
            break;
        }
        if evals >= opts.max_line_search_evaluations {
            return Ok(best.map_or(Search::Failed, Search::Armijo));
        }
        alpha *= 4.0;
        prev = p;
    }

    // zoom
    while evals < opts.max_line_search_evaluations {
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
        let a = interpolate(&lo, &hi);
        let p = ev.probe(x, d, a)?;
        evals += 1;
        keep(&p, &mut best);
        if !armijo(&p) || p.value >= lo.value {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Search::Wolfe(p));
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    Ok(best.map_or(Search::Failed, Search::Armijo))
}

/// Minimizes `f` from `x0`. `f` returns the objective and its gradient.
pub fn minimize<F>(f: F, x0: DVector<f64>, opts: &LbfgsOptions) -> Result<LbfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut ev = Evaluator { f, count: 0 };
    let mut x = x0;
    let (mut value, mut grad) = ev.eval(&x)?;
    let mut trace = vec![value];
    let mut memory: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let termination = loop {
        let gnorm = grad.norm();
        if gnorm <= opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }

        let mut fresh = memory.is_empty();
        let mut direction = two_loop(&grad, &memory);
        let mut slope = grad.dot(&direction);
        if !(slope < 0.0) {
            memory.clear();
            fresh = true;
            direction = -&grad;
            slope = -gnorm * gnorm;
        }
        let alpha0 = if fresh { opts.initial_step_length / gnorm } else { 1.0 };
        let mut search = line_search(&mut ev, &x, value, &direction, slope, alpha0, opts)?;
        if matches!(search, Search::Failed) && !fresh {
            memory.clear();
            direction = -&grad;
            slope = -gnorm * gnorm;
            search = line_search(&mut ev, &x, value, &direction, slope, opts.initial_step_length / gnorm, opts)?;
        }
        let probe = match search {
            Search::Wolfe(p) | Search::Armijo(p) => p,
            Search::Failed => break Termination::LineSearchFailed,
        };

        let s = &direction * probe.alpha;
        let y = &probe.grad - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s.clone(), y, 1.0 / sy));
        }
        x += s;
        value = probe.value;
        grad = probe.grad;
        trace.push(value);
        iterations += 1;
    };
    Ok(LbfgsOutcome {
        gradient_norm: grad.norm(),
        x,
        value,
        iterations,
        evaluations: ev.count,
        termination,
        trace,
    })
}

fn two_loop(grad: &DVector<f64>, memory: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = s.dot(y) / y.dot(y);
        q *= gamma;
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    -q
}
