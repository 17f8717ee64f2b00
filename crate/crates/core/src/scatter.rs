//! Sum-rate maximization over the packed reactance vector for fixed beamformers.
//!
//! Writing `A = jX + Z0 I`, the scattering matrix is `Theta = I - 2 Z0 A^-1`,
//! so for a received amplitude `a = g^H w + h^H Theta G w`
//!
//! ```text
//! da/dX_mn = 2j Z0 (A^-1 conj(h))_m (A^-1 G w)_n
//! ```
//!
//! and the analytic gradient needs one LU factorization of `A` plus `2K + 1`
//! triangular solves. Central finite differences are kept as the reference.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::channel::{effective_channels, ChannelRealization};
use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions, Termination};
use crate::linalg::{inner, CMatrix, C64};
use crate::rates::{rates_for_channels, Beamformers};
use crate::ris::{
    factor_impedance, pack_symmetric, single_port_reflection, unpack_symmetric, Architecture, ReactanceVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    FiniteDifference,
    Analytic,
}

/// Fixed data of one reactance subproblem.
#[derive(Debug, Clone, Copy)]
pub struct ScatterProblem<'a> {
    pub beamformers: &'a Beamformers,
    pub realization: &'a ChannelRealization,
    pub noise: f64,
    pub z0: f64,
}

/// Relative finite-difference step and its absolute floor (ohms).
const FD_RELATIVE_STEP: f64 = 1e-6;
const FD_MIN_STEP: f64 = 1e-8;

impl ScatterProblem<'_> {
    fn check(&self, v: &ReactanceVector) -> Result<()> {
        if v.architecture() == Architecture::None {
            return Err(Error::Domain("no reactances to optimize without an RIS".into()));
        }
        if v.elements() != self.realization.elements() {
            return Err(Error::Dimension(format!(
                "reactance vector for N={} but realization has N={}",
                v.elements(),
                self.realization.elements()
            )));
        }
        Ok(())
    }

    /// Negative sum-rate at `v`.
    pub fn objective(&self, v: &ReactanceVector) -> Result<f64> {
        self.check(v)?;
        Ok(self.evaluate(v.architecture(), v.elements(), v.values(), false)?.0)
    }

    pub fn gradient(&self, v: &ReactanceVector, method: GradientMethod) -> Result<DVector<f64>> {
        self.check(v)?;
        match method {
            GradientMethod::Analytic => Ok(self
                .evaluate(v.architecture(), v.elements(), v.values(), true)?
                .1
                .expect("gradient requested")),
            GradientMethod::FiniteDifference => self.fd_gradient(v.architecture(), v.elements(), v.values()),
        }
    }

    fn value_at(&self, arch: Architecture, n: usize, values: &[f64]) -> Result<f64> {
        let f = self.evaluate(arch, n, values, false)?.0;
        if !f.is_finite() {
            return Err(Error::NonFinite("objective while probing".into()));
        }
        Ok(f)
    }

    fn fd_gradient(&self, arch: Architecture, n: usize, values: &[f64]) -> Result<DVector<f64>> {
        let grads: Result<Vec<f64>> = (0..values.len())
            .into_par_iter()
            .map(|i| {
                let h = (FD_RELATIVE_STEP * (1.0 + values[i].abs())).max(FD_MIN_STEP);
                let mut probe = values.to_vec();
                probe[i] = values[i] + h;
                let plus = self.value_at(arch, n, &probe)?;
                probe[i] = values[i] - h;
                let minus = self.value_at(arch, n, &probe)?;
                Ok((plus - minus) / (2.0 * h))
            })
            .collect();
        Ok(DVector::from_vec(grads?))
    }

    /// Objective and (optionally) its analytic gradient from a single factorization.
    fn evaluate(
        &self,
        arch: Architecture,
        n: usize,
        values: &[f64],
        want_gradient: bool,
    ) -> Result<(f64, Option<DVector<f64>>)> {
        let bf = self.beamformers;
        let real = self.realization;
        let z0 = self.z0;

        // Theta and a closure applying A^-1
        let (theta, inverse): (CMatrix, Box<dyn Fn(&nalgebra::DVector<C64>) -> nalgebra::DVector<C64>>) = match arch {
            Architecture::Fully => {
                let x = unpack_symmetric(values, n)?;
                let sys = factor_impedance(&x, z0)?;
                let theta = sys.theta.clone();
                let lu = sys.lu;
                (theta, Box::new(move |b| lu.solve(b).expect("factorization checked")))
            }
            Architecture::Single => {
                if !(z0 > 0.0) {
                    return Err(Error::Domain("reference impedance must be positive".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("reactance vector".into()));
                }
                let mut theta = CMatrix::zeros(n, n);
                let mut diag = Vec::with_capacity(n);
                for (i, &x) in values.iter().enumerate() {
                    theta[(i, i)] = single_port_reflection(x, z0);
                    diag.push(C64::new(z0, x).inv());
                }
                (theta, Box::new(move |b| b.zip_map(&nalgebra::DVector::from_column_slice(&diag), |u, d| u * d)))
            }
            Architecture::None => return Err(Error::Domain("no RIS".into())),
        };

        let g_eff = effective_channels(real, Some(&theta))?;
        let report = rates_for_channels(&g_eff, bf, self.noise)?;
        let value = -report.sum_rate;
        if !want_gradient {
            return Ok((value, None));
        }

        let k_users = bf.users();
        let streams = k_users + 1;
        let ln2 = std::f64::consts::LN_2;
        let active = report
            .common_rates
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &r)| if r < acc.1 { (i, r) } else { acc })
            .0;

        // Cm[k, i] = dSR/dp_{k,i} * conj(a_{k,i})
        let mut cm = CMatrix::zeros(k_users, streams);
        for (k, g) in g_eff.iter().enumerate() {
            let amps: Vec<C64> = (0..streams).map(|i| inner(g, bf.stream(i))).collect();
            let p: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
            let private_total: f64 = p[1..].iter().sum::<f64>() + self.noise;
            let total = private_total + p[0];
            let interference = private_total - p[k + 1];
            let mut coeff = vec![0.0; streams];
            if k == active {
                coeff[0] += 1.0 / total;
                for c in coeff.iter_mut().skip(1) {
                    *c += 1.0 / total - 1.0 / private_total;
                }
            }
            for (i, c) in coeff.iter_mut().enumerate().skip(1) {
                *c += if i == k + 1 {
                    1.0 / private_total
                } else {
                    1.0 / private_total - 1.0 / interference
                };
            }
            for i in 0..streams {
                cm[(k, i)] = amps[i].conj() * (coeff[i] / ln2);
            }
        }

        let mut u = CMatrix::zeros(n, k_users);
        for (k, h) in real.ris_user.iter().enumerate() {
            u.set_column(k, &inverse(&h.map(|z| z.conj())));
        }
        let mut v = CMatrix::zeros(n, streams);
        for i in 0..streams {
            v.set_column(i, &inverse(&(&real.bs_ris * bf.stream(i))));
        }
        let b = u * cm * v.transpose();
        // dSR/dX_mn = -4 Z0 Im(B_mn); the objective is -SR
        let d: DMatrix<f64> = b.map(|z| 4.0 * z0 * z.im);
        let grad = match arch {
            Architecture::Fully => {
                let mut g = Vec::with_capacity(values.len());
                for i in 0..n {
                    g.push(d[(i, i)]);
                    for j in i + 1..n {
                        g.push(d[(i, j)] + d[(j, i)]);
                    }
                }
                g
            }
            _ => (0..n).map(|i| d[(i, i)]).collect(),
        };
        Ok((value, Some(DVector::from_vec(grad))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterOptions {
    pub gradient: GradientMethod,
    pub lbfgs: LbfgsOptions,
    /// Restarts allowed after reflecting drifting reactances through the
    /// open-circuit pole; 0 disables the reflection.
    pub pole_crossings: usize,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            gradient: GradientMethod::Analytic,
            lbfgs: LbfgsOptions {
                initial_step_length: 5.0,
                ..LbfgsOptions::default()
            },
            pole_crossings: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReactanceOutcome {
    pub reactance: ReactanceVector,
    /// Negative sum-rate at the returned point.
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Set when the quasi-Newton run stopped on a failed line search.
    pub line_search_failed: bool,
    pub trace: Vec<f64>,
}

/// Quasi-Newton descent on the negative sum-rate starting from `v0`.
pub fn optimize_reactance(
    v0: &ReactanceVector,
    problem: &ScatterProblem<'_>,
    opts: &ScatterOptions,
) -> Result<ReactanceOutcome> {
    problem.check(v0)?;
    let arch = v0.architecture();
    let n = v0.elements();
    let f = |x: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        match opts.gradient {
            GradientMethod::Analytic => {
                let (v, g) = problem.evaluate(arch, n, x.as_slice(), true)?;
                Ok((v, g.expect("gradient requested")))
            }
            GradientMethod::FiniteDifference => {
                let v = problem.value_at(arch, n, x.as_slice())?;
                Ok((v, problem.fd_gradient(arch, n, x.as_slice())?))
            }
        }
    };
    let mut out = lbfgs::minimize(f, DVector::from_column_slice(v0.values()), &opts.lbfgs)?;
    let initial_value = out.trace[0];
    let mut trace = std::mem::take(&mut out.trace);
    let mut iterations = out.iterations;
    for _ in 0..opts.pole_crossings {
        let (_, grad) = f(&out.x)?;
        let Some(flipped) = cross_poles(arch, n, &out.x, &grad, problem.z0) else {
            break;
        };
        let mut retry = lbfgs::minimize(f, DVector::from_vec(flipped), &opts.lbfgs)?;
        if !(retry.value < out.value) {
            break;
        }
        log::debug!("pole crossing improved the objective from {} to {}", out.value, retry.value);
        iterations += retry.iterations;
        let best = out.value;
        trace.extend(retry.trace.drain(..).filter(|&v| v < best));
        out = retry;
    }
    if out.termination == Termination::LineSearchFailed {
        log::debug!(
            "reactance line search failed after {} iterations (|g| = {:e})",
            out.iterations,
            out.gradient_norm
        );
    }
    Ok(ReactanceOutcome {
        reactance: v0.with_values(out.x.as_slice().to_vec())?,
        value: out.value,
        initial_value,
        iterations,
        gradient_norm: out.gradient_norm,
        line_search_failed: out.termination == Termination::LineSearchFailed,
        trace,
    })
}

/// Eigenvalues of X beyond this multiple of Z0 sit close to the open-circuit
/// pole, where `x` and `-x` give nearly the same scattering matrix.
const POLE_RATIO: f64 = 10.0;

/// Local descent in X can not pass through |x| = inf, although Theta is
/// continuous there, and the gradient in X vanishes like 1/x^2 on the way.
/// Components that are large and still pushed outward are restarted just
/// across the pole at `-sign(x) * POLE_RATIO * Z0`. Returns `None` if there
/// are none.
fn cross_poles(arch: Architecture, n: usize, x: &DVector<f64>, grad: &DVector<f64>, z0: f64) -> Option<Vec<f64>> {
    let limit = POLE_RATIO * z0;
    let mut flipped = false;
    let values = match arch {
        Architecture::Single => x
            .iter()
            .zip(grad.iter())
            .map(|(&xi, &gi)| {
                if xi.abs() > limit && gi * xi.signum() < 0.0 {
                    flipped = true;
                    -xi.signum() * limit
                } else {
                    xi
                }
            })
            .collect(),
        Architecture::Fully => {
            let mut m = unpack_symmetric(x.as_slice(), n).ok()?;
            let eig = m.clone().symmetric_eigen();
            for (lambda, u) in eig.eigenvalues.iter().zip(eig.eigenvectors.column_iter()) {
                if lambda.abs() <= limit {
                    continue;
                }
                // derivative of the objective along u u^T in packed coordinates
                let mut slope = 0.0;
                for i in 0..n {
                    for j in i..n {
                        slope += grad[crate::ris::packed_index(n, i, j)] * u[i] * u[j];
                    }
                }
                if slope * lambda.signum() < 0.0 {
                    flipped = true;
                    m -= (u * u.transpose()) * (lambda + lambda.signum() * limit);
                }
            }
            pack_symmetric(&m).ok()?
        }
        Architecture::None => return None,
    };
    flipped.then_some(values)
}
