//! WMMSE beamforming for fixed effective channels.
//!
//! One iteration computes MMSE equalizers and the optimal weights
//! `lambda = 1 / eps_MMSE` for the current precoders, then re-solves the convex
//! beamformer problem for those equalizers and weights. With base-2 logarithms
//! throughout, the augmented MSE at the optimum equals `1 - rate`, so the
//! WMMSE objective is `(K + 1) - sum_rate` and the sum-rate trace is monotone.

mod qcqp;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use qcqp::{solve_beamformer_qcqp, wmmse_objective, QcqpOptions, QcqpSolution};

use crate::error::{Error, Result};
use crate::linalg::{inner, random_cvector, CVector, C64};
use crate::rates::{rates_for_channels, received_powers, Beamformers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultipleAccess {
    Rsma,
    Sdma,
}

impl MultipleAccess {
    pub fn as_str(self) -> &'static str {
        match self {
            MultipleAccess::Rsma => "rsma",
            MultipleAccess::Sdma => "sdma",
        }
    }
}

impl fmt::Display for MultipleAccess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MultipleAccess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsma" => Ok(MultipleAccess::Rsma),
            "sdma" => Ok(MultipleAccess::Sdma),
            other => Err(Error::Config(format!("unknown multiple access scheme '{other}'"))),
        }
    }
}

/// MMSE equalizers and the received powers they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalizers {
    pub common: Vec<C64>,
    pub private: Vec<C64>,
    /// `T_{0,k}`: total received power plus noise.
    pub common_power: Vec<f64>,
    /// `T_k`: received power after removing the common stream, plus noise.
    pub private_power: Vec<f64>,
    /// `eps_{0,k}` at the MMSE equalizer.
    pub common_mse: Vec<f64>,
    /// `eps_k` at the MMSE equalizer.
    pub private_mse: Vec<f64>,
}

pub fn mmse_equalizers(g_eff: &[CVector], bf: &Beamformers, noise: f64) -> Equalizers {
    let k = g_eff.len();
    let mut out = Equalizers {
        common: Vec::with_capacity(k),
        private: Vec::with_capacity(k),
        common_power: Vec::with_capacity(k),
        private_power: Vec::with_capacity(k),
        common_mse: Vec::with_capacity(k),
        private_mse: Vec::with_capacity(k),
    };
    for (user, g) in g_eff.iter().enumerate() {
        let p = received_powers(g, bf);
        let private_total: f64 = p[1..].iter().sum::<f64>() + noise;
        let total = private_total + p[0];
        let interference = private_total - p[user + 1];
        // e_{0,k} = w_0^H g~_k / T_{0,k}
        out.common.push(inner(bf.stream(0), g) / total);
        out.private.push(inner(bf.stream(user + 1), g) / private_total);
        out.common_power.push(total);
        out.private_power.push(private_total);
        out.common_mse.push(private_total / total);
        out.private_mse.push(interference / private_total);
    }
    out
}

/// `eps = |e|^2 T - 2 Re(e g~^H w) + 1` for an arbitrary equalizer.
pub fn mse(equalizer: C64, power: f64, g: &CVector, w: &CVector) -> f64 {
    equalizer.norm_sqr() * power - 2.0 * (equalizer * inner(g, w)).re + 1.0
}

/// `lambda = 1 / eps` for every stream.
pub fn optimal_weights(common_mse: &[f64], private_mse: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let invert = |eps: &[f64]| -> Result<Vec<f64>> {
        eps.iter()
            .map(|&e| {
                if e > 0.0 && e <= 1.0 + 1e-12 {
                    Ok(1.0 / e)
                } else {
                    Err(Error::InvalidMse(e))
                }
            })
            .collect()
    };
    Ok((invert(common_mse)?, invert(private_mse)?))
}

/// Augmented MSE `lambda eps - log2 lambda`.
pub fn augmented_mse(weight: f64, eps: f64) -> f64 {
    weight * eps - weight.log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub common_equalizers: Vec<C64>,
    pub private_equalizers: Vec<C64>,
    pub common_weights: Vec<f64>,
    pub private_weights: Vec<f64>,
    pub common_power: Vec<f64>,
    pub private_power: Vec<f64>,
    pub common_xi: Vec<f64>,
    pub private_xi: Vec<f64>,
}

impl WmmseState {
    /// Equalizers, weights and augmented MSEs at the MMSE point of `bf`.
    pub fn at(g_eff: &[CVector], bf: &Beamformers, noise: f64) -> Result<Self> {
        let eq = mmse_equalizers(g_eff, bf, noise);
        let (common_weights, private_weights) = optimal_weights(&eq.common_mse, &eq.private_mse)?;
        let common_xi = common_weights
            .iter()
            .zip(&eq.common_mse)
            .map(|(&l, &e)| augmented_mse(l, e))
            .collect();
        let private_xi = private_weights
            .iter()
            .zip(&eq.private_mse)
            .map(|(&l, &e)| augmented_mse(l, e))
            .collect();
        Ok(Self {
            common_equalizers: eq.common,
            private_equalizers: eq.private,
            common_weights,
            private_weights,
            common_power: eq.common_power,
            private_power: eq.private_power,
            common_xi,
            private_xi,
        })
    }
}

fn unit_or_axis(g: &CVector, axis: usize) -> CVector {
    let norm = g.norm();
    if norm > 0.0 && norm.is_finite() {
        g / C64::new(norm, 0.0)
    } else {
        let mut e = CVector::zeros(g.len());
        e[axis % g.len()] = C64::new(1.0, 0.0);
        e
    }
}

/// Share of the power budget given to the common stream at initialization.
const COMMON_POWER_SHARE: f64 = 0.1;

/// Deterministic warm start: the common precoder is the dominant left singular
/// vector of `[g~_1 .. g~_K]`, private precoders are matched filters.
pub fn initial_beamformers(g_eff: &[CVector], power_budget: f64, mode: MultipleAccess) -> Beamformers {
    let k = g_eff.len();
    let m = g_eff[0].len();
    let common_share = match mode {
        MultipleAccess::Rsma => COMMON_POWER_SHARE,
        MultipleAccess::Sdma => 0.0,
    };
    let common = if common_share > 0.0 {
        let stacked = DMatrix::from_columns(g_eff);
        let svd = stacked.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let best = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let dir = if best.1 > 0.0 {
            unit_or_axis(&u.column(best.0).into_owned(), 0)
        } else {
            unit_or_axis(&CVector::zeros(m), 0)
        };
        dir * C64::new((common_share * power_budget).sqrt(), 0.0)
    } else {
        CVector::zeros(m)
    };
    let per_user = ((1.0 - common_share) * power_budget / k as f64).sqrt();
    let private = g_eff
        .iter()
        .enumerate()
        .map(|(i, g)| unit_or_axis(g, i) * C64::new(per_user, 0.0))
        .collect();
    Beamformers { common, private, power_budget }
}

/// Random feasible start using the whole power budget.
pub fn random_beamformers<R: rand::Rng + ?Sized>(
    rng: &mut R,
    antennas: usize,
    users: usize,
    power_budget: f64,
    mode: MultipleAccess,
) -> Beamformers {
    let common = match mode {
        MultipleAccess::Rsma => random_cvector(rng, antennas, 1.0),
        MultipleAccess::Sdma => CVector::zeros(antennas),
    };
    let private = (0..users).map(|_| random_cvector(rng, antennas, 1.0)).collect();
    let bf = Beamformers { common, private, power_budget };
    let p = bf.total_power();
    bf.scaled((power_budget / p).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOptions {
    /// Stop once consecutive sum-rates differ by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of starts, the first being the supplied initial point.
    pub restarts: usize,
    pub seed: u64,
    pub qcqp: QcqpOptions,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 500,
            restarts: 1,
            seed: 0,
            qcqp: QcqpOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WmmseOutcome {
    pub beamformers: Beamformers,
    pub sum_rate: f64,
    /// Sum-rate of the initial point followed by one entry per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_rate(g_eff: &[CVector], bf: &Beamformers, noise: f64) -> Result<f64> {
    Ok(rates_for_channels(g_eff, bf, noise)?.sum_rate)
}

/// Runs WMMSE from `init` until the sum-rate stabilizes.
pub fn wmmse(
    g_eff: &[CVector],
    init: &Beamformers,
    noise: f64,
    mode: MultipleAccess,
    opts: &WmmseOptions,
) -> Result<WmmseOutcome> {
    if !(noise > 0.0) {
        return Err(Error::Domain(format!("noise power must be positive, got {noise}")));
    }
    let mut bf = init.clone();
    if mode == MultipleAccess::Sdma {
        bf.common.fill(C64::new(0.0, 0.0));
    }
    if !bf.is_feasible() {
        return Err(Error::Domain("initial beamformers violate the power budget".into()));
    }
    let mut current = sum_rate(g_eff, &bf, noise)?;
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let state = WmmseState::at(g_eff, &bf, noise)?;
        let sol = solve_beamformer_qcqp(g_eff, &state, bf.power_budget, noise, mode, Some(&bf), &opts.qcqp)?;
        bf = sol.beamformers;
        let next = sum_rate(g_eff, &bf, noise)?;
        trace.push(next);
        let delta = (next - current).abs();
        current = next;
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    Ok(WmmseOutcome {
        beamformers: bf,
        sum_rate: current,
        trace,
        iterations,
        converged,
    })
}

/// Best of `opts.restarts` WMMSE runs: the first from `init`, the rest random.
pub fn wmmse_with_restarts(
    g_eff: &[CVector],
    init: &Beamformers,
    noise: f64,
    mode: MultipleAccess,
    opts: &WmmseOptions,
) -> Result<WmmseOutcome> {
    let mut best = wmmse(g_eff, init, noise, mode, opts)?;
    if opts.restarts > 1 {
        let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
        for _ in 1..opts.restarts {
            let start = random_beamformers(&mut rng, init.antennas(), init.users(), init.power_budget, mode);
            let run = wmmse(g_eff, &start, noise, mode, opts)?;
            if run.sum_rate > best.sum_rate {
                best = run;
            }
        }
    }
    Ok(best)
}
