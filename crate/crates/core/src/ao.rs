//! Alternating optimization of beamformers and RIS reactances.
//!
//! Each outer iteration runs WMMSE on the effective channels of the current
//! scattering matrix (warm-started from the previous beamformers), then a
//! quasi-Newton pass over the reactances warm-started from the previous
//! reactances. Both stages are monotone, so the sum-rate trace is
//! non-decreasing up to solver tolerance.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{effective_channels, ChannelRealization};
use crate::error::{Error, Result};
use crate::rates::{rates_for_channels, Beamformers, RateReport};
use crate::ris::{Architecture, ReactanceVector, ScatteringNetwork, DEFAULT_Z0};
use crate::scatter::{optimize_reactance, ScatterOptions, ScatterProblem};
use crate::wmmse::{initial_beamformers, wmmse, wmmse_with_restarts, MultipleAccess, WmmseOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemeSpec {
    pub architecture: Architecture,
    pub access: MultipleAccess,
}

impl SchemeSpec {
    pub const fn new(architecture: Architecture, access: MultipleAccess) -> Self {
        Self { architecture, access }
    }

    /// The six compared schemes in canonical order.
    pub const ALL: [SchemeSpec; 6] = [
        SchemeSpec::new(Architecture::Fully, MultipleAccess::Rsma),
        SchemeSpec::new(Architecture::Fully, MultipleAccess::Sdma),
        SchemeSpec::new(Architecture::Single, MultipleAccess::Rsma),
        SchemeSpec::new(Architecture::Single, MultipleAccess::Sdma),
        SchemeSpec::new(Architecture::None, MultipleAccess::Rsma),
        SchemeSpec::new(Architecture::None, MultipleAccess::Sdma),
    ];

    pub const FULLY_RSMA: SchemeSpec = SchemeSpec::ALL[0];
    pub const FULLY_SDMA: SchemeSpec = SchemeSpec::ALL[1];
    pub const SINGLE_RSMA: SchemeSpec = SchemeSpec::ALL[2];
    pub const SINGLE_SDMA: SchemeSpec = SchemeSpec::ALL[3];
    pub const NONE_RSMA: SchemeSpec = SchemeSpec::ALL[4];
    pub const NONE_SDMA: SchemeSpec = SchemeSpec::ALL[5];
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.architecture, self.access)
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (arch, access) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("scheme '{s}' is not of the form <ris>-<access>")))?;
        Ok(Self::new(arch.parse()?, access.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions {
    /// Outer convergence tolerance on the sum-rate.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub z0: f64,
    /// Inner WMMSE settings; its tolerance is overridden by `tolerance / 10`.
    pub wmmse: WmmseOptions,
    pub scatter: ScatterOptions,
    /// Seed for the random initial reactances.
    pub reactance_seed: u64,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 200,
            z0: DEFAULT_Z0,
            wmmse: WmmseOptions::default(),
            scatter: ScatterOptions::default(),
            reactance_seed: 0,
        }
    }
}

impl AoOptions {
    fn inner_wmmse(&self) -> WmmseOptions {
        WmmseOptions {
            tolerance: self.tolerance / 10.0,
            ..self.wmmse.clone()
        }
    }
}

/// Optional starting point; missing parts use the default initialization.
#[derive(Debug, Clone, Default)]
pub struct AoInit {
    pub beamformers: Option<Beamformers>,
    pub reactance: Option<ReactanceVector>,
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub scheme: SchemeSpec,
    pub beamformers: Beamformers,
    pub network: ScatteringNetwork,
    pub report: RateReport,
    /// Sum-rate at the initial point, then after every outer iteration.
    pub trace: Vec<f64>,
    /// Sum-rate after the beamformer stage of every outer iteration.
    pub beamformer_stage: Vec<f64>,
    /// Inner WMMSE traces, one per outer iteration.
    pub wmmse_traces: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of reactance stages that ended on a failed line search.
    pub line_search_failures: usize,
}

impl AoResult {
    pub fn sum_rate(&self) -> f64 {
        self.report.sum_rate
    }
}

fn initial_reactance(
    real: &ChannelRealization,
    architecture: Architecture,
    opts: &AoOptions,
    init: &AoInit,
) -> Result<ReactanceVector> {
    let n = real.elements();
    match &init.reactance {
        Some(v) if v.architecture() == architecture && v.elements() == n => Ok(v.clone()),
        Some(v) => Err(Error::Dimension(format!(
            "initial reactance is {} with N={}, scheme needs {architecture} with N={n}",
            v.architecture(),
            v.elements()
        ))),
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(opts.reactance_seed);
            rng.set_stream(real.draw_index);
            Ok(ReactanceVector::random(architecture, n, opts.z0, &mut rng))
        }
    }
}

pub fn alternating_optimize(
    real: &ChannelRealization,
    scheme: SchemeSpec,
    power_budget: f64,
    noise: f64,
    opts: &AoOptions,
    init: &AoInit,
) -> Result<AoResult> {
    if !(power_budget > 0.0) {
        return Err(Error::Domain(format!("power budget must be positive, got {power_budget}")));
    }
    if scheme.architecture != Architecture::None && real.elements() == 0 {
        return Err(Error::Config(format!("{scheme} needs at least one RIS element")));
    }
    let inner_opts = opts.inner_wmmse();
    let access = scheme.access;

    if scheme.architecture == Architecture::None {
        let g_eff = effective_channels(real, None)?;
        let start = init
            .beamformers
            .clone()
            .unwrap_or_else(|| initial_beamformers(&g_eff, power_budget, access));
        let out = wmmse_with_restarts(&g_eff, &start, noise, access, &inner_opts)?;
        let report = rates_for_channels(&g_eff, &out.beamformers, noise)?;
        return Ok(AoResult {
            scheme,
            beamformers: out.beamformers,
            network: ScatteringNetwork::none(),
            report,
            trace: out.trace.clone(),
            beamformer_stage: out.trace.iter().skip(1).copied().collect(),
            wmmse_traces: vec![out.trace],
            iterations: out.iterations,
            converged: out.converged,
            line_search_failures: 0,
        });
    }

    let mut reactance = initial_reactance(real, scheme.architecture, opts, init)?;
    let mut network = ScatteringNetwork::new(reactance.clone(), opts.z0)?;
    let g_eff = effective_channels(real, network.theta.as_ref())?;
    let mut bf = match &init.beamformers {
        Some(bf) => bf.clone(),
        None => initial_beamformers(&g_eff, power_budget, access),
    };
    if access == MultipleAccess::Sdma {
        bf.common.fill(Default::default());
    }
    let mut current = rates_for_channels(&g_eff, &bf, noise)?.sum_rate;
    let mut trace = vec![current];
    let mut beamformer_stage = Vec::new();
    let mut wmmse_traces = Vec::new();
    let mut converged = false;
    let mut line_search_failures = 0;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let g_eff = effective_channels(real, network.theta.as_ref())?;
        let out = if iterations == 1 && init.beamformers.is_none() {
            wmmse_with_restarts(&g_eff, &bf, noise, access, &inner_opts)?
        } else {
            wmmse(&g_eff, &bf, noise, access, &inner_opts)?
        };
        bf = out.beamformers;
        beamformer_stage.push(out.sum_rate);
        wmmse_traces.push(out.trace);

        let problem = ScatterProblem {
            beamformers: &bf,
            realization: real,
            noise,
            z0: opts.z0,
        };
        let scatter = optimize_reactance(&reactance, &problem, &opts.scatter)?;
        if scatter.line_search_failed {
            line_search_failures += 1;
        }
        reactance = scatter.reactance;
        network = ScatteringNetwork::new(reactance.clone(), opts.z0)?;
        let next = -scatter.value;
        trace.push(next);
        let delta = (next - current).abs();
        current = next;
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }

    let g_eff = effective_channels(real, network.theta.as_ref())?;
    let report = rates_for_channels(&g_eff, &bf, noise)?;
    Ok(AoResult {
        scheme,
        beamformers: bf,
        network,
        report,
        trace,
        beamformer_stage,
        wmmse_traces,
        iterations,
        converged,
        line_search_failures,
    })
}

#[derive(Debug, Clone)]
pub struct Dominance {
    pub single: AoResult,
    pub fully: AoResult,
}

impl Dominance {
    pub fn single_rate(&self) -> f64 {
        self.single.sum_rate()
    }

    pub fn fully_rate(&self) -> f64 {
        self.fully.sum_rate()
    }

    pub fn gap(&self) -> f64 {
        self.fully_rate() - self.single_rate()
    }
}

/// Runs single-RSMA, then fully-RSMA started from the single solution lifted
/// into the fully connected parameter space.
pub fn warm_start_dominance(
    real: &ChannelRealization,
    power_budget: f64,
    noise: f64,
    opts: &AoOptions,
) -> Result<Dominance> {
    let single = alternating_optimize(real, SchemeSpec::SINGLE_RSMA, power_budget, noise, opts, &AoInit::default())?;
    let init = AoInit {
        beamformers: Some(single.beamformers.clone()),
        reactance: Some(single.network.reactance.to_fully()),
    };
    let fully = alternating_optimize(real, SchemeSpec::FULLY_RSMA, power_budget, noise, opts, &init)?;
    Ok(Dominance { single, fully })
}
