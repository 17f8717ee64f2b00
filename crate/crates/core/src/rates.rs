//! Common and private stream SINRs and the RSMA sum-rate.
//!
//! Each user decodes the common stream treating every private stream as
//! interference, removes it by SIC, then decodes its own private stream. The
//! common rate is limited by the weakest user. All rates are in bits/s/Hz.

use crate::channel::{effective_channels, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{inner, CVector, C64};
use crate::ris::ScatteringNetwork;

/// Feasibility slack on the transmit power constraint.
pub const POWER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    /// Common-stream precoder `w_0`.
    pub common: CVector,
    /// Private precoders `w_1..w_K`.
    pub private: Vec<CVector>,
    pub power_budget: f64,
}

impl Beamformers {
    pub fn new(common: CVector, private: Vec<CVector>, power_budget: f64) -> Result<Self> {
        let m = common.len();
        if private.is_empty() || private.iter().any(|w| w.len() != m) {
            return Err(Error::Dimension(format!(
                "need at least one private precoder, all of length {m}"
            )));
        }
        Ok(Self { common, private, power_budget })
    }

    pub fn zeros(antennas: usize, users: usize, power_budget: f64) -> Self {
        Self {
            common: CVector::zeros(antennas),
            private: vec![CVector::zeros(antennas); users],
            power_budget,
        }
    }

    pub fn antennas(&self) -> usize {
        self.common.len()
    }

    pub fn users(&self) -> usize {
        self.private.len()
    }

    /// `tr(W W^H)`.
    pub fn total_power(&self) -> f64 {
        self.common.norm_squared() + self.private.iter().map(|w| w.norm_squared()).sum::<f64>()
    }

    pub fn is_feasible(&self) -> bool {
        self.total_power() <= self.power_budget + POWER_SLACK
    }

    /// Stream `i` with `0` the common stream.
    pub fn stream(&self, i: usize) -> &CVector {
        if i == 0 {
            &self.common
        } else {
            &self.private[i - 1]
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            common: &self.common * C64::from(c),
            private: self.private.iter().map(|w| w * C64::from(c)).collect(),
            power_budget: self.power_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub common_sinr: Vec<f64>,
    pub private_sinr: Vec<f64>,
    /// Common-stream rate achievable at each user.
    pub common_rates: Vec<f64>,
    pub common_rate: f64,
    pub private_rates: Vec<f64>,
    pub sum_rate: f64,
}

/// `|g~_k^H w_i|^2` for every stream `i = 0..=K`.
pub fn received_powers(g_eff: &CVector, bf: &Beamformers) -> Vec<f64> {
    (0..=bf.users())
        .map(|i| inner(g_eff, bf.stream(i)).norm_sqr())
        .collect()
}

/// `(gamma_{0,k}, gamma_k)` for user `user` (zero-based).
pub fn stream_sinrs(g_eff: &CVector, bf: &Beamformers, noise: f64, user: usize) -> (f64, f64) {
    let p = received_powers(g_eff, bf);
    sinrs_from_powers(&p, noise, user)
}

pub(crate) fn sinrs_from_powers(p: &[f64], noise: f64, user: usize) -> (f64, f64) {
    let private_total: f64 = p[1..].iter().sum();
    let common = p[0] / (private_total + noise);
    let private = p[user + 1] / (private_total - p[user + 1] + noise);
    (common, private)
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

pub fn rates_for_channels(g_eff: &[CVector], bf: &Beamformers, noise: f64) -> Result<RateReport> {
    let k = bf.users();
    if g_eff.len() != k {
        return Err(Error::Dimension(format!(
            "{} effective channels for {k} private streams",
            g_eff.len()
        )));
    }
    if g_eff.iter().any(|g| g.len() != bf.antennas()) {
        return Err(Error::Dimension("effective channel length differs from antenna count".into()));
    }
    let mut common_sinr = Vec::with_capacity(k);
    let mut private_sinr = Vec::with_capacity(k);
    for (user, g) in g_eff.iter().enumerate() {
        let (c, p) = stream_sinrs(g, bf, noise, user);
        common_sinr.push(c);
        private_sinr.push(p);
    }
    let common_rates: Vec<f64> = common_sinr.iter().map(|&s| rate_from_sinr(s)).collect();
    let private_rates: Vec<f64> = private_sinr.iter().map(|&s| rate_from_sinr(s)).collect();
    let common_rate = common_rates.iter().copied().fold(f64::INFINITY, f64::min);
    let sum_rate = common_rate + private_rates.iter().sum::<f64>();
    Ok(RateReport {
        common_sinr,
        private_sinr,
        common_rates,
        common_rate,
        private_rates,
        sum_rate,
    })
}

pub fn rate_report(
    real: &ChannelRealization,
    net: &ScatteringNetwork,
    bf: &Beamformers,
    noise: f64,
) -> Result<RateReport> {
    let g_eff = effective_channels(real, net.theta.as_ref())?;
    rates_for_channels(&g_eff, bf, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn cv(v: &[f64]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)))
    }

    #[test]
    fn common_sinr_arithmetic() {
        // |g^H w0|^2 = 4, private power at the receiver 1, noise 1
        let g = cv(&[1.0]);
        let bf = Beamformers::new(cv(&[2.0]), vec![cv(&[1.0])], 10.0).unwrap();
        let (c, _) = stream_sinrs(&g, &bf, 1.0, 0);
        assert!((c - 2.0).abs() < 1e-15);
        assert!((rate_from_sinr(c) - 3f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn zero_common_precoder() {
        let g = cv(&[1.0, 0.5]);
        let bf = Beamformers::new(cv(&[0.0, 0.0]), vec![cv(&[1.0, 0.0]), cv(&[0.0, 1.0])], 2.0).unwrap();
        let report = rates_for_channels(&[g.clone(), g], &bf, 1.0).unwrap();
        assert!(report.common_sinr.iter().all(|&s| s == 0.0));
        assert_eq!(report.common_rate, 0.0);
    }

    #[test]
    fn single_user_has_no_interference() {
        let g = cv(&[1.0, 2.0]);
        let bf = Beamformers::new(cv(&[0.0, 0.0]), vec![cv(&[1.0, 1.0])], 2.0).unwrap();
        let (_, p) = stream_sinrs(&g, &bf, 0.5, 0);
        assert!((p - 9.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn common_rate_is_minimum() {
        // noise 1, only common power: gamma_0k = |a|^2, rates log2(1+|a|^2)
        let a1 = (2f64.powf(1.0) - 1.0).sqrt();
        let a2 = (2f64.powf(0.7) - 1.0).sqrt();
        let bf = Beamformers::new(cv(&[1.0]), vec![cv(&[0.0]), cv(&[0.0])], 1.0).unwrap();
        let report = rates_for_channels(&[cv(&[a1]), cv(&[a2])], &bf, 1.0).unwrap();
        assert!((report.common_rates[0] - 1.0).abs() < 1e-12);
        assert!((report.common_rate - 0.7).abs() < 1e-12);
        assert_eq!(report.common_rate, report.common_rates[1]);
    }

    #[test]
    fn zero_beamformers_zero_rate() {
        let bf = Beamformers::zeros(2, 2, 1.0);
        let report = rates_for_channels(&[cv(&[1.0, 1.0]), cv(&[1.0, -1.0])], &bf, 1.0).unwrap();
        assert_eq!(report.sum_rate, 0.0);
    }

    #[test]
    fn dimension_checks() {
        let bf = Beamformers::zeros(2, 2, 1.0);
        assert!(rates_for_channels(&[cv(&[1.0, 1.0])], &bf, 1.0).is_err());
        assert!(Beamformers::new(cv(&[1.0]), vec![cv(&[1.0, 2.0])], 1.0).is_err());
    }
}
