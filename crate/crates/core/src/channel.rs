//! Planar simulation geometry, log-distance path loss and Rayleigh-faded
//! channel draws.
//!
//! A realization is keyed by `(seed, draw_index)`: the generator is a ChaCha20
//! stream seeded with `seed` and positioned on stream `draw_index`, so every
//! draw can be regenerated independently of the order in which draws are made.
//! User positions are re-drawn for every realization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_cmatrix, random_cvector, CMatrix, CVector};
use crate::ris::Architecture;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Linear power gain `L0 * d^-alpha` with `L0` given in dB.
pub fn path_loss(d: f64, l0_db: f64, alpha: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("link distance must be positive, got {d}")));
    }
    Ok(10f64.powf(l0_db / 10.0) * d.powf(-alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub bs_position: Point,
    pub ris_position: Point,
    pub user_circle_center: Point,
    /// Diameter of the disc users are dropped in, meters.
    pub user_circle_diameter: f64,
    pub antennas: usize,
    pub users: usize,
    pub elements: usize,
    /// Reference path loss at 1 m, dB.
    pub l0_db: f64,
    pub alpha_bs_user: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    /// Noise power at every user (linear, same unit as the transmit power).
    pub noise_power: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            ris_position: [50.0, 50.0],
            user_circle_center: [150.0, 0.0],
            user_circle_diameter: 20.0,
            antennas: 4,
            users: 4,
            elements: 32,
            l0_db: -30.0,
            alpha_bs_user: 3.5,
            alpha_bs_ris: 2.0,
            alpha_ris_user: 2.2,
            noise_power: DEFAULT_NOISE_POWER,
        }
    }
}

/// -80 dBm expressed in mW, the unit the transmit power is given in.
pub const DEFAULT_NOISE_POWER: f64 = 1e-8;

impl Scenario {
    pub fn validate(&self, architecture: Architecture) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::Config("antenna and user counts must be at least 1".into()));
        }
        if self.elements == 0 && architecture != Architecture::None {
            return Err(Error::Config(
                "zero RIS elements is only valid without an RIS".into(),
            ));
        }
        for (name, alpha) in [
            ("alpha_bs_user", self.alpha_bs_user),
            ("alpha_bs_ris", self.alpha_bs_ris),
            ("alpha_ris_user", self.alpha_ris_user),
        ] {
            if !(alpha > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {alpha}")));
            }
        }
        if !(self.user_circle_diameter > 0.0) {
            return Err(Error::Config("user circle diameter must be positive".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::Config("noise power must be positive".into()));
        }
        Ok(())
    }

    pub fn with_elements(&self, elements: usize) -> Self {
        Self { elements, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS to user k, length M.
    pub direct: Vec<CVector>,
    /// RIS to user k, length N.
    pub ris_user: Vec<CVector>,
    /// BS to RIS, N x M.
    pub bs_ris: CMatrix,
    pub user_positions: Vec<Point>,
    pub seed: u64,
    pub draw_index: u64,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.bs_ris.ncols()
    }

    pub fn users(&self) -> usize {
        self.direct.len()
    }

    pub fn elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    /// A realization built from explicit channel matrices (tests, examples).
    pub fn from_parts(direct: Vec<CVector>, ris_user: Vec<CVector>, bs_ris: CMatrix) -> Result<Self> {
        let m = bs_ris.ncols();
        let n = bs_ris.nrows();
        if direct.len() != ris_user.len() || direct.is_empty() {
            return Err(Error::Dimension("need one direct and one RIS channel per user".into()));
        }
        if direct.iter().any(|g| g.len() != m) || ris_user.iter().any(|h| h.len() != n) {
            return Err(Error::Dimension(format!("channels must have lengths M={m} and N={n}")));
        }
        let k = direct.len();
        Ok(Self {
            direct,
            ris_user,
            bs_ris,
            user_positions: vec![[0.0, 0.0]; k],
            seed: 0,
            draw_index: 0,
        })
    }
}

pub fn realization_rng(seed: u64, draw_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(draw_index);
    rng
}

/// Draws user positions and all channels for one Monte Carlo realization.
///
/// Draw order is positions, then direct channels, then RIS-user channels, then
/// the BS-RIS matrix, so realizations that differ only in `elements` share
/// user positions and direct channels.
pub fn draw_realization(scenario: &Scenario, seed: u64, draw_index: u64) -> Result<ChannelRealization> {
    let m = scenario.antennas;
    let k = scenario.users;
    let n = scenario.elements;
    if m == 0 || k == 0 {
        return Err(Error::Config("antenna and user counts must be at least 1".into()));
    }
    let mut rng = realization_rng(seed, draw_index);
    let radius = 0.5 * scenario.user_circle_diameter;
    let user_positions: Vec<Point> = (0..k)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            [
                scenario.user_circle_center[0] + r * phi.cos(),
                scenario.user_circle_center[1] + r * phi.sin(),
            ]
        })
        .collect();

    let mut direct = Vec::with_capacity(k);
    for pos in &user_positions {
        let var = path_loss(distance(scenario.bs_position, *pos), scenario.l0_db, scenario.alpha_bs_user)?;
        direct.push(random_cvector(&mut rng, m, var));
    }
    let mut ris_user = Vec::with_capacity(k);
    for pos in &user_positions {
        let var = path_loss(distance(scenario.ris_position, *pos), scenario.l0_db, scenario.alpha_ris_user)?;
        ris_user.push(random_cvector(&mut rng, n, var));
    }
    let bs_ris = if n > 0 {
        let var = path_loss(
            distance(scenario.bs_position, scenario.ris_position),
            scenario.l0_db,
            scenario.alpha_bs_ris,
        )?;
        random_cmatrix(&mut rng, n, m, var)
    } else {
        CMatrix::zeros(0, m)
    };

    Ok(ChannelRealization {
        direct,
        ris_user,
        bs_ris,
        user_positions,
        seed,
        draw_index,
    })
}

/// Effective channels `g~_k` with `g~_k^H = g_k^H + h_k^H Theta G`.
pub fn effective_channels(real: &ChannelRealization, theta: Option<&CMatrix>) -> Result<Vec<CVector>> {
    let Some(theta) = theta else {
        return Ok(real.direct.clone());
    };
    let n = real.elements();
    if theta.nrows() != n || theta.ncols() != n {
        return Err(Error::Dimension(format!(
            "scattering matrix is {}x{}, RIS has {n} elements",
            theta.nrows(),
            theta.ncols()
        )));
    }
    // g~_k = g_k + G^H Theta^H h_k
    let cascade = real.bs_ris.adjoint() * theta.adjoint();
    Ok(real
        .direct
        .iter()
        .zip(&real.ris_user)
        .map(|(g, h)| g + &cascade * h)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_values() {
        assert_relative_eq!(path_loss(1.0, -30.0, 3.5).unwrap(), 1.0e-3, max_relative = 1e-14);
        assert_relative_eq!(path_loss(100.0, -30.0, 2.0).unwrap(), 1.0e-7, max_relative = 1e-14);
        assert_relative_eq!(path_loss(150.0, -30.0, 3.5).unwrap(), 2.420e-11, max_relative = 1e-3);
        assert!(matches!(path_loss(0.0, -30.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(path_loss(-1.0, -30.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bs_ris_distance() {
        let s = Scenario::default();
        assert_relative_eq!(distance(s.bs_position, s.ris_position), 70.710678, epsilon = 1e-6);
    }

    #[test]
    fn draws_are_deterministic_and_shaped() {
        let s = Scenario { elements: 6, ..Scenario::default() };
        let a = draw_realization(&s, 7, 3).unwrap();
        let b = draw_realization(&s, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = draw_realization(&s, 7, 4).unwrap();
        assert_ne!(a.direct, c.direct);
        assert_eq!(a.users(), 4);
        assert_eq!(a.antennas(), 4);
        assert_eq!(a.elements(), 6);
        assert!(a.ris_user.iter().all(|h| h.len() == 6));
        for p in &a.user_positions {
            assert!(distance(*p, s.user_circle_center) <= 10.0);
        }
    }

    #[test]
    fn direct_channels_shared_across_element_counts() {
        let s = Scenario::default();
        let a = draw_realization(&s.with_elements(8), 1, 2).unwrap();
        let b = draw_realization(&s.with_elements(16), 1, 2).unwrap();
        assert_eq!(a.direct, b.direct);
        assert_eq!(a.user_positions, b.user_positions);
    }

    #[test]
    fn no_ris_channels_pass_through() {
        let s = Scenario { elements: 3, ..Scenario::default() };
        let real = draw_realization(&s, 1, 0).unwrap();
        assert_eq!(effective_channels(&real, None).unwrap(), real.direct);
    }

    #[test]
    fn minus_identity_subtracts_cascade() {
        let s = Scenario { elements: 3, ..Scenario::default() };
        let real = draw_realization(&s, 5, 0).unwrap();
        let theta = -CMatrix::identity(3, 3);
        let eff = effective_channels(&real, Some(&theta)).unwrap();
        for k in 0..real.users() {
            // g~^H = g^H - h^H G
            let expected = (real.direct[k].adjoint() - real.ris_user[k].adjoint() * &real.bs_ris).adjoint();
            assert!((&eff[k] - expected).norm() < 1e-24);
        }
    }

    #[test]
    fn effective_channel_matches_scalar_loops() {
        let mut rng = realization_rng(11, 0);
        let (m, n) = (2, 2);
        let real = ChannelRealization::from_parts(
            vec![random_cvector(&mut rng, m, 1.0)],
            vec![random_cvector(&mut rng, n, 1.0)],
            random_cmatrix(&mut rng, n, m, 1.0),
        )
        .unwrap();
        let theta = random_cmatrix(&mut rng, n, n, 1.0);
        let eff = effective_channels(&real, Some(&theta)).unwrap();
        for col in 0..m {
            // (g^H + h^H Theta G)_col, expanded element by element
            let mut row = real.direct[0][col].conj();
            for a in 0..n {
                for b in 0..n {
                    row += real.ris_user[0][a].conj() * theta[(a, b)] * real.bs_ris[(b, col)];
                }
            }
            let got: C64 = eff[0][col].conj();
            assert!((got - row).norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = Scenario { elements: 3, ..Scenario::default() };
        let real = draw_realization(&s, 1, 0).unwrap();
        let theta = CMatrix::identity(2, 2);
        assert!(matches!(effective_channels(&real, Some(&theta)), Err(Error::Dimension(_))));
    }

    #[test]
    fn validation() {
        let s = Scenario { elements: 0, ..Scenario::default() };
        assert!(s.validate(Architecture::None).is_ok());
        assert!(s.validate(Architecture::Fully).is_err());
        let bad = Scenario { alpha_bs_ris: 0.0, ..Scenario::default() };
        assert!(bad.validate(Architecture::None).is_err());
    }
}
