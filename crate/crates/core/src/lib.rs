//! Joint rate-splitting beamforming and RIS scattering-matrix optimization for
//! the downlink multi-user MISO broadcast channel.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: planar geometry, path loss, Rayleigh draws, effective channels.
//! - [`ris`]: fully/single connected scattering networks and the reactance map.
//! - [`rates`]: common/private SINRs and the RSMA sum-rate.
//! - [`wmmse`]: MMSE equalizers, rate weights and the beamformer QCQP.
//! - [`lbfgs`]: limited-memory quasi-Newton with a strong-Wolfe line search.
//! - [`scatter`]: sum-rate maximization over the packed reactance vector.
//! - [`ao`]: the alternating optimization driver and the six compared schemes.
//! - [`experiment`]: Monte Carlo sweeps, CSV output and aggregation.

pub mod ao;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod lbfgs;
pub mod linalg;
pub mod rates;
pub mod ris;
pub mod scatter;
pub mod wmmse;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
