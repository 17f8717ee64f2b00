//! RIS architectures and the reactance-to-scattering map
//! `Theta = (jX + Z0 I)^-1 (jX - Z0 I)`.
//!
//! Any real symmetric `X` yields a symmetric unitary `Theta`, so optimizers can
//! work on the unconstrained packed reactance vector and never leave the
//! feasible set. The single connected RIS is the diagonal special case.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Dyn, LU};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, norm_one, CMatrix, C64, J};

pub const DEFAULT_Z0: f64 = 50.0;

/// Reciprocal condition floor for `jX + Z0 I`.
const RCOND_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Fully,
    Single,
    None,
}

impl Architecture {
    /// Number of tunable reactances for an `n`-port network.
    pub fn packed_len(self, n: usize) -> usize {
        match self {
            Architecture::Fully => n * (n + 1) / 2,
            Architecture::Single => n,
            Architecture::None => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Fully => "fully",
            Architecture::Single => "single",
            Architecture::None => "none",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fully" => Ok(Architecture::Fully),
            "single" => Ok(Architecture::Single),
            "none" => Ok(Architecture::None),
            other => Err(Error::Config(format!("unknown RIS architecture '{other}'"))),
        }
    }
}

/// Packs the upper triangle of a symmetric matrix row by row.
pub fn pack_symmetric(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::Dimension(format!("reactance matrix is {}x{}", n, x.ncols())));
    }
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push(x[(i, j)]);
        }
    }
    Ok(v)
}

pub fn unpack_symmetric(v: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let expected = n * (n + 1) / 2;
    if v.len() != expected {
        return Err(Error::Dimension(format!(
            "packed reactance has length {}, expected {expected} for N={n}",
            v.len()
        )));
    }
    let mut x = DMatrix::zeros(n, n);
    let mut p = 0;
    for i in 0..n {
        for j in i..n {
            x[(i, j)] = v[p];
            x[(j, i)] = v[p];
            p += 1;
        }
    }
    Ok(x)
}

/// Position of `(i, j)` (with `i <= j`) in the packed upper triangle.
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * i.saturating_sub(1) / 2 + j - i
}

/// Factorization of `jX + Z0 I` together with the resulting scattering matrix.
pub(crate) struct ImpedanceSystem {
    pub lu: LU<C64, Dyn, Dyn>,
    pub theta: CMatrix,
}

pub(crate) fn factor_impedance(x: &DMatrix<f64>, z0: f64) -> Result<ImpedanceSystem> {
    if !(z0 > 0.0) {
        return Err(Error::Domain(format!("reference impedance must be positive, got {z0}")));
    }
    let n = x.nrows();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reactance matrix".into()));
    }
    let jx = x.map(|v| C64::new(0.0, v));
    let eye = CMatrix::identity(n, n);
    let a = &jx + &eye * C64::new(z0, 0.0);
    let rhs = &jx - &eye * C64::new(z0, 0.0);
    let a_norm = norm_one(&a);
    let lu = a.lu();
    let theta = lu
        .solve(&rhs)
        .ok_or(Error::IllConditioned { rcond: 0.0 })?;
    if theta.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("scattering matrix".into()));
    }
    // (jX + Z0 I)^-1 = (I - Theta) / (2 Z0)
    if n > 0 {
        let inv_norm = norm_one(&(&eye - &theta)) / (2.0 * z0);
        let rcond = 1.0 / (a_norm * inv_norm);
        if !(rcond >= RCOND_FLOOR) {
            return Err(Error::IllConditioned { rcond });
        }
    }
    Ok(ImpedanceSystem { lu, theta })
}

/// Scattering matrix of a fully connected RIS with reactance matrix `x`.
pub fn theta_fully(x: &DMatrix<f64>, z0: f64) -> Result<CMatrix> {
    if x.nrows() != x.ncols() {
        return Err(Error::Dimension(format!("reactance matrix is {}x{}", x.nrows(), x.ncols())));
    }
    let asymmetry = (x - x.transpose()).abs().max();
    if asymmetry != 0.0 {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(factor_impedance(x, z0)?.theta)
}

#[inline]
pub fn single_port_reflection(x: f64, z0: f64) -> C64 {
    (J * x - z0) / (J * x + z0)
}

/// Diagonal scattering matrix of a single connected RIS.
pub fn theta_single(x: &[f64], z0: f64) -> Result<CMatrix> {
    if !(z0 > 0.0) {
        return Err(Error::Domain(format!("reference impedance must be positive, got {z0}")));
    }
    let n = x.len();
    let mut theta = CMatrix::zeros(n, n);
    for (i, &xi) in x.iter().enumerate() {
        theta[(i, i)] = single_port_reflection(xi, z0);
    }
    Ok(theta)
}

/// Returns `(||Theta^H Theta - I||_F, ||Theta - Theta^T||_F)`.
pub fn validate_scattering(theta: &CMatrix) -> (f64, f64) {
    let n = theta.nrows();
    let unitarity = frobenius(&(theta.adjoint() * theta - CMatrix::identity(n, n)));
    let symmetry = frobenius(&(theta - theta.transpose()));
    (unitarity, symmetry)
}

/// Packed reactance parameters for one RIS architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactanceVector {
    architecture: Architecture,
    elements: usize,
    values: Vec<f64>,
}

impl ReactanceVector {
    pub fn new(architecture: Architecture, elements: usize, values: Vec<f64>) -> Result<Self> {
        let expected = architecture.packed_len(elements);
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "{architecture} RIS with N={elements} needs {expected} reactances, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reactance vector".into()));
        }
        Ok(Self { architecture, elements, values })
    }

    pub fn zeros(architecture: Architecture, elements: usize) -> Self {
        Self {
            architecture,
            elements,
            values: vec![0.0; architecture.packed_len(elements)],
        }
    }

    /// Entries i.i.d. normal with standard deviation `z0`.
    pub fn random<R: Rng + ?Sized>(architecture: Architecture, elements: usize, z0: f64, rng: &mut R) -> Self {
        let values = (0..architecture.packed_len(elements))
            .map(|_| z0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { architecture, elements, values }
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.architecture, self.elements, values)
    }

    /// Full `N x N` reactance matrix (diagonal for the single architecture).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self.architecture {
            Architecture::Fully => unpack_symmetric(&self.values, self.elements)
                .expect("length checked at construction"),
            Architecture::Single => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values)),
            Architecture::None => DMatrix::zeros(0, 0),
        }
    }

    /// Lifts a single connected design into the fully connected parameter space.
    pub fn to_fully(&self) -> Self {
        match self.architecture {
            Architecture::Fully => self.clone(),
            _ => {
                let m = self.to_matrix();
                let n = m.nrows();
                Self {
                    architecture: Architecture::Fully,
                    elements: n,
                    values: pack_symmetric(&m).expect("square"),
                }
            }
        }
    }

    pub fn theta(&self, z0: f64) -> Result<Option<CMatrix>> {
        match self.architecture {
            Architecture::Fully => Ok(Some(factor_impedance(&self.to_matrix(), z0)?.theta)),
            Architecture::Single => Ok(Some(theta_single(&self.values, z0)?)),
            Architecture::None => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringNetwork {
    pub reactance: ReactanceVector,
    pub z0: f64,
    pub theta: Option<CMatrix>,
}

impl ScatteringNetwork {
    pub fn new(reactance: ReactanceVector, z0: f64) -> Result<Self> {
        let theta = reactance.theta(z0)?;
        Ok(Self { reactance, z0, theta })
    }

    pub fn none() -> Self {
        Self {
            reactance: ReactanceVector::zeros(Architecture::None, 0),
            z0: DEFAULT_Z0,
            theta: None,
        }
    }

    pub fn architecture(&self) -> Architecture {
        self.reactance.architecture()
    }
}
