//! Two-site Bose-Hubbard (bosonic Josephson junction) Hamiltonian.
//!
//! The Fock basis is `|k, N-k>` with `k` counting bosons in the LEFT well, so
//! the initial state with every boson in the right well is index 0.
//!
//! ```text
//! H = -J (a_L^+ a_R + a_R^+ a_L) + U/2 (n_L^2 + n_R^2)
//!   = U L_z^2 - 2 J L_x + U N^2 / 4
//! ```
//!
//! Units: hbar = 1, so `J`, `U` and the averaging rate `s` share one energy
//! unit and time is measured in its inverse.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_RATE: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const DEFAULT_TRACE_TOL: f64 = 1e-10;

/// Physical and numerical configuration of one junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Total boson number `N`.
    pub n: usize,
    /// Tunneling rate `J`.
    pub j: f64,
    /// On-site interaction `U`.
    pub u: f64,
    /// Observation-time averaging rate `s`.
    pub s: f64,
    /// Renyi order.
    pub alpha: f64,
    /// Relative eigen-residual tolerance.
    pub eig_tol: f64,
    /// Tolerance on probability sums.
    pub trace_tol: f64,
}

impl ModelParams {
    /// Parameters with the default rate, Renyi order and tolerances.
    pub fn new(n: usize, j: f64, u: f64) -> Self {
        ModelParams {
            n,
            j,
            u,
            s: DEFAULT_RATE,
            alpha: DEFAULT_ALPHA,
            eig_tol: DEFAULT_EIG_TOL,
            trace_tol: DEFAULT_TRACE_TOL,
        }
    }

    pub fn with_rate(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::param("N", "boson number must be at least 1"));
        }
        if !(self.j.is_finite() && self.j >= 0.0) {
            return Err(Error::param(
                "J",
                format!("must be finite and >= 0, got {}", self.j),
            ));
        }
        if !(self.u.is_finite() && self.u >= 0.0) {
            return Err(Error::param(
                "U",
                format!("must be finite and >= 0, got {}", self.u),
            ));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::param(
                "s",
                format!("must be finite and > 0, got {}", self.s),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::param(
                "alpha",
                format!("must be > 0, got {}", self.alpha),
            ));
        }
        if self.alpha == 1.0 {
            return Err(Error::UnsupportedOrder);
        }
        if !(self.eig_tol > 0.0) {
            return Err(Error::param("eig_tol", "must be > 0"));
        }
        if !(self.trace_tol > 0.0) {
            return Err(Error::param("trace_tol", "must be > 0"));
        }
        Ok(())
    }

    /// Dimension of the Fock space, `N + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }
}

/// Dimensionless ratio `u = U N / J` that controls the localization transition.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CharacteristicParameter(pub f64);

impl CharacteristicParameter {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn characteristic_u(params: &ModelParams) -> Result<CharacteristicParameter> {
    params.validate()?;
    if params.j == 0.0 {
        return Err(Error::ZeroTunneling);
    }
    Ok(CharacteristicParameter(
        params.u * params.n as f64 / params.j,
    ))
}

/// Real symmetric tridiagonal matrix. Only the first off-diagonal is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalHamiltonian {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalHamiltonian {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::param(
                "offdiag",
                format!(
                    "expected {} entries, got {}",
                    diag.len().saturating_sub(1),
                    offdiag.len()
                ),
            ));
        }
        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(Error::param("diag", "entries must be finite"));
        }
        Ok(TridiagonalHamiltonian { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Infinity norm (maximum absolute row sum), an upper bound on the spectral radius.
    pub fn norm(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let left = if k > 0 {
                    self.offdiag[k - 1].abs()
                } else {
                    0.0
                };
                let right = if k + 1 < n {
                    self.offdiag[k].abs()
                } else {
                    0.0
                };
                self.diag[k].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = self.diag[k];
        }
        for (k, &e) in self.offdiag.iter().enumerate() {
            m[(k, k + 1)] = e;
            m[(k + 1, k)] = e;
        }
        m
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

/// Fock-basis Hamiltonian with `diag[k] = U/2 (k^2 + (N-k)^2)` and
/// `offdiag[k] = -J sqrt((k+1)(N-k))` coupling `|k,N-k>` to `|k+1,N-k-1>`.
pub fn build_hamiltonian(params: &ModelParams) -> Result<TridiagonalHamiltonian> {
    params.validate()?;
    let n = params.n;
    let diag = (0..=n)
        .map(|k| {
            let (l, r) = (k as f64, (n - k) as f64);
            0.5 * params.u * (l * l + r * r)
        })
        .collect();
    let offdiag = (0..n)
        .map(|k| -params.j * (((k + 1) * (n - k)) as f64).sqrt())
        .collect();
    TridiagonalHamiltonian::new(diag, offdiag)
}

/// Dense `U L_z^2 - 2 J L_x + U N^2/4` in the `L_z` eigenbasis with spin
/// `S = N/2` and `m = k - N/2`.
///
/// Built from angular-momentum matrix elements rather than boson counting, so
/// it serves as an independent cross-check of [`build_hamiltonian`].
pub fn build_spin_hamiltonian(params: &ModelParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let dim = params.dim();
    let spin = params.n as f64 / 2.0;
    let m_of = |k: usize| k as f64 - spin;

    let lz = DMatrix::from_fn(dim, dim, |a, b| if a == b { m_of(a) } else { 0.0 });
    let mut lx = DMatrix::zeros(dim, dim);
    for k in 0..params.n {
        let m = m_of(k);
        let elem = 0.5 * (spin * (spin + 1.0) - m * (m + 1.0)).sqrt();
        lx[(k, k + 1)] = elem;
        lx[(k + 1, k)] = elem;
    }

    let shift = params.u * (params.n * params.n) as f64 / 4.0;
    let mut h = &lz * &lz * params.u - lx * (2.0 * params.j);
    for k in 0..dim {
        h[(k, k)] += shift;
    }
    Ok(h)
}
