//! Exact diagonalization of the bosonic Josephson junction (two-site
//! Bose-Hubbard model): real-time and observation-time-averaged Renyi
//! entanglement entropy, the entanglement spectrum, and parameter scans that
//! locate the Hilbert-space localization transition.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod scans;
pub mod spectral;
pub mod timeavg;

pub use error::{Error, Result};
pub use model::{build_hamiltonian, build_spin_hamiltonian, characteristic_u, ModelParams};
pub use spectral::{diagonalize, Spectrum};
