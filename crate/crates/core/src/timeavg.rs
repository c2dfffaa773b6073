//! Observation-time averaging with an exponentially distributed measurement
//! time of rate `s`, and the entanglement spectrum of the averaged state.
//!
//! Averaging `e^{-i(E_j - E_j')t}` against `s e^{-st}` gives
//! `1 / (1 + i(E_j - E_j')/s)`. The pair coefficients
//! `c_n(j, j') = V[n,j] w[j] V[n,j'] w[j']` are symmetric in `(j, j')`, so the
//! imaginary parts cancel and the sum reduces to the real Lorentzian kernel
//! `s^2 / (s^2 + (E_j - E_j')^2)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{renyi_entropy_of, TimeStamp};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, ModelParams};
use crate::numeric::CompensatedSum;
use crate::spectral::{diagonalize, Spectrum};

/// Probabilities below this are clamped in the entanglement spectrum.
pub const XI_PROBABILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedDensity {
    pub p_avg: Vec<f64>,
    pub s: f64,
}

impl AveragedDensity {
    pub fn trace(&self) -> f64 {
        self.p_avg.iter().sum()
    }

    pub fn stamp(&self) -> TimeStamp {
        TimeStamp::TimeAveraged
    }
}

/// Lorentzian pair sum for every Fock index.
pub fn averaged_reduced_density(spec: &Spectrum, s: f64) -> Result<AveragedDensity> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::param(
            "s",
            format!("must be finite and > 0, got {s}"),
        ));
    }
    let d = spec.dim();
    let e = spec.energies();
    let s2 = s * s;
    let mut kernel = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let gap = e[a] - e[b];
            kernel[a * d + b] = s2 / (s2 + gap * gap);
        }
    }
    let weights = spec.amplitude_weights();

    let p_avg = (0..d)
        .into_par_iter()
        .map(|n| {
            let c = &weights[n * d..(n + 1) * d];
            let mut acc = CompensatedSum::default();
            for a in 0..d {
                if c[a] == 0.0 {
                    continue;
                }
                // diagonal term plus twice the strict upper triangle
                acc.add(c[a] * c[a]);
                let row = &kernel[a * d..(a + 1) * d];
                let mut inner = CompensatedSum::default();
                for b in a + 1..d {
                    inner.add(c[b] * row[b]);
                }
                acc.add(2.0 * c[a] * inner.value());
            }
            acc.value().max(0.0)
        })
        .collect();
    Ok(AveragedDensity { p_avg, s })
}

/// Build, diagonalize and average for one parameter set.
pub fn averaged_density_for(params: &ModelParams) -> Result<AveragedDensity> {
    let h = build_hamiltonian(params)?;
    let spec = diagonalize(&h, params.eig_tol)?;
    averaged_reduced_density(&spec, params.s)
}

/// Renyi entropy (bits) of the time-averaged reduced density matrix.
pub fn averaged_entropy(params: &ModelParams) -> Result<f64> {
    let avg = averaged_density_for(params)?;
    renyi_entropy_of(&avg.p_avg, params.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum LogBase {
    #[default]
    E,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
        }
    }

    /// Sentinel written for clamped levels.
    pub fn floor(self) -> f64 {
        self.log(XI_PROBABILITY_FLOOR)
    }

    pub fn exp(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.exp(),
            LogBase::Two => x.exp2(),
        }
    }
}

/// Entanglement spectrum `xi[n] = log p_avg[n]`, with entries below
/// [`XI_PROBABILITY_FLOOR`] set to the sentinel and flagged in `clamped`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementSpectrumResult {
    pub xi: Vec<f64>,
    pub clamped: Vec<bool>,
    pub base: LogBase,
}

impl EntanglementSpectrumResult {
    pub fn from_density(avg: &AveragedDensity, base: LogBase) -> Self {
        let (xi, clamped) = avg
            .p_avg
            .iter()
            .map(|&p| {
                if p < XI_PROBABILITY_FLOOR {
                    (base.floor(), true)
                } else {
                    (base.log(p), false)
                }
            })
            .unzip();
        EntanglementSpectrumResult { xi, clamped, base }
    }

    /// `max xi - min xi` over unclamped levels.
    pub fn level_spread(&self) -> f64 {
        let live = self
            .xi
            .iter()
            .zip(&self.clamped)
            .filter(|(_, c)| !**c)
            .map(|(x, _)| *x);
        let (lo, hi) = live.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// Probability mass carried by the unclamped levels.
    pub fn unclamped_mass(&self) -> f64 {
        self.xi
            .iter()
            .zip(&self.clamped)
            .filter(|(_, c)| !**c)
            .map(|(x, _)| self.base.exp(*x))
            .sum()
    }
}

pub fn entanglement_spectrum(params: &ModelParams) -> Result<EntanglementSpectrumResult> {
    entanglement_spectrum_in(params, LogBase::E)
}

pub fn entanglement_spectrum_in(
    params: &ModelParams,
    base: LogBase,
) -> Result<EntanglementSpectrumResult> {
    let avg = averaged_density_for(params)?;
    Ok(EntanglementSpectrumResult::from_density(&avg, base))
}
