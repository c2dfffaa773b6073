//! Real-time evolution of the reduced density matrix of the left well.
//!
//! Particle-number conservation makes the reduced density matrix diagonal in
//! the Fock basis, so only `p[n] = |<n, N-n| e^{-iHt} |0, N>|^2` is tracked.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, ModelParams};
use crate::spectral::{diagonalize, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeStamp {
    At(f64),
    TimeAveraged,
}

/// Diagonal of the reduced density matrix, entries clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedDensityDiagonal {
    pub p: Vec<f64>,
    pub stamp: TimeStamp,
}

impl ReducedDensityDiagonal {
    /// Validates a caller-supplied probability vector: every entry must lie in
    /// `[-trace_tol, 1 + trace_tol]` and the sum must be 1 within `trace_tol`.
    pub fn from_probabilities(p: Vec<f64>, stamp: TimeStamp, trace_tol: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::param("p", "empty probability vector"));
        }
        if let Some(bad) = p
            .iter()
            .find(|x| !(**x >= -trace_tol && **x <= 1.0 + trace_tol))
        {
            return Err(Error::param("p", format!("entry {bad} outside [0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > trace_tol {
            return Err(Error::param(
                "p",
                format!("entries sum to {sum}, expected 1"),
            ));
        }
        Ok(Self::clamped(p, stamp))
    }

    pub(crate) fn clamped(mut p: Vec<f64>, stamp: TimeStamp) -> Self {
        for x in &mut p {
            *x = x.clamp(0.0, 1.0);
        }
        ReducedDensityDiagonal { p, stamp }
    }

    pub fn trace(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Evaluates `A_n(t) = sum_j V[n,j] w[j] e^{-i E_j t}` and `p[n] = |A_n|^2`
/// for one spectrum, at O(N^2) per time point.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    dim: usize,
    weights: Vec<f64>,
    energies: Vec<f64>,
}

impl DensityEvaluator {
    pub fn new(spec: &Spectrum) -> Self {
        let e = spec.energies();
        // a global energy shift only changes an overall phase; centring keeps
        // the phases E_j t small for long times
        let centre = 0.5 * (e[0] + e[e.len() - 1]);
        DensityEvaluator {
            dim: spec.dim(),
            weights: spec.amplitude_weights(),
            energies: e.iter().map(|x| x - centre).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unclamped `|A_n(t)|^2`.
    pub fn raw_density(&self, t: f64) -> Vec<f64> {
        let d = self.dim;
        let (sin, cos): (Vec<f64>, Vec<f64>) =
            self.energies.iter().map(|e| (e * t).sin_cos()).unzip();
        (0..d)
            .map(|n| {
                let row = &self.weights[n * d..(n + 1) * d];
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..d {
                    re += row[j] * cos[j];
                    im -= row[j] * sin[j];
                }
                re * re + im * im
            })
            .collect()
    }

    pub fn density(&self, t: f64) -> ReducedDensityDiagonal {
        ReducedDensityDiagonal::clamped(self.raw_density(t), TimeStamp::At(t))
    }
}

pub fn reduced_density_at(spec: &Spectrum, t: f64) -> ReducedDensityDiagonal {
    DensityEvaluator::new(spec).density(t)
}

/// `S_alpha = log2(sum_n p_n^alpha) / (1 - alpha)` in bits.
pub fn renyi_entropy(p: &ReducedDensityDiagonal, alpha: f64) -> Result<f64> {
    renyi_entropy_of(&p.p, alpha)
}

pub fn renyi_entropy_of(p: &[f64], alpha: f64) -> Result<f64> {
    if alpha == 1.0 {
        return Err(Error::UnsupportedOrder);
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
    }
    let moment: f64 = if alpha == 2.0 {
        p.iter().map(|x| x * x).sum()
    } else {
        p.iter().filter(|x| **x > 0.0).map(|x| x.powf(alpha)).sum()
    };
    debug_assert!(moment > 0.0, "entropy of an all-zero distribution");
    Ok((moment.log2() / (1.0 - alpha)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTimeSeries {
    pub times: Vec<f64>,
    /// Renyi entropy in bits.
    pub entropy: Vec<f64>,
    pub params: ModelParams,
}

impl EntropyTimeSeries {
    /// Mean entropy over samples with `t >= t_min`.
    pub fn mean_after(&self, t_min: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.entropy)
            .filter(|(t, _)| **t >= t_min)
            .map(|(_, s)| *s)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// The diagonalized junction ready for repeated time evaluations.
#[derive(Debug, Clone)]
pub struct Evolution {
    params: ModelParams,
    spectrum: Spectrum,
    evaluator: DensityEvaluator,
}

impl Evolution {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let h = build_hamiltonian(params)?;
        let spectrum = diagonalize(&h, params.eig_tol)?;
        let evaluator = DensityEvaluator::new(&spectrum);
        Ok(Evolution {
            params: *params,
            spectrum,
            evaluator,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn evaluator(&self) -> &DensityEvaluator {
        &self.evaluator
    }

    pub fn density_at(&self, t: f64) -> ReducedDensityDiagonal {
        self.evaluator.density(t)
    }

    pub fn entropy_at(&self, t: f64) -> f64 {
        renyi_entropy(&self.density_at(t), self.params.alpha)
            .expect("alpha validated at construction")
    }

    /// Densities on the grid, in grid order.
    pub fn densities(&self, t_grid: &[f64]) -> Result<Vec<ReducedDensityDiagonal>> {
        check_grid(t_grid)?;
        Ok(t_grid.par_iter().map(|&t| self.density_at(t)).collect())
    }

    pub fn series(&self, t_grid: &[f64]) -> Result<EntropyTimeSeries> {
        check_grid(t_grid)?;
        let entropy = t_grid.par_iter().map(|&t| self.entropy_at(t)).collect();
        Ok(EntropyTimeSeries {
            times: t_grid.to_vec(),
            entropy,
            params: self.params,
        })
    }
}

pub fn evolve_series(params: &ModelParams, t_grid: &[f64]) -> Result<EntropyTimeSeries> {
    check_grid(t_grid)?;
    Evolution::new(params)?.series(t_grid)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "time grid is empty"));
    }
    if !t_grid.iter().all(|t| t.is_finite() && *t >= 0.0) {
        return Err(Error::param("t_grid", "times must be finite and >= 0"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("t_grid", "times must be strictly ascending"));
    }
    Ok(())
}

/// `t_i = i * dt` for `i = 0..=floor(t_max / dt)`.
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::param("tmax", format!("must be >= 0, got {t_max}")));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| i as f64 * dt).collect())
}

/// Closed-form non-interacting density: each boson tunnels independently, so
/// `p[n] = C(N, n) cos^{2(N-n)}(Jt) sin^{2n}(Jt)`.
pub fn analytic_u0_density(n_bosons: usize, j: f64, t: f64) -> ReducedDensityDiagonal {
    let c2 = (j * t).cos().powi(2);
    let s2 = (j * t).sin().powi(2);
    // k * ln(x) with the convention 0 * ln(0) = 0
    let log_pow = |x: f64, k: usize| if k == 0 { 0.0 } else { k as f64 * x.ln() };

    let mut ln_fact = vec![0.0; n_bosons + 1];
    for k in 1..=n_bosons {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let p = (0..=n_bosons)
        .map(|k| {
            let ln_binom = ln_fact[n_bosons] - ln_fact[k] - ln_fact[n_bosons - k];
            (ln_binom + log_pow(c2, n_bosons - k) + log_pow(s2, k)).exp()
        })
        .collect();
    ReducedDensityDiagonal::clamped(p, TimeStamp::At(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn evo(n: usize, j: f64, u: f64) -> Evolution {
        Evolution::new(&ModelParams::new(n, j, u)).unwrap()
    }

    #[test]
    fn starts_in_initial_fock_state() {
        let p = evo(7, 0.9, 0.4).density_at(0.0);
        assert!((p.p[0] - 1.0).abs() < 1e-12);
        assert!(p.p[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn free_transfer_at_quarter_period() {
        let p = evo(2, 1.0, 0.0).density_at(FRAC_PI_2);
        for (got, want) in p.p.iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let e = evo(12, 0.7, 0.0);
        for t in [0.1f64, 0.8, 2.3, 9.0] {
            let want = (0.7 * t).cos().powi(24);
            assert!((e.density_at(t).p[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn renyi_values() {
        let pure = ReducedDensityDiagonal::clamped(vec![1.0, 0.0, 0.0], TimeStamp::At(0.0));
        assert_eq!(renyi_entropy(&pure, 2.0).unwrap(), 0.0);
        assert_eq!(renyi_entropy_of(&[0.25; 4], 2.0).unwrap(), 2.0);
        let half = evo(1, 1.0, 0.0).density_at(FRAC_PI_4);
        assert!((renyi_entropy(&half, 2.0).unwrap() - 1.0).abs() < 1e-12);
        // order 3 on the uniform distribution is also log2(d)
        assert!((renyi_entropy_of(&[0.25; 4], 3.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn renyi_rejects_von_neumann_order() {
        assert!(matches!(
            renyi_entropy_of(&[1.0], 1.0),
            Err(Error::UnsupportedOrder)
        ));
        assert!(renyi_entropy_of(&[1.0], -1.0).is_err());
    }

    #[test]
    fn frozen_without_tunneling() {
        let series =
            evolve_series(&ModelParams::new(9, 0.0, 0.8), &[0.0, 1.0, 50.0, 999.0]).unwrap();
        assert!(series.entropy.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn closed_form_free_density() {
        let e = evo(3, 1.0, 0.0);
        let spectral = e.density_at(0.7);
        let analytic = analytic_u0_density(3, 1.0, 0.7);
        for (a, b) in spectral.p.iter().zip(&analytic.p) {
            assert!((a - b).abs() < 1e-12);
        }
        let end = analytic_u0_density(5, 2.0, FRAC_PI_2 / 2.0);
        assert!((end.p[5] - 1.0).abs() < 1e-12);
        assert!(end.p[..5].iter().all(|x| *x < 1e-12));
        for t in [0.0, 0.3, 1.1] {
            let p = analytic_u0_density(6, 1.3, t);
            assert!((p.p[0] - (1.3 * t).cos().powi(12)).abs() < 1e-14);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn grid_validation() {
        assert!(evolve_series(&ModelParams::new(2, 1.0, 1.0), &[]).is_err());
        assert!(evolve_series(&ModelParams::new(2, 1.0, 1.0), &[1.0, 0.5]).is_err());
        assert!(evolve_series(&ModelParams::new(2, 1.0, 1.0), &[-1.0]).is_err());
        assert_eq!(time_grid(3.1416, 0.7854).unwrap().len(), 5);
        assert_eq!(time_grid(1000.0, 0.1).unwrap().len(), 10001);
        assert!(time_grid(1.0, 0.0).is_err());
    }

    #[test]
    fn probability_validation() {
        assert!(ReducedDensityDiagonal::from_probabilities(
            vec![0.5, 0.4],
            TimeStamp::TimeAveraged,
            1e-10
        )
        .is_err());
        assert!(ReducedDensityDiagonal::from_probabilities(
            vec![1.5, -0.5],
            TimeStamp::TimeAveraged,
            1e-10
        )
        .is_err());
        let ok = ReducedDensityDiagonal::from_probabilities(
            vec![0.5, 0.5],
            TimeStamp::TimeAveraged,
            1e-10,
        )
        .unwrap();
        assert_eq!(ok.trace(), 1.0);
    }
}
