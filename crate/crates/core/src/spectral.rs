//! Eigendecomposition of the tridiagonal Hamiltonian.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::TridiagonalHamiltonian;

/// Maximum implicit QL sweeps spent on a single eigenvalue.
const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Ascending eigenvalues, orthonormal eigenvectors (columns) and the overlap of
/// every eigenvector with the initial Fock state (index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    eigvecs: DMatrix<f64>,
    overlaps: Vec<f64>,
}

impl Spectrum {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// `w[j] = <E_j | 0, N>`.
    pub fn overlaps(&self) -> &[f64] {
        &self.overlaps
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Row-major `C[n][j] = V[n, j] * w[j]`, the amplitude weights of the
    /// evolved initial state.
    pub fn amplitude_weights(&self) -> Vec<f64> {
        let d = self.dim();
        let mut c = vec![0.0; d * d];
        for n in 0..d {
            for j in 0..d {
                c[n * d + j] = self.eigvecs[(n, j)] * self.overlaps[j];
            }
        }
        c
    }

    /// Copy with eigenvector `j` negated. Physical outputs must not change.
    pub fn with_column_negated(&self, j: usize) -> Spectrum {
        let mut out = self.clone();
        out.eigvecs.column_mut(j).neg_mut();
        out.overlaps[j] = -out.overlaps[j];
        out
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim();
        let gram = self.eigvecs.transpose() * &self.eigvecs;
        (gram - DMatrix::<f64>::identity(d, d)).amax()
    }

    /// Largest `||H v_j - E_j v_j||_2` over all eigenpairs.
    pub fn max_residual(&self, h: &TridiagonalHamiltonian) -> f64 {
        (0..self.dim())
            .map(|j| residual(h, self.eigvecs.column(j).as_slice(), self.energies[j]))
            .fold(0.0, f64::max)
    }
}

fn residual(h: &TridiagonalHamiltonian, v: &[f64], e: f64) -> f64 {
    let n = h.dim();
    let mut acc = 0.0;
    for k in 0..n {
        let mut hv = h.diag[k] * v[k];
        if k > 0 {
            hv += h.offdiag[k - 1] * v[k - 1];
        }
        if k + 1 < n {
            hv += h.offdiag[k] * v[k + 1];
        }
        let r = hv - e * v[k];
        acc += r * r;
    }
    acc.sqrt()
}

/// Full eigendecomposition by implicit-shift QL iteration on the tridiagonal
/// form, with eigenvectors accumulated from the identity.
///
/// Eigenvalues are returned ascending. Each eigenvector is signed so that its
/// largest-magnitude component (lowest index among near-ties) is positive.
/// Fails with [`Error::NoConvergence`] when the sweep budget runs out or the
/// worst residual exceeds `tol * ||H||`.
pub fn diagonalize(h: &TridiagonalHamiltonian, tol: f64) -> Result<Spectrum> {
    if !(tol > 0.0) {
        return Err(Error::param("eig_tol", "must be > 0"));
    }
    let n = h.dim();
    let mut d = h.diag.clone();
    let mut e = h.offdiag.clone();
    e.push(0.0);
    let mut z = DMatrix::<f64>::identity(n, n);

    tql2(&mut d, &mut e, &mut z).map_err(|_| Error::NoConvergence {
        worst_residual: f64::NAN,
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));

    let energies: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut eigvecs = DMatrix::<f64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut v = z.column(src).clone_owned();
        let peak = v.amax();
        let lead = v
            .iter()
            .position(|x| x.abs() >= peak * (1.0 - 1e-8))
            .unwrap_or(0);
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        eigvecs.set_column(col, &v);
    }
    let overlaps = eigvecs.row(0).iter().copied().collect();

    let spectrum = Spectrum {
        energies,
        eigvecs,
        overlaps,
    };
    let worst = spectrum.max_residual(h);
    if worst.is_nan() || worst > tol * h.norm() {
        return Err(Error::NoConvergence {
            worst_residual: worst,
        });
    }
    Ok(spectrum)
}

/// Implicit QL with Wilkinson-style shifts. `d` holds the diagonal, `e[0..n-1]`
/// the sub-diagonal and `e[n-1] = 0`. On return `d` holds the eigenvalues and
/// the columns of `z` the eigenvectors (unsorted).
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut DMatrix<f64>) -> std::result::Result<(), ()> {
    let n = d.len();
    let eps = f64::EPSILON;
    let mut shift_total = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS_PER_EIGENVALUE {
                    return Err(());
                }

                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                shift_total += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        let zk1 = z[(k, i + 1)];
                        let zk = z[(k, i)];
                        z[(k, i + 1)] = s * zk + c * zk1;
                        z[(k, i)] = c * zk - s * zk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += shift_total;
        e[l] = 0.0;
    }
    Ok(())
}

/// All pairwise Bohr frequencies `|E_j - E_j'|`, `j < j'`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub freqs: Vec<f64>,
}

impl FrequencyTable {
    pub fn count(&self) -> usize {
        self.freqs.len()
    }

    pub fn max(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }

    /// Distinct values, merging neighbours closer than `tol`.
    pub fn distinct(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &f in &self.freqs {
            match out.last() {
                Some(&last) if (f - last).abs() <= tol => {}
                _ => out.push(f),
            }
        }
        out
    }
}

pub fn bohr_frequencies(spec: &Spectrum) -> FrequencyTable {
    let e = spec.energies();
    let mut freqs = Vec::with_capacity(e.len() * (e.len() - 1) / 2);
    for a in 0..e.len() {
        for b in a + 1..e.len() {
            freqs.push((e[b] - e[a]).abs());
        }
    }
    freqs.sort_by(f64::total_cmp);
    FrequencyTable { freqs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, ModelParams};

    fn spectrum_of(n: usize, j: f64, u: f64) -> (TridiagonalHamiltonian, Spectrum) {
        let h = build_hamiltonian(&ModelParams::new(n, j, u)).unwrap();
        let s = diagonalize(&h, 1e-10).unwrap();
        (h, s)
    }

    #[test]
    fn free_three_state() {
        let (_, s) = spectrum_of(2, 1.0, 0.0);
        let want = [-2.0, 0.0, 2.0];
        for (e, w) in s.energies().iter().zip(want) {
            assert!((e - w).abs() < 1e-13, "{e} vs {w}");
        }
    }

    #[test]
    fn zero_tunneling_is_diagonal() {
        let (h, s) = spectrum_of(5, 0.0, 1.0);
        let mut sorted = h.diag.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(s.energies(), sorted.as_slice());
        // every eigenvector is a unit vector on one Fock state
        for j in 0..s.dim() {
            let col = s.eigvecs().column(j);
            let ones = col.iter().filter(|x| (x.abs() - 1.0).abs() < 1e-15).count();
            let zeros = col.iter().filter(|x| **x == 0.0).count();
            assert_eq!((ones, zeros), (1, s.dim() - 1));
        }
    }

    #[test]
    fn residual_and_orthonormality() {
        for (j, u) in [(0.37, 1.21), (1.9, 0.05), (0.01, 1.7)] {
            let (h, s) = spectrum_of(6, j, u);
            assert!(s.orthonormality_error() <= 1e-10);
            assert!(s.max_residual(&h) <= 1e-10 * h.norm());
            let wsum: f64 = s.overlaps().iter().map(|w| w * w).sum();
            assert!((wsum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_signs() {
        let (_, a) = spectrum_of(30, 0.8, 0.3);
        let (_, b) = spectrum_of(30, 0.8, 0.3);
        assert_eq!(a, b);
        for j in 0..a.dim() {
            let col = a.eigvecs().column(j);
            let peak = col.amax();
            let lead = col
                .iter()
                .position(|x| x.abs() >= peak * (1.0 - 1e-8))
                .unwrap();
            assert!(col[lead] > 0.0);
        }
    }

    #[test]
    fn trace_identity() {
        let (h, s) = spectrum_of(40, 1.3, 0.7);
        let sum: f64 = s.energies().iter().sum();
        assert!((sum - h.trace()).abs() <= 1e-9 * h.norm());
    }

    #[test]
    fn frequency_counts() {
        let (_, s) = spectrum_of(2, 1.0, 1.0);
        assert_eq!(bohr_frequencies(&s).count(), 3);
        let (_, s) = spectrum_of(9, 0.4, 0.2);
        assert_eq!(bohr_frequencies(&s).count(), 45);
    }

    #[test]
    fn free_frequencies_are_an_even_ladder() {
        let (_, s) = spectrum_of(4, 1.0, 0.0);
        let distinct = bohr_frequencies(&s).distinct(1e-9);
        assert_eq!(distinct.len(), 4);
        for (f, want) in distinct.iter().zip([2.0, 4.0, 6.0, 8.0]) {
            assert!((f - want).abs() < 1e-10);
        }
    }

    #[test]
    fn maximal_frequency_without_tunneling() {
        for n in [2usize, 6, 20] {
            let (_, s) = spectrum_of(n, 0.0, 1.0);
            let fmax = bohr_frequencies(&s).max();
            assert!((fmax - (n * n) as f64 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let h = build_hamiltonian(&ModelParams::new(2, 1.0, 1.0)).unwrap();
        assert!(diagonalize(&h, 0.0).is_err());
    }

    #[test]
    fn zero_matrix() {
        let (_, s) = spectrum_of(3, 0.0, 0.0);
        assert!(s.energies().iter().all(|&e| e == 0.0));
        assert_eq!(s.overlaps()[0], 1.0);
    }
}
