//! Brute-force references for cross-checking the spectral code paths.
//!
//! Nothing here is used by the production pipeline. The integrator builds its
//! Hamiltonian from the spin representation and never diagonalizes; the
//! quadrature replaces the Lorentzian pair sum by direct integration against
//! the exponential weight.

use serde::Serialize;

use crate::dynamics::{DensityEvaluator, ReducedDensityDiagonal, TimeStamp};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, build_spin_hamiltonian, ModelParams};
use crate::spectral::diagonalize;
use crate::timeavg::AveragedDensity;

/// Order of the explicit Runge-Kutta scheme.
pub const INTEGRATOR_ORDER: usize = 4;

/// Norm drift above which the step is declared too large.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    /// Largest step; the last step before each sample time is shortened.
    pub dt: f64,
    pub t_end: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::param("t_end", format!("must be >= 0, got {t_end}")));
        }
        Ok(IntegratorConfig { dt, t_end })
    }

    pub fn order(&self) -> usize {
        INTEGRATOR_ORDER
    }
}

/// Dense real Hamiltonian with the mean diagonal removed (a global phase).
struct DenseGenerator {
    dim: usize,
    h: Vec<f64>,
}

impl DenseGenerator {
    fn new(params: &ModelParams) -> Result<Self> {
        let m = build_spin_hamiltonian(params)?;
        let dim = m.nrows();
        let mean = m.diagonal().mean();
        let mut h = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                h[r * dim + c] = m[(r, c)] - if r == c { mean } else { 0.0 };
            }
        }
        Ok(DenseGenerator { dim, h })
    }

    /// `(dre, dim) = -i H (re + i im) = (H im, -H re)`.
    fn rhs(&self, re: &[f64], im: &[f64], dre: &mut [f64], dim_: &mut [f64]) {
        let d = self.dim;
        for r in 0..d {
            let row = &self.h[r * d..(r + 1) * d];
            let (mut a, mut b) = (0.0, 0.0);
            for c in 0..d {
                a += row[c] * im[c];
                b += row[c] * re[c];
            }
            dre[r] = a;
            dim_[r] = -b;
        }
    }

    fn rk4_step(&self, re: &mut [f64], im: &mut [f64], h: f64, ws: &mut Workspace) {
        let d = self.dim;
        let Workspace { k, tr, ti } = ws;
        let nodes = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            for i in 0..d {
                if stage == 0 {
                    tr[i] = re[i];
                    ti[i] = im[i];
                } else {
                    tr[i] = re[i] + nodes[stage] * h * k[stage - 1].0[i];
                    ti[i] = im[i] + nodes[stage] * h * k[stage - 1].1[i];
                }
            }
            let (kr, ki) = &mut k[stage];
            self.rhs(tr, ti, kr, ki);
        }
        for i in 0..d {
            re[i] += h / 6.0 * (k[0].0[i] + 2.0 * k[1].0[i] + 2.0 * k[2].0[i] + k[3].0[i]);
            im[i] += h / 6.0 * (k[0].1[i] + 2.0 * k[1].1[i] + 2.0 * k[2].1[i] + k[3].1[i]);
        }
    }
}

struct Workspace {
    k: Vec<(Vec<f64>, Vec<f64>)>,
    tr: Vec<f64>,
    ti: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Workspace {
            k: vec![(vec![0.0; d], vec![0.0; d]); 4],
            tr: vec![0.0; d],
            ti: vec![0.0; d],
        }
    }
}

/// Reduced densities at each of `times` (ascending, within `[0, cfg.t_end]`)
/// by RK4 integration of `i dpsi/dt = H psi` from the initial Fock state.
pub fn integrate_states(
    params: &ModelParams,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<ReducedDensityDiagonal>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times", "sample times must be ascending"));
    }
    if times.iter().any(|t| !(*t >= 0.0 && *t <= cfg.t_end)) {
        return Err(Error::param("times", "sample times must lie in [0, t_end]"));
    }
    let gen = DenseGenerator::new(params)?;
    let d = gen.dim;
    let mut re = vec![0.0; d];
    let mut im = vec![0.0; d];
    re[0] = 1.0;
    let mut ws = Workspace::new(d);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());

    for &target in times {
        let span = target - now;
        if span > 0.0 {
            let steps = (span / cfg.dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                gen.rk4_step(&mut re, &mut im, h, &mut ws);
            }
            now = target;
        }
        let p: Vec<f64> = re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect();
        let drift = (p.iter().sum::<f64>() - 1.0).abs();
        if drift > MAX_NORM_DRIFT {
            return Err(Error::StepSize { drift });
        }
        out.push(ReducedDensityDiagonal::clamped(p, TimeStamp::At(target)));
    }
    Ok(out)
}

pub fn integrate_state(
    params: &ModelParams,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<ReducedDensityDiagonal> {
    let cfg = IntegratorConfig { t_end, ..*cfg };
    Ok(integrate_states(params, &[t_end], &cfg)?.remove(0))
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Returns the Kronrod estimate and the max-norm of (Kronrod - Gauss).
fn gk15<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64, dim: usize) -> (Vec<f64>, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mid = f(centre);
    for i in 0..dim {
        kron[i] = WGK[7] * mid[i];
        gauss[i] = WG[3] * mid[i];
    }
    for k in 0..7 {
        let x = half * XGK[k];
        let lo = f(centre - x);
        let hi = f(centre + x);
        for i in 0..dim {
            let pair = lo[i] + hi[i];
            kron[i] += WGK[k] * pair;
            if k % 2 == 1 {
                gauss[i] += WG[k / 2] * pair;
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..dim {
        kron[i] *= half;
        err = err.max((kron[i] - gauss[i] * half).abs());
    }
    (kron, err)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureAverage {
    pub density: AveragedDensity,
    /// Bound on the neglected tail, `exp(-s T)`.
    pub tail_bound: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

/// Subinterval budget of the adaptive quadrature.
pub const MAX_QUADRATURE_INTERVALS: usize = 200_000;

/// `int_0^T p_n(t) s e^{-st} dt` by adaptive Gauss-Kronrod quadrature, with
/// `p_n(t)` from the spectral amplitude evaluation.
pub fn quadrature_average(
    params: &ModelParams,
    s: f64,
    t_end: f64,
    tol: f64,
) -> Result<QuadratureAverage> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::param("s", format!("must be > 0, got {s}")));
    }
    if !(t_end >= 40.0 / s) {
        return Err(Error::param(
            "T",
            format!("must be >= 40/s = {}, got {t_end}", 40.0 / s),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let h = build_hamiltonian(params)?;
    let spec = diagonalize(&h, params.eig_tol)?;
    let eval = DensityEvaluator::new(&spec);
    let dim = eval.dim();
    let integrand = |t: f64| {
        let w = s * (-s * t).exp();
        eval.raw_density(t)
            .into_iter()
            .map(|p| p * w)
            .collect::<Vec<f64>>()
    };

    // start from panels that resolve the fastest Bohr frequency
    let e = spec.energies();
    let omega = (e[dim - 1] - e[0]).max(s);
    let panels = ((t_end * omega / std::f64::consts::PI).ceil() as usize)
        .clamp(16, MAX_QUADRATURE_INTERVALS / 4);
    let width = t_end / panels as f64;
    let mut stack: Vec<(f64, f64)> = (0..panels)
        .rev()
        .map(|i| {
            (
                i as f64 * width,
                if i + 1 == panels {
                    t_end
                } else {
                    (i + 1) as f64 * width
                },
            )
        })
        .collect();

    let mut total = vec![0.0; dim];
    let mut err_total = 0.0;
    let mut intervals = 0usize;
    while let Some((a, b)) = stack.pop() {
        intervals += 1;
        if intervals > MAX_QUADRATURE_INTERVALS {
            return Err(Error::Quadrature {
                tol,
                intervals: MAX_QUADRATURE_INTERVALS,
                estimate: err_total,
            });
        }
        let (val, err) = gk15(&integrand, a, b, dim);
        if err <= tol * (b - a) / t_end || b - a < 1e-12 * t_end {
            for (acc, v) in total.iter_mut().zip(val) {
                *acc += v;
            }
            err_total += err;
        } else {
            let mid = 0.5 * (a + b);
            stack.push((mid, b));
            stack.push((a, mid));
        }
    }

    Ok(QuadratureAverage {
        density: AveragedDensity { p_avg: total, s },
        tail_bound: (-s * t_end).exp(),
        error_estimate: err_total,
        intervals,
    })
}
