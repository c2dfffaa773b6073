//! Parameter sweeps of the observation-time-averaged entropy, location of the
//! localization transition, scaling-law fits and the dominant-element tracker.

use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{time_grid, Evolution};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::fit_line;
use crate::timeavg::averaged_entropy;

/// Mean-field self-trapping threshold, kept only as a comparison constant.
pub const MEAN_FIELD_CRITICAL_U: f64 = 4.0;

/// Minimum number of argmax-grid points inside `2 <= u <= 6`.
pub const MIN_POINTS_IN_CRITICAL_WINDOW: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    #[serde(rename = "J")]
    Tunneling,
    #[serde(rename = "U")]
    Interaction,
    #[serde(rename = "N")]
    Bosons,
    #[serde(rename = "u")]
    Characteristic,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Tunneling => "J",
            Axis::Interaction => "U",
            Axis::Bosons => "N",
            Axis::Characteristic => "u",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "J" => Ok(Axis::Tunneling),
            "U" => Ok(Axis::Interaction),
            "N" => Ok(Axis::Bosons),
            "u" => Ok(Axis::Characteristic),
            other => Err(Error::param(
                "vary",
                format!("unknown axis `{other}` (expected J, U, N or u)"),
            )),
        }
    }
}

/// How a fixed `u = U N / J` is realised when `N` changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum UConvention {
    /// Keep `U`, set `J = U N / u`.
    #[default]
    FixInteraction,
    /// Keep `J`, set `U = u J / N`.
    FixTunneling,
}

impl UConvention {
    pub fn realise(self, base: &ModelParams, u: f64) -> Result<ModelParams> {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::param("u", format!("must be > 0, got {u}")));
        }
        let mut p = *base;
        match self {
            UConvention::FixInteraction => {
                if base.u <= 0.0 {
                    return Err(Error::param(
                        "U",
                        "fixed U must be > 0 to realise a given u",
                    ));
                }
                p.j = base.u * base.n as f64 / u;
            }
            UConvention::FixTunneling => {
                if base.j <= 0.0 {
                    return Err(Error::param(
                        "J",
                        "fixed J must be > 0 to realise a given u",
                    ));
                }
                p.u = u * base.j / base.n as f64;
            }
        }
        Ok(p)
    }
}

/// Parameters at one point of an axis, all other fields taken from `base`.
pub fn point_params(
    axis: Axis,
    value: f64,
    base: &ModelParams,
    convention: UConvention,
) -> Result<ModelParams> {
    let mut p = *base;
    match axis {
        Axis::Tunneling => p.j = value,
        Axis::Interaction => p.u = value,
        Axis::Bosons => {
            if !(value >= 1.0 && value.fract() == 0.0 && value.is_finite()) {
                return Err(Error::param(
                    "N",
                    format!("must be a positive integer, got {value}"),
                ));
            }
            p.n = value as usize;
        }
        Axis::Characteristic => p = convention.realise(base, value)?,
    }
    p.validate()?;
    Ok(p)
}

/// Worker-count-limited executor. Results are always assembled in input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Executor {
    workers: Option<usize>,
}

impl Executor {
    /// `workers = 0` uses the global rayon pool.
    pub fn new(workers: usize) -> Self {
        Executor {
            workers: (workers > 0).then_some(workers),
        }
    }

    pub fn serial() -> Self {
        Executor::new(1)
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match self.workers {
            None => f(),
            Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
        }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.install(|| items.par_iter().map(f).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool_version: &'static str,
    /// Seconds since the Unix epoch at creation. Not written to data files.
    pub created_unix: u64,
}

impl Provenance {
    pub fn now() -> Self {
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION"),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// One-dimensional sweep of the averaged entropy (bits).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub axis_name: Axis,
    pub axis: Vec<f64>,
    pub entropy: Vec<f64>,
    pub fixed: ModelParams,
    pub provenance: Provenance,
}

impl ScanResult {
    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

fn check_axis(axis: Axis, values: &[f64], min_len: usize) -> Result<()> {
    if values.len() < min_len {
        return Err(Error::param(
            "steps",
            format!("need at least {min_len} axis points, got {}", values.len()),
        ));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param(
            "axis",
            format!("{axis} values must be strictly increasing"),
        ));
    }
    Ok(())
}

/// Integer boson numbers as axis values.
pub fn boson_axis(ns: &[usize]) -> Vec<f64> {
    ns.iter().map(|&n| n as f64).collect()
}

fn evaluate_points(
    axis: Axis,
    values: &[f64],
    fixed: &ModelParams,
    convention: UConvention,
    exec: &Executor,
) -> Result<Vec<f64>> {
    let results = exec.map(values, |&v| {
        point_params(axis, v, fixed, convention).and_then(|p| averaged_entropy(&p))
    });
    values
        .iter()
        .zip(results)
        .map(|(&value, r)| {
            r.map_err(|e| Error::ScanPoint {
                axis: axis.name(),
                value,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn scan_1d(
    vary: Axis,
    values: &[f64],
    fixed: &ModelParams,
    exec: &Executor,
) -> Result<ScanResult> {
    scan_1d_with(vary, values, fixed, UConvention::default(), exec)
}

pub fn scan_1d_with(
    vary: Axis,
    values: &[f64],
    fixed: &ModelParams,
    convention: UConvention,
    exec: &Executor,
) -> Result<ScanResult> {
    check_axis(vary, values, 2)?;
    let entropy = evaluate_points(vary, values, fixed, convention, exec)?;
    Ok(ScanResult {
        axis_name: vary,
        axis: values.to_vec(),
        entropy,
        fixed: *fixed,
        provenance: Provenance::now(),
    })
}

/// Two-dimensional sweep; `entropy[ix * y.len() + iy]` (x is the slow index).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scan2dResult {
    pub x_name: Axis,
    pub y_name: Axis,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub entropy: Vec<f64>,
    pub fixed: ModelParams,
    pub provenance: Provenance,
}

impl Scan2dResult {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.entropy[ix * self.y.len() + iy]
    }

    pub fn row(&self, ix: usize) -> &[f64] {
        let ny = self.y.len();
        &self.entropy[ix * ny..(ix + 1) * ny]
    }
}

pub fn scan_2d(
    x_axis: Axis,
    x: &[f64],
    y_axis: Axis,
    y: &[f64],
    fixed: &ModelParams,
    exec: &Executor,
) -> Result<Scan2dResult> {
    if x_axis == y_axis {
        return Err(Error::param("vary2", "the two scan axes must differ"));
    }
    check_axis(x_axis, x, 2)?;
    check_axis(y_axis, y, 2)?;
    let points: Vec<(f64, f64)> = x
        .iter()
        .flat_map(|&a| y.iter().map(move |&b| (a, b)))
        .collect();
    let results = exec.map(&points, |&(a, b)| {
        point_params(x_axis, a, fixed, UConvention::default())
            .and_then(|p| point_params(y_axis, b, &p, UConvention::default()))
            .and_then(|p| averaged_entropy(&p))
    });
    let entropy = points
        .iter()
        .zip(results)
        .map(|(&(a, b), r)| {
            r.map_err(|e| Error::ScanPoint {
                axis: x_axis.name(),
                value: a,
                source: Box::new(Error::ScanPoint {
                    axis: y_axis.name(),
                    value: b,
                    source: Box::new(e),
                }),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Scan2dResult {
        x_name: x_axis,
        y_name: y_axis,
        x: x.to_vec(),
        y: y.to_vec(),
        entropy,
        fixed: *fixed,
        provenance: Provenance::now(),
    })
}

/// Entropy versus `N` at constant `u`, with `S~ = S / max S`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedScan {
    pub u: f64,
    pub convention: UConvention,
    pub scan: ScanResult,
    pub normalized: Vec<f64>,
}

pub fn normalized_scan(
    u: f64,
    ns: &[usize],
    fixed: &ModelParams,
    convention: UConvention,
    exec: &Executor,
) -> Result<NormalizedScan> {
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::param("u", format!("must be > 0, got {u}")));
    }
    let axis = boson_axis(ns);
    check_axis(Axis::Bosons, &axis, 2)?;
    let values: Vec<f64> = exec
        .map(ns, |&n| {
            let base = ModelParams { n, ..*fixed };
            convention
                .realise(&base, u)
                .and_then(|p| averaged_entropy(&p))
                .map_err(|e| Error::ScanPoint {
                    axis: "N",
                    value: n as f64,
                    source: Box::new(e),
                })
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::Fit(
            "entropy vanishes on the whole N grid; cannot normalise".into(),
        ));
    }
    let normalized = values.iter().map(|s| s / max).collect();
    Ok(NormalizedScan {
        u,
        convention,
        scan: ScanResult {
            axis_name: Axis::Bosons,
            axis,
            entropy: values,
            fixed: *fixed,
            provenance: Provenance::now(),
        },
        normalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub a: f64,
    pub b: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalingModel {
    #[serde(rename = "log")]
    Log,
    #[serde(rename = "linear")]
    Linear,
}

impl fmt::Display for ScalingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingModel::Log => "log",
            ScalingModel::Linear => "linear",
        })
    }
}

/// Least-squares fits `S~ = a + b ln N` and `S~ = a + b N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub model_log: LineFit,
    pub model_lin: LineFit,
    pub preferred: ScalingModel,
}

pub fn fit_scaling_points(ns: &[f64], s_tilde: &[f64]) -> Result<ScalingFit> {
    if ns.len() != s_tilde.len() {
        return Err(Error::Fit("N and S~ lengths differ".into()));
    }
    if ns.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 points, got {}",
            ns.len()
        )));
    }
    if ns.iter().any(|n| !(*n > 0.0)) {
        return Err(Error::Fit("N values must be positive".into()));
    }
    let first = s_tilde[0];
    if s_tilde.iter().all(|s| *s == first) {
        return Err(Error::Fit(
            "constant data cannot discriminate scaling models".into(),
        ));
    }
    let logs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let to_fit = |(a, b, rms)| LineFit { a, b, rms };
    let model_log = fit_line(&logs, s_tilde)
        .map(to_fit)
        .ok_or_else(|| Error::Fit("degenerate N grid".into()))?;
    let model_lin = fit_line(ns, s_tilde)
        .map(to_fit)
        .ok_or_else(|| Error::Fit("degenerate N grid".into()))?;
    let preferred = if model_log.rms < model_lin.rms {
        ScalingModel::Log
    } else if model_lin.rms < model_log.rms {
        ScalingModel::Linear
    } else {
        return Err(Error::Fit("both models fit equally well".into()));
    };
    Ok(ScalingFit {
        model_log,
        model_lin,
        preferred,
    })
}

pub fn fit_normalized(scan: &NormalizedScan) -> Result<ScalingFit> {
    fit_scaling_points(&scan.scan.axis, &scan.normalized)
}

pub fn fit_scaling(
    u: f64,
    ns: &[usize],
    fixed: &ModelParams,
    convention: UConvention,
    exec: &Executor,
) -> Result<ScalingFit> {
    if ns.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 N values, got {}",
            ns.len()
        )));
    }
    fit_normalized(&normalized_scan(u, ns, fixed, convention, exec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalMethod {
    #[serde(rename = "argmax-quadratic")]
    ArgmaxQuadratic,
    #[serde(rename = "knee")]
    Knee,
}

impl fmt::Display for CriticalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriticalMethod::ArgmaxQuadratic => "argmax-quadratic",
            CriticalMethod::Knee => "knee",
        })
    }
}

/// How the transition is searched for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalSearch {
    /// Scan `N` over `n_min..=n_max` at fixed `U` and `J`; locate the entropy
    /// maximum in `u = U N / J`.
    Argmax { n_min: usize, n_max: usize },
    /// Scan `steps` values of `J` between `U N / u_max` and `U N / u_min` at
    /// fixed `U` and `N`; intersect a rising line with the plateau.
    Knee {
        u_min: f64,
        u_max: f64,
        steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalEstimate {
    pub u_c: f64,
    pub method: CriticalMethod,
    pub bracket: (f64, f64),
    /// Knee position in `J` (knee mode only).
    pub j_knee: Option<f64>,
    /// Argmax mode: entropy against `u`. Knee mode: entropy against `J`.
    pub curve: ScanResult,
}

impl CriticalEstimate {
    /// Half-width of the bracket.
    pub fn uncertainty(&self) -> f64 {
        0.5 * (self.bracket.1 - self.bracket.0)
    }
}

/// Vertex of the parabola through the grid maximum and its two neighbours.
/// Returns `(x_peak, (x_left, x_right))`.
pub fn quadratic_peak(x: &[f64], y: &[f64]) -> Result<(f64, (f64, f64))> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::param(
            "steps",
            "need at least three points to refine a maximum",
        ));
    }
    let i = y
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v > y[best] { k } else { best });
    if i == 0 || i + 1 == x.len() {
        return Err(Error::Bracket { at: x[i] });
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    // divided differences
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    let vertex = if curvature < 0.0 {
        0.5 * (x0 + x1) - d01 / (2.0 * curvature)
    } else {
        x1
    };
    Ok((vertex.clamp(x0, x2), (x0, x2)))
}

/// Split index and fitted pieces of the line-then-plateau model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KneeFit {
    pub split: usize,
    pub line: LineFit,
    pub plateau: f64,
    pub x_knee: f64,
}

/// Change-point fit of a rising line on `x[..k]` and a constant on `x[k..]`,
/// choosing `k` to minimise the combined squared residual.
pub fn knee_fit(x: &[f64], y: &[f64]) -> Result<KneeFit> {
    let n = x.len();
    if y.len() != n || n < 5 {
        return Err(Error::Fit("knee fit needs at least 5 points".into()));
    }
    let mut best: Option<(f64, KneeFit)> = None;
    for k in 3..=n - 2 {
        let Some((a, b, rms)) = fit_line(&x[..k], &y[..k]) else {
            continue;
        };
        let right = &y[k..];
        let plateau = right.iter().sum::<f64>() / right.len() as f64;
        let sse = rms * rms * k as f64 + right.iter().map(|v| (v - plateau).powi(2)).sum::<f64>();
        if b <= 0.0 {
            continue;
        }
        if best.as_ref().is_none_or(|(s, _)| sse < *s) {
            best = Some((
                sse,
                KneeFit {
                    split: k,
                    line: LineFit { a, b, rms },
                    plateau,
                    x_knee: (plateau - a) / b,
                },
            ));
        }
    }
    best.map(|(_, f)| f)
        .ok_or_else(|| Error::Fit("no rising left segment found".into()))
}

pub fn locate_critical(
    search: CriticalSearch,
    fixed: &ModelParams,
    exec: &Executor,
) -> Result<CriticalEstimate> {
    match search {
        CriticalSearch::Argmax { n_min, n_max } => locate_by_argmax(n_min, n_max, fixed, exec),
        CriticalSearch::Knee {
            u_min,
            u_max,
            steps,
        } => locate_by_knee(u_min, u_max, steps, fixed, exec),
    }
}

fn locate_by_argmax(
    n_min: usize,
    n_max: usize,
    fixed: &ModelParams,
    exec: &Executor,
) -> Result<CriticalEstimate> {
    if fixed.j <= 0.0 || fixed.u <= 0.0 {
        return Err(Error::param("J", "argmax search needs J > 0 and U > 0"));
    }
    if n_min < 1 || n_max <= n_min {
        return Err(Error::param(
            "nmax",
            format!("need 1 <= nmin < nmax, got {n_min}..{n_max}"),
        ));
    }
    let ns: Vec<usize> = (n_min..=n_max).collect();
    let u_of = |n: usize| fixed.u * n as f64 / fixed.j;
    if u_of(n_min) > 2.0 || u_of(n_max) < 6.0 {
        return Err(Error::param(
            "nmin",
            format!(
                "u range [{}, {}] must span [2, 6]",
                u_of(n_min),
                u_of(n_max)
            ),
        ));
    }
    let inside = ns
        .iter()
        .filter(|&&n| (2.0..=6.0).contains(&u_of(n)))
        .count();
    if inside < MIN_POINTS_IN_CRITICAL_WINDOW {
        return Err(Error::param(
            "nmax",
            format!(
                "only {inside} grid points in 2 <= u <= 6, need {MIN_POINTS_IN_CRITICAL_WINDOW}"
            ),
        ));
    }
    let by_n = scan_1d(Axis::Bosons, &boson_axis(&ns), fixed, exec)?;
    let us: Vec<f64> = ns.iter().map(|&n| u_of(n)).collect();
    let (u_c, bracket) = quadratic_peak(&us, &by_n.entropy)?;
    Ok(CriticalEstimate {
        u_c,
        method: CriticalMethod::ArgmaxQuadratic,
        bracket,
        j_knee: None,
        curve: ScanResult {
            axis_name: Axis::Characteristic,
            axis: us,
            ..by_n
        },
    })
}

fn locate_by_knee(
    u_min: f64,
    u_max: f64,
    steps: usize,
    fixed: &ModelParams,
    exec: &Executor,
) -> Result<CriticalEstimate> {
    if fixed.u <= 0.0 {
        return Err(Error::param("U", "knee search needs U > 0"));
    }
    if !(u_min > 0.0 && u_max > u_min) {
        return Err(Error::param(
            "umin",
            format!("need 0 < umin < umax, got {u_min}..{u_max}"),
        ));
    }
    if steps < 5 {
        return Err(Error::param("steps", "knee search needs at least 5 points"));
    }
    let scale = fixed.u * fixed.n as f64;
    let js = crate::numeric::linspace(scale / u_max, scale / u_min, steps);
    let curve = scan_1d(Axis::Tunneling, &js, fixed, exec)?;
    let fit = knee_fit(&js, &curve.entropy)?;
    let j_knee = fit.x_knee;
    if !(j_knee > js[0] && j_knee < js[steps - 1]) {
        return Err(Error::Bracket { at: scale / j_knee });
    }
    let hi = js.iter().position(|&j| j > j_knee).unwrap_or(steps - 1);
    let lo = js.iter().rposition(|&j| j < j_knee).unwrap_or(0);
    let u_c = scale / j_knee;
    Ok(CriticalEstimate {
        u_c,
        method: CriticalMethod::Knee,
        bracket: (scale / js[hi], scale / js[lo]),
        j_knee: Some(j_knee),
        curve,
    })
}

/// Maximum of every reduced-density element over a sampled time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxElementTrace {
    pub per_n_max: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub first_dominant: (usize, f64),
    pub second_dominant: (usize, f64),
}

pub fn track_max_elements(
    params: &ModelParams,
    t_max: f64,
    dt: f64,
    exec: &Executor,
) -> Result<MaxElementTrace> {
    if !(t_max > 0.0) {
        return Err(Error::param("tmax", format!("must be > 0, got {t_max}")));
    }
    let grid = time_grid(t_max, dt)?;
    let evo = Evolution::new(params)?;
    let dim = params.dim();
    let chunk = 256;
    let per_n_max = exec.install(|| {
        grid.par_chunks(chunk)
            .map(|ts| {
                let mut m = vec![0.0f64; dim];
                for &t in ts {
                    for (slot, p) in m.iter_mut().zip(evo.density_at(t).p) {
                        *slot = slot.max(p);
                    }
                }
                m
            })
            .reduce(
                || vec![0.0; dim],
                |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
            )
    });

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| per_n_max[b].total_cmp(&per_n_max[a]).then(a.cmp(&b)));
    let first = order[0];
    let second = order.get(1).copied().unwrap_or(first);
    Ok(MaxElementTrace {
        first_dominant: (first, per_n_max[first]),
        second_dominant: (second, per_n_max[second]),
        per_n_max,
        t_max,
        dt,
    })
}

/// Entropy (bits) of a state localised on two Fock states with weights
/// `rho` and `1 - rho`.
pub fn two_state_entropy(rho: f64) -> f64 {
    -(rho * rho + (1.0 - rho) * (1.0 - rho)).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    #[test]
    fn axis_parsing() {
        for name in ["J", "U", "N", "u"] {
            assert_eq!(name.parse::<Axis>().unwrap().name(), name);
        }
        assert!("x".parse::<Axis>().is_err());
    }

    #[test]
    fn plateau_above_transition() {
        let scan = scan_1d(
            Axis::Tunneling,
            &linspace(10.0, 20.0, 6),
            &ModelParams::new(20, 1.0, 1.0),
            &Executor::default(),
        )
        .unwrap();
        let max = scan.entropy.iter().cloned().fold(f64::MIN, f64::max);
        let min = scan.entropy.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 1.05);
    }

    #[test]
    fn interaction_scan_endpoint_matches_pipeline() {
        let fixed = ModelParams::new(4, 1.0, 0.0);
        let scan = scan_1d(
            Axis::Interaction,
            &[0.0, 0.5, 1.0],
            &fixed,
            &Executor::default(),
        )
        .unwrap();
        assert_eq!(scan.entropy[0], averaged_entropy(&fixed).unwrap());
    }

    #[test]
    fn failing_point_is_identified() {
        let err = scan_1d(
            Axis::Tunneling,
            &[-1.0, 1.0],
            &ModelParams::new(4, 1.0, 1.0),
            &Executor::default(),
        )
        .unwrap_err();
        match err {
            Error::ScanPoint { axis, value, .. } => {
                assert_eq!(axis, "J");
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scan_rejects_bad_axis() {
        let fixed = ModelParams::new(4, 1.0, 1.0);
        let exec = Executor::default();
        assert!(scan_1d(Axis::Tunneling, &[1.0], &fixed, &exec).is_err());
        assert!(scan_1d(Axis::Tunneling, &[2.0, 1.0], &fixed, &exec).is_err());
        assert!(scan_1d(Axis::Bosons, &[2.0, 2.5], &fixed, &exec).is_err());
    }

    #[test]
    fn two_dimensional_rows_match_one_dimensional() {
        let fixed = ModelParams::new(8, 1.0, 1.0);
        let js = [0.5, 1.0, 2.0];
        let us = [0.1, 0.4, 0.9, 1.6];
        let exec = Executor::new(2);
        let grid = scan_2d(Axis::Tunneling, &js, Axis::Interaction, &us, &fixed, &exec).unwrap();
        for (ix, &j) in js.iter().enumerate() {
            let row = scan_1d(Axis::Interaction, &us, &ModelParams { j, ..fixed }, &exec).unwrap();
            assert_eq!(grid.row(ix), row.entropy.as_slice());
        }
        assert!(scan_2d(Axis::Tunneling, &js, Axis::Tunneling, &js, &fixed, &exec).is_err());
    }

    #[test]
    fn fit_recovers_exact_line() {
        let ns: Vec<f64> = (1..=10).map(|i| 10.0 * i as f64).collect();
        let st: Vec<f64> = ns.iter().map(|n| 0.1 * n).collect();
        let fit = fit_scaling_points(&ns, &st).unwrap();
        assert_eq!(fit.preferred, ScalingModel::Linear);
        assert!(fit.model_lin.rms <= 1e-12);
        assert!((fit.model_lin.b - 0.1).abs() < 1e-12);

        let logs: Vec<f64> = ns.iter().map(|n| 0.3 + 0.2 * n.ln()).collect();
        assert_eq!(
            fit_scaling_points(&ns, &logs).unwrap().preferred,
            ScalingModel::Log
        );
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let ns = [10.0, 20.0, 30.0, 40.0, 50.0];
        assert!(fit_scaling_points(&ns, &[0.5; 5]).is_err());
        assert!(fit_scaling_points(&ns[..4], &[0.1, 0.2, 0.3, 0.4]).is_err());
    }

    #[test]
    fn quadratic_peak_of_exact_parabola() {
        let x = [1.0, 2.0, 3.5, 4.0, 6.0];
        let y: Vec<f64> = x.iter().map(|v| 5.0 - (v - 3.3f64).powi(2)).collect();
        let (peak, (lo, hi)) = quadratic_peak(&x, &y).unwrap();
        assert!((peak - 3.3).abs() < 1e-12);
        assert_eq!((lo, hi), (2.0, 4.0));
        let rising = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            quadratic_peak(&x, &rising),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn knee_of_exact_line_then_plateau() {
        let x = linspace(0.0, 10.0, 41);
        let y: Vec<f64> = x.iter().map(|v| (0.5 * v + 1.0).min(3.0)).collect();
        let fit = knee_fit(&x, &y).unwrap();
        assert!((fit.x_knee - 4.0).abs() < 1e-9);
        assert!((fit.plateau - 3.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_window_requirements() {
        let fixed = ModelParams::new(10, 3.0, 0.4);
        let exec = Executor::default();
        // u only reaches 2.67
        let too_short = locate_critical(
            CriticalSearch::Argmax {
                n_min: 4,
                n_max: 20,
            },
            &fixed,
            &exec,
        );
        assert!(matches!(too_short, Err(Error::Param { .. })));
        // spans [2, 6] but too coarse
        let coarse = ModelParams::new(10, 1.0, 0.5);
        let sparse = locate_critical(
            CriticalSearch::Argmax {
                n_min: 2,
                n_max: 14,
            },
            &coarse,
            &exec,
        );
        assert!(matches!(sparse, Err(Error::Param { .. })));
    }

    #[test]
    fn frozen_trace_without_tunneling() {
        let trace = track_max_elements(
            &ModelParams::new(6, 0.0, 1.0),
            20.0,
            0.5,
            &Executor::default(),
        )
        .unwrap();
        assert_eq!(trace.per_n_max[0], 1.0);
        assert!(trace.per_n_max[1..].iter().all(|p| *p == 0.0));
        assert_eq!(trace.first_dominant, (0, 1.0));
        assert!(trace.first_dominant.1 >= trace.second_dominant.1);
    }

    #[test]
    fn two_state_limits() {
        assert_eq!(two_state_entropy(0.0), 0.0);
        assert!((two_state_entropy(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_u_conventions_agree_in_u() {
        let base = ModelParams::new(30, 1.0, 0.2);
        let a = UConvention::FixInteraction.realise(&base, 4.0).unwrap();
        let b = UConvention::FixTunneling.realise(&base, 4.0).unwrap();
        let u = |p: ModelParams| p.u * p.n as f64 / p.j;
        assert!((u(a) - 4.0).abs() < 1e-12);
        assert!((u(b) - 4.0).abs() < 1e-12);
    }
}
