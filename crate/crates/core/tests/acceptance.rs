//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use bjj::dynamics::{renyi_entropy, time_grid, Evolution};
use bjj::model::{build_hamiltonian, build_spin_hamiltonian, ModelParams};
use bjj::oracle::{integrate_states, quadrature_average, IntegratorConfig};
use bjj::scans::{
    fit_scaling, locate_critical, scan_1d, track_max_elements, Axis, CriticalSearch, Executor,
    ScalingModel, UConvention,
};
use bjj::spectral::{bohr_frequencies, diagonalize};
use bjj::timeavg::{
    averaged_density_for, averaged_entropy, averaged_reduced_density, entanglement_spectrum,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spread(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min)
}

fn time_mean_entropy() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let grid: Vec<f64> = time_grid(1000.0, 0.1).unwrap();
    for (u, target) in [(0.01, 3.8), (0.1, 1.5)] {
        let series = Evolution::new(&ModelParams::new(100, 1.0, u))
            .unwrap()
            .series(&grid)
            .unwrap();
        let bits = series.mean_after(50.0).unwrap();
        let nats = bits * std::f64::consts::LN_2;
        pass &= (bits - target).abs() <= 0.3;
        parts.push(format!(
            "U={u}: mean={bits:.3} bits (target {target}±0.3; same mean in nats {nats:.3})"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn critical_argmax() -> Outcome {
    let est = locate_critical(
        CriticalSearch::Argmax {
            n_min: 4,
            n_max: 80,
        },
        &ModelParams::new(4, 3.0, 0.4),
        &Executor::default(),
    )
    .unwrap();
    let pass = (est.u_c - 3.7).abs() <= 0.4 && est.u_c < 4.0;
    outcome(
        pass,
        format!(
            "u_c={:.3}±{:.3} (target 3.7±0.4, < 4)",
            est.u_c,
            est.uncertainty()
        ),
    )
}

fn critical_knee() -> Outcome {
    let mut ratios = Vec::new();
    let mut us = Vec::new();
    for n in [40usize, 60, 80] {
        let est = locate_critical(
            CriticalSearch::Knee {
                u_min: 1.0,
                u_max: 20.0,
                steps: 60,
            },
            &ModelParams::new(n, 1.0, 1.0),
            &Executor::default(),
        )
        .unwrap();
        ratios.push(est.j_knee.unwrap() / n as f64);
        us.push(est.u_c);
    }
    let pass = ratios.iter().all(|r| (r - 0.27).abs() <= 0.03) && spread(&us) <= 0.4;
    outcome(
        pass,
        format!(
            "J_knee/N={:.3?} (target 0.27±0.03), u_knee={:.3?}, window {:.3} (≤ 0.4)",
            ratios,
            us,
            spread(&us)
        ),
    )
}

fn scaling_laws() -> Outcome {
    let ns: Vec<usize> = (10..=100).step_by(10).collect();
    let fixed = ModelParams::new(10, 1.0, 1.0);
    let exec = Executor::default();
    let small = fit_scaling(1.0, &ns, &fixed, UConvention::FixInteraction, &exec).unwrap();
    let large = fit_scaling(40.0, &ns, &fixed, UConvention::FixInteraction, &exec).unwrap();
    let pass = small.preferred == ScalingModel::Log
        && small.model_log.rms < small.model_lin.rms
        && large.preferred == ScalingModel::Linear
        && large.model_lin.rms < large.model_log.rms;
    outcome(
        pass,
        format!(
            "u=1: {} (rms log {:.2e}, lin {:.2e}); u=40: {} (rms log {:.2e}, lin {:.2e})",
            small.preferred,
            small.model_log.rms,
            small.model_lin.rms,
            large.preferred,
            large.model_log.rms,
            large.model_lin.rms
        ),
    )
}

fn noninteracting_analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut gap_err, mut p0_err, mut period_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let n = rng.gen_range(1..=200);
        let j: f64 = rng.gen_range(0.1..2.0);
        let spec = diagonalize(
            &build_hamiltonian(&ModelParams::new(n, j, 0.0)).unwrap(),
            1e-10,
        )
        .unwrap();
        for w in spec.energies().windows(2) {
            gap_err = gap_err.max((w[1] - w[0] - 2.0 * j).abs() / j);
        }
        let evo = Evolution::new(&ModelParams::new(n, j, 0.0)).unwrap();
        for _ in 0..20 {
            let t: f64 = rng.gen_range(0.0..20.0);
            let p0 = evo.density_at(t).p[0];
            p0_err = p0_err.max((p0 - (j * t).cos().powi(2 * n as i32)).abs());
            period_err =
                period_err.max((evo.entropy_at(t) - evo.entropy_at(t + PI / (2.0 * j))).abs());
        }
    }
    let pass = gap_err <= 1e-10 && p0_err <= 1e-10 && period_err <= 1e-8;
    outcome(
        pass,
        format!("spacing err {gap_err:.1e}·J, p0 err {p0_err:.1e}, period err {period_err:.1e}"),
    )
}

fn frozen_limit() -> Outcome {
    let mut s_max = 0.0f64;
    let mut avg_max = 0.0f64;
    let mut delta = true;
    for n in [1usize, 5, 20, 100] {
        let p = ModelParams::new(n, 0.0, 0.7);
        let evo = Evolution::new(&p).unwrap();
        for t in time_grid(100.0, 0.13).unwrap() {
            s_max = s_max.max(evo.entropy_at(t).abs());
        }
        avg_max = avg_max.max(averaged_entropy(&p).unwrap().abs());
        let es = entanglement_spectrum(&p).unwrap();
        delta &= es.xi[0] == 0.0 && !es.clamped[0] && es.clamped[1..].iter().all(|c| *c);
    }
    let pass = s_max <= 1e-12 && avg_max == 0.0 && delta;
    outcome(
        pass,
        format!("max |S(t)|={s_max:.1e}, averaged S={avg_max}, delta spectrum={delta}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut rk_err, mut quad_err) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = rng.gen_range(2..=8);
        let j = 2.0 * (1.0 - rng.gen::<f64>());
        let u = 2.0 * (1.0 - rng.gen::<f64>());
        let p = ModelParams::new(n, j, u);
        let mut times: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..50.0)).collect();
        times.sort_by(f64::total_cmp);

        let evo = Evolution::new(&p).unwrap();
        let norm = build_hamiltonian(&p).unwrap().norm();
        let cfg = IntegratorConfig::new(3e-3 / norm, 50.0).unwrap();
        let reference = integrate_states(&p, &times, &cfg).unwrap();
        for (t, r) in times.iter().zip(&reference) {
            for (a, b) in evo.density_at(*t).p.iter().zip(&r.p) {
                rk_err = rk_err.max((a - b).abs());
            }
        }

        let avg = averaged_density_for(&p).unwrap();
        let quad = quadrature_average(&p, p.s, 40.0 / p.s, 1e-10).unwrap();
        for (a, b) in avg.p_avg.iter().zip(&quad.density.p_avg) {
            quad_err = quad_err.max((a - b).abs());
        }
    }
    let pass = rk_err <= 1e-8 && quad_err <= 1e-6;
    outcome(
        pass,
        format!("spectral vs integrator {rk_err:.1e} (≤ 1e-8), pair sum vs quadrature {quad_err:.1e} (≤ 1e-6)"),
    )
}

fn localized_element_growth() -> Outcome {
    let ns = [50usize, 100, 150, 200];
    let exec = Executor::default();
    let second: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let p = ModelParams::new(n, 1.0, 40.0 / n as f64);
            track_max_elements(&p, 2000.0, 0.1, &exec)
                .unwrap()
                .second_dominant
                .1
        })
        .collect();
    let x: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
    let (_, slope, _) = bjj::numeric::fit_line(&x, &second).unwrap();
    let at100 = second[1];
    let pass = (slope - 0.002).abs() <= 0.0007 && (at100 / 0.2 - 1.0).abs() <= 0.3;
    outcome(
        pass,
        format!("second-dominant maxima {second:.3?}, slope {slope:.5} (0.002±0.0007), N=100 value {at100:.3} (0.2±30%)"),
    )
}

fn spectrum_level_repulsion() -> Outcome {
    let spread_at = |u: f64| {
        entanglement_spectrum(&ModelParams::new(10, 1.0, u / 10.0))
            .unwrap()
            .level_spread()
    };
    let low: Vec<f64> = [0.5, 1.0].iter().map(|u| spread_at(*u)).collect();
    let high: Vec<f64> = [10.0, 20.0].iter().map(|u| spread_at(*u)).collect();
    let pass = high[0] > low.iter().cloned().fold(f64::MIN, f64::max) && high[1] >= high[0];
    outcome(
        pass,
        format!("level spread u=0.5,1: {low:.3?}; u=10,20: {high:.3?}"),
    )
}

fn invariant_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();
    for case in 0..100 {
        let n = rng.gen_range(1..=40);
        let j = rng.gen_range(0.01..3.0);
        let u = rng.gen_range(0.0..3.0);
        let p = ModelParams::new(n, j, u);
        let h = build_hamiltonian(&p).unwrap();
        let spin = build_spin_hamiltonian(&p).unwrap();
        if (&h.to_dense() - &spin).abs().max() > 1e-12 * h.norm() {
            failures.push(format!("case {case}: builders differ"));
        }
        let spec = diagonalize(&h, p.eig_tol).unwrap();
        if bohr_frequencies(&spec).count() != (n + 1) * n / 2 {
            failures.push(format!("case {case}: frequency count"));
        }
        let evo = Evolution::new(&p).unwrap();
        let bound = ((n + 1) as f64).log2() + p.trace_tol;
        for _ in 0..5 {
            let rho = evo.density_at(rng.gen_range(0.0..100.0));
            let s = renyi_entropy(&rho, p.alpha).unwrap();
            if (rho.trace() - 1.0).abs() > 1e-10 || !(0.0..=bound).contains(&s) {
                failures.push(format!("case {case}: real-time trace or bound"));
            }
        }
        let avg = averaged_reduced_density(&spec, p.s).unwrap();
        let s_avg = averaged_entropy(&p).unwrap();
        if (avg.trace() - 1.0).abs() > 1e-10 || !(0.0..=bound).contains(&s_avg) {
            failures.push(format!("case {case}: averaged trace or bound"));
        }
        let flipped =
            averaged_reduced_density(&spec.with_column_negated(rng.gen_range(0..=n)), p.s).unwrap();
        if avg
            .p_avg
            .iter()
            .zip(&flipped.p_avg)
            .any(|(a, b)| (a - b).abs() > 1e-14)
        {
            failures.push(format!("case {case}: sign convention"));
        }
    }
    let js: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let fixed = ModelParams::new(16, 1.0, 1.0);
    let a = scan_1d(Axis::Tunneling, &js, &fixed, &Executor::serial()).unwrap();
    let b = scan_1d(Axis::Tunneling, &js, &fixed, &Executor::new(4)).unwrap();
    if a.entropy != b.entropy {
        failures.push("scan determinism".into());
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "100 random parameter sets plus scan determinism: all green".to_string()
    } else {
        failures.join(", ")
    };
    outcome(pass, detail)
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("time-mean entropy N=100 J=1", time_mean_entropy),
        ("critical point, argmax mode", critical_argmax),
        ("critical point, knee mode", critical_knee),
        ("scaling laws u=1 / u=40", scaling_laws),
        ("U=0 analytics", noninteracting_analytics),
        ("J=0 limit", frozen_limit),
        ("oracle equivalence", oracle_equivalence),
        ("localized element growth", localized_element_growth),
        ("entanglement spectrum transition", spectrum_level_repulsion),
        ("invariant suite", invariant_suite),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!out.pass);
        println!(
            "criterion {:>2} {verdict} {name}: {} [{:.1}s]",
            k + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
