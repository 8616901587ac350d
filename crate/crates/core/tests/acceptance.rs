//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Every Monte Carlo criterion uses the master seed `SEED`, fixed before any
//! run. Criterion 10 needs an external CSV named by `NEAR_UNIT_VELOCITY_CSV`
//! (columns as in the usual distribution, velocity selected by
//! `NEAR_UNIT_VELOCITY_COLUMN`, default `velocity`); it is skipped otherwise.

use std::process::ExitCode;
use std::time::Instant;

use nearunit::analysis::{analyze, ingest_csv, AnalyzeOptions, Column};
use nearunit::distrib::{chi1_quantile, normal_quantile};
use nearunit::estimate::{alpha_from_root, fit_hierarchical, fit_raw, j_matrix, unit_root_direction};
use nearunit::montecarlo::{run_power_study, theorem1_calibration, McConfig};
use nearunit::process::{build_theta_n, simulate};
use nearunit::rng::replication_rng;
use nearunit::spectra::{coefficients_from_spectrum, spectrum};
use nearunit::urtest::z_squared;
use nearunit::{
    AlphaMax, ArCoefficients, Grid, ModelConfig, OrderedSpectrum, RootSign, SecondaryRoots,
};
use num_complex::Complex64;

const SEED: u64 = 20_211_014;

#[derive(PartialEq)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Gate {
    results: Vec<Outcome>,
}

impl Gate {
    fn record(&mut self, id: &str, outcome: Outcome, detail: String) {
        let tag = match outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        };
        println!("{tag}  {id:<5} {detail}");
        self.results.push(outcome);
    }

    fn check(&mut self, id: &str, ok: bool, detail: String) {
        self.record(id, if ok { Outcome::Pass } else { Outcome::Fail }, detail);
    }
}

fn sign_name(s: RootSign) -> &'static str {
    match s {
        RootSign::Positive => "+1",
        RootSign::Negative => "-1",
    }
}

fn model(n: usize, p: usize, alpha: f64, sign: RootSign) -> ModelConfig {
    let secondary = if p > 1 {
        SecondaryRoots::Random
    } else {
        SecondaryRoots::Fixed(Vec::new())
    };
    ModelConfig::new(n, alpha)
        .with_order(p, secondary)
        .with_sign(sign)
        .with_seed(SEED)
}

/// Rejection frequency at a single test value.
fn frequency(n: usize, p: usize, alpha: f64, alpha0: f64, sign: RootSign, reps: usize) -> (f64, usize) {
    let cfg = McConfig::new(model(n, p, alpha, sign), reps).with_grid(Grid::new(vec![alpha0]).unwrap());
    match run_power_study(&cfg) {
        Ok(s) => (s.per_alpha0[0].rejection_freq, s.errors),
        Err(e) => {
            println!("      study failed: {e}");
            (f64::NAN, reps)
        }
    }
}

fn size_and_power(gate: &mut Gate, id: &str, sign: RootSign) {
    for alpha in [0.5, 0.7, 0.8] {
        let (f, err) = frequency(1000, 1, alpha, alpha, sign, 2000);
        gate.check(
            id,
            (0.033..=0.071).contains(&f),
            format!("size n=1000 p=1 l1={} alpha=alpha0={alpha}: freq={f:.4} in [0.033, 0.071] (errors {err})", sign_name(sign)),
        );
    }
    let (f, err) = frequency(1000, 1, 0.8, 0.5, sign, 2000);
    gate.check(
        id,
        f >= 0.95,
        format!("power n=1000 p=1 l1={} alpha=0.8 alpha0=0.5: freq={f:.4} >= 0.95 (errors {err})", sign_name(sign)),
    );
}

fn criterion_3(gate: &mut Gate) {
    let (f, err) = frequency(1000, 1, 0.8, 0.6, RootSign::Positive, 2000);
    gate.check(
        "C3",
        f >= 0.70,
        format!("power n=1000 p=1 alpha=0.8 alpha0=0.6: freq={f:.4} >= 0.70 (errors {err})"),
    );
}

fn criterion_4(gate: &mut Gate) {
    let (f, err) = frequency(250, 1, 0.8, 0.6, RootSign::Positive, 2000);
    gate.check(
        "C4",
        f >= 0.45,
        format!("power n=250 p=1 alpha=0.8 alpha0=0.6: freq={f:.4} >= 0.45 (errors {err})"),
    );
}

fn criterion_5_report_only() {
    for p in [2, 3] {
        let (f, _) = frequency(1000, p, 0.8, 0.5, RootSign::Negative, 500);
        println!("INFO  C5    unbounded: power n=1000 p={p} l1=-1 alpha=0.8 alpha0=0.5, 500 reps: freq={f:.4}");
    }
}

fn criterion_6(gate: &mut Gate) {
    for p in [1, 2] {
        let cfg = McConfig::new(model(5000, p, 0.7, RootSign::Positive), 2000);
        match theorem1_calibration(&cfg) {
            Ok(c) => {
                let detail = format!(
                    "calibration n=5000 p={p} alpha=0.7: mean={:.4} in [-0.1, 0.1], var={:.4} in [0.8, 1.2], KS={:.4} < 0.05 (skew {:.3}, exkurt {:.3}, undefined {}, errors {})",
                    c.mean, c.variance, c.ks_distance, c.skewness, c.excess_kurtosis, c.undefined, c.errors
                );
                let ok = (-0.1..=0.1).contains(&c.mean)
                    && (0.8..=1.2).contains(&c.variance)
                    && c.ks_distance < 0.05;
                gate.check("C6", ok, detail);
            }
            Err(e) => gate.check("C6", false, format!("calibration p={p} failed: {e}")),
        }
    }
}

fn criterion_7(gate: &mut Gate) {
    for p in [2, 3, 4] {
        for alpha in [0.5, 0.7, 0.8] {
            let (f, err) = frequency(1000, p, alpha, alpha, RootSign::Positive, 2000);
            gate.check(
                "C7",
                (0.03..=0.08).contains(&f),
                format!("size n=1000 p={p} random secondary alpha=alpha0={alpha}: freq={f:.4} in [0.03, 0.08] (errors {err})"),
            );
        }
    }
}

fn criterion_8(gate: &mut Gate) {
    let alpha = 0.75;
    let cfg = McConfig::new(model(1000, 1, alpha, RootSign::Positive), 1000);
    match run_power_study(&cfg) {
        Ok(s) => {
            let median = s.alpha_max_median();
            let share = s.alpha_max_share_above(alpha - 0.2 + 1e-12);
            let (ok_median, shown) = match median {
                Some(AlphaMax::Value(m)) => ((alpha - 0.16 - 1e-12..=alpha - 0.04 + 1e-12).contains(&m), format!("{m:.2}")),
                Some(AlphaMax::Integrated) => (false, "integrated".into()),
                None => (false, "none".into()),
            };
            gate.check(
                "C8",
                ok_median,
                format!("alpha_max median n=1000 p=1 alpha=0.75: {shown} in [0.59, 0.71]"),
            );
            gate.check(
                "C8",
                share >= 0.9,
                format!("P(alpha_max > 0.55) = {share:.4} >= 0.9 (errors {})", s.errors),
            );
        }
        Err(e) => gate.check("C8", false, format!("study failed: {e}")),
    }
}

/// χ²₁ CDF by composite Simpson quadrature of the normal density on
/// `[0, √q]`, doubled.
fn chi1_cdf_quadrature(q: f64) -> f64 {
    let b = q.sqrt();
    let m = 20_000;
    let h = b / m as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(b);
    for i in 1..m {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * s * h / 3.0
}

fn criterion_9(gate: &mut Gate) {
    // estimate_alpha inverts ρ_n(α)
    let mut worst: f64 = 0.0;
    for &n in &[50usize, 1000, 100_000] {
        for &c in &[0.5, 1.0, 3.0] {
            for k in 1..20 {
                let a = k as f64 / 20.0;
                let gap = c * (n as f64).powf(-a);
                if gap < 1e-3 || gap >= 2.0 {
                    continue;
                }
                for sign in [RootSign::Positive, RootSign::Negative] {
                    let v = sign.value() * (1.0 - gap);
                    let back = alpha_from_root(v, sign, c, n).unwrap();
                    worst = worst.max((back - a).abs());
                }
            }
        }
    }
    gate.check("C9", worst <= 1e-12, format!("alpha inversion identity: max error {worst:.2e} <= 1e-12"));

    // p = 1: both fits give the same coefficient
    let cfg = ModelConfig::new(800, 0.7).with_seed(SEED);
    let mut rng = replication_rng(SEED, 0);
    let theta = build_theta_n(&cfg, &mut rng).unwrap();
    let path = simulate(&cfg, &theta, &mut rng).unwrap();
    let raw = fit_raw(&path, 1).unwrap();
    let mut diff: f64 = 0.0;
    for a0 in [0.5, 0.7, 0.9] {
        let h = fit_hierarchical(&path, 1, a0, 1.0, RootSign::Positive).unwrap();
        diff = diff.max((h.v_hat - raw.theta_hat[0]).abs());
    }
    gate.check("C9", diff <= 1e-12, format!("p=1 fits coincide: max |v_hat - theta_hat| {diff:.2e} <= 1e-12"));

    // Vieta round trips
    let spectra: Vec<Vec<Complex64>> = vec![
        vec![Complex64::new(0.9, 0.0), Complex64::new(0.5, 0.0), Complex64::new(-0.3, 0.0)],
        vec![Complex64::new(-0.95, 0.0), Complex64::new(0.2, 0.4), Complex64::new(0.2, -0.4)],
        vec![Complex64::new(0.99, 0.0), Complex64::new(-0.6, 0.1), Complex64::new(-0.6, -0.1), Complex64::new(0.05, 0.0)],
    ];
    let mut worst: f64 = 0.0;
    for s in spectra {
        let ord = OrderedSpectrum::new(s).unwrap();
        let theta = coefficients_from_spectrum(&ord).unwrap();
        let back = spectrum(&theta).unwrap();
        for (a, b) in ord.as_slice().iter().zip(back.as_slice()) {
            worst = worst.max((a - b).norm());
        }
        let again = coefficients_from_spectrum(&back).unwrap();
        for (a, b) in theta.as_slice().iter().zip(again.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    let theta = ArCoefficients::new(vec![0.3, 0.2, -0.05, 0.01]).unwrap();
    let back = coefficients_from_spectrum(&spectrum(&theta).unwrap()).unwrap();
    for (a, b) in theta.as_slice().iter().zip(back.as_slice()) {
        worst = worst.max((a - b).abs());
    }
    gate.check("C9", worst <= 1e-10, format!("Vieta round trips: max error {worst:.2e} <= 1e-10"));

    // v_pᵀ J = 0
    let mut worst: f64 = 0.0;
    for sign in [RootSign::Positive, RootSign::Negative] {
        for p in 1..=6 {
            let r = unit_root_direction(sign, p).transpose() * j_matrix(sign.value(), p);
            worst = worst.max(r.amax());
        }
    }
    gate.check("C9", worst == 0.0, format!("v_p^T J = 0: max entry {worst:.2e}"));

    // Z² vanishes at α̂ = α₀
    let z = z_squared(Some(0.73), 0.73, 1.7, 2.0, 1000);
    gate.check("C9", z == 0.0, format!("Z^2 at alpha_hat = alpha0: {z}"));

    // χ²₁ quantile against the quadrature CDF
    let mut worst: f64 = 0.0;
    for prob in [0.5, 0.8, 0.9, 0.95, 0.975, 0.99, 0.999] {
        let q = chi1_quantile(prob).unwrap();
        worst = worst.max((chi1_cdf_quadrature(q) - prob).abs());
        let z = normal_quantile(0.5 + prob / 2.0).unwrap();
        worst = worst.max((z * z - q).abs() / q);
    }
    gate.check("C9", worst <= 1e-9, format!("chi2_1 quantile vs quadrature CDF: max error {worst:.2e} <= 1e-9"));
}

fn criterion_10(gate: &mut Gate) {
    let Ok(file) = std::env::var("NEAR_UNIT_VELOCITY_CSV") else {
        gate.record(
            "C10",
            Outcome::Skip,
            "velocity series not provided (set NEAR_UNIT_VELOCITY_CSV)".into(),
        );
        return;
    };
    let column: Column = std::env::var("NEAR_UNIT_VELOCITY_COLUMN")
        .unwrap_or_else(|_| "velocity".into())
        .parse()
        .unwrap();
    let report = ingest_csv(std::path::Path::new(&file), Some(&column))
        .and_then(|s| analyze(&s, &AnalyzeOptions::default()));
    match report {
        Ok(r) => {
            let round = |x: f64| (x * 100.0).round() / 100.0;
            let alpha = r.alpha_interval.map(|i| (round(i.lo), round(i.hi)));
            let quasi = r.quasi_unit_root_interval.map(|i| (round(i.lo), round(i.hi)));
            gate.check(
                "C10",
                alpha == Some((0.50, 0.67)) && quasi == Some((0.91, 0.96)),
                format!(
                    "velocity n={}: alpha {alpha:?} = (0.5, 0.67), quasi-root {quasi:?} = (0.91, 0.96)",
                    r.n
                ),
            );
            gate.check("C10", r.chosen_p == 1, format!("velocity chosen p = {} (soft, expected 1)", r.chosen_p));
        }
        Err(e) => gate.check("C10", false, format!("analysis failed: {e}")),
    }
}

fn main() -> ExitCode {
    let mut gate = Gate { results: Vec::new() };
    let steps: Vec<(&str, Box<dyn Fn(&mut Gate)>)> = vec![
        ("C1", Box::new(|g| size_and_power(g, "C1/2", RootSign::Positive))),
        ("C3", Box::new(criterion_3)),
        ("C4", Box::new(criterion_4)),
        ("C5", Box::new(|g| {
            size_and_power(g, "C5", RootSign::Negative);
            criterion_5_report_only();
        })),
        ("C6", Box::new(criterion_6)),
        ("C7", Box::new(criterion_7)),
        ("C8", Box::new(criterion_8)),
        ("C9", Box::new(criterion_9)),
        ("C10", Box::new(criterion_10)),
    ];
    for (name, step) in steps {
        let t = Instant::now();
        step(&mut gate);
        println!("      {name} finished in {:.1}s", t.elapsed().as_secs_f64());
    }
    let failed = gate.results.iter().filter(|o| **o == Outcome::Fail).count();
    let skipped = gate.results.iter().filter(|o| **o == Outcome::Skip).count();
    let passed = gate.results.len() - failed - skipped;
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
