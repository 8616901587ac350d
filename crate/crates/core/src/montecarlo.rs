//! Replication harness: rejection frequencies over a grid of test values,
//! the distribution of α̂_max, and calibration of the standardized α̂ error.
//!
//! Replication `r` draws everything (secondary eigenvalues, noise) from the
//! stream `(seed, r)`. Replications are evaluated in fixed-size batches on a
//! rayon pool and folded in index order by a single collector, so a summary
//! does not depend on the number of workers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distrib::normal_cdf;
use crate::error::{Error, Result};
use crate::estimate::{estimate_alpha, fit_hierarchical};
use crate::process::{build_spectrum, simulate, ModelConfig};
use crate::rng::{mix64, replication_rng};
use crate::spectra::{coefficients_from_spectrum, pi_coefficient, OrderedSpectrum, RootSign};
use crate::urtest::{select_alpha_max, AlphaMax, Grid};

const BATCH: usize = 512;
pub const DEFAULT_RESERVOIR_CAP: usize = 10_000;

/// Settings of a Monte Carlo study. The master seed is `base.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub base: ModelConfig,
    pub replications: usize,
    pub grid: Grid,
    pub epsilon: f64,
    /// Thread count; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Maximum number of Z² values kept per test value.
    pub reservoir_cap: usize,
}

impl McConfig {
    pub fn new(base: ModelConfig, replications: usize) -> Self {
        Self {
            base,
            replications,
            grid: Grid::standard(),
            epsilon: 0.05,
            workers: None,
            reservoir_cap: DEFAULT_RESERVOIR_CAP,
        }
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidLevel(self.epsilon));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Largest tolerated number of failed replications (1%).
    fn error_budget(&self) -> usize {
        self.replications / 100
    }
}

/// Results at one test value α₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha0: f64,
    pub rejections: usize,
    /// Replications that completed; the frequency denominator.
    pub completed: usize,
    #[serde(with = "crate::serde_float")]
    pub rejection_freq: f64,
    /// Reservoir of Z² values ordered by replication index.
    #[serde(with = "crate::serde_float::vec")]
    pub z_samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub bin: AlphaMax,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub p: usize,
    pub c: f64,
    pub alpha: f64,
    pub sign: RootSign,
    pub epsilon: f64,
    pub seed: u64,
    pub replications: usize,
    /// Failed replications, excluded from every frequency denominator.
    pub errors: usize,
    pub per_alpha0: Vec<AlphaSummary>,
    /// Counts over the grid followed by `integrated`; they sum to
    /// `replications - errors`.
    pub alpha_max_hist: Vec<HistBin>,
    /// Reservoir of standardized errors `s_r` at the true α.
    #[serde(with = "crate::serde_float::vec")]
    pub theorem1_std_errors: Vec<f64>,
    /// Replications where α̂(α) was undefined.
    pub theorem1_undefined: usize,
}

impl McSummary {
    pub fn rejection_freq(&self, alpha0: f64) -> Option<f64> {
        self.per_alpha0
            .iter()
            .find(|a| (a.alpha0 - alpha0).abs() < 1e-12)
            .map(|a| a.rejection_freq)
    }

    /// Lower median of α̂_max, `Integrated` ranking above every grid value.
    pub fn alpha_max_median(&self) -> Option<AlphaMax> {
        let total: usize = self.alpha_max_hist.iter().map(|b| b.count).sum();
        if total == 0 {
            return None;
        }
        let target = total.div_ceil(2);
        let mut seen = 0;
        for b in &self.alpha_max_hist {
            seen += b.count;
            if seen >= target {
                return Some(b.bin);
            }
        }
        None
    }

    /// Share of completed replications with α̂_max above `x`, counting
    /// `Integrated` as above.
    pub fn alpha_max_share_above(&self, x: f64) -> f64 {
        let total: usize = self.alpha_max_hist.iter().map(|b| b.count).sum();
        let above: usize = self
            .alpha_max_hist
            .iter()
            .filter(|b| b.bin.value().is_none_or(|v| v > x))
            .map(|b| b.count)
            .sum();
        above as f64 / total as f64
    }
}

/// Moments and normality summary of the standardized errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub replications: usize,
    pub errors: usize,
    pub undefined: usize,
    /// Number of `s_r` values the statistics are computed from.
    pub samples: usize,
    #[serde(with = "crate::serde_float")]
    pub mean: f64,
    #[serde(with = "crate::serde_float")]
    pub variance: f64,
    #[serde(with = "crate::serde_float")]
    pub skewness: f64,
    #[serde(with = "crate::serde_float")]
    pub excess_kurtosis: f64,
    #[serde(with = "crate::serde_float")]
    pub ks_distance: f64,
}

/// Bottom-k sample under pseudo-random keys; the kept set depends only on
/// the keys, not on insertion order.
struct Reservoir {
    cap: usize,
    heap: BinaryHeap<Keyed>,
}

struct Keyed {
    key: u64,
    index: usize,
    value: f64,
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.key, self.index).cmp(&(other.key, other.index))
    }
}

impl Reservoir {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            heap: BinaryHeap::with_capacity(cap.min(1 << 16) + 1),
        }
    }

    fn offer(&mut self, key: u64, index: usize, value: f64) {
        if self.cap == 0 {
            return;
        }
        let item = Keyed { key, index, value };
        if self.heap.len() < self.cap {
            self.heap.push(item);
        } else if self.heap.peek().is_some_and(|top| item < *top) {
            self.heap.pop();
            self.heap.push(item);
        }
    }

    fn into_sorted(self) -> Vec<f64> {
        let mut items = self.heap.into_vec();
        items.sort_by_key(|k| k.index);
        items.into_iter().map(|k| k.value).collect()
    }
}

fn sample_key(seed: u64, replication: usize, slot: usize) -> u64 {
    mix64(mix64(mix64(seed) ^ replication as u64) ^ slot as u64)
}

struct Replication {
    z: Vec<f64>,
    reject: Vec<bool>,
    alpha_max: AlphaMax,
    std_error: Option<f64>,
}

/// `π₁₁` of a spectrum with the dominant eigenvalue replaced by `λ₁`.
fn limit_pi(spectrum: &OrderedSpectrum, sign: RootSign) -> Result<f64> {
    pi_coefficient(spectrum, sign)
}

/// `s = (ln n)·√(n^{1−α})·(α̂ − α)·√(c π₁₁²/2)`.
pub fn standardized_error(alpha_hat: f64, alpha: f64, pi11: f64, c: f64, n: usize) -> f64 {
    let nf = n as f64;
    nf.ln() * nf.powf(1.0 - alpha).sqrt() * (alpha_hat - alpha) * (0.5 * c * pi11 * pi11).sqrt()
}

fn replicate(config: &McConfig, r: usize, with_grid: bool) -> Result<Replication> {
    let base = &config.base;
    let mut rng = replication_rng(base.seed, r as u64);
    let spectrum = build_spectrum(base, &mut rng)?;
    let theta = coefficients_from_spectrum(&spectrum)?;
    let path = simulate(base, &theta, &mut rng)?;

    let fit = fit_hierarchical(&path, base.p, base.alpha, base.c, base.sign)?;
    let std_error = match estimate_alpha(&fit, base.c, base.n) {
        Some(a) => {
            let pi11 = limit_pi(&spectrum, base.sign)?;
            Some(standardized_error(a, base.alpha, pi11, base.c, base.n))
        }
        None => None,
    };

    if !with_grid {
        return Ok(Replication {
            z: Vec::new(),
            reject: Vec::new(),
            alpha_max: AlphaMax::Integrated,
            std_error,
        });
    }
    let sel = select_alpha_max(&path, base.p, &config.grid, base.c, base.sign, config.epsilon)?;
    Ok(Replication {
        z: sel.per_alpha0.iter().map(|t| t.z_squared).collect(),
        reject: sel.per_alpha0.iter().map(|t| t.reject).collect(),
        alpha_max: sel.alpha_max,
        std_error,
    })
}

/// Runs all replications in batches, feeding each result to `sink` in
/// replication order.
fn drive<F>(config: &McConfig, with_grid: bool, mut sink: F) -> Result<usize>
where
    F: FnMut(usize, Replication),
{
    config.validate()?;
    let pool = match config.workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        ),
        None => None,
    };
    let mut errors = 0;
    let mut start = 0;
    while start < config.replications {
        let end = (start + BATCH).min(config.replications);
        let run = || {
            (start..end)
                .into_par_iter()
                .map(|r| replicate(config, r, with_grid))
                .collect::<Vec<_>>()
        };
        let batch = match &pool {
            Some(p) => p.install(run),
            None => run(),
        };
        for (offset, outcome) in batch.into_iter().enumerate() {
            let r = start + offset;
            match outcome {
                Ok(rep) => sink(r, rep),
                Err(e) => {
                    errors += 1;
                    debug!("replication {r} failed: {e}");
                }
            }
        }
        if errors > config.error_budget() {
            return Err(Error::ReplicationAbort {
                errors,
                replications: end,
            });
        }
        start = end;
    }
    if errors > 0 {
        warn!(
            "{errors} of {} replications failed and were excluded",
            config.replications
        );
    }
    Ok(errors)
}

/// Rejection frequencies, Z² reservoirs and the α̂_max histogram.
pub fn run_power_study(config: &McConfig) -> Result<McSummary> {
    let grid = config.grid.as_slice();
    let seed = config.base.seed;
    let mut rejections = vec![0usize; grid.len()];
    let mut reservoirs: Vec<Reservoir> = (0..grid.len())
        .map(|_| Reservoir::new(config.reservoir_cap))
        .collect();
    let mut std_errors = Reservoir::new(config.reservoir_cap);
    let mut hist = vec![0usize; grid.len() + 1];
    let mut undefined = 0;
    let mut completed = 0;

    let errors = drive(config, true, |r, rep| {
        completed += 1;
        for (i, (&z, &rej)) in rep.z.iter().zip(&rep.reject).enumerate() {
            rejections[i] += rej as usize;
            reservoirs[i].offer(sample_key(seed, r, i), r, z);
        }
        let bin = match rep.alpha_max {
            AlphaMax::Value(a) => grid.iter().position(|&g| g == a).unwrap_or(grid.len()),
            AlphaMax::Integrated => grid.len(),
        };
        hist[bin] += 1;
        match rep.std_error {
            Some(s) => std_errors.offer(sample_key(seed, r, grid.len()), r, s),
            None => undefined += 1,
        }
    })?;

    let per_alpha0 = grid
        .iter()
        .zip(rejections)
        .zip(reservoirs)
        .map(|((&alpha0, rej), res)| AlphaSummary {
            alpha0,
            rejections: rej,
            completed,
            rejection_freq: if completed == 0 {
                f64::NAN
            } else {
                rej as f64 / completed as f64
            },
            z_samples: res.into_sorted(),
        })
        .collect();
    let alpha_max_hist = grid
        .iter()
        .map(|&g| AlphaMax::Value(g))
        .chain(std::iter::once(AlphaMax::Integrated))
        .zip(hist)
        .map(|(bin, count)| HistBin { bin, count })
        .collect();

    let base = &config.base;
    Ok(McSummary {
        n: base.n,
        p: base.p,
        c: base.c,
        alpha: base.alpha,
        sign: base.sign,
        epsilon: config.epsilon,
        seed,
        replications: config.replications,
        errors,
        per_alpha0,
        alpha_max_hist,
        theorem1_std_errors: std_errors.into_sorted(),
        theorem1_undefined: undefined,
    })
}

/// Sample statistics of `s_r` over all replications, with `π₁₁` taken from
/// each replication's true spectrum.
pub fn theorem1_calibration(config: &McConfig) -> Result<Calibration> {
    let mut samples = Vec::with_capacity(config.replications);
    let mut undefined = 0;
    let errors = drive(config, false, |_, rep| match rep.std_error {
        Some(s) => samples.push(s),
        None => undefined += 1,
    })?;
    let stats = describe(&samples);
    Ok(Calibration {
        replications: config.replications,
        errors,
        undefined,
        samples: samples.len(),
        mean: stats.mean,
        variance: stats.variance,
        skewness: stats.skewness,
        excess_kurtosis: stats.excess_kurtosis,
        ks_distance: ks_distance(&samples, normal_cdf),
    })
}

pub(crate) struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Mean, unbiased variance and the moment ratios `m₃/m₂^{3/2}`,
/// `m₄/m₂² − 3`.
pub(crate) fn describe(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        let mean = if xs.is_empty() { f64::NAN } else { xs[0] };
        return Moments {
            mean,
            variance: f64::NAN,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    Moments {
        mean,
        variance: m2 * n / (n - 1.0),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// Kolmogorov–Smirnov distance between the empirical distribution of `xs`
/// and `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}
