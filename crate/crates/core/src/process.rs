//! Triangular nearly unstable AR(p) model and its simulation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{coefficients_from_spectrum, ArCoefficients, OrderedSpectrum, RootSign};

const MAX_DRAWS: usize = 1000;
const MIN_SEPARATION: f64 = 1e-3;

/// Innovation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { variance: f64 },
    /// Centered Student-t with `df > 4`, rescaled to the given variance.
    StudentT { df: f64, variance: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Gaussian { variance: 1.0 }
    }
}

impl NoiseSpec {
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { variance } | NoiseSpec::StudentT { variance, .. } => variance,
        }
    }

    fn validate(&self) -> Result<()> {
        let v = self.variance();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive, got {v}"
            )));
        }
        if let NoiseSpec::StudentT { df, .. } = *self {
            if !(df > 4.0) {
                return Err(Error::InvalidConfig(format!(
                    "Student-t noise needs df > 4, got {df}"
                )));
            }
        }
        Ok(())
    }

    /// Builds a sampler. Fails on an invalid specification.
    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match *self {
            NoiseSpec::Gaussian { variance } => NoiseSampler::Gaussian(variance.sqrt()),
            NoiseSpec::StudentT { df, variance } => NoiseSampler::StudentT(
                StudentT::new(df).map_err(|e| Error::InvalidConfig(e.to_string()))?,
                (variance * (df - 2.0) / df).sqrt(),
            ),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Gaussian(f64),
    StudentT(StudentT<f64>, f64),
}

impl Distribution<f64> for NoiseSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Gaussian(sd) => sd * rng.sample::<f64, _>(StandardNormal),
            NoiseSampler::StudentT(t, scale) => scale * t.sample(rng),
        }
    }
}

/// How the `p - 1` eigenvalues of the stable block are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondaryRoots {
    /// Drawn uniformly on `[-ρ_n + 0.1, ρ_n - 0.1]` for every path.
    Random,
    /// Fixed eigenvalues; complex ones must come with their conjugates.
    Fixed(Vec<Complex64>),
}

/// Full description of a nearly unstable AR(p) experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub p: usize,
    pub n: usize,
    pub c: f64,
    pub alpha: f64,
    pub sign: RootSign,
    pub secondary: SecondaryRoots,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Initial state `Φ_0 = (X_0, X_{-1}, …, X_{1-p})`; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl ModelConfig {
    /// AR(1) with a positive root, `c = 1`, Gaussian noise.
    pub fn new(n: usize, alpha: f64) -> Self {
        Self {
            p: 1,
            n,
            c: 1.0,
            alpha,
            sign: RootSign::Positive,
            secondary: SecondaryRoots::Fixed(Vec::new()),
            noise: NoiseSpec::default(),
            seed: 0,
            initial: None,
        }
    }

    pub fn with_order(mut self, p: usize, secondary: SecondaryRoots) -> Self {
        self.p = p;
        self.secondary = secondary;
        self
    }

    pub fn with_sign(mut self, sign: RootSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("order p must be at least 1".into()));
        }
        if self.n < self.p + 2 {
            return Err(Error::InvalidOrder {
                p: self.p,
                n: self.n,
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let rho = rho(self)?;
        self.noise.validate()?;
        if let Some(init) = &self.initial {
            if init.len() != self.p || init.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "initial state must hold {} finite values",
                    self.p
                )));
            }
        }
        match &self.secondary {
            SecondaryRoots::Random => {
                if self.p > 1 && rho <= 0.1 {
                    return Err(Error::InvalidConfig(format!(
                        "random secondary roots need rho_n > 0.1, got {rho}"
                    )));
                }
            }
            SecondaryRoots::Fixed(roots) => {
                if roots.len() != self.p - 1 {
                    return Err(Error::InvalidConfig(format!(
                        "expected {} secondary eigenvalues, got {}",
                        self.p - 1,
                        roots.len()
                    )));
                }
                let leading = Complex64::new(self.sign.value() * rho, 0.0);
                for (i, r) in roots.iter().enumerate() {
                    if !(r.norm() < rho) || r.norm() == 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "secondary eigenvalue {r} must satisfy 0 < |λ| < rho_n = {rho}"
                        )));
                    }
                    if (r - leading).norm() == 0.0 || roots[..i].contains(r) {
                        return Err(Error::InvalidConfig(format!(
                            "secondary eigenvalue {r} is not distinct"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `ρ_n(α) = 1 − c·n^{−α}`, required to lie in `(0, 1)`.
pub fn rho_n(c: f64, n: usize, alpha: f64) -> Result<f64> {
    let rho = 1.0 - c * (n as f64).powf(-alpha);
    if c > 0.0 && rho > 0.0 && rho < 1.0 {
        Ok(rho)
    } else {
        Err(Error::InvalidConfig(format!(
            "rho_n = 1 - c n^(-alpha) = {rho} is outside (0, 1) (c={c}, n={n}, alpha={alpha})"
        )))
    }
}

pub fn rho(config: &ModelConfig) -> Result<f64> {
    rho_n(config.c, config.n, config.alpha)
}

/// Eigenvalues of `A_n`: `λ₁·ρ_n(α)` followed by the secondary eigenvalues.
pub fn build_spectrum<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<OrderedSpectrum> {
    config.validate()?;
    let rho = rho(config)?;
    let mut lambdas = vec![Complex64::new(config.sign.value() * rho, 0.0)];
    match &config.secondary {
        SecondaryRoots::Fixed(roots) => lambdas.extend_from_slice(roots),
        SecondaryRoots::Random => {
            lambdas.extend(
                draw_secondary(config.p - 1, rho, rng)?
                    .into_iter()
                    .map(|l| Complex64::new(l, 0.0)),
            );
        }
    }
    OrderedSpectrum::new(lambdas)
}

fn draw_secondary<R: Rng + ?Sized>(count: usize, rho: f64, rng: &mut R) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let bound = rho - 0.1;
    let uniform = Uniform::new_inclusive(-bound, bound)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for _ in 0..MAX_DRAWS {
        let draw: Vec<f64> = (0..count).map(|_| uniform.sample(rng)).collect();
        let separated = draw.iter().enumerate().all(|(i, a)| {
            a.abs() >= MIN_SEPARATION
                && draw[..i].iter().all(|b| (a - b).abs() >= MIN_SEPARATION)
        });
        if separated {
            return Ok(draw);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: MAX_DRAWS,
    })
}

/// Coefficients `θ_n` of the model, drawing secondary eigenvalues if needed.
pub fn build_theta_n<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<ArCoefficients> {
    coefficients_from_spectrum(&build_spectrum(config, rng)?)
}

/// Where a path came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathOrigin {
    Simulated { config: ModelConfig, theta: Vec<f64> },
    Ingested { name: String, source: String },
}

/// A scalar series `X_1, …, X_n` together with its pre-sample values.
/// Values older than the stored pre-sample are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArPath {
    x: Vec<f64>,
    presample: usize,
    pub origin: PathOrigin,
}

impl ArPath {
    /// `presample` holds `X_{1-m}, …, X_0` (oldest first).
    pub fn new(presample: Vec<f64>, observations: Vec<f64>, origin: PathOrigin) -> Self {
        let m = presample.len();
        let mut x = presample;
        x.extend(observations);
        Self {
            x,
            presample: m,
            origin,
        }
    }

    pub fn from_observations(name: &str, source: &str, values: Vec<f64>) -> Self {
        Self::new(
            Vec::new(),
            values,
            PathOrigin::Ingested {
                name: name.to_string(),
                source: source.to_string(),
            },
        )
    }

    pub fn n(&self) -> usize {
        self.x.len() - self.presample
    }

    /// `X_k` for any `k ≤ n`.
    #[inline]
    pub fn at(&self, k: isize) -> f64 {
        let idx = self.presample as isize + k - 1;
        if idx < 0 {
            0.0
        } else {
            self.x[idx as usize]
        }
    }

    pub fn observations(&self) -> &[f64] {
        &self.x[self.presample..]
    }

    pub fn presample(&self) -> &[f64] {
        &self.x[..self.presample]
    }

    /// Full stored vector: pre-sample block followed by the observations.
    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// The same path multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| v * factor).collect(),
            presample: self.presample,
            origin: self.origin.clone(),
        }
    }
}

/// `X_k = Σ θ_i X_{k-i} + ε_k` for `k = 1..=noise.len()`, starting from
/// `initial = (X_0, X_{-1}, …)` (missing entries are zero).
pub fn recurse(theta: &[f64], initial: &[f64], noise: &[f64]) -> Vec<f64> {
    let p = theta.len();
    // history holds X_{1-p}, …, X_0 then the generated values
    let mut history = vec![0.0; p];
    for (i, &v) in initial.iter().take(p).enumerate() {
        history[p - 1 - i] = v;
    }
    history.reserve(noise.len());
    for &e in noise {
        let t = history.len();
        let ar: f64 = theta
            .iter()
            .enumerate()
            .map(|(i, th)| th * history[t - 1 - i])
            .sum();
        history.push(ar + e);
    }
    history.split_off(p)
}

/// Simulates one path of the model with coefficients `theta`.
pub fn simulate<R: Rng + ?Sized>(
    config: &ModelConfig,
    theta: &ArCoefficients,
    rng: &mut R,
) -> Result<ArPath> {
    config.validate()?;
    if theta.order() != config.p {
        return Err(Error::InvalidConfig(format!(
            "coefficient vector has order {}, config has p = {}",
            theta.order(),
            config.p
        )));
    }
    let sampler = config.noise.sampler()?;
    let noise: Vec<f64> = (0..config.n).map(|_| sampler.sample(rng)).collect();
    let initial = config.initial.clone().unwrap_or_else(|| vec![0.0; config.p]);
    let observations = recurse(theta.as_slice(), &initial, &noise);
    let presample: Vec<f64> = initial.iter().rev().copied().collect();
    Ok(ArPath::new(
        presample,
        observations,
        PathOrigin::Simulated {
            config: config.clone(),
            theta: theta.as_slice().to_vec(),
        },
    ))
}
