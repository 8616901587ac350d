//! Test of `H₀: α = α₀` against `H₁: α > α₀` and grid selection of α̂_max.

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::distrib::chi1_quantile;
use crate::error::{Error, Result};
use crate::estimate::{
    alpha_confidence_interval, below_one, estimate_alpha, fit_hierarchical, fit_raw, Interval,
};
use crate::process::ArPath;
use crate::spectra::{pi_coefficient, spectrum, ArCoefficients, RootSign};

/// Ascending grid of test values inside `[1/2, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for &v in &values {
            check_alpha0(v)?;
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("grid must be strictly ascending".into()));
        }
        Ok(Self(values))
    }

    /// `{1/2 + k/50, k = 0, …, 24}`.
    pub fn standard() -> Self {
        Self((0..25).map(|k| 0.5 + k as f64 / 50.0).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Smallest grid value.
    pub fn floor(&self) -> Option<f64> {
        self.0.first().copied()
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.0
    }
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if alpha0 >= 0.5 && alpha0 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!(
            "test value {alpha0} violates the restriction 1/2 <= alpha0 < 1"
        )))
    }
}

/// How `λ₁` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMode {
    Positive,
    Negative,
    /// Sign of the real part of the dominant eigenvalue of the estimated
    /// companion matrix.
    Auto,
}

impl From<RootSign> for SignMode {
    fn from(s: RootSign) -> Self {
        match s {
            RootSign::Positive => SignMode::Positive,
            RootSign::Negative => SignMode::Negative,
        }
    }
}

pub fn resolve_sign(mode: SignMode, path: &ArPath, p: usize) -> Result<RootSign> {
    match mode {
        SignMode::Positive => Ok(RootSign::Positive),
        SignMode::Negative => Ok(RootSign::Negative),
        SignMode::Auto => {
            let raw = fit_raw(path, p)?;
            let dominant = spectrum(&ArCoefficients::new(raw.theta_hat)?)?.dominant();
            Ok(if dominant.re < 0.0 {
                RootSign::Negative
            } else {
                RootSign::Positive
            })
        }
    }
}

/// Plug-in estimate `π̂_n` from the spectrum of `θ̂_n`. `None` flags a
/// secondary eigenvalue numerically at 1, or a non-real dominant eigenvalue
/// whose conjugate leaves the product complex.
pub fn estimate_pi(path: &ArPath, p: usize, sign: RootSign) -> Result<Option<f64>> {
    if p == 1 {
        return Ok(Some(1.0));
    }
    let raw = fit_raw(path, p)?;
    let s = spectrum(&ArCoefficients::new(raw.theta_hat)?)?;
    match pi_coefficient(&s, sign) {
        Ok(pi) => Ok(Some(pi)),
        Err(Error::SingularPi) | Err(Error::NonRealCoefficients { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `Z_n²(α₀) = (c π̂²/2) (ln n)² n^{1−α₀} (α̂ − α₀)²`, infinite when α̂ is
/// undefined.
pub fn z_squared(alpha_hat: Option<f64>, alpha0: f64, pi_hat: f64, c: f64, n: usize) -> f64 {
    match alpha_hat {
        None => f64::INFINITY,
        Some(a) => {
            let nf = n as f64;
            0.5 * c * pi_hat * pi_hat * nf.ln().powi(2) * nf.powf(1.0 - alpha0) * (a - alpha0).powi(2)
        }
    }
}

/// Test statistic before the decision is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    pub alpha0: f64,
    pub z_squared: f64,
    pub v_hat: f64,
    pub alpha_hat: Option<f64>,
    pub pi_hat: Option<f64>,
}

pub fn test_statistic(
    path: &ArPath,
    p: usize,
    alpha0: f64,
    c: f64,
    sign: RootSign,
) -> Result<Statistic> {
    let pi = estimate_pi(path, p, sign)?;
    statistic_with_pi(path, p, alpha0, c, sign, pi)
}

fn statistic_with_pi(
    path: &ArPath,
    p: usize,
    alpha0: f64,
    c: f64,
    sign: RootSign,
    pi_hat: Option<f64>,
) -> Result<Statistic> {
    check_alpha0(alpha0)?;
    let n = path.n();
    let fit = fit_hierarchical(path, p, alpha0, c, sign)?;
    let alpha_hat = estimate_alpha(&fit, c, n);
    let z = match pi_hat {
        Some(pi) => z_squared(alpha_hat, alpha0, pi, c, n),
        None => f64::INFINITY,
    };
    Ok(Statistic {
        alpha0,
        z_squared: z,
        v_hat: fit.v_hat,
        alpha_hat,
        pi_hat,
    })
}

/// Outcome of one test at `α₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub alpha0: f64,
    #[serde(with = "crate::serde_float")]
    pub z_squared: f64,
    pub critical_value: f64,
    pub epsilon: f64,
    pub reject: bool,
    pub v_hat: f64,
    pub alpha_hat: Option<f64>,
    pub pi_hat: Option<f64>,
    /// Set when π̂ could not be formed (see [`estimate_pi`]).
    pub pi_singular: bool,
    /// Confidence interval for α at level `1 − ε`, when α̂ lies in (0, 1).
    pub ci: Option<Interval>,
}

impl TestReport {
    fn decide(stat: Statistic, epsilon: f64, critical: f64, c: f64, n: usize) -> Self {
        let ci = match (stat.alpha_hat, stat.pi_hat) {
            (Some(a), Some(pi)) if a > 0.0 && a < 1.0 => {
                alpha_confidence_interval(a, pi, c, n, 1.0 - epsilon).ok()
            }
            _ => None,
        };
        Self {
            alpha0: stat.alpha0,
            z_squared: stat.z_squared,
            critical_value: critical,
            epsilon,
            reject: stat.z_squared > critical,
            v_hat: stat.v_hat,
            alpha_hat: stat.alpha_hat,
            pi_hat: stat.pi_hat,
            pi_singular: stat.pi_hat.is_none(),
            ci,
        }
    }
}

fn critical_value(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidLevel(epsilon));
    }
    chi1_quantile(1.0 - epsilon)
}

pub fn run_test(
    path: &ArPath,
    p: usize,
    alpha0: f64,
    c: f64,
    sign: RootSign,
    epsilon: f64,
) -> Result<TestReport> {
    let critical = critical_value(epsilon)?;
    let stat = test_statistic(path, p, alpha0, c, sign)?;
    Ok(TestReport::decide(stat, epsilon, critical, c, path.n()))
}

/// `α̂_max`: a grid value, or `Integrated` when every test rejects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMax {
    Value(f64),
    Integrated,
}

impl AlphaMax {
    pub fn value(self) -> Option<f64> {
        match self {
            AlphaMax::Value(v) => Some(v),
            AlphaMax::Integrated => None,
        }
    }

    pub fn is_integrated(self) -> bool {
        matches!(self, AlphaMax::Integrated)
    }
}

impl Serialize for AlphaMax {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AlphaMax::Value(v) => s.serialize_f64(*v),
            AlphaMax::Integrated => s.serialize_str("integrated"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaMax {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Value(v) => Ok(AlphaMax::Value(v)),
            Repr::Tag(t) if t == "integrated" => Ok(AlphaMax::Integrated),
            Repr::Tag(t) => Err(de::Error::invalid_value(
                de::Unexpected::Str(&t),
                &"a number or \"integrated\"",
            )),
        }
    }
}

/// First non-rejected grid value.
pub fn alpha_max_from_decisions(grid: &[f64], rejects: &[bool]) -> AlphaMax {
    grid.iter()
        .zip(rejects)
        .find(|(_, &r)| !r)
        .map_or(AlphaMax::Integrated, |(&a, _)| AlphaMax::Value(a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub n: usize,
    pub p: usize,
    pub c: f64,
    pub epsilon: f64,
    pub sign: RootSign,
    pub grid: Grid,
    pub per_alpha0: Vec<TestReport>,
    pub alpha_max: AlphaMax,
    /// Interval at the selected point, clipped below at the grid floor.
    pub ci_at_alpha_max: Option<Interval>,
}

/// Runs the test at every grid value and keeps the smallest non-rejected one.
pub fn select_alpha_max(
    path: &ArPath,
    p: usize,
    grid: &Grid,
    c: f64,
    sign: RootSign,
    epsilon: f64,
) -> Result<SelectionReport> {
    let critical = critical_value(epsilon)?;
    let n = path.n();
    let pi = if grid.is_empty() {
        None
    } else {
        estimate_pi(path, p, sign)?
    };
    let per_alpha0 = grid
        .as_slice()
        .iter()
        .map(|&a0| {
            statistic_with_pi(path, p, a0, c, sign, pi)
                .map(|s| TestReport::decide(s, epsilon, critical, c, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let rejects: Vec<bool> = per_alpha0.iter().map(|r| r.reject).collect();
    let alpha_max = alpha_max_from_decisions(grid.as_slice(), &rejects);
    let ci_at_alpha_max = match alpha_max {
        AlphaMax::Value(a) => per_alpha0
            .iter()
            .find(|r| r.alpha0 == a)
            .and_then(|r| r.ci)
            .map(|ci| clip_to_floor(ci, grid.floor().unwrap_or(0.0))),
        AlphaMax::Integrated => None,
    };
    Ok(SelectionReport {
        n,
        p,
        c,
        epsilon,
        sign,
        grid: grid.clone(),
        per_alpha0,
        alpha_max,
        ci_at_alpha_max,
    })
}

/// Intersects an interval with `[floor, 1)`, collapsing onto the floor when
/// it lies entirely below.
pub fn clip_to_floor(ci: Interval, floor: f64) -> Interval {
    let lo = ci.lo.max(floor);
    let hi = ci.hi.max(lo).min(below_one());
    Interval::new(lo, hi)
}
