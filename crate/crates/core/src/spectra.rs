//! Companion-matrix algebra for AR(p) coefficient vectors.
//!
//! The eigenvalues of a companion matrix are the roots of its characteristic
//! polynomial `z^p - θ₁ z^{p-1} - … - θ_p`, so spectra are obtained with a
//! simultaneous (Aberth–Ehrlich) polynomial root finder rather than a general
//! eigensolver.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const STRICT_TOLERANCE: f64 = 1e-12;
const ACCEPT_TOLERANCE: f64 = 1e-8;
const REAL_SNAP: f64 = 1e-10;
const MODULUS_TIE: f64 = 1e-9;
const NEAR_MULTIPLE: f64 = 1e-6;

/// Sign of the unit root of the limit process (`λ₁ = ±1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootSign {
    Positive,
    Negative,
}

impl RootSign {
    pub fn value(self) -> f64 {
        match self {
            RootSign::Positive => 1.0,
            RootSign::Negative => -1.0,
        }
    }

    /// `λ₁^k` for an integer power.
    pub fn powi(self, k: usize) -> f64 {
        match self {
            RootSign::Negative if k % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }
}

/// AR coefficients `(θ₁, …, θ_p)` with `p ≥ 1` and `θ_p ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ArCoefficients(Vec<f64>);

impl ArCoefficients {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidConfig("AR order must be at least 1".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("AR coefficients must be finite".into()));
        }
        if *theta.last().unwrap() == 0.0 {
            return Err(Error::InvalidConfig(
                "last AR coefficient must be non-zero".into(),
            ));
        }
        Ok(Self(theta))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|t| t.abs()).sum()
    }
}

impl TryFrom<Vec<f64>> for ArCoefficients {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ArCoefficients> for Vec<f64> {
    fn from(c: ArCoefficients) -> Self {
        c.0
    }
}

/// Eigenvalues sorted by modulus (descending), ties broken by real part then
/// imaginary part, both descending.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSpectrum(Vec<Complex64>);

impl OrderedSpectrum {
    /// Sorts the given eigenvalues. All of them must be finite and non-zero.
    pub fn new(lambdas: Vec<Complex64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidConfig("empty spectrum".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite() || l.norm() == 0.0) {
            return Err(Error::InvalidConfig(
                "eigenvalues must be finite and non-zero".into(),
            ));
        }
        Ok(Self(order_eigenvalues(lambdas)))
    }

    /// Convenience constructor for an all-real spectrum.
    pub fn from_real(lambdas: &[f64]) -> Result<Self> {
        Self::new(lambdas.iter().map(|&l| Complex64::new(l, 0.0)).collect())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dominant(&self) -> Complex64 {
        self.0[0]
    }

    pub fn spectral_radius(&self) -> f64 {
        self.0[0].norm()
    }
}

/// The `p×p` companion matrix: `θᵀ` on the first row and `I_{p-1}` on the
/// subdiagonal.
pub fn companion_matrix(theta: &[f64]) -> DMatrix<f64> {
    let p = theta.len();
    let mut a = DMatrix::zeros(p, p);
    for (j, &t) in theta.iter().enumerate() {
        a[(0, j)] = t;
    }
    for i in 1..p {
        a[(i, i - 1)] = 1.0;
    }
    a
}

pub fn companion_from_coefficients(theta: &ArCoefficients) -> DMatrix<f64> {
    companion_matrix(theta.as_slice())
}

/// Evaluates `z^p - θ₁ z^{p-1} - … - θ_p`.
pub fn char_poly(theta: &[f64], z: Complex64) -> Complex64 {
    theta
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &t| acc * z - t)
}

/// Ordered eigenvalues of the companion matrix of `theta`.
pub fn spectrum(theta: &ArCoefficients) -> Result<OrderedSpectrum> {
    let roots = characteristic_roots(theta.as_slice())?;
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            if (roots[i] - roots[j]).norm() < NEAR_MULTIPLE {
                log::warn!(
                    "near-multiple eigenvalues {} and {} (distance < {NEAR_MULTIPLE:e})",
                    roots[i],
                    roots[j]
                );
            }
        }
    }
    Ok(OrderedSpectrum(order_eigenvalues(roots)))
}

/// All eigenvalues of the companion matrix of `theta`, unordered. Trailing
/// zero coefficients are allowed and yield zero eigenvalues.
pub fn characteristic_roots(theta: &[f64]) -> Result<Vec<Complex64>> {
    let degree = theta.iter().rposition(|&t| t != 0.0).map_or(0, |i| i + 1);
    let mut roots = vec![Complex64::new(0.0, 0.0); theta.len() - degree];
    let core = &theta[..degree];
    let found = match degree {
        0 => Vec::new(),
        1 => vec![Complex64::new(core[0], 0.0)],
        2 => quadratic_roots(core[0], core[1]),
        _ => aberth_ehrlich(core)?,
    };
    roots.extend(symmetrize_conjugates(found));
    Ok(roots)
}

/// Largest eigenvalue modulus of the companion matrix, zero coefficients
/// allowed.
pub fn spectral_radius(theta: &[f64]) -> Result<f64> {
    Ok(characteristic_roots(theta)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

// Roots of z² - a z - b.
fn quadratic_roots(a: f64, b: f64) -> Vec<Complex64> {
    let disc = a * a + 4.0 * b;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation: compute the larger-magnitude root first
        let big = 0.5 * (a + a.signum() * s);
        if big == 0.0 {
            return vec![Complex64::new(0.0, 0.0); 2];
        }
        let small = -b / big;
        vec![Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let re = 0.5 * a;
        let im = 0.5 * (-disc).sqrt();
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn eval_with_derivative(theta: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &t in theta {
        dp = dp * z + p;
        p = p * z - t;
    }
    (p, dp)
}

fn aberth_ehrlich(theta: &[f64]) -> Result<Vec<Complex64>> {
    let d = theta.len();
    let scale = 1.0_f64.max(theta.iter().map(|t| t.abs()).sum());
    let radius = 1.0 + theta.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / d as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step = 0.0_f64;
        for i in 0..d {
            let (p, dp) = eval_with_derivative(theta, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        residual = max_residual(theta, &z);
        if residual <= STRICT_TOLERANCE * scale && max_step <= 1e-13 {
            return Ok(z);
        }
    }
    if residual <= ACCEPT_TOLERANCE * scale {
        log::debug!("root finder accepted at residual {residual:e}");
        Ok(z)
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

fn max_residual(theta: &[f64], z: &[Complex64]) -> f64 {
    z.iter()
        .map(|&r| char_poly(theta, r).norm())
        .fold(0.0, f64::max)
}

// The polynomial is real, so its roots come in conjugate pairs. Snap
// near-real roots onto the axis and average each pair.
fn symmetrize_conjugates(roots: Vec<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(roots.len());
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for r in roots {
        if r.im.abs() <= REAL_SNAP * r.norm().max(1.0) {
            out.push(Complex64::new(r.re, 0.0));
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }
    if upper.len() != lower.len() {
        out.extend(upper);
        out.extend(lower);
        return out;
    }
    for u in upper {
        let (k, _) = lower
            .iter()
            .enumerate()
            .map(|(k, l)| (k, (u - l.conj()).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("matched counts");
        let l = lower.swap_remove(k);
        let mid = Complex64::new(0.5 * (u.re + l.re), 0.5 * (u.im - l.im));
        out.push(mid);
        out.push(mid.conj());
    }
    out
}

fn order_eigenvalues(mut lambdas: Vec<Complex64>) -> Vec<Complex64> {
    lambdas.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let lexicographic = |a: &Complex64, b: &Complex64| -> Ordering {
        b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
    };
    let mut start = 0;
    while start < lambdas.len() {
        let head = lambdas[start].norm();
        let mut end = start + 1;
        while end < lambdas.len() && head - lambdas[end].norm() <= MODULUS_TIE * head.max(1.0) {
            end += 1;
        }
        lambdas[start..end].sort_by(lexicographic);
        start = end;
    }
    lambdas
}

/// Expands `∏(z - λᵢ)` and returns `θ` with `θ_k = -[z^{p-k}]`.
pub fn coefficients_from_spectrum(lambdas: &OrderedSpectrum) -> Result<ArCoefficients> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &lambda in lambdas.as_slice() {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * lambda;
        }
        poly = next;
    }
    let residue = poly.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if residue > 1e-10 {
        return Err(Error::NonRealCoefficients { residue });
    }
    ArCoefficients::new(poly[1..].iter().map(|c| -c.re).collect())
}

/// `λ₁^{p-1} / ∏_{j≥2} (1 - λ_j)`, equal to 1 when `p = 1`.
pub fn pi_coefficient(lambdas: &OrderedSpectrum, sign: RootSign) -> Result<f64> {
    let p = lambdas.len();
    let mut product = Complex64::new(1.0, 0.0);
    for &lambda in &lambdas.as_slice()[1..] {
        let factor = Complex64::new(1.0, 0.0) - lambda;
        if factor.norm() < 1e-12 {
            return Err(Error::SingularPi);
        }
        product *= factor;
    }
    if product.im.abs() > 1e-8 * product.norm().max(1.0) {
        return Err(Error::NonRealCoefficients {
            residue: product.im.abs(),
        });
    }
    Ok(sign.powi(p - 1) / product.re)
}
