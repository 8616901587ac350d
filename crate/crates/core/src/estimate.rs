//! Least-squares estimation in the raw and hierarchical parameterizations,
//! the α-exponent estimator and the corrected coefficient estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distrib::normal_quantile;
use crate::error::{Error, Result};
use crate::process::{rho_n, ArPath};
use crate::spectra::{companion_matrix, spectral_radius, RootSign};

const SINGULAR_RATIO: f64 = 1e-13;
const WARN_CONDITION: f64 = 1e12;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// OLS fit of `X_k = θᵀ Φ_{k-1} + ε_k`.
#[derive(Debug, Clone)]
pub struct RawFit {
    pub theta_hat: Vec<f64>,
    /// `S_{n,n-1} = Σ_{k=0}^{n-1} Φ_k Φ_kᵀ`
    pub gram: DMatrix<f64>,
    /// `Σ_{k=1}^n Φ_{k-1} X_k`
    pub moment: DVector<f64>,
    pub residual_variance: f64,
}

/// OLS fit of `X_k = ϑᵀ(α) Ψ_{k-1}(α) + ε_k` with `ϑ = (λ_{n,1}, β)`.
#[derive(Debug, Clone)]
pub struct HierarchicalFit {
    pub alpha_used: f64,
    pub c: f64,
    pub n: usize,
    pub sign: RootSign,
    /// `λ₁·ρ_n(α₀)`, the root used to build the `V` regressors.
    pub leading_root: f64,
    /// First component of `ϑ̂_n(α)`, estimating `λ₁ρ_n(α)`.
    pub v_hat: f64,
    pub beta_hat: Vec<f64>,
    /// `T_{n,n-1}(α)`
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
}

/// One regression row: `(Ψ_{k-1}, X_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub psi: Vec<f64>,
    pub response: f64,
}

fn check_order(path: &ArPath, p: usize) -> Result<()> {
    if p == 0 || path.n() < p + 2 {
        return Err(Error::InvalidOrder { p, n: path.n() });
    }
    Ok(())
}

/// Solves `gram · x = moment` by LU with partial pivoting after a rank check
/// on the symmetric gram matrix.
pub(crate) fn solve_normal_equations(gram: &DMatrix<f64>, moment: &DVector<f64>) -> Result<DVector<f64>> {
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularGram);
    }
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if max == 0.0 || min <= SINGULAR_RATIO * max {
        return Err(Error::SingularGram);
    }
    if max / min > WARN_CONDITION {
        log::warn!("ill-conditioned gram matrix (condition number {:e})", max / min);
    }
    gram.clone().lu().solve(moment).ok_or(Error::SingularGram)
}

fn accumulate<'a>(p: usize, rows: impl Iterator<Item = (&'a [f64], f64)>) -> (DMatrix<f64>, DVector<f64>) {
    let mut gram = DMatrix::zeros(p, p);
    let mut moment = DVector::zeros(p);
    for (phi, x) in rows {
        for i in 0..p {
            moment[i] += phi[i] * x;
            for j in 0..=i {
                gram[(i, j)] += phi[i] * phi[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    (gram, moment)
}

/// Raw OLS estimate `θ̂_n = S_{n,n-1}^{-1} Σ Φ_{k-1} X_k`.
pub fn fit_raw(path: &ArPath, p: usize) -> Result<RawFit> {
    check_order(path, p)?;
    let n = path.n() as isize;
    let rows: Vec<(Vec<f64>, f64)> = (1..=n)
        .map(|k| ((1..=p as isize).map(|i| path.at(k - i)).collect(), path.at(k)))
        .collect();
    let (gram, moment) = accumulate(p, rows.iter().map(|(phi, x)| (phi.as_slice(), *x)));
    let theta = solve_normal_equations(&gram, &moment)?;
    let rss: f64 = rows
        .iter()
        .map(|(phi, x)| {
            let fit: f64 = phi.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            (x - fit).powi(2)
        })
        .sum();
    Ok(RawFit {
        theta_hat: theta.iter().copied().collect(),
        gram,
        moment,
        residual_variance: rss / (path.n() - p) as f64,
    })
}

/// Regression rows of the hierarchical form at test value `alpha0`:
/// `Ψ_{k-1} = (X_{k-1}, V_{k-1}, …, V_{k-p+1})` with
/// `V_j = X_j − λ₁ρ_n(α₀) X_{j-1}`.
pub fn hierarchical_regressors(
    path: &ArPath,
    p: usize,
    alpha0: f64,
    c: f64,
    sign: RootSign,
) -> Result<Vec<Regressor>> {
    let root = sign.value() * rho_n(c, path.n(), alpha0)?;
    Ok(regressors_with_root(path, p, root))
}

fn regressors_with_root(path: &ArPath, p: usize, root: f64) -> Vec<Regressor> {
    let v = |j: isize| path.at(j) - root * path.at(j - 1);
    (1..=path.n() as isize)
        .map(|k| {
            let mut psi = Vec::with_capacity(p);
            psi.push(path.at(k - 1));
            psi.extend((1..p as isize).map(|i| v(k - i)));
            Regressor {
                psi,
                response: path.at(k),
            }
        })
        .collect()
}

/// Hierarchical OLS estimate `ϑ̂_n(α) = T_{n,n-1}^{-1}(α) Σ Ψ_{k-1}(α) X_k`.
pub fn fit_hierarchical(
    path: &ArPath,
    p: usize,
    alpha0: f64,
    c: f64,
    sign: RootSign,
) -> Result<HierarchicalFit> {
    check_order(path, p)?;
    let rows = hierarchical_regressors(path, p, alpha0, c, sign)?;
    let (gram, moment) = accumulate(p, rows.iter().map(|r| (r.psi.as_slice(), r.response)));
    let est = solve_normal_equations(&gram, &moment)?;
    Ok(HierarchicalFit {
        alpha_used: alpha0,
        c,
        n: path.n(),
        sign,
        leading_root: sign.value() * rho_n(c, path.n(), alpha0)?,
        v_hat: est[0],
        beta_hat: est.iter().skip(1).copied().collect(),
        gram,
        moment,
    })
}

/// `(ln c − ln(1 − λ₁ v))/ln n`, or `None` when `λ₁ v ≥ 1`.
pub fn alpha_from_root(v: f64, sign: RootSign, c: f64, n: usize) -> Option<f64> {
    let gap = 1.0 - sign.value() * v;
    if gap > 0.0 && n > 1 {
        Some((c.ln() - gap.ln()) / (n as f64).ln())
    } else {
        None
    }
}

/// α̂_n(α) from a hierarchical fit; `None` means undefined.
pub fn estimate_alpha(fit: &HierarchicalFit, c: f64, n: usize) -> Option<f64> {
    alpha_from_root(fit.v_hat, fit.sign, c, n)
}

/// Asymptotic confidence interval for α at confidence `level`, using the
/// plug-in α̂ in the rate, intersected with `[0, 1)`.
pub fn alpha_confidence_interval(
    alpha_hat: f64,
    pi_hat: f64,
    c: f64,
    n: usize,
    level: f64,
) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if !(alpha_hat > 0.0 && alpha_hat < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha estimate {alpha_hat} is outside (0, 1)"
        )));
    }
    if pi_hat == 0.0 || !pi_hat.is_finite() {
        return Err(Error::InvalidConfig("pi estimate must be finite and non-zero".into()));
    }
    let q = normal_quantile(0.5 * (1.0 + level))?;
    let nf = n as f64;
    let half = q * (2.0 / (c * pi_hat * pi_hat)).sqrt() / (nf.ln() * nf.powf(1.0 - alpha_hat).sqrt());
    Ok(Interval::new(
        (alpha_hat - half).max(0.0),
        (alpha_hat + half).min(below_one()),
    ))
}

/// Largest double strictly below 1.
pub(crate) fn below_one() -> f64 {
    1.0 - f64::EPSILON / 2.0
}

/// `p×(p-1)` matrix with ones on the diagonal and `-root` on the subdiagonal.
pub fn j_matrix(root: f64, p: usize) -> DMatrix<f64> {
    let cols = p.saturating_sub(1);
    let mut j = DMatrix::zeros(p, cols);
    for i in 0..cols {
        j[(i, i)] = 1.0;
        j[(i + 1, i)] = -root;
    }
    j
}

/// `v_pᵀ = (λ₁^{i-1})_{i=1..p}`, the direction along which `J` degenerates.
pub fn unit_root_direction(sign: RootSign, p: usize) -> DVector<f64> {
    DVector::from_iterator(p, (0..p).map(|i| sign.powi(i)))
}

/// `θ̃_n = Ĵ_n β̂_n + v̂_n e_p`, with `Ĵ_n` built from `v̂_n`.
pub fn corrected_theta(fit: &HierarchicalFit) -> Vec<f64> {
    let p = fit.beta_hat.len() + 1;
    let j = j_matrix(fit.v_hat, p);
    let mut theta = &j * DVector::from_column_slice(&fit.beta_hat);
    theta[0] += fit.v_hat;
    theta.iter().copied().collect()
}

/// Limit covariance `Σ_{p-1} = Σ_k Ā^k K (Āᵀ)^k` of the stable block.
#[derive(Debug, Clone)]
pub struct StableCovariance {
    pub sigma_matrix: DMatrix<f64>,
    pub truncation_terms: usize,
}

const MAX_TERMS: usize = 100_000;

pub fn stable_covariance(beta: &[f64], truncation_tol: f64) -> Result<StableCovariance> {
    let d = beta.len();
    if d == 0 {
        return Ok(StableCovariance {
            sigma_matrix: DMatrix::zeros(0, 0),
            truncation_terms: 0,
        });
    }
    let radius = spectral_radius(beta)?;
    if radius >= 1.0 - 1e-8 {
        return Err(Error::UnstableBlock { radius });
    }
    let a = companion_matrix(beta);
    let at = a.transpose();
    let mut term = DMatrix::zeros(d, d);
    term[(0, 0)] = 1.0;
    let mut sum = term.clone();
    let mut terms = 1;
    loop {
        term = &a * &term * &at;
        if term.amax() < truncation_tol {
            break;
        }
        if terms == MAX_TERMS {
            // not summable within the term cap
            return Err(Error::UnstableBlock { radius });
        }
        sum += &term;
        terms += 1;
    }
    Ok(StableCovariance {
        sigma_matrix: sum,
        truncation_terms: terms,
    })
}

/// Limit covariance `J Σ_{p-1}^{-1} Jᵀ` of `√n (θ̃_n − θ_n)`, with `J`
/// evaluated at the unit root `λ₁`.
pub fn corrected_theta_covariance(beta: &[f64], sign: RootSign) -> Result<DMatrix<f64>> {
    let p = beta.len() + 1;
    let j = j_matrix(sign.value(), p);
    if p == 1 {
        return Ok(DMatrix::zeros(1, 1));
    }
    let sigma = stable_covariance(beta, 1e-12)?.sigma_matrix;
    let inv = sigma.try_inverse().ok_or(Error::SingularGram)?;
    Ok(&j * inv * j.transpose())
}
