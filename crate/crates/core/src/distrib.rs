//! Normal and χ²₁ distribution functions.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF of the chi-square distribution with one degree of freedom.
pub fn chi1_cdf(q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        1.0 - erfc((q / 2.0).sqrt())
    }
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// Halley refinement against the complementary error function.
pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidLevel(prob));
    }
    let mut x = acklam(prob);
    for _ in 0..3 {
        // work in the tail that keeps the residual well conditioned
        let e = if x > 0.0 {
            (1.0 - prob) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
        } else {
            normal_cdf(x) - prob
        };
        let u = e / normal_pdf(x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Quantile of order `prob` of the χ²₁ distribution, computed as the square
/// of the normal quantile at `(1 + prob) / 2`.
pub fn chi1_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidLevel(prob));
    }
    // for small `prob` the normal quantile is evaluated through its linear
    // regime to avoid the cancellation in (1 + prob) / 2 - 1/2
    let z = if prob < 1e-6 {
        let half = 0.5 * prob;
        let z0 = half / normal_pdf(0.0);
        z0 + z0 * z0 * z0 / 6.0
    } else {
        normal_quantile(0.5 * (1.0 + prob))?
    };
    Ok(z * z)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}
