//! Thin wrappers over `statrs` special functions with the argument ranges used
//! by the kernel families.

use statrs::function::{beta, erf, gamma as sg};

pub fn gamma(x: f64) -> f64 {
    sg::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    sg::ln_gamma(x)
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        sg::gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x), a > 0, x >= 0.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        sg::gamma_ur(a, x)
    }
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_i(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

pub fn erfc(x: f64) -> f64 {
    erf::erfc(x)
}

pub fn erfc_inv(x: f64) -> f64 {
    erf::erfc_inv(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
