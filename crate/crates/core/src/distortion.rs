//! Expected quantization distortion for zero-mean Gaussian inputs.
//!
//! For a quantizer with reconstruction levels `v_i` and decision cells
//! `[a_i, b_i]`, the expected squared error over `r ~ N(0, sigma^2)` is a sum
//! of closed-form Gaussian moment integrals per cell, plus the clipping term
//! for the probability mass outside `[r_l, r_u]` (the quantizer clamps those
//! inputs to the range endpoints). No sampling or quadrature is involved, so
//! the result is exact to floating-point precision.

use crate::piecewise::PiecewiseParams;
use crate::uniform::UniformParams;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF via erfc for accuracy in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian moments of order 0..2 over `[a, b]` for `N(0, sigma^2)`:
/// returns (mass, first moment, second moment).
fn moments(a: f64, b: f64, sigma: f64) -> (f64, f64, f64) {
    let alpha = a / sigma;
    let beta = b / sigma;
    let m0 = normal_cdf(beta) - normal_cdf(alpha);
    let m1 = sigma * (normal_pdf(alpha) - normal_pdf(beta));
    let m2 = sigma * sigma * (m0 + alpha * normal_pdf(alpha) - beta * normal_pdf(beta));
    (m0, m1, m2)
}

/// `E[(x - v)^2; a <= x <= b]` for `x ~ N(0, sigma^2)`.
fn squared_error_mass(v: f64, a: f64, b: f64, sigma: f64) -> f64 {
    let (m0, m1, m2) = moments(a, b, sigma);
    m2 - 2.0 * v * m1 + v * v * m0
}

/// Expected squared error of nearest-level reconstruction over `[a, b]`,
/// given ascending reconstruction levels spanning the interval.
pub fn gaussian_cell_mse(levels: &[f64], a: f64, b: f64, sigma: f64) -> f64 {
    if b <= a || levels.is_empty() {
        return 0.0;
    }
    if levels.len() == 1 {
        return squared_error_mass(levels[0], a, b, sigma);
    }
    let mut total = 0.0;
    for (i, &v) in levels.iter().enumerate() {
        let cell_lo = if i == 0 { a } else { (levels[i - 1] + v) / 2.0 };
        let cell_hi = if i == levels.len() - 1 { b } else { (v + levels[i + 1]) / 2.0 };
        let lo = cell_lo.max(a);
        let hi = cell_hi.min(b);
        if hi > lo {
            total += squared_error_mass(v, lo, hi, sigma);
        }
    }
    total
}

/// Clipping distortion: `E[(x - r_u)^2; x > r_u] + E[(x - r_l)^2; x < r_l]`
/// for `x ~ N(0, sigma^2)`. The range endpoints are on the reconstruction
/// grid, so clamped mass lands exactly there.
pub fn gaussian_clip_mse(r_l: f64, r_u: f64, sigma: f64) -> f64 {
    let upper = |t: f64| {
        let ts = t / sigma;
        sigma * sigma * ((1.0 + ts * ts) * (1.0 - normal_cdf(ts)) - ts * normal_pdf(ts))
    };
    upper(r_u) + upper(-r_l)
}

fn grid(params: &UniformParams) -> Vec<f64> {
    if params.is_degenerate() {
        return vec![params.range().0];
    }
    (params.code_min()..=params.code_max())
        .map(|c| params.dequantize(c).expect("grid codes are in domain"))
        .collect()
}

/// Expected squared error of a uniform quantizer on `N(0, sigma^2)` inputs,
/// clipping included.
pub fn uniform_expected_mse(params: &UniformParams, sigma: f64) -> f64 {
    let (r_l, r_u) = params.range();
    let levels: Vec<f64> = grid(params)
        .into_iter()
        .filter(|v| *v >= r_l - params.scale() && *v <= r_u + params.scale())
        .collect();
    gaussian_clip_mse(r_l, r_u, sigma) + gaussian_cell_mse(&levels, r_l, r_u, sigma)
}

/// Expected squared error of a piecewise quantizer on `N(0, sigma^2)` inputs,
/// clipping included. Each piece contributes its own cell sum over its
/// sub-interval.
pub fn piecewise_expected_mse(params: &PiecewiseParams, sigma: f64) -> f64 {
    let (r_l, r_u) = params.range();
    let (p_l, p_u) = params.breakpoints();
    let mut total = gaussian_clip_mse(r_l, r_u, sigma);
    total += gaussian_cell_mse(&grid(params.lower_tail()), r_l, p_l, sigma);
    total += gaussian_cell_mse(&grid(params.central()), p_l, p_u, sigma);
    total += gaussian_cell_mse(&grid(params.upper_tail()), p_u, r_u, sigma);
    total
}
