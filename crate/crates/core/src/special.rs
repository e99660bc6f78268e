//! Normal distribution helpers shared by the draw transform and Wald tests.

use statrs::function::erf::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF, evaluated through `erfc` so both tails keep full
/// relative precision.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `1 - Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}
