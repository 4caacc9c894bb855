//! Standard normal distribution function and quantile.
//!
//! `Φ(t) = erfc(−t/√2)/2` with the complementary error function from `libm`
//! (a port of the fdlibm rational approximations, accurate to a few ulps). The
//! quantile starts from `statrs`' inverse erfc and takes two Newton steps.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{invalid, Result};

/// `Φ(t)`
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// `1 − Φ(t)` without cancellation for large `t`.
pub fn std_normal_sf(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// `φ(t)`
pub fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Φ⁻¹(q)` for `q ∈ (0, 1)`.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("normal quantile needs q in (0, 1), got {q}"));
    }
    let mut t = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let pdf = std_normal_pdf(t);
        if pdf == 0.0 {
            break;
        }
        // Work in the tail that keeps precision.
        let err = if t > 0.0 {
            (1.0 - q) - std_normal_sf(t)
        } else {
            std_normal_cdf(t) - q
        };
        t -= err / pdf;
    }
    Ok(t)
}
