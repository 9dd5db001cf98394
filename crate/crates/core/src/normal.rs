//! Standard normal distribution function.

use crate::error::{invalid, Result};

/// Upper tail `1 - Φ(x)` for `x >= 0`, via the complementary error function.
fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `Φ(x)`, the standard normal CDF.
///
/// Both halves are computed from the same tail value, so `Φ(-x)` and
/// `1 - Φ(x)` agree to rounding.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return invalid(format!("normal cdf argument must be finite, got {x}"));
    }
    Ok(if x >= 0.0 {
        1.0 - upper_tail(x)
    } else {
        upper_tail(-x)
    })
}

/// `1 - Φ(x)` without cancellation for large `x`.
pub fn std_normal_sf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return invalid(format!("normal tail argument must be finite, got {x}"));
    }
    Ok(if x >= 0.0 {
        upper_tail(x)
    } else {
        1.0 - upper_tail(-x)
    })
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_and_reflection() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        for i in 0..=800 {
            let x = i as f64 * 0.01;
            let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap();
            assert!((s - 1.0).abs() <= 1e-15, "x = {x}: {s}");
        }
    }

    #[test]
    fn known_quantiles() {
        assert!((std_normal_cdf(1.959963984540054).unwrap() - 0.975).abs() < 1e-12);
        assert!((std_normal_cdf(-1.6448536269514722).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn survival_complements_cdf() {
        for x in [-3.0, -0.5, 0.0, 0.7, 2.0, 6.0] {
            let s = std_normal_sf(x).unwrap() + std_normal_cdf(x).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
        }
        // Far tail keeps relative precision.
        let q = std_normal_sf(10.0).unwrap();
        assert!((q / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }
}
