//! Gaussian tail special functions and the first-order expansions used to
//! convexify the power subproblem.
//!
//! `Q(x)` is evaluated through `erfc` on the central range. Past
//! [`TAIL_SWITCH`] the tail is carried in the log domain through the Mills
//! ratio `Q(x) / φ(x)`, whose continued fraction converges quickly there, so
//! `log Q` stays finite long after `Q` itself underflows.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use crate::error::{Error, Result};

/// Argument above which `log_q` and its derivative use the Mills-ratio tail.
pub const TAIL_SWITCH: f64 = 8.0;

/// ln(√(2π))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `log2(e)`, the conversion factor between nats and bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// One evaluation of the Gaussian tail at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QEval {
    pub x: f64,
    pub q: f64,
    pub log_q: f64,
}

impl QEval {
    pub fn at(x: f64) -> Result<Self> {
        Ok(Self {
            x,
            q: q_function(x)?,
            log_q: log_q(x)?,
        })
    }
}

fn check(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Mills ratio `Q(x)/φ(x)` for `x > 0` by the modified Lentz algorithm on
/// `1/(x + 1/(x + 2/(x + 3/(x + ...))))`.
fn mills_ratio(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Upper tail probability of the standard normal.
pub fn q_function(x: f64) -> Result<f64> {
    check(x)?;
    Ok(0.5 * libm::erfc(x * FRAC_1_SQRT_2))
}

/// Natural logarithm of `Q(x)`.
pub fn log_q(x: f64) -> Result<f64> {
    check(x)?;
    Ok(if x > TAIL_SWITCH {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    } else if x < -TAIL_SWITCH {
        (-0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln_1p()
    } else {
        (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln()
    })
}

/// `d/dx log Q(x) = -φ(x)/Q(x)`, strictly negative.
pub fn log_q_derivative(x: f64) -> Result<f64> {
    check(x)?;
    Ok(if x > TAIL_SWITCH {
        -1.0 / mills_ratio(x)
    } else {
        -std_normal_pdf(x) / (0.5 * libm::erfc(x * FRAC_1_SQRT_2))
    })
}

/// Tangent of `(x + y)^2` at `(x0, y0)`; a global under-estimator.
pub fn tangent_l1(x0: f64, y0: f64, x: f64, y: f64) -> f64 {
    let s0 = x0 + y0;
    2.0 * s0 * (x - x0 + y - y0) + s0 * s0
}

/// Tangent of `(x - y)^2` at `(x0, y0)`; a global under-estimator.
pub fn tangent_l2(x0: f64, y0: f64, x: f64, y: f64) -> f64 {
    let d0 = x0 - y0;
    2.0 * d0 * (x - x0 - y + y0) + d0 * d0
}

/// Tangent of `-1/(1 + x)^2` at `x0 >= 0`; an over-estimator on `x > -1`.
pub fn tangent_l3(x0: f64, x: f64) -> f64 {
    let b = 1.0 + x0;
    2.0 / (b * b * b) * (x - x0) - 1.0 / (b * b)
}

/// `log2(1 + x)`.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_at_zero_is_half() {
        assert_eq!(q_function(0.0).unwrap(), 0.5);
        assert_relative_eq!(log_q(0.0).unwrap(), 0.5f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn q_reflection() {
        for &x in &[0.3, 1.0, 3.0, 6.5] {
            let lhs = q_function(-x).unwrap();
            let rhs = 1.0 - q_function(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn derivative_at_zero_closed_form() {
        let d = log_q_derivative(0.0).unwrap();
        assert_relative_eq!(d, -(2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn derivative_negative_everywhere() {
        let mut x = -30.0;
        while x < 60.0 {
            assert!(log_q_derivative(x).unwrap() < 0.0, "x={x}");
            x += 0.37;
        }
    }

    #[test]
    fn log_q_finite_deep_in_tail() {
        let v = log_q(40.0).unwrap();
        assert!(v.is_finite() && v < -800.0);
        assert!(log_q(1e3).unwrap().is_finite());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(q_function(f64::NAN), Err(Error::Domain(_))));
        assert!(log_q(f64::INFINITY).is_err());
        assert!(log_q_derivative(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn tangent_examples() {
        assert_eq!(tangent_l1(1.0, 1.0, 1.0, 1.0), 4.0);
        assert_eq!(tangent_l2(2.0, 1.0, 3.0, 1.0), 3.0);
        assert_eq!(tangent_l3(0.0, 1.0), 1.0);
    }

    #[test]
    fn tail_switch_is_continuous() {
        let below = (0.5 * libm::erfc(TAIL_SWITCH * FRAC_1_SQRT_2)).ln();
        let above = -0.5 * TAIL_SWITCH * TAIL_SWITCH - LN_SQRT_2PI + mills_ratio(TAIL_SWITCH).ln();
        assert_relative_eq!(below, above, max_relative = 1e-13);
    }
}
