//! Scalar special functions and one-dimensional standard Gaussian measures.
//!
//! `erfc` is the FreeBSD msun rational approximation (via the `libm` crate),
//! which is accurate to about one ulp over the whole double range. Everything
//! else in the crate is built on top of [`erfc`] and [`q_function`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Beyond this half-width `h(c)` is taken to be exactly one; `erfc(40/sqrt 2)`
/// is far below the f64 rounding threshold of `1 - h`.
pub const H_SATURATION: f64 = 40.0;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF, computed through the tail on the far side so that
/// both small and large arguments keep full relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    q_function(-x)
}

/// Closed interval on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return domain(format!("interval [{lo}, {hi}] is not ordered"));
        }
        Ok(Self { lo, hi })
    }

    /// `[-c, c]`
    pub fn symmetric(c: f64) -> Result<Self> {
        Self::new(-c, c)
    }

    /// `[lo, +inf)`
    pub fn right_ray(lo: f64) -> Result<Self> {
        Self::new(lo, f64::INFINITY)
    }

    pub fn whole_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }
}

/// Standard Gaussian measure of an interval.
///
/// The difference is always formed between tails on the same side of zero,
/// so narrow intervals far out in a tail do not cancel to zero.
pub fn gaussian_measure(iv: Interval) -> f64 {
    let Interval { lo, hi } = iv;
    if lo >= hi {
        return 0.0;
    }
    let m = if lo >= 0.0 {
        q_function(lo) - q_function(hi)
    } else if hi <= 0.0 {
        q_function(-hi) - q_function(-lo)
    } else {
        1.0 - q_function(-lo) - q_function(hi)
    };
    m.clamp(0.0, 1.0)
}

/// The pair `g = mu([-c, inf))`, `h = mu([-c, c])` at half-width `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhPair {
    pub g: f64,
    pub h: f64,
    pub c: f64,
}

/// Evaluate `(g, h)` at `c > 0`. `g` is derived from `h` so that
/// `g = (h + 1) / 2` holds exactly.
pub fn gh_at(c: f64) -> Result<GhPair> {
    if !(c > 0.0) {
        return domain(format!("gh_at requires c > 0, got {c}"));
    }
    let h = if c > H_SATURATION {
        1.0
    } else {
        erf(c * FRAC_1_SQRT_2)
    };
    Ok(GhPair {
        g: 0.5 * (h + 1.0),
        h,
        c,
    })
}

/// Analytic `h'(c) = sqrt(2/pi) exp(-c^2/2)` and `h''(c) = -c h'(c)`.
pub fn h_derivatives(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return domain(format!("h_derivatives requires c > 0, got {c}"));
    }
    let d1 = (2.0 / PI).sqrt() * (-0.5 * c * c).exp();
    Ok((d1, -c * d1))
}
