//! Error-probability expressions for specific modulations.
//!
//! SNR arguments are symbol SNR `gamma = Es/N0` in linear scale unless noted.

use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gaussian::{erfc, q_function};
use crate::quad::{integrate, QuadResult, QuadratureSpec};

/// Square M-QAM, `M = 4^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QamSpec {
    m: u32,
}

impl QamSpec {
    pub fn new(m: u32) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() || !m.trailing_zeros().is_multiple_of(2) {
            return domain(format!("M = {m} is not a square QAM size (4, 16, 64, ...)"));
        }
        Ok(Self { m })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    /// Points per axis.
    pub fn side(&self) -> u32 {
        1 << (self.m.trailing_zeros() / 2)
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.m.trailing_zeros()
    }
}

/// M-PSK, `M >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PskSpec {
    m: u32,
}

impl PskSpec {
    pub fn new(m: u32) -> Result<Self> {
        if m < 2 {
            return domain(format!("PSK needs M >= 2, got {m}"));
        }
        Ok(Self { m })
    }

    pub fn order(&self) -> u32 {
        self.m
    }
}

fn quad_spec() -> QuadratureSpec {
    // A relative target also meets the 1e-12 absolute target for any
    // probability.
    QuadratureSpec::relative(1e-12)
}

/// Exact Gray-coded bit error probability of square M-QAM with coherent
/// detection at symbol SNR `gamma`:
///
/// ```text
/// P_b = 2 / (sqrt(M) log2 M) * sum_{k=1}^{log2 sqrt M} sum_{i=0}^{(1 - 2^-k) sqrt M - 1}
///       (-1)^floor(i 2^(k-1) / sqrt M) (2^(k-1) - floor(i 2^(k-1) / sqrt M + 1/2))
///       erfc((2i + 1) sqrt(3 gamma / (2 (M - 1))))
/// ```
pub fn qam_bep_exact(spec: QamSpec, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return domain(format!("symbol SNR must be positive, got {gamma}"));
    }
    let m = spec.m as u64;
    let side = spec.side() as u64;
    let levels = side.trailing_zeros();
    let scale = (3.0 * gamma / (2.0 * (m - 1) as f64)).sqrt();

    let mut terms = Vec::new();
    for k in 1..=levels {
        let half_block = 1u64 << (k - 1);
        // (1 - 2^-k) sqrt(M) is an integer because 2^k divides sqrt(M).
        let count = side - (side >> k);
        for i in 0..count {
            let flips = i * half_block / side;
            let weight = half_block as i64 - ((2 * i * half_block + side) / (2 * side)) as i64;
            if weight == 0 {
                continue;
            }
            let sign = if flips.is_multiple_of(2) { 1.0 } else { -1.0 };
            terms.push(sign * weight as f64 * erfc((2 * i + 1) as f64 * scale));
        }
    }
    terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let sum: f64 = terms.iter().sum();
    Ok(2.0 / (side as f64 * spec.bits_per_symbol() as f64) * sum)
}

/// M-PSK symbol error probability, with its quadrature error estimate.
///
/// ```text
/// P_s = (1/pi) int_0^{pi (M-1)/M} exp(-gamma sin^2(pi/M) / sin^2 theta) d theta
/// ```
pub fn psk_sep_detailed(spec: PskSpec, gamma: f64) -> Result<QuadResult> {
    if !(gamma > 0.0) {
        return domain(format!("symbol SNR must be positive, got {gamma}"));
    }
    let s2 = (PI / spec.m as f64).sin().powi(2);
    let upper = PI * (spec.m - 1) as f64 / spec.m as f64;
    let r = integrate(
        |theta: f64| {
            let st = theta.sin();
            if st == 0.0 { 0.0 } else { (-gamma * s2 / (st * st)).exp() }
        },
        0.0,
        upper,
        &quad_spec(),
    )?;
    Ok(QuadResult {
        value: r.value * FRAC_1_PI,
        abs_err: r.abs_err * FRAC_1_PI,
        evals: r.evals,
    })
}

pub fn psk_sep(spec: PskSpec, gamma: f64) -> Result<f64> {
    Ok(psk_sep_detailed(spec, gamma)?.value)
}

/// Half-angle of the three sectors the error region is split into.
fn parity_beta() -> f64 {
    (2.0f64 / 3.0).sqrt().asin()
}

/// Symbol error probability of the (3,2) single-parity-check code with
/// antipodal signalling: the four even-weight vertices of the cube
/// `{-1, 1}^3`, noise `sigma = e^(-t)` per coordinate.
///
/// The error region of a codeword is split into three congruent sectors, one
/// per decision face. In cylindrical coordinates about the face normal each
/// sector contributes
///
/// ```text
/// Q(D) - (1/pi) int_{-pi/2 + beta}^{pi/2} Q(D sqrt(1 + S^2)) / sqrt(1 + S^2) d theta
/// ```
///
/// with `D = sqrt(2) e^t` the distance to the face, `S(theta) = 1 / (sqrt(3) cos theta)`
/// and `beta = asin(sqrt(2/3))`.
pub fn parity_bpsk_ep_detailed(t: f64) -> Result<QuadResult> {
    if !t.is_finite() {
        return domain(format!("t must be finite, got {t}"));
    }
    let dist = SQRT_2 * t.exp();
    let beta = parity_beta();
    let r = integrate(
        |theta: f64| {
            let s = 1.0 / (3f64.sqrt() * theta.cos());
            let stretch = (1.0 + s * s).sqrt();
            if !stretch.is_finite() {
                return 0.0;
            }
            q_function(dist * stretch) / stretch
        },
        -0.5 * PI + beta,
        0.5 * PI,
        &quad_spec(),
    )?;
    let sector = q_function(dist) - FRAC_1_PI * r.value;
    Ok(QuadResult {
        value: 3.0 * sector,
        abs_err: 3.0 * FRAC_1_PI * r.abs_err,
        evals: r.evals,
    })
}

pub fn parity_bpsk_ep(t: f64) -> Result<f64> {
    Ok(parity_bpsk_ep_detailed(t)?.value)
}

/// The four codewords of the (3,2) parity-check code, as used by
/// [`parity_bpsk_ep`].
pub fn parity_codewords() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 1.0, 1.0],
        vec![1.0, -1.0, -1.0],
        vec![-1.0, 1.0, -1.0],
        vec![-1.0, -1.0, 1.0],
    ]
}

/// BPSK bit error probability averaged over Rayleigh fading,
/// `(1 - sqrt(gbar / (1 + gbar))) / 2`, written without cancellation.
pub fn rayleigh_bpsk_avg(gamma_bar: f64) -> Result<f64> {
    if !(gamma_bar > 0.0) {
        return domain(format!("mean SNR must be positive, got {gamma_bar}"));
    }
    let s = (gamma_bar / (1.0 + gamma_bar)).sqrt();
    Ok(0.5 / ((1.0 + gamma_bar) * (1.0 + s)))
}

/// BPSK in AWGN at bit SNR `gamma`: `Q(sqrt(2 gamma))`.
pub fn bpsk_bep(gamma: f64) -> f64 {
    q_function((2.0 * gamma).sqrt())
}
