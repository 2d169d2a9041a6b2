//! Exact symbol error probability for constellations on a regular
//! `d`-dimensional grid with `n` points per axis, in white Gaussian noise.
//!
//! Every decision region of a grid point is, up to a permutation of axes, a
//! product of `d - k` half-lines and `k` bounded intervals, where `k` counts
//! the coordinates that are not on the edge of the grid. With `P_k` the prior
//! mass of such points, the correct-decision probability is the polynomial
//!
//! ```text
//! H(h) = sum_k P_k ((h + 1) / 2)^(d - k) h^k,    h = mu([-c, c]),  c = (a/2) e^t
//! ```
//!
//! and the error probability is `1 - H(h)`.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gaussian::{gh_at, q_function};

/// Below this `h` the ratio forms of the derivatives (which divide by `h`)
/// are replaced by plain product-rule differentiation.
pub const RATIO_FORM_MIN_H: f64 = 1e-8;

/// `n^d` grid points `(k_1 a, ..., k_d a)`, `k_l = 1..=n`, with priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConstellation {
    n: usize,
    d: usize,
    a: f64,
    priors: Vec<f64>,
}

impl GridConstellation {
    pub fn new(n: usize, d: usize, a: f64, priors: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return domain(format!("grid needs n >= 2 points per axis, got {n}"));
        }
        if d < 1 {
            return domain("grid needs d >= 1");
        }
        if !(a > 0.0 && a.is_finite()) {
            return domain(format!("grid spacing must be positive, got {a}"));
        }
        let size = checked_size(n, d)?;
        if priors.len() != size {
            return domain(format!("expected {size} priors, got {}", priors.len()));
        }
        if priors.iter().any(|&p| !(p >= 0.0)) {
            return domain("priors must be non-negative");
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("priors sum to {total}, not 1"));
        }
        Ok(Self { n, d, a, priors })
    }

    /// Equiprobable points.
    pub fn uniform(n: usize, d: usize, a: f64) -> Result<Self> {
        let size = checked_size(n, d)?;
        Self::new(n, d, a, vec![1.0 / size as f64; size])
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn spacing(&self) -> f64 {
        self.a
    }
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }
    pub fn size(&self) -> usize {
        self.priors.len()
    }

    /// Zero-based per-axis indices of point `i` (axis 0 varies fastest).
    pub fn indices(&self, mut i: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let k = i % self.n;
                i /= self.n;
                k
            })
            .collect()
    }

    /// Coordinates of every point, in index order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.size())
            .map(|i| self.indices(i).into_iter().map(|k| (k + 1) as f64 * self.a).collect())
            .collect()
    }
}

fn checked_size(n: usize, d: usize) -> Result<usize> {
    u32::try_from(d)
        .ok()
        .and_then(|d| n.checked_pow(d))
        .filter(|&m| m <= 1 << 26)
        .map_or_else(|| domain(format!("grid {n}^{d} is too large")), Ok)
}

/// Prior mass `(P_0, ..., P_d)` of points with exactly `k` interior coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTypeWeights {
    d: usize,
    p: Vec<f64>,
}

impl RegionTypeWeights {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return domain("need at least (P_0, P_1)");
        }
        if p.iter().any(|&x| !(x >= 0.0)) {
            return domain("region-type weights must be non-negative");
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("region-type weights sum to {total}, not 1"));
        }
        Ok(Self { d: p.len() - 1, p })
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn weights(&self) -> &[f64] {
        &self.p
    }
}

/// Sum the priors by region type.
pub fn classify_region_types(c: &GridConstellation) -> RegionTypeWeights {
    let mut p = vec![0.0; c.d + 1];
    for (i, &prior) in c.priors.iter().enumerate() {
        let interior = c.indices(i).into_iter().filter(|&k| k > 0 && k + 1 < c.n).count();
        p[interior] += prior;
    }
    RegionTypeWeights { d: c.d, p }
}

fn check_hk(k: usize, h: f64, d: usize) -> Result<()> {
    if k > d {
        return domain(format!("region type k = {k} exceeds d = {d}"));
    }
    if !(0.0..=1.0).contains(&h) {
        return domain(format!("h = {h} outside [0, 1]"));
    }
    Ok(())
}

/// `x^e`, treating `0^0` as one and returning zero for a zero coefficient so
/// that negative exponents arising from differentiation never blow up.
fn term(coef: f64, x: f64, e: i32) -> f64 {
    if coef == 0.0 { 0.0 } else { coef * x.powi(e) }
}

/// Single term `H_k(h) = ((h + 1) / 2)^(d - k) h^k`.
pub fn h_poly(k: usize, h: f64, d: usize) -> Result<f64> {
    check_hk(k, h, d)?;
    Ok((0.5 * (h + 1.0)).powi((d - k) as i32) * h.powi(k as i32))
}

/// `(H_k, H_k', H_k'')` by the product rule on `g^(d-k) h^k`, `g = (h+1)/2`.
pub fn h_poly_derivs_product(k: usize, h: f64, d: usize) -> Result<(f64, f64, f64)> {
    check_hk(k, h, d)?;
    let (j, k) = ((d - k) as i32, k as i32);
    let g = 0.5 * (h + 1.0);
    let (jf, kf) = (j as f64, k as f64);
    let value = g.powi(j) * h.powi(k);
    let d1 = term(0.5 * jf, g, j - 1) * h.powi(k) + g.powi(j) * term(kf, h, k - 1);
    let d2 = term(0.25 * jf * (jf - 1.0), g, j - 2) * h.powi(k)
        + 2.0 * term(0.5 * jf, g, j - 1) * term(kf, h, k - 1)
        + g.powi(j) * term(kf * (kf - 1.0), h, k - 2);
    Ok((value, d1, d2))
}

/// `(H_k, H_k', H_k'')`.
///
/// Uses the ratio forms `H_k' = H_k (hd + k) / (h (h + 1))` and
/// `H_k'' = H_k ((k^2 - k) + 2hk(d - 1) + h^2 d(d - 1)) / (h^2 (h + 1)^2)`
/// away from `h = 0`, where they have a removable singularity.
pub fn h_poly_derivs(k: usize, h: f64, d: usize) -> Result<(f64, f64, f64)> {
    if h < RATIO_FORM_MIN_H {
        return h_poly_derivs_product(k, h, d);
    }
    let value = h_poly(k, h, d)?;
    let (kf, df) = (k as f64, d as f64);
    let hh = h * (h + 1.0);
    let d1 = value * (h * df + kf) / hh;
    let d2 = value * ((kf * kf - kf) + 2.0 * h * kf * (df - 1.0) + h * h * df * (df - 1.0)) / (hh * hh);
    Ok((value, d1, d2))
}

/// `H(h) = sum_k P_k H_k(h)`.
pub fn big_h(w: &RegionTypeWeights, h: f64) -> Result<f64> {
    Ok(big_h_derivs(w, h)?.0)
}

/// `(H, H', H'')` at `h`.
pub fn big_h_derivs(w: &RegionTypeWeights, h: f64) -> Result<(f64, f64, f64)> {
    let mut acc = (0.0, 0.0, 0.0);
    for (k, &pk) in w.p.iter().enumerate() {
        let (v, d1, d2) = h_poly_derivs(k, h, w.d)?;
        acc.0 += pk * v;
        acc.1 += pk * d1;
        acc.2 += pk * d2;
    }
    Ok(acc)
}

/// Symbol error probability `p(n, d, t) = 1 - H(h((a/2) e^t))` with noise
/// standard deviation `sigma = e^(-t)`.
///
/// Each term `1 - g^(d-k) h^k` is evaluated as `-expm1(...)` in terms of the
/// one-sided tail `q = Q(c)`, so the result keeps full relative precision down
/// to the smallest representable probabilities.
pub fn ep_grid(c: &GridConstellation, t: f64) -> f64 {
    ep_from_weights(&classify_region_types(c), c.a, t)
}

/// [`ep_grid`] with the region-type weights already computed.
pub fn ep_from_weights(w: &RegionTypeWeights, a: f64, t: f64) -> f64 {
    let half_width = 0.5 * a * t.exp();
    let q = q_function(half_width);
    let log_g = (-q).ln_1p();
    let log_h = (-2.0 * q).ln_1p();
    let d = w.d as f64;
    w.p.iter()
        .enumerate()
        .filter(|(_, &pk)| pk > 0.0)
        .map(|(k, &pk)| {
            let kf = k as f64;
            let log_correct = if k == 0 { d * log_g } else { (d - kf) * log_g + kf * log_h };
            pk * -log_correct.exp_m1()
        })
        .sum()
}

/// `1 - sum_k P_k g^(d-k) h^k` with `g`, `h` taken directly from the Gaussian
/// measures. Loses relative precision once `p` drops below about `1e-15`.
pub fn ep_grid_direct(c: &GridConstellation, t: f64) -> f64 {
    let w = classify_region_types(c);
    let gh = gh_at(0.5 * c.a * t.exp()).expect("half-width is positive");
    1.0 - w
        .p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk * gh.g.powi((w.d - k) as i32) * gh.h.powi(k as i32))
        .sum::<f64>()
}

/// A point on the SNR axis. `t = log(1/sigma)`; the per-dimension SNR is
/// `s = ((a/2) e^t)^2` and `gamma_db = 10 log10 s`, which is affine in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub t: f64,
    pub gamma_db: f64,
}

impl SnrPoint {
    pub fn from_t(t: f64, a: f64) -> Self {
        Self {
            t,
            gamma_db: (20.0 / LN_10) * (t + (0.5 * a).ln()),
        }
    }

    pub fn from_db(gamma_db: f64, a: f64) -> Self {
        Self {
            t: gamma_db * LN_10 / 20.0 - (0.5 * a).ln(),
            gamma_db,
        }
    }

    /// Per-dimension SNR in linear scale.
    pub fn linear(&self) -> f64 {
        10f64.powf(self.gamma_db / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn region_types_small_grids() {
        let w = classify_region_types(&GridConstellation::uniform(2, 1, 2.0).unwrap());
        assert_eq!(w.weights(), &[1.0, 0.0]);
        let w = classify_region_types(&GridConstellation::uniform(4, 2, 2.0).unwrap());
        assert_eq!(w.weights(), &[4.0 / 16.0, 8.0 / 16.0, 4.0 / 16.0]);
        let w = classify_region_types(&GridConstellation::uniform(2, 3, 2.0).unwrap());
        assert_eq!(w.weights(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn region_types_match_uniform_closed_form() {
        for n in 2..=7u64 {
            for d in 1..=4u64 {
                let w = classify_region_types(&GridConstellation::uniform(n as usize, d as usize, 1.0).unwrap());
                for k in 0..=d {
                    let closed = binom(d, k) * 2f64.powi((d - k) as i32) * ((n - 2) as f64).powi(k as i32)
                        / (n as f64).powi(d as i32);
                    assert!((w.weights()[k as usize] - closed).abs() < 1e-14, "n={n} d={d} k={k}");
                }
            }
        }
    }

    #[test]
    fn nonuniform_priors() {
        // 3-point line: endpoints carry 0.1 and 0.3, the middle point 0.6.
        let c = GridConstellation::new(3, 1, 1.0, vec![0.1, 0.6, 0.3]).unwrap();
        let w = classify_region_types(&c);
        assert!((w.weights()[0] - 0.4).abs() < 1e-15 && (w.weights()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn invalid_constellations() {
        assert!(GridConstellation::new(1, 1, 1.0, vec![1.0]).is_err());
        assert!(GridConstellation::new(2, 0, 1.0, vec![1.0]).is_err());
        assert!(GridConstellation::new(2, 1, 0.0, vec![0.5, 0.5]).is_err());
        assert!(GridConstellation::new(2, 1, 1.0, vec![0.5, 0.4]).is_err());
        assert!(GridConstellation::new(2, 1, 1.0, vec![1.5, -0.5]).is_err());
        assert!(GridConstellation::new(2, 2, 1.0, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn h_poly_examples() {
        assert_eq!(h_poly(0, 0.0, 1).unwrap(), 0.5);
        for d in 1..8 {
            assert_eq!(h_poly(d, 1.0, d).unwrap(), 1.0);
        }
        assert!((h_poly(1, 0.5, 2).unwrap() - 0.375).abs() < 1e-16);
        assert!(h_poly(3, 0.5, 2).is_err());
        assert!(h_poly(0, 1.5, 2).is_err());
        assert!(h_poly(0, -0.1, 2).is_err());
    }

    #[test]
    fn h_poly_derivative_examples() {
        for h in [0.0, 1e-9, 0.3, 1.0] {
            let (_, d1, d2) = h_poly_derivs(0, h, 1).unwrap();
            assert!((d1 - 0.5).abs() < 1e-15 && d2.abs() < 1e-15);
            let (_, d1, d2) = h_poly_derivs(1, h, 1).unwrap();
            assert!((d1 - 1.0).abs() < 1e-15 && d2.abs() < 1e-15);
        }
        let eps = 1e-5;
        let (_, d1, d2) = h_poly_derivs(2, 0.7, 3).unwrap();
        let f = |x| h_poly(2, x, 3).unwrap();
        let fd1 = (f(0.7 + eps) - f(0.7 - eps)) / (2.0 * eps);
        let fd2 = (f(0.7 + eps) - 2.0 * f(0.7) + f(0.7 - eps)) / (eps * eps);
        assert!(((fd1 - d1) / d1).abs() < 1e-7);
        assert!(((fd2 - d2) / d2).abs() < 1e-5);
    }

    #[test]
    fn ratio_and_product_forms_agree() {
        for d in 1..=10 {
            for k in 0..=d {
                for i in 1..=50 {
                    let h = i as f64 / 50.0;
                    let r = h_poly_derivs(k, h, d).unwrap();
                    let p = h_poly_derivs_product(k, h, d).unwrap();
                    for (x, y) in [(r.0, p.0), (r.1, p.1), (r.2, p.2)] {
                        assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "d={d} k={k} h={h}");
                    }
                }
            }
        }
    }

    #[test]
    fn big_h_examples() {
        let w24 = classify_region_types(&GridConstellation::uniform(4, 2, 2.0).unwrap());
        assert!((big_h(&w24, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((big_h(&w24, 0.5).unwrap() - 0.390625).abs() < 1e-15);
        let w21 = RegionTypeWeights::new(vec![1.0, 0.0]).unwrap();
        for h in [0.0, 0.2, 0.9] {
            assert!((big_h(&w21, h).unwrap() - 0.5 * (h + 1.0)).abs() < 1e-16);
        }
    }

    #[test]
    fn big_h_derivatives_nonnegative() {
        for n in [2, 3, 5, 16] {
            for d in 1..=5 {
                let w = classify_region_types(&GridConstellation::uniform(n, d, 1.0).unwrap());
                for i in 0..=100 {
                    let (_, d1, d2) = big_h_derivs(&w, i as f64 / 100.0).unwrap();
                    assert!(d1 >= 0.0 && d2 >= 0.0);
                }
            }
        }
    }

    #[test]
    fn ep_grid_examples() {
        let bpsk = GridConstellation::uniform(2, 1, 2.0).unwrap();
        assert!((ep_grid(&bpsk, 0.0) - 0.15865525393145705).abs() < 1e-16);
        assert!((ep_grid(&bpsk, -40.0) - 0.5).abs() < 1e-15);
        let square = GridConstellation::uniform(2, 2, 2.0).unwrap();
        for t in [-1.0f64, 0.0, 0.7, 1.5] {
            let q = q_function(t.exp());
            let expect = 1.0 - (1.0 - q) * (1.0 - q);
            assert!((ep_grid(&square, t) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn ep_grid_matches_direct_form() {
        for n in [2, 3, 4, 8] {
            for d in 1..=4 {
                let c = GridConstellation::uniform(n, d, 2.0).unwrap();
                for i in 0..=40 {
                    let t = -3.0 + 0.1 * i as f64;
                    assert!((ep_grid(&c, t) - ep_grid_direct(&c, t)).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn ep_grid_strictly_decreasing() {
        for n in [2, 4, 16] {
            for d in [1, 3] {
                let c = GridConstellation::uniform(n, d, 2.0).unwrap();
                let mut prev = f64::INFINITY;
                for i in 0..200 {
                    let p = ep_grid(&c, -3.0 + 6.0 * i as f64 / 199.0);
                    assert!(p < prev && p > 0.0 && p < 1.0);
                    prev = p;
                }
            }
        }
    }

    #[test]
    fn spacing_is_a_shift_in_t() {
        let a1 = GridConstellation::uniform(4, 2, 2.0).unwrap();
        let a2 = GridConstellation::uniform(4, 2, 6.0).unwrap();
        let shift = 3f64.ln();
        for t in [-1.0, 0.0, 1.0] {
            assert!((ep_grid(&a2, t) - ep_grid(&a1, t + shift)).abs() < 1e-15);
        }
    }

    #[test]
    fn snr_point_round_trip() {
        let p = SnrPoint::from_t(0.3, 2.0);
        assert!((p.gamma_db - 20.0 * 0.3 / LN_10).abs() < 1e-14);
        let back = SnrPoint::from_db(p.gamma_db, 2.0);
        assert!((back.t - 0.3).abs() < 1e-15);
        assert!((SnrPoint::from_db(10.0, 4.0).linear() - 10.0).abs() < 1e-13);
        assert!((SnrPoint::from_t(0.0, 4.0).linear() - 4.0).abs() < 1e-14);
    }
}
