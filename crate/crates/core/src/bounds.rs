//! Bounds from a log-linear high-SNR asymptote `v(gbar) = K / gbar^D`.
//!
//! The global upper bound is `min(1/2, v)`. Shifting it along the SNR axis
//! until it touches the exact curve at one end of a region of interest
//! `[P_em, P_eM]` gives a local upper bound (touching at `P_em`) and a local
//! lower bound (touching at `P_eM`), both with closed-form inverses. Shifts
//! are kept in linear scale.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteSpec {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl AsymptoteSpec {
    pub fn new(k: f64, d: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite() && d > 0.0 && d.is_finite()) {
            return domain(format!("asymptote needs K > 0 and D > 0, got K = {k}, D = {d}"));
        }
        Ok(Self { k, d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub pe_min: f64,
    pub pe_max: f64,
}

impl RoiSpec {
    pub fn new(pe_min: f64, pe_max: f64) -> Result<Self> {
        if !(pe_min > 0.0 && pe_min < pe_max && pe_max < 0.5) {
            return domain(format!("ROI needs 0 < P_em < P_eM < 1/2, got [{pe_min}, {pe_max}]"));
        }
        Ok(Self { pe_min, pe_max })
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.pe_min && p <= self.pe_max
    }
}

fn check_gamma(g: f64) -> Result<()> {
    if !(g > 0.0) || g.is_nan() {
        return domain(format!("mean SNR must be positive, got {g}"));
    }
    Ok(())
}

/// `min(1/2, K / gbar^D)`.
pub fn ub_ep(asym: &AsymptoteSpec, gamma_bar: f64) -> Result<f64> {
    check_gamma(gamma_bar)?;
    Ok((asym.k / gamma_bar.powf(asym.d)).min(0.5))
}

/// `(K / p)^(1/D)` for `0 < p < 1/2`.
pub fn ub_inverse(asym: &AsymptoteSpec, pe_target: f64) -> Result<f64> {
    if !(pe_target > 0.0 && pe_target < 0.5) {
        return domain(format!("the upper bound is only invertible below 1/2, got {pe_target}"));
    }
    Ok((asym.k / pe_target).powf(1.0 / asym.d))
}

/// Probing schedule for [`estimate_asymptote`].
pub const PROBE_START: f64 = 10.0;
pub const PROBE_FACTOR: f64 = 3.1622776601683795;
pub const PROBE_MAX: f64 = 1e9;
pub const K_CONVERGENCE: f64 = 1e-4;
pub const SLOPE_TOLERANCE: f64 = 0.02;

/// Fit `K` of `K / gbar^D` with `D` fixed, probing `gbar = 10, 10^1.5, ...`
/// until successive `K` estimates agree to `1e-4` and the local log-log slope
/// is within 2% of `-D`.
pub fn estimate_asymptote<F>(curve: F, d_hint: f64) -> Result<AsymptoteSpec>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(d_hint > 0.0 && d_hint.is_finite()) {
        return domain(format!("diversity order must be positive, got {d_hint}"));
    }
    let mut g = PROBE_START;
    let mut prev_p = curve(g)?;
    let mut prev_k = g.powf(d_hint) * prev_p;
    while g * PROBE_FACTOR <= PROBE_MAX * (1.0 + 1e-12) {
        let g_next = g * PROBE_FACTOR;
        let p = curve(g_next)?;
        if !(p > 0.0 && prev_p > 0.0) {
            break;
        }
        let k = g_next.powf(d_hint) * p;
        let slope = (p / prev_p).ln() / PROBE_FACTOR.ln();
        let k_ok = ((k - prev_k) / prev_k).abs() < K_CONVERGENCE;
        let slope_ok = ((slope + d_hint) / d_hint).abs() <= SLOPE_TOLERANCE;
        if k_ok && slope_ok {
            return AsymptoteSpec::new(k, d_hint);
        }
        g = g_next;
        prev_p = p;
        prev_k = k;
    }
    Err(Error::NonConvergence(format!(
        "no log-linear asymptote with slope -{d_hint} up to mean SNR {PROBE_MAX:e}"
    )))
}

/// Local log-log slope `d ln p / d ln gbar` by a central difference.
pub fn loglog_slope<F>(curve: F, gamma_bar: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    check_gamma(gamma_bar)?;
    let r = 1.01f64;
    let (hi, lo) = (curve(gamma_bar * r)?, curve(gamma_bar / r)?);
    Ok((hi / lo).ln() / (2.0 * r.ln()))
}

/// Relative accuracy required of [`invert_ep`].
pub const INVERT_REL_TOL: f64 = 1e-10;

/// Solve `curve(gbar) = pe_target` on `[lo, hi]` in `ln gbar`.
pub fn invert_ep<F>(curve: F, pe_target: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(pe_target > 0.0 && pe_target < 1.0) {
        return domain(format!("target probability must be in (0, 1), got {pe_target}"));
    }
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return domain(format!("bracket [{lo}, {hi}] must be positive and ordered"));
    }
    let (plo, phi) = (curve(lo)?, curve(hi)?);
    if !(plo >= pe_target && phi <= pe_target) {
        return Err(Error::Bracket { lo, hi });
    }
    // Coarse monotonicity scan.
    let scan = 32;
    let mut prev = plo;
    for i in 1..=scan {
        let g = lo * (hi / lo).powf(i as f64 / scan as f64);
        let p = curve(g)?;
        if p > prev * (1.0 + 1e-9) {
            return Err(Error::NonMonotone { at: g });
        }
        prev = p;
    }
    let target = pe_target.ln();
    let mut err = None;
    let x = brent(
        |x| match curve(x.exp()) {
            Ok(p) => p.ln() - target,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        lo.ln(),
        hi.ln(),
        1e-13,
        300,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let g = x?.exp();
    let resid = ((curve(g)? - pe_target) / pe_target).abs();
    if resid > INVERT_REL_TOL {
        return Err(Error::NonConvergence(format!(
            "inversion residual {resid:e} at mean SNR {g:e} exceeds {INVERT_REL_TOL:e}"
        )));
    }
    Ok(g)
}

/// Find a bracket `[lo, hi]` around the SNR where `curve` crosses
/// `pe_target`, then invert. The search widens by decades from `[1, 10]`
/// within `[1e-6, 1e15]`.
pub fn invert_ep_auto<F>(curve: F, pe_target: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (1.0f64, 10.0f64);
    for _ in 0..40 {
        let (plo, phi) = (curve(lo)?, curve(hi)?);
        if plo >= pe_target && phi <= pe_target {
            return invert_ep(curve, pe_target, lo, hi);
        }
        if plo < pe_target {
            lo /= 10.0;
            if lo < 1e-6 {
                return Err(Error::Bracket { lo, hi });
            }
        }
        if phi > pe_target {
            hi *= 10.0;
            if hi > 1e15 {
                return Err(Error::Bracket { lo, hi });
            }
        }
    }
    Err(Error::Bracket { lo, hi })
}

/// Local bounds anchored on the exact curve at both ends of the ROI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBoundSet {
    roi: RoiSpec,
    asym: AsymptoteSpec,
    gamma_m: f64,
    gamma_big_m: f64,
    delta_m: f64,
    delta_big_m: f64,
}

/// Slack allowed on `delta >= 1` for rounding in the anchors.
const DELTA_SLACK: f64 = 1e-9;

impl LocalBoundSet {
    /// From known anchors `gamma_m = gbar(P_em)` and `gamma_M = gbar(P_eM)`.
    pub fn from_anchors(roi: RoiSpec, asym: AsymptoteSpec, gamma_m: f64, gamma_big_m: f64) -> Result<Self> {
        check_gamma(gamma_m)?;
        check_gamma(gamma_big_m)?;
        if !(gamma_m > gamma_big_m) {
            return domain(format!("anchor at P_em ({gamma_m}) must exceed anchor at P_eM ({gamma_big_m})"));
        }
        let delta_m = ub_inverse(&asym, roi.pe_min)? / gamma_m;
        let delta_big_m = ub_inverse(&asym, roi.pe_max)? / gamma_big_m;
        for (name, d) in [("delta_m", delta_m), ("delta_M", delta_big_m)] {
            if d < 1.0 - DELTA_SLACK {
                return domain(format!("{name} = {d} < 1: the asymptote is below the curve inside the ROI"));
            }
        }
        Ok(Self {
            roi,
            asym,
            gamma_m,
            gamma_big_m,
            delta_m,
            delta_big_m,
        })
    }

    pub fn roi(&self) -> RoiSpec {
        self.roi
    }
    pub fn asym(&self) -> AsymptoteSpec {
        self.asym
    }
    pub fn gamma_m(&self) -> f64 {
        self.gamma_m
    }
    /// Anchor at `P_eM`.
    pub fn gamma_big_m(&self) -> f64 {
        self.gamma_big_m
    }
    pub fn delta_m(&self) -> f64 {
        self.delta_m
    }
    pub fn delta_big_m(&self) -> f64 {
        self.delta_big_m
    }
}

/// Wire form of [`LocalBoundSet`]; shifts in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalBoundSetJson {
    pub pe_min: f64,
    pub pe_max: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub gamma_m: f64,
    #[serde(rename = "gamma_M")]
    pub gamma_big_m: f64,
    pub delta_m_db: f64,
    #[serde(rename = "delta_M_db")]
    pub delta_big_m_db: f64,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

impl From<&LocalBoundSet> for LocalBoundSetJson {
    fn from(b: &LocalBoundSet) -> Self {
        Self {
            pe_min: b.roi.pe_min,
            pe_max: b.roi.pe_max,
            k: b.asym.k,
            d: b.asym.d,
            gamma_m: b.gamma_m,
            gamma_big_m: b.gamma_big_m,
            delta_m_db: to_db(b.delta_m),
            delta_big_m_db: to_db(b.delta_big_m),
        }
    }
}

impl Serialize for LocalBoundSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LocalBoundSetJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LocalBoundSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = LocalBoundSetJson::deserialize(d)?;
        let roi = RoiSpec::new(j.pe_min, j.pe_max).map_err(serde::de::Error::custom)?;
        let asym = AsymptoteSpec::new(j.k, j.d).map_err(serde::de::Error::custom)?;
        LocalBoundSet::from_anchors(roi, asym, j.gamma_m, j.gamma_big_m).map_err(serde::de::Error::custom)
    }
}

/// Anchor the bounds on `curve` by inverting it at both ends of the ROI.
/// `anchors`, if given, replaces the inversion with user values
/// `(gamma_m, gamma_M)`.
pub fn build_local_bounds<F>(curve: F, asym: AsymptoteSpec, roi: RoiSpec, anchors: Option<(f64, f64)>) -> Result<LocalBoundSet>
where
    F: Fn(f64) -> Result<f64>,
{
    let (gm, gbm) = match anchors {
        Some(a) => a,
        None => (invert_ep_auto(&curve, roi.pe_min)?, invert_ep_auto(&curve, roi.pe_max)?),
    };
    LocalBoundSet::from_anchors(roi, asym, gm, gbm)
}

/// `min(P_eM, UB(gbar delta_m))`.
pub fn lub_ep(lb: &LocalBoundSet, gamma_bar: f64) -> Result<f64> {
    check_gamma(gamma_bar)?;
    Ok(lb.roi.pe_max.min(ub_ep(&lb.asym, gamma_bar * lb.delta_m)?))
}

/// `gamma_m (P_em / p)^(1/D)` for `p` in the ROI.
pub fn lub_inverse(lb: &LocalBoundSet, pe_target: f64) -> Result<f64> {
    roi_member(lb, pe_target)?;
    Ok(lb.gamma_m * (lb.roi.pe_min / pe_target).powf(1.0 / lb.asym.d))
}

/// `max(P_em, UB(gbar delta_M))`.
pub fn llb_ep(lb: &LocalBoundSet, gamma_bar: f64) -> Result<f64> {
    check_gamma(gamma_bar)?;
    Ok(lb.roi.pe_min.max(ub_ep(&lb.asym, gamma_bar * lb.delta_big_m)?))
}

/// `gamma_M (P_eM / p)^(1/D)` for `p` in the ROI.
pub fn llb_inverse(lb: &LocalBoundSet, pe_target: f64) -> Result<f64> {
    roi_member(lb, pe_target)?;
    Ok(lb.gamma_big_m * (lb.roi.pe_max / pe_target).powf(1.0 / lb.asym.d))
}

/// Relative slack at the ROI edges for the inverses, so that bound values
/// recomputed at the touch points still invert.
const ROI_EDGE_SLACK: f64 = 1e-12;

fn roi_member(lb: &LocalBoundSet, p: f64) -> Result<()> {
    let inside = p >= lb.roi.pe_min * (1.0 - ROI_EDGE_SLACK) && p <= lb.roi.pe_max * (1.0 + ROI_EDGE_SLACK);
    if !inside {
        return domain(format!("target {p} outside the ROI [{}, {}]", lb.roi.pe_min, lb.roi.pe_max));
    }
    Ok(())
}
