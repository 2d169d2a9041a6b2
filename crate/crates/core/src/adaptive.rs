//! Slow adaptive M-QAM: SNR thresholds, mean spectral efficiency and error
//! outage under log-normal shadowing of the mean SNR.
//!
//! Below the lowest threshold nothing is sent, so that range contributes zero
//! efficiency.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    build_local_bounds, estimate_asymptote, invert_ep_auto, llb_inverse, lub_inverse, to_db, AsymptoteSpec, RoiSpec,
};
use crate::error::{domain, Error, Result};
use crate::fading::{average_ep_gamma, FadingModel};
use crate::gaussian::q_function;
use crate::modem::{qam_bep_exact, QamSpec};
use crate::quad::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Exact,
    Lub,
    Llb,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "lub" => Ok(Self::Lub),
            "llb" => Ok(Self::Llb),
            _ => domain(format!("unknown threshold mode `{s}` (exact, lub, llb)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScheme {
    pub sizes: Vec<u32>,
    pub target_bep: f64,
    pub mode: ThresholdMode,
    pub fading: FadingModel,
    /// Diversity order of the asymptote; defaults to the fading model's.
    #[serde(default)]
    pub diversity: Option<u32>,
    /// Region of interest for the local bounds; defaults to
    /// `[target / 10, min(10 target, 0.4)]`.
    #[serde(default)]
    pub roi: Option<RoiSpec>,
}

impl AdaptiveScheme {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return domain("need at least one constellation size");
        }
        for &m in &self.sizes {
            QamSpec::new(m)?;
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return domain("constellation sizes must be strictly increasing");
        }
        if !(self.target_bep > 0.0 && self.target_bep < 0.5) {
            return domain(format!("target BEP must be in (0, 1/2), got {}", self.target_bep));
        }
        self.fading.validate()?;
        if let (Some(n), Some(d)) = (self.diversity, self.fading.diversity()) {
            if (n as f64 - d).abs() > 1e-12 {
                return domain(format!("diversity {n} does not match fading model {}", self.fading));
            }
        }
        if let Some(r) = self.roi {
            RoiSpec::new(r.pe_min, r.pe_max)?;
            if !r.contains(self.target_bep) {
                return domain("target BEP must lie inside the ROI");
            }
        }
        Ok(())
    }

    /// Diversity order used for the asymptote, if there is one.
    pub fn diversity_order(&self) -> Option<f64> {
        self.diversity.map(f64::from).or_else(|| self.fading.diversity())
    }

    pub fn roi_or_default(&self) -> Result<RoiSpec> {
        match self.roi {
            Some(r) => Ok(r),
            None => RoiSpec::new(self.target_bep / 10.0, (10.0 * self.target_bep).min(0.4)),
        }
    }
}

/// Quadrature settings used for the averaged curves here; tight enough for the
/// inversion residual check.
pub fn curve_quadrature() -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-12,
        ..QuadratureSpec::default()
    }
}

/// Fading-averaged BEP of `M`-QAM as a function of mean SNR.
pub fn averaged_qam_curve(m: u32, fading: FadingModel, q: QuadratureSpec) -> Result<impl Fn(f64) -> Result<f64>> {
    let spec = QamSpec::new(m)?;
    Ok(move |g: f64| average_ep_gamma(|x| qam_bep_exact(spec, x), &fading, g, &q).map(|r| r.value))
}

/// Required mean SNR in dB per size, by the scheme's mode.
pub fn thresholds(scheme: &AdaptiveScheme, q: &QuadratureSpec) -> Result<Vec<f64>> {
    scheme.validate()?;
    let mut out = Vec::with_capacity(scheme.sizes.len());
    for &m in &scheme.sizes {
        let curve = averaged_qam_curve(m, scheme.fading, *q)?;
        let g = match scheme.mode {
            ThresholdMode::Exact => invert_ep_auto(&curve, scheme.target_bep)?,
            mode => {
                let d = scheme.diversity_order().ok_or_else(|| {
                    Error::Domain(format!("fading model {} has no log-linear asymptote", scheme.fading))
                })?;
                let asym: AsymptoteSpec = estimate_asymptote(&curve, d)?;
                let lb = build_local_bounds(&curve, asym, scheme.roi_or_default()?, None)?;
                if mode == ThresholdMode::Lub {
                    lub_inverse(&lb, scheme.target_bep)?
                } else {
                    llb_inverse(&lb, scheme.target_bep)?
                }
            }
        };
        out.push(to_db(g));
    }
    if let Some(w) = out.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::NonMonotone { at: w[1] });
    }
    Ok(out)
}

/// Log-normal shadowing: mean SNR in dB is Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingSpec {
    pub median_db: f64,
    pub sigma_db: f64,
}

impl ShadowingSpec {
    pub fn new(median_db: f64, sigma_db: f64) -> Result<Self> {
        if !(sigma_db > 0.0) || !sigma_db.is_finite() || !median_db.is_finite() {
            return domain(format!("shadowing needs finite median and sigma > 0, got ({median_db}, {sigma_db})"));
        }
        Ok(Self { median_db, sigma_db })
    }

    /// `P(gbar_dB <= x)`.
    pub fn cdf(&self, x_db: f64) -> f64 {
        q_function((self.median_db - x_db) / self.sigma_db)
    }

    /// `P(gbar_dB > x)`.
    pub fn sf(&self, x_db: f64) -> f64 {
        q_function((x_db - self.median_db) / self.sigma_db)
    }
}

/// `eta = sum_j log2(M_j) P(T_j < gbar_dB <= T_{j+1})`, with `T_{J+1} = inf`.
pub fn mean_spectral_efficiency(sizes: &[u32], thresholds_db: &[f64], shadow: &ShadowingSpec) -> Result<f64> {
    ShadowingSpec::new(shadow.median_db, shadow.sigma_db)?;
    if sizes.len() != thresholds_db.len() || sizes.is_empty() {
        return domain("need one threshold per constellation size");
    }
    if thresholds_db.windows(2).any(|w| w[0] >= w[1]) {
        return domain("thresholds must be strictly increasing");
    }
    let mut eta = 0.0;
    for (j, &m) in sizes.iter().enumerate() {
        let upper = thresholds_db.get(j + 1).map_or(0.0, |&t| shadow.sf(t));
        let mass = (shadow.sf(thresholds_db[j]) - upper).max(0.0);
        eta += (m as f64).log2() * mass;
    }
    Ok(eta)
}

/// `P(gbar_dB < required)`: the chance that shadowing pushes the mean EP
/// above its target.
pub fn error_outage(required_gamma_db: f64, shadow: &ShadowingSpec) -> f64 {
    shadow.cdf(required_gamma_db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub scheme: AdaptiveScheme,
    pub shadowing: ShadowingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub thresholds_db: Vec<f64>,
    pub eta: f64,
    pub eo: Vec<f64>,
}

pub fn run_scenario(s: &Scenario, q: &QuadratureSpec) -> Result<ScenarioResult> {
    let th = thresholds(&s.scheme, q)?;
    let eta = mean_spectral_efficiency(&s.scheme.sizes, &th, &s.shadowing)?;
    let eo = th.iter().map(|&x| error_outage(x, &s.shadowing)).collect();
    Ok(ScenarioResult { thresholds_db: th, eta, eo })
}
