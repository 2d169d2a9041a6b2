//! Fading models through the density of `b = ln a^2`, and the averaging
//! operator `pbar(t) = E_b[p(t + b/2)]`.
//!
//! Shifting `t` by `b/2` multiplies the SNR by `a^2 = e^b`, so in SNR terms
//! `pbar(gbar) = E[p(gbar a^2)]`. Nakagami is unit-mean in `a^2`. The
//! log-normal model is unit-median (`b` is zero-mean Gaussian), so its mean
//! gain is `exp(sigma_b^2 / 2)`. MRC over `N` unit-mean Rayleigh branches has
//! `E[a^2] = N`; `gbar` is then the per-branch mean. [`FadingModel::mean_gain`]
//! reports these factors.

use std::cell::RefCell;
use std::f64::consts::{LN_10, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{domain, Error, Result};
use crate::gaussian::normal_cdf;
use crate::quad::{integrate_pieces, QuadResult, QuadratureSpec};
use crate::roots::brent;
use crate::verify::{Location, ViolationReport};

/// `10 / ln 10`, dB per neper of power.
pub const NU: f64 = 10.0 / LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FadingModel {
    Nakagami { m: f64 },
    LogNormal { sigma_db: f64 },
    MrcRayleigh { n: u32 },
    None,
}

impl FadingModel {
    pub fn nakagami(m: f64) -> Result<Self> {
        if !(m >= 0.5) || !m.is_finite() {
            return domain(format!("Nakagami m must be >= 1/2, got {m}"));
        }
        Ok(Self::Nakagami { m })
    }

    pub fn rayleigh() -> Self {
        Self::Nakagami { m: 1.0 }
    }

    pub fn lognormal(sigma_db: f64) -> Result<Self> {
        if !(sigma_db > 0.0) || !sigma_db.is_finite() {
            return domain(format!("log-normal sigma_dB must be positive, got {sigma_db}"));
        }
        Ok(Self::LogNormal { sigma_db })
    }

    pub fn mrc(n: u32) -> Result<Self> {
        if n < 1 {
            return domain("MRC needs at least one branch");
        }
        Ok(Self::MrcRayleigh { n })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Nakagami { m } => Self::nakagami(m).map(|_| ()),
            Self::LogNormal { sigma_db } => Self::lognormal(sigma_db).map(|_| ()),
            Self::MrcRayleigh { n } => Self::mrc(n).map(|_| ()),
            Self::None => Ok(()),
        }
    }

    /// `E[a^2]`.
    pub fn mean_gain(&self) -> f64 {
        match *self {
            Self::Nakagami { .. } | Self::None => 1.0,
            Self::LogNormal { sigma_db } => (0.5 * (sigma_db / NU).powi(2)).exp(),
            Self::MrcRayleigh { n } => n as f64,
        }
    }

    /// High-SNR diversity order, where the model has one.
    pub fn diversity(&self) -> Option<f64> {
        match *self {
            Self::Nakagami { m } => Some(m),
            Self::MrcRayleigh { n } => Some(n as f64),
            Self::LogNormal { .. } | Self::None => Option::None,
        }
    }

    /// Mode of the density of `b`.
    fn mode(&self) -> f64 {
        match *self {
            Self::MrcRayleigh { n } => (n as f64).ln(),
            _ => 0.0,
        }
    }
}

impl fmt::Display for FadingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Nakagami { m } => write!(f, "nakagami:m={m}"),
            Self::LogNormal { sigma_db } => write!(f, "lognormal:sdb={sigma_db}"),
            Self::MrcRayleigh { n } => write!(f, "mrc:n={n}"),
            Self::None => write!(f, "none"),
        }
    }
}

/// Parse `key=value` out of a `kind:key=value` spec.
fn param(spec: &str, rest: &str, key: &str) -> Result<String> {
    match rest.split_once('=') {
        Some((k, v)) if k.trim().eq_ignore_ascii_case(key) => Ok(v.trim().to_string()),
        _ => domain(format!("expected `{key}=<value>` in fading spec `{spec}`")),
    }
}

impl FromStr for FadingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |key: &str| -> Result<f64> {
            let v = param(s, rest, key)?;
            v.parse().map_err(|_| Error::Domain(format!("bad number `{v}` in fading spec `{s}`")))
        };
        match kind.to_ascii_lowercase().as_str() {
            "none" if rest.is_empty() => Ok(Self::None),
            "rayleigh" if rest.is_empty() => Ok(Self::rayleigh()),
            "nakagami" => Self::nakagami(num("m")?),
            "lognormal" => Self::lognormal(num("sdb")?),
            "mrc" => {
                let v = param(s, rest, "n")?;
                let n: u32 = v.parse().map_err(|_| Error::Domain(format!("bad branch count `{v}` in `{s}`")))?;
                Self::mrc(n)
            }
            _ => domain(format!("unknown fading spec `{s}` (nakagami:m=.., lognormal:sdb=.., mrc:n=.., none)")),
        }
    }
}

impl TryFrom<String> for FadingModel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FadingModel> for String {
    fn from(m: FadingModel) -> String {
        m.to_string()
    }
}

fn no_density<T>() -> Result<T> {
    domain("the `none` fading model has no density")
}

/// `ln f_b(z)`.
pub fn ln_density_b(model: &FadingModel, z: f64) -> Result<f64> {
    model.validate()?;
    Ok(match *model {
        FadingModel::Nakagami { m } => m * m.ln() - ln_gamma(m) + m * (z - z.exp()),
        FadingModel::LogNormal { sigma_db } => {
            (NU / ((2.0 * PI).sqrt() * sigma_db)).ln() - 0.5 * (NU * z / sigma_db).powi(2)
        }
        FadingModel::MrcRayleigh { n } => {
            let nf = n as f64;
            nf * z - z.exp() - ln_gamma(nf)
        }
        FadingModel::None => return no_density(),
    })
}

/// Density of `b = ln a^2`.
pub fn density_b(model: &FadingModel, z: f64) -> Result<f64> {
    if z == f64::NEG_INFINITY {
        model.validate()?;
        return match model {
            FadingModel::None => no_density(),
            _ => Ok(0.0),
        };
    }
    Ok(ln_density_b(model, z)?.exp())
}

/// `P(b <= z)`.
pub fn cdf_b(model: &FadingModel, z: f64) -> Result<f64> {
    model.validate()?;
    Ok(match *model {
        FadingModel::Nakagami { m } => gamma_lr(m, m * z.exp()),
        FadingModel::LogNormal { sigma_db } => normal_cdf(NU * z / sigma_db),
        FadingModel::MrcRayleigh { n } => gamma_lr(n as f64, z.exp()),
        FadingModel::None => return no_density(),
    })
}

/// `P(b > z)`, accurate far into the upper tail.
pub fn upper_tail_b(model: &FadingModel, z: f64) -> Result<f64> {
    model.validate()?;
    Ok(match *model {
        FadingModel::Nakagami { m } => gamma_ur(m, m * z.exp()),
        FadingModel::LogNormal { sigma_db } => normal_cdf(-NU * z / sigma_db),
        FadingModel::MrcRayleigh { n } => gamma_ur(n as f64, z.exp()),
        FadingModel::None => return no_density(),
    })
}

/// Smallest `z` with `P(b > z) <= cut`.
pub fn upper_cut(model: &FadingModel, cut: f64) -> Result<f64> {
    if !(cut > 0.0 && cut < 0.5) {
        return domain(format!("tail mass cut must be in (0, 1/2), got {cut}"));
    }
    match *model {
        FadingModel::LogNormal { sigma_db } => Ok(sigma_db / NU * SQRT_2 * erfc_inv(2.0 * cut)),
        FadingModel::None => no_density(),
        _ => {
            let lo = model.mode() - 1.0;
            let hi = model.mode() + 10.0;
            brent(|z| upper_tail_b(model, z).unwrap_or(f64::NAN) - cut, lo, hi, 1e-10, 200)
        }
    }
}

/// `d^2/dz^2 ln f_b(z)`.
pub fn ln_density_b_second(model: &FadingModel, z: f64) -> Result<f64> {
    model.validate()?;
    Ok(match *model {
        FadingModel::Nakagami { m } => -m * z.exp(),
        FadingModel::LogNormal { sigma_db } => -(NU / sigma_db).powi(2),
        FadingModel::MrcRayleigh { .. } => -z.exp(),
        FadingModel::None => return no_density(),
    })
}

/// Analytic second derivative of `ln f_b` on `steps` points of `[lo, hi]`;
/// any positive value is reported.
pub fn check_density_logconcave(model: &FadingModel, lo: f64, hi: f64, steps: usize) -> Result<Vec<ViolationReport>> {
    if steps < 2 || !(lo < hi) {
        return domain("need lo < hi and at least two points");
    }
    let mut out = Vec::new();
    for i in 0..steps {
        let z = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
        let s = ln_density_b_second(model, z)?;
        if s > 0.0 {
            out.push(ViolationReport {
                location: Location {
                    check: format!("density_logconcave:{model}"),
                    d: None,
                    k: None,
                    m: None,
                    at: z,
                },
                lhs: 0.0,
                rhs: s,
                slack: -s,
            });
        }
    }
    Ok(out)
}

/// `int f_b` over the whole line.
pub fn density_mass(model: &FadingModel, q: &QuadratureSpec) -> Result<QuadResult> {
    let mode = model.mode();
    integrate_pieces(
        |z| density_b(model, z).unwrap_or(f64::NAN),
        &[f64::NEG_INFINITY, mode - 5.0, mode, mode + 3.0, f64::INFINITY],
        q,
    )
}

/// `E_b[curve(t + b/2)]` with its quadrature error.
///
/// The lower tail of `b` is integrated out to `-inf` (the curve is largest
/// there, so truncating it would bias deep-tail values); the upper tail is cut
/// where it holds `q.tail_mass_cut` of the mass, which bounds the relative
/// truncation error by the same amount for a decreasing curve. Subdivision
/// stops once the error estimate is below both `q.rel_tol` relative to the
/// result and `q.abs_tol`.
pub fn average_ep<F>(curve: F, model: &FadingModel, t: f64, q: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64>,
{
    q.validate()?;
    model.validate()?;
    if !t.is_finite() {
        return domain(format!("t must be finite, got {t}"));
    }
    if let FadingModel::None = model {
        return Ok(QuadResult {
            value: curve(t)?,
            abs_err: 0.0,
            evals: 1,
        });
    }
    let z_hi = upper_cut(model, q.tail_mass_cut)?;
    let mut pts: Vec<f64> = (-4..=4).map(|j| -2.0 * t + 2.0 * j as f64).collect();
    let mode = model.mode();
    pts.extend((-6..=2).map(|j| mode + j as f64));
    pts.retain(|&z| z < z_hi - 1e-9);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut breaks = Vec::with_capacity(pts.len() + 2);
    breaks.push(f64::NEG_INFINITY);
    breaks.extend(pts);
    breaks.push(z_hi);

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |b: f64| -> f64 {
        let fb = match density_b(model, b) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                return f64::NAN;
            }
        };
        if fb == 0.0 {
            return 0.0;
        }
        match curve(t + 0.5 * b) {
            Ok(p) => p * fb,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let rel = QuadratureSpec {
        abs_tol: f64::MIN_POSITIVE,
        ..*q
    };
    let mut r = integrate_pieces(integrand, &breaks, &rel);
    if matches!(r, Ok(ref v) if v.abs_err > q.abs_tol) {
        // Large values: the relative rule stopped above abs_tol, so refine
        // on the absolute one.
        let abs = QuadratureSpec {
            rel_tol: f64::MIN_POSITIVE,
            ..*q
        };
        r = integrate_pieces(integrand, &breaks, &abs);
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let r = r?;
    if r.abs_err > q.abs_tol {
        return Err(Error::Quadrature {
            estimate: r.value,
            abs_err: r.abs_err,
            evals: r.evals,
        });
    }
    Ok(r)
}

/// [`average_ep`] for a curve of linear SNR: `E[curve(gbar a^2)]`.
///
/// SNR values that underflow are clamped to the smallest normal double.
pub fn average_ep_gamma<F>(curve: F, model: &FadingModel, gamma_bar: f64, q: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(gamma_bar > 0.0) || !gamma_bar.is_finite() {
        return domain(format!("mean SNR must be positive and finite, got {gamma_bar}"));
    }
    let t = 0.5 * gamma_bar.ln();
    average_ep(|s| curve((2.0 * s).exp().max(f64::MIN_POSITIVE)), model, t, q)
}

/// [`average_ep`] over many points, in parallel, in input order.
pub fn average_curve<F>(curve: F, model: &FadingModel, ts: &[f64], q: &QuadratureSpec) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    ts.par_iter().map(|&t| average_ep(&curve, model, t, q).map(|r| r.value)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::q_function;
    use crate::modem::rayleigh_bpsk_avg;

    #[test]
    fn parse_and_display() {
        assert_eq!("nakagami:m=2".parse::<FadingModel>().unwrap(), FadingModel::Nakagami { m: 2.0 });
        assert_eq!("lognormal:sdb=8".parse::<FadingModel>().unwrap(), FadingModel::LogNormal { sigma_db: 8.0 });
        assert_eq!("mrc:n=4".parse::<FadingModel>().unwrap(), FadingModel::MrcRayleigh { n: 4 });
        assert_eq!("none".parse::<FadingModel>().unwrap(), FadingModel::None);
        for bad in ["nakagami:m=0.3", "mrc:n=0", "lognormal:sdb=-1", "rice:k=2", "mrc:m=2", "nakagami", "mrc:n=1.5"] {
            assert!(bad.parse::<FadingModel>().is_err(), "{bad}");
        }
        let m = FadingModel::nakagami(0.5).unwrap();
        assert_eq!(m.to_string().parse::<FadingModel>().unwrap(), m);
        let json = serde_json::to_string(&FadingModel::MrcRayleigh { n: 2 }).unwrap();
        assert_eq!(json, "\"mrc:n=2\"");
    }

    #[test]
    fn density_examples() {
        let ray = FadingModel::rayleigh();
        assert!((density_b(&ray, 0.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let ln8 = FadingModel::lognormal(8.0).unwrap();
        assert!((NU - 4.342944819032518).abs() < 1e-15);
        assert!((density_b(&ln8, 0.0).unwrap() - NU / ((2.0 * PI).sqrt() * 8.0)).abs() < 1e-15);
        let mrc1 = FadingModel::mrc(1).unwrap();
        for i in -40..=10 {
            let z = i as f64 * 0.25;
            assert!((density_b(&mrc1, z).unwrap() - density_b(&ray, z).unwrap()).abs() < 1e-15);
        }
        assert!(density_b(&FadingModel::None, 0.0).is_err());
    }

    #[test]
    fn densities_normalized() {
        let q = QuadratureSpec::default();
        for model in [
            FadingModel::nakagami(0.5).unwrap(),
            FadingModel::rayleigh(),
            FadingModel::nakagami(2.0).unwrap(),
            FadingModel::lognormal(4.0).unwrap(),
            FadingModel::lognormal(8.0).unwrap(),
            FadingModel::lognormal(12.0).unwrap(),
            FadingModel::mrc(1).unwrap(),
            FadingModel::mrc(2).unwrap(),
            FadingModel::mrc(4).unwrap(),
        ] {
            let r = density_mass(&model, &q).unwrap();
            assert!((r.value - 1.0).abs() < 1e-10, "{model}: {}", r.value);
        }
    }

    #[test]
    fn cdf_and_tail_are_complementary() {
        for model in [FadingModel::nakagami(0.5).unwrap(), FadingModel::lognormal(8.0).unwrap(), FadingModel::mrc(3).unwrap()] {
            for z in [-3.0, -0.5, 0.0, 1.0, 2.0] {
                let s = cdf_b(&model, z).unwrap() + upper_tail_b(&model, z).unwrap();
                assert!((s - 1.0).abs() < 1e-13, "{model} z={z}");
            }
            let zc = upper_cut(&model, 1e-12).unwrap();
            let tail = upper_tail_b(&model, zc).unwrap();
            assert!((tail / 1e-12 - 1.0).abs() < 1e-6, "{model}: {tail}");
        }
    }

    #[test]
    fn mean_gains() {
        assert_eq!(FadingModel::rayleigh().mean_gain(), 1.0);
        assert_eq!(FadingModel::mrc(4).unwrap().mean_gain(), 4.0);
        let s = 8.0 / NU;
        assert!((FadingModel::lognormal(8.0).unwrap().mean_gain() - (0.5 * s * s).exp()).abs() < 1e-15);
    }

    #[test]
    fn density_second_derivatives() {
        assert_eq!(ln_density_b_second(&FadingModel::nakagami(2.0).unwrap(), 0.0).unwrap(), -2.0);
        assert!((ln_density_b_second(&FadingModel::mrc(4).unwrap(), 1.0).unwrap() + 1f64.exp()).abs() < 1e-15);
        let ln = FadingModel::lognormal(8.0).unwrap();
        assert_eq!(ln_density_b_second(&ln, -3.0).unwrap(), ln_density_b_second(&ln, 5.0).unwrap());
        for model in [FadingModel::nakagami(0.5).unwrap(), ln, FadingModel::mrc(4).unwrap()] {
            assert!(check_density_logconcave(&model, -20.0, 5.0, 501).unwrap().is_empty());
            // Cross-check against a central difference of ln f.
            for z in [-2.0, 0.0, 1.5] {
                let e = 1e-4;
                let f = |x| ln_density_b(&model, x).unwrap();
                let fd = (f(z + e) - 2.0 * f(z) + f(z - e)) / (e * e);
                let an = ln_density_b_second(&model, z).unwrap();
                assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()), "{model} z={z}");
            }
        }
    }

    #[test]
    fn none_is_identity() {
        let q = QuadratureSpec::default();
        let r = average_ep(|t: f64| Ok(q_function(t.exp())), &FadingModel::None, 0.3, &q).unwrap();
        assert_eq!(r.value, q_function(0.3f64.exp()));
    }

    #[test]
    fn rayleigh_bpsk_matches_closed_form() {
        let q = QuadratureSpec::default();
        let model = FadingModel::rayleigh();
        for i in 0..25 {
            let g = 0.1 * (1e5f64).powf(i as f64 / 24.0);
            let r = average_ep_gamma(|x| Ok(q_function((2.0 * x).sqrt())), &model, g, &q).unwrap();
            let exact = rayleigh_bpsk_avg(g).unwrap();
            assert!((r.value - exact).abs() < 1e-12, "gbar={g}: {} vs {exact}", r.value);
            assert!(((r.value - exact) / exact).abs() < 1e-8);
        }
    }

    #[test]
    fn mrc1_equals_rayleigh() {
        let q = QuadratureSpec::default();
        let c = |t: f64| Ok(q_function(2f64.sqrt() * t.exp()));
        for t in [-2.0, 0.0, 1.0, 3.0] {
            let a = average_ep(c, &FadingModel::mrc(1).unwrap(), t, &q).unwrap().value;
            let b = average_ep(c, &FadingModel::rayleigh(), t, &q).unwrap().value;
            assert!((a - b).abs() <= 1e-12 * a, "t={t}");
        }
    }

    #[test]
    fn curve_errors_propagate() {
        let q = QuadratureSpec::default();
        let r = average_ep(|_| domain("boom"), &FadingModel::rayleigh(), 0.0, &q);
        assert!(matches!(r, Err(Error::Domain(ref s)) if s == "boom"));
    }
}
