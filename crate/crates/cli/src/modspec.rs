//! Modulation spec strings and the SNR conventions behind them.
//!
//! Every modulation is exposed as a curve of linear SNR `gamma`:
//! - `qam:M=..` and `psk:M=..`: symbol SNR `Es/N0`;
//! - `grid:n=..,d=..,a=..`: `((a/2)/sigma)^2`, half the spacing over the
//!   per-coordinate noise deviation;
//! - `parity3`: `1/sigma^2` for the `+-1` codeword coordinates.

use std::fmt;
use std::str::FromStr;

use errprob::grid::ep_from_weights;
use errprob::grid::RegionTypeWeights;
use errprob::modem::{parity_bpsk_ep, parity_codewords, psk_sep, qam_bep_exact, PskSpec, QamSpec};
use errprob::verify::uniform_grid_weights;
use errprob::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    Grid { n: usize, d: usize, a: f64 },
    Qam(QamSpec),
    Psk(PskSpec),
    Parity3,
}

fn bad(s: &str, why: &str) -> Error {
    Error::Domain(format!("bad modulation `{s}`: {why}"))
}

/// `k1=v1,k2=v2` into pairs, keys lowercased.
fn pairs(s: &str, body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(s, "expected key=value"))?;
            Ok((k.trim().to_ascii_lowercase(), v.trim().to_string()))
        })
        .collect()
}

fn get<T: FromStr>(s: &str, kv: &[(String, String)], key: &str) -> Result<T> {
    let v = kv
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| bad(s, &format!("missing `{key}`")))?;
    v.parse().map_err(|_| bad(s, &format!("cannot parse `{key}={v}`")))
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (kind, body) = t.split_once(':').unwrap_or((t, ""));
        match kind.to_ascii_lowercase().as_str() {
            "parity3" if body.is_empty() => Ok(Self::Parity3),
            "qam" => Ok(Self::Qam(QamSpec::new(get(s, &pairs(s, body)?, "m")?)?)),
            "psk" => Ok(Self::Psk(PskSpec::new(get(s, &pairs(s, body)?, "m")?)?)),
            "grid" => {
                let kv = pairs(s, body)?;
                if kv.iter().any(|(k, _)| !matches!(k.as_str(), "n" | "d" | "a")) {
                    return Err(bad(s, "grid keys are n, d, a"));
                }
                let n: usize = get(s, &kv, "n")?;
                let d: usize = get(s, &kv, "d")?;
                let a: f64 = get(s, &kv, "a")?;
                if n < 2 || d < 1 || !(a > 0.0 && a.is_finite()) {
                    return Err(bad(s, "need n >= 2, d >= 1, a > 0"));
                }
                Ok(Self::Grid { n, d, a })
            }
            _ => Err(bad(s, "expected grid:n=..,d=..,a=.. | qam:M=.. | psk:M=.. | parity3")),
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid { n, d, a } => write!(f, "grid:n={n},d={d},a={a}"),
            Self::Qam(q) => write!(f, "qam:M={}", q.order()),
            Self::Psk(p) => write!(f, "psk:M={}", p.order()),
            Self::Parity3 => write!(f, "parity3"),
        }
    }
}

type Curve = Box<dyn Fn(f64) -> Result<f64> + Sync + Send>;

impl Modulation {
    /// AWGN error probability as a function of linear SNR.
    pub fn curve(&self) -> Result<Curve> {
        Ok(match *self {
            Self::Grid { n, d, a } => {
                let w: RegionTypeWeights = uniform_grid_weights(n, d)?;
                Box::new(move |g: f64| Ok(ep_from_weights(&w, a, 0.5 * g.ln() - (0.5 * a).ln())))
            }
            Self::Qam(q) => Box::new(move |g| qam_bep_exact(q, g)),
            Self::Psk(p) => Box::new(move |g| psk_sep(p, g)),
            Self::Parity3 => Box::new(|g: f64| parity_bpsk_ep(0.5 * g.ln())),
        })
    }

    /// Constellation points and per-coordinate noise deviation at SNR `gamma`,
    /// for simulation.
    pub fn points_and_sigma(&self, gamma: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        Ok(match *self {
            Self::Grid { n, d, a } => {
                let g = errprob::grid::GridConstellation::uniform(n, d, a)?;
                (g.points(), 0.5 * a / gamma.sqrt())
            }
            Self::Qam(q) => {
                let side = q.side() as i32;
                let pts = (0..side)
                    .flat_map(|i| (0..side).map(move |k| vec![(2 * i - side + 1) as f64, (2 * k - side + 1) as f64]))
                    .collect();
                let es = 2.0 * (q.order() - 1) as f64 / 3.0;
                (pts, (es / (2.0 * gamma)).sqrt())
            }
            Self::Psk(p) => {
                let m = p.order();
                let pts = (0..m)
                    .map(|i| {
                        let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect();
                (pts, (0.5 / gamma).sqrt())
            }
            Self::Parity3 => (parity_codewords(), 1.0 / gamma.sqrt()),
        })
    }
}
