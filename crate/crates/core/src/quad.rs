//! Globally adaptive 21-point Gauss-Kronrod quadrature.
//!
//! Segments are kept in a max-heap keyed by their error estimate and the worst
//! one is bisected until the summed error meets
//! `max(abs_tol, rel_tol * |I|)`. Semi-infinite ends are mapped onto `(0, 1]`
//! with `x = a + (1 - s) / s` (QUADPACK `qagi` style); the rule never touches
//! the endpoints so the map's singularity at `s = 0` is not evaluated.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const RULE_EVALS: usize = 21;

/// Tolerances and limits for an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Probability mass allowed in each truncated tail when integrating
    /// against a density (see [`crate::fading`]).
    pub tail_mass_cut: f64,
    pub max_evals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            tail_mass_cut: 1e-12,
            max_evals: 1_000_000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.tail_mass_cut > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        if self.max_evals < 100 {
            return Err(Error::Domain("max_evals must be at least 100".into()));
        }
        Ok(())
    }

    /// Same limits with a pure relative target, for results that may be
    /// many orders of magnitude below one.
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            abs_tol: f64::MIN_POSITIVE,
            rel_tol,
            ..Self::default()
        }
    }
}

/// Value of an integral plus what it cost to get it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Finite,
    /// `x = origin + (1 - s) / s`
    Upper(f64),
    /// `x = origin - (1 - s) / s`
    Lower(f64),
}

impl Map {
    fn apply<F: Fn(f64) -> f64>(self, f: &F, s: f64) -> f64 {
        match self {
            Map::Finite => f(s),
            Map::Upper(o) => {
                let v = f(o + (1.0 - s) / s);
                if v == 0.0 { 0.0 } else { v / (s * s) }
            }
            Map::Lower(o) => {
                let v = f(o - (1.0 - s) / s);
                if v == 0.0 { 0.0 } else { v / (s * s) }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

#[allow(clippy::needless_range_loop)]
fn gk21<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = map.apply(f, center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = map.apply(f, center - dx);
        let f2 = map.apply(f, center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = map.apply(f, center - dx);
        let f2 = map.apply(f, center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    (value, err)
}

/// Integrate `f` over `[a, b]`; either end may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    integrate_pieces(f, &[a, b], spec)
}

/// Integrate `f` over consecutive pieces `[p0, p1], [p1, p2], ...`.
///
/// Breakpoints seed the adaptive subdivision where the integrand is known to
/// change character. Only the first and last breakpoint may be infinite.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    if breakpoints.len() < 2 {
        return Err(Error::Domain("need at least two breakpoints".into()));
    }
    let last = breakpoints.len() - 1;
    for (i, w) in breakpoints.windows(2).enumerate() {
        if w[0].is_nan() || w[1].is_nan() || w[0] > w[1] {
            return Err(Error::Domain(format!("breakpoints must be ascending, got {w:?}")));
        }
        let interior_inf = (i > 0 && w[0].is_infinite()) || (i + 1 < last && w[1].is_infinite());
        if interior_inf {
            return Err(Error::Domain("only the outer breakpoints may be infinite".into()));
        }
    }

    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in breakpoints.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo == hi {
            continue;
        }
        let (map, a, b) = match (lo.is_infinite(), hi.is_infinite()) {
            (false, false) => (Map::Finite, lo, hi),
            (true, false) => (Map::Lower(hi), 0.0, 1.0),
            (false, true) => (Map::Upper(lo), 0.0, 1.0),
            (true, true) => {
                // Split the whole line at zero.
                for (m, sa, sb) in [(Map::Lower(0.0), 0.0, 1.0), (Map::Upper(0.0), 0.0, 1.0)] {
                    let (value, err) = gk21(&f, m, sa, sb);
                    evals += RULE_EVALS;
                    heap.push(Segment { a: sa, b: sb, map: m, value, err });
                }
                continue;
            }
        };
        let (value, err) = gk21(&f, map, a, b);
        evals += RULE_EVALS;
        heap.push(Segment { a, b, map, value, err });
    }

    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.err));
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature { estimate: total, abs_err: err, evals });
        }
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult { value: total, abs_err: err, evals });
        }
        if evals + 2 * RULE_EVALS > spec.max_evals {
            return Err(Error::Quadrature { estimate: total, abs_err: err, evals });
        }
        let worst = heap.pop().expect("heap is non-empty while error is positive");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval can no longer be split in double precision.
            return Err(Error::Quadrature { estimate: total, abs_err: err, evals });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk21(&f, worst.map, a, b);
            evals += RULE_EVALS;
            heap.push(Segment { a, b, map: worst.map, value, err });
        }
    }
}
