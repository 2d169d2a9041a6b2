//! Seeded Monte Carlo estimates of error probabilities.
//!
//! Work is cut into fixed-size batches. Batch `b` draws from a ChaCha8 stream
//! keyed by `(seed, b)`, so the merged counts do not depend on how rayon
//! schedules the batches.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::modem::QamSpec;

pub const MIN_SAMPLES: u64 = 1000;
pub const DEFAULT_BATCH: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Samples per batch.
    pub batch: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            samples,
            seed,
            batch: DEFAULT_BATCH,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return domain(format!("need at least {MIN_SAMPLES} samples, got {}", self.samples));
        }
        if self.batch == 0 {
            return domain("batch size must be positive");
        }
        Ok(())
    }

    fn batches(&self) -> impl ParallelIterator<Item = (u64, u64)> + '_ {
        let nb = self.samples.div_ceil(self.batch);
        (0..nb).into_par_iter().map(move |b| {
            let len = self.batch.min(self.samples - b * self.batch);
            (b, len)
        })
    }
}

/// Random stream for batch `index` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_counts(errors: u64, samples: u64, seed: u64) -> Self {
        let p = errors as f64 / samples as f64;
        Self {
            p_hat: p,
            std_err: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
            seed,
        }
    }

    /// `|p_hat - reference| <= k * std_err`. A zero standard error (no
    /// errors or all errors observed) only accepts an exact match.
    pub fn covers(&self, reference: f64, k: f64) -> bool {
        (self.p_hat - reference).abs() <= k * self.std_err
    }
}

/// Validated constellation in flat row-major storage.
struct Points {
    d: usize,
    coords: Vec<f64>,
}

impl Points {
    fn new(points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return domain("need at least two points");
        }
        let d = points[0].len();
        if d == 0 {
            return domain("points must have at least one coordinate");
        }
        let mut coords = Vec::with_capacity(points.len() * d);
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return domain(format!("point {i} has dimension {}, expected {d}", p.len()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return domain(format!("point {i} has a non-finite coordinate"));
            }
            coords.extend_from_slice(p);
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::Degenerate(j, i));
                }
            }
        }
        Ok(Self { d, coords })
    }

    fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    /// Index of the nearest point; ties go to the lowest index.
    fn nearest(&self, y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (j, p) in self.coords.chunks_exact(self.d).enumerate() {
            let d2: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        best
    }
}

/// Symbol error probability of `points` with priors `priors` under isotropic
/// Gaussian noise of standard deviation `e^(-t)` per coordinate.
pub fn mc_ep(points: &[Vec<f64>], priors: &[f64], t: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let pts = Points::new(points)?;
    if priors.len() != pts.len() {
        return domain(format!("{} priors for {} points", priors.len(), pts.len()));
    }
    if priors.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return domain("priors must be finite and nonnegative");
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("priors sum to {total}, not 1"));
    }
    if !t.is_finite() {
        return domain(format!("t must be finite, got {t}"));
    }
    let sigma = (-t).exp();
    let pick = WeightedIndex::new(priors).map_err(|e| Error::Domain(e.to_string()))?;

    let errors: u64 = cfg
        .batches()
        .map(|(b, len)| {
            let mut rng = batch_rng(cfg.seed, b);
            let mut y = vec![0.0; pts.d];
            let mut errs = 0u64;
            for _ in 0..len {
                let i = pick.sample(&mut rng);
                for (yk, xk) in y.iter_mut().zip(pts.point(i)) {
                    let g: f64 = rng.sample(StandardNormal);
                    *yk = xk + sigma * g;
                }
                if pts.nearest(&y) != i {
                    errs += 1;
                }
            }
            errs
        })
        .sum();
    Ok(McEstimate::from_counts(errors, cfg.samples, cfg.seed))
}

/// Reflected binary code of `i`.
pub fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// One row of the Gray mapping: bit label and the in-phase / quadrature
/// amplitudes (odd integers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayEntry {
    pub bits: u32,
    pub i: i32,
    pub q: i32,
}

/// Gray labels of square M-QAM. The high half of the label is the in-phase
/// axis, the low half the quadrature axis, each Gray coded independently.
pub fn gray_qam_table(spec: QamSpec) -> Vec<GrayEntry> {
    let side = spec.side();
    let half_bits = spec.bits_per_symbol() / 2;
    let level = |k: u32| 2 * k as i32 - (side as i32 - 1);
    let mut out = Vec::with_capacity(spec.order() as usize);
    for ki in 0..side {
        for kq in 0..side {
            out.push(GrayEntry {
                bits: (gray(ki) << half_bits) | gray(kq),
                i: level(ki),
                q: level(kq),
            });
        }
    }
    out.sort_by_key(|e| e.bits);
    out
}

/// Bit error rate of Gray-mapped square M-QAM at symbol SNR `gamma`.
///
/// `cfg.samples` counts bits; enough whole symbols are drawn to cover it and
/// the reported sample count is the number of bits actually simulated.
pub fn mc_bep_gray_qam(spec: QamSpec, gamma: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("symbol SNR must be positive and finite, got {gamma}"));
    }
    let side = spec.side();
    let bits_per_axis = spec.bits_per_symbol() / 2;
    let bits = spec.bits_per_symbol() as u64;
    let symbols = cfg.samples.div_ceil(bits);
    // Levels +-1, +-3, ...: Es = 2(M - 1)/3, noise variance Es/(2 gamma) per axis.
    let es = 2.0 * (spec.order() - 1) as f64 / 3.0;
    let sigma = (es / (2.0 * gamma)).sqrt();
    let top = (side - 1) as f64;
    let detect = |y: f64| -> u32 { ((y + top) * 0.5).round().clamp(0.0, top) as u32 };
    let sym_cfg = McConfig {
        samples: symbols,
        ..*cfg
    };

    let errors: u64 = sym_cfg
        .batches()
        .map(|(b, len)| {
            let mut rng = batch_rng(cfg.seed, b);
            let mut errs = 0u64;
            for _ in 0..len {
                for _axis in 0..2 {
                    let k = rng.random_range(0..side);
                    let g: f64 = rng.sample(StandardNormal);
                    let y = (2 * k) as f64 - top + sigma * g;
                    errs += (gray(k) ^ gray(detect(y))).count_ones() as u64;
                }
            }
            errs
        })
        .sum();
    debug_assert!(bits_per_axis * 2 == bits as u32);
    Ok(McEstimate::from_counts(errors, symbols * bits, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::q_function;

    fn antipodal() -> Vec<Vec<f64>> {
        vec![vec![-1.0], vec![1.0]]
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(999, 0).is_err());
        assert!(McConfig::new(1000, 0).is_ok());
        let bad = McConfig {
            samples: 5000,
            seed: 1,
            batch: 0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn antipodal_matches_q() {
        let cfg = McConfig::new(400_000, 11).unwrap();
        let est = mc_ep(&antipodal(), &[0.5, 0.5], 0.0, &cfg).unwrap();
        assert!(est.covers(q_function(1.0), 3.0), "{est:?}");
        let expected_se = (est.p_hat * (1.0 - est.p_hat) / 400_000.0).sqrt();
        assert_eq!(est.std_err, expected_se);
    }

    #[test]
    fn deterministic_and_batch_layout_matters_only_through_seed() {
        let cfg = McConfig {
            samples: 50_000,
            seed: 7,
            batch: 4096,
        };
        let a = mc_ep(&antipodal(), &[0.5, 0.5], 0.3, &cfg).unwrap();
        let b = mc_ep(&antipodal(), &[0.5, 0.5], 0.3, &cfg).unwrap();
        assert_eq!(a, b);
        let other = McConfig { seed: 8, ..cfg };
        assert_ne!(mc_ep(&antipodal(), &[0.5, 0.5], 0.3, &other).unwrap().p_hat, a.p_hat);
    }

    #[test]
    fn duplicate_points_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]];
        let cfg = McConfig::new(1000, 0).unwrap();
        assert!(matches!(mc_ep(&pts, &[0.3, 0.3, 0.4], 0.0, &cfg), Err(Error::Degenerate(0, 2))));
        assert!(mc_ep(&[vec![0.0]], &[1.0], 0.0, &cfg).is_err());
        assert!(mc_ep(&antipodal(), &[0.7, 0.7], 0.0, &cfg).is_err());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = Points::new(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(pts.nearest(&[0.0]), 0);
        assert_eq!(pts.nearest(&[0.1]), 1);
    }

    #[test]
    fn gray_table_neighbours_differ_in_one_bit() {
        for m in [4, 16, 64] {
            let spec = QamSpec::new(m).unwrap();
            let table = gray_qam_table(spec);
            assert_eq!(table.len(), m as usize);
            for a in &table {
                for b in &table {
                    let adjacent = (a.i - b.i).abs() + (a.q - b.q).abs() == 2;
                    if adjacent {
                        assert_eq!((a.bits ^ b.bits).count_ones(), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn qam4_bep_matches_q() {
        let spec = QamSpec::new(4).unwrap();
        let cfg = McConfig::new(400_000, 3).unwrap();
        let est = mc_bep_gray_qam(spec, 4.0, &cfg).unwrap();
        assert!(est.covers(q_function(2.0), 3.0), "{est:?}");
        assert_eq!(est.samples, 400_000);
    }

    #[test]
    fn qam_bep_near_zero_snr_is_half() {
        let spec = QamSpec::new(16).unwrap();
        let cfg = McConfig::new(200_000, 5).unwrap();
        let est = mc_bep_gray_qam(spec, 1e-12, &cfg).unwrap();
        assert!(est.covers(0.5, 3.5), "{est:?}");
    }

    #[test]
    fn stream_equidistribution_smoke() {
        // Chi-square over 64 bins, pooled from several substreams.
        let bins = 64usize;
        let mut counts = vec![0u64; bins];
        for b in 0..8 {
            let mut rng = batch_rng(1234, b);
            for _ in 0..32_000 {
                let u: f64 = rng.random();
                counts[(u * bins as f64) as usize] += 1;
            }
        }
        let n: u64 = counts.iter().sum();
        let e = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 63 degrees of freedom: the 0.9999 quantile is about 113.
        assert!(chi2 < 113.0, "chi2 = {chi2}");
    }

    #[test]
    fn substreams_differ() {
        let mut a = batch_rng(9, 0);
        let mut b = batch_rng(9, 1);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }
}
