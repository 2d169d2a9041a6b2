//! Numerical checks of the inequalities behind log-concavity of the grid
//! error probability.
//!
//! Floating-point sweeps evaluate the analytic derivatives from
//! [`crate::grid`]; identities that only involve integers are checked in
//! exact `i128` arithmetic.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{big_h_derivs, h_poly_derivs, RegionTypeWeights};

pub const ANALYTIC_TOL: f64 = 1e-12;
pub const FD_TOL: f64 = 1e-9;

/// Points in `[0, 1)` and a range of dimensions to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    h_points: Vec<f64>,
    d_range: RangeInclusive<usize>,
    tolerance: f64,
}

impl SweepGrid {
    pub fn new(h_points: Vec<f64>, d_range: RangeInclusive<usize>, tolerance: f64) -> Result<Self> {
        if h_points.iter().any(|h| !(0.0..1.0).contains(h)) {
            return domain("h points must lie in [0, 1)");
        }
        if h_points.windows(2).any(|w| w[0] > w[1]) {
            return domain("h points must be sorted");
        }
        if !(tolerance >= 0.0) {
            return domain(format!("tolerance must be nonnegative, got {tolerance}"));
        }
        Ok(Self {
            h_points,
            d_range,
            tolerance,
        })
    }

    /// `h = i / steps` for `i = 0..steps`.
    pub fn uniform(steps: usize, d_range: RangeInclusive<usize>, tolerance: f64) -> Result<Self> {
        if steps == 0 {
            return domain("need at least one h point");
        }
        Self::new((0..steps).map(|i| i as f64 / steps as f64).collect(), d_range, tolerance)
    }

    pub fn h_points(&self) -> &[f64] {
        &self.h_points
    }

    pub fn d_range(&self) -> RangeInclusive<usize> {
        self.d_range.clone()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Where a check was evaluated. `at` is `h` for the polynomial checks and
/// `t` for curve checks; unused indices are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub check: String,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub location: Location,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl ViolationReport {
    fn new(location: Location, lhs: f64, rhs: f64) -> Self {
        Self {
            location,
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }
}

fn cmp_reports(a: &ViolationReport, b: &ViolationReport) -> Ordering {
    let (x, y) = (&a.location, &b.location);
    x.check
        .cmp(&y.check)
        .then(x.d.cmp(&y.d))
        .then(x.k.cmp(&y.k))
        .then(x.m.cmp(&y.m))
        .then(x.at.total_cmp(&y.at))
}

/// Sort into a canonical order so that parallel sweeps are reproducible.
pub fn sort_reports(v: &mut [ViolationReport]) {
    v.sort_by(cmp_reports);
}

fn loc(check: &str, d: usize, k: Option<usize>, m: Option<usize>, at: f64) -> Location {
    Location {
        check: check.to_string(),
        d: Some(d),
        k,
        m,
        at,
    }
}

fn keep(r: ViolationReport, tol: f64) -> Option<ViolationReport> {
    (r.slack < -tol || r.slack.is_nan()).then_some(r)
}

/// `(lhs, rhs)` of `(1 - h) H'^2 >= (1 - H)(H' - (1 - h) H'')`.
pub fn h_ratio_sides(w: &RegionTypeWeights, h: f64) -> Result<(f64, f64)> {
    let (v, d1, d2) = big_h_derivs(w, h)?;
    Ok(((1.0 - h) * d1 * d1, (1.0 - v) * (d1 - (1.0 - h) * d2)))
}

pub fn check_h_ratio(w: &RegionTypeWeights, grid: &SweepGrid) -> Result<Vec<ViolationReport>> {
    let mut out = Vec::new();
    for &h in &grid.h_points {
        let (lhs, rhs) = h_ratio_sides(w, h)?;
        out.extend(keep(ViolationReport::new(loc("h_ratio", w.d(), None, None, h), lhs, rhs), grid.tolerance));
    }
    sort_reports(&mut out);
    Ok(out)
}

/// `H_{k,m}(h) = (1 - h) H_k' H_m' - (1 - H_k)(H_m' - (1 - h) H_m'')`, split
/// into its two sides.
pub fn h_km_sides(d: usize, k: usize, m: usize, h: f64) -> Result<(f64, f64)> {
    let (vk, k1, _) = h_poly_derivs(k, h, d)?;
    let (_, m1, m2) = h_poly_derivs(m, h, d)?;
    Ok(((1.0 - h) * k1 * m1, (1.0 - vk) * (m1 - (1.0 - h) * m2)))
}

pub fn check_pairwise(d: usize, grid: &SweepGrid) -> Result<Vec<ViolationReport>> {
    if d <= 1 {
        return domain(format!("the pairwise inequality needs d > 1, got {d}"));
    }
    let pairs: Vec<(usize, usize)> = (0..=d).flat_map(|k| (0..=d).map(move |m| (k, m))).collect();
    let chunks: Vec<Vec<ViolationReport>> = pairs
        .par_iter()
        .map(|&(k, m)| -> Result<Vec<ViolationReport>> {
            let mut v = Vec::new();
            for &h in &grid.h_points {
                let (lhs, rhs) = h_km_sides(d, k, m, h)?;
                v.extend(keep(ViolationReport::new(loc("pairwise", d, Some(k), Some(m), h), lhs, rhs), grid.tolerance));
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<_> = chunks.into_iter().flatten().collect();
    sort_reports(&mut out);
    Ok(out)
}

/// Right-hand side of the per-coefficient inequality after dividing through
/// by `{H}_k (1 - {H}_m) (hd + k) / (h^2 (h + 1)^2)`:
///
/// ```text
/// R_k(h) = (h^3 d^2 + h^2 ((2d - 1) k + 2d - d^2) + h (k^2 - 2k(d - 1)) + (k - k^2)) / (hd + k)
/// ```
///
/// `R_0` is written in its cancelled form `h (hd + 2 - d)`.
pub fn keystone_rhs(d: usize, k: usize, h: f64) -> f64 {
    let (df, kf) = (d as f64, k as f64);
    if k == 0 {
        return h * (h * df + 2.0 - df);
    }
    let num = h.powi(3) * df * df + h * h * ((2.0 * df - 1.0) * kf + 2.0 * df - df * df) + h * (kf * kf - 2.0 * kf * (df - 1.0))
        + (kf - kf * kf);
    num / (h * df + kf)
}

/// `dR_k/dk = (h - 1) (k^2 + hd(2k - 1) + h^2 d(d - 1)) / (hd + k)^2`.
pub fn keystone_rhs_dk(d: usize, k: f64, h: f64) -> f64 {
    let df = d as f64;
    (h - 1.0) * (k * k + h * df * (2.0 * k - 1.0) + h * h * df * (df - 1.0)) / (h * df + k).powi(2)
}

/// Left-hand side of the reduced inequality, `(1 - h) {H}_m (hd + m) / (1 - {H}_m)`.
pub fn keystone_lhs(d: usize, m: usize, h: f64) -> Result<f64> {
    let (vm, _, _) = h_poly_derivs(m, h, d)?;
    Ok((1.0 - h) * vm * (h * d as f64 + m as f64) / (1.0 - vm))
}

/// The per-coefficient inequality
/// `(1 - h) {H'}_k {H'}_m >= {1 - H}_m {H' - (1 - h) H''}_k` for one `(k, m)`,
/// plus the claims used to reduce it to `k = 0`: the closed form of
/// `R_0 - R_1`, that `R_k` is non-increasing for `k >= 1`, and agreement of
/// the derivative formula with a central difference of `R`.
pub fn check_keystone_inequality(d: usize, k: usize, m: usize, h_grid: &[f64], tol: f64) -> Result<Vec<ViolationReport>> {
    if k > d || m > d {
        return domain(format!("indices k = {k}, m = {m} must not exceed d = {d}"));
    }
    if d == 0 {
        return domain("d must be positive");
    }
    let mut out = Vec::new();
    let df = d as f64;
    for &h in h_grid {
        if !(0.0..1.0).contains(&h) {
            return domain(format!("h = {h} outside [0, 1)"));
        }
        let (vk, k1, k2) = h_poly_derivs(k, h, d)?;
        let (vm, m1, _) = h_poly_derivs(m, h, d)?;
        let lhs = (1.0 - h) * k1 * m1;
        let rhs = (1.0 - vm) * (k1 - (1.0 - h) * k2);
        out.extend(keep(ViolationReport::new(loc("keystone", d, Some(k), Some(m), h), lhs, rhs), tol));

        // Divided form, valid where {H}_k > 0 and {H}_m < 1.
        if h > 0.0 && vk > 0.0 && vm < 1.0 {
            let l = keystone_lhs(d, m, h)?;
            let r = keystone_rhs(d, k, h);
            let scale = 1.0 + l.abs().max(r.abs());
            out.extend(keep(
                ViolationReport::new(loc("keystone_reduced", d, Some(k), Some(m), h), l, r),
                tol * scale,
            ));
        }

        if m == 0 && k == 0 {
            let diff = keystone_rhs(d, 0, h) - keystone_rhs(d, 1, h);
            let closed = (df - 1.0) * (1.0 - h) * h / (1.0 + h * df);
            let r = ViolationReport::new(loc("keystone_k01_difference", d, None, None, h), -(diff - closed).abs(), 0.0);
            out.extend(keep(r, tol));
            out.extend(keep(
                ViolationReport::new(loc("keystone_k0_maximizer", d, None, None, h), diff, 0.0),
                tol,
            ));
            if h > 0.0 {
                for kk in 1..d {
                    let step = keystone_rhs(d, kk, h) - keystone_rhs(d, kk + 1, h);
                    out.extend(keep(
                        ViolationReport::new(loc("keystone_decreasing_in_k", d, Some(kk), None, h), step, 0.0),
                        tol,
                    ));
                    let kc = kk as f64 + 0.5;
                    let eps = 1e-5;
                    let r_at = |kx: f64| {
                        let num = h.powi(3) * df * df + h * h * ((2.0 * df - 1.0) * kx + 2.0 * df - df * df)
                            + h * (kx * kx - 2.0 * kx * (df - 1.0))
                            + (kx - kx * kx);
                        num / (h * df + kx)
                    };
                    let fd = (r_at(kc + eps) - r_at(kc - eps)) / (2.0 * eps);
                    let an = keystone_rhs_dk(d, kc, h);
                    let err = (fd - an).abs() / (1.0 + an.abs());
                    out.extend(keep(
                        ViolationReport::new(loc("keystone_dk_formula", d, Some(kk), None, h), -err, 0.0),
                        FD_TOL,
                    ));
                }
            }
        }
    }
    sort_reports(&mut out);
    Ok(out)
}

/// Binomial coefficients `C(n, 0..=n)` in exact arithmetic.
pub fn binomial_row(n: usize) -> Result<Vec<i128>> {
    let mut row = vec![1i128];
    for i in 0..n {
        let mut next = vec![1i128; i + 2];
        for j in 1..=i {
            next[j] = row[j - 1]
                .checked_add(row[j])
                .ok_or_else(|| Error::Overflow(format!("C({}, {j})", i + 1)))?;
        }
        row = next;
    }
    Ok(row)
}

fn pow2(e: usize) -> Result<i128> {
    1i128.checked_shl(e as u32).filter(|_| e < 127).ok_or_else(|| Error::Overflow(format!("2^{e}")))
}

fn ck(v: Option<i128>, what: &str) -> Result<i128> {
    v.ok_or_else(|| Error::Overflow(what.to_string()))
}

/// `(sum C, sum a C, sum a^2 C)` over `a = 0..=n`.
pub fn binomial_sums(n: usize) -> Result<(i128, i128, i128)> {
    let row = binomial_row(n)?;
    let mut s = (0i128, 0i128, 0i128);
    for (a, &c) in row.iter().enumerate() {
        let a = a as i128;
        s.0 = ck(s.0.checked_add(c), "sum C")?;
        s.1 = ck(c.checked_mul(a).and_then(|x| s.1.checked_add(x)), "sum aC")?;
        s.2 = ck(c.checked_mul(a * a).and_then(|x| s.2.checked_add(x)), "sum a^2 C")?;
    }
    Ok(s)
}

/// Largest `N` accepted by [`check_binomial_identities`].
pub const BINOMIAL_N_MAX: usize = 120;

/// For all `N <= n_max`: `sum C(N,a) = 2^N`, `sum a C(N,a) = 2^(N-1) N`,
/// `4 sum a^2 C(N,a) = 2^N N (N + 1)`, and `sum_a C(d-m,a)(d-m-2a) = 0` for
/// `0 <= m <= d <= n_max`.
pub fn check_binomial_identities(n_max: usize) -> Result<bool> {
    if n_max < 1 {
        return domain("n_max must be at least 1");
    }
    if n_max > BINOMIAL_N_MAX {
        return Err(Error::Overflow(format!("n_max = {n_max} exceeds {BINOMIAL_N_MAX}")));
    }
    for n in 0..=n_max {
        let (s0, s1, s2) = binomial_sums(n)?;
        let p = pow2(n)?;
        let ni = n as i128;
        let ok0 = s0 == p;
        let ok1 = 2 * s1 == ck(p.checked_mul(ni), "2^N N")?;
        let ok2 = 4 * s2 == ck(p.checked_mul(ni * (ni + 1)), "2^N N (N+1)")?;
        // With N = d - m the last identity only depends on N.
        let row = binomial_row(n)?;
        let mut s = 0i128;
        for (a, &c) in row.iter().enumerate() {
            s = ck(c.checked_mul(ni - 2 * a as i128).and_then(|x| s.checked_add(x)), "sum C(N-2a)")?;
        }
        if !(ok0 && ok1 && ok2 && s == 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Coefficients `c_l = (d - 2(l + 1)) sum_{a >= max(2 + l - m, 0)}^{d-m} C(d-m, a)`,
/// `l = 0..=d-2`.
pub fn r_coefficients(d: usize, m: usize) -> Result<Vec<i128>> {
    if d < 2 || m > d {
        return domain(format!("need d >= 2 and m <= d, got d = {d}, m = {m}"));
    }
    let n = d - m;
    let row = binomial_row(n)?;
    (0..=d - 2)
        .map(|l| {
            let start = (2 + l).saturating_sub(m);
            let tail: i128 = row.iter().skip(start).sum();
            ck(tail.checked_mul(d as i128 - 2 * (l as i128 + 1)), "c_l")
        })
        .collect()
}

/// The same coefficients by expanding
/// `sum_a C(d-m,a) [d (1 + ... + h^(m+a-2)) - 2 (1 + 2h + ... + (m+a-1) h^(m+a-2))]`
/// power by power.
pub fn r_coefficients_expanded(d: usize, m: usize) -> Result<Vec<i128>> {
    if d < 2 || m > d {
        return domain(format!("need d >= 2 and m <= d, got d = {d}, m = {m}"));
    }
    let row = binomial_row(d - m)?;
    let mut c = vec![0i128; d - 1];
    for (a, &binom) in row.iter().enumerate() {
        let top = m + a;
        for (j, cj) in c.iter_mut().enumerate().take(top.saturating_sub(1)) {
            let term = ck(binom.checked_mul(d as i128 - 2 * (j as i128 + 1)), "expanded c_l")?;
            *cj = ck(cj.checked_add(term), "expanded c_l")?;
        }
    }
    Ok(c)
}

fn eval_poly(c: &[i128], h: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * h + x as f64)
}

/// `A + B a + a^2` summed against `C(d-m, a)`, the form the last step of the
/// positivity argument reduces to via the three binomial identities.
fn r1_summand_sum(d: i128, m: i128, row: &[i128]) -> Result<i128> {
    let a_coef = -d - m + d * m + m * m;
    let b_coef = d + 2 * m - 1;
    let mut s = 0i128;
    for (a, &c) in row.iter().enumerate() {
        let a = a as i128;
        let v = ck(c.checked_mul(a_coef + b_coef * a + a * a), "r(1) summand")?;
        s = ck(s.checked_add(v), "r(1) sum")?;
    }
    Ok(s)
}

/// `4(-d - m + dm + m^2) + 2(d + 2m - 1)(d - m) + (d - m)(d - m + 1)`.
pub fn r1_bracket(d: i128, m: i128) -> i128 {
    let n = d - m;
    4 * (-d - m + d * m + m * m) + 2 * (d + 2 * m - 1) * n + n * (n + 1)
}

/// The bracket as printed with `(d - m - 1)(d - m)` in the last term.
pub fn r1_bracket_printed(d: i128, m: i128) -> i128 {
    let n = d - m;
    4 * (-d - m + d * m + m * m) + 2 * (d + 2 * m - 1) * n + (n - 1) * n
}

/// `3d^2 - 5d + 3(d - 1)m + dm + m^2`.
pub fn r1_final_line(d: i128, m: i128) -> i128 {
    3 * d * d - 5 * d + 3 * (d - 1) * m + d * m + m * m
}

/// A place where a printed step of the argument does not hold as written.
/// These are reported, not counted as violations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub kind: String,
    pub detail: String,
    pub cases: usize,
    pub example: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub violations: Vec<ViolationReport>,
    pub discrepancies: Vec<Discrepancy>,
}

/// Positivity of `r(h) = sum_l c_l h^l`.
///
/// For every `0 <= m <= d`:
/// - the `c_l` formula agrees with direct expansion (exact);
/// - `r(h) >= -tol` on the grid, `r(1) >= 0` exactly;
/// - `4 sum_a C(d-m,a)(A + B a + a^2) = 2^(d-m) bracket` (exact), the bracket
///   equals the final closed form, and is positive.
///
/// Printed forms that disagree with these (the bracket's last term, the
/// dropped `2^(d-m-2)` prefactor, and `r(1)` itself not matching the
/// bracket) are counted in `discrepancies`.
pub fn check_r_positivity(d: usize, h_grid: &[f64], tol: f64) -> Result<PositivityReport> {
    if d <= 1 {
        return domain(format!("r(h) positivity needs d > 1, got {d}"));
    }
    let mut violations = Vec::new();
    let mut notes: Vec<Discrepancy> = Vec::new();
    let mut note = |kind: &str, detail: &str, m: usize| {
        if let Some(n) = notes.iter_mut().find(|n| n.kind == kind) {
            n.cases += 1;
        } else {
            notes.push(Discrepancy {
                kind: kind.into(),
                detail: detail.into(),
                cases: 1,
                example: (d, m),
            });
        }
    };
    let di = d as i128;
    for m in 0..=d {
        let c = r_coefficients(d, m)?;
        let c2 = r_coefficients_expanded(d, m)?;
        if c != c2 {
            let first = c.iter().zip(&c2).position(|(a, b)| a != b).unwrap_or(0);
            violations.push(ViolationReport::new(
                loc("r_coefficients_two_routes", d, Some(first), Some(m), 1.0),
                c[first] as f64,
                c2[first] as f64,
            ));
        }
        for &h in h_grid {
            if !(0.0..1.0).contains(&h) {
                return domain(format!("h = {h} outside [0, 1)"));
            }
            let r = eval_poly(&c, h);
            violations.extend(keep(ViolationReport::new(loc("r_positive", d, None, Some(m), h), r, 0.0), tol));
        }
        let r1 = c.iter().try_fold(0i128, |acc, &x| acc.checked_add(x)).ok_or_else(|| Error::Overflow("r(1)".into()))?;
        if r1 < 0 {
            violations.push(ViolationReport::new(loc("r1_nonnegative", d, None, Some(m), 1.0), r1 as f64, 0.0));
        }

        let mi = m as i128;
        let n = d - m;
        let row = binomial_row(n)?;
        let lhs = ck(r1_summand_sum(di, mi, &row)?.checked_mul(4), "4 sum")?;
        let bracket = r1_bracket(di, mi);
        let rhs = ck(pow2(n)?.checked_mul(bracket), "2^N bracket")?;
        if lhs != rhs {
            violations.push(ViolationReport::new(loc("r1_bracket_identity", d, None, Some(m), 1.0), lhs as f64, rhs as f64));
        }
        if bracket != r1_final_line(di, mi) {
            violations.push(ViolationReport::new(
                loc("r1_final_line", d, None, Some(m), 1.0),
                bracket as f64,
                r1_final_line(di, mi) as f64,
            ));
        }
        if bracket <= 0 {
            violations.push(ViolationReport::new(loc("r1_bracket_positive", d, None, Some(m), 1.0), bracket as f64, 0.0));
        }

        if r1_bracket_printed(di, mi) != bracket {
            note(
                "bracket_last_term",
                "printed (d-m-1)(d-m); the identities give (d-m)(d-m+1)",
                m,
            );
        }
        let with_prefactor = ck(pow2(n)?.checked_mul(bracket), "prefactor")?;
        if with_prefactor != 4 * r1_final_line(di, mi) {
            note(
                "dropped_prefactor",
                "final closed form equals the bracket without the 2^(d-m-2) factor",
                m,
            );
        }
        if 4 * r1 != with_prefactor {
            note(
                "r1_vs_bracket",
                "sum of the c_l differs from 2^(d-m-2) times the bracket",
                m,
            );
        }
    }
    sort_reports(&mut violations);
    Ok(PositivityReport {
        violations,
        discrepancies: notes,
    })
}

/// Second differences of `ln curve(t)` on `steps` equally spaced points of
/// `[lo, hi]`; reports those above `tol`. In a report `rhs` is the second
/// difference and `lhs = 0`.
pub fn check_log_concavity_numeric<F>(curve: F, lo: f64, hi: f64, steps: usize, tol: f64) -> Result<Vec<ViolationReport>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if steps < 3 || !(lo < hi) {
        return domain("log-concavity check needs lo < hi and at least 3 points");
    }
    let dt = (hi - lo) / (steps - 1) as f64;
    let logs: Vec<f64> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let t = if i == steps - 1 { hi } else { lo + i as f64 * dt };
            let p = curve(t)?;
            if !(p > 0.0) {
                return domain(format!("curve must be positive, got {p} at t = {t}"));
            }
            Ok(p.ln())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..steps - 1 {
        let second = logs[i + 1] - 2.0 * logs[i] + logs[i - 1];
        let t = lo + i as f64 * dt;
        let r = ViolationReport::new(
            Location {
                check: "log_concavity".into(),
                d: None,
                k: None,
                m: None,
                at: t,
            },
            0.0,
            second,
        );
        out.extend(keep(r, tol));
    }
    Ok(out)
}

/// Random priors on region types, drawn as normalized exponentials.
pub fn random_weights(d: usize, rng: &mut ChaCha8Rng) -> RegionTypeWeights {
    let raw: Vec<f64> = (0..=d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    RegionTypeWeights::new(raw.iter().map(|x| x / total).collect()).expect("normalized weights are valid")
}

/// For `draws` random prior vectors, `sum_{k,m} P_k P_m H_{k,m}(h) >= -tol`
/// on the grid. The quadratic form is also compared with the direct
/// single-polynomial slack; disagreement beyond `tol` is reported as well.
pub fn check_quadratic_form_random(d: usize, draws: usize, seed: u64, grid: &SweepGrid) -> Result<Vec<ViolationReport>> {
    if d < 1 {
        return domain("d must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for draw in 0..draws {
        let w = random_weights(d, &mut rng);
        for &h in &grid.h_points {
            let mut form = 0.0;
            for (k, &pk) in w.weights().iter().enumerate() {
                for (m, &pm) in w.weights().iter().enumerate() {
                    let (l, r) = h_km_sides(d, k, m, h)?;
                    form += pk * pm * (l - r);
                }
            }
            let (l1, r1) = h_ratio_sides(&w, h)?;
            out.extend(keep(
                ViolationReport::new(loc("quadratic_form", d, Some(draw), None, h), form, 0.0),
                grid.tolerance,
            ));
            let gap = (form - (l1 - r1)).abs();
            out.extend(keep(
                ViolationReport::new(loc("quadratic_form_matches_h_ratio", d, Some(draw), None, h), -gap, 0.0),
                grid.tolerance * (1.0 + l1.abs() + r1.abs()),
            ));
        }
    }
    sort_reports(&mut out);
    Ok(out)
}

/// Region-type weights of an equiprobable `n^d` grid,
/// `P_k = C(d, k) (n - 2)^k 2^(d - k) / n^d`.
pub fn uniform_grid_weights(n: usize, d: usize) -> Result<RegionTypeWeights> {
    if n < 2 || d < 1 {
        return domain(format!("need n >= 2 and d >= 1, got n = {n}, d = {d}"));
    }
    let row = binomial_row(d)?;
    let (nf, inner) = (n as f64, (n - 2) as f64);
    let p = row
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * (inner / nf).powi(k as i32) * (2.0 / nf).powi((d - k) as i32))
        .collect();
    RegionTypeWeights::new(p)
}

/// Settings for [`verify_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub d_max: usize,
    pub h_steps: usize,
    pub tolerance: f64,
    /// Largest `d` for the exact integer checks.
    pub exact_d_max: usize,
    pub random_draws: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            d_max: 10,
            h_steps: 1000,
            tolerance: ANALYTIC_TOL,
            exact_d_max: 40,
            random_draws: 100,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub binomial_identities: bool,
    pub checks_run: usize,
    pub violations: Vec<ViolationReport>,
    pub discrepancies: Vec<Discrepancy>,
}

impl VerifyReport {
    pub fn clean(&self) -> bool {
        self.binomial_identities && self.violations.is_empty()
    }
}

/// Every sweep in this module at the given sizes.
pub fn verify_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.d_max < 2 {
        return domain(format!("d_max must be at least 2 for the pairwise checks, got {}", cfg.d_max));
    }
    let grid = SweepGrid::uniform(cfg.h_steps, 1..=cfg.d_max, cfg.tolerance)?;
    let mut violations = Vec::new();
    let mut checks = 0usize;

    for d in 1..=cfg.d_max {
        // Uniform priors on n-point grids.
        for n in [2usize, 3, 4, 8] {
            violations.extend(check_h_ratio(&uniform_grid_weights(n, d)?, &grid)?);
            checks += 1;
        }
        violations.extend(check_quadratic_form_random(d, cfg.random_draws, cfg.seed.wrapping_add(d as u64), &grid)?);
        checks += 1;
        if d >= 2 {
            violations.extend(check_pairwise(d, &grid)?);
            checks += 1;
            for k in 0..=d {
                for m in 0..=d {
                    violations.extend(check_keystone_inequality(d, k, m, grid.h_points(), cfg.tolerance)?);
                    checks += 1;
                }
            }
        }
    }

    let mut notes: Vec<Discrepancy> = Vec::new();
    let coarse: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    for d in 2..=cfg.exact_d_max {
        let h = if d <= cfg.d_max { grid.h_points() } else { &coarse[..] };
        let rep = check_r_positivity(d, h, cfg.tolerance)?;
        checks += 1;
        violations.extend(rep.violations);
        for n in rep.discrepancies {
            match notes.iter_mut().find(|x| x.kind == n.kind) {
                Some(x) => x.cases += n.cases,
                None => notes.push(n),
            }
        }
    }
    let binomial_identities = check_binomial_identities(cfg.exact_d_max)?;
    checks += 1;
    sort_reports(&mut violations);
    Ok(VerifyReport {
        config: cfg.clone(),
        binomial_identities,
        checks_run: checks,
        violations,
        discrepancies: notes,
    })
}
