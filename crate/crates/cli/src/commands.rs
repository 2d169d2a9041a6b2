//! Subcommand arguments and handlers.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use errprob::adaptive::{
    error_outage, mean_spectral_efficiency, run_scenario, thresholds, AdaptiveScheme, Scenario, ShadowingSpec,
    ThresholdMode,
};
use errprob::bounds::{
    build_local_bounds, estimate_asymptote, from_db, llb_ep, lub_ep, to_db, ub_ep, AsymptoteSpec, LocalBoundSet, RoiSpec,
};
use errprob::fading::{average_ep_gamma, FadingModel};
use errprob::quad::QuadratureSpec;
use errprob::sim::{gray_qam_table, mc_bep_gray_qam, mc_ep, McConfig, DEFAULT_BATCH};
use errprob::verify::{check_log_concavity_numeric, sort_reports, uniform_grid_weights, verify_all, VerifyConfig, FD_TOL};
use errprob::Error;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::modspec::Modulation;
use crate::output::{num, open_sink, write_csv, write_json, RunManifest};
use crate::CliError;

pub const QUAD_TOL_ENV: &str = "ERRPROB_QUAD_RTOL";

/// `start:stop:step` in dB; step 0 means the single point `start`.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let usage = || CliError::Usage(format!("bad sweep `{s}`, expected start:stop:step"));
    if parts.len() != 3 {
        return Err(usage());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| usage())?;
    let (a, b, step) = (v[0], v[1], v[2]);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || step < 0.0 {
        return Err(usage());
    }
    if step == 0.0 || a == b {
        return Ok(vec![a]);
    }
    if b < a {
        return Err(usage());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

/// `lo:hi` pair of probabilities.
fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("expected lo:hi, got `{s}`")))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number `{x}`")));
    Ok((p(a)?, p(b)?))
}

fn parse_mod(s: &str) -> Result<Modulation, CliError> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn parse_fading(s: &str) -> Result<FadingModel, CliError> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuadArgs {
    /// Relative quadrature tolerance for fading averages.
    #[arg(long, env = QUAD_TOL_ENV, default_value_t = 1e-10)]
    pub quad_tol: f64,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        let q = QuadratureSpec {
            rel_tol: self.quad_tol,
            ..QuadratureSpec::default()
        };
        q.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(q)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EpArgs {
    /// grid:n=..,d=..,a=.. | qam:M=.. | psk:M=.. | parity3
    #[arg(long = "mod")]
    pub modulation: String,
    /// SNR sweep in dB, start:stop:step.
    #[arg(long)]
    pub snr_db: String,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn cmd_ep(args: &EpArgs) -> Result<(), CliError> {
    let m = parse_mod(&args.modulation)?;
    let snr = parse_sweep(&args.snr_db)?;
    let curve = m.curve()?;
    let rows: Vec<Vec<String>> = snr
        .par_iter()
        .map(|&db| Ok(vec![num(db), num(curve(from_db(db))?)]))
        .collect::<Result<_, Error>>()?;
    let manifest = RunManifest::new("ep", args);
    write_csv(&mut *open_sink(args.output.as_deref())?, &manifest, &[], &["gamma_db", "ep"], &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AvgEpArgs {
    #[arg(long = "mod")]
    pub modulation: String,
    /// nakagami:m=.. | lognormal:sdb=.. | mrc:n=.. | none
    #[arg(long)]
    pub fading: String,
    /// Mean SNR sweep in dB, start:stop:step.
    #[arg(long)]
    pub snr_db: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn cmd_avg_ep(args: &AvgEpArgs) -> Result<(), CliError> {
    let m = parse_mod(&args.modulation)?;
    let fading = parse_fading(&args.fading)?;
    let snr = parse_sweep(&args.snr_db)?;
    let q = args.quad.spec()?;
    let curve = m.curve()?;
    let rows: Vec<Vec<String>> = snr
        .par_iter()
        .map(|&db| {
            let r = average_ep_gamma(&curve, &fading, from_db(db), &q)
                .map_err(|e| CliError::Numeric(format!("at gamma_bar_db = {db}: {e}")))?;
            Ok(vec![num(db), num(r.value)])
        })
        .collect::<Result<_, CliError>>()?;
    let manifest = RunManifest::new("avg-ep", args);
    let notes = [("mean_gain", json!(fading.mean_gain()))];
    write_csv(&mut *open_sink(args.output.as_deref())?, &manifest, &notes, &["gamma_bar_db", "ep_avg"], &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long = "mod")]
    pub modulation: String,
    #[arg(long)]
    pub fading: String,
    /// Region of interest P_em:P_eM.
    #[arg(long, default_value = "1e-3:1e-1")]
    pub roi: String,
    /// Asymptote constant; skips estimation together with --D.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// Diversity order; defaults to the fading model's.
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: Option<f64>,
    /// Exact SNR (linear) at P_em, instead of inverting the curve.
    #[arg(long)]
    pub gamma_m: Option<f64>,
    /// Exact SNR (linear) at P_eM.
    #[arg(long = "gamma-M")]
    #[serde(rename = "gamma_M")]
    pub gamma_big_m: Option<f64>,
    /// Mean SNR sweep in dB; defaults to 41 points across the ROI.
    #[arg(long)]
    pub snr_db: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub quad: QuadArgs,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Also write the bound set as JSON here.
    #[arg(long)]
    #[serde(skip)]
    pub json: Option<PathBuf>,
}

pub fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let m = parse_mod(&args.modulation)?;
    let fading = parse_fading(&args.fading)?;
    let (lo, hi) = parse_pair(&args.roi)?;
    let roi = RoiSpec::new(lo, hi).map_err(|e| CliError::Usage(e.to_string()))?;
    let q = QuadratureSpec {
        rel_tol: args.quad.quad_tol.min(1e-12),
        ..args.quad.spec()?
    };
    let base = m.curve()?;
    let curve = |g: f64| average_ep_gamma(&base, &fading, g, &q).map(|r| r.value);

    let d = match args.d.or_else(|| fading.diversity()) {
        Some(d) => d,
        None => return Err(CliError::Model(format!("no log-linear asymptote for fading model `{fading}`; pass --D"))),
    };
    let asym = match args.k {
        Some(k) => AsymptoteSpec::new(k, d).map_err(|e| CliError::Usage(e.to_string()))?,
        None => estimate_asymptote(curve, d).map_err(|e| match e {
            Error::NonConvergence(msg) => CliError::Model(format!("no log-linear asymptote: {msg}")),
            other => other.into(),
        })?,
    };
    let anchors = match (args.gamma_m, args.gamma_big_m) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(CliError::Usage("--gamma-m and --gamma-M go together".into())),
    };
    let lb: LocalBoundSet = build_local_bounds(curve, asym, roi, anchors)?;
    let snr = match &args.snr_db {
        Some(s) => parse_sweep(s)?,
        None => {
            let (a, b) = (to_db(lb.gamma_big_m()), to_db(lb.gamma_m()));
            (0..=40).map(|i| a + (b - a) * i as f64 / 40.0).collect()
        }
    };
    let rows: Vec<Vec<String>> = snr
        .par_iter()
        .map(|&db| {
            let g = from_db(db);
            Ok(vec![
                num(db),
                num(curve(g)?),
                num(ub_ep(&asym, g)?),
                num(lub_ep(&lb, g)?),
                num(llb_ep(&lb, g)?),
            ])
        })
        .collect::<Result<_, Error>>()?;
    let manifest = RunManifest::new("bounds", args);
    let bounds_json = serde_json::to_value(lb).map_err(|e| CliError::Numeric(e.to_string()))?;
    write_csv(
        &mut *open_sink(args.output.as_deref())?,
        &manifest,
        &[("bounds", bounds_json)],
        &["gamma_bar_db", "exact", "ub", "lub", "llb"],
        &rows,
    )?;
    if let Some(p) = &args.json {
        write_json(&mut *open_sink(Some(p))?, &manifest, &lb)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Largest dimension for the floating-point sweeps (at least 2).
    #[arg(long, default_value_t = 10)]
    pub d_max: usize,
    /// Number of h points in [0, 1).
    #[arg(long, default_value_t = 1000)]
    pub h_steps: usize,
    /// Largest dimension for the exact integer checks.
    #[arg(long, default_value_t = 40)]
    pub exact_d_max: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Add a curve that is not log-concave; the run must then fail.
    #[arg(long)]
    pub negative_control: bool,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    if args.d_max < 2 {
        return Err(CliError::Usage(format!("--d-max must be at least 2 (pairwise checks need d > 1), got {}", args.d_max)));
    }
    if args.h_steps == 0 || !(args.tol >= 0.0) || args.exact_d_max < 2 {
        return Err(CliError::Usage("--h-steps > 0, --tol >= 0 and --exact-d-max >= 2 required".into()));
    }
    let cfg = VerifyConfig {
        d_max: args.d_max,
        h_steps: args.h_steps,
        tolerance: args.tol,
        exact_d_max: args.exact_d_max,
        random_draws: 100,
        seed: args.seed,
    };
    let mut report = verify_all(&cfg)?;
    // Log-concavity of the grid curves in t.
    for n in [2usize, 4, 8] {
        for d in 1..=3usize {
            let w = uniform_grid_weights(n, d)?;
            let v = check_log_concavity_numeric(
                |t| Ok(errprob::grid::ep_from_weights(&w, 2.0, t)),
                -3.0,
                3.0,
                601,
                FD_TOL,
            )?;
            report.violations.extend(v.into_iter().map(|mut r| {
                r.location.check = format!("log_concavity:grid:n={n},d={d}");
                r
            }));
            report.checks_run += 1;
        }
    }
    if args.negative_control {
        let v = check_log_concavity_numeric(|t: f64| Ok(0.5 * (t * t - 9.0).exp()), -3.0, 3.0, 601, FD_TOL)?;
        report.violations.extend(v.into_iter().map(|mut r| {
            r.location.check = "log_concavity:negative_control".into();
            r
        }));
        report.checks_run += 1;
    }
    sort_reports(&mut report.violations);
    let clean = report.clean();
    let manifest = RunManifest::new("verify", args);
    write_json(&mut *open_sink(args.output.as_deref())?, &manifest, &report)?;
    if clean {
        Ok(())
    } else {
        Err(CliError::Violations(report.violations.len()))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SchemeArgs {
    /// Scenario JSON; the flags below are ignored when given.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Constellation sizes, e.g. 4,16,64.
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    pub sizes: Vec<u32>,
    #[arg(long, default_value_t = 1e-3)]
    pub target_bep: f64,
    /// exact | lub | llb
    #[arg(long, default_value = "exact")]
    pub mode: String,
    #[arg(long, default_value = "mrc:n=2")]
    pub fading: String,
    #[arg(long)]
    pub diversity: Option<u32>,
    #[arg(long, default_value_t = 20.0)]
    pub median_db: f64,
    #[arg(long, default_value_t = 8.0)]
    pub sigma_db: f64,
}

impl SchemeArgs {
    fn scenario(&self) -> Result<Scenario, CliError> {
        let s = match &self.scenario {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            None => Scenario {
                scheme: AdaptiveScheme {
                    sizes: self.sizes.clone(),
                    target_bep: self.target_bep,
                    mode: self.mode.parse::<ThresholdMode>().map_err(|e| CliError::Usage(e.to_string()))?,
                    fading: parse_fading(&self.fading)?,
                    diversity: self.diversity,
                    roi: None,
                },
                shadowing: ShadowingSpec {
                    median_db: self.median_db,
                    sigma_db: self.sigma_db,
                },
            },
        };
        s.scheme.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        ShadowingSpec::new(s.shadowing.median_db, s.shadowing.sigma_db).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }
}

fn scheme_thresholds(s: &Scenario, q: &QuadratureSpec) -> Result<Vec<f64>, CliError> {
    thresholds(&s.scheme, q).map_err(|e| match e {
        Error::Domain(msg) if msg.contains("asymptote") => CliError::Model(msg),
        Error::NonConvergence(msg) if msg.contains("asymptote") => CliError::Model(msg),
        other => other.into(),
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scheme: SchemeArgs,
    /// Sweep the shadowing median (dB) and write CSV instead of JSON.
    #[arg(long)]
    pub median_sweep: Option<String>,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn cmd_se(args: &SeArgs) -> Result<(), CliError> {
    let s = args.scheme.scenario()?;
    let q = errprob::adaptive::curve_quadrature();
    let manifest = RunManifest::new("se", args);
    let mut sink = open_sink(args.output.as_deref())?;
    match &args.median_sweep {
        None => {
            scheme_thresholds(&s, &q)?;
            let r = run_scenario(&s, &q)?;
            write_json(&mut *sink, &manifest, &r)?;
        }
        Some(sw) => {
            let th = scheme_thresholds(&s, &q)?;
            let rows = parse_sweep(sw)?
                .into_iter()
                .map(|med| {
                    let sh = ShadowingSpec::new(med, s.shadowing.sigma_db)?;
                    Ok(vec![num(med), num(mean_spectral_efficiency(&s.scheme.sizes, &th, &sh)?)])
                })
                .collect::<Result<Vec<_>, Error>>()?;
            write_csv(&mut *sink, &manifest, &[("thresholds_db", json!(th))], &["median_db", "eta"], &rows)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutageArgs {
    /// Required mean SNR sweep in dB, start:stop:step. Without it the
    /// thresholds of the scheme are used.
    #[arg(long)]
    pub required_db: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn cmd_outage(args: &OutageArgs) -> Result<(), CliError> {
    let manifest = RunManifest::new("outage", args);
    let mut sink = open_sink(args.output.as_deref())?;
    match &args.required_db {
        Some(sw) => {
            let sh = ShadowingSpec::new(args.scheme.median_db, args.scheme.sigma_db)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let rows: Vec<Vec<String>> = parse_sweep(sw)?
                .into_iter()
                .map(|r| vec![num(r), num(error_outage(r, &sh))])
                .collect();
            write_csv(&mut *sink, &manifest, &[], &["required_db", "eo"], &rows)?;
        }
        None => {
            let s = args.scheme.scenario()?;
            let th = scheme_thresholds(&s, &errprob::adaptive::curve_quadrature())?;
            let rows: Vec<Vec<String>> = s
                .scheme
                .sizes
                .iter()
                .zip(&th)
                .map(|(&m, &t)| vec![m.to_string(), num(t), num(error_outage(t, &s.shadowing))])
                .collect();
            write_csv(&mut *sink, &manifest, &[], &["M", "required_db", "eo"], &rows)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McArgs {
    #[arg(long = "mod")]
    pub modulation: String,
    #[arg(long)]
    pub snr_db: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    pub batch: u64,
    /// Bit error rate with Gray mapping (square QAM only) instead of symbol errors.
    #[arg(long)]
    pub bep: bool,
    /// Print the Gray bit-to-symbol table to stderr.
    #[arg(long)]
    #[serde(skip)]
    pub gray_table: bool,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

pub fn cmd_mc(args: &McArgs) -> Result<(), CliError> {
    let m = parse_mod(&args.modulation)?;
    let snr = parse_sweep(&args.snr_db)?;
    let cfg = McConfig {
        samples: args.samples,
        seed: args.seed,
        batch: args.batch,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let qam = match (&m, args.bep) {
        (Modulation::Qam(q), _) => Some(*q),
        (_, true) => return Err(CliError::Usage("--bep needs a qam:M=.. modulation".into())),
        _ => None,
    };
    if args.gray_table {
        let q = qam.ok_or_else(|| CliError::Usage("--gray-table needs a qam:M=.. modulation".into()))?;
        eprintln!("bits,i,q");
        for e in gray_qam_table(q) {
            eprintln!("{:0w$b},{},{}", e.bits, e.i, e.q, w = q.bits_per_symbol() as usize);
        }
    }
    let mut rows = Vec::with_capacity(snr.len());
    for &db in &snr {
        let g = from_db(db);
        let est = if args.bep {
            mc_bep_gray_qam(qam.expect("checked above"), g, &cfg)?
        } else {
            let (pts, sigma) = m.points_and_sigma(g)?;
            let priors = vec![1.0 / pts.len() as f64; pts.len()];
            mc_ep(&pts, &priors, -sigma.ln(), &cfg)?
        };
        rows.push(vec![num(db), num(est.p_hat), num(est.std_err), est.samples.to_string(), est.seed.to_string()]);
    }
    let manifest = RunManifest::new("mc", args);
    write_csv(
        &mut *open_sink(args.output.as_deref())?,
        &manifest,
        &[],
        &["gamma_db", "p_hat", "std_err", "samples", "seed"],
        &rows,
    )?;
    Ok(())
}
