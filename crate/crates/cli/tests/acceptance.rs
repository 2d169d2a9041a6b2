//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#![allow(clippy::excessive_precision)]

use std::process::{Command, ExitCode};

use errprob::adaptive::{averaged_qam_curve, curve_quadrature, mean_spectral_efficiency, thresholds, AdaptiveScheme, ShadowingSpec, ThresholdMode};
use errprob::bounds::{
    build_local_bounds, estimate_asymptote, from_db, invert_ep_auto, lub_ep, lub_inverse, llb_ep, llb_inverse, loglog_slope,
    to_db, ub_ep, ub_inverse,
};
use errprob::fading::{average_ep, average_ep_gamma, FadingModel};
use errprob::gaussian::erfc;
use errprob::grid::{ep_from_weights, ep_grid, GridConstellation};
use errprob::modem::bpsk_bep;
use errprob::quad::QuadratureSpec;
use errprob::sim::{mc_ep, McConfig};
use errprob::verify::{
    check_log_concavity_numeric, h_ratio_sides, random_weights, uniform_grid_weights, verify_all, VerifyConfig, FD_TOL,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// erfc at x_i = -6 + 32 i / 30, 50-digit reference values rounded to 20.
const ERFC_TABLE: [(f64, f64); 31] = [
    (-6.0, 1.9999999999999999785),
    (-4.933333333333334, 1.9999999999969799276),
    (-3.8666666666666667, 1.9999999545608254733),
    (-2.8, 1.9999249868053345409),
    (-1.7333333333333334, 1.9857660123270178417),
    (-0.666666666666667, 1.6542214138488398985),
    (0.40000000000000036, 5.7160764495333120329e-1),
    (1.4666666666666668, 3.8062607032444937744e-2),
    (2.533333333333333, 3.4009446703111206623e-4),
    (3.5999999999999996, 3.5586299300768624192e-7),
    (4.666666666666666, 4.1209263529188038582e-11),
    (5.7333333333333325, 5.1392985105789076809e-16),
    (6.800000000000001, 6.8008605653311670944e-22),
    (7.866666666666667, 9.4650054019122725033e-29),
    (8.933333333333334, 1.3775330812051724193e-36),
    (10.0, 2.088487583762544757e-45),
    (11.066666666666666, 3.2894643214382295829e-55),
    (12.133333333333333, 5.3717243652127991248e-66),
    (13.2, 9.0811984959797983969e-78),
    (14.266666666666666, 1.5874805429163355775e-90),
    (15.333333333333332, 2.8668935168643833031e-104),
    (16.4, 5.3448278573461808537e-119),
    (17.466666666666665, 1.028052814727912928e-134),
    (18.533333333333335, 2.0391199789848544901e-151),
    (19.6, 4.1690528423652481478e-169),
    (20.666666666666668, 8.7831233882213449285e-188),
    (21.733333333333334, 1.906117729542366697e-207),
    (22.8, 4.2602003566839228815e-228),
    (23.866666666666667, 9.8038177768444283619e-250),
    (24.933333333333334, 2.3225389703284560064e-272),
    (26.0, 5.6631924088561428465e-296),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_erfc() -> Outcome {
    let mut worst_in = 0.0f64;
    let mut worst_out = 0.0f64;
    for &(x, want) in &ERFC_TABLE {
        let rel = ((erfc(x) - want) / want).abs();
        if x.abs() <= 6.0 {
            worst_in = worst_in.max(rel);
        } else {
            worst_out = worst_out.max(rel);
        }
    }
    outcome(
        worst_in <= 1e-13 && worst_out <= 1e-10,
        format!("max rel err {worst_in:.2e} on |x|<=6 (tol 1e-13), {worst_out:.2e} beyond (tol 1e-10)"),
    )
}

fn c2_grid_mc() -> Outcome {
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    let mut reruns = 0;
    for n in 2..=4usize {
        for d in 1..=3usize {
            let c = GridConstellation::uniform(n, d, 2.0).unwrap();
            let pts = c.points();
            for t in [-1.0, 0.0, 1.0] {
                let exact = ep_grid(&c, t);
                let mut ok = false;
                for seed in [20_240_001u64, 20_240_002] {
                    let est = mc_ep(&pts, c.priors(), t, &McConfig::new(10_000_000, seed).unwrap()).unwrap();
                    let z = (est.p_hat - exact).abs() / est.std_err;
                    if est.covers(exact, 3.0) {
                        worst = worst.max(z);
                        ok = true;
                        break;
                    }
                    reruns += 1;
                }
                if !ok {
                    fails.push(format!("(n={n},d={d},t={t})"));
                }
            }
        }
    }
    outcome(
        fails.is_empty(),
        format!("27 cases at 1e7 samples, worst |z| {worst:.2} (tol 3), {reruns} second-seed reruns, failing {fails:?}"),
    )
}

fn c3_grid_log_concavity() -> Outcome {
    let mut total = 0;
    for n in [2usize, 4, 8, 16] {
        for d in 1..=4usize {
            let c = GridConstellation::uniform(n, d, 2.0).unwrap();
            total += check_log_concavity_numeric(|t| Ok(ep_grid(&c, t)), -3.0, 3.0, 601, FD_TOL).unwrap().len();
        }
    }
    outcome(total == 0, format!("16 curves x 601 points, {total} violations (tol 1e-9)"))
}

fn c4_sweeps() -> Outcome {
    let report = verify_all(&VerifyConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_d1 = 0.0f64;
    for _ in 0..100 {
        let w = random_weights(1, &mut rng);
        for i in 0..1000 {
            let (l, r) = h_ratio_sides(&w, i as f64 / 1000.0).unwrap();
            worst_d1 = worst_d1.max((l - r).abs());
        }
    }
    outcome(
        report.clean() && worst_d1 <= 1e-12,
        format!(
            "d<=10 and exact d<=40: {} checks, {} violations, binomial identities {}; d=1 h-ratio max |slack| {worst_d1:.1e}; {} printed-form discrepancies logged",
            report.checks_run,
            report.violations.len(),
            report.binomial_identities,
            report.discrepancies.len()
        ),
    )
}

fn fading_matrix() -> Vec<FadingModel> {
    let mut v = Vec::new();
    for m in [0.5, 1.0, 4.0] {
        v.push(FadingModel::nakagami(m).unwrap());
    }
    for s in [4.0, 8.0, 12.0] {
        v.push(FadingModel::lognormal(s).unwrap());
    }
    for n in [1, 2, 4] {
        v.push(FadingModel::mrc(n).unwrap());
    }
    v
}

fn c5_averaged_log_concavity() -> Outcome {
    let q = curve_quadrature();
    let mut total = 0;
    let mut curves = 0;
    for (n, d) in [(2usize, 1usize), (4, 1), (4, 2), (8, 3)] {
        let w = uniform_grid_weights(n, d).unwrap();
        for model in fading_matrix() {
            let v = check_log_concavity_numeric(
                |t| average_ep(|s| Ok(ep_from_weights(&w, 2.0, s)), &model, t, &q).map(|r| r.value),
                -2.0,
                4.0,
                601,
                FD_TOL,
            )
            .unwrap();
            total += v.len();
            curves += 1;
        }
    }
    outcome(total == 0, format!("{curves} averaged curves x 601 points on [-2,4], {total} violations (tol 1e-9)"))
}

fn c6_rayleigh() -> Outcome {
    let q = QuadratureSpec::default();
    let rayleigh = FadingModel::nakagami(1.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..25 {
        let g = 10f64.powf(-1.0 + 5.0 * i as f64 / 24.0);
        let got = average_ep_gamma(|x| Ok(bpsk_bep(x)), &rayleigh, g, &q).unwrap().value;
        let want = 0.5 * (1.0 - (g / (1.0 + g)).sqrt());
        worst = worst.max((got - want).abs());
    }
    outcome(worst <= 1e-9, format!("25 points on [0.1, 1e4], max abs err {worst:.2e} (tol 1e-9)"))
}

fn c7_asymptote() -> Outcome {
    let q = curve_quadrature();
    let rayleigh = FadingModel::rayleigh();
    let bpsk = |g: f64| average_ep_gamma(|x| Ok(bpsk_bep(x)), &rayleigh, g, &q).map(|r| r.value);
    let k = estimate_asymptote(bpsk, 1.0).map(|a| a.k);
    let k_err = k.as_ref().map(|k| (k / 0.25 - 1.0).abs()).unwrap_or(f64::INFINITY);
    let mut worst = 0.0f64;
    for n in [1u32, 2, 4] {
        for m in [4u32, 16, 64] {
            let curve = averaged_qam_curve(m, FadingModel::mrc(n).unwrap(), q).unwrap();
            for g in [1e4, 1e5, 1e6] {
                let s = loglog_slope(&curve, g).unwrap();
                worst = worst.max((s / -(n as f64) - 1.0).abs());
            }
        }
    }
    outcome(
        k_err <= 1e-3 && worst <= 0.02,
        format!("Rayleigh BPSK K = {k:?}, rel err {k_err:.2e} (tol 1e-3); MRC slope max rel dev {worst:.2e} (tol 2%)"),
    )
}

fn c8_sandwich() -> Outcome {
    let q = curve_quadrature();
    let mut worst_slack = f64::INFINITY;
    let mut worst_touch = 0.0f64;
    let mut errors = Vec::new();
    for (lo, hi) in [(1e-3, 1e-1), (1e-4, 1e-2)] {
        for m in [4u32, 16, 64] {
            for n in [1u32, 2, 4] {
                let curve = averaged_qam_curve(m, FadingModel::mrc(n).unwrap(), q).unwrap();
                let mut run = || -> errprob::Result<()> {
                    let asym = estimate_asymptote(&curve, n as f64)?;
                    let roi = errprob::bounds::RoiSpec::new(lo, hi)?;
                    let lb = build_local_bounds(&curve, asym, roi, None)?;
                    let (a, b) = (to_db(lb.gamma_big_m()), to_db(lb.gamma_m()));
                    for i in 0..=100 {
                        let g = from_db(a + (b - a) * i as f64 / 100.0);
                        let (ex, up, lu, ll) = (curve(g)?, ub_ep(&asym, g)?, lub_ep(&lb, g)?, llb_ep(&lb, g)?);
                        let s = (ex - ll).min(lu - ex).min(up - lu) / ex;
                        worst_slack = worst_slack.min(s);
                    }
                    for (got, want) in [
                        (curve(lb.gamma_m())?, lo),
                        (curve(lb.gamma_big_m())?, hi),
                        (lub_ep(&lb, lb.gamma_m())?, lo),
                        (llb_ep(&lb, lb.gamma_big_m())?, hi),
                    ] {
                        worst_touch = worst_touch.max((got / want - 1.0).abs());
                    }
                    Ok(())
                };
                if let Err(e) = run() {
                    errors.push(format!("M={m},N={n},roi=[{lo},{hi}]: {e}"));
                }
            }
        }
    }
    outcome(
        errors.is_empty() && worst_slack >= -1e-9 && worst_touch <= 1e-9,
        format!("18 configs x 101 points, min relative slack {worst_slack:.2e} (tol -1e-9), touch rel err {worst_touch:.2e} (tol 1e-9), errors {errors:?}"),
    )
}

type Inverse = fn(&errprob::bounds::LocalBoundSet, f64) -> errprob::Result<f64>;

fn c9_inversion() -> Outcome {
    let q = curve_quadrature();
    let mut closed = 0.0f64;
    let mut exact = 0.0f64;
    for (m, n) in [(4u32, 1u32), (16, 2), (64, 4)] {
        let curve = averaged_qam_curve(m, FadingModel::mrc(n).unwrap(), q).unwrap();
        let asym = estimate_asymptote(&curve, n as f64).unwrap();
        let lb = build_local_bounds(&curve, asym, errprob::bounds::RoiSpec::new(1e-4, 1e-2).unwrap(), None).unwrap();
        for &p in &[1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
            for back in [
                ub_ep(&asym, ub_inverse(&asym, p).unwrap()).unwrap(),
                lub_ep(&lb, lub_inverse(&lb, p).unwrap()).unwrap(),
                llb_ep(&lb, llb_inverse(&lb, p).unwrap()).unwrap(),
            ] {
                closed = closed.max((back / p - 1.0).abs());
            }
            let (a, b) = (to_db(lb.gamma_big_m()), to_db(lb.gamma_m()));
            for k in 0..=4 {
                let g = from_db(a + (b - a) * k as f64 / 4.0);
                let ub = ub_ep(&asym, g).unwrap();
                closed = closed.max((ub_inverse(&asym, ub).unwrap() / g - 1.0).abs());
                // The local bounds are clipped to the ROI edges; invert only
                // where they are not.
                let roi = lb.roi();
                for (f, inv) in [(lub_ep(&lb, g).unwrap(), lub_inverse as Inverse), (llb_ep(&lb, g).unwrap(), llb_inverse)] {
                    if f > roi.pe_min && f < roi.pe_max {
                        closed = closed.max((inv(&lb, f).unwrap() / g - 1.0).abs());
                    }
                }
            }
            let g = invert_ep_auto(&curve, p).unwrap();
            exact = exact.max((curve(g).unwrap() / p - 1.0).abs());
        }
    }
    outcome(
        closed <= 1e-12 && exact <= 1e-10,
        format!("closed-form round trip max rel err {closed:.2e} (tol 1e-12), exact-curve EP residual {exact:.2e} (tol 1e-10)"),
    )
}

fn c10_spectral_efficiency() -> Outcome {
    let q = curve_quadrature();
    let sizes = vec![4u32, 16, 64];
    let th = |mode| {
        thresholds(
            &AdaptiveScheme {
                sizes: sizes.clone(),
                target_bep: 1e-3,
                mode,
                fading: FadingModel::mrc(2).unwrap(),
                diversity: None,
                roi: None,
            },
            &q,
        )
        .unwrap()
    };
    let (t_ex, t_lub, t_llb) = (th(ThresholdMode::Exact), th(ThresholdMode::Lub), th(ThresholdMode::Llb));
    let mut worst = f64::INFINITY;
    let mut limits = true;
    for sigma in [4.0, 8.0, 12.0] {
        for i in 0..50 {
            let sh = ShadowingSpec::new(-10.0 + 70.0 * i as f64 / 49.0, sigma).unwrap();
            let e = |t: &[f64]| mean_spectral_efficiency(&sizes, t, &sh).unwrap();
            let (ex, lu, ll) = (e(&t_ex), e(&t_lub), e(&t_llb));
            worst = worst.min((ex - lu).min(ll - ex));
        }
        let lo = mean_spectral_efficiency(&sizes, &t_ex, &ShadowingSpec::new(-200.0, sigma).unwrap()).unwrap();
        let hi = mean_spectral_efficiency(&sizes, &t_ex, &ShadowingSpec::new(300.0, sigma).unwrap()).unwrap();
        limits &= lo.abs() <= 1e-12 && (hi - 6.0).abs() <= 1e-12;
    }
    outcome(
        worst >= -1e-12 && limits,
        format!("3 sigmas x 50 medians, min ordering slack {worst:.2e} (tol -1e-12), limits 0 and log2 64 {}", if limits { "ok" } else { "off" }),
    )
}

/// Drops the timestamp field from manifest lines (CSV comment or JSON).
fn strip_timestamp(s: &str) -> String {
    s.lines()
        .map(|l| match l.find("\"timestamp\":") {
            Some(i) => {
                let rest = &l[i..];
                let start = rest.find(": \"").map(|j| j + 3).or_else(|| rest.find(":\"").map(|j| j + 2)).unwrap_or(0);
                let end = rest[start..].find('"').map(|j| start + j + 1).unwrap_or(rest.len());
                format!("{}{}", &l[..i], &rest[end..])
            }
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn c11_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_errprob");
    let scenario = std::env::temp_dir().join(format!("errprob-acc-{}.json", std::process::id()));
    std::fs::write(
        &scenario,
        r#"{"sizes":[4,16,64],"target_bep":1e-3,"mode":"lub","fading":"mrc:n=2","shadowing":{"median_db":20,"sigma_db":8}}"#,
    )
    .unwrap();
    let sc = scenario.to_str().unwrap();
    let cmds: Vec<Vec<&str>> = vec![
        vec!["ep", "--mod", "grid:n=4,d=2,a=2", "--snr-db", "0:20:2"],
        vec!["ep", "--mod", "psk:M=8", "--snr-db", "0:20:5"],
        vec!["ep", "--mod", "parity3", "--snr-db", "0:10:5"],
        vec!["avg-ep", "--mod", "qam:M=16", "--fading", "lognormal:sdb=8", "--snr-db", "0:40:10"],
        vec!["bounds", "--mod", "qam:M=16", "--fading", "mrc:n=2", "--roi", "1e-4:1e-2"],
        vec!["verify", "--d-max", "4", "--h-steps", "100", "--exact-d-max", "12"],
        vec!["se", "--scenario", sc],
        vec!["se", "--scenario", sc, "--median-sweep", "0:40:10"],
        vec!["outage", "--required-db", "0:30:5", "--median-db", "15", "--sigma-db", "6"],
        vec!["outage", "--fading", "nakagami:m=2"],
        vec!["mc", "--mod", "grid:n=4,d=2,a=2", "--snr-db", "0:6:3", "--samples", "200000", "--seed", "11"],
        vec!["mc", "--mod", "qam:M=16", "--snr-db", "10:10:0", "--samples", "200000", "--seed", "11", "--bep"],
    ];
    let mut diffs = Vec::new();
    for args in &cmds {
        let run = || {
            let out = Command::new(bin).args(args).env_remove("ERRPROB_TIMESTAMP").output().unwrap();
            (out.status.code(), strip_timestamp(&String::from_utf8_lossy(&out.stdout)))
        };
        let (a, b) = (run(), run());
        if a != b || a.0 != Some(0) || a.1.is_empty() {
            diffs.push(format!("{} (status {:?})", args.join(" "), a.0));
        }
    }
    let _ = std::fs::remove_file(&scenario);
    outcome(diffs.is_empty(), format!("{} commands run twice, mismatches {diffs:?}", cmds.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("erfc accuracy", c1_erfc),
        ("grid EP vs Monte Carlo", c2_grid_mc),
        ("log-concavity of grid EP", c3_grid_log_concavity),
        ("inequality sweeps and exact identities", c4_sweeps),
        ("log-concavity of fading-averaged EP", c5_averaged_log_concavity),
        ("Rayleigh BPSK oracle", c6_rayleigh),
        ("asymptote estimation", c7_asymptote),
        ("bound sandwich", c8_sandwich),
        ("inversion round trips", c9_inversion),
        ("spectral-efficiency ordering", c10_spectral_efficiency),
        ("CLI determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let r = f();
        if !r.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if r.pass { "PASS" } else { "FAIL" },
            i + 1,
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
