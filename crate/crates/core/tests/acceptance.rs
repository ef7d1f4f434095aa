//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use oie_core::adaptation::{oie_fixed_point, prediction_error, neg_grad_gamma, EffectiveNoise, OieParams, VisualDeviation};
use oie_core::condition::{Grid3, NoiseCondition};
use oie_core::emg::{calibrate, decompose, envelope, spectrum, Biquad, Calibration, EmgSeries};
use oie_core::identification::{compare_models, fit_tem, fixed_point_grid, identify, kkt_residual, Model, ObservedGrid, PsoConfig};
use oie_core::noise_models::{fit_haptic_regression, haptic_effective, ComplianceModel, HapticRegression};
use oie_core::seed;
use oie_core::trial_sim::plant::RECORD_HZ;
use oie_core::trial_sim::{perturbation_torque, simulate_trial, target_position, tracking_error, PlantConfig};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const PUBLISHED_GAMMA: f64 = 2.26;

fn params() -> OieParams {
    OieParams::new(PUBLISHED_GAMMA).unwrap()
}

fn c1_haptic_regression() -> Outcome {
    let reg = HapticRegression::PUBLISHED;
    let mut worst: f64 = 0.0;
    for (sp, table) in [(0.0, 5.06), (0.08, 5.86), (0.19, 7.85)] {
        worst = worst.max((haptic_effective(sp, &reg).unwrap() - table).abs());
    }
    check(worst <= 0.02, format!("max |deviation| = {worst:.4} (tol 0.02)"))
}

fn c2_haptic_refit() -> Outcome {
    let fit = fit_haptic_regression(&[(0.0, 5.06), (0.08, 5.86), (0.19, 7.85)]).unwrap();
    let rel = [
        (fit.alpha_p - 5.05).abs() / 5.05,
        (fit.beta_p - 6.84).abs() / 6.84,
        (fit.delta_p - 41.68).abs() / 41.68,
    ];
    let worst = rel.iter().cloned().fold(0.0, f64::max);
    check(
        worst <= 0.05,
        format!(
            "alpha_p = {:.4}, beta_p = {:.4}, delta_p = {:.4}; max relative deviation {:.4} (tol 0.05)",
            fit.alpha_p, fit.beta_p, fit.delta_p, worst
        ),
    )
}

fn c3_gradient() -> Outcome {
    let m = ComplianceModel::PUBLISHED;
    let noise = EffectiveNoise::PUBLISHED;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for c in NoiseCondition::all() {
        let (sv, sh) = noise.at(c);
        let mut u: f64 = 0.01;
        while u <= 1.5 + 1e-12 {
            // Fourth-order central stencil: with Γ near 25 and dΓ/du near
            // 1e-5 the two-point rule is roundoff-limited at ~1e-5.
            let h = 2e-3;
            let g = |x: f64| prediction_error(x, sv, sh, &m).unwrap();
            let fd = (g(u - 2.0 * h) - 8.0 * g(u - h) + 8.0 * g(u + h) - g(u + 2.0 * h)) / (12.0 * h);
            let analytic = -neg_grad_gamma(u, sv, sh, &m).unwrap();
            worst = worst.max((analytic - fd).abs() / fd.abs());
            count += 1;
            u += 0.01;
        }
    }
    check(worst <= 1e-6, format!("{count} points, max relative error {worst:.3e} (tol 1e-6)"))
}

fn c4_monotonicity() -> Outcome {
    let p = params();
    let svs: Vec<f64> = (0..=120).map(|k| 20.0 + 0.5 * k as f64).collect();
    let shs: Vec<f64> = (0..=14).map(|k| 3.0 + 0.5 * k as f64).collect();
    let grid: Vec<Vec<f64>> =
        svs.iter().map(|&sv| shs.iter().map(|&sh| oie_fixed_point(sv, sh, &p).unwrap()).collect()).collect();
    let mut violations = Vec::new();
    for i in 0..svs.len() {
        for j in 0..shs.len() {
            if i + 1 < svs.len() && grid[i + 1][j] > grid[i][j] {
                violations.push(format!("sigma_v {}->{} at sigma_h {}", svs[i], svs[i + 1], shs[j]));
            }
            if j + 1 < shs.len() && grid[i][j + 1] < grid[i][j] {
                violations.push(format!("sigma_h {}->{} at sigma_v {}", shs[j], shs[j + 1], svs[i]));
            }
        }
    }
    check(
        violations.is_empty(),
        format!("{} cells, {} violations{}", svs.len() * shs.len(), violations.len(), violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()),
    )
}

fn c5_blind_haptic() -> Outcome {
    let p = params();
    let us: Vec<f64> =
        [5.06, 5.86, 7.85].iter().map(|&sh| oie_fixed_point(VisualDeviation::Infinite, sh, &p).unwrap()).collect();
    let worst = us.iter().cloned().fold(0.0, f64::max);
    check(worst < 1e-6, format!("u* = {us:?} (need < 1e-6)"))
}

fn c6_round_trip() -> Outcome {
    let xi = EffectiveNoise::PUBLISHED.as_xi();
    let truth = fixed_point_grid(&xi, PUBLISHED_GAMMA).unwrap();
    let data = ObservedGrid::new(truth).unwrap();
    let fit = identify(&data, &PsoConfig::default()).map_err(|e| e.to_string())?;
    let residual = kkt_residual(&fit.xi_star, fit.gamma_star, &data).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((fit.predicted[i][j] - truth[i][j]).abs());
        }
    }
    check(
        residual < 1e-8 && worst <= 1e-3,
        format!("kkt residual {residual:.3e} (tol 1e-8), max cell error {worst:.3e} (tol 1e-3), gamma* {:.4}", fit.gamma_star),
    )
}

fn c7_model_comparison() -> Outcome {
    let xi = EffectiveNoise::PUBLISHED.as_xi();
    let truth = fixed_point_grid(&xi, PUBLISHED_GAMMA).unwrap();
    let plant = PlantConfig::default();
    let seeds = 50;
    let (mut aic_wins, mut aicc_wins) = (0, 0);
    for s in 0..seeds {
        let mut rng = seed::stream(s, "acceptance-noise");
        let mut u: Grid3 = truth;
        for v in u.iter_mut().flatten() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + 0.02 * z).clamp(0.0, 1.0);
        }
        let mut errors = [[0.0; 3]; 3];
        for c in NoiseCondition::all() {
            let (i, j) = (c.visual.index(), c.haptic.index());
            let rec = simulate_trial(c, u[i][j], &plant, seed::subseed(s, &format!("acceptance-trial{c}"))).unwrap();
            errors[i][j] = tracking_error(&rec).unwrap();
        }
        let data = ObservedGrid::new(u).unwrap();
        let cfg = PsoConfig { seed: s, ..PsoConfig::default() };
        let fit = identify(&data, &cfg).map_err(|e| e.to_string())?;
        let tem = fit_tem(&data, &errors).map_err(|e| e.to_string())?;
        let cmp = compare_models(&data, &fit, &tem.params(0.1).unwrap(), &errors).map_err(|e| e.to_string())?;
        if cmp.preferred == Model::Oie {
            aic_wins += 1;
        }
        if let (Some(a), Some(b)) = (cmp.oie.aicc_n, cmp.tem.aicc_n) {
            if a < b {
                aicc_wins += 1;
            }
        }
    }
    let rate = aic_wins as f64 / seeds as f64;
    let aicc_rate = aicc_wins as f64 / seeds as f64;
    check(
        rate >= 0.9,
        format!(
            "AIC/n(OIE) < AIC/n(TEM) in {aic_wins}/{seeds} seeds ({:.0}%, need >= 90%); small-sample corrected AICc/n: {aicc_wins}/{seeds} ({:.0}%)",
            100.0 * rate,
            100.0 * aicc_rate
        ),
    )
}

fn c8_spectral_signature() -> Outcome {
    let n = 2000;
    let t: Vec<f64> = (0..n).map(|k| k as f64 / RECORD_HZ).collect();
    let target: Vec<f64> = t.iter().map(|&t| target_position(t, 0.0).unwrap()).collect();
    let pert: Vec<f64> = t.iter().map(|&t| perturbation_torque(t, 0.19).unwrap()).collect();
    let st = spectrum(&target, RECORD_HZ).unwrap();
    let sp = spectrum(&pert, RECORD_HZ).unwrap();
    let tol = 0.05;
    let target_group = [0.149, 0.497];
    let pert_group = [0.796, 8.75];
    let target_ok = target_group.iter().all(|f| st.peak_near(*f, tol).is_some());
    let pert_ok = pert_group.iter().all(|f| sp.peak_near(*f, tol).is_some());

    let v0h2: NoiseCondition = "V0H2".parse().unwrap();
    let (sv, sh) = EffectiveNoise::PUBLISHED.at(v0h2);
    let u = oie_fixed_point(sv, sh, &params()).unwrap();
    let plant = PlantConfig::default();
    let rec = simulate_trial(v0h2, u, &plant, 1).unwrap();
    let cal = Calibration::new(plant.emg_alpha0, plant.emg_alpha1).unwrap();
    let d = decompose(&cal.torque(&rec.emg_f), &cal.torque(&rec.emg_e)).unwrap();
    let s_tau = spectrum(&d.tau, RECORD_HZ).unwrap();
    let s_u = spectrum(&d.u, RECORD_HZ).unwrap();
    let tau_target = target_group.iter().any(|f| s_tau.peak_near(*f, tol).is_some());
    let tau_pert = pert_group.iter().any(|f| s_tau.peak_near(*f, tol).is_some());
    let u_flat = s_u.peaks.is_empty();
    let freqs = |s: &oie_core::emg::Spectrum| s.peaks.iter().map(|p| format!("{:.3}", p.freq_hz)).collect::<Vec<_>>().join(" ");
    check(
        target_ok && pert_ok && tau_target && tau_pert && u_flat,
        format!(
            "target peaks [{}], perturbation peaks [{}], V0H2 reciprocal peaks [{}], cocontraction peaks [{}]",
            freqs(&st),
            freqs(&sp),
            freqs(&s_tau),
            freqs(&s_u)
        ),
    )
}

fn c9_simulator_trend() -> Outcome {
    let p = params();
    let plant = PlantConfig::default();
    let noise = EffectiveNoise::PUBLISHED;
    let seeds = 20u64;
    let mut err = [[0.0; 3]; 3];
    for c in NoiseCondition::all() {
        let (sv, sh) = noise.at(c);
        let u = oie_fixed_point(sv, sh, &p).unwrap();
        let (i, j) = (c.visual.index(), c.haptic.index());
        for s in 0..seeds {
            err[i][j] += tracking_error(&simulate_trial(c, u, &plant, s).unwrap()).unwrap() / seeds as f64;
        }
    }
    let mut ok = true;
    for k in 0..3 {
        ok &= err[0][k] < err[1][k] && err[1][k] < err[2][k];
        ok &= err[k][0] < err[k][1] && err[k][1] < err[k][2];
    }
    let rows: Vec<String> = err.iter().map(|r| format!("[{:.3} {:.3} {:.3}]", r[0], r[1], r[2])).collect();
    check(ok, format!("mean error [deg] rows V0..V2, columns H0..H2: {}", rows.join(" ")))
}

fn c10_emg_pipeline() -> Outcome {
    let fs = 1000.0;
    let x: Vec<f64> = (0..10_000).map(|k| (std::f64::consts::TAU * 50.0 * k as f64 / fs).sin()).collect();
    let env = envelope(&EmgSeries::new(x, fs)).unwrap();
    let tail = &env.samples[5000..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let expected = 2.0 / std::f64::consts::PI * Biquad::highpass(20.0, fs).magnitude(50.0, fs);
    let env_rel = (mean - expected).abs() / expected;

    // Bitwise identity on ADC-quantized samples (16-bit codes), where every
    // difference and sum is representable; on continuous samples the only
    // discrepancy allowed is the rounding of the single subtraction.
    let mut rng = seed::stream(10, "acceptance-decompose");
    let code = |r: &mut rand_chacha::ChaCha8Rng| r.random_range(0..65536u32) as f64 / 4096.0;
    let f: Vec<f64> = (0..100_000).map(|_| code(&mut rng)).collect();
    let e: Vec<f64> = (0..100_000).map(|_| code(&mut rng)).collect();
    let (rf, re) = decompose(&f, &e).unwrap().reconstruct();
    let exact = rf == f && re == e;
    let f: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() * 10.0).collect();
    let e: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() * 10.0).collect();
    let (rf, re) = decompose(&f, &e).unwrap().reconstruct();
    let ulps = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs() / (f64::EPSILON * x.abs().max(y.abs()))).fold(0.0, f64::max);
    let cont = ulps(&rf, &f).max(ulps(&re, &e));

    let (a0, a1) = (2.0, 0.5);
    let mut cal_fail = 0;
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let mut rng = seed::stream(s, "acceptance-calibration");
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|_| {
                let env = rng.random::<f64>();
                let z: f64 = rng.sample(StandardNormal);
                (env, a0 * env + a1 + 0.05 * z)
            })
            .collect();
        let fit = calibrate(&pts).unwrap();
        let rel = ((fit.alpha0 - a0).abs() / a0).max((fit.alpha1 - a1).abs() / a1);
        worst = worst.max(rel);
        if rel > 0.1 {
            cal_fail += 1;
        }
    }
    check(
        env_rel <= 0.05 && exact && cont <= 1.0 && cal_fail == 0,
        format!(
            "envelope mean {mean:.5} vs {expected:.5} (rel {env_rel:.4}, tol 0.05); reconstruction bitwise on quantized samples: {exact}, continuous samples within {cont:.2} eps; calibration worst rel {worst:.4} over 100 seeds (tol 0.1)"
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_oie"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = tmp.path();
    let grid = base.join("grid");
    run_cli(&["--seed", "7", "predict", "--table1", "--noise-sd", "0.02", "--mesh", "0"], &grid)?;
    let grid_csv = grid.join("grid.csv");
    let grid_arg = grid_csv.to_str().unwrap();
    let commands: [(&str, Vec<&str>); 3] = [
        ("protocol", vec!["--seed", "7", "protocol", "--trials-per-block", "3", "--solo-trials", "2"]),
        ("fit", vec!["--seed", "7", "fit", "--input", grid_arg]),
        ("simulate", vec!["--seed", "7", "simulate", "--condition", "V1H2", "--u", "0.3"]),
    ];
    let mut report = Vec::new();
    let mut ok = true;
    for (name, args) in &commands {
        let a = base.join(format!("{name}-a"));
        let b = base.join(format!("{name}-b"));
        run_cli(args, &a)?;
        run_cli(args, &b)?;
        let (fa, fb) = (dir_files(&a), dir_files(&b));
        let same = !fa.is_empty() && fa == fb;
        ok &= same;
        report.push(format!("{name}: {} files {}", fa.len(), if same { "identical" } else { "DIFFER" }));
    }
    check(ok, report.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("haptic regression reproduction", c1_haptic_regression),
        ("haptic regression refit", c2_haptic_refit),
        ("gradient correctness", c3_gradient),
        ("fixed-point monotonicity", c4_monotonicity),
        ("blind-haptic prediction", c5_blind_haptic),
        ("identification round trip", c6_round_trip),
        ("model comparison ordering", c7_model_comparison),
        ("spectral signature", c8_spectral_signature),
        ("simulator trend", c9_simulator_trend),
        ("EMG pipeline", c10_emg_pipeline),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {d}", k + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
