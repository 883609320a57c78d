//! Acceptance suite: every criterion runs at its stated tolerance and time
//! budget and prints one PASS/FAIL line. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use turbwig_core::background::BackgroundModel;
use turbwig_core::beam::{split_step_propagate, white_noise_propagate, ComplexBeam, GaussianBeam};
use turbwig_core::config::ExperimentConfig;
use turbwig_core::grid::TransverseGrid;
use turbwig_core::harness::{run_convergence_liouville_with, run_convergence_wm_with, run_white_noise_oracle_with};
use turbwig_core::medium::{
    fit_loglog_slope, increment_variance_mc, increment_variance_quadrature, synthesize_screens, synthesize_volume,
    VolumeSpec,
};
use turbwig_core::moments::{
    apply_diffusion, apply_q0_wm, solve_mean_liouville, solve_mean_wm, solve_npoint_liouville, solve_pair_grid,
    MomentValues, NpointOptions, PairGridOptions, PhaseSpaceFn, WhiteNoiseModel,
};
use turbwig_core::par::{self, Execution};
use turbwig_core::spectra::{covariance_function, eval_spectrum, SpectrumModel};
use turbwig_core::wigner::{
    gaussian_wigner, marginals_and_flux, momentum_marginal, wigner_transform, PhaseAxes, WignerGrid,
};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { name: "unitarity", budget: Some(Duration::from_secs(10)), run: unitarity },
        Criterion { name: "wigner identities", budget: Some(Duration::from_secs(10)), run: wigner_identities },
        Criterion { name: "free transport", budget: None, run: free_transport },
        Criterion { name: "operator limit", budget: None, run: operator_limit },
        Criterion { name: "liouville triangle", budget: Some(Duration::from_secs(120)), run: liouville_triangle },
        Criterion { name: "white-noise oracle pair", budget: Some(Duration::from_secs(300)), run: white_noise_oracle },
        Criterion { name: "wm eps schedule", budget: Some(Duration::from_secs(1200)), run: wm_schedule },
        Criterion { name: "ray schedule gamma = eps", budget: Some(Duration::from_secs(900)), run: ray_schedule },
        Criterion { name: "increment variance", budget: Some(Duration::from_secs(120)), run: increment_variance },
        Criterion { name: "spectral exponents", budget: None, run: spectral_exponents },
        Criterion { name: "determinism", budget: None, run: determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, c) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (mut ok, mut detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = c.budget {
            if elapsed > b {
                ok = false;
                detail.push_str(&format!("; over the {} s budget", b.as_secs()));
            }
        }
        if !ok {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} {:<26} {:>8.2} s  {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn vk(hurst: f64, eta: f64, rho: f64, amplitude: f64) -> SpectrumModel {
    SpectrumModel::von_karman(hurst, eta, rho, amplitude, 1).unwrap()
}

fn unitarity() -> Check {
    let grid = TransverseGrid::new(1, 256, 0.25)?;
    let model = vk(1.0 / 3.0, 0.5, 2.0, 1.0);
    let beam = ComplexBeam::gaussian(
        &grid,
        1.0,
        1.0,
        GaussianBeam { center: [1.0, 0.0], width: 2.0, momentum: [0.5, 0.0], chirp: 0.1 },
    )?;
    let n0 = beam.norm_sq();
    let (nsteps, dz, eps) = (1000, 5e-3, 0.5);
    let z = nsteps as f64 * dz;
    let real = synthesize_volume(&model, &grid, VolumeSpec::covering(z, eps, 0.05, 4.0), 3, 0)?.with_epsilon(eps);
    let split = split_step_propagate(&beam, Some(&real), &BackgroundModel::default(), dz, nsteps)?;
    let screens = synthesize_screens(&model, &grid, nsteps, dz, 3, 0)?;
    let white = white_noise_propagate(&beam, &screens)?;
    let drift_split = (split.norm_sq() / n0 - 1.0).abs();
    let drift_white = (white.norm_sq() / n0 - 1.0).abs();
    Ok((
        drift_split <= 1e-10 && drift_white <= 1e-10,
        format!("relative L2 drift over 1000 steps: split-step {drift_split:.2e}, white-noise {drift_white:.2e}"),
    ))
}

/// `|Psi_hat(kappa)|^2 / (2 pi gamma)` at `kappa = p / gamma` by direct summation.
fn momentum_density(beam: &ComplexBeam, p: f64) -> f64 {
    let kappa = p / beam.gamma;
    let dx = beam.grid.dx;
    let s: Complex64 = beam
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, -kappa * beam.grid.coord(j)))
        .sum();
    (s * dx).norm_sqr() / (2.0 * PI * beam.gamma)
}

fn gradient_norm_sq(beam: &ComplexBeam) -> f64 {
    beam.gradient()[0].iter().map(|g| g.norm_sqr()).sum::<f64>() * beam.grid.dx
}

fn wigner_identities() -> Check {
    let grid = TransverseGrid::new(1, 512, 0.1)?;
    let gaussian = |gamma: f64, center: f64, width: f64, momentum: f64, chirp: f64| {
        ComplexBeam::gaussian(
            &grid,
            gamma,
            1.0,
            GaussianBeam { center: [center, 0.0], width, momentum: [momentum, 0.0], chirp },
        )
    };
    let pair = {
        let a = gaussian(1.0, -2.0, 0.8, 1.0, 0.0)?;
        let b = gaussian(1.0, 2.0, 1.0, -0.5, 0.2)?;
        let values: Vec<Complex64> = a.values.iter().zip(&b.values).map(|(x, y)| (x + y * 0.7) / 1.3).collect();
        ComplexBeam::new(&grid, values, 1.0, 1.0)?
    };
    let beams = vec![
        gaussian(1.0, 0.0, 1.0, 0.0, 0.0)?,
        gaussian(1.0, 1.5, 1.5, 2.0, 0.0)?,
        gaussian(0.5, -1.0, 1.2, 0.5, 0.3)?,
        gaussian(2.0, 0.5, 1.0, -3.0, -0.4)?,
        pair,
    ];
    let mut worst = [0.0f64; 4];
    for b in &beams {
        let w = wigner_transform(b)?;
        let m = marginals_and_flux(&w);
        let intensity: Vec<f64> = b.values.iter().map(|v| v.norm_sqr()).collect();
        let peak = intensity.iter().cloned().fold(0.0, f64::max);
        let x_err = m
            .mass_density
            .iter()
            .zip(&intensity)
            .map(|(a, e)| (a - e).abs())
            .fold(0.0, f64::max)
            / peak;
        let pm = momentum_marginal(&w);
        let exact: Vec<f64> = w.axes.ps().iter().map(|&p| momentum_density(b, p)).collect();
        let ppeak = exact.iter().cloned().fold(0.0, f64::max);
        let p_err = pm.iter().zip(&exact).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max) / ppeak;
        let second: f64 = m.second_moment.iter().sum::<f64>() * grid.dx;
        let expected = b.gamma * b.gamma * gradient_norm_sq(b);
        let s_err = (second / expected - 1.0).abs();
        let l2_expected = (2.0 * b.gamma * PI).powf(-0.5) * b.norm_sq();
        let l2_err = (w.l2_norm() / l2_expected - 1.0).abs();
        for (acc, v) in worst.iter_mut().zip([x_err, p_err, s_err, l2_err]) {
            *acc = acc.max(v);
        }
    }
    Ok((
        worst.iter().all(|&e| e <= 1e-6),
        format!(
            "worst over 5 beams: x-marginal {:.1e}, p-marginal {:.1e}, second moment {:.1e}, L2 norm {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn free_transport() -> Check {
    let grid = TransverseGrid::new(1, 512, 0.1)?;
    let (gamma, k, z) = (1.0, 2.0, 3.0);
    let (center, width, momentum, chirp) = (-6.0, 1.0, 2.0, 0.1);
    let beam = ComplexBeam::gaussian(
        &grid,
        gamma,
        k,
        GaussianBeam { center: [center, 0.0], width, momentum: [momentum, 0.0], chirp },
    )?;
    let nsteps = 1000;
    let out = split_step_propagate(&beam, None, &BackgroundModel::default(), z / nsteps as f64, nsteps)?;
    let w = wigner_transform(&out)?;
    let w0 = wigner_transform(&beam)?;
    let transported = WignerGrid::from_fn(&w.axes, gamma, z, |x, p| {
        gaussian_wigner(center, width, momentum, chirp, gamma, x - z * p / k, p)
    });
    let scale = transported.sup_norm();
    let beam_err = sup_diff(&w.values, &transported.values) / scale;
    let still = vk(1.0 / 3.0, 1.0, f64::INFINITY, 0.0);
    let wm = WhiteNoiseModel::wigner_moyal(still.clone(), gamma, k, BackgroundModel::default())?;
    let lv = WhiteNoiseModel::liouville(still, k, BackgroundModel::default())?;
    let mean_wm = solve_mean_wm(&w0, &wm, z)?.into_grid().ok_or("no grid")?;
    let mean_lv = solve_mean_liouville(&w0, &lv, z)?.into_grid().ok_or("no grid")?;
    let wm_err = sup_diff(&mean_wm.values, &transported.values) / scale;
    let lv_err = sup_diff(&mean_lv.values, &transported.values) / scale;
    Ok((
        beam_err <= 1e-4 && wm_err <= 1e-6 && lv_err <= 1e-6,
        format!("sup error / sup W: beam {beam_err:.1e}, mean WM {wm_err:.1e}, mean Liouville {lv_err:.1e}"),
    ))
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn operator_limit() -> Check {
    let model = vk(1.0 / 3.0, 0.5, 2.0, 1.0);
    let axes = PhaseAxes::new(TransverseGrid::new(1, 4, 1.0)?, 512, 0.05)?;
    let d0 = WhiteNoiseModel::liouville(model.clone(), 1.0, BackgroundModel::default())?.diffusion_origin()?;
    let tests: [(&str, fn(f64, f64) -> f64); 5] = [
        ("gaussian", |_, p| (-p * p).exp()),
        ("shifted wide gaussian", |x, p| (-(p - 1.0 - 0.1 * x).powi(2) / 4.0).exp()),
        ("sech", |_, p| 1.0 / (1.5 * p).cosh()),
        ("gaussian times cosine", |_, p| (-p * p / 2.0).exp() * (1.5 * p).cos()),
        ("two bumps", |_, p| (-(p - 1.5).powi(2)).exp() + 0.5 * (-(p + 2.0).powi(2) * 2.0).exp()),
    ];
    let gamma = 0.1;
    let mut ratios = Vec::new();
    let mut ok = true;
    for (name, f) in tests {
        let mut errs = Vec::new();
        for g in [gamma, gamma / 2.0] {
            let theta = WignerGrid::from_fn(&axes, g, 0.0, f);
            let wn = WhiteNoiseModel::wigner_moyal(model.clone(), g, 1.0, BackgroundModel::default())?;
            let q = apply_q0_wm(&theta, &wn)?;
            let lim = apply_diffusion(&theta, d0);
            errs.push(relative_l2(&q.values, &lim.values));
        }
        let ratio = errs[0] / errs[1];
        ok &= (ratio - 4.0).abs() <= 0.3 * 4.0;
        ratios.push(format!("{name} {ratio:.3}"));
    }
    Ok((ok, format!("error ratio on halving gamma: {}", ratios.join(", "))))
}

fn liouville_triangle() -> Check {
    let model = vk(1.0 / 3.0, 0.5, 4.0, 0.2);
    let (k, z) = (1.0, 1.0);
    let wn = WhiteNoiseModel::liouville(model, k, BackgroundModel::default())?;
    let initial = |x: f64, p: f64| gaussian_wigner(0.0, 1.0, 0.0, 0.0, 1.0, x, p);
    let axes = PhaseAxes::new(TransverseGrid::new(1, 48, 0.5)?, 48, 0.125)?;
    let w0 = WignerGrid::from_fn(&axes, 1.0, 0.0, initial);
    let exact = solve_mean_liouville(&w0, &wn, z)?.into_grid().ok_or("no grid")?;
    let pair = match solve_pair_grid(&w0, &wn, z, PairGridOptions { nsteps: 40, exec: Execution::Parallel })?.values {
        MomentValues::Pair(p) => p,
        _ => return Err("pair solver returned no pair grid".into()),
    };
    let c = 24;
    let one_idx: Vec<(usize, usize)> = (0..20).map(|i| (c - 4 + (i % 5) * 2, c - 6 + (i / 5) * 3)).collect();
    let two_idx: Vec<[usize; 4]> = (0..20)
        .map(|i| [c - 2 + i % 3, c - 3 + (i % 4) * 2, c - 1 + (i / 4) % 3, c + 2 - (i % 5)])
        .collect();
    let xs = axes.xs();
    let ps = axes.ps();
    let one_probes: Vec<Vec<f64>> = one_idx.iter().map(|&(j, q)| vec![xs[j], ps[q]]).collect();
    let two_probes: Vec<Vec<f64>> = two_idx.iter().map(|i| vec![xs[i[0]], ps[i[1]], xs[i[2]], ps[i[3]]]).collect();
    let opts = NpointOptions { samples: 10_000, dz: 1e-2, seed: 5, exec: Execution::Parallel };
    let f: &dyn PhaseSpaceFn = &initial;
    let mc1 = solve_npoint_liouville(&[f], &wn, z, &one_probes, opts)?;
    let mc2 = solve_npoint_liouville(&[f, f], &wn, z, &two_probes, opts)?;
    let close = |a: f64, b: f64, se: f64| (a - b).abs() <= (3.0 * se).max(1e-3);
    let mut misses = [0usize; 3];
    for (e, &(j, q)) in mc1.probes().ok_or("no probes")?.iter().zip(&one_idx) {
        misses[0] += !close(e.value, exact.get(j, q), e.std_err) as usize;
    }
    for (e, i) in mc2.probes().ok_or("no probes")?.iter().zip(&two_idx) {
        misses[1] += !close(e.value, pair.get(i[0], i[1], i[2], i[3]), e.std_err) as usize;
    }
    let marginal = pair.marginal();
    for &(j, q) in &one_idx {
        misses[2] += !close(marginal[j * axes.np + q], exact.get(j, q), 0.0) as usize;
    }
    Ok((
        misses.iter().all(|&m| m == 0),
        format!(
            "probes outside 3 sigma / 1e-3: MC vs exact {}/20, MC vs pair grid {}/20, pair marginal vs exact {}/20",
            misses[0], misses[1], misses[2]
        ),
    ))
}

const WM_CONFIG: &str = r#"
schema_version = 1
regime = "wigner-moyal"
seed = 21

[spectrum]
form = "von-karman"
hurst = 0.3333333333333333
eta = 0.15
rho = 0.25
amplitude = 2.5

[grid]
n = 512
dx = 0.2
wigner_stride = 2

[physics]
z = 0.3

[beam]
width = 2.5

[ensemble]
realizations = 200

[schedule]
condition = "wm-fixed-eta"
epsilons = [0.4, 0.28, 0.2, 0.14]
"#;

const ORACLE_CONFIG: &str = r#"
schema_version = 1
regime = "wigner-moyal"
seed = 7

[spectrum]
form = "von-karman"
hurst = 0.3333333333333333
eta = 0.5
rho = 1.0
amplitude = 2.0

[grid]
n = 256
dx = 0.2

[physics]
z = 0.3

[beam]
width = 2.0

[propagation]
max_dz = 1e-3

[ensemble]
realizations = 500
"#;

const RAY_CONFIG: &str = r#"
schema_version = 1
regime = "liouville"
seed = 21

[spectrum]
form = "von-karman"
hurst = 0.3333333333333333
eta = 0.25
rho = 0.5

[grid]
n = 1024
dx = 0.5

[physics]
z = 1.0

[ensemble]
realizations = 400

[rays]
count = 4000
position_spread = 85.33333333333333

[schedule]
condition = "liouville-fixed-scales"
epsilons = [0.4, 0.28, 0.2, 0.14]
gamma_exponent = 1.0
"#;

fn white_noise_oracle() -> Check {
    let cfg = ExperimentConfig::from_toml_str(ORACLE_CONFIG)?;
    let r = run_white_noise_oracle_with(&cfg, Execution::Parallel)?;
    // how far scattering moves the mean away from free transport, for scale
    let model = cfg.base_model()?;
    let still = vk(model.hurst, model.eta, model.rho, 0.0);
    let beam = ComplexBeam::gaussian(&cfg.transverse_grid()?, 1.0, 1.0, cfg.gaussian_beam())?;
    let w0 = wigner_transform(&beam)?;
    let mean = |m: SpectrumModel| -> Result<WignerGrid, Box<dyn std::error::Error>> {
        let wn = WhiteNoiseModel::wigner_moyal(m, 1.0, 1.0, BackgroundModel::default())?;
        Ok(solve_mean_wm(&w0, &wn, cfg.physics.z)?.into_grid().ok_or("no grid")?)
    };
    let effect = relative_l2(&mean(still)?.values, &mean(model)?.values);
    Ok((
        r.error <= 0.05,
        format!(
            "relative L2 distance {:.4} +- {:.4} with {} realizations (scattering moves the mean by {:.3})",
            r.error, r.std_err, r.realizations, effect
        ),
    ))
}

fn schedule_line(r: &turbwig_core::harness::ConvergenceReport) -> String {
    let errs: Vec<String> = r.points.iter().map(|p| format!("{:.3}+-{:.3}", p.error, p.std_err)).collect();
    format!("errors {}; decreasing beyond 1 sigma: {}", errs.join(" -> "), r.decreasing_beyond_one_sigma)
}

fn wm_schedule() -> Check {
    let cfg = ExperimentConfig::from_toml_str(WM_CONFIG)?;
    let r = run_convergence_wm_with(&cfg, Execution::Parallel)?;
    Ok((r.decreasing_beyond_one_sigma && r.final_error <= 0.10, schedule_line(&r)))
}

fn ray_schedule() -> Check {
    let cfg = ExperimentConfig::from_toml_str(RAY_CONFIG)?;
    let r = run_convergence_liouville_with(&cfg, Execution::Parallel)?;
    Ok((r.decreasing_beyond_one_sigma && r.final_error <= 0.10, schedule_line(&r)))
}

fn increment_variance() -> Check {
    let rhos = [8.0, 16.0, 32.0, 64.0, 128.0];
    let gamma = 1e-4;
    let mut ok = true;
    let mut parts = Vec::new();
    for hurst in [0.25, 1.0 / 3.0, 0.5] {
        let ys: Vec<f64> = rhos
            .iter()
            .map(|&rho| increment_variance_quadrature(&vk(hurst, 0.1, rho, 1.0), gamma, &[1.0]).map(|v| v / (gamma * gamma)))
            .collect::<Result<_, _>>()?;
        let slope = fit_loglog_slope(&rhos, &ys);
        let target = 2.0 - 2.0 * hurst;
        ok &= (slope - target).abs() <= 0.2;
        // Monte Carlo on a lattice resolving the cutoff, lag of one cell
        let rho = 4.0;
        let grid = TransverseGrid::new(1, 2048, 1.0 / (8.0 * rho))?;
        let model = vk(hurst, 0.1, rho, 1.0);
        let lag = grid.dx;
        let mc = increment_variance_mc(&model, &grid, lag, 1.0, 200, 11, Execution::Parallel)?;
        let quad = increment_variance_quadrature(&model, lag, &[1.0])?;
        let z = (mc.mean - quad).abs() / mc.std_err;
        ok &= z <= 3.0;
        parts.push(format!("H={hurst:.3}: slope {slope:.3} (target {target:.3}), MC {:.4e} vs {quad:.4e} ({z:.1} sigma)", mc.mean));
    }
    Ok((ok, parts.join("; ")))
}

fn spectral_exponents() -> Check {
    let model = SpectrumModel::von_karman(1.0 / 3.0, 1.0, f64::INFINITY, 1.0, 2)?;
    let (k1, k2) = (1e4, 1e5);
    let s1 = eval_spectrum(&model, &[k1, 0.0, 0.0])?;
    let s2 = eval_spectrum(&model, &[k2, 0.0, 0.0])?;
    let slope = (s2 / s1).ln() / (k2 / k1).ln();
    let slope_err = (slope + 11.0 / 3.0).abs();
    let mut cov_err: f64 = 0.0;
    for dim in [1, 2] {
        let m = SpectrumModel::von_karman(0.5, 1.0, f64::INFINITY, 1.0, dim)?;
        for i in 0..=200 {
            let r = i as f64 * 0.05;
            let mut x = vec![0.0; dim];
            x[0] = r;
            cov_err = cov_err.max((covariance_function(&m, &x)? - (-r).exp()).abs());
        }
    }
    Ok((
        slope_err <= 1e-3 && cov_err <= 1e-8,
        format!("d=2 H=1/3 slope {slope:.6} (|err| {slope_err:.1e}); H=1/2 covariance max |B - e^-r| {cov_err:.1e}"),
    ))
}

fn determinism() -> Check {
    let mut cfg = ExperimentConfig::from_toml_str(WM_CONFIG)?;
    cfg.ensemble.as_mut().ok_or("no ensemble")?.realizations = 40;
    cfg.schedule.as_mut().ok_or("no schedule")?.epsilons = vec![0.4, 0.28];
    let one = par::with_threads(Some(1), || run_convergence_wm_with(&cfg, Execution::Parallel))??;
    let eight = par::with_threads(Some(8), || run_convergence_wm_with(&cfg, Execution::Parallel))??;
    let (a, b) = (one.to_json()?, eight.to_json()?);
    let (ca, cb) = (one.to_csv()?, eight.to_csv()?);
    Ok((
        a == b && ca == cb,
        format!("1 vs 8 workers: JSON {} bytes, identical {}; CSV identical {}", a.len(), a == b, ca == cb),
    ))
}
