//! Convergence experiments: ensembles of pre-limit simulations compared with
//! the limit-model solvers along a schedule of scaling parameters, plus the
//! reporting layer (CSV, text summary, JSON manifest).
//!
//! Realizations are evaluated in parallel batches of fixed size and folded
//! into per-group sums in index order, so a report is byte-identical for any
//! worker count. Wall-clock times are kept out of the report bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beam::{split_step_propagate, white_noise_propagate, ComplexBeam};
use crate::config::{ExperimentConfig, RegimeKind, SchedulePoint};
use crate::error::{Error, Result};
use crate::medium::{synthesize_screens, synthesize_volume, VolumeSpec};
use crate::moments::{solve_mean_wm_with, MeanSolverOptions, WhiteNoiseModel};
use crate::par::{self, Execution};
use crate::rays::{trace_rays_medium, trace_rays_sde, MediumTraceOptions, RayEnsemble, SdeOptions};
use crate::wigner::{wigner_transform_with, WignerGrid, WignerSampling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub epsilon: f64,
    pub gamma: f64,
    pub eta: f64,
    /// `None` when the cutoff is infinite.
    pub rho: Option<f64>,
    /// `eps rho^(2-H)`, echoed for audit.
    pub eps_rho_audit: Option<f64>,
    /// The quantity the schedule's scaling condition drives to zero.
    pub condition_value: Option<f64>,
    pub realizations: usize,
    pub seed: u64,
    /// Empirical observable: `||E W||_2` or the momentum variance.
    pub estimate: f64,
    /// Limit-model prediction of the same observable.
    pub prediction: f64,
    pub error: f64,
    pub std_err: f64,
    /// Largest probe z-score of the kernel density comparison, if probes
    /// were configured.
    pub probe_max_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: RegimeKind,
    pub condition: Option<String>,
    pub config_hash: String,
    pub model_hash: String,
    pub seed: u64,
    pub hurst: f64,
    pub z: f64,
    pub points: Vec<ConvergencePoint>,
    /// Every consecutive error decrease exceeds the combined standard error.
    pub decreasing_beyond_one_sigma: bool,
    pub final_error: f64,
    #[serde(skip)]
    pub wall_clock_seconds: Vec<f64>,
}

impl ConvergenceReport {
    fn finish(mut self) -> Self {
        self.decreasing_beyond_one_sigma = self.points.windows(2).all(|w| {
            w[0].error - w[1].error > (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt()
        });
        self.final_error = self.points.last().map_or(f64::NAN, |p| p.error);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(std::slice::from_ref(self), &["report"])
    }

    pub fn timing_json(&self) -> Result<String> {
        let rows: Vec<_> = self
            .points
            .iter()
            .zip(&self.wall_clock_seconds)
            .map(|(p, t)| serde_json::json!({ "epsilon": p.epsilon, "seconds": t }))
            .collect();
        Ok(serde_json::to_string_pretty(&rows)? + "\n")
    }
}

/// White-noise screen ensemble against the mean Wigner-Moyal solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub realizations: usize,
    pub steps: usize,
    pub error: f64,
    pub std_err: f64,
    pub seed: u64,
    pub model_hash: String,
}

/// Per-group running sums for a delete-a-group jackknife. Realization `r`
/// belongs to group `r % groups`.
#[derive(Debug, Clone)]
pub struct GroupSums {
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl GroupSums {
    pub fn new(groups: usize, len: usize) -> Self {
        Self {
            sums: vec![vec![0.0; len]; groups],
            counts: vec![0; groups],
        }
    }

    pub fn add(&mut self, index: usize, values: &[f64]) {
        let g = index % self.sums.len();
        for (a, b) in self.sums[g].iter_mut().zip(values) {
            *a += b;
        }
        self.counts[g] += 1;
    }

    pub fn count(&self) -> usize {
        self.counts.iter().sum()
    }

    fn mean_excluding(&self, skip: Option<usize>) -> Vec<f64> {
        let len = self.sums[0].len();
        let mut out = vec![0.0; len];
        let mut n = 0usize;
        for (g, s) in self.sums.iter().enumerate() {
            if Some(g) == skip {
                continue;
            }
            n += self.counts[g];
            for (a, b) in out.iter_mut().zip(s) {
                *a += b;
            }
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean_excluding(None)
    }

    /// Full-sample statistic and its jackknife standard error.
    pub fn jackknife<F: Fn(&[f64]) -> f64>(&self, stat: F) -> (f64, f64) {
        let full = stat(&self.mean());
        let groups: Vec<usize> = (0..self.sums.len()).filter(|&g| self.counts[g] > 0).collect();
        let reps: Vec<f64> = groups.iter().map(|&g| stat(&self.mean_excluding(Some(g)))).collect();
        let k = reps.len() as f64;
        let avg = reps.iter().sum::<f64>() / k;
        let var = (k - 1.0) / k * reps.iter().map(|r| (r - avg).powi(2)).sum::<f64>();
        (full, var.sqrt())
    }
}

/// Beam steps for one schedule point: bounded by `max_dz` and by one field
/// slice per step in fast time.
pub fn beam_steps(z: f64, epsilon: f64, dz_field: f64, max_dz: f64) -> usize {
    let by_field = (z / (epsilon * epsilon) / dz_field).ceil();
    let by_cap = (z / max_dz).ceil();
    by_field.max(by_cap).max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceEstimate {
    pub work: f64,
    pub memory_bytes: f64,
}

/// Work and peak memory of a convergence run, checked against the
/// configured ceiling before anything is launched.
pub fn estimate_resources(cfg: &ExperimentConfig) -> Result<ResourceEstimate> {
    let grid = cfg.transverse_grid()?;
    let g = grid.len() as f64;
    let workers = par::workers() as f64;
    let mut work: f64 = 0.0;
    let mut memory: f64 = 0.0;
    for p in cfg.schedule_points()? {
        let dz_field = cfg.field_spacing(&p)?;
        let vol = VolumeSpec::covering(cfg.physics.z, p.epsilon, dz_field, cfg.field_margin(&p));
        let volume_bytes = vol.nz as f64 * g * 8.0;
        match cfg.regime {
            RegimeKind::WignerMoyal => {
                let e = cfg.ensemble()?;
                let m = e.realizations as f64;
                // complex synthesis buffer plus the real volume, per worker
                memory = memory.max(workers * 3.0 * volume_bytes + (e.groups as f64 + 4.0) * g * g * 8.0);
                work += m * (vol.nz as f64 * g + beam_steps(cfg.physics.z, p.epsilon, dz_field, cfg.propagation.max_dz) as f64 * g);
            }
            RegimeKind::Liouville => {
                let e = cfg.ensemble()?;
                let r = cfg.rays()?;
                let steps = cfg.physics.z / (r.step_fraction * p.epsilon * p.epsilon * dz_field);
                memory = memory.max(workers * 4.0 * volume_bytes);
                work += e.realizations as f64 * (vol.nz as f64 * g + r.count as f64 * steps);
            }
        }
    }
    let est = ResourceEstimate { work, memory_bytes: memory };
    if est.work > cfg.limits.max_work {
        return Err(Error::ResourceCeiling(format!(
            "estimated work {:.3e} exceeds limits.max_work = {:.3e}",
            est.work, cfg.limits.max_work
        )));
    }
    if est.memory_bytes > cfg.limits.max_memory_bytes {
        return Err(Error::ResourceCeiling(format!(
            "estimated memory {:.3e} bytes exceeds limits.max_memory_bytes = {:.3e}",
            est.memory_bytes, cfg.limits.max_memory_bytes
        )));
    }
    Ok(est)
}

fn point_meta(cfg: &ExperimentConfig, p: &SchedulePoint) -> (Option<f64>, Option<f64>, Option<f64>) {
    let h = cfg.spectrum.hurst;
    let rho = p.rho.is_finite().then_some(p.rho);
    let audit = rho.map(|r| p.epsilon * r.powf(2.0 - h));
    let cond = cfg.schedule.as_ref().map(|s| s.condition.vanishing_quantity(p, h));
    (rho, audit, cond)
}

fn require_regime(cfg: &ExperimentConfig, regime: RegimeKind, what: &str) -> Result<()> {
    if cfg.regime != regime {
        return Err(Error::Config(format!("{what} needs regime = {regime:?}, config selects {:?}", cfg.regime)));
    }
    Ok(())
}

fn empty_report(cfg: &ExperimentConfig, kind: RegimeKind) -> Result<ConvergenceReport> {
    Ok(ConvergenceReport {
        kind,
        condition: cfg.schedule.as_ref().map(|s| s.condition.name().to_string()),
        config_hash: cfg.hash(),
        model_hash: cfg.base_model()?.hash(),
        seed: cfg.seed,
        hurst: cfg.spectrum.hurst,
        z: cfg.physics.z,
        points: Vec::new(),
        decreasing_beyond_one_sigma: false,
        final_error: f64::NAN,
        wall_clock_seconds: Vec::new(),
    })
}

/// Folds `count` per-realization vectors into group sums, evaluating them
/// in parallel batches of `batch` and adding them in index order.
fn ensemble_sums<F>(exec: Execution, count: usize, batch: usize, groups: usize, len: usize, f: F) -> Result<GroupSums>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let mut sums = GroupSums::new(groups, len);
    let mut start = 0;
    while start < count {
        let n = batch.min(count - start);
        let results = par::map(exec, n, |i| f(start + i));
        for (i, r) in results.into_iter().enumerate() {
            sums.add(start + i, &r?);
        }
        start += n;
    }
    Ok(sums)
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn l2_norm(a: &[f64], cell: f64) -> f64 {
    (a.iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
}

fn initial_wigner(cfg: &ExperimentConfig, gamma: f64, exec: Execution) -> Result<(ComplexBeam, WignerGrid)> {
    let grid = cfg.transverse_grid()?;
    if grid.dim != 1 {
        return Err(Error::Unsupported("Wigner convergence runs are implemented for d = 1".into()));
    }
    let beam = ComplexBeam::gaussian(&grid, gamma, cfg.physics.ktilde, cfg.gaussian_beam())?;
    let w0 = wigner_transform_with(
        &beam,
        WignerSampling {
            stride: cfg.grid.wigner_stride,
            exec,
        },
    )?;
    Ok((beam, w0))
}

pub fn run_convergence_wm(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_convergence_wm_with(cfg, Execution::default())
}

/// Mean Wigner of pre-limit beam ensembles vs the mean Wigner-Moyal
/// solver at every schedule point.
pub fn run_convergence_wm_with(cfg: &ExperimentConfig, exec: Execution) -> Result<ConvergenceReport> {
    require_regime(cfg, RegimeKind::WignerMoyal, "run_convergence_wm")?;
    let points = cfg.schedule_points()?;
    if points.windows(2).any(|w| w[0].gamma != w[1].gamma) {
        return Err(Error::Config("run_convergence_wm holds gamma fixed across the schedule".into()));
    }
    estimate_resources(cfg)?;
    let ens = cfg.ensemble()?;
    let bg = cfg.background_model();
    let grid = cfg.transverse_grid()?;
    let (k, z) = (cfg.physics.ktilde, cfg.physics.z);
    let mut report = empty_report(cfg, RegimeKind::WignerMoyal)?;
    for p in &points {
        let started = Instant::now();
        let model = cfg.model_at(p)?;
        let (beam0, w0) = initial_wigner(cfg, p.gamma, exec)?;
        let wn = WhiteNoiseModel::wigner_moyal(model.clone(), p.gamma, k, bg.clone())?;
        let limit = solve_mean_wm_with(&w0, &wn, z, MeanSolverOptions { exec, ..Default::default() })?.into_grid().ok_or_else(|| Error::Unsupported("mean solver returned no grid".into()))?;
        let dz_field = cfg.field_spacing(p)?;
        let vol = VolumeSpec::covering(z, p.epsilon, dz_field, cfg.field_margin(p));
        let nsteps = beam_steps(z, p.epsilon, dz_field, cfg.propagation.max_dz);
        let dz = z / nsteps as f64;
        let sampling = WignerSampling {
            stride: cfg.grid.wigner_stride,
            exec: Execution::Sequential,
        };
        let sums = ensemble_sums(exec, ens.realizations, ens.batch, ens.groups, limit.values.len(), |r| {
            let beam = if z > 0.0 {
                let real = synthesize_volume(&model, &grid, vol, cfg.seed, r as u64)?.with_epsilon(p.epsilon);
                split_step_propagate(&beam0, Some(&real), &bg, dz, nsteps)?
            } else {
                beam0.clone()
            };
            Ok(wigner_transform_with(&beam, sampling)?.values)
        })?;
        let (error, std_err) = sums.jackknife(|mean| relative_l2(mean, &limit.values));
        let cell = limit.axes.cell_area();
        let (rho, audit, cond) = point_meta(cfg, p);
        report.points.push(ConvergencePoint {
            epsilon: p.epsilon,
            gamma: p.gamma,
            eta: p.eta,
            rho,
            eps_rho_audit: audit,
            condition_value: cond,
            realizations: ens.realizations,
            seed: cfg.seed,
            estimate: l2_norm(&sums.mean(), cell),
            prediction: l2_norm(&limit.values, cell),
            error,
            std_err,
            probe_max_z: None,
        });
        report.wall_clock_seconds.push(started.elapsed().as_secs_f64());
        log::info!("wm point eps = {}: error {error:.4e} +- {std_err:.2e}", p.epsilon);
    }
    Ok(report.finish())
}

pub fn run_white_noise_oracle(cfg: &ExperimentConfig) -> Result<OracleReport> {
    run_white_noise_oracle_with(cfg, Execution::default())
}

/// Mean Wigner of white-noise screen ensembles (the limit model simulated
/// directly) vs the mean Wigner-Moyal solver, at the base parameters.
pub fn run_white_noise_oracle_with(cfg: &ExperimentConfig, exec: Execution) -> Result<OracleReport> {
    require_regime(cfg, RegimeKind::WignerMoyal, "run_white_noise_oracle")?;
    let ens = cfg.ensemble()?;
    let model = cfg.base_model()?;
    let grid = cfg.transverse_grid()?;
    let (gamma, k, z) = (cfg.physics.gamma, cfg.physics.ktilde, cfg.physics.z);
    let (beam0, w0) = initial_wigner(cfg, gamma, exec)?;
    let wn = WhiteNoiseModel::wigner_moyal(model.clone(), gamma, k, cfg.background_model())?;
    let limit = solve_mean_wm_with(&w0, &wn, z, MeanSolverOptions { exec, ..Default::default() })?.into_grid().ok_or_else(|| Error::Unsupported("mean solver returned no grid".into()))?;
    let nsteps = (z / cfg.propagation.max_dz).ceil().max(1.0) as usize;
    let dz = z / nsteps as f64;
    let sampling = WignerSampling {
        stride: cfg.grid.wigner_stride,
        exec: Execution::Sequential,
    };
    let sums = ensemble_sums(exec, ens.realizations, ens.batch, ens.groups, limit.values.len(), |r| {
        let screens = synthesize_screens(&model, &grid, nsteps, dz, cfg.seed, r as u64)?;
        let beam = white_noise_propagate(&beam0, &screens)?;
        Ok(wigner_transform_with(&beam, sampling)?.values)
    })?;
    let (error, std_err) = sums.jackknife(|mean| relative_l2(mean, &limit.values));
    Ok(OracleReport {
        realizations: ens.realizations,
        steps: nsteps,
        error,
        std_err,
        seed: cfg.seed,
        model_hash: model.hash(),
    })
}

/// Seed of the initial ray ensemble of realization `r`.
fn ray_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Limit density of the homogeneous kinetic model for independent Gaussian
/// initial data, smoothed by the product Gaussian kernel of the estimator.
fn smoothed_limit_density(cfg: &ExperimentConfig, d0: f64, probe: [f64; 2]) -> Result<f64> {
    let r = cfg.rays()?;
    let (k, z) = (cfg.physics.ktilde, cfg.physics.z);
    let sp2 = r.momentum_spread.powi(2);
    let vxx = r.position_spread.powi(2) + sp2 * z * z / (k * k) + d0 * z.powi(3) / 3.0 + r.bandwidth[0].powi(2);
    let vxp = sp2 * z / k + k * d0 * z * z / 2.0;
    let vpp = sp2 + k * k * d0 * z + r.bandwidth[1].powi(2);
    let det = vxx * vpp - vxp * vxp;
    let dx = probe[0] - (r.center + r.momentum * z / k);
    let dp = probe[1] - r.momentum;
    let q = (vpp * dx * dx - 2.0 * vxp * dx * dp + vxx * dp * dp) / det;
    Ok((-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt()))
}

fn gauss_kernel(u: f64, h: f64) -> f64 {
    (-0.5 * (u / h).powi(2)).exp() / (h * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn run_convergence_liouville(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_convergence_liouville_with(cfg, Execution::default())
}

/// Ray ensembles through pre-limit media vs the kinetic limit: momentum
/// variance against `Var_p(0) + k^2 D(0) z` (homogeneous media) or against
/// white-noise ray ensembles (inhomogeneous background), plus optional
/// kernel-density probes.
pub fn run_convergence_liouville_with(cfg: &ExperimentConfig, exec: Execution) -> Result<ConvergenceReport> {
    require_regime(cfg, RegimeKind::Liouville, "run_convergence_liouville")?;
    estimate_resources(cfg)?;
    let ens = cfg.ensemble()?;
    let rays = cfg.rays()?;
    let bg = cfg.background_model();
    let grid = cfg.transverse_grid()?;
    if grid.dim != 1 {
        return Err(Error::Unsupported("ray convergence runs are implemented for d = 1".into()));
    }
    let (k, z) = (cfg.physics.ktilde, cfg.physics.z);
    let homogeneous = bg.is_homogeneous();
    let probes = if homogeneous { rays.probes.clone() } else { Vec::new() };
    let mut report = empty_report(cfg, RegimeKind::Liouville)?;
    for p in &cfg.schedule_points()? {
        let started = Instant::now();
        let model = cfg.model_at(p)?;
        let wn = WhiteNoiseModel::liouville(model.clone(), k, bg.clone())?;
        let dz_field = cfg.field_spacing(p)?;
        let vol = VolumeSpec::covering(z, p.epsilon, dz_field, cfg.field_margin(p));
        let opts = MediumTraceOptions {
            ktilde: k,
            dz: rays.step_fraction * p.epsilon * p.epsilon * dz_field,
            exec: Execution::Sequential,
        };
        let initial = |r: usize| {
            RayEnsemble::gaussian(
                1,
                rays.count,
                [rays.center, 0.0],
                rays.position_spread,
                [rays.momentum, 0.0],
                rays.momentum_spread,
                ray_seed(cfg.seed, r),
            )
        };
        // per realization: [sum p0, sum p0^2, sum p, sum p^2, kernel sums...]
        let stats = |start: &RayEnsemble, end: &RayEnsemble| -> Vec<f64> {
            let mut v = vec![0.0; 4 + probes.len()];
            for (&a, &b) in start.momenta.iter().zip(&end.momenta) {
                v[0] += a;
                v[1] += a * a;
                v[2] += b;
                v[3] += b * b;
            }
            for (j, pr) in probes.iter().enumerate() {
                v[4 + j] = end
                    .positions
                    .iter()
                    .zip(&end.momenta)
                    .map(|(&x, &q)| gauss_kernel(pr[0] - x, rays.bandwidth[0]) * gauss_kernel(pr[1] - q, rays.bandwidth[1]))
                    .sum();
            }
            v
        };
        let len = 4 + probes.len();
        let sums = ensemble_sums(exec, ens.realizations, ens.batch, ens.groups, len, |r| {
            let start = initial(r)?;
            let real = synthesize_volume(&model, &grid, vol, cfg.seed, r as u64)?.with_epsilon(p.epsilon);
            let end = trace_rays_medium(&start, Some(&real), &bg, z, opts)?;
            Ok(stats(&start, &end))
        })?;
        let n = rays.count as f64;
        let variance = |m: &[f64]| m[3] / n - (m[2] / n).powi(2);
        let initial_variance = |m: &[f64]| m[1] / n - (m[0] / n).powi(2);
        let (estimate, prediction, error, std_err) = if homogeneous {
            let growth = k * k * wn.diffusion_origin()? * z;
            let rel = |m: &[f64]| {
                let law = initial_variance(m) + growth;
                let diff = variance(m) - law;
                if law > 0.0 {
                    (diff / law).abs()
                } else {
                    diff.abs()
                }
            };
            let (error, std_err) = sums.jackknife(rel);
            let mean = sums.mean();
            (variance(&mean), initial_variance(&mean) + growth, error, std_err)
        } else {
            let sde = ensemble_sums(exec, ens.realizations, ens.batch, ens.groups, 4, |r| {
                let start = initial(r)?;
                let end = trace_rays_sde(
                    &start,
                    &wn,
                    z,
                    SdeOptions {
                        tuple_size: 1,
                        dz: opts.dz.max(z / 1000.0),
                        seed: cfg.seed ^ 0x5DE,
                        exec: Execution::Sequential,
                    },
                )?;
                Ok(stats(&start, &end)[..4].to_vec())
            })?;
            let (est, se_a) = sums.jackknife(variance);
            let (pred, se_b) = sde.jackknife(variance);
            let error = ((est - pred) / pred).abs();
            (est, pred, error, (se_a.powi(2) + se_b.powi(2)).sqrt() / pred)
        };
        let probe_max_z = if probes.is_empty() {
            None
        } else {
            let d0 = wn.diffusion_origin()?;
            let mut worst: f64 = 0.0;
            for (j, pr) in probes.iter().enumerate() {
                let (dens, se) = sums.jackknife(|m| m[4 + j] / n);
                let lim = smoothed_limit_density(cfg, d0, *pr)?;
                worst = worst.max((dens - lim).abs() / se.max(1e-300));
            }
            Some(worst)
        };
        let (rho, audit, cond) = point_meta(cfg, p);
        report.points.push(ConvergencePoint {
            epsilon: p.epsilon,
            gamma: p.gamma,
            eta: p.eta,
            rho,
            eps_rho_audit: audit,
            condition_value: cond,
            realizations: ens.realizations,
            seed: cfg.seed,
            estimate,
            prediction,
            error,
            std_err,
            probe_max_z,
        });
        report.wall_clock_seconds.push(started.elapsed().as_secs_f64());
        log::info!("liouville point eps = {}: error {error:.4e} +- {std_err:.2e}", p.epsilon);
    }
    Ok(report.finish())
}

const CSV_COLUMNS: [&str; 16] = [
    "report",
    "kind",
    "condition",
    "point",
    "epsilon",
    "gamma",
    "eta",
    "rho",
    "eps_rho_2mh",
    "condition_value",
    "realizations",
    "seed",
    "estimate",
    "prediction",
    "error",
    "std_err",
];

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn kind_name(k: RegimeKind) -> &'static str {
    match k {
        RegimeKind::WignerMoyal => "wigner-moyal",
        RegimeKind::Liouville => "liouville",
    }
}

fn rows_to_csv(reports: &[ConvergenceReport], names: &[&str]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    header.push("probe_max_z");
    w.write_record(&header)?;
    for (i, r) in reports.iter().enumerate() {
        let name = names.get(i).map_or_else(|| format!("report-{i}"), |s| s.to_string());
        for (j, p) in r.points.iter().enumerate() {
            w.write_record([
                name.clone(),
                kind_name(r.kind).to_string(),
                r.condition.clone().unwrap_or_default(),
                j.to_string(),
                num(p.epsilon),
                num(p.gamma),
                num(p.eta),
                p.rho.map_or_else(|| "inf".to_string(), num),
                opt_num(p.eps_rho_audit),
                opt_num(p.condition_value),
                p.realizations.to_string(),
                p.seed.to_string(),
                num(p.estimate),
                num(p.prediction),
                num(p.error),
                num(p.std_err),
                opt_num(p.probe_max_z),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Aggregated outputs of [`report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub csv: String,
    pub summary: String,
    pub manifest: serde_json::Value,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Fixed-column CSV, a text summary and a manifest over named reports.
pub fn report(reports: &[(String, ConvergenceReport)]) -> Result<ReportBundle> {
    let names: Vec<&str> = reports.iter().map(|(n, _)| n.as_str()).collect();
    let list: Vec<ConvergenceReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let csv = rows_to_csv(&list, &names)?;
    let mut summary = String::new();
    if reports.is_empty() {
        summary.push_str("no convergence reports\n");
    }
    for (name, r) in reports {
        let _ = writeln!(
            summary,
            "{name}: {} schedule, condition {}, {} points, seed {}",
            kind_name(r.kind),
            r.condition.as_deref().unwrap_or("none"),
            r.points.len(),
            r.seed
        );
        for p in &r.points {
            let _ = writeln!(
                summary,
                "  eps {:<8} gamma {:<10.4e} error {:.4e} +- {:.2e}",
                p.epsilon, p.gamma, p.error, p.std_err
            );
        }
        let _ = writeln!(
            summary,
            "  decreasing beyond 1 sigma: {}; final error {:.4e}",
            if r.decreasing_beyond_one_sigma { "yes" } else { "no" },
            r.final_error
        );
    }
    let manifest = serde_json::json!({
        "tool": "turbwig",
        "version": env!("CARGO_PKG_VERSION"),
        "reports": reports.iter().map(|(name, r)| serde_json::json!({
            "name": name,
            "kind": kind_name(r.kind),
            "condition": r.condition,
            "config_hash": r.config_hash,
            "model_hash": r.model_hash,
            "seed": r.seed,
            "points": r.points.len(),
        })).collect::<Vec<_>>(),
        "files": {
            "report.csv": sha256_hex(&csv),
            "summary.txt": sha256_hex(&summary),
        },
    });
    Ok(ReportBundle { csv, summary, manifest })
}

/// Writes `report.csv`, `summary.txt` and `manifest.json` into `dir`.
pub fn write_report(dir: &Path, bundle: &ReportBundle) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        ("report.csv", bundle.csv.clone()),
        ("summary.txt", bundle.summary.clone()),
        ("manifest.json", serde_json::to_string_pretty(&bundle.manifest)? + "\n"),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}

/// Writes `<name>.json`, `<name>.csv` and `<name>.timing.json`.
pub fn write_convergence(dir: &Path, name: &str, r: &ConvergenceReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (format!("{name}.json"), r.to_json()?),
        (format!("{name}.csv"), r.to_csv()?),
        (format!("{name}.timing.json"), r.timing_json()?),
    ];
    let mut out = Vec::new();
    for (file, text) in files {
        let path = dir.join(file);
        std::fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_jackknife_of_mean_matches_standard_error() {
        // for the sample mean the delete-a-group jackknife reproduces the
        // between-group standard error exactly
        let data: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64).collect();
        let mut sums = GroupSums::new(10, 1);
        for (i, v) in data.iter().enumerate() {
            sums.add(i, &[*v]);
        }
        let (m, se) = sums.jackknife(|m| m[0]);
        let mean = data.iter().sum::<f64>() / 40.0;
        let group_means: Vec<f64> = (0..10)
            .map(|g| data.iter().enumerate().filter(|(i, _)| i % 10 == g).map(|(_, v)| v).sum::<f64>() / 4.0)
            .collect();
        let var = group_means.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (10.0 * 9.0);
        assert!((m - mean).abs() < 1e-12);
        assert!((se - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_report_has_header_only() {
        let b = report(&[]).unwrap();
        assert_eq!(b.csv.lines().count(), 1);
        assert!(b.csv.starts_with("report,kind,condition,point,epsilon"));
        assert_eq!(b.summary, "no convergence reports\n");
    }

    #[test]
    fn beam_steps_respect_both_limits() {
        assert_eq!(beam_steps(1.0, 0.5, 0.5, 0.1), 10);
        assert_eq!(beam_steps(1.0, 0.1, 0.5, 0.1), 200);
    }
}
