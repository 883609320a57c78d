use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use turbwig_core::beam::{split_step_propagate, ComplexBeam};
use turbwig_core::config::{ExperimentConfig, RegimeKind, SchedulePoint};
use turbwig_core::container;
use turbwig_core::harness::{self, beam_steps, ConvergenceReport};
use turbwig_core::medium::{synthesize_volume, FieldRealization, VolumeSpec};
use turbwig_core::moments::{
    solve_mean_inhomogeneous, solve_mean_liouville_with, solve_mean_wm_with, solve_npoint_liouville,
    InhomogeneousOptions, MeanSolverOptions, NpointOptions, PhaseSpaceFn, WhiteNoiseModel,
};
use turbwig_core::par::{self, Execution};
use turbwig_core::rays::{trace_rays_medium, trace_rays_sde, MediumTraceOptions, RayEnsemble, SdeOptions};
use turbwig_core::spectra::{covariance_function, structure_function, transverse_spectrum};
use turbwig_core::wigner::{gaussian_wigner, wigner_transform_with, WignerGrid, WignerSampling};

#[derive(Parser)]
#[command(name = "turbwig", version, about = "Beams in synthetic turbulence and their white-noise limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Schedule point used by single-realization commands.
    #[arg(long, default_value_t = 0)]
    point: usize,
    /// Medium realization index for single-realization commands.
    #[arg(long, default_value_t = 0)]
    realization: u64,
}

#[derive(Args, Clone)]
struct WignerArgs {
    #[command(flatten)]
    common: Common,
    /// Beam container to transform instead of propagating a new beam; its
    /// model hash must match the config.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RaysArgs {
    #[command(flatten)]
    common: Common,
    /// Trace through a synthesized medium or through the white-noise limit.
    #[arg(long, value_enum, default_value_t = RayMode::Medium)]
    mode: RayMode,
    /// Step of the limit SDE (`--mode sde` only).
    #[arg(long, default_value_t = 1e-2)]
    sde_dz: f64,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum RayMode {
    Medium,
    Sde,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Accepted for uniformity; reports are read from `--input`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding convergence report JSON files; defaults to `--out`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral density and covariance tables.
    Spectra(Common),
    /// Synthesize one medium realization into a binary container.
    Medium(Common),
    /// Propagate the configured beam through one realization.
    Beam(Common),
    /// Wigner transform of a propagated (or loaded) beam.
    Wigner(WignerArgs),
    /// Trace a ray ensemble through one realization.
    Rays(RaysArgs),
    /// Mean Wigner-Moyal solution.
    MeanWm(Common),
    /// Mean Liouville solution.
    MeanLiouville(Common),
    /// Monte Carlo n-point Liouville moments at the configured probes.
    Npoint(Common),
    /// Convergence schedule against the mean Wigner-Moyal solver.
    ConvergeWm(Common),
    /// Convergence schedule against the Liouville limit.
    ConvergeLiouville(Common),
    /// Aggregate convergence reports into CSV, summary and manifest.
    Report(ReportArgs),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Report(a) => a.threads,
        Command::Wigner(a) => a.common.threads,
        Command::Rays(a) => a.common.threads,
        Command::Spectra(c)
        | Command::Medium(c)
        | Command::Beam(c)
        | Command::MeanWm(c)
        | Command::MeanLiouville(c)
        | Command::Npoint(c)
        | Command::ConvergeWm(c)
        | Command::ConvergeLiouville(c) => c.threads,
    };
    par::with_threads(threads, || dispatch(cli.command))?
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Spectra(c) => spectra(&Ctx::new(c)?),
        Command::Medium(c) => medium(&Ctx::new(c)?),
        Command::Beam(c) => beam(&Ctx::new(c)?),
        Command::Wigner(a) => wigner(&Ctx::new(a.common)?, a.input.as_deref()),
        Command::Rays(a) => rays(&Ctx::new(a.common)?, a.mode, a.sde_dz),
        Command::MeanWm(c) => mean_wm(&Ctx::new(c)?),
        Command::MeanLiouville(c) => mean_liouville(&Ctx::new(c)?),
        Command::Npoint(c) => npoint(&Ctx::new(c)?),
        Command::ConvergeWm(c) => {
            let ctx = Ctx::new(c)?;
            let r = harness::run_convergence_wm_with(&ctx.cfg, Execution::Parallel)?;
            convergence_outputs(&ctx, "converge-wm", &r)
        }
        Command::ConvergeLiouville(c) => {
            let ctx = Ctx::new(c)?;
            let r = harness::run_convergence_liouville_with(&ctx.cfg, Execution::Parallel)?;
            convergence_outputs(&ctx, "converge-liouville", &r)
        }
        Command::Report(a) => report(&a),
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    common: Common,
}

impl Ctx {
    fn new(common: Common) -> Result<Self> {
        let mut cfg = ExperimentConfig::load(&common.config)
            .with_context(|| format!("loading {}", common.config.display()))?;
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        fs::create_dir_all(&common.out)?;
        Ok(Self { cfg, common })
    }

    fn point(&self) -> Result<SchedulePoint> {
        let points = self.cfg.schedule_points()?;
        points
            .get(self.common.point)
            .copied()
            .with_context(|| format!("--point {} but the schedule has {} points", self.common.point, points.len()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.common.out.join(name)
    }

    fn model_hash(&self) -> Result<String> {
        Ok(self.cfg.model_at(&self.point()?)?.hash())
    }

    fn manifest(&self, command: &str, files: &[PathBuf], extra: serde_json::Value) -> Result<()> {
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        let p = self.point()?;
        let m = json!({
            "tool": "turbwig",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": self.common.config.display().to_string(),
            "config_hash": self.cfg.hash(),
            "model_hash": self.model_hash()?,
            "seed": self.cfg.seed,
            "point": { "epsilon": p.epsilon, "gamma": p.gamma, "eta": p.eta, "rho": finite_or_null(p.rho) },
            "files": names,
            "details": extra,
        });
        let path = self.path(&format!("{command}.manifest.json"));
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn volume(&self, p: &SchedulePoint) -> Result<FieldRealization> {
        let dz_field = self.cfg.field_spacing(p)?;
        let vol = VolumeSpec::covering(self.cfg.physics.z, p.epsilon, dz_field, self.cfg.field_margin(p));
        let real = synthesize_volume(
            &self.cfg.model_at(p)?,
            &self.cfg.transverse_grid()?,
            vol,
            self.cfg.seed,
            self.common.realization,
        )?;
        Ok(real.with_epsilon(p.epsilon))
    }

    fn initial_beam(&self, p: &SchedulePoint) -> Result<ComplexBeam> {
        Ok(ComplexBeam::gaussian(
            &self.cfg.transverse_grid()?,
            p.gamma,
            self.cfg.physics.ktilde,
            self.cfg.gaussian_beam(),
        )?)
    }

    fn propagated_beam(&self) -> Result<ComplexBeam> {
        let p = self.point()?;
        let beam0 = self.initial_beam(&p)?;
        let z = self.cfg.physics.z;
        if z == 0.0 {
            return Ok(beam0);
        }
        let real = self.volume(&p)?;
        let n = beam_steps(z, p.epsilon, self.cfg.field_spacing(&p)?, self.cfg.propagation.max_dz);
        Ok(split_step_propagate(&beam0, Some(&real), &self.cfg.background_model(), z / n as f64, n)?)
    }

    fn sampling(&self) -> WignerSampling {
        WignerSampling {
            stride: self.cfg.grid.wigner_stride,
            exec: Execution::Parallel,
        }
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn wigner_csv(path: &Path, w: &WignerGrid) -> Result<()> {
    let xs = w.axes.xs();
    let ps = w.axes.ps();
    let rows = xs.iter().enumerate().flat_map(|(j, &x)| {
        ps.iter()
            .enumerate()
            .map(move |(k, &p)| vec![num(x), num(p), num(w.get(j, k))])
            .collect::<Vec<_>>()
    });
    write_csv(path, &["x", "p", "w"], rows)
}

fn spectra(ctx: &Ctx) -> Result<()> {
    let p = ctx.point()?;
    let model = ctx.cfg.model_at(&p)?;
    let eff = transverse_spectrum(&model);
    let grid = ctx.cfg.transverse_grid()?;
    let kmax = grid.nyquist();
    let count = 400;
    let spec_path = ctx.path("spectrum.csv");
    let rows = (1..=count).map(|i| {
        let k = kmax * i as f64 / count as f64;
        vec![num(k), num(model.radial(k)), num(eff.eval_radial(k))]
    });
    write_csv(&spec_path, &["k", "radial_spectrum", "transverse_spectrum"], rows)?;
    let cov_path = ctx.path("covariance.csv");
    let rmax = grid.length() / 2.0;
    // lag vectors are (t, x); only transverse lags are tabulated
    let covariance = |r: f64| {
        let mut x = vec![0.0; model.dim + 1];
        x[1] = r;
        covariance_function(&model, &x).ok()
    };
    let b0 = covariance(0.0);
    let mut rows = Vec::with_capacity(count + 1);
    for i in 0..=count {
        let r = rmax * i as f64 / count as f64;
        let cov = covariance(r);
        // the radial structure function needs rho = inf; otherwise 2 (B(0) - B(r))
        let structure = structure_function(&model, r)
            .ok()
            .or_else(|| Some(2.0 * (b0? - cov?)));
        rows.push(vec![num(r), cov.map(num).unwrap_or_default(), structure.map(num).unwrap_or_default()]);
    }
    write_csv(&cov_path, &["r", "covariance", "structure_function"], rows)?;
    let d0 = eff.integral().ok();
    ctx.manifest(
        "spectra",
        &[spec_path, cov_path],
        json!({ "transverse_integral": d0, "form": model.form.name(), "hurst": model.hurst }),
    )
}

fn medium(ctx: &Ctx) -> Result<()> {
    let p = ctx.point()?;
    let real = ctx.volume(&p)?;
    for w in &real.warnings {
        log::warn!("{w}");
    }
    let path = ctx.path("medium.bin");
    write_bytes(&path, &container::encode_realization(&real)?)?;
    ctx.manifest(
        "medium",
        &[path],
        json!({ "slices": real.nz, "dz_field": real.dz_field, "max_abs": real.max_abs(), "warnings": real.warnings }),
    )
}

fn beam(ctx: &Ctx) -> Result<()> {
    let b = ctx.propagated_beam()?;
    let hash = ctx.model_hash()?;
    let bin = ctx.path("beam.bin");
    write_bytes(&bin, &container::encode_beam(&b, &hash, ctx.cfg.seed)?)?;
    let csv_path = ctx.path("beam.csv");
    let rows = b.values.iter().enumerate().map(|(i, v)| {
        let x = b.grid.position(i);
        let mut row: Vec<String> = x[..b.grid.dim].iter().map(|&c| num(c)).collect();
        row.extend([num(v.re), num(v.im), num(v.norm_sqr())]);
        row
    });
    let header: &[&str] = if b.grid.dim == 1 {
        &["x", "re", "im", "intensity"]
    } else {
        &["x1", "x2", "re", "im", "intensity"]
    };
    write_csv(&csv_path, header, rows)?;
    ctx.manifest("beam", &[bin, csv_path], json!({ "z": b.z, "norm_sq": b.norm_sq() }))
}

fn wigner(ctx: &Ctx, input: Option<&Path>) -> Result<()> {
    let hash = ctx.model_hash()?;
    let b = match input {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            container::decode_beam(&bytes, Some(&hash))
                .with_context(|| format!("{} does not belong to this config", path.display()))?
        }
        None => ctx.propagated_beam()?,
    };
    let w = wigner_transform_with(&b, ctx.sampling())?;
    let bin = ctx.path("wigner.bin");
    write_bytes(&bin, &container::encode_wigner(&w, &hash, ctx.cfg.seed)?)?;
    let csv_path = ctx.path("wigner.csv");
    wigner_csv(&csv_path, &w)?;
    ctx.manifest("wigner", &[bin, csv_path], json!({ "z": w.z, "mass": w.mass(), "l2_norm": w.l2_norm() }))
}

fn rays(ctx: &Ctx, mode: RayMode, sde_dz: f64) -> Result<()> {
    let p = ctx.point()?;
    let r = ctx.cfg.rays()?;
    let start = RayEnsemble::gaussian(
        1,
        r.count,
        [r.center, 0.0],
        r.position_spread,
        [r.momentum, 0.0],
        r.momentum_spread,
        ctx.cfg.seed ^ ctx.common.realization,
    )?;
    let end = match mode {
        RayMode::Medium => {
            let real = ctx.volume(&p)?;
            let opts = MediumTraceOptions {
                ktilde: ctx.cfg.physics.ktilde,
                dz: r.step_fraction * p.epsilon * p.epsilon * ctx.cfg.field_spacing(&p)?,
                exec: Execution::Parallel,
            };
            trace_rays_medium(&start, Some(&real), &ctx.cfg.background_model(), ctx.cfg.physics.z, opts)?
        }
        RayMode::Sde => {
            let wn = WhiteNoiseModel::liouville(ctx.cfg.model_at(&p)?, ctx.cfg.physics.ktilde, ctx.cfg.background_model())?;
            let opts = SdeOptions {
                tuple_size: 1,
                dz: sde_dz,
                seed: ctx.cfg.seed ^ ctx.common.realization,
                exec: Execution::Parallel,
            };
            trace_rays_sde(&start, &wn, ctx.cfg.physics.z, opts)?
        }
    };
    let path = ctx.path("rays.csv");
    let rows = (0..start.len()).map(|i| {
        vec![
            num(start.positions[i]),
            num(start.momenta[i]),
            num(end.positions[i]),
            num(end.momenta[i]),
        ]
    });
    write_csv(&path, &["x0", "p0", "x", "p"], rows)?;
    ctx.manifest(
        "rays",
        &[path],
        json!({ "mode": if mode == RayMode::Sde { "sde" } else { "medium" }, "momentum_variance": end.momentum_variance(0), "position_variance": end.position_variance(0) }),
    )
}

fn initial_wigner(ctx: &Ctx, p: &SchedulePoint) -> Result<WignerGrid> {
    Ok(wigner_transform_with(&ctx.initial_beam(p)?, ctx.sampling())?)
}

fn mean_wm(ctx: &Ctx) -> Result<()> {
    let p = ctx.point()?;
    let w0 = initial_wigner(ctx, &p)?;
    let wn = WhiteNoiseModel::wigner_moyal(ctx.cfg.model_at(&p)?, p.gamma, ctx.cfg.physics.ktilde, ctx.cfg.background_model())?;
    let opts = MeanSolverOptions {
        exec: Execution::Parallel,
        ..Default::default()
    };
    let w = solve_mean_wm_with(&w0, &wn, ctx.cfg.physics.z, opts)?
        .into_grid()
        .context("mean solver returned no grid")?;
    write_mean(ctx, "mean-wm", &w)
}

fn mean_liouville(ctx: &Ctx) -> Result<()> {
    let p = ctx.point()?;
    let w0 = initial_wigner(ctx, &p)?;
    let bg = ctx.cfg.background_model();
    let homogeneous = bg.is_homogeneous();
    let wn = WhiteNoiseModel::liouville(ctx.cfg.model_at(&p)?, ctx.cfg.physics.ktilde, bg)?;
    let z = ctx.cfg.physics.z;
    let field = if homogeneous {
        let opts = MeanSolverOptions {
            exec: Execution::Parallel,
            ..Default::default()
        };
        solve_mean_liouville_with(&w0, &wn, z, opts)?
    } else {
        let opts = InhomogeneousOptions {
            nsteps: ((z / ctx.cfg.propagation.max_dz).ceil() as usize).max(1),
            exec: Execution::Parallel,
            ..Default::default()
        };
        solve_mean_inhomogeneous(&w0, &wn, z, opts)?
    };
    let w = field.into_grid().context("mean solver returned no grid")?;
    write_mean(ctx, "mean-liouville", &w)
}

fn write_mean(ctx: &Ctx, command: &str, w: &WignerGrid) -> Result<()> {
    let hash = ctx.model_hash()?;
    let bin = ctx.path(&format!("{command}.bin"));
    write_bytes(&bin, &container::encode_wigner(w, &hash, ctx.cfg.seed)?)?;
    let csv_path = ctx.path(&format!("{command}.csv"));
    wigner_csv(&csv_path, w)?;
    ctx.manifest(command, &[bin, csv_path], json!({ "z": w.z, "mass": w.mass(), "l2_norm": w.l2_norm() }))
}

fn npoint(ctx: &Ctx) -> Result<()> {
    if ctx.cfg.regime != RegimeKind::Liouville {
        bail!("npoint needs regime = \"liouville\"");
    }
    let section = ctx.cfg.npoint.as_ref().context("missing [npoint] section")?;
    let order = section.probes.first().map_or(0, |p| p.len() / 2);
    if order == 0 {
        bail!("npoint.probes must list at least one point of 2n coordinates");
    }
    let p = ctx.point()?;
    let beam = ctx.cfg.beam.clone();
    let gamma = p.gamma;
    let one_point = move |x: f64, q: f64| gaussian_wigner(beam.center, beam.width, beam.momentum, beam.chirp, gamma, x, q);
    let initial: Vec<&dyn PhaseSpaceFn> = (0..order).map(|_| &one_point as &dyn PhaseSpaceFn).collect();
    let wn = WhiteNoiseModel::liouville(ctx.cfg.model_at(&p)?, ctx.cfg.physics.ktilde, ctx.cfg.background_model())?;
    let opts = NpointOptions {
        samples: section.samples,
        dz: section.dz,
        seed: ctx.cfg.seed,
        exec: Execution::Parallel,
    };
    let field = solve_npoint_liouville(&initial, &wn, ctx.cfg.physics.z, &section.probes, opts)?;
    let estimates = field.probes().context("n-point solver returned no probes")?;
    let path = ctx.path("npoint.csv");
    let mut header: Vec<String> = Vec::new();
    for j in 1..=order {
        header.push(format!("x{j}"));
        header.push(format!("p{j}"));
    }
    header.extend(["value".into(), "std_err".into()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = estimates.iter().map(|e| {
        let mut row: Vec<String> = e.point.iter().map(|&v| num(v)).collect();
        row.extend([num(e.value), num(e.std_err)]);
        row
    });
    write_csv(&path, &header_refs, rows)?;
    ctx.manifest("npoint", &[path], json!({ "order": order, "samples": section.samples }))
}

fn convergence_outputs(ctx: &Ctx, name: &str, r: &ConvergenceReport) -> Result<()> {
    let files = harness::write_convergence(&ctx.common.out, name, r)?;
    for f in &files {
        log::info!("wrote {}", f.display());
    }
    ctx.manifest(
        name,
        &files,
        json!({
            "decreasing_beyond_one_sigma": r.decreasing_beyond_one_sigma,
            "final_error": r.final_error,
            "points": r.points.len(),
        }),
    )
}

fn report(a: &ReportArgs) -> Result<()> {
    let dir = a.input.clone().unwrap_or_else(|| a.out.clone());
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let mut reports = Vec::new();
    for path in entries {
        let text = fs::read_to_string(&path)?;
        // manifests and timing files share the directory; keep only reports
        if let Ok(r) = ConvergenceReport::from_json(&text) {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            reports.push((name, r));
        }
    }
    let bundle = harness::report(&reports)?;
    for f in harness::write_report(&a.out, &bundle)? {
        log::info!("wrote {}", f.display());
    }
    print!("{}", bundle.summary);
    Ok(())
}
