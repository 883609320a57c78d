//! White-noise limit models: covariance operators, the exact mean solvers in
//! double-Fourier variables, the inhomogeneous kinetic solver and the n-point
//! Liouville moments.
//!
//! Phase-space grid solvers work in one transverse dimension. Conventions:
//! transport `d_z F + (1/k) p d_x F`, right-hand side `(k^2/2) Q0 F` with
//! `Q0` the multiplier `-g(y)` in the momentum-Fourier variable, and
//! `g(y) = 2 gamma^-2 int Phi_eff(q) (1 - cos(gamma q y)) dq`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::background::BackgroundModel;
use crate::error::{invalid, Error, Result};
use crate::fft::LineFft;
use crate::par::{self, Execution};
use crate::quad::{self, Tolerance};
use crate::rays::{self, BackwardOptions};
use crate::spectra::{diffusion_tensor, transverse_spectrum, SpectrumForm, SpectrumModel};
use crate::wigner::{PhaseAxes, WignerGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    WignerMoyal { gamma: f64 },
    Liouville,
}

#[derive(Debug, Clone)]
pub struct WhiteNoiseModel {
    pub regime: Regime,
    pub spectrum: SpectrumModel,
    pub ktilde: f64,
    pub background: BackgroundModel,
}

impl WhiteNoiseModel {
    pub fn wigner_moyal(spectrum: SpectrumModel, gamma: f64, ktilde: f64, background: BackgroundModel) -> Result<Self> {
        spectrum.validate()?;
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "the Wigner-Moyal regime needs gamma > 0"));
        }
        check_ktilde(ktilde)?;
        if spectrum.is_builtin() && spectrum.amplitude > 0.0 {
            let h = spectrum.hurst;
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::Regime(format!("Wigner-Moyal regime needs H in (0, 1), got {h}")));
            }
            if spectrum.eta == 0.0 && h >= 0.5 {
                return Err(Error::Regime(format!(
                    "Wigner-Moyal regime with eta = 0 needs H < 1/2, got H = {h}"
                )));
            }
        }
        Ok(Self {
            regime: Regime::WignerMoyal { gamma },
            spectrum,
            ktilde,
            background,
        })
    }

    pub fn liouville(spectrum: SpectrumModel, ktilde: f64, background: BackgroundModel) -> Result<Self> {
        spectrum.validate()?;
        check_ktilde(ktilde)?;
        transverse_spectrum(&spectrum).check_second_moment().map_err(|e| match e {
            Error::Divergence { condition, .. } => Error::Regime(format!("Liouville regime: {condition}")),
            other => other,
        })?;
        Ok(Self {
            regime: Regime::Liouville,
            spectrum,
            ktilde,
            background,
        })
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.regime {
            Regime::WignerMoyal { gamma } => Some(gamma),
            Regime::Liouville => None,
        }
    }

    fn require_wm(&self, what: &str) -> Result<f64> {
        self.gamma()
            .ok_or_else(|| Error::Regime(format!("{what} needs the Wigner-Moyal regime")))
    }

    fn require_liouville(&self, what: &str) -> Result<()> {
        match self.regime {
            Regime::Liouville => Ok(()),
            _ => Err(Error::Regime(format!("{what} needs the Liouville regime"))),
        }
    }

    /// `D(0)` for one transverse dimension.
    pub fn diffusion_origin(&self) -> Result<f64> {
        require_1d(&self.spectrum)?;
        Ok(diffusion_tensor(&self.spectrum, &[0.0])?.origin[0])
    }
}

fn check_ktilde(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("ktilde", "must be positive"));
    }
    Ok(())
}

fn require_1d(model: &SpectrumModel) -> Result<()> {
    if model.dim != 1 {
        return Err(Error::Unsupported(
            "phase-space grid solvers are implemented for one transverse dimension".into(),
        ));
    }
    Ok(())
}

const QUAD_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-10 };

/// Even part of `Phi_eff` on `[0, inf)` with the factor counting both signs.
fn folded_effective(model: &SpectrumModel) -> impl Fn(f64) -> f64 + '_ {
    let spec = transverse_spectrum(model);
    let custom = matches!(model.form, SpectrumForm::Custom(_));
    move |q: f64| {
        if custom {
            spec.eval(&[q]) + spec.eval(&[-q])
        } else {
            2.0 * spec.eval_radial(q)
        }
    }
}

/// `g(y) = 2 gamma^-2 int Phi_eff(q) (1 - cos(gamma q y)) dq` in one dimension.
pub fn structure_rate(model: &SpectrumModel, gamma: f64, y: f64) -> Result<f64> {
    require_1d(model)?;
    if model.amplitude == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    let f = folded_effective(model);
    let est = quad::one_minus_cosine(&f, gamma * y.abs(), model.structure_scale(), QUAD_TOL)?;
    Ok(2.0 / (gamma * gamma) * est.value)
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// `G(y) = int_0^y g(u) du = 2 gamma^-2 y int Phi_eff (1 - sinc(gamma q y)) dq`.
pub fn structure_rate_integral(model: &SpectrumModel, gamma: f64, y: f64) -> Result<f64> {
    require_1d(model)?;
    if model.amplitude == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    let f = folded_effective(model);
    let est = quad::one_minus_transform(&f, sinc, gamma * y.abs(), model.structure_scale(), QUAD_TOL)?;
    Ok(2.0 / (gamma * gamma) * y * est.value)
}

/// Tabulated `g` and its antiderivative `G` on `[0, reach]`; `g` by
/// four-point Lagrange, `G` by cubic Hermite with slopes `g`.
#[derive(Debug, Clone)]
pub struct WhiteNoiseKernel {
    spacing: f64,
    g: Vec<f64>,
    big: Vec<f64>,
}

impl WhiteNoiseKernel {
    pub fn build(model: &SpectrumModel, gamma: f64, reach: f64, spacing: f64, exec: Execution) -> Result<Self> {
        if !(spacing > 0.0) || !(reach >= 0.0) {
            return Err(invalid("spacing", "table spacing must be positive"));
        }
        let n = (reach / spacing).ceil() as usize + 3;
        if n > 200_000 {
            return Err(Error::ResourceCeiling(format!(
                "kernel table of {n} nodes; coarsen the momentum grid or shorten z"
            )));
        }
        let rows = par::map(exec, n, |i| -> Result<(f64, f64)> {
            let y = i as f64 * spacing;
            Ok((structure_rate(model, gamma, y)?, structure_rate_integral(model, gamma, y)?))
        });
        let mut g = Vec::with_capacity(n);
        let mut big = Vec::with_capacity(n);
        for r in rows {
            let (a, b) = r?;
            g.push(a);
            big.push(b);
        }
        Ok(Self { spacing, g, big })
    }

    pub fn reach(&self) -> f64 {
        (self.g.len() - 3) as f64 * self.spacing
    }

    pub fn g(&self, y: f64) -> f64 {
        let t = y.abs() / self.spacing;
        let i = (t.floor() as usize).min(self.g.len() - 3);
        let f = t - i as f64;
        let y0 = if i == 0 { self.g[1] } else { self.g[i - 1] };
        let (y1, y2, y3) = (self.g[i], self.g[i + 1], self.g[i + 2]);
        let c0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let c2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let c3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3
    }

    /// `G(y)`, odd in `y`.
    pub fn big_g(&self, y: f64) -> f64 {
        let t = y.abs() / self.spacing;
        let i = (t.floor() as usize).min(self.g.len() - 2);
        let f = t - i as f64;
        let h = self.spacing;
        let (p0, p1) = (self.big[i], self.big[i + 1]);
        let (m0, m1) = (self.g[i] * h, self.g[i + 1] * h);
        let f2 = f * f;
        let f3 = f2 * f;
        let v = (2.0 * f3 - 3.0 * f2 + 1.0) * p0
            + (f3 - 2.0 * f2 + f) * m0
            + (-2.0 * f3 + 3.0 * f2) * p1
            + (f3 - f2) * m1;
        v.copysign(y)
    }

    /// `int_0^z g(y + u xi / k) du`.
    pub fn path_integral(&self, y: f64, xi: f64, z: f64, ktilde: f64) -> f64 {
        let shift = z * xi / ktilde;
        if shift.abs() < 1e-6 * self.spacing {
            return z * self.g(y + 0.5 * shift);
        }
        (self.big_g(y + shift) - self.big_g(y)) * ktilde / xi
    }
}

/// A real function on one-dimensional phase space.
pub trait PhaseSpaceFn: Sync {
    fn value(&self, x: f64, p: f64) -> f64;

    fn grad_p(&self, x: f64, p: f64) -> f64 {
        let h = 1e-4;
        (self.value(x, p + h) - self.value(x, p - h)) / (2.0 * h)
    }
}

impl PhaseSpaceFn for WignerGrid {
    fn value(&self, x: f64, p: f64) -> f64 {
        self.interpolate(x, p)
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> PhaseSpaceFn for F {
    fn value(&self, x: f64, p: f64) -> f64 {
        self(x, p)
    }
}

/// Signed frequency of FFT index `l` for `n` samples with spacing `h`.
pub(crate) fn frequency(l: usize, n: usize, h: f64) -> f64 {
    let s = if l < n / 2 { l as i64 } else { l as i64 - n as i64 };
    2.0 * PI * s as f64 / (n as f64 * h)
}

/// In-place FFT along the slow axis of an `rows x cols` row-major array.
fn fft_columns(data: &mut [Complex64], rows: usize, cols: usize, fft: &LineFft, inverse: bool, exec: Execution) {
    let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = data[r * cols + c];
        }
    }
    par::for_each_chunk(exec, &mut t, rows, |_, line| {
        if inverse {
            fft.inverse(line)
        } else {
            fft.forward(line)
        }
    });
    for r in 0..rows {
        for c in 0..cols {
            data[r * cols + c] = t[c * rows + r];
        }
    }
}

fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// `Q0 theta`: multiplier `-g(y)` in the momentum-Fourier variable.
pub fn apply_q0_wm(theta: &WignerGrid, model: &WhiteNoiseModel) -> Result<WignerGrid> {
    let gamma = model.require_wm("apply_q0_wm")?;
    let axes = &theta.axes;
    let np = axes.np;
    let mult = par::map(Execution::default(), np, |l| {
        structure_rate(&model.spectrum, gamma, frequency(l, np, axes.dp)).map(|g| -g)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(p_multiplier(theta, &mult))
}

/// `D(0) d_p^2 theta` by the spectral multiplier `-D(0) y^2`.
pub fn apply_diffusion(theta: &WignerGrid, d0: f64) -> WignerGrid {
    let np = theta.axes.np;
    let mult: Vec<f64> = (0..np)
        .map(|l| -d0 * frequency(l, np, theta.axes.dp).powi(2))
        .collect();
    p_multiplier(theta, &mult)
}

fn p_multiplier(theta: &WignerGrid, mult: &[f64]) -> WignerGrid {
    let np = theta.axes.np;
    let fft = LineFft::new(np);
    let mut data = to_complex(&theta.values);
    par::for_each_chunk(Execution::default(), &mut data, np, |_, row| {
        fft.forward(row);
        for (v, m) in row.iter_mut().zip(mult) {
            *v *= m;
        }
        fft.inverse(row);
    });
    WignerGrid {
        axes: theta.axes.clone(),
        values: data.iter().map(|c| c.re).collect(),
        gamma: theta.gamma,
        z: theta.z,
    }
}

/// Cross-covariance kernel at points `(x, p, y, q)`. Wigner-Moyal:
/// `int Phi_eff(k) cos(k(x-y)) gamma^-2 D1(k) D2(k) dk` with
/// `Di(k) = theta_i(., . - gamma k/2) - theta_i(., . + gamma k/2)`.
/// Liouville: `d_p theta1(x,p) D(x-y) d_q theta2(y,q)`.
pub fn apply_q_cross(
    theta1: &dyn PhaseSpaceFn,
    theta2: &dyn PhaseSpaceFn,
    model: &WhiteNoiseModel,
    points: &[[f64; 4]],
) -> Result<Vec<f64>> {
    require_1d(&model.spectrum)?;
    match model.regime {
        Regime::WignerMoyal { gamma } => {
            let spec = transverse_spectrum(&model.spectrum);
            let scale = model.spectrum.structure_scale();
            points
                .iter()
                .map(|&[x, p, y, q]| {
                    let f = |k: f64| {
                        let d1 = theta1.value(x, p - 0.5 * gamma * k) - theta1.value(x, p + 0.5 * gamma * k);
                        let d2 = theta2.value(y, q - 0.5 * gamma * k) - theta2.value(y, q + 0.5 * gamma * k);
                        let phi = spec.eval(&[k]) + spec.eval(&[-k]);
                        phi * (k * (x - y)).cos() * d1 * d2 / (gamma * gamma)
                    };
                    let head = quad::integrate(f, 0.0, scale, QUAD_TOL)?;
                    let tail = quad::integrate_to_infinity(f, scale, scale, QUAD_TOL)?;
                    Ok(head.value + tail.value)
                })
                .collect()
        }
        Regime::Liouville => points
            .iter()
            .map(|&[x, p, y, q]| {
                let d = diffusion_tensor(&model.spectrum, &[x - y])?.value[0];
                Ok(theta1.grad_p(x, p) * d * theta2.grad_p(y, q))
            })
            .collect(),
    }
}

/// One-point grid solution or Monte Carlo probe estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEstimate {
    /// `(x_1, p_1, ..., x_n, p_n)`, flattened per particle and axis.
    pub point: Vec<f64>,
    pub value: f64,
    pub std_err: f64,
}

/// Two-point moment on the grid `(x1, x2, p1, p2)`, x-indices outer.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrid {
    pub axes: PhaseAxes,
    pub values: Vec<f64>,
}

impl PairGrid {
    pub fn index(&self, j1: usize, k1: usize, j2: usize, k2: usize) -> usize {
        let (nx, np) = (self.axes.nx(), self.axes.np);
        ((j1 * nx + j2) * np + k1) * np + k2
    }

    pub fn get(&self, j1: usize, k1: usize, j2: usize, k2: usize) -> f64 {
        self.values[self.index(j1, k1, j2, k2)]
    }

    /// Integrates out the second particle.
    pub fn marginal(&self) -> Vec<f64> {
        let (nx, np) = (self.axes.nx(), self.axes.np);
        let mut out = vec![0.0; nx * np];
        for j1 in 0..nx {
            for k1 in 0..np {
                let mut s = 0.0;
                for j2 in 0..nx {
                    for k2 in 0..np {
                        s += self.get(j1, k1, j2, k2);
                    }
                }
                out[j1 * np + k1] = s * self.axes.cell_area();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MomentValues {
    Grid(WignerGrid),
    Pair(PairGrid),
    Probes(Vec<ProbeEstimate>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub order: usize,
    pub z: f64,
    pub values: MomentValues,
}

impl MomentField {
    pub fn grid(&self) -> Option<&WignerGrid> {
        match &self.values {
            MomentValues::Grid(w) => Some(w),
            _ => None,
        }
    }

    pub fn into_grid(self) -> Option<WignerGrid> {
        match self.values {
            MomentValues::Grid(w) => Some(w),
            _ => None,
        }
    }

    pub fn probes(&self) -> Option<&[ProbeEstimate]> {
        match &self.values {
            MomentValues::Probes(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSolverOptions {
    /// Largest admissible fraction of spectral energy in the outer fifth of
    /// the `xi` and `y` windows.
    pub alias_tolerance: f64,
    pub exec: Execution,
}

impl Default for MeanSolverOptions {
    fn default() -> Self {
        Self {
            alias_tolerance: 1e-6,
            exec: Execution::default(),
        }
    }
}

/// Exact mean Wigner-Moyal solution; see the module notes for conventions.
pub fn solve_mean_wm(w0: &WignerGrid, model: &WhiteNoiseModel, z: f64) -> Result<MomentField> {
    solve_mean_wm_with(w0, model, z, MeanSolverOptions::default())
}

pub fn solve_mean_wm_with(w0: &WignerGrid, model: &WhiteNoiseModel, z: f64, opts: MeanSolverOptions) -> Result<MomentField> {
    let gamma = model.require_wm("solve_mean_wm")?;
    require_homogeneous(model, "solve_mean_wm")?;
    require_1d(&model.spectrum)?;
    let axes = &w0.axes;
    let dy = 2.0 * PI / (axes.np as f64 * axes.dp);
    let y_max = PI / axes.dp;
    let xi_max = PI / axes.x.dx;
    let reach = y_max + z.abs() * xi_max / model.ktilde + dy;
    let mut spacing = dy / 4.0;
    if model.spectrum.rho.is_finite() {
        spacing = spacing.min(1.0 / (16.0 * gamma * model.spectrum.rho));
    }
    let kernel = WhiteNoiseKernel::build(&model.spectrum, gamma, reach, spacing, opts.exec)?;
    let k = model.ktilde;
    exact_mean(w0, z, k, opts, |xi, y| 0.5 * k * k * kernel.path_integral(y, xi, z, k))
}

/// Exact mean Liouville (kinetic Fokker-Planck) solution with constant `D(0)`.
pub fn solve_mean_liouville(w0: &WignerGrid, model: &WhiteNoiseModel, z: f64) -> Result<MomentField> {
    solve_mean_liouville_with(w0, model, z, MeanSolverOptions::default())
}

pub fn solve_mean_liouville_with(
    w0: &WignerGrid,
    model: &WhiteNoiseModel,
    z: f64,
    opts: MeanSolverOptions,
) -> Result<MomentField> {
    model.require_liouville("solve_mean_liouville")?;
    require_homogeneous(model, "solve_mean_liouville")?;
    let d0 = model.diffusion_origin()?;
    let k = model.ktilde;
    exact_mean(w0, z, k, opts, |xi, y| {
        let a = xi / k;
        0.5 * k * k * d0 * (y * y * z + y * a * z * z + a * a * z * z * z / 3.0)
    })
}

fn require_homogeneous(model: &WhiteNoiseModel, what: &str) -> Result<()> {
    if !model.background.is_homogeneous() {
        return Err(Error::Unsupported(format!(
            "{what} needs mu = 1 and V0 = 0; use solve_mean_inhomogeneous"
        )));
    }
    Ok(())
}

/// Free transport over `z` composed with the damping `exp(-exponent(xi, y))`
/// along the characteristics, evaluated in `(xi, y)`.
fn exact_mean<E>(w0: &WignerGrid, z: f64, ktilde: f64, opts: MeanSolverOptions, exponent: E) -> Result<MomentField>
where
    E: Fn(f64, f64) -> f64 + Sync,
{
    let axes = &w0.axes;
    let (nx, np) = (axes.nx(), axes.np);
    let ps = axes.ps();
    let xfft = LineFft::new(nx);
    let pfft = LineFft::new(np);
    let mut data = to_complex(&w0.values);
    fft_columns(&mut data, nx, np, &xfft, false, opts.exec);
    let guard_y = 0.4 * np as f64;
    let guard_x = 0.4 * nx as f64;
    let rows: Vec<(Vec<Complex64>, f64, f64)> = par::map(opts.exec, nx, |i| {
        let mut row = data[i * np..(i + 1) * np].to_vec();
        let xi = frequency(i, nx, axes.x.dx);
        let si = if i < nx / 2 { i as f64 } else { i as f64 - nx as f64 };
        for (v, &p) in row.iter_mut().zip(&ps) {
            *v *= Complex64::from_polar(1.0, -xi * p * z / ktilde);
        }
        pfft.forward(&mut row);
        let (mut guard, mut total) = (0.0, 0.0);
        for (l, v) in row.iter_mut().enumerate() {
            let y = frequency(l, np, axes.dp);
            *v *= (-exponent(xi, y)).exp();
            let e = v.norm_sqr();
            total += e;
            let sl = if l < np / 2 { l as f64 } else { l as f64 - np as f64 };
            if sl.abs() > guard_y || si.abs() > guard_x {
                guard += e;
            }
        }
        pfft.inverse(&mut row);
        (row, guard, total)
    });
    let mut guard = 0.0;
    let mut total = 0.0;
    for (i, (row, g, t)) in rows.into_iter().enumerate() {
        data[i * np..(i + 1) * np].copy_from_slice(&row);
        guard += g;
        total += t;
    }
    if total > 0.0 && guard / total > opts.alias_tolerance {
        return Err(Error::Aliasing(format!(
            "{:.3e} of the spectral energy lies in the outer fifth of the (xi, y) window (limit {:.1e}); refine dp/dx or shorten z",
            guard / total,
            opts.alias_tolerance
        )));
    }
    fft_columns(&mut data, nx, np, &xfft, true, opts.exec);
    Ok(MomentField {
        order: 1,
        z: w0.z + z,
        values: MomentValues::Grid(WignerGrid {
            axes: axes.clone(),
            values: data.iter().map(|c| c.re).collect(),
            gamma: w0.gamma,
            z: w0.z + z,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InhomogeneousOptions {
    pub nsteps: usize,
    /// Largest admissible drift or kick per step, in grid cells.
    pub max_shift_cells: f64,
    pub exec: Execution,
}

impl Default for InhomogeneousOptions {
    fn default() -> Self {
        Self {
            nsteps: 200,
            max_shift_cells: 8.0,
            exec: Execution::default(),
        }
    }
}

/// Strang splitting for
/// `d_z F + (1/k) p d_x F + k d_x V0 d_p F = (k^2/2) mu^2 D(0) d_p^2 F`.
pub fn solve_mean_inhomogeneous(
    w0: &WignerGrid,
    model: &WhiteNoiseModel,
    z: f64,
    opts: InhomogeneousOptions,
) -> Result<MomentField> {
    model.require_liouville("solve_mean_inhomogeneous")?;
    let d0 = model.diffusion_origin()?;
    if opts.nsteps == 0 {
        return Err(invalid("nsteps", "must be positive"));
    }
    let axes = &w0.axes;
    let (nx, np) = (axes.nx(), axes.np);
    let k = model.ktilde;
    let dz = z / opts.nsteps as f64;
    let xs = axes.xs();
    let ps = axes.ps();
    let bg = &model.background;
    let drift_cells = axes.p_max() * dz.abs() / (k * axes.x.dx);
    let force_max = (0..opts.nsteps.min(64))
        .flat_map(|m| {
            let zz = w0.z + (m as f64 + 0.5) * dz * opts.nsteps as f64 / opts.nsteps.min(64) as f64;
            xs.iter().map(move |&x| bg.v0.gradient(zz, &[x])[0].abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let kick_cells = k * force_max * dz.abs() / axes.dp;
    if drift_cells > opts.max_shift_cells || kick_cells > opts.max_shift_cells {
        let need = opts.nsteps as f64 * drift_cells.max(kick_cells) / opts.max_shift_cells;
        return Err(Error::StepSize(format!(
            "per-step drift {drift_cells:.2} cells, kick {kick_cells:.2} cells exceed {} cells; use at least {} steps",
            opts.max_shift_cells,
            need.ceil() as usize
        )));
    }
    let xfft = LineFft::new(nx);
    let pfft = LineFft::new(np);
    let mut data = to_complex(&w0.values);
    let transport = |data: &mut Vec<Complex64>, h: f64| {
        fft_columns(data, nx, np, &xfft, false, opts.exec);
        par::for_each_chunk(opts.exec, data, np, |i, row| {
            let xi = frequency(i, nx, axes.x.dx);
            for (v, &p) in row.iter_mut().zip(&ps) {
                *v *= Complex64::from_polar(1.0, -xi * p * h / k);
            }
        });
        fft_columns(data, nx, np, &xfft, true, opts.exec);
    };
    transport(&mut data, 0.5 * dz);
    for m in 0..opts.nsteps {
        let zm = w0.z + (m as f64 + 0.5) * dz;
        par::for_each_chunk(opts.exec, &mut data, np, |j, row| {
            let x = [xs[j]];
            let shift = k * bg.v0.gradient(zm, &x)[0] * dz;
            let mu = bg.mu.value(zm, &x);
            let rate = 0.5 * k * k * mu * mu * d0 * dz;
            pfft.forward(row);
            for (l, v) in row.iter_mut().enumerate() {
                let y = frequency(l, np, axes.dp);
                *v *= Complex64::from_polar((-rate * y * y).exp(), -shift * y);
            }
            pfft.inverse(row);
        });
        let h = if m + 1 == opts.nsteps { 0.5 * dz } else { dz };
        transport(&mut data, h);
    }
    let values: Vec<f64> = data.iter().map(|c| c.re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: opts.nsteps,
            z: w0.z + z,
        });
    }
    Ok(MomentField {
        order: 1,
        z: w0.z + z,
        values: MomentValues::Grid(WignerGrid {
            axes: axes.clone(),
            values,
            gamma: w0.gamma,
            z: w0.z + z,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGridOptions {
    pub nsteps: usize,
    pub exec: Execution,
}

/// Grid solution of the two-point Liouville moment equation in one
/// dimension, from the product initial condition `w0 (x) w0`.
pub fn solve_pair_grid(w0: &WignerGrid, model: &WhiteNoiseModel, z: f64, opts: PairGridOptions) -> Result<MomentField> {
    model.require_liouville("solve_pair_grid")?;
    require_homogeneous(model, "solve_pair_grid")?;
    require_1d(&model.spectrum)?;
    if opts.nsteps == 0 {
        return Err(invalid("nsteps", "must be positive"));
    }
    let axes = &w0.axes;
    let (nx, np) = (axes.nx(), axes.np);
    let total = nx * nx * np * np;
    if total > 1 << 24 {
        return Err(Error::ResourceCeiling(format!("pair grid with {total} cells")));
    }
    let k = model.ktilde;
    let dz = z / opts.nsteps as f64;
    // D at every separation x1 - x2 = (j1 - j2) dx
    let seps: Vec<Result<f64>> = par::map(opts.exec, 2 * nx - 1, |s| {
        let r = (s as f64 - (nx - 1) as f64) * axes.x.dx;
        diffusion_tensor(&model.spectrum, &[r]).map(|t| t.value[0])
    });
    let dsep = seps.into_iter().collect::<Result<Vec<f64>>>()?;
    let d0 = dsep[nx - 1];
    let ps = axes.ps();
    let xfft = LineFft::new(nx);
    let pfft = LineFft::new(np);

    // x-outer layout [j1][j2][k1][k2]
    let mut data = vec![Complex64::new(0.0, 0.0); total];
    for j1 in 0..nx {
        for j2 in 0..nx {
            for k1 in 0..np {
                for k2 in 0..np {
                    data[((j1 * nx + j2) * np + k1) * np + k2] = Complex64::new(w0.get(j1, k1) * w0.get(j2, k2), 0.0);
                }
            }
        }
    }
    let planes_x = nx * nx;
    let planes_p = np * np;
    let swap = |src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize| {
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    };
    let mut other = vec![Complex64::new(0.0, 0.0); total];
    let transport = |pouter: &mut [Complex64], h: f64| {
        // p-outer layout [k1][k2][j1][j2]
        par::for_each_chunk(opts.exec, pouter, planes_x, |c, plane| {
            let (k1, k2) = (c / np, c % np);
            fft2(plane, nx, nx, &xfft, &xfft, false);
            for i1 in 0..nx {
                let xi1 = frequency(i1, nx, axes.x.dx);
                for i2 in 0..nx {
                    let xi2 = frequency(i2, nx, axes.x.dx);
                    plane[i1 * nx + i2] *= Complex64::from_polar(1.0, -(xi1 * ps[k1] + xi2 * ps[k2]) * h / k);
                }
            }
            fft2(plane, nx, nx, &xfft, &xfft, true);
        });
    };
    swap(&data, &mut other, planes_x, planes_p);
    transport(&mut other, 0.5 * dz);
    for m in 0..opts.nsteps {
        swap(&other, &mut data, planes_p, planes_x);
        par::for_each_chunk(opts.exec, &mut data, planes_p, |c, plane| {
            let (j1, j2) = (c / nx, c % nx);
            let d12 = dsep[j1 + nx - 1 - j2];
            let rate = 0.5 * k * k * dz;
            fft2(plane, np, np, &pfft, &pfft, false);
            for l1 in 0..np {
                let y1 = frequency(l1, np, axes.dp);
                for l2 in 0..np {
                    let y2 = frequency(l2, np, axes.dp);
                    let q = d0 * (y1 * y1 + y2 * y2) + 2.0 * d12 * y1 * y2;
                    plane[l1 * np + l2] *= (-rate * q).exp();
                }
            }
            fft2(plane, np, np, &pfft, &pfft, true);
        });
        swap(&data, &mut other, planes_x, planes_p);
        let h = if m + 1 == opts.nsteps { 0.5 * dz } else { dz };
        transport(&mut other, h);
    }
    swap(&other, &mut data, planes_p, planes_x);
    Ok(MomentField {
        order: 2,
        z: w0.z + z,
        values: MomentValues::Pair(PairGrid {
            axes: axes.clone(),
            values: data.iter().map(|c| c.re).collect(),
        }),
    })
}

fn fft2(plane: &mut [Complex64], rows: usize, cols: usize, frow: &LineFft, fcol: &LineFft, inverse: bool) {
    if inverse {
        frow.inverse(plane);
    } else {
        frow.forward(plane);
    }
    fft_columns(plane, rows, cols, fcol, inverse, Execution::Sequential);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpointOptions {
    pub samples: usize,
    pub dz: f64,
    pub seed: u64,
    pub exec: Execution,
}

/// Monte Carlo estimate of `F^(n)(z)` at probe points from product initial
/// data `prod_j initial[j]`, by backward correlated characteristics.
pub fn solve_npoint_liouville(
    initial: &[&dyn PhaseSpaceFn],
    model: &WhiteNoiseModel,
    z: f64,
    probes: &[Vec<f64>],
    opts: NpointOptions,
) -> Result<MomentField> {
    model.require_liouville("solve_npoint_liouville")?;
    require_homogeneous(model, "solve_npoint_liouville")?;
    require_1d(&model.spectrum)?;
    let n = initial.len();
    if n == 0 || n > 4 {
        return Err(invalid("n", "moment order must be in 1..=4"));
    }
    for p in probes {
        if p.len() != 2 * n {
            return Err(invalid("probes", format!("each probe needs {} coordinates", 2 * n)));
        }
    }
    let estimates = rays::backward_moments(
        initial,
        model,
        z,
        probes,
        BackwardOptions {
            samples: opts.samples,
            dz: opts.dz,
            seed: opts.seed,
            exec: opts.exec,
        },
    )?;
    Ok(MomentField {
        order: n,
        z,
        values: MomentValues::Probes(estimates),
    })
}
