//! Gaussian random refractive-index fields: resolved `(t, x)` volumes for
//! the pre-limit model, delta-correlated phase screens for the white-noise
//! model, and statistical checks of realizations.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::{GridFft, LineFft};
use crate::grid::TransverseGrid;
use crate::quad::{self, Tolerance};
use crate::rng;
use crate::special::{radial_kernel, sphere_area};
use crate::spectra::{transverse_spectrum, SpectrumModel};

/// Longitudinal extent of a synthesized volume, in unscaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSpec {
    pub nz: usize,
    pub dz_field: f64,
}

impl VolumeSpec {
    /// Smallest slice count covering `[0, z_end / eps^2]` plus `margin`
    /// unscaled units, so that the periodic wrap in `t` stays outside the
    /// range read by a propagation.
    pub fn covering(z_end: f64, epsilon: f64, dz_field: f64, margin: f64) -> Self {
        let t = z_end / (epsilon * epsilon) + margin;
        let nz = ((t / dz_field).ceil() as usize + 2).max(4);
        Self {
            nz: nz + nz % 2,
            dz_field,
        }
    }
}

/// One realization `V(t, x)` on `nz` slices of the transverse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub grid: TransverseGrid,
    pub nz: usize,
    pub dz_field: f64,
    /// Slice-major values, `values[slice * grid.len() + point]`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub realization: u64,
    pub model_hash: String,
    /// Scaling used by [`sample_scaled`]: the propagation reads `V(z / eps^2, x)`.
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

impl FieldRealization {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn slice(&self, s: usize) -> &[f64] {
        let g = self.grid.len();
        &self.values[s * g..(s + 1) * g]
    }

    /// Largest `z` readable with the current scaling.
    pub fn z_max(&self) -> f64 {
        (self.nz - 1) as f64 * self.dz_field * self.epsilon * self.epsilon
    }

    /// Slice index and interpolation weight for longitudinal position `z`.
    pub fn locate(&self, z: f64) -> Result<(usize, f64)> {
        let s = z / (self.epsilon * self.epsilon) / self.dz_field;
        let last = (self.nz - 1) as f64;
        if !(s >= 0.0) || s > last {
            return Err(Error::OutOfRange(format!(
                "z = {z} reads t = {} but the realization covers t in [0, {}] (z in [0, {}])",
                z / (self.epsilon * self.epsilon),
                last * self.dz_field,
                self.z_max()
            )));
        }
        let i = (s.floor() as usize).min(self.nz - 2);
        Ok((i, s - i as f64))
    }

    /// Writes the interpolated slice `V(z / eps^2, .)` into `out`.
    pub fn slice_scaled(&self, z: f64, out: &mut [f64]) -> Result<()> {
        let (i, f) = self.locate(z)?;
        let (a, b) = (self.slice(i), self.slice(i + 1));
        for ((o, &va), &vb) in out.iter_mut().zip(a).zip(b) {
            *o = va + f * (vb - va);
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Transverse gradient of every slice by spectral differentiation;
    /// `out[axis]` has the same layout as `values`.
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        let g = self.grid.len();
        let fft = GridFft::new(&self.grid);
        let mut out = vec![vec![0.0; self.values.len()]; self.grid.dim];
        let mut buf = vec![Complex64::new(0.0, 0.0); g];
        let mut work = vec![Complex64::new(0.0, 0.0); g];
        for s in 0..self.nz {
            for (b, &v) in buf.iter_mut().zip(self.slice(s)) {
                *b = Complex64::new(v, 0.0);
            }
            fft.forward(&mut buf);
            for (axis, comp) in out.iter_mut().enumerate() {
                for idx in 0..g {
                    let k = self.grid.wavevector(idx)[axis];
                    // the Nyquist bin has no odd partner; drop it
                    let k = if (k.abs() - self.grid.nyquist()).abs() < 1e-12 { 0.0 } else { k };
                    work[idx] = buf[idx] * Complex64::new(0.0, k);
                }
                fft.inverse(&mut work);
                for (o, w) in comp[s * g..(s + 1) * g].iter_mut().zip(&work) {
                    *o = w.re;
                }
            }
        }
        out
    }
}

/// `V(z / eps^2, x_idx)` with linear interpolation between slices.
pub fn sample_scaled(realization: &FieldRealization, z: f64, x_index: usize) -> Result<f64> {
    if x_index >= realization.grid.len() {
        return Err(Error::OutOfRange(format!(
            "x index {x_index} outside grid of {} points",
            realization.grid.len()
        )));
    }
    let (i, f) = realization.locate(z)?;
    let a = realization.slice(i)[x_index];
    let b = realization.slice(i + 1)[x_index];
    Ok(a + f * (b - a))
}

fn signed_bin(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

fn resolution_warnings(model: &SpectrumModel, grid: &TransverseGrid) -> Vec<String> {
    let mut w = Vec::new();
    if model.rho.is_finite() && grid.nyquist() < model.rho {
        let msg = format!(
            "transverse Nyquist wavenumber {:.4} is below rho = {}; the cutoff tail is truncated",
            grid.nyquist(),
            model.rho
        );
        log::warn!("{msg}");
        w.push(msg);
    }
    w
}

/// Fills Hermitian-symmetric complex Gaussian coefficients for `modes`
/// spectral bins. `variance(u)` gives `E|a_u|^2`, `mirror(u)` the bin of the
/// negated wavevector. Bin 0 (the mean) is left at zero.
fn hermitian_coefficients<V, M>(
    modes: usize,
    seed: u64,
    tag: &str,
    stream: u64,
    variance: V,
    mirror: M,
) -> Vec<Complex64>
where
    V: Fn(usize) -> f64,
    M: Fn(usize) -> usize,
{
    let mut rng = rng::keyed(seed, tag, stream);
    let mut coef = vec![Complex64::new(0.0, 0.0); modes];
    for u in 1..modes {
        let m = mirror(u);
        if m < u {
            continue;
        }
        let var = variance(u);
        if var <= 0.0 {
            continue;
        }
        let (g1, g2) = rng::mode_normal_pair(&mut rng, u as u64);
        if m == u {
            coef[u] = Complex64::new(var.sqrt() * g1, 0.0);
        } else {
            let s = (0.5 * var).sqrt();
            coef[u] = Complex64::new(s * g1, s * g2);
            coef[m] = coef[u].conj();
        }
    }
    coef
}

/// Unnormalized inverse DFT over the transverse axes of each of `count`
/// consecutive slices.
fn inverse_transverse(grid: &TransverseGrid, data: &mut [Complex64]) {
    let n = grid.n;
    let line = LineFft::new(n);
    line.inverse_raw(data);
    if grid.dim == 2 {
        let g = grid.len();
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for slice in data.chunks_mut(g) {
            for j in 0..n {
                for i in 0..n {
                    col[i] = slice[i * n + j];
                }
                line.inverse_raw(&mut col);
                for i in 0..n {
                    slice[i * n + j] = col[i];
                }
            }
        }
    }
}

/// Gaussian field on the `(t, x)` torus with spectral density `Phi`.
pub fn synthesize_volume(
    model: &SpectrumModel,
    grid: &TransverseGrid,
    volume: VolumeSpec,
    seed: u64,
    realization: u64,
) -> Result<FieldRealization> {
    model.validate()?;
    if model.dim != grid.dim {
        return Err(Error::GridMismatch(format!(
            "model dimension {} vs grid dimension {}",
            model.dim, grid.dim
        )));
    }
    if volume.nz < 2 || !(volume.dz_field > 0.0) {
        return Err(invalid("nz", "need at least two slices and a positive spacing"));
    }
    if model.eta == 0.0 && model.is_builtin() {
        log::warn!("eta = 0: the infrared mode is truncated by the periodic box");
    }
    let g = grid.len();
    let nz = volume.nz;
    let dxi = 2.0 * PI / (nz as f64 * volume.dz_field);
    let cell = dxi * grid.dk().powi(grid.dim as i32);
    let variance = |u: usize| {
        let (t, idx) = (u / g, u % g);
        let xi = signed_bin(t, nz) as f64 * dxi;
        let q = grid.wavevector(idx);
        model.eval(xi, &q[..grid.dim]) * cell
    };
    let mirror = |u: usize| {
        let (t, idx) = (u / g, u % g);
        ((nz - t) % nz) * g + grid.mirror(idx)
    };
    let mut data = hermitian_coefficients(nz * g, seed, "volume", realization, variance, mirror);
    inverse_transverse(grid, &mut data);
    // longitudinal inverse DFT, one transverse point at a time
    let line = LineFft::new(nz);
    let mut col = vec![Complex64::new(0.0, 0.0); nz];
    for idx in 0..g {
        for t in 0..nz {
            col[t] = data[t * g + idx];
        }
        line.inverse_raw(&mut col);
        for t in 0..nz {
            data[t * g + idx] = col[t];
        }
    }
    Ok(FieldRealization {
        grid: grid.clone(),
        nz,
        dz_field: volume.dz_field,
        values: data.iter().map(|c| c.re).collect(),
        seed,
        realization,
        model_hash: model.hash(),
        epsilon: 1.0,
        warnings: resolution_warnings(model, grid),
    })
}

/// One transverse slice with the marginal spectrum `int Phi(xi, q) d xi`.
pub fn synthesize_slice(
    model: &SpectrumModel,
    grid: &TransverseGrid,
    seed: u64,
    realization: u64,
) -> Result<Vec<f64>> {
    model.validate()?;
    if model.dim != grid.dim {
        return Err(Error::GridMismatch("model and grid dimensions differ".into()));
    }
    let cell = grid.dk().powi(grid.dim as i32);
    let variance = |u: usize| {
        let q = grid.wavevector(u);
        model.transverse_marginal(&q[..grid.dim]) * cell
    };
    let mut data = hermitian_coefficients(grid.len(), seed, "slice", realization, variance, |u| grid.mirror(u));
    inverse_transverse(grid, &mut data);
    Ok(data.iter().map(|c| c.re).collect())
}

/// Independent white-noise screens, one per longitudinal step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenStack {
    pub grid: TransverseGrid,
    pub dz: f64,
    pub nsteps: usize,
    /// Step-major values, `values[step * grid.len() + point]`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub realization: u64,
    pub model_hash: String,
}

impl ScreenStack {
    pub fn screen(&self, m: usize) -> &[f64] {
        let g = self.grid.len();
        &self.values[m * g..(m + 1) * g]
    }
}

/// Screens with transverse spectral density `Phi_eff / dz`: the phase
/// accumulated over one step, `S_m dz`, has covariance `dz C(x)`.
pub fn synthesize_screens(
    model: &SpectrumModel,
    grid: &TransverseGrid,
    nsteps: usize,
    dz: f64,
    seed: u64,
    realization: u64,
) -> Result<ScreenStack> {
    model.validate()?;
    if model.dim != grid.dim {
        return Err(Error::GridMismatch("model and grid dimensions differ".into()));
    }
    if model.is_builtin() && model.eta == 0.0 && model.amplitude > 0.0 {
        return Err(Error::Divergence {
            quantity: "int Phi_eff dq".into(),
            condition: "white-noise screens need eta > 0".into(),
        });
    }
    if !(dz > 0.0) {
        return Err(invalid("dz", "must be positive"));
    }
    let eff = transverse_spectrum(model);
    let g = grid.len();
    let cell = grid.dk().powi(grid.dim as i32);
    let weights: Vec<f64> = (0..g)
        .map(|idx| {
            let q = grid.wavevector(idx);
            eff.eval(&q[..grid.dim]) * cell / dz
        })
        .collect();
    let mut values = Vec::with_capacity(nsteps * g);
    let mut rng = rng::keyed(seed, "screens", realization);
    let mut data = vec![Complex64::new(0.0, 0.0); g];
    for m in 0..nsteps {
        data.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for u in 1..g {
            let mu = grid.mirror(u);
            if mu < u || weights[u] <= 0.0 {
                continue;
            }
            let (g1, g2) = rng::mode_normal_pair(&mut rng, (m * g + u) as u64);
            if mu == u {
                data[u] = Complex64::new(weights[u].sqrt() * g1, 0.0);
            } else {
                let s = (0.5 * weights[u]).sqrt();
                data[u] = Complex64::new(s * g1, s * g2);
                data[mu] = data[u].conj();
            }
        }
        inverse_transverse(grid, &mut data);
        values.extend(data.iter().map(|c| c.re));
    }
    if let Some(w) = resolution_warnings(model, grid).first() {
        log::warn!("{w}");
    }
    Ok(ScreenStack {
        grid: grid.clone(),
        dz,
        nsteps,
        values,
        seed,
        realization,
        model_hash: model.hash(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub lag: Vec<isize>,
    pub value: f64,
    pub std_err: f64,
}

fn jackknife_mean(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    // for the mean the delete-one jackknife reduces to the standard error
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Lagged covariance `E[V(t, x) V(t, x + lag dx)]` with the zero mean known
/// by construction. Standard errors come from a jackknife over realizations
/// (or over blocks of slices for a single realization).
pub fn empirical_covariance(
    realizations: &[&FieldRealization],
    lags: &[Vec<isize>],
) -> Result<Vec<CovarianceEstimate>> {
    let first = realizations
        .first()
        .ok_or_else(|| invalid("realizations", "need at least one realization"))?;
    let grid = &first.grid;
    let n = grid.n as isize;
    for lag in lags {
        if lag.len() != grid.dim {
            return Err(invalid("lag", "lag dimension differs from grid dimension"));
        }
        if lag.iter().any(|l| l.abs() > n / 2) {
            return Err(Error::OutOfRange(format!(
                "lag {lag:?} exceeds half the box ({} points)",
                n / 2
            )));
        }
    }
    let g = grid.len();
    let wrap = |i: isize| i.rem_euclid(n) as usize;
    let shifted = |idx: usize, lag: &[isize]| -> usize {
        let [i, j] = grid.unflatten(idx);
        if grid.dim == 1 {
            wrap(i as isize + lag[0])
        } else {
            wrap(i as isize + lag[0]) * grid.n + wrap(j as isize + lag[1])
        }
    };
    let blocks: Vec<(usize, usize, usize)> = if realizations.len() >= 2 {
        (0..realizations.len()).map(|r| (r, 0, realizations[r].nz)).collect()
    } else {
        let nz = first.nz;
        let nb = nz.min(16);
        (0..nb).map(|b| (0, b * nz / nb, (b + 1) * nz / nb)).collect()
    };
    let mut out = Vec::with_capacity(lags.len());
    for lag in lags {
        let samples: Vec<f64> = blocks
            .iter()
            .map(|&(r, s0, s1)| {
                let real = realizations[r];
                let mut acc = 0.0;
                for s in s0..s1 {
                    let sl = real.slice(s);
                    for idx in 0..g {
                        acc += sl[idx] * sl[shifted(idx, lag)];
                    }
                }
                acc / ((s1 - s0) * g) as f64
            })
            .collect();
        let (value, std_err) = jackknife_mean(&samples);
        out.push(CovarianceEstimate {
            lag: lag.clone(),
            value,
            std_err,
        });
    }
    Ok(out)
}

/// `E[(V(x + gamma y) - V(x))^2] = 2 int Phi_x(q) (1 - cos(gamma q.y)) dq`
/// with `Phi_x` the transverse marginal of the density.
pub fn increment_variance_quadrature(model: &SpectrumModel, gamma: f64, y: &[f64]) -> Result<f64> {
    let d = model.dim;
    if y.len() != d {
        return Err(invalid("y", "expected d components"));
    }
    let a = gamma * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = Tolerance::new(1e-14, 1e-10);
    let f = |k: f64| {
        let mut q = vec![0.0; d];
        q[0] = k;
        model.transverse_marginal(&q) * k.powi(d as i32 - 1)
    };
    let est = quad::one_minus_transform(f, |u| radial_kernel(d, u), a, model.structure_scale(), tol)?;
    Ok(2.0 * sphere_area(d) * est.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte Carlo estimate of the increment variance over transverse slices;
/// `gamma |y|` must be a whole number of grid cells along the first axis.
pub fn increment_variance_mc(
    model: &SpectrumModel,
    grid: &TransverseGrid,
    gamma: f64,
    y: f64,
    realizations: usize,
    seed: u64,
    exec: crate::par::Execution,
) -> Result<IncrementEstimate> {
    let cells = gamma * y / grid.dx;
    let lag = cells.round();
    if (cells - lag).abs() > 1e-9 * cells.abs().max(1.0) || lag == 0.0 {
        return Err(Error::Alignment(format!(
            "gamma * y = {} is not a whole number of cells of size {}",
            gamma * y,
            grid.dx
        )));
    }
    let lag = lag as isize;
    let n = grid.n as isize;
    let samples: Vec<Result<f64>> = crate::par::map(exec, realizations, |r| {
        let v = synthesize_slice(model, grid, seed, r as u64)?;
        let g = grid.len();
        let mut acc = 0.0;
        for idx in 0..g {
            let [i, j] = grid.unflatten(idx);
            let ii = (i as isize + lag).rem_euclid(n) as usize;
            let other = if grid.dim == 1 { ii } else { ii * grid.n + j };
            acc += (v[other] - v[idx]).powi(2);
        }
        Ok(acc / g as f64)
    });
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let (mean, std_err) = jackknife_mean(&samples);
    Ok(IncrementEstimate { mean, std_err })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
