//! Geometrical-optics characteristics: symplectic ray tracing through
//! resolved media and correlated-ray integration of the white-noise limit.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::background::BackgroundModel;
use crate::error::{invalid, Error, Result};
use crate::grid::TransverseGrid;
use crate::interp::cubic_periodic;
use crate::medium::FieldRealization;
use crate::moments::{PhaseSpaceFn, ProbeEstimate, WhiteNoiseModel};
use crate::par::{self, Execution};
use crate::rng;
use crate::spectra::DiffusionKernel;
use crate::wigner::PhaseAxes;

/// Rays stored flat: ray `i` has `positions[i*d..(i+1)*d]`, same for
/// `momenta`. For n-tuples, tuple `t` owns rays `t*n..(t+1)*n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayEnsemble {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub z: f64,
}

impl RayEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, momenta: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(invalid("dim", "rays live in one or two transverse dimensions"));
        }
        if positions.len() != momenta.len() || positions.len() != weights.len() * dim {
            return Err(invalid("positions", "inconsistent ray array lengths"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("weights", "weights must be nonnegative"));
        }
        Ok(Self {
            dim,
            positions,
            momenta,
            weights,
            seed: 0,
            z: 0.0,
        })
    }

    /// Independent Gaussian samples: `x ~ N(center, sx^2)`, `p ~ N(momentum, sp^2)`
    /// per axis, unit total weight.
    pub fn gaussian(dim: usize, count: usize, center: [f64; 2], sx: f64, momentum: [f64; 2], sp: f64, seed: u64) -> Result<Self> {
        let mut r = rng::keyed(seed, "rays-initial", 0);
        let mut positions = Vec::with_capacity(count * dim);
        let mut momenta = Vec::with_capacity(count * dim);
        for _ in 0..count {
            for a in 0..dim {
                let (u, v) = rng::normal_pair(&mut r);
                positions.push(center[a] + sx * u);
                momenta.push(momentum[a] + sp * v);
            }
        }
        let mut e = Self::new(dim, positions, momenta, vec![1.0 / count as f64; count])?;
        e.seed = seed;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted variance of momentum component `axis`.
    pub fn momentum_variance(&self, axis: usize) -> f64 {
        weighted_variance(&self.momenta, &self.weights, self.dim, axis)
    }

    pub fn position_variance(&self, axis: usize) -> f64 {
        weighted_variance(&self.positions, &self.weights, self.dim, axis)
    }
}

fn weighted_variance(v: &[f64], w: &[f64], d: usize, axis: usize) -> f64 {
    let tw: f64 = w.iter().sum();
    let mean = w.iter().enumerate().map(|(i, wi)| wi * v[i * d + axis]).sum::<f64>() / tw;
    w.iter()
        .enumerate()
        .map(|(i, wi)| wi * (v[i * d + axis] - mean).powi(2))
        .sum::<f64>()
        / tw
}

/// Force field `dp/dz` of the pre-limit model sampled from a realization.
struct MediumForce<'a> {
    realization: &'a FieldRealization,
    gradient: Vec<Vec<f64>>,
    background: &'a BackgroundModel,
    ktilde: f64,
}

impl MediumForce<'_> {
    fn eval(&self, z: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let r = self.realization;
        let (s, f) = r.locate(z)?;
        let grid = &r.grid;
        let g = grid.len();
        let mu = self.background.mu.value(z, x);
        let dmu = self.background.mu.gradient(z, x);
        let dv0 = self.background.v0.gradient(z, x);
        let lerp = |data: &[f64]| {
            let a = cubic_periodic(grid, &data[s * g..(s + 1) * g], x);
            let b = cubic_periodic(grid, &data[(s + 1) * g..(s + 2) * g], x);
            a + f * (b - a)
        };
        let v = if self.background.mu.is_z_independent() && dmu == [0.0, 0.0] {
            0.0
        } else {
            lerp(&r.values)
        };
        let inv_eps = 1.0 / r.epsilon;
        for a in 0..grid.dim {
            let dv = lerp(&self.gradient[a]);
            out[a] = self.ktilde * (inv_eps * (mu * dv + v * dmu[a]) + dv0[a]);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumTraceOptions {
    pub ktilde: f64,
    pub dz: f64,
    pub exec: Execution,
}

/// Kick-drift-kick integration of `dx/dz = p/k`,
/// `dp/dz = k [ (mu/eps) grad V + (V/eps) grad mu + grad V0 ]` up to `z_end`.
pub fn trace_rays_medium(
    ensemble: &RayEnsemble,
    realization: Option<&FieldRealization>,
    background: &BackgroundModel,
    z_end: f64,
    opts: MediumTraceOptions,
) -> Result<RayEnsemble> {
    let d = ensemble.dim;
    if !(opts.dz > 0.0) || !(opts.ktilde > 0.0) {
        return Err(invalid("dz", "step and ktilde must be positive"));
    }
    let span = z_end - ensemble.z;
    if span < 0.0 {
        return Err(invalid("z_end", "must not precede the ensemble position"));
    }
    let nsteps = (span / opts.dz).ceil().max(1.0) as usize;
    let dz = span / nsteps as f64;
    let force = match realization {
        Some(r) => {
            if r.grid.dim != d {
                return Err(Error::GridMismatch("realization and rays differ in dimension".into()));
            }
            let t_step = dz / (r.epsilon * r.epsilon);
            if t_step > r.dz_field {
                return Err(Error::StepSize(format!(
                    "ray step covers {t_step:.3e} in fast time but field slices are {:.3e} apart; need dz <= {:.3e}",
                    r.dz_field,
                    r.dz_field * r.epsilon * r.epsilon
                )));
            }
            if z_end > r.z_max() * (1.0 + 1e-12) {
                return Err(Error::OutOfRange(format!(
                    "rays reach z = {z_end} but the realization ends at z = {}",
                    r.z_max()
                )));
            }
            Some(MediumForce {
                realization: r,
                gradient: r.gradient(),
                background,
                ktilde: opts.ktilde,
            })
        }
        None => None,
    };
    let k = opts.ktilde;
    let z0 = ensemble.z;
    let kick = |z: f64, x: &[f64], out: &mut [f64]| -> Result<()> {
        match &force {
            Some(f) => f.eval(z, x, out),
            None => {
                let g = background.v0.gradient(z, x);
                for a in 0..d {
                    out[a] = k * g[a];
                }
                Ok(())
            }
        }
    };
    let results = par::map(opts.exec, ensemble.len(), |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = ensemble.positions[i * d..(i + 1) * d].to_vec();
        let mut p = ensemble.momenta[i * d..(i + 1) * d].to_vec();
        let mut fz = [0.0; 2];
        kick(z0, &x, &mut fz)?;
        for m in 0..nsteps {
            for a in 0..d {
                p[a] += 0.5 * dz * fz[a];
                x[a] += dz * p[a] / k;
            }
            let z = z0 + (m + 1) as f64 * dz;
            kick(z.min(z_end), &x, &mut fz)?;
            for a in 0..d {
                p[a] += 0.5 * dz * fz[a];
            }
        }
        Ok((x, p))
    });
    collect_rays(ensemble, results, z_end)
}

fn collect_rays(ensemble: &RayEnsemble, results: Vec<Result<(Vec<f64>, Vec<f64>)>>, z: f64) -> Result<RayEnsemble> {
    let mut positions = Vec::with_capacity(ensemble.positions.len());
    let mut momenta = Vec::with_capacity(ensemble.momenta.len());
    for r in results {
        let (x, p) = r?;
        positions.extend(x);
        momenta.extend(p);
    }
    Ok(RayEnsemble {
        dim: ensemble.dim,
        positions,
        momenta,
        weights: ensemble.weights.clone(),
        seed: ensemble.seed,
        z,
    })
}

/// Symmetric square root factor `L` with `L L^T = cov` (row-major, size m).
fn covariance_factor(cov: &[f64], m: usize) -> Result<Vec<f64>> {
    match m {
        1 => {
            if cov[0] < -1e-10 * cov[0].abs().max(1e-300) {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: cov[0] });
            }
            Ok(vec![cov[0].max(0.0).sqrt()])
        }
        _ => {
            let mat = DMatrix::from_row_slice(m, m, cov);
            let eig = SymmetricEigen::new(mat);
            let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
            if min < -1e-10 * scale.max(1e-300) {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
            }
            let mut out = vec![0.0; m * m];
            for c in 0..m {
                let s = eig.eigenvalues[c].max(0.0).sqrt();
                for r in 0..m {
                    out[r * m + c] = eig.eigenvectors[(r, c)] * s;
                }
            }
            Ok(out)
        }
    }
}

/// Per-step kick generator for one tuple: covariance
/// `k^2 dz mu(x_j) mu(x_k) D(x_j - x_k)` in `(j, axis)` blocks.
struct KickModel<'a> {
    kernel: DiffusionKernel,
    model: &'a WhiteNoiseModel,
    dim: usize,
}

impl KickModel<'_> {
    fn factor(&self, z: f64, x: &[f64], n: usize, dz: f64) -> Result<Vec<f64>> {
        let d = self.dim;
        let m = n * d;
        let k = self.model.ktilde;
        let mut cov = vec![0.0; m * m];
        let mut block = vec![0.0; d * d];
        let mut sep = [0.0; 2];
        let bg = &self.model.background;
        let mu: Vec<f64> = (0..n).map(|j| bg.mu.value(z, &x[j * d..(j + 1) * d])).collect();
        for j in 0..n {
            for l in 0..n {
                for a in 0..d {
                    sep[a] = x[j * d + a] - x[l * d + a];
                }
                self.kernel.eval_into(&sep[..d], &mut block);
                let s = k * k * dz * mu[j] * mu[l];
                for a in 0..d {
                    for b in 0..d {
                        cov[(j * d + a) * m + l * d + b] = s * block[a * d + b];
                    }
                }
            }
        }
        covariance_factor(&cov, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeOptions {
    pub tuple_size: usize,
    pub dz: f64,
    pub seed: u64,
    pub exec: Execution,
}

fn kick_model(model: &WhiteNoiseModel) -> Result<KickModel<'_>> {
    Ok(KickModel {
        kernel: DiffusionKernel::build(&model.spectrum, 1e-7, 2048)?,
        model,
        dim: model.spectrum.dim,
    })
}

/// Drift-kick-drift integration of the white-noise Liouville SDE for
/// tuples of `tuple_size` rays with jointly Gaussian momentum kicks.
pub fn trace_rays_sde(ensemble: &RayEnsemble, model: &WhiteNoiseModel, z_end: f64, opts: SdeOptions) -> Result<RayEnsemble> {
    let d = ensemble.dim;
    let n = opts.tuple_size;
    if n == 0 || ensemble.len() % n != 0 {
        return Err(invalid("tuple_size", "ensemble length must be a multiple of the tuple size"));
    }
    if n * d > 16 {
        return Err(invalid("tuple_size", "n d must not exceed 16"));
    }
    if model.spectrum.dim != d {
        return Err(Error::GridMismatch("spectrum and rays differ in dimension".into()));
    }
    if !matches!(model.regime, crate::moments::Regime::Liouville) {
        return Err(Error::Regime("trace_rays_sde needs the Liouville regime".into()));
    }
    let span = z_end - ensemble.z;
    if !(opts.dz > 0.0) || span < 0.0 {
        return Err(invalid("dz", "step must be positive and z_end after the ensemble"));
    }
    let nsteps = (span / opts.dz).ceil().max(1.0) as usize;
    let dz = span / nsteps as f64;
    let kicks = kick_model(model)?;
    let k = model.ktilde;
    let z0 = ensemble.z;
    let ntuples = ensemble.len() / n;
    let results = par::map(opts.exec, ntuples, |t| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut r = rng::keyed(opts.seed, "sde", t as u64);
        let mut x = ensemble.positions[t * n * d..(t + 1) * n * d].to_vec();
        let mut p = ensemble.momenta[t * n * d..(t + 1) * n * d].to_vec();
        let mut xi = vec![0.0; n * d];
        for m in 0..nsteps {
            let zm = z0 + (m as f64 + 0.5) * dz;
            for (xa, pa) in x.iter_mut().zip(&p) {
                *xa += 0.5 * dz * pa / k;
            }
            let l = kicks.factor(zm, &x, n, dz)?;
            fill_normals(&mut r, &mut xi);
            let mm = n * d;
            for row in 0..mm {
                let mut s = 0.0;
                for c in 0..mm {
                    s += l[row * mm + c] * xi[c];
                }
                p[row] += s;
            }
            for j in 0..n {
                let g = model.background.v0.gradient(zm, &x[j * d..(j + 1) * d]);
                for a in 0..d {
                    p[j * d + a] += k * g[a] * dz;
                }
            }
            for (xa, pa) in x.iter_mut().zip(&p) {
                *xa += 0.5 * dz * pa / k;
            }
        }
        Ok((x, p))
    });
    let mut out = collect_rays(ensemble, results, z_end)?;
    out.seed = opts.seed;
    Ok(out)
}

fn fill_normals(r: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]) {
    let mut i = 0;
    while i < out.len() {
        let (a, b) = rng::normal_pair(r);
        out[i] = a;
        if i + 1 < out.len() {
            out[i + 1] = b;
        }
        i += 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardOptions {
    pub samples: usize,
    pub dz: f64,
    pub seed: u64,
    pub exec: Execution,
}

/// `E[prod_j W0_j(X_j(z), P_j(z))]` for backward characteristics started at
/// each probe: `dX = -P/k dz`, correlated kicks as in [`trace_rays_sde`].
pub fn backward_moments(
    initial: &[&dyn PhaseSpaceFn],
    model: &WhiteNoiseModel,
    z: f64,
    probes: &[Vec<f64>],
    opts: BackwardOptions,
) -> Result<Vec<ProbeEstimate>> {
    let n = initial.len();
    if opts.samples < 2 {
        return Err(invalid("samples", "need at least two samples for an error bar"));
    }
    if !(opts.dz > 0.0) || !(z >= 0.0) {
        return Err(invalid("dz", "step must be positive and z nonnegative"));
    }
    let nsteps = (z / opts.dz).ceil().max(1.0) as usize;
    let dz = z / nsteps as f64;
    let kicks = kick_model(model)?;
    let k = model.ktilde;
    let mut out = Vec::with_capacity(probes.len());
    for (pi, probe) in probes.iter().enumerate() {
        let tag = format!("backward-{pi}");
        let values = par::map(opts.exec, opts.samples, |s| -> Result<f64> {
            let mut r = rng::keyed(opts.seed, &tag, s as u64);
            let mut x: Vec<f64> = (0..n).map(|j| probe[2 * j]).collect();
            let mut p: Vec<f64> = (0..n).map(|j| probe[2 * j + 1]).collect();
            let mut xi = vec![0.0; n];
            for m in 0..nsteps {
                let zm = z - (m as f64 + 0.5) * dz;
                for (xa, pa) in x.iter_mut().zip(&p) {
                    *xa -= 0.5 * dz * pa / k;
                }
                let l = kicks.factor(zm, &x, n, dz)?;
                fill_normals(&mut r, &mut xi);
                for row in 0..n {
                    let mut acc = 0.0;
                    for c in 0..n {
                        acc += l[row * n + c] * xi[c];
                    }
                    p[row] += acc;
                }
                for (xa, pa) in x.iter_mut().zip(&p) {
                    *xa -= 0.5 * dz * pa / k;
                }
            }
            Ok((0..n).map(|j| initial[j].value(x[j], p[j])).product())
        });
        let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        out.push(ProbeEstimate {
            point: probe.clone(),
            value: mean,
            std_err: (var / m).sqrt(),
        });
    }
    Ok(out)
}

/// Histogram density estimate on phase-space axes with delete-a-group
/// jackknife errors (rays assigned to groups by index). Rays outside the
/// momentum window are dropped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub axes: PhaseAxes,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub missing_weight: f64,
}

pub fn estimate_phase_space_density(ensemble: &RayEnsemble, axes: &PhaseAxes, groups: usize) -> Result<DensityEstimate> {
    if ensemble.dim != 1 {
        return Err(Error::Unsupported("density estimation is implemented for d = 1".into()));
    }
    let groups = groups.max(2);
    let (nx, np) = (axes.nx(), axes.np);
    let grid: &TransverseGrid = &axes.x;
    let mut per_group = vec![vec![0.0; nx * np]; groups];
    let mut missing = 0.0;
    let total = ensemble.total_weight();
    for i in 0..ensemble.len() {
        let w = ensemble.weights[i];
        let x = ensemble.positions[i];
        let p = ensemble.momenta[i];
        let j = ((x / grid.dx + (nx / 2) as f64 + 0.5).floor() as i64).rem_euclid(nx as i64) as usize;
        let kf = (p / axes.dp + (np / 2) as f64 + 0.5).floor();
        if kf < 0.0 || kf >= np as f64 {
            missing += w;
            continue;
        }
        per_group[i % groups][j * np + kf as usize] += w;
    }
    let cell = axes.cell_area();
    let full: Vec<f64> = (0..nx * np)
        .map(|c| per_group.iter().map(|g| g[c]).sum::<f64>())
        .collect();
    let gweights: Vec<f64> = (0..groups)
        .map(|g| (g..ensemble.len()).step_by(groups).map(|i| ensemble.weights[i]).sum::<f64>())
        .collect();
    let mut values = vec![0.0; nx * np];
    let mut std_err = vec![0.0; nx * np];
    let gm = groups as f64;
    for c in 0..nx * np {
        values[c] = full[c] / (total * cell);
        let reps: Vec<f64> = (0..groups)
            .map(|g| (full[c] - per_group[g][c]) / ((total - gweights[g]) * cell))
            .collect();
        let mean = reps.iter().sum::<f64>() / gm;
        std_err[c] = ((gm - 1.0) / gm * reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>()).sqrt();
    }
    Ok(DensityEstimate {
        axes: axes.clone(),
        values,
        std_err,
        missing_weight: missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::Profile;

    #[test]
    fn free_rays_are_straight() {
        let e = RayEnsemble::gaussian(1, 50, [0.0; 2], 1.0, [0.0; 2], 0.5, 3).unwrap();
        let opts = MediumTraceOptions {
            ktilde: 2.0,
            dz: 0.1,
            exec: Execution::Sequential,
        };
        let out = trace_rays_medium(&e, None, &BackgroundModel::default(), 1.5, opts).unwrap();
        for i in 0..e.len() {
            let exact = e.positions[i] + 1.5 * e.momenta[i] / 2.0;
            assert!((out.positions[i] - exact).abs() < 1e-13);
            assert_eq!(out.momenta[i], e.momenta[i]);
        }
    }

    #[test]
    fn harmonic_background_follows_oscillator() {
        // V0 = -w^2 x^2 / 2 with k = 1: x'' = -w^2 x
        let w = 1.3;
        let bg = BackgroundModel {
            mu: Profile::constant(1.0),
            v0: Profile::Quadratic {
                curvature: -w * w,
                center: [0.0; 2],
            },
        };
        let e = RayEnsemble::new(1, vec![0.7], vec![0.2], vec![1.0]).unwrap();
        let period = 2.0 * std::f64::consts::PI / w;
        let opts = MediumTraceOptions {
            ktilde: 1.0,
            dz: period / 40000.0,
            exec: Execution::Sequential,
        };
        let out = trace_rays_medium(&e, None, &bg, period, opts).unwrap();
        assert!((out.positions[0] - 0.7).abs() < 1e-8, "{}", out.positions[0]);
        assert!((out.momenta[0] - 0.2).abs() < 1e-8, "{}", out.momenta[0]);
    }

    #[test]
    fn factor_rejects_indefinite_covariance() {
        let e = covariance_factor(&[1.0, 2.0, 2.0, 1.0], 2).unwrap_err();
        assert!(matches!(e, Error::NotPositiveSemidefinite { .. }));
        let l = covariance_factor(&[2.0, 0.5, 0.5, 1.0], 2).unwrap();
        let llt = |r: usize, c: usize| l[r * 2] * l[c * 2] + l[r * 2 + 1] * l[c * 2 + 1];
        assert!((llt(0, 1) - 0.5).abs() < 1e-14 && (llt(0, 0) - 2.0).abs() < 1e-14);
    }
}
