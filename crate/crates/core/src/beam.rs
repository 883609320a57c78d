//! Split-step propagation of the complex modulation `Psi` through resolved
//! media and through white-noise phase screens.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::background::BackgroundModel;
use crate::error::{invalid, Error, Result};
use crate::fft::GridFft;
use crate::grid::TransverseGrid;
use crate::medium::{FieldRealization, ScreenStack};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBeam {
    pub grid: TransverseGrid,
    pub values: Vec<Complex64>,
    pub z: f64,
    pub gamma: f64,
    pub ktilde: f64,
}

/// Gaussian beam `(pi w^2)^{-d/4} exp(-|x-c|^2/(2w^2) + i p0.(x-c)/gamma + i a |x-c|^2/gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    pub center: [f64; 2],
    pub width: f64,
    pub momentum: [f64; 2],
    pub chirp: f64,
}

impl GaussianBeam {
    pub fn centered(width: f64) -> Self {
        Self {
            center: [0.0; 2],
            width,
            momentum: [0.0; 2],
            chirp: 0.0,
        }
    }

    pub fn eval(&self, dim: usize, gamma: f64, x: &[f64]) -> Complex64 {
        let mut r2 = 0.0;
        let mut lin = 0.0;
        for a in 0..dim {
            let dx = x[a] - self.center[a];
            r2 += dx * dx;
            lin += self.momentum[a] * dx;
        }
        let norm = (PI * self.width * self.width).powf(-(dim as f64) / 4.0);
        let phase = (lin + self.chirp * r2) / gamma;
        Complex64::from_polar(norm * (-r2 / (2.0 * self.width * self.width)).exp(), phase)
    }
}

impl ComplexBeam {
    pub fn new(grid: &TransverseGrid, values: Vec<Complex64>, gamma: f64, ktilde: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if !(gamma > 0.0) || !(ktilde > 0.0) {
            return Err(invalid("gamma", "gamma and ktilde must be positive"));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            z: 0.0,
            gamma,
            ktilde,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: &TransverseGrid, gamma: f64, ktilde: f64, f: F) -> Result<Self> {
        let values = (0..grid.len())
            .map(|idx| {
                let p = grid.position(idx);
                f(&p[..grid.dim])
            })
            .collect();
        Self::new(grid, values, gamma, ktilde)
    }

    pub fn gaussian(grid: &TransverseGrid, gamma: f64, ktilde: f64, spec: GaussianBeam) -> Result<Self> {
        Self::from_fn(grid, gamma, ktilde, |x| spec.eval(grid.dim, gamma, x))
    }

    pub fn plane_wave(grid: &TransverseGrid, gamma: f64, ktilde: f64, amplitude: f64) -> Result<Self> {
        Self::new(grid, vec![Complex64::new(amplitude, 0.0); grid.len()], gamma, ktilde)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Spectral gradient; `out[axis][point]`.
    pub fn gradient(&self) -> Vec<Vec<Complex64>> {
        let fft = GridFft::new(&self.grid);
        let mut hat = self.values.clone();
        fft.forward(&mut hat);
        (0..self.grid.dim)
            .map(|axis| {
                let mut d: Vec<Complex64> = hat
                    .iter()
                    .enumerate()
                    .map(|(idx, h)| h * Complex64::new(0.0, self.grid.wavevector(idx)[axis]))
                    .collect();
                fft.inverse(&mut d);
                d
            })
            .collect()
    }
}

/// Discrete L2 norm with the cell-volume weight.
pub fn l2_norm(beam: &ComplexBeam) -> f64 {
    beam.norm_sq().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// Disable the diffraction substep (test mode for the commuting case).
    pub diffraction: bool,
    /// Enforce the step-size resolution rules.
    pub check_steps: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            diffraction: true,
            check_steps: true,
        }
    }
}

fn diffraction_multiplier(grid: &TransverseGrid, gamma: f64, ktilde: f64, dz: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|idx| Complex64::from_polar(1.0, -gamma * grid.wavenumber_sq(idx) * dz / (2.0 * ktilde)))
        .collect()
}

fn check_diffraction(grid: &TransverseGrid, gamma: f64, ktilde: f64, dz: f64) -> Result<()> {
    let q2 = grid.dim as f64 * grid.nyquist().powi(2);
    let phase = gamma * q2 * dz / (2.0 * ktilde);
    if phase >= PI / 4.0 {
        return Err(Error::StepSize(format!(
            "diffraction phase gamma |q|^2 dz / (2 k) = {phase:.4} at Nyquist exceeds pi/4; need dz < {:.3e}",
            PI / 4.0 * 2.0 * ktilde / (gamma * q2)
        )));
    }
    Ok(())
}

struct Stepper {
    fft: GridFft,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    diffraction: bool,
}

impl Stepper {
    fn new(grid: &TransverseGrid, gamma: f64, ktilde: f64, dz: f64, diffraction: bool) -> Self {
        Self {
            fft: GridFft::new(grid),
            full: diffraction_multiplier(grid, gamma, ktilde, dz),
            half: diffraction_multiplier(grid, gamma, ktilde, 0.5 * dz),
            diffraction,
        }
    }

    fn diffract(&self, psi: &mut [Complex64], half: bool) {
        if !self.diffraction {
            return;
        }
        self.fft.forward(psi);
        let m = if half { &self.half } else { &self.full };
        for (p, w) in psi.iter_mut().zip(m) {
            *p *= w;
        }
        self.fft.inverse(psi);
    }

    /// Strang steps with merged inner half-steps: the potential phase of
    /// step `m` is produced by `phase(m, buffer)`.
    fn run<P>(&self, psi: &mut [Complex64], nsteps: usize, z0: f64, dz: f64, mut phase: P) -> Result<()>
    where
        P: FnMut(usize, &mut [f64]) -> Result<()>,
    {
        let mut angle = vec![0.0; psi.len()];
        for m in 0..nsteps {
            self.diffract(psi, m == 0);
            phase(m, &mut angle)?;
            for (p, &a) in psi.iter_mut().zip(&angle) {
                *p *= Complex64::from_polar(1.0, a);
            }
            if m + 1 == nsteps {
                self.diffract(psi, true);
            }
            let total: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
            if !total.is_finite() {
                return Err(Error::NonFinite {
                    step: m,
                    z: z0 + (m + 1) as f64 * dz,
                });
            }
        }
        Ok(())
    }
}

/// Strang split-step solution of
/// `d_z Psi = (i gamma / 2k) Lap Psi + i (k / gamma) [V0 + (mu/eps) V(z/eps^2, x)] Psi`.
pub fn split_step_propagate(
    beam: &ComplexBeam,
    realization: Option<&FieldRealization>,
    background: &BackgroundModel,
    dz: f64,
    nsteps: usize,
) -> Result<ComplexBeam> {
    split_step_propagate_with(beam, realization, background, dz, nsteps, PropagationOptions::default())
}

pub fn split_step_propagate_with(
    beam: &ComplexBeam,
    realization: Option<&FieldRealization>,
    background: &BackgroundModel,
    dz: f64,
    nsteps: usize,
    options: PropagationOptions,
) -> Result<ComplexBeam> {
    if !(dz > 0.0) {
        return Err(invalid("dz", "must be positive"));
    }
    let grid = &beam.grid;
    let (gamma, k) = (beam.gamma, beam.ktilde);
    if let Some(r) = realization {
        if r.grid != *grid {
            return Err(Error::GridMismatch("realization and beam grids differ".into()));
        }
        let z_end = beam.z + nsteps as f64 * dz;
        if z_end > r.z_max() * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "propagation to z = {z_end} needs the realization up to t = {} but it ends at t = {}",
                z_end / (r.epsilon * r.epsilon),
                (r.nz - 1) as f64 * r.dz_field
            )));
        }
    }
    if options.check_steps {
        if options.diffraction {
            check_diffraction(grid, gamma, k, dz)?;
        }
        if let Some(r) = realization {
            let phase = k * background.mu.bound(grid) * r.max_abs() * dz / (gamma * r.epsilon);
            if phase >= PI / 4.0 {
                return Err(Error::StepSize(format!(
                    "potential phase k mu_max V_max dz / (gamma eps) = {phase:.4} exceeds pi/4"
                )));
            }
        }
    }
    let stepper = Stepper::new(grid, gamma, k, dz, options.diffraction);
    let mut psi = beam.values.clone();
    let g = grid.len();
    let static_v0 = background.v0.is_z_independent().then(|| background.v0.sample(grid, 0.0));
    let static_mu = background.mu.is_z_independent().then(|| background.mu.sample(grid, 0.0));
    let mut field = vec![0.0; g];
    let coupling = k / gamma * dz;
    let z0 = beam.z;
    stepper.run(&mut psi, nsteps, z0, dz, |m, angle| {
        let zm = z0 + (m as f64 + 0.5) * dz;
        let v0 = match &static_v0 {
            Some(v) => std::borrow::Cow::Borrowed(v),
            None => std::borrow::Cow::Owned(background.v0.sample(grid, zm)),
        };
        for (a, v) in angle.iter_mut().zip(v0.iter()) {
            *a = *v;
        }
        if let Some(r) = realization {
            r.slice_scaled(zm, &mut field)?;
            let inv_eps = 1.0 / r.epsilon;
            match &static_mu {
                Some(mu) => {
                    for ((a, f), w) in angle.iter_mut().zip(&field).zip(mu) {
                        *a += w * inv_eps * f;
                    }
                }
                None => {
                    let mu = background.mu.sample(grid, zm);
                    for ((a, f), w) in angle.iter_mut().zip(&field).zip(&mu) {
                        *a += w * inv_eps * f;
                    }
                }
            }
        }
        for a in angle.iter_mut() {
            *a *= coupling;
        }
        Ok(())
    })?;
    Ok(ComplexBeam {
        grid: grid.clone(),
        values: psi,
        z: z0 + nsteps as f64 * dz,
        gamma,
        ktilde: k,
    })
}

/// Propagation through white-noise screens: per step the phase
/// `exp(i (k / gamma) S_m dz)` between diffraction half-steps.
pub fn white_noise_propagate(beam: &ComplexBeam, screens: &ScreenStack) -> Result<ComplexBeam> {
    white_noise_propagate_with(beam, screens, PropagationOptions::default())
}

pub fn white_noise_propagate_with(
    beam: &ComplexBeam,
    screens: &ScreenStack,
    options: PropagationOptions,
) -> Result<ComplexBeam> {
    let grid = &beam.grid;
    if screens.grid != *grid {
        return Err(Error::GridMismatch(format!(
            "screens on {} x {} grid with dx {} vs beam grid {} x {} with dx {}",
            screens.grid.n, screens.grid.dim, screens.grid.dx, grid.n, grid.dim, grid.dx
        )));
    }
    let (gamma, k, dz) = (beam.gamma, beam.ktilde, screens.dz);
    if options.check_steps && options.diffraction {
        check_diffraction(grid, gamma, k, dz)?;
    }
    let stepper = Stepper::new(grid, gamma, k, dz, options.diffraction);
    let mut psi = beam.values.clone();
    let coupling = k / gamma * dz;
    stepper.run(&mut psi, screens.nsteps, beam.z, dz, |m, angle| {
        for (a, s) in angle.iter_mut().zip(screens.screen(m)) {
            *a = coupling * s;
        }
        Ok(())
    })?;
    Ok(ComplexBeam {
        grid: grid.clone(),
        values: psi,
        z: beam.z + screens.nsteps as f64 * dz,
        gamma,
        ktilde: k,
    })
}
