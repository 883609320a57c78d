//! Discrete Wigner transform on a one-dimensional transverse grid, phase-space
//! diagnostics and smeared initial data for the limit models.
//!
//! Convention: `W(x,p) = (2 pi)^-1 int e^{-i p y} Psi(x + gamma y/2) conj(Psi)(x - gamma y/2) dy`,
//! so a phase `p0 x / gamma` puts the mass at momentum `p0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::beam::ComplexBeam;
use crate::error::{invalid, Error, Result};
use crate::fft::LineFft;
use crate::grid::TransverseGrid;
use crate::par::{self, Execution};

/// Axes of a one-dimensional phase-space grid: periodic `x`, centered `p_k = (k - np/2) dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAxes {
    pub x: TransverseGrid,
    pub np: usize,
    pub dp: f64,
}

impl PhaseAxes {
    pub fn new(x: TransverseGrid, np: usize, dp: f64) -> Result<Self> {
        if x.dim != 1 {
            return Err(Error::Unsupported(
                "phase-space grids are implemented for one transverse dimension".into(),
            ));
        }
        if np < 4 || np % 2 != 0 {
            return Err(invalid("np", "momentum grid size must be even and at least 4"));
        }
        if !(dp > 0.0) {
            return Err(invalid("dp", "momentum spacing must be positive"));
        }
        Ok(Self { x, np, dp })
    }

    /// Axes produced by the transform of a beam on `x` with stride `stride`.
    pub fn for_transform(x: &TransverseGrid, gamma: f64, stride: usize) -> Result<Self> {
        Self::new(x.clone(), x.n, PI * gamma / (x.n as f64 * stride as f64 * x.dx))
    }

    pub fn nx(&self) -> usize {
        self.x.n
    }

    pub fn len(&self) -> usize {
        self.x.n * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p(&self, k: usize) -> f64 {
        (k as f64 - (self.np / 2) as f64) * self.dp
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.np).map(|k| self.p(k)).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.x.coords()
    }

    pub fn cell_area(&self) -> f64 {
        self.x.dx * self.dp
    }

    pub fn p_max(&self) -> f64 {
        (self.np / 2) as f64 * self.dp
    }
}

/// Real phase-space density `values[j * np + k] = W(x_j, p_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub axes: PhaseAxes,
    pub values: Vec<f64>,
    pub gamma: f64,
    pub z: f64,
}

impl WignerGrid {
    pub fn zeros(axes: &PhaseAxes, gamma: f64, z: f64) -> Self {
        Self {
            values: vec![0.0; axes.len()],
            axes: axes.clone(),
            gamma,
            z,
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(axes: &PhaseAxes, gamma: f64, z: f64, f: F) -> Self {
        let xs = axes.xs();
        let ps = axes.ps();
        let mut values = Vec::with_capacity(axes.len());
        for &x in &xs {
            for &p in &ps {
                values.push(f(x, p));
            }
        }
        Self {
            axes: axes.clone(),
            values,
            gamma,
            z,
        }
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.axes.np + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.axes.np..(j + 1) * self.axes.np]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.axes.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.axes.cell_area()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_axes(&self, other: &WignerGrid) -> bool {
        self.axes == other.axes
    }

    /// `||self - other||_2 / ||other||_2`.
    pub fn relative_l2_distance(&self, other: &WignerGrid) -> Result<f64> {
        if !self.same_axes(other) {
            return Err(Error::GridMismatch("phase-space axes differ".into()));
        }
        let num: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = other.values.iter().map(|b| b * b).sum();
        Ok((num / den).sqrt())
    }

    /// Cubic interpolation: periodic in `x`, zero outside the momentum window.
    pub fn interpolate(&self, x: f64, p: f64) -> f64 {
        let np = self.axes.np;
        let sp = p / self.axes.dp + (np / 2) as f64;
        let kp = sp.floor();
        let fp = sp - kp;
        let kp = kp as i64;
        let wp = keys(fp);
        let nx = self.axes.nx();
        let sx = x / self.axes.x.dx + (nx / 2) as f64;
        let jx = sx.floor();
        let wx = keys(sx - jx);
        let jx = jx as i64;
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let j = (jx - 1 + a as i64).rem_euclid(nx as i64) as usize;
            let row = self.row(j);
            let mut inner = 0.0;
            for (b, wb) in wp.iter().enumerate() {
                let k = kp - 1 + b as i64;
                if k >= 0 && (k as usize) < np {
                    inner += wb * row[k as usize];
                }
            }
            acc += wa * inner;
        }
        acc
    }
}

fn keys(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        -0.5 * f3 + f2 - 0.5 * f,
        1.5 * f3 - 2.5 * f2 + 1.0,
        -1.5 * f3 + 2.0 * f2 + 0.5 * f,
        0.5 * f3 - 0.5 * f2,
    ]
}

/// Sampling of the `y` integral: half-offsets `gamma y_m / 2 = m * stride * dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerSampling {
    pub stride: usize,
    pub exec: Execution,
}

impl Default for WignerSampling {
    fn default() -> Self {
        Self {
            stride: 1,
            exec: Execution::default(),
        }
    }
}

/// Stride that realizes momentum spacing `dp` for a beam on `grid` with
/// the given `gamma`; errors list the admissible `gamma` values.
pub fn stride_for_spacing(grid: &TransverseGrid, gamma: f64, dp: f64) -> Result<usize> {
    let s = PI * gamma / (grid.n as f64 * grid.dx * dp);
    let r = s.round();
    if r >= 1.0 && (s - r).abs() <= 1e-9 * r {
        return Ok(r as usize);
    }
    let unit = grid.n as f64 * grid.dx * dp / PI;
    Err(Error::Alignment(format!(
        "gamma = {gamma} does not align momentum spacing {dp} with the grid (n = {}, dx = {}); admissible gamma = s * {unit:.12} for integer s >= 1",
        grid.n, grid.dx
    )))
}

pub fn wigner_transform(beam: &ComplexBeam) -> Result<WignerGrid> {
    wigner_transform_with(beam, WignerSampling::default())
}

/// Wigner transform onto the momentum grid with spacing `dp`.
pub fn wigner_transform_at(beam: &ComplexBeam, dp: f64, exec: Execution) -> Result<WignerGrid> {
    let stride = stride_for_spacing(&beam.grid, beam.gamma, dp)?;
    wigner_transform_with(beam, WignerSampling { stride, exec })
}

pub fn wigner_transform_with(beam: &ComplexBeam, sampling: WignerSampling) -> Result<WignerGrid> {
    let grid = &beam.grid;
    let s = sampling.stride;
    if s == 0 || grid.n / (4 * s) < 2 {
        return Err(invalid("stride", "needs 1 <= stride <= n/8"));
    }
    let axes = PhaseAxes::for_transform(grid, beam.gamma, s)?;
    let n = grid.n;
    let half = n / (4 * s) - 1;
    let dy = 2.0 * s as f64 * grid.dx / beam.gamma;
    let scale = dy / (2.0 * PI);
    let fft = LineFft::new(n);
    let psi = &beam.values;
    let rows = par::map(sampling.exec, n, |j| {
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let at = |off: i64| psi[(j as i64 + off).rem_euclid(n as i64) as usize];
        line[0] = Complex64::new(psi[j].norm_sqr(), 0.0);
        for m in 1..=half {
            let off = (m * s) as i64;
            let c = at(off) * at(-off).conj();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            line[m] = c * sign;
            line[n - m] = c.conj() * sign;
        }
        fft.forward(&mut line);
        line.iter().map(|v| v.re * scale).collect::<Vec<f64>>()
    });
    let values = rows.concat();
    Ok(WignerGrid {
        axes,
        values,
        gamma: beam.gamma,
        z: beam.z,
    })
}

/// `(int W dp, int p W dp, int p^2 W dp)` on the x-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub mass_density: Vec<f64>,
    pub flux_density: Vec<f64>,
    pub second_moment: Vec<f64>,
}

pub fn marginals_and_flux(w: &WignerGrid) -> Marginals {
    let ps = w.axes.ps();
    let dp = w.axes.dp;
    let nx = w.axes.nx();
    let mut out = Marginals {
        mass_density: Vec::with_capacity(nx),
        flux_density: Vec::with_capacity(nx),
        second_moment: Vec::with_capacity(nx),
    };
    for j in 0..nx {
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (v, p) in w.row(j).iter().zip(&ps) {
            m0 += v;
            m1 += v * p;
            m2 += v * p * p;
        }
        out.mass_density.push(m0 * dp);
        out.flux_density.push(m1 * dp);
        out.second_moment.push(m2 * dp);
    }
    out
}

/// `int W dx` on the momentum grid.
pub fn momentum_marginal(w: &WignerGrid) -> Vec<f64> {
    let np = w.axes.np;
    let mut out = vec![0.0; np];
    for j in 0..w.axes.nx() {
        for (o, v) in out.iter_mut().zip(w.row(j)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o *= w.axes.x.dx);
    out
}

/// Bound on `sup |W|` implied by Cauchy-Schwarz: `stride ||Psi||^2 / (pi gamma)`.
pub fn sup_bound(beam: &ComplexBeam, stride: usize) -> f64 {
    stride as f64 * beam.norm_sq() / (PI * beam.gamma)
}

/// Weighted average of pure-state transforms.
pub fn mixed_state_wigner(states: &[(f64, ComplexBeam)], sampling: WignerSampling) -> Result<WignerGrid> {
    let Some((_, first)) = states.first() else {
        return Err(invalid("states", "ensemble is empty"));
    };
    let mut total = 0.0;
    for (w, b) in states {
        if !(*w >= 0.0) {
            return Err(invalid("weights", "weights must be nonnegative"));
        }
        if b.grid != first.grid || b.gamma != first.gamma {
            return Err(Error::GridMismatch("ensemble members use different grids or gamma".into()));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid("weights", "weights must sum to 1"));
    }
    let mut acc: Option<WignerGrid> = None;
    for (w, b) in states {
        let wb = wigner_transform_with(b, sampling)?;
        match acc.as_mut() {
            None => {
                let mut first = wb;
                first.values.iter_mut().for_each(|v| *v *= w);
                acc = Some(first);
            }
            Some(a) => {
                for (x, y) in a.values.iter_mut().zip(&wb.values) {
                    *x += w * y;
                }
            }
        }
    }
    Ok(acc.expect("non-empty ensemble"))
}

/// Smeared WKB density `|A0(x)|^2 G(p - S'(x))`, with `G` a Gaussian of
/// standard deviation `width` normalized on the discrete momentum grid.
pub fn wkb_target<A, S>(
    axes: &PhaseAxes,
    gamma: f64,
    amplitude: A,
    phase_gradient: S,
    width: f64,
) -> Result<WignerGrid>
where
    A: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    if !(width > 0.0) {
        return Err(invalid("width", "smoothing width must be positive"));
    }
    let ps = axes.ps();
    let mut w = WignerGrid::zeros(axes, gamma, 0.0);
    for (j, x) in axes.xs().into_iter().enumerate() {
        let a2 = amplitude(x).powi(2);
        let center = phase_gradient(x);
        let row = &mut w.values[j * axes.np..(j + 1) * axes.np];
        let mut norm = 0.0;
        for (r, p) in row.iter_mut().zip(&ps) {
            *r = (-0.5 * ((p - center) / width).powi(2)).exp();
            norm += *r;
        }
        if norm > 0.0 {
            let f = a2 / (norm * axes.dp);
            row.iter_mut().for_each(|r| *r *= f);
        }
    }
    Ok(w)
}

/// Closed-form Wigner function of the Gaussian beam
/// `(pi w^2)^-1/4 exp(-(x-c)^2/(2 w^2) + i p0 (x-c)/gamma + i a (x-c)^2/gamma)`.
pub fn gaussian_wigner(center: f64, width: f64, momentum: f64, chirp: f64, gamma: f64, x: f64, p: f64) -> f64 {
    let u = x - center;
    let v = p - momentum - 2.0 * chirp * u;
    (-(u * u) / (width * width) - width * width * v * v / (gamma * gamma)).exp() / (PI * gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::GaussianBeam;

    fn beam(gamma: f64) -> ComplexBeam {
        let g = TransverseGrid::new(1, 256, 0.1).unwrap();
        ComplexBeam::gaussian(
            &g,
            gamma,
            1.0,
            GaussianBeam {
                center: [0.4, 0.0],
                width: 1.2,
                momentum: [0.3 * gamma, 0.0],
                chirp: 0.05,
            },
        )
        .unwrap()
    }

    #[test]
    fn matches_closed_form_gaussian() {
        let b = beam(1.0);
        let w = wigner_transform(&b).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..w.axes.nx() {
            for k in 0..w.axes.np {
                let exact = gaussian_wigner(0.4, 1.2, 0.3, 0.05, 1.0, w.axes.x.coord(j), w.axes.p(k));
                worst = worst.max((w.get(j, k) - exact).abs());
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn p_marginal_is_exact() {
        let b = beam(0.5);
        let w = wigner_transform_with(&b, WignerSampling { stride: 2, ..Default::default() }).unwrap();
        let m = marginals_and_flux(&w);
        for (a, v) in m.mass_density.iter().zip(&b.values) {
            assert!((a - v.norm_sqr()).abs() < 1e-13);
        }
    }

    #[test]
    fn alignment_error_names_admissible_gamma() {
        let g = TransverseGrid::new(1, 64, 0.1).unwrap();
        let dp = PI / (64.0 * 0.1);
        assert_eq!(stride_for_spacing(&g, 2.0, dp).unwrap(), 2);
        let e = stride_for_spacing(&g, 1.5, dp).unwrap_err();
        assert!(e.to_string().contains("admissible gamma"), "{e}");
    }

    #[test]
    fn wkb_target_mass_and_center() {
        let axes = PhaseAxes::new(TransverseGrid::new(1, 64, 0.2).unwrap(), 64, 0.1).unwrap();
        let amp = |x: f64| (-x * x / 4.0).exp();
        let w = wkb_target(&axes, 1.0, amp, |_| 0.0, 0.3).unwrap();
        let exact: f64 = axes.xs().iter().map(|&x| amp(x).powi(2)).sum::<f64>() * axes.x.dx;
        assert!((w.mass() - exact).abs() < 1e-10);
        let m = marginals_and_flux(&w);
        assert!(m.flux_density.iter().all(|f| f.abs() < 1e-12));
        assert!(wkb_target(&axes, 1.0, amp, |_| 0.0, 0.0).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let b = beam(1.0);
        let w = wigner_transform(&b).unwrap();
        let (j, k) = (130, 140);
        assert!((w.interpolate(w.axes.x.coord(j), w.axes.p(k)) - w.get(j, k)).abs() < 1e-14);
    }
}
