//! FFT helpers over one- and two-dimensional periodic grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::TransverseGrid;

/// Forward/inverse transforms along every axis of a transverse grid. The
/// inverse is normalized by the number of points.
#[derive(Clone)]
pub struct GridFft {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GridFft {{ dim: {}, n: {} }}", self.dim, self.n)
    }
}

impl GridFft {
    pub fn new(grid: &TransverseGrid) -> Self {
        Self::with_shape(grid.dim, grid.n)
    }

    pub fn with_shape(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        // rows are contiguous: one batched call handles every row
        plan.process(data);
        if self.dim == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                plan.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// One-dimensional plans of a fixed length, for batched row transforms.
#[derive(Clone)]
pub struct LineFft {
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LineFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward transform of every consecutive length-`n` line.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Unnormalized inverse transform of every consecutive length-`n` line.
    pub fn inverse_raw(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
    }

    /// Normalized inverse transform of every consecutive length-`n` line.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let g = TransverseGrid::new(2, 8, 1.0).unwrap();
        let f = GridFft::new(&g);
        let orig: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut v = orig.clone();
        f.forward(&mut v);
        f.inverse(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
