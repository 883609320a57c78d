//! Transverse grids and physical parameters.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Periodic transverse box with `n` points per axis, centered on the origin:
/// `x_j = (j - n/2) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseGrid {
    pub dim: usize,
    pub n: usize,
    pub dx: f64,
}

impl TransverseGrid {
    pub fn new(dim: usize, n: usize, dx: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(invalid("dim", format!("transverse dimension {dim} not in {{1, 2}}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(invalid("n", format!("{n} points; need an even count >= 4")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(invalid("dx", format!("{dx} must be positive")));
        }
        Ok(Self { dim, n, dx })
    }

    /// Total number of points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.dx
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dx
    }

    /// Wavenumber of FFT bin `j` (standard ordering, Nyquist bin negative).
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let j = j as i64;
        let m = if j < n / 2 { j } else { j - n };
        m as f64 * self.dk()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    /// Axis indices of a flat index (row-major, last axis fastest).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn position(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    /// `|q|^2` of the flat FFT bin `idx`.
    pub fn wavenumber_sq(&self, idx: usize) -> f64 {
        let [i, j] = self.unflatten(idx);
        let a = self.wavenumber(i);
        if self.dim == 1 {
            a * a
        } else {
            let b = self.wavenumber(j);
            a * a + b * b
        }
    }

    /// Wavenumber vector of the flat FFT bin `idx`.
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        if self.dim == 1 {
            [self.wavenumber(i), 0.0]
        } else {
            [self.wavenumber(i), self.wavenumber(j)]
        }
    }

    /// Flat index of the bin holding `-k` for the bin holding `k`.
    pub fn mirror(&self, idx: usize) -> usize {
        let [i, j] = self.unflatten(idx);
        let neg = |a: usize| (self.n - a) % self.n;
        if self.dim == 1 {
            neg(i)
        } else {
            neg(i) * self.n + neg(j)
        }
    }
}

/// Nondimensional parameters of the scaled parabolic equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub ktilde: f64,
}

impl PhysicalParams {
    pub fn new(epsilon: f64, gamma: f64, ktilde: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", "must be > 0"));
        }
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "must be > 0"));
        }
        if !(ktilde > 0.0) {
            return Err(invalid("ktilde", "must be > 0"));
        }
        Ok(Self {
            epsilon,
            gamma,
            ktilde,
        })
    }
}

/// Transverse grid, longitudinal step and physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    pub transverse: TransverseGrid,
    pub dz: f64,
    pub params: PhysicalParams,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_is_involution() {
        let g = TransverseGrid::new(2, 8, 0.5).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.mirror(g.mirror(idx)), idx);
            let k = g.wavevector(idx);
            let m = g.wavevector(g.mirror(idx));
            let nyq = g.nyquist();
            for a in 0..2 {
                assert!(k[a] + m[a] == 0.0 || (k[a] + nyq).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn centered_coordinates() {
        let g = TransverseGrid::new(1, 8, 0.25).unwrap();
        assert_eq!(g.coord(4), 0.0);
        assert_eq!(g.coord(0), -1.0);
    }
}
