//! Periodic interpolation on transverse grids.

use crate::grid::TransverseGrid;

/// Keys cubic convolution weights (a = -1/2) for fractional offset `f`.
#[inline]
fn keys_weights(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        -0.5 * f3 + f2 - 0.5 * f,
        1.5 * f3 - 2.5 * f2 + 1.0,
        -1.5 * f3 + 2.0 * f2 + 0.5 * f,
        0.5 * f3 - 0.5 * f2,
    ]
}

#[inline]
fn locate(grid: &TransverseGrid, x: f64) -> (i64, f64) {
    let s = x / grid.dx + (grid.n / 2) as f64;
    let i = s.floor();
    (i as i64, s - i)
}

#[inline]
fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Periodic cubic interpolation of grid samples at position `x`.
pub fn cubic_periodic(grid: &TransverseGrid, values: &[f64], x: &[f64]) -> f64 {
    let n = grid.n;
    let (i0, f0) = locate(grid, x[0]);
    let w0 = keys_weights(f0);
    if grid.dim == 1 {
        let mut acc = 0.0;
        for (k, w) in w0.iter().enumerate() {
            acc += w * values[wrap(i0 - 1 + k as i64, n)];
        }
        return acc;
    }
    let (i1, f1) = locate(grid, x[1]);
    let w1 = keys_weights(f1);
    let mut acc = 0.0;
    for (a, wa) in w0.iter().enumerate() {
        let row = wrap(i0 - 1 + a as i64, n) * n;
        let mut inner = 0.0;
        for (b, wb) in w1.iter().enumerate() {
            inner += wb * values[row + wrap(i1 - 1 + b as i64, n)];
        }
        acc += wa * inner;
    }
    acc
}

/// Periodic linear interpolation along one axis of samples with spacing `h`
/// starting at `origin`.
pub fn linear_periodic(values: &[f64], origin: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    let s = (x - origin) / h;
    let i = s.floor();
    let f = s - i;
    let i = i as i64;
    (1.0 - f) * values[wrap(i, n)] + f * values[wrap(i + 1, n)]
}
