//! Smooth deterministic large-scale inhomogeneities: the multiplicative
//! modulation `mu(z, x)` and the additive background `V0(z, x)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::TransverseGrid;

pub type ProfileFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type ProfileGradFn = Arc<dyn Fn(f64, &[f64]) -> [f64; 2] + Send + Sync>;

/// Closed-form profile `(z, x) -> value` with analytic gradient in `x`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// `curvature |x - center|^2 / 2`; a negative curvature in `V0` focuses.
    Quadratic { curvature: f64, center: [f64; 2] },
    /// `amplitude cos(k.x + phase) cos(z_frequency z)`.
    Wave {
        amplitude: f64,
        wavevector: [f64; 2],
        phase: f64,
        z_frequency: f64,
    },
    /// Smooth step along the first axis from `low` to `high` around `position`.
    Step {
        low: f64,
        high: f64,
        position: f64,
        width: f64,
    },
    #[serde(skip)]
    Custom {
        label: String,
        value: ProfileFn,
        gradient: ProfileGradFn,
        bound: f64,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant { value } => write!(f, "Constant({value})"),
            Profile::Quadratic { curvature, center } => {
                write!(f, "Quadratic({curvature}, {center:?})")
            }
            Profile::Wave {
                amplitude,
                wavevector,
                phase,
                z_frequency,
            } => write!(f, "Wave({amplitude}, {wavevector:?}, {phase}, {z_frequency})"),
            Profile::Step {
                low,
                high,
                position,
                width,
            } => write!(f, "Step({low}, {high}, {position}, {width})"),
            Profile::Custom { label, bound, .. } => write!(f, "Custom({label}, bound {bound})"),
        }
    }
}

fn dot(a: &[f64], b: &[f64; 2]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn value(&self, z: f64, x: &[f64]) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Quadratic { curvature, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                0.5 * curvature * r2
            }
            Profile::Wave {
                amplitude,
                wavevector,
                phase,
                z_frequency,
            } => amplitude * (dot(x, wavevector) + phase).cos() * (z_frequency * z).cos(),
            Profile::Step {
                low,
                high,
                position,
                width,
            } => low + (high - low) * 0.5 * (1.0 + ((x[0] - position) / width).tanh()),
            Profile::Custom { value, .. } => value(z, x),
        }
    }

    pub fn gradient(&self, z: f64, x: &[f64]) -> [f64; 2] {
        match self {
            Profile::Constant { .. } => [0.0, 0.0],
            Profile::Quadratic { curvature, center } => {
                let mut g = [0.0; 2];
                for (a, gi) in g.iter_mut().enumerate().take(x.len()) {
                    *gi = curvature * (x[a] - center[a]);
                }
                g
            }
            Profile::Wave {
                amplitude,
                wavevector,
                phase,
                z_frequency,
            } => {
                let s = -amplitude * (dot(x, wavevector) + phase).sin() * (z_frequency * z).cos();
                [s * wavevector[0], s * wavevector[1]]
            }
            Profile::Step {
                low,
                high,
                position,
                width,
            } => {
                let t = ((x[0] - position) / width).tanh();
                [(high - low) * 0.5 * (1.0 - t * t) / width, 0.0]
            }
            Profile::Custom { gradient, .. } => gradient(z, x),
        }
    }

    /// Supremum of `|value|` over the periodic box of `grid`.
    pub fn bound(&self, grid: &TransverseGrid) -> f64 {
        match self {
            Profile::Constant { value } => value.abs(),
            Profile::Quadratic { curvature, center } => {
                let half = 0.5 * grid.length();
                let r2: f64 = (0..grid.dim).map(|a| (half + center[a].abs()).powi(2)).sum();
                0.5 * curvature.abs() * r2
            }
            Profile::Wave { amplitude, .. } => amplitude.abs(),
            Profile::Step { low, high, .. } => low.abs().max(high.abs()),
            Profile::Custom { bound, .. } => *bound,
        }
    }

    pub fn is_z_independent(&self) -> bool {
        match self {
            Profile::Wave { z_frequency, .. } => *z_frequency == 0.0,
            Profile::Custom { .. } => false,
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Constant { value } => *value == 0.0,
            Profile::Quadratic { curvature, .. } => *curvature == 0.0,
            Profile::Wave { amplitude, .. } => *amplitude == 0.0,
            Profile::Step { low, high, .. } => *low == 0.0 && *high == 0.0,
            Profile::Custom { .. } => false,
        }
    }

    pub fn is_unit(&self) -> bool {
        match self {
            Profile::Constant { value } => *value == 1.0,
            Profile::Step { low, high, .. } => *low == 1.0 && *high == 1.0,
            _ => false,
        }
    }

    /// Values on every grid point at longitudinal position `z`.
    pub fn sample(&self, grid: &TransverseGrid, z: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|idx| {
                let p = grid.position(idx);
                self.value(z, &p[..grid.dim])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundModel {
    pub mu: Profile,
    pub v0: Profile,
}

impl Default for BackgroundModel {
    fn default() -> Self {
        Self {
            mu: Profile::constant(1.0),
            v0: Profile::constant(0.0),
        }
    }
}

impl BackgroundModel {
    pub fn is_homogeneous(&self) -> bool {
        self.mu.is_unit() && self.v0.is_zero()
    }
}
