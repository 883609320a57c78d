//! Adaptive quadrature: Gauss-Kronrod on finite intervals, geometric
//! splitting for semi-infinite ranges and half-period splitting with Wynn
//! epsilon acceleration for oscillatory tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_SEGMENTS: usize = 4000;

/// One 15-point Kronrod rule with the embedded 7-point Gauss rule; the
/// error estimate follows the usual QUADPACK scaling.
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let (value, error) = kronrod15(&f, a, b);
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    while total_err > tol.target(total) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "segment limit reached on [{a}, {b}] (value {total:e}, error {total_err:e})"
            )));
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // at machine resolution; accept this piece as is
            frozen_value += seg.value;
            frozen_err += seg.error;
            total_err -= seg.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod15(&f, seg.a, mid);
        let (v2, e2) = kronrod15(&f, mid, seg.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{}, {}]",
                seg.a, seg.b
            )));
        }
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        total += v1 + v2 - seg.value;
        total_err = (total_err + e1 + e2 - seg.error).max(0.0);
    }
    // sum in interval order so the result does not depend on heap layout
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = frozen_value + segs.iter().map(|s| s.value).sum::<f64>();
    let error = frozen_err + segs.iter().map(|s| s.error).sum::<f64>();
    Ok(Estimate { value, error })
}

/// Integral of `f` over `[a, inf)` for integrands without sustained
/// oscillation. `scale` is the width of the first piece; subsequent pieces
/// double in width and a geometric tail correction is applied.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let piece_tol = Tolerance::new(tol.abs * 0.05, tol.rel * 0.1);
    let mut lo = a;
    let mut width = scale;
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut prev: Option<f64> = None;
    let mut growing = 0usize;
    for _ in 0..160 {
        let hi = lo + width;
        let piece = integrate(&f, lo, hi, piece_tol)?;
        sum += piece.value;
        err += piece.error;
        let mag = piece.value.abs();
        if let Some(p) = prev {
            if mag >= 0.97 * p && mag > tol.target(sum) {
                growing += 1;
                if growing >= 12 {
                    return Err(Error::Divergence {
                        quantity: "semi-infinite integral".into(),
                        condition: format!("pieces stop decaying beyond {lo:e}"),
                    });
                }
            } else {
                growing = 0;
            }
            let ratio = if p > 0.0 { mag / p } else { 0.0 };
            let tail = if ratio < 0.9 { mag * ratio / (1.0 - ratio) } else { f64::INFINITY };
            if tail <= tol.target(sum) * 0.5 || (mag == 0.0 && p == 0.0) {
                let tail_signed = if tail.is_finite() {
                    piece.value.signum() * tail
                } else {
                    0.0
                };
                return Ok(Estimate {
                    value: sum + tail_signed,
                    error: err + tail,
                });
            }
        }
        prev = Some(mag);
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Divergence {
        quantity: "semi-infinite integral".into(),
        condition: format!("no convergence up to {lo:e}"),
    })
}

/// Best limit estimate of a sequence of partial sums via the Wynn epsilon
/// algorithm.
pub fn wynn_epsilon(seq: &[f64]) -> f64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().unwrap_or(&0.0);
    }
    // columns e_{k}^{(j)}, j indexes the starting term
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = seq.to_vec();
    let mut best = seq[n - 1];
    let mut k = 0;
    while cur.len() >= 2 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let diff = cur[j + 1] - cur[j];
            if diff == 0.0 {
                // exact convergence in this column
                return if k % 2 == 0 { cur[j + 1] } else { best };
            }
            next.push(prev[j + 1] + 1.0 / diff);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

/// Integral over `[a, inf)` of a decaying integrand that oscillates with
/// asymptotic half-period `half_period`.
pub fn integrate_oscillatory<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    half_period: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let piece_tol = Tolerance::new(tol.abs * 0.01, tol.rel * 0.01);
    let mut partial = Vec::new();
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut last_est = f64::NAN;
    let mut stable = 0usize;
    let mut small = 0usize;
    for k in 0..6000 {
        let lo = a + k as f64 * half_period;
        let piece = integrate(&f, lo, lo + half_period, piece_tol)?;
        sum += piece.value;
        err += piece.error;
        partial.push(sum);
        if piece.value.abs() <= 0.1 * tol.target(sum) {
            small += 1;
            if small >= 4 {
                return Ok(Estimate { value: sum, error: err });
            }
        } else {
            small = 0;
        }
        if partial.len() >= 6 {
            let window = &partial[partial.len().saturating_sub(25)..];
            let est = wynn_epsilon(window);
            let diff = (est - last_est).abs();
            if diff <= 0.5 * tol.target(est) {
                stable += 1;
                if stable >= 2 {
                    return Ok(Estimate {
                        value: est,
                        error: err + diff,
                    });
                }
            } else {
                stable = 0;
            }
            last_est = est;
        }
    }
    Err(Error::Quadrature(format!(
        "oscillatory integral from {a} (half period {half_period}) did not converge"
    )))
}

/// Integral of `f(q) kernel(q x)` over `[0, inf)` for a kernel that
/// oscillates with asymptotic period `2 pi` in its argument (cos, Bessel J).
/// `scale` marks the range over which `f` has structure.
pub fn oscillatory_transform<F, K>(f: F, kernel: K, x: f64, scale: f64, tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    K: Fn(f64) -> f64,
{
    let x = x.abs();
    if x == 0.0 {
        let k0 = kernel(0.0);
        return integrate_to_infinity(|q| f(q) * k0, 0.0, scale, tol);
    }
    let half = std::f64::consts::PI / x;
    // resolve the structured part directly, then accelerate over whole half-periods
    let cycles = (scale / half).ceil().max(1.0);
    let split = cycles * half;
    let g = |q: f64| f(q) * kernel(q * x);
    let head = integrate(g, 0.0, split, tol)?;
    let tail = integrate_oscillatory(g, split, half, tol)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

/// Integral of `f(q) cos(q x)` over `[0, inf)`.
pub fn fourier_cosine<F: Fn(f64) -> f64>(f: F, x: f64, scale: f64, tol: Tolerance) -> Result<Estimate> {
    oscillatory_transform(f, f64::cos, x, scale, tol)
}

/// Integral of `f(q) (1 - kernel(q a))` over `[0, inf)` for a kernel with
/// `kernel(0) = 1`, split so that the small-q cancellation is integrated
/// directly instead of subtracting two large numbers.
pub fn one_minus_transform<F, K>(f: F, kernel: K, a: f64, scale: f64, tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    K: Fn(f64) -> f64,
{
    let a = a.abs();
    if a == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let half = std::f64::consts::PI / a;
    let split = (scale / half).ceil().max(1.0) * half;
    let head = integrate(|q| f(q) * (1.0 - kernel(q * a)), 0.0, split, tol)?;
    let plain = integrate_to_infinity(&f, split, split.max(scale), tol)?;
    let osc = integrate_oscillatory(|q| f(q) * kernel(q * a), split, half, tol)?;
    Ok(Estimate {
        value: head.value + plain.value - osc.value,
        error: head.error + plain.error + osc.error,
    })
}

/// Integral of `f(q) (1 - cos(q a))` over `[0, inf)`.
pub fn one_minus_cosine<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: Tolerance) -> Result<Estimate> {
    one_minus_transform(f, f64::cos, a, scale, tol)
}
