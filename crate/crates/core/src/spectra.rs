//! Spectral density models of the refractive-index fluctuations, their
//! covariance and structure functions, and the white-noise objects derived
//! from them (effective transverse density and diffusion tensor).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quad::{self, Tolerance};
use crate::special::{bessel_j, bessel_k, gamma, radial_kernel, sphere_area};

pub type DensityFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// A user-supplied even density `(xi, q) -> Phi` together with the constant
/// `K` of the power-law bound it is declared to satisfy.
#[derive(Clone)]
pub struct CustomDensity {
    pub label: String,
    pub density: DensityFn,
    pub bound: f64,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum SpectrumForm {
    /// Generalized von Karman density, normalized so that `B(0) = amplitude`.
    VonKarman,
    /// `amplitude (eta^2 + xi^2 + |q|^2)^{-s}` with the ultraviolet factor.
    PowerLawBounded,
    Custom(CustomDensity),
}

impl SpectrumForm {
    pub fn name(&self) -> &str {
        match self {
            SpectrumForm::VonKarman => "von-karman",
            SpectrumForm::PowerLawBounded => "power-law",
            SpectrumForm::Custom(c) => &c.label,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumModel {
    pub form: SpectrumForm,
    pub hurst: f64,
    pub eta: f64,
    /// Ultraviolet cutoff; `f64::INFINITY` disables it.
    pub rho: f64,
    pub amplitude: f64,
    /// Transverse dimension `d`; the density lives on `R^{d+1}`.
    pub dim: usize,
}

impl SpectrumModel {
    pub fn von_karman(hurst: f64, eta: f64, rho: f64, amplitude: f64, dim: usize) -> Result<Self> {
        let m = Self {
            form: SpectrumForm::VonKarman,
            hurst,
            eta,
            rho,
            amplitude,
            dim,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn power_law(hurst: f64, eta: f64, rho: f64, amplitude: f64, dim: usize) -> Result<Self> {
        let m = Self {
            form: SpectrumForm::PowerLawBounded,
            hurst,
            eta,
            rho,
            amplitude,
            dim,
        };
        m.validate()?;
        Ok(m)
    }

    /// A custom density. `hurst`, `eta` and `rho` describe the bound the
    /// density is declared to satisfy with constant `bound`.
    pub fn custom(
        label: &str,
        density: DensityFn,
        bound: f64,
        hurst: f64,
        eta: f64,
        rho: f64,
        dim: usize,
    ) -> Result<Self> {
        let m = Self {
            form: SpectrumForm::Custom(CustomDensity {
                label: label.to_string(),
                density,
                bound,
            }),
            hurst,
            eta,
            rho,
            amplitude: 1.0,
            dim,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(invalid("H", format!("{} is outside (0, 1)", self.hurst)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(invalid("eta", format!("{} must be finite and >= 0", self.eta)));
        }
        if !(self.rho > 0.0) {
            return Err(invalid("rho", format!("{} must be > 0 (or infinite)", self.rho)));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(invalid("amplitude", format!("{} must be finite and >= 0", self.amplitude)));
        }
        if self.dim == 0 {
            return Err(invalid("dim", "transverse dimension must be positive"));
        }
        match &self.form {
            SpectrumForm::VonKarman if self.eta == 0.0 => Err(invalid(
                "eta",
                "the von Karman form needs eta > 0; use the power-law form for eta = 0",
            )),
            SpectrumForm::Custom(c) if !(c.bound >= 0.0 && c.bound.is_finite()) => {
                Err(invalid("bound", "custom density needs a finite bound constant"))
            }
            _ => Ok(()),
        }
    }

    /// `s = H + 1/2 + d/2`, the decay exponent of `(eta^2+|k|^2)^{-s}`.
    pub fn exponent(&self) -> f64 {
        self.hurst + 0.5 * (self.dim as f64 + 1.0)
    }

    /// The constant `K` in the bound `Phi <= K (eta^2+xi^2+|q|^2)^{-s} (1+|q|^2/rho^2)^{-2}`.
    pub fn bound_constant(&self) -> f64 {
        match &self.form {
            SpectrumForm::VonKarman => {
                let n = self.dim as f64 + 1.0;
                self.amplitude * gamma(self.hurst + 0.5 * n) * self.eta.powf(2.0 * self.hurst)
                    / (gamma(self.hurst) * PI.powf(0.5 * n))
            }
            SpectrumForm::PowerLawBounded => self.amplitude,
            SpectrumForm::Custom(c) => c.bound,
        }
    }

    pub fn uv_factor(&self, q2: f64) -> f64 {
        if self.rho.is_infinite() {
            1.0
        } else {
            let u = 1.0 + q2 / (self.rho * self.rho);
            1.0 / (u * u)
        }
    }

    pub fn bound(&self, xi: f64, q: &[f64]) -> f64 {
        let q2: f64 = q.iter().map(|v| v * v).sum();
        let a2 = self.eta * self.eta + xi * xi + q2;
        self.bound_constant() * a2.powf(-self.exponent()) * self.uv_factor(q2)
    }

    /// `Phi(xi, q)`.
    pub fn eval(&self, xi: f64, q: &[f64]) -> f64 {
        match &self.form {
            SpectrumForm::Custom(c) => (c.density)(xi, q),
            _ => {
                if self.amplitude == 0.0 {
                    return 0.0;
                }
                self.bound(xi, q)
            }
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.form, SpectrumForm::Custom(_))
    }

    /// Built-in forms without ultraviolet cutoff depend on `|(xi, q)|` only.
    pub fn is_isotropic(&self) -> bool {
        self.is_builtin() && self.rho.is_infinite()
    }

    /// Density as a function of `|k|` for isotropic models.
    pub fn radial(&self, k: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.bound_constant() * (self.eta * self.eta + k * k).powf(-self.exponent())
    }

    /// `R(t, |q|) = int e^{i xi t} Phi(xi, q) d xi` for the built-in forms, in
    /// closed form through the Bessel function `K`.
    pub fn time_covariance(&self, t: f64, qnorm: f64) -> f64 {
        debug_assert!(self.is_builtin());
        let s = self.exponent();
        let nu = s - 0.5;
        let a2 = self.eta * self.eta + qnorm * qnorm;
        if a2 == 0.0 || self.amplitude == 0.0 {
            return if self.amplitude == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let a = a2.sqrt();
        let pref = self.bound_constant() * self.uv_factor(qnorm * qnorm);
        let t = t.abs();
        let z = a * t;
        let value = if z < 1e-8 {
            PI.sqrt() * gamma(nu) / gamma(s) * a.powf(-2.0 * nu)
        } else {
            2.0 * PI.sqrt() / gamma(s) * (t / (2.0 * a)).powf(nu) * bessel_k(nu, z)
        };
        pref * value
    }

    /// Transverse marginal `int Phi(xi, q) d xi`, the spectrum of one
    /// transverse slice of the field.
    pub fn transverse_marginal(&self, q: &[f64]) -> f64 {
        match &self.form {
            SpectrumForm::Custom(c) => {
                let f = |xi: f64| (c.density)(xi, q);
                let r = quad::integrate_to_infinity(f, 0.0, self.eta.max(1.0), Tolerance::default());
                r.map(|e| 2.0 * e.value).unwrap_or(f64::NAN)
            }
            _ => {
                let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                self.time_covariance(0.0, qn)
            }
        }
    }

    /// Wavenumber scale used to seed quadrature subdivisions.
    pub(crate) fn scale(&self) -> f64 {
        if self.eta > 0.0 {
            self.eta
        } else {
            1.0
        }
    }

    /// Upper end of the wavenumber range where the density has structure.
    pub(crate) fn structure_scale(&self) -> f64 {
        let s = self.scale();
        if self.rho.is_finite() {
            4.0 * s.max(self.rho)
        } else {
            4.0 * s
        }
    }

    /// Total variance `B(0) = int Phi`.
    pub fn total_variance(&self) -> Result<f64> {
        if self.amplitude == 0.0 && self.is_builtin() {
            return Ok(0.0);
        }
        if self.eta == 0.0 {
            return Err(Error::Divergence {
                quantity: "int Phi".into(),
                condition: "eta = 0 gives an infrared divergence of the variance".into(),
            });
        }
        let tol = Tolerance::default();
        if self.is_isotropic() {
            let n = self.dim + 1;
            let r = quad::integrate_to_infinity(
                |k| self.radial(k) * k.powi(n as i32 - 1),
                0.0,
                self.scale(),
                tol,
            )?;
            return Ok(sphere_area(n) * r.value);
        }
        if self.is_builtin() {
            let d = self.dim;
            let r = quad::integrate_to_infinity(
                |k| self.time_covariance(0.0, k) * k.powi(d as i32 - 1),
                0.0,
                self.scale(),
                tol,
            )?;
            return Ok(sphere_area(d) * r.value);
        }
        match self.dim {
            1 => {
                let inner = |q: f64| self.transverse_marginal(&[q]);
                let r = quad::integrate_to_infinity(inner, 0.0, self.scale(), tol)?;
                Ok(2.0 * r.value)
            }
            _ => Err(Error::Unsupported(
                "variance of custom densities is implemented for d = 1".into(),
            )),
        }
    }

    /// Canonical text used for hashing and provenance.
    pub fn canonical(&self) -> String {
        format!(
            "form={};H={:?};eta={:?};rho={};amplitude={:?};dim={}",
            self.form.name(),
            self.hurst,
            self.eta,
            if self.rho.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:?}", self.rho)
            },
            self.amplitude,
            self.dim
        )
    }

    /// Hex SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

/// `Phi(kvec)` with `kvec = (xi, q_1, ..., q_d)`.
pub fn eval_spectrum(model: &SpectrumModel, kvec: &[f64]) -> Result<f64> {
    if kvec.len() != model.dim + 1 {
        return Err(invalid(
            "kvec",
            format!("expected {} components, got {}", model.dim + 1, kvec.len()),
        ));
    }
    if kvec.iter().any(|v| !v.is_finite()) {
        return Err(invalid("kvec", "non-finite component"));
    }
    Ok(model.eval(kvec[0], &kvec[1..]))
}

/// Closed-form von Karman covariance `B(r)` (no ultraviolet cutoff).
pub fn covariance_closed_form(model: &SpectrumModel, r: f64) -> Result<f64> {
    if !matches!(model.form, SpectrumForm::VonKarman) || model.rho.is_finite() {
        return Err(Error::Unsupported(
            "closed-form covariance needs the von Karman form with rho = inf".into(),
        ));
    }
    let r = r.abs();
    if r == 0.0 {
        return Ok(model.amplitude);
    }
    let h = model.hurst;
    let z = model.eta * r;
    Ok(model.amplitude * 2f64.powf(1.0 - h) / gamma(h) * z.powf(h) * bessel_k(h, z))
}

/// Covariance `B(t, x) = int e^{i(xi t + q.x)} Phi d xi dq` by radial
/// quadrature (isotropic models) or by the closed-form `xi` integral
/// followed by a transverse quadrature.
pub fn covariance_quadrature(model: &SpectrumModel, xvec: &[f64]) -> Result<f64> {
    if xvec.len() != model.dim + 1 {
        return Err(invalid("xvec", "expected d+1 components"));
    }
    if model.is_isotropic() {
        return covariance_radial(model, xvec);
    }
    covariance_sliced(model, xvec)
}

fn covariance_radial(model: &SpectrumModel, xvec: &[f64]) -> Result<f64> {
    let n = model.dim + 1;
    let r = xvec.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = Tolerance::new(1e-12, 1e-10);
    let est = quad::oscillatory_transform(
        |k| model.radial(k) * k.powi(n as i32 - 1),
        |u| radial_kernel(n, u),
        r,
        model.structure_scale(),
        tol,
    )?;
    Ok(sphere_area(n) * est.value)
}

/// Quadrature path that integrates `xi` in closed form; valid for any
/// built-in model, isotropic or not.
pub fn covariance_sliced(model: &SpectrumModel, xvec: &[f64]) -> Result<f64> {
    let d = model.dim;
    let t = xvec[0];
    let x = xvec[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = Tolerance::new(1e-12, 1e-10);
    if !model.is_builtin() {
        if d != 1 {
            return Err(Error::Unsupported(
                "custom covariance quadrature is implemented for d = 1".into(),
            ));
        }
        let SpectrumForm::Custom(c) = &model.form else { unreachable!() };
        let inner = |q: f64| -> f64 {
            quad::fourier_cosine(|xi| (c.density)(xi, &[q]), t, model.structure_scale(), tol)
                .map(|e| 2.0 * e.value)
                .unwrap_or(f64::NAN)
        };
        let est = quad::fourier_cosine(inner, x, model.structure_scale(), tol)?;
        return Ok(2.0 * est.value);
    }
    if model.eta == 0.0 {
        return Err(Error::Divergence {
            quantity: "covariance".into(),
            condition: "eta = 0 gives an infinite variance".into(),
        });
    }
    let est = quad::oscillatory_transform(
        |k| model.time_covariance(t, k) * k.powi(d as i32 - 1),
        |u| radial_kernel(d, u),
        x,
        model.structure_scale(),
        tol,
    )?;
    Ok(sphere_area(d) * est.value)
}

/// `B(xvec)`: closed form where available, quadrature otherwise.
pub fn covariance_function(model: &SpectrumModel, xvec: &[f64]) -> Result<f64> {
    if matches!(model.form, SpectrumForm::VonKarman) && model.rho.is_infinite() {
        let r = xvec.iter().map(|v| v * v).sum::<f64>().sqrt();
        return covariance_closed_form(model, r);
    }
    covariance_quadrature(model, xvec)
}

/// Structure function `D_n(r) = 2 S_{n-1} int Phi(k) (1 - Lambda_n(k r)) k^{n-1} dk`
/// for isotropic models on `R^n`, `n = d + 1`.
pub fn structure_function(model: &SpectrumModel, r: f64) -> Result<f64> {
    if !model.is_isotropic() {
        return Err(Error::Unsupported(
            "structure function needs an isotropic built-in model (rho = inf)".into(),
        ));
    }
    if r < 0.0 {
        return Err(invalid("r", "separation must be >= 0"));
    }
    if r == 0.0 || model.amplitude == 0.0 {
        return Ok(0.0);
    }
    let n = model.dim + 1;
    let tol = Tolerance::new(1e-13, 1e-10);
    let est = quad::one_minus_transform(
        |k| model.radial(k) * k.powi(n as i32 - 1),
        |u| radial_kernel(n, u),
        r,
        model.structure_scale(),
        tol,
    )
    .map_err(|e| match e {
        Error::Divergence { condition, .. } => Error::Divergence {
            quantity: "structure function".into(),
            condition,
        },
        other => other,
    })?;
    Ok(2.0 * sphere_area(n) * est.value)
}

/// Effective white-noise transverse density `Phi_eff(q) = 2 pi Phi(0, q)`.
#[derive(Debug, Clone)]
pub struct EffectiveSpectrum {
    model: SpectrumModel,
}

pub fn transverse_spectrum(model: &SpectrumModel) -> EffectiveSpectrum {
    EffectiveSpectrum {
        model: model.clone(),
    }
}

impl EffectiveSpectrum {
    pub fn model(&self) -> &SpectrumModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn eval(&self, q: &[f64]) -> f64 {
        2.0 * PI * self.model.eval(0.0, q)
    }

    /// Value at `|q|`; the built-in forms are isotropic in `q`.
    pub fn eval_radial(&self, k: f64) -> f64 {
        match &self.model.form {
            SpectrumForm::Custom(_) if self.model.dim == 1 => self.eval(&[k]),
            SpectrumForm::Custom(_) => {
                let mut q = vec![0.0; self.model.dim];
                q[0] = k;
                self.eval(&q)
            }
            _ => {
                if self.model.amplitude == 0.0 {
                    return 0.0;
                }
                2.0 * PI
                    * self.model.bound_constant()
                    * (self.model.eta * self.model.eta + k * k).powf(-self.model.exponent())
                    * self.model.uv_factor(k * k)
            }
        }
    }

    /// Analytic power counting of `int Phi_eff |q|^2 dq` for built-in forms.
    pub fn check_second_moment(&self) -> Result<()> {
        let m = &self.model;
        if !m.is_builtin() || m.amplitude == 0.0 {
            return Ok(());
        }
        if m.eta == 0.0 && m.hurst >= 0.5 {
            return Err(Error::Divergence {
                quantity: "int Phi_eff |q|^2 dq".into(),
                condition: format!(
                    "eta = 0 requires H < 1/2 (infrared), got H = {}",
                    m.hurst
                ),
            });
        }
        if m.rho.is_infinite() && m.hurst <= 0.5 {
            return Err(Error::Divergence {
                quantity: "int Phi_eff |q|^2 dq".into(),
                condition: format!(
                    "rho = inf requires H > 1/2 (ultraviolet), got H = {}",
                    m.hurst
                ),
            });
        }
        Ok(())
    }

    fn radial_moment(&self, power: i32) -> Result<f64> {
        let d = self.model.dim;
        let tol = Tolerance::new(1e-12, 1e-10);
        let m = &self.model;
        if m.is_builtin() {
            if m.amplitude == 0.0 {
                return Ok(0.0);
            }
            let f = |k: f64| self.eval_radial(k) * k.powi(d as i32 - 1 + power);
            // [0, scale] handles an integrable singularity at the origin
            let head = quad::integrate(f, 0.0, m.scale(), tol)?;
            let tail = quad::integrate_to_infinity(f, m.scale(), m.scale(), tol)?;
            return Ok(sphere_area(d) * (head.value + tail.value));
        }
        match d {
            1 => {
                let f = |k: f64| (self.eval(&[k]) + self.eval(&[-k])) * k.powi(power);
                let head = quad::integrate(f, 0.0, m.scale(), tol)?;
                let tail = quad::integrate_to_infinity(f, m.scale(), m.scale(), tol)?;
                Ok(head.value + tail.value)
            }
            2 => {
                let angular = |k: f64| -> f64 {
                    quad::integrate(
                        |th: f64| self.eval(&[k * th.cos(), k * th.sin()]),
                        0.0,
                        2.0 * PI,
                        tol,
                    )
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
                };
                let f = |k: f64| angular(k) * k.powi(1 + power);
                let head = quad::integrate(f, 0.0, m.scale(), tol)?;
                let tail = quad::integrate_to_infinity(f, m.scale(), m.scale(), tol)?;
                Ok(head.value + tail.value)
            }
            _ => Err(Error::Unsupported(
                "custom effective spectra are implemented for d <= 2".into(),
            )),
        }
    }

    /// `C(0) = int Phi_eff(q) dq`, the white-noise screen variance rate.
    pub fn integral(&self) -> Result<f64> {
        if self.model.eta == 0.0 && self.model.amplitude > 0.0 && self.model.is_builtin() {
            return Err(Error::Divergence {
                quantity: "int Phi_eff dq".into(),
                condition: "eta = 0 gives an infrared divergence".into(),
            });
        }
        self.radial_moment(0)
    }

    /// `int Phi_eff(q) |q|^2 dq = tr D(0)`.
    pub fn second_moment(&self) -> Result<f64> {
        self.check_second_moment()?;
        self.radial_moment(2).map_err(|e| match e {
            Error::Divergence { condition, .. } => Error::Divergence {
                quantity: "int Phi_eff |q|^2 dq".into(),
                condition,
            },
            other => other,
        })
    }

    /// `C(x) = int e^{i q.x} Phi_eff(q) dq`.
    pub fn covariance(&self, x: &[f64]) -> Result<f64> {
        let d = self.model.dim;
        if x.len() != d {
            return Err(invalid("x", "expected d components"));
        }
        if !self.model.is_builtin() && d > 1 {
            return Err(Error::Unsupported(
                "covariance of custom effective spectra is implemented for d = 1".into(),
            ));
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = Tolerance::new(1e-13, 1e-11);
        let f = |k: f64| {
            if self.model.is_builtin() {
                self.eval_radial(k) * k.powi(d as i32 - 1)
            } else {
                0.5 * (self.eval(&[k]) + self.eval(&[-k]))
            }
        };
        let est = quad::oscillatory_transform(f, |u| radial_kernel(d, u), r, self.model.structure_scale(), tol)?;
        Ok(sphere_area(d) * est.value)
    }
}

/// Diffusion tensor `D(x) = int e^{i q.x} Phi_eff(q) q (x) q dq`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTensor {
    pub dim: usize,
    pub separation: Vec<f64>,
    /// Row-major `d x d` matrix `D(x)`.
    pub value: Vec<f64>,
    /// Row-major `D(0)`.
    pub origin: Vec<f64>,
}

impl DiffusionTensor {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.value[a * self.dim + b]
    }

    pub fn origin_trace(&self) -> f64 {
        (0..self.dim).map(|a| self.origin[a * self.dim + a]).sum()
    }

    /// Largest absolute eigenvalue of the symmetric matrix `D(x)`.
    pub fn spectral_norm(&self) -> f64 {
        symmetric_norm(&self.value, self.dim)
    }

    pub fn origin_norm(&self) -> f64 {
        symmetric_norm(&self.origin, self.dim)
    }
}

fn symmetric_norm(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0].abs(),
        2 => {
            let tr = 0.5 * (m[0] + m[3]);
            let det = m[0] * m[3] - m[1] * m[2];
            let disc = (tr * tr - det).max(0.0).sqrt();
            (tr + disc).abs().max((tr - disc).abs())
        }
        _ => {
            let mat = nalgebra::DMatrix::from_row_slice(d, d, m);
            mat.symmetric_eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
        }
    }
}

/// Radial components of the tensor: `D(x) = a(r) I + b(r) xhat xhat^T`
/// (d = 2) or `D(x) = a(r)` (d = 1).
fn diffusion_components(spec: &EffectiveSpectrum, r: f64) -> Result<(f64, f64)> {
    let m = spec.model();
    let tol = Tolerance::new(1e-13, 1e-10);
    let scale = m.structure_scale();
    match m.dim {
        1 => {
            let f = |k: f64| {
                if m.is_builtin() {
                    spec.eval_radial(k) * k * k
                } else {
                    0.5 * (spec.eval(&[k]) + spec.eval(&[-k])) * k * k
                }
            };
            let est = quad::fourier_cosine(f, r, scale, tol)?;
            Ok((2.0 * est.value, 0.0))
        }
        2 => {
            if !m.is_builtin() {
                return Err(Error::Unsupported(
                    "diffusion tensor of custom spectra is implemented for d = 1".into(),
                ));
            }
            let f = |k: f64| spec.eval_radial(k) * k.powi(3);
            let j0 = quad::oscillatory_transform(f, |u| bessel_j(0.0, u), r, scale, tol)?;
            if r == 0.0 {
                return Ok((PI * j0.value, 0.0));
            }
            let j2 = quad::oscillatory_transform(f, |u| bessel_j(2.0, u), r, scale, tol)?;
            Ok((PI * (j0.value + j2.value), -2.0 * PI * j2.value))
        }
        _ => Err(Error::Unsupported(
            "diffusion tensor is implemented for d <= 2".into(),
        )),
    }
}

fn assemble(d: usize, x: &[f64], a: f64, b: f64) -> Vec<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let xx = if r > 0.0 { x[i] * x[j] / (r * r) } else { 0.0 };
            out[i * d + j] = if i == j { a } else { 0.0 } + b * xx;
        }
    }
    out
}

pub fn diffusion_tensor(model: &SpectrumModel, x: &[f64]) -> Result<DiffusionTensor> {
    let spec = transverse_spectrum(model);
    spec.check_second_moment().map_err(|e| match e {
        Error::Divergence { condition, .. } => Error::Regime(condition),
        other => other,
    })?;
    let d = model.dim;
    if x.len() != d {
        return Err(invalid("x", "expected d components"));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (a0, b0) = diffusion_components(&spec, 0.0)?;
    let (a, b) = if r == 0.0 { (a0, b0) } else { diffusion_components(&spec, r)? };
    Ok(DiffusionTensor {
        dim: d,
        separation: x.to_vec(),
        value: assemble(d, x, a, b),
        origin: assemble(d, x, a0, b0),
    })
}

/// Tabulated diffusion tensor for fast evaluation inside ray integrators.
/// Beyond the decay radius the tensor is treated as zero.
#[derive(Debug, Clone)]
pub struct DiffusionKernel {
    dim: usize,
    spacing: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    decay_radius: f64,
}

impl DiffusionKernel {
    /// `threshold` is the relative size of `|D(x)|/|D(0)|` below which the
    /// tensor is truncated to zero.
    pub fn build(model: &SpectrumModel, threshold: f64, points: usize) -> Result<Self> {
        let spec = transverse_spectrum(model);
        spec.check_second_moment().map_err(|e| match e {
            Error::Divergence { condition, .. } => Error::Regime(condition),
            other => other,
        })?;
        let d = model.dim;
        let (a0, _) = diffusion_components(&spec, 0.0)?;
        if a0 == 0.0 {
            return Ok(Self {
                dim: d,
                spacing: 1.0,
                a: vec![0.0; 4],
                b: vec![0.0; 4],
                decay_radius: 0.0,
            });
        }
        let base = 1.0 / model.structure_scale();
        let mut r = base;
        let mut below = 0;
        let mut radius = r;
        for _ in 0..400 {
            let (a, b) = diffusion_components(&spec, r)?;
            if a.abs().max((a + b).abs()) <= threshold * a0 {
                below += 1;
                if below == 3 {
                    break;
                }
            } else {
                below = 0;
                radius = r * 1.25;
            }
            r *= 1.25;
        }
        let points = points.max(16);
        let spacing = radius / (points - 3) as f64;
        let mut a = Vec::with_capacity(points);
        let mut b = Vec::with_capacity(points);
        for i in 0..points {
            let (ai, bi) = diffusion_components(&spec, i as f64 * spacing)?;
            a.push(ai);
            b.push(bi);
        }
        Ok(Self {
            dim: d,
            spacing,
            a,
            b,
            decay_radius: radius,
        })
    }

    pub fn decay_radius(&self) -> f64 {
        self.decay_radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> f64 {
        self.a[0]
    }

    fn interp(table: &[f64], spacing: f64, r: f64) -> f64 {
        let t = r / spacing;
        let i = t.floor() as usize;
        if i + 2 >= table.len() {
            return 0.0;
        }
        let f = t - i as f64;
        // four-point Lagrange on i-1..i+2, reflecting at the origin (even functions)
        let y0 = if i == 0 { table[1] } else { table[i - 1] };
        let (y1, y2, y3) = (table[i], table[i + 1], table[i + 2]);
        let c0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let c2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let c3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3
    }

    /// Writes the row-major `d x d` tensor at separation `x` into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = Self::interp(&self.a, self.spacing, r);
        if self.dim == 1 {
            out[0] = a;
            return;
        }
        let b = Self::interp(&self.b, self.spacing, r);
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let xx = if r > 0.0 { x[i] * x[j] / (r * r) } else { 0.0 };
                out[i * d + j] = if i == j { a } else { 0.0 } + b * xx;
            }
        }
    }

    /// Scalar `D(x)` for `d = 1`.
    pub fn scalar(&self, x: f64) -> f64 {
        Self::interp(&self.a, self.spacing, x.abs())
    }
}
