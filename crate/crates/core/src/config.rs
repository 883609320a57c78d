//! Experiment configuration: a versioned TOML tree, schema validation, and
//! the parametric schedules that drive the convergence harness.
//!
//! Schedules are families `gamma = gamma0 eps^a`, `eta = eta0 eps^b`,
//! `rho = rho0 eps^(-c)` over a list of `eps` values. Every schedule names
//! the scaling condition it instantiates; points that violate it are
//! rejected with the condition spelled out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::background::BackgroundModel;
use crate::beam::GaussianBeam;
use crate::error::{Error, Result};
use crate::grid::TransverseGrid;
use crate::spectra::SpectrumModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    WignerMoyal,
    Liouville,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumFormName {
    VonKarman,
    PowerLaw,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub form: SpectrumFormName,
    pub hurst: f64,
    pub eta: f64,
    /// Omitted or `inf` disables the ultraviolet cutoff.
    #[serde(default = "infinity")]
    pub rho: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub dx: f64,
    /// Half-offset stride of the discrete Wigner transform.
    #[serde(default = "one_usize")]
    pub wigner_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(default = "one")]
    pub ktilde: f64,
    /// Base `gamma0` of the schedule family.
    #[serde(default = "one")]
    pub gamma: f64,
    /// Propagation distance.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub width: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub chirp: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            width: 1.0,
            center: 0.0,
            momentum: 0.0,
            chirp: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    /// Slice spacing of synthesized volumes in fast time; default
    /// `1 / (4 min(rho, nyquist))`.
    pub dz_field: Option<f64>,
    /// Extra fast-time span beyond `z / eps^2`; default `12 / eta`.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    /// Upper bound on the beam step; the step is further reduced so that
    /// one step never skips a field slice.
    pub max_dz: f64,
}

impl Default for PropagationSection {
    fn default() -> Self {
        Self { max_dz: 5e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub realizations: usize,
    /// Delete-a-group jackknife groups.
    #[serde(default = "default_groups")]
    pub groups: usize,
    /// Realizations evaluated per parallel batch; fixed so that reductions
    /// do not depend on the worker count.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySection {
    /// Rays per medium realization.
    pub count: usize,
    #[serde(default)]
    pub center: f64,
    /// Standard deviation of initial positions.
    pub position_spread: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub momentum_spread: f64,
    /// Ray step as a fraction of `eps^2 dz_field`.
    #[serde(default = "half")]
    pub step_fraction: f64,
    /// Phase-space probes `[x, p]` for kernel density comparisons.
    #[serde(default)]
    pub probes: Vec<[f64; 2]>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingCondition {
    /// Wigner-Moyal limit, `gamma` and `eta` fixed, `eps rho^(2-H) -> 0`.
    WmFixedEta,
    /// Wigner-Moyal limit with `H < 1/2`, `eta -> 0`,
    /// `eps eta^-1 (eta^-1 + rho^(2-H)) -> 0`.
    WmVanishingEta,
    /// Liouville limit, `gamma -> 0` with finite `rho` and `eta > 0` fixed.
    LiouvilleFixedScales,
    /// Liouville limit with `H > 1/2`, `eta` fixed, `rho -> inf`,
    /// `eps rho^(2-H) -> 0`.
    LiouvilleGrowingRho,
    /// Liouville limit with `H < 1/2`, `rho` fixed, `eta -> 0`,
    /// `eps eta^-2 -> 0`.
    LiouvilleVanishingEta,
}

impl ScalingCondition {
    pub fn regime(self) -> RegimeKind {
        match self {
            ScalingCondition::WmFixedEta | ScalingCondition::WmVanishingEta => RegimeKind::WignerMoyal,
            _ => RegimeKind::Liouville,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalingCondition::WmFixedEta => "wm-fixed-eta",
            ScalingCondition::WmVanishingEta => "wm-vanishing-eta",
            ScalingCondition::LiouvilleFixedScales => "liouville-fixed-scales",
            ScalingCondition::LiouvilleGrowingRho => "liouville-growing-rho",
            ScalingCondition::LiouvilleVanishingEta => "liouville-vanishing-eta",
        }
    }

    /// The quantity the condition drives to zero, evaluated at one point.
    pub fn vanishing_quantity(self, p: &SchedulePoint, hurst: f64) -> f64 {
        match self {
            ScalingCondition::WmFixedEta | ScalingCondition::LiouvilleGrowingRho => p.epsilon * p.rho.powf(2.0 - hurst),
            ScalingCondition::WmVanishingEta => p.epsilon / p.eta * (1.0 / p.eta + p.rho.powf(2.0 - hurst)),
            ScalingCondition::LiouvilleFixedScales => p.gamma,
            ScalingCondition::LiouvilleVanishingEta => p.epsilon / (p.eta * p.eta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub condition: ScalingCondition,
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub gamma_exponent: f64,
    #[serde(default)]
    pub eta_exponent: f64,
    #[serde(default)]
    pub rho_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    /// Cap on realizations x slices x transverse points (or rays x steps).
    #[serde(default = "default_max_work")]
    pub max_work: f64,
    #[serde(default = "default_max_memory")]
    pub max_memory_bytes: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            max_work: default_max_work(),
            max_memory_bytes: default_max_memory(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpointSection {
    pub probes: Vec<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_npoint_dz")]
    pub dz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub regime: RegimeKind,
    #[serde(default)]
    pub seed: u64,
    pub spectrum: SpectrumSection,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub beam: BeamSection,
    #[serde(default)]
    pub medium: MediumSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    pub ensemble: Option<EnsembleSection>,
    pub rays: Option<RaySection>,
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub background: Option<BackgroundModel>,
    pub npoint: Option<NpointSection>,
    #[serde(default)]
    pub limits: LimitsSection,
}

/// One `(eps, gamma, eta, rho)` point of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub epsilon: f64,
    pub gamma: f64,
    pub eta: f64,
    pub rho: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn one_usize() -> usize {
    1
}
fn default_groups() -> usize {
    20
}
fn default_batch() -> usize {
    16
}
fn default_bandwidth() -> [f64; 2] {
    [0.5, 0.05]
}
fn default_max_work() -> f64 {
    1e12
}
fn default_max_memory() -> f64 {
    8.0 * 1024.0 * 1024.0 * 1024.0
}
fn default_samples() -> usize {
    10_000
}
fn default_npoint_dz() -> f64 {
    1e-2
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("`{name}` must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.spectrum.form == SpectrumFormName::Custom {
            return Err(config_err(
                "form = \"custom\" needs a density closure and is only available through the library API",
            ));
        }
        self.base_model()?;
        if self.spectrum.dim != 1 && self.spectrum.dim != 2 {
            return Err(config_err("spectrum.dim must be 1 or 2"));
        }
        self.transverse_grid()?;
        if self.grid.wigner_stride == 0 {
            return Err(config_err("grid.wigner_stride must be at least 1"));
        }
        positive("physics.ktilde", self.physics.ktilde)?;
        positive("physics.gamma", self.physics.gamma)?;
        if !(self.physics.z >= 0.0 && self.physics.z.is_finite()) {
            return Err(config_err("physics.z must be finite and non-negative"));
        }
        positive("beam.width", self.beam.width)?;
        positive("propagation.max_dz", self.propagation.max_dz)?;
        if let Some(v) = self.medium.dz_field {
            positive("medium.dz_field", v)?;
        }
        if let Some(v) = self.medium.margin {
            if !(v >= 0.0) {
                return Err(config_err("medium.margin must be non-negative"));
            }
        }
        if let Some(e) = &self.ensemble {
            if e.realizations < 2 {
                return Err(config_err("ensemble.realizations must be at least 2"));
            }
            if e.groups < 2 || e.groups > e.realizations {
                return Err(config_err("ensemble.groups must lie in [2, realizations]"));
            }
            if e.batch == 0 {
                return Err(config_err("ensemble.batch must be positive"));
            }
        }
        if let Some(r) = &self.rays {
            if r.count == 0 {
                return Err(config_err("rays.count must be positive"));
            }
            if !(r.position_spread >= 0.0 && r.momentum_spread >= 0.0) {
                return Err(config_err("ray spreads must be non-negative"));
            }
            positive("rays.step_fraction", r.step_fraction)?;
            if r.step_fraction > 1.0 {
                return Err(config_err("rays.step_fraction must not exceed 1"));
            }
            positive("rays.bandwidth[0]", r.bandwidth[0])?;
            positive("rays.bandwidth[1]", r.bandwidth[1])?;
        }
        if let Some(s) = &self.schedule {
            if s.condition.regime() != self.regime {
                return Err(Error::Schedule {
                    condition: s.condition.name().into(),
                    detail: format!("the condition belongs to the {:?} regime, config selects {:?}", s.condition.regime(), self.regime),
                });
            }
            validate_schedule(s, &self.schedule_points()?, self.spectrum.hurst)?;
        }
        Ok(())
    }

    pub fn transverse_grid(&self) -> Result<TransverseGrid> {
        TransverseGrid::new(self.spectrum.dim, self.grid.n, self.grid.dx).map_err(|e| config_err(format!("grid: {e}")))
    }

    /// Spectrum with the base `eta`, `rho`.
    pub fn base_model(&self) -> Result<SpectrumModel> {
        self.model_with(self.spectrum.eta, self.spectrum.rho)
    }

    pub fn model_with(&self, eta: f64, rho: f64) -> Result<SpectrumModel> {
        let s = &self.spectrum;
        match s.form {
            SpectrumFormName::VonKarman => SpectrumModel::von_karman(s.hurst, eta, rho, s.amplitude, s.dim),
            SpectrumFormName::PowerLaw => SpectrumModel::power_law(s.hurst, eta, rho, s.amplitude, s.dim),
            SpectrumFormName::Custom => Err(config_err("custom spectra cannot be configured from a file")),
        }
    }

    pub fn model_at(&self, p: &SchedulePoint) -> Result<SpectrumModel> {
        self.model_with(p.eta, p.rho)
    }

    pub fn background_model(&self) -> BackgroundModel {
        self.background.clone().unwrap_or_default()
    }

    pub fn gaussian_beam(&self) -> GaussianBeam {
        GaussianBeam {
            center: [self.beam.center, 0.0],
            width: self.beam.width,
            momentum: [self.beam.momentum, 0.0],
            chirp: self.beam.chirp,
        }
    }

    pub fn ensemble(&self) -> Result<&EnsembleSection> {
        self.ensemble.as_ref().ok_or_else(|| config_err("missing [ensemble] section"))
    }

    pub fn rays(&self) -> Result<&RaySection> {
        self.rays.as_ref().ok_or_else(|| config_err("missing [rays] section"))
    }

    /// Schedule points; without a `[schedule]` section a single point at
    /// `eps = 1` with the base parameters.
    pub fn schedule_points(&self) -> Result<Vec<SchedulePoint>> {
        let base = |eps: f64, s: Option<&ScheduleSection>| {
            let (a, b, c) = s.map_or((0.0, 0.0, 0.0), |s| (s.gamma_exponent, s.eta_exponent, s.rho_exponent));
            SchedulePoint {
                epsilon: eps,
                gamma: self.physics.gamma * eps.powf(a),
                eta: self.spectrum.eta * eps.powf(b),
                rho: self.spectrum.rho * eps.powf(-c),
            }
        };
        match &self.schedule {
            None => Ok(vec![base(1.0, None)]),
            Some(s) => {
                if s.epsilons.is_empty() {
                    return Err(config_err("schedule.epsilons must not be empty"));
                }
                for &e in &s.epsilons {
                    positive("schedule.epsilons", e)?;
                }
                Ok(s.epsilons.iter().map(|&e| base(e, Some(s))).collect())
            }
        }
    }

    /// `dz_field` for a schedule point.
    pub fn field_spacing(&self, p: &SchedulePoint) -> Result<f64> {
        if let Some(v) = self.medium.dz_field {
            return Ok(v);
        }
        let nyq = self.transverse_grid()?.nyquist();
        Ok(0.25 / p.rho.min(nyq))
    }

    pub fn field_margin(&self, p: &SchedulePoint) -> f64 {
        self.medium.margin.unwrap_or(if p.eta > 0.0 { 12.0 / p.eta } else { 0.0 })
    }
}

fn schedule_err(condition: ScalingCondition, detail: String) -> Error {
    Error::Schedule {
        condition: condition.name().into(),
        detail,
    }
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Checks that consecutive points move in the direction the condition
/// requires. The limit itself cannot be checked on a finite schedule, so
/// the vanishing quantity must decrease strictly at every step.
pub fn validate_schedule(s: &ScheduleSection, points: &[SchedulePoint], hurst: f64) -> Result<()> {
    let c = s.condition;
    for w in points.windows(2) {
        if !(w[1].epsilon < w[0].epsilon) {
            return Err(schedule_err(c, format!("eps must decrease strictly ({} then {})", w[0].epsilon, w[1].epsilon)));
        }
    }
    let need_h = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(schedule_err(c, format!("requires {what}, got H = {hurst}")))
        }
    };
    let fixed = |name: &str, f: fn(&SchedulePoint) -> f64| -> Result<()> {
        for w in points.windows(2) {
            if !same(f(&w[0]), f(&w[1])) {
                return Err(schedule_err(c, format!("{name} must stay fixed ({} then {})", f(&w[0]), f(&w[1]))));
            }
        }
        Ok(())
    };
    let decreasing = |name: &str, f: &dyn Fn(&SchedulePoint) -> f64| -> Result<()> {
        for w in points.windows(2) {
            let (a, b) = (f(&w[0]), f(&w[1]));
            if !(b < a) {
                return Err(schedule_err(c, format!("{name} must decrease toward 0 ({a} then {b})")));
            }
        }
        Ok(())
    };
    let finite_rho = || -> Result<()> {
        if points.iter().all(|p| p.rho.is_finite()) {
            Ok(())
        } else {
            Err(schedule_err(c, "requires a finite cutoff rho".into()))
        }
    };
    let quantity = |p: &SchedulePoint| c.vanishing_quantity(p, hurst);
    match c {
        ScalingCondition::WmFixedEta => {
            fixed("gamma", |p| p.gamma)?;
            fixed("eta", |p| p.eta)?;
            finite_rho()?;
            decreasing("eps rho^(2-H)", &quantity)
        }
        ScalingCondition::WmVanishingEta => {
            need_h(hurst < 0.5, "H < 1/2")?;
            fixed("gamma", |p| p.gamma)?;
            finite_rho()?;
            decreasing("eta", &|p| p.eta)?;
            decreasing("eps eta^-1 (eta^-1 + rho^(2-H))", &quantity)
        }
        ScalingCondition::LiouvilleFixedScales => {
            finite_rho()?;
            fixed("rho", |p| p.rho)?;
            fixed("eta", |p| p.eta)?;
            if points.iter().any(|p| !(p.eta > 0.0)) {
                return Err(schedule_err(c, "requires eta > 0".into()));
            }
            decreasing("gamma", &|p| p.gamma)
        }
        ScalingCondition::LiouvilleGrowingRho => {
            need_h(hurst > 0.5, "H > 1/2")?;
            finite_rho()?;
            fixed("eta", |p| p.eta)?;
            decreasing("gamma", &|p| p.gamma)?;
            for w in points.windows(2) {
                if !(w[1].rho > w[0].rho) {
                    return Err(schedule_err(c, format!("rho must grow ({} then {})", w[0].rho, w[1].rho)));
                }
            }
            decreasing("eps rho^(2-H)", &quantity)
        }
        ScalingCondition::LiouvilleVanishingEta => {
            need_h(hurst < 0.5, "H < 1/2")?;
            finite_rho()?;
            fixed("rho", |p| p.rho)?;
            decreasing("gamma", &|p| p.gamma)?;
            decreasing("eta", &|p| p.eta)?;
            decreasing("eps eta^-2", &quantity)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
regime = "wigner-moyal"
seed = 7

[spectrum]
form = "von-karman"
hurst = 0.3333333333333333
eta = 0.5
rho = 2.0

[grid]
n = 64
dx = 0.25

[physics]
z = 1.0

[schedule]
condition = "wm-fixed-eta"
epsilons = [0.4, 0.28, 0.2, 0.14]
"#;

    #[test]
    fn parses_and_expands_schedule() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        let pts = cfg.schedule_points().unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.gamma == 1.0 && p.eta == 0.5 && p.rho == 2.0));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn growing_rho_too_fast_names_the_condition() {
        // rho = rho0 eps^-0.7 makes eps rho^(2-H) grow for H = 1/3
        let text = BASE.replace("epsilons = [0.4, 0.28, 0.2, 0.14]", "epsilons = [0.4, 0.28, 0.2, 0.14]\nrho_exponent = 0.7");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Schedule { condition, detail }) => {
                assert_eq!(condition, "wm-fixed-eta");
                assert!(detail.contains("eps rho^(2-H)"), "{detail}");
            }
            other => panic!("expected schedule violation, got {other:?}"),
        }
        let slow = BASE.replace("epsilons = [0.4, 0.28, 0.2, 0.14]", "epsilons = [0.4, 0.28, 0.2, 0.14]\nrho_exponent = 0.5");
        assert!(ExperimentConfig::from_toml_str(&slow).is_ok());
    }

    #[test]
    fn regime_and_condition_must_agree() {
        let text = BASE.replace("wm-fixed-eta", "liouville-fixed-scales");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Schedule { .. })));
    }

    #[test]
    fn liouville_schedule_requires_vanishing_gamma() {
        let text = BASE
            .replace("wigner-moyal", "liouville")
            .replace("wm-fixed-eta", "liouville-fixed-scales");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let tied = text.replace("epsilons = [0.4, 0.28, 0.2, 0.14]", "epsilons = [0.4, 0.28, 0.2, 0.14]\ngamma_exponent = 1.0");
        let cfg = ExperimentConfig::from_toml_str(&tied).unwrap();
        let pts = cfg.schedule_points().unwrap();
        assert!(pts.iter().all(|p| p.gamma == p.epsilon));
    }

    #[test]
    fn rejects_custom_form_and_unknown_keys() {
        let custom = BASE.replace("von-karman", "custom");
        assert!(matches!(ExperimentConfig::from_toml_str(&custom), Err(Error::Config(_))));
        let extra = BASE.replace("dx = 0.25", "dx = 0.25\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&extra).is_err());
        let version = BASE.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml_str(&version).is_err());
    }

    #[test]
    fn vanishing_eta_needs_rough_fields() {
        let text = BASE
            .replace("wm-fixed-eta", "wm-vanishing-eta")
            .replace("hurst = 0.3333333333333333", "hurst = 0.7")
            .replace("epsilons = [0.4, 0.28, 0.2, 0.14]", "epsilons = [0.4, 0.28, 0.2, 0.14]\neta_exponent = 0.25");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Schedule { detail, .. }) => assert!(detail.contains("H < 1/2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_under_reparse() {
        let a = ExperimentConfig::from_toml_str(BASE).unwrap();
        let b = ExperimentConfig::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
