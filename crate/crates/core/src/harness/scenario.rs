//! Scenario configuration.
//!
//! Scenarios are TOML documents with the sections `plant`, `adc`, `controller`,
//! `adaptation`, `reference`, `disturbance` and `run`. Every key is optional
//! except `controller.order`; unknown keys are rejected.
//!
//! ```toml
//! name = "second-order MIMO at 800 ms"
//!
//! [plant]
//! J = 0.02
//! R = 2.0
//! L = 0.5
//! k_m = 0.015
//! k_f = 0.02
//! k_b = 0.015
//! load_torque = 0.1
//! theta0 = 0.0
//! current0 = 0.0
//! uncertainty = 0.0        # fractional perturbation of the 7 unknown entries
//!
//! [adc]
//! enabled = true
//! sample_time = 0.8        # controller period T [s]
//! bits = 10
//! theta_fsr = 200.0        # rad/s, centred on theta_offset
//! current_fsr = 1000.0     # A, centred on current_offset
//! mode = "truncate"        # or "round"
//!
//! [controller]
//! order = "second"         # "first" | "second"
//! gains = [[0.5, 0.05], [0.05, 0.5]]
//! mu_u = true
//! epsilon = [0.01, 0.01]
//! current_ref_next = "predict"   # or "hold"
//!
//! [adaptation]
//! enabled = false
//! rho_alpha = 3.0e4
//! beta_scaling = "entry"   # "entry": rho_beta = rho_alpha * a_pq^2, "uniform": rho_beta = rho_alpha
//!
//! [reference]
//! knots = [[0.0, 40.0], [20.0, 40.0], [30.0, 80.0]]
//!
//! [disturbance]
//! schedule = [[30.0, 0.2], [45.0, 0.0]]
//!
//! [run]
//! duration = 100.0
//! dt = 0.001
//! divergence_bound = 1e6
//! transient = 2.0
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adapt::AdaptationState;
use crate::adc::{AdcChannel, QuantizerMode};
use crate::error::{Error, Result};
use crate::plant::{dc_motor_model, DcMotorParams, DisturbanceProfile, UncertaintySpec};
use crate::smc::{CurrentRefNext, DcCascadeConfig, Order};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    #[serde(rename = "J")]
    pub inertia: f64,
    #[serde(rename = "R")]
    pub resistance: f64,
    #[serde(rename = "L")]
    pub inductance: f64,
    pub k_m: f64,
    pub k_f: f64,
    pub k_b: f64,
    pub load_torque: f64,
    pub theta0: f64,
    pub current0: f64,
    /// Fractional perturbation applied to the unknown entries of the true plant:
    /// `beta = 1 - f`, `alpha = f |a_pq|`.
    pub uncertainty: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = DcMotorParams::default();
        Self {
            inertia: p.inertia,
            resistance: p.resistance,
            inductance: p.inductance,
            k_m: p.k_m,
            k_f: p.k_f,
            k_b: p.k_b,
            load_torque: p.load_torque,
            theta0: 0.0,
            current0: 0.0,
            uncertainty: 0.0,
        }
    }
}

impl PlantSection {
    pub fn motor(&self) -> DcMotorParams {
        DcMotorParams {
            inertia: self.inertia,
            resistance: self.resistance,
            inductance: self.inductance,
            k_m: self.k_m,
            k_f: self.k_f,
            k_b: self.k_b,
            load_torque: self.load_torque,
        }
    }

    /// True perturbation of the plant's dynamics matrix.
    pub fn true_uncertainty(&self) -> Result<UncertaintySpec> {
        let nominal = dc_motor_model(&self.motor())?;
        if self.uncertainty == 0.0 {
            return Ok(UncertaintySpec::identity(2));
        }
        UncertaintySpec::fractional(
            nominal.a(),
            &UncertaintySpec::dc_motor_mask(),
            &UncertaintySpec::dc_motor_beta_mask(),
            self.uncertainty,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcSection {
    pub enabled: bool,
    pub sample_time: f64,
    pub bits: u32,
    pub theta_fsr: f64,
    pub current_fsr: f64,
    pub theta_offset: f64,
    pub current_offset: f64,
    pub mode: QuantizerMode,
}

impl Default for AdcSection {
    fn default() -> Self {
        Self {
            enabled: true,
            sample_time: 0.2,
            bits: 10,
            theta_fsr: 200.0,
            current_fsr: 1000.0,
            theta_offset: 0.0,
            current_offset: 0.0,
            mode: QuantizerMode::Truncate,
        }
    }
}

impl AdcSection {
    pub fn channels(&self) -> Result<(AdcChannel, AdcChannel)> {
        let theta = AdcChannel::new("theta", self.bits, self.theta_fsr)?
            .with_offset(self.theta_offset)
            .with_mode(self.mode);
        let current = AdcChannel::new("I", self.bits, self.current_fsr)?
            .with_offset(self.current_offset)
            .with_mode(self.mode);
        theta.validate()?;
        current.validate()?;
        Ok((theta, current))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub order: Order,
    #[serde(default = "default_gains")]
    pub gains: [[f64; 2]; 2],
    #[serde(default = "default_true")]
    pub mu_u: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: [f64; 2],
    #[serde(default)]
    pub current_ref_next: CurrentRefNext,
}

fn default_gains() -> [[f64; 2]; 2] {
    [[0.5, 0.0], [0.0, 0.5]]
}

fn default_epsilon() -> [f64; 2] {
    [0.01, 0.01]
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            order: Order::First,
            gains: default_gains(),
            mu_u: true,
            epsilon: default_epsilon(),
            current_ref_next: CurrentRefNext::default(),
        }
    }
}

/// How `rho_beta` is derived when not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaScaling {
    /// `rho_beta_pq = rho_alpha_pq * a_pq^2`: both estimates move the entry
    /// `beta_hat a + alpha_hat` at the same rate.
    #[default]
    Entry,
    /// `rho_beta_pq = rho_alpha_pq`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptationSection {
    pub enabled: bool,
    pub rho_alpha: f64,
    /// Per-entry additive gains; overrides `rho_alpha` when present.
    pub rho_alpha_matrix: Option<[[f64; 2]; 2]>,
    /// Explicit multiplicative gain; overrides `beta_scaling` when present.
    pub rho_beta: Option<f64>,
    pub beta_scaling: BetaScaling,
}

impl Default for AdaptationSection {
    fn default() -> Self {
        Self {
            enabled: false,
            rho_alpha: 3.0e4,
            rho_alpha_matrix: None,
            rho_beta: None,
            beta_scaling: BetaScaling::Entry,
        }
    }
}

impl AdaptationSection {
    pub fn initial_state(&self, nominal_a: &DMatrix<f64>) -> Result<AdaptationState> {
        let rho_alpha = match self.rho_alpha_matrix {
            Some(m) => DMatrix::from_fn(2, 2, |p, q| m[p][q]),
            None => DMatrix::from_element(2, 2, self.rho_alpha),
        };
        let rho_beta = match (self.rho_beta, self.beta_scaling) {
            (Some(v), _) => DMatrix::from_element(2, 2, v),
            (None, BetaScaling::Uniform) => rho_alpha.clone(),
            (None, BetaScaling::Entry) => rho_alpha.zip_map(nominal_a, |r, a| r * a * a),
        };
        AdaptationState::new(
            nominal_a.clone(),
            rho_beta,
            rho_alpha,
            UncertaintySpec::dc_motor_beta_mask(),
            UncertaintySpec::dc_motor_mask(),
        )
    }
}

/// Piecewise-linear speed reference through `(t, theta_d)` knots. Repeated
/// times encode steps; the later knot wins from that instant on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSection {
    pub knots: Vec<[f64; 2]>,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            knots: vec![
                [0.0, 40.0],
                [20.0, 40.0],
                [30.0, 80.0],
                [55.0, 80.0],
                [55.0, 55.0],
                [80.0, 55.0],
                [90.0, 70.0],
                [100.0, 70.0],
            ],
        }
    }
}

impl ReferenceSection {
    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::invalid("reference", "needs at least one knot"));
        }
        if self.knots.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("reference", "non-finite knot"));
        }
        if self.knots.windows(2).any(|w| w[1][0] < w[0][0]) {
            return Err(Error::invalid("reference", "knot times must be sorted"));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = &self.knots;
        // Last knot with time <= t.
        let idx = k.partition_point(|p| p[0] <= t);
        if idx == 0 {
            return k[0][1];
        }
        if idx == k.len() {
            return k[k.len() - 1][1];
        }
        let (a, b) = (k[idx - 1], k[idx]);
        a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
    }

    /// Shortest interval between distinct knot times.
    pub fn shortest_feature(&self) -> Option<f64> {
        self.knots
            .windows(2)
            .map(|w| w[1][0] - w[0][0])
            .filter(|d| *d > 0.0)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSection {
    pub schedule: Vec<[f64; 2]>,
}

impl DisturbanceSection {
    pub fn profile(&self) -> Result<DisturbanceProfile> {
        DisturbanceProfile::new(self.schedule.iter().map(|p| (p[0], p[1])).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub duration: f64,
    pub dt: f64,
    pub divergence_bound: f64,
    /// Initial window excluded from tracking metrics [s].
    pub transient: f64,
    /// Reserved; default runs use no randomness.
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            duration: 100.0,
            dt: 0.001,
            divergence_bound: crate::plant::DEFAULT_DIVERGENCE_BOUND,
            transient: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub adc: AdcSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
    #[serde(default)]
    pub run: RunSection,
}

fn default_name() -> String {
    "scenario".into()
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: default_name(),
            plant: PlantSection::default(),
            adc: AdcSection::default(),
            controller: ControllerSection::default(),
            adaptation: AdaptationSection::default(),
            reference: ReferenceSection::default(),
            disturbance: DisturbanceSection::default(),
            run: RunSection::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn period(&self) -> f64 {
        self.adc.sample_time
    }

    pub fn cascade_config(&self) -> DcCascadeConfig {
        DcCascadeConfig {
            order: self.controller.order,
            gains: self.controller.gains,
            mu_u: self.controller.mu_u,
            epsilon: self.controller.epsilon,
            current_ref_next: self.controller.current_ref_next,
            params: self.plant.motor(),
            period: self.period(),
        }
    }

    /// Full configuration check: gains, ADC channels, reference, timing.
    pub fn validate(&self) -> Result<()> {
        self.plant.motor().validate()?;
        self.plant.true_uncertainty()?;
        if !self.plant.theta0.is_finite() || !self.plant.current0.is_finite() {
            return Err(Error::invalid("plant", "initial state must be finite"));
        }
        let t = self.period();
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid("adc.sample_time", format!("must be > 0, got {t}")));
        }
        self.adc.channels()?;
        self.cascade_config().validate()?;
        if self.adaptation.enabled {
            self.adaptation.initial_state(dc_motor_model(&self.plant.motor())?.a())?;
        }
        self.reference.validate()?;
        self.disturbance.profile()?;
        let r = &self.run;
        if !(r.duration > 0.0) {
            return Err(Error::invalid("run.duration", format!("must be > 0, got {}", r.duration)));
        }
        if !(r.dt > 0.0) || r.dt > t * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "run.dt",
                format!("must satisfy 0 < dt <= T ({t}), got {}", r.dt),
            ));
        }
        if !(r.divergence_bound > 0.0) {
            return Err(Error::invalid("run.divergence_bound", "must be > 0"));
        }
        if !(r.transient >= 0.0) {
            return Err(Error::invalid("run.transient", "must be >= 0"));
        }
        Ok(())
    }

    /// Non-fatal findings: currently the sampling-theorem check against the
    /// shortest reference feature.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(f) = self.reference.shortest_feature() {
            if self.period() > 0.5 * f {
                out.push(format!(
                    "sampling period {} s exceeds half the shortest reference feature ({} s); \
                     sampling frequency is below twice the reference's feature rate",
                    self.period(),
                    f
                ));
            }
        }
        out
    }
}
