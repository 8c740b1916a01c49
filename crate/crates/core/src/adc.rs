//! ADC path model: sample-and-hold with uniform quantization, the backward
//! difference measurement-uncertainty predictor, and its propagation onto the
//! control inputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::DcMotorParams;

/// Rounding law of the quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantizerMode {
    /// Output code is the floor of the input: error in `[0, step)` below the input.
    #[default]
    Truncate,
    /// Round to nearest level: error bounded by `step / 2`.
    Round,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdcChannel {
    pub name: String,
    pub bits: u32,
    pub fsr: f64,
    pub offset: f64,
    pub mode: QuantizerMode,
}

/// Result of one conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub value: f64,
    pub saturated: bool,
}

impl AdcChannel {
    pub fn new(name: impl Into<String>, bits: u32, fsr: f64) -> Result<Self> {
        let ch = Self {
            name: name.into(),
            bits,
            fsr,
            offset: 0.0,
            mode: QuantizerMode::default(),
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn with_mode(mut self, mode: QuantizerMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 62 {
            return Err(Error::invalid(
                format!("adc channel {}", self.name),
                format!("bit depth must be in 1..=62, got {}", self.bits),
            ));
        }
        if !(self.fsr > 0.0) || !self.fsr.is_finite() || !self.offset.is_finite() {
            return Err(Error::invalid(
                format!("adc channel {}", self.name),
                format!("full-scale range must be positive and finite, got {}", self.fsr),
            ));
        }
        Ok(())
    }

    /// Quantization step `FSR / 2^n`.
    pub fn step(&self) -> f64 {
        self.fsr / 2f64.powi(self.bits as i32)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.offset - 0.5 * self.fsr, self.offset + 0.5 * self.fsr)
    }

    pub fn convert(&self, x: f64) -> Conversion {
        let (lo, hi) = self.range();
        let saturated = x < lo || x > hi;
        let clamped = x.clamp(lo, hi);
        let delta = self.step();
        let code = (clamped - self.offset) / delta;
        // The nudge keeps exact levels (and their float images) on their own code.
        let k = match self.mode {
            QuantizerMode::Truncate => (code + 1e-9).floor(),
            QuantizerMode::Round => code.round(),
        };
        Conversion {
            value: (self.offset + k * delta).clamp(lo, hi),
            saturated,
        }
    }
}

/// Pure sample-and-quantize of a single reading.
pub fn sample_and_quantize(x_true: f64, channel: &AdcChannel) -> f64 {
    channel.convert(x_true).value
}

/// `x(i) - x(i-1) + step / 2`.
pub fn predict_measurement_uncertainty(x_i: f64, x_prev: f64, channel: &AdcChannel) -> f64 {
    x_i - x_prev + 0.5 * channel.step()
}

/// A channel together with its one-sample memory and saturation counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcSampler {
    channel: AdcChannel,
    last: Option<f64>,
    saturations: usize,
}

impl AdcSampler {
    pub fn new(channel: AdcChannel) -> Self {
        Self {
            channel,
            last: None,
            saturations: 0,
        }
    }

    pub fn channel(&self) -> &AdcChannel {
        &self.channel
    }

    /// Previous post-ADC sample, if any.
    pub fn last_sample(&self) -> Option<f64> {
        self.last
    }

    pub fn saturations(&self) -> usize {
        self.saturations
    }

    /// Converts `x_true` and returns `(measured, predicted uncertainty, saturated)`.
    /// The first sample has no predecessor and predicts `step / 2`.
    pub fn sample(&mut self, x_true: f64) -> (f64, f64, bool) {
        let conv = self.channel.convert(x_true);
        if conv.saturated {
            self.saturations += 1;
        }
        let prev = self.last.unwrap_or(conv.value);
        let mu = predict_measurement_uncertainty(conv.value, prev, &self.channel);
        self.last = Some(conv.value);
        (conv.value, mu, conv.saturated)
    }
}

/// Predicted per-state measurement uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementUncertainty(pub DVector<f64>);

/// Diagonal of the control-input uncertainty matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlUncertainty(pub DVector<f64>);

impl ControlUncertainty {
    pub fn zeros(h: usize) -> Self {
        Self(DVector::zeros(h))
    }
}

/// `B^-1 ((1/T)(G - I) - A) mu_x`, where `G` is the surface map enforced by the
/// control law (`P` for the first-order law, `-Phi` for the second-order law).
pub fn propagate_uncertainty(
    mu_x: &MeasurementUncertainty,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    period: f64,
    surface_map: &DMatrix<f64>,
) -> Result<ControlUncertainty> {
    let r = a.nrows();
    if mu_x.0.len() != r {
        return Err(Error::dim("mu_x", r, mu_x.0.len()));
    }
    if surface_map.shape() != (r, r) {
        return Err(Error::dim("gain matrix", format!("{r}x{r}"), format!("{:?}", surface_map.shape())));
    }
    if !(period > 0.0) {
        return Err(Error::invalid("sampling period", format!("must be > 0, got {period}")));
    }
    let b_inv = crate::smc::invert(b, "B")?;
    let m = (surface_map - DMatrix::identity(r, r)) / period - a;
    Ok(ControlUncertainty(b_inv * (m * &mu_x.0)))
}

/// Propagated uncertainty on the synthetic current reference and on the voltage
/// for the cascaded DC motor loops with diagonal gains.
pub fn dc_propagate_uncertainty(
    mu_theta: f64,
    mu_current: f64,
    rho1: f64,
    rho2: f64,
    params: &DcMotorParams,
    period: f64,
) -> (f64, f64) {
    dc_propagate_uncertainty_coupled(mu_theta, mu_current, [[rho1, 0.0], [0.0, rho2]], params, period)
}

/// As [`dc_propagate_uncertainty`] for a full 2x2 surface map; the off-diagonal
/// entries carry the cross-loop terms of the MIMO law.
pub fn dc_propagate_uncertainty_coupled(
    mu_theta: f64,
    mu_current: f64,
    map: [[f64; 2]; 2],
    p: &DcMotorParams,
    period: f64,
) -> (f64, f64) {
    let mu_id = p.inertia / (period * p.k_m) * ((map[0][0] - 1.0) * mu_theta + map[0][1] * mu_current)
        + p.k_f / p.k_m * mu_theta;
    let mu_v = p.inductance / period * (map[1][0] * mu_theta + (map[1][1] - 1.0) * mu_current)
        + p.k_b * mu_theta
        + p.resistance * mu_current;
    (mu_id, mu_v)
}
