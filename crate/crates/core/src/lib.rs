//! Adaptive discrete sliding mode control under ADC imprecision.
//!
//! First- and second-order discrete sliding mode controllers for linear plants,
//! a predictor for the measurement uncertainty an ADC introduces and its
//! propagation to the control input, online estimation of multiplicative and
//! additive model errors, and a DC motor simulation harness.

pub mod adapt;
pub mod adc;
pub mod error;
pub mod harness;
pub mod plant;
pub mod smc;

pub use error::{Error, Result};
