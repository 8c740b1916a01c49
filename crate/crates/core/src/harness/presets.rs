//! Built-in experiment presets.

use std::fmt;
use std::str::FromStr;

use super::scenario::Scenario;
use super::sweep::{parse_list, Axis, ControllerVariant};
use crate::error::{Error, Result};
use crate::smc::Order;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            "fig7" => Ok(Figure::Fig7),
            _ => Err(Error::invalid("preset", format!("unknown preset {s:?}"))),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        };
        f.write_str(s)
    }
}

/// What a preset runs: a sweep summary or a single trace.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Sweep {
        base: Scenario,
        axis: Axis,
        values: Vec<String>,
        controllers: Vec<ControllerVariant>,
    },
    Trace(Scenario),
}

/// Torque steps of up to 20% of the nominal load.
pub const TORQUE_STEPS: [[f64; 2]; 4] = [[25.0, 0.2], [45.0, 0.0], [65.0, 0.2], [85.0, 0.0]];

fn variants(list: &str) -> Vec<ControllerVariant> {
    parse_list(list).expect("built-in variant list parses")
}

fn strings(list: &str) -> Vec<String> {
    parse_list(list).expect("built-in value list parses")
}

pub fn preset(fig: Figure) -> Preset {
    let mut base = Scenario::default();
    base.name = fig.to_string();
    match fig {
        Figure::Fig3 => {
            base.adc.bits = 16;
            Preset::Sweep {
                base,
                axis: Axis::SamplingTime,
                values: strings("0.2,0.4,0.8"),
                controllers: variants("1siso,2siso,2mimo"),
            }
        }
        Figure::Fig4 => Preset::Sweep {
            base,
            axis: Axis::Bits,
            values: strings("16,10,4"),
            controllers: variants("1siso,2siso,2mimo"),
        },
        Figure::Fig5 => {
            base.disturbance.schedule = TORQUE_STEPS.to_vec();
            Preset::Sweep {
                base,
                axis: Axis::SamplingTime,
                values: strings("0.2,0.8"),
                controllers: variants("2siso,2mimo"),
            }
        }
        Figure::Fig6 => {
            base.adc.bits = 4;
            Preset::Sweep {
                base,
                axis: Axis::SamplingTime,
                values: strings("1.0"),
                controllers: variants("2siso+mu,2siso,2mimo+mu,2mimo"),
            }
        }
        Figure::Fig7 => {
            base.plant.uncertainty = 0.5;
            base.controller.order = Order::First;
            base.adaptation.enabled = true;
            Preset::Trace(base)
        }
    }
}
