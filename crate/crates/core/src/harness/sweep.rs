//! Parameter sweeps. With the `parallel` feature runs are distributed with
//! rayon; results come back in input order either way.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use super::engine::run_scenario;
use super::metrics::{improvement, metrics, window_metrics, Metrics};
use super::scenario::Scenario;
use super::trace::SimTrace;
use crate::error::{Error, Result};
use crate::smc::Order;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    SamplingTime,
    Bits,
    Controller,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling_time" => Ok(Axis::SamplingTime),
            "bits" => Ok(Axis::Bits),
            "controller" => Ok(Axis::Controller),
            _ => Err(Error::invalid("sweep axis", format!("unknown axis {s:?}"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::SamplingTime => "sampling_time",
            Axis::Bits => "bits",
            Axis::Controller => "controller",
        })
    }
}

/// A named controller configuration: `<order><structure>[+mu]`, e.g. `1siso`,
/// `2mimo`, `2siso+mu`. Without the suffix the base law runs (no switching
/// term); `+mu` adds the predicted control-uncertainty switching term.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerVariant {
    pub label: String,
    pub order: Order,
    pub gains: [[f64; 2]; 2],
    pub mu_u: bool,
}

pub const DIAGONAL_GAINS: [[f64; 2]; 2] = [[0.5, 0.0], [0.0, 0.5]];
pub const COUPLED_GAINS: [[f64; 2]; 2] = [[0.5, 0.05], [0.05, 0.5]];

impl FromStr for ControllerVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (body, mu_u) = match s.strip_suffix("+mu") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let (order, gains) = match body {
            "1siso" => (Order::First, DIAGONAL_GAINS),
            "1mimo" => (Order::First, COUPLED_GAINS),
            "2siso" => (Order::Second, DIAGONAL_GAINS),
            "2mimo" => (Order::Second, COUPLED_GAINS),
            _ => {
                return Err(Error::invalid(
                    "controller variant",
                    format!("{s:?}; expected 1siso, 1mimo, 2siso or 2mimo, optionally with +mu"),
                ))
            }
        };
        Ok(Self {
            label: s.to_string(),
            order,
            gains,
            mu_u,
        })
    }
}

impl ControllerVariant {
    pub fn apply(&self, scn: &mut Scenario) {
        scn.controller.order = self.order;
        scn.controller.gains = self.gains;
        scn.controller.mu_u = self.mu_u;
    }

    /// Variant describing the scenario's own controller.
    pub fn from_scenario(scn: &Scenario) -> Self {
        let c = &scn.controller;
        Self {
            label: "scenario".into(),
            order: c.order,
            gains: c.gains,
            mu_u: c.mu_u,
        }
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|e| Error::invalid("list value", format!("{v:?}: {e}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: String,
    pub controller: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: String,
    pub controller: String,
    pub metrics: Metrics,
    /// Improvement against the first controller at the same axis value.
    pub improvement: Option<f64>,
    /// Metrics restricted to the disturbance window, when a disturbance is scheduled.
    pub disturbance_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            self.axis.to_string().as_str(),
            "controller",
            "mean_abs_error",
            "rms_error",
            "max_abs_error",
            "max_overshoot",
            "settled_fraction",
            "improvement",
            "disturbance_mean_abs_error",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            let m = &r.metrics;
            wr.write_record([
                r.axis_value.clone(),
                r.controller.clone(),
                m.mean_abs_error.to_string(),
                m.rms_error.to_string(),
                m.max_abs_error.to_string(),
                m.max_overshoot.to_string(),
                m.settled_fraction.to_string(),
                opt(r.improvement),
                opt(r.disturbance_error),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn find(&self, axis_value: &str, controller: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.axis_value == axis_value && r.controller == controller)
    }
}

/// Expands the sweep grid. For the `controller` axis the values are variant
/// labels and `controllers` is ignored; otherwise every value is crossed with
/// every controller (or the scenario's own when the list is empty).
pub fn sweep_points(base: &Scenario, axis: Axis, values: &[String], controllers: &[ControllerVariant]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep values", "empty list"));
    }
    let mut out = Vec::new();
    if axis == Axis::Controller {
        for v in values {
            let cv: ControllerVariant = v.parse()?;
            let mut scn = base.clone();
            cv.apply(&mut scn);
            scn.name = format!("{}/{}", base.name, cv.label);
            out.push(SweepPoint {
                axis_value: v.clone(),
                controller: cv.label,
                scenario: scn,
            });
        }
        return Ok(out);
    }
    let own = [ControllerVariant::from_scenario(base)];
    let controllers = if controllers.is_empty() { &own[..] } else { controllers };
    for v in values {
        let mut scn = base.clone();
        match axis {
            Axis::SamplingTime => {
                let t: f64 = v.parse().map_err(|_| Error::invalid("sampling_time", format!("{v:?} is not a number")))?;
                scn.adc.sample_time = t;
                scn.run.dt = scn.run.dt.min(t);
            }
            Axis::Bits => {
                scn.adc.bits = v.parse().map_err(|_| Error::invalid("bits", format!("{v:?} is not an integer")))?;
            }
            Axis::Controller => unreachable!(),
        }
        for cv in controllers {
            let mut s = scn.clone();
            cv.apply(&mut s);
            s.name = format!("{}/{}={}/{}", base.name, axis, v, cv.label);
            s.validate()?;
            out.push(SweepPoint {
                axis_value: v.clone(),
                controller: cv.label.clone(),
                scenario: s,
            });
        }
    }
    Ok(out)
}

/// Runs every scenario. Output order matches input order.
pub fn run_all(scenarios: &[Scenario]) -> Vec<Result<SimTrace>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        scenarios.par_iter().map(run_scenario).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        scenarios.iter().map(run_scenario).collect()
    }
}

/// Sequential variant of [`run_all`], available regardless of features.
pub fn run_all_sequential(scenarios: &[Scenario]) -> Vec<Result<SimTrace>> {
    scenarios.iter().map(run_scenario).collect()
}

fn disturbance_window(scn: &Scenario) -> Option<(f64, f64)> {
    let first = scn.disturbance.schedule.iter().find(|p| p[1] != 0.0)?;
    Some((first[0], f64::INFINITY))
}

/// Summarizes already-computed traces of the given points.
pub fn summarize(axis: Axis, points: &[SweepPoint], traces: &[SimTrace]) -> Result<SweepSummary> {
    let mut rows = Vec::with_capacity(points.len());
    for (k, (p, tr)) in points.iter().zip(traces).enumerate() {
        let transient = p.scenario.run.transient;
        // Baseline: first point that shares this axis value.
        let base = points
            .iter()
            .position(|q| q.axis_value == p.axis_value)
            .unwrap_or(k);
        let improvement = if axis == Axis::Controller {
            improvement(tr, &traces[0], transient)?
        } else {
            improvement(tr, &traces[base], transient)?
        };
        let disturbance_error = match disturbance_window(&p.scenario) {
            Some((t0, t1)) => Some(window_metrics(tr, t0, t1)?.mean_abs_error),
            None => None,
        };
        rows.push(SweepRow {
            axis_value: p.axis_value.clone(),
            controller: p.controller.clone(),
            metrics: metrics(tr, transient)?,
            improvement,
            disturbance_error,
        });
    }
    Ok(SweepSummary { axis, rows })
}

/// Runs the sweep. Any failed run (configuration or divergence) fails the sweep
/// with that run's error.
pub fn run_sweep(base: &Scenario, axis: Axis, values: &[String], controllers: &[ControllerVariant]) -> Result<SweepSummary> {
    let points = sweep_points(base, axis, values, controllers)?;
    let scenarios: Vec<Scenario> = points.iter().map(|p| p.scenario.clone()).collect();
    let traces = run_all(&scenarios).into_iter().collect::<Result<Vec<_>>>()?;
    summarize(axis, &points, &traces)
}
