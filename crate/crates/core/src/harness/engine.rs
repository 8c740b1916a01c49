//! Closed-loop DC motor simulation: ADC sampling, cascade controller, optional
//! parameter adaptation and a fine-step plant between samples.

use nalgebra::DVector;

use super::scenario::Scenario;
use super::trace::{SimTrace, TraceRow};
use crate::adapt::{lyapunov_delta, AdaptationState};
use crate::adc::AdcSampler;
use crate::error::{Error, Result};
use crate::plant::{apply_uncertainty, dc_motor_model, step_fine_bounded, PlantState};
use crate::smc::{DcCascadeController, DcInputs};

fn estimates(st: Option<&AdaptationState>) -> ([f64; 4], [f64; 4]) {
    match st {
        None => ([1.0; 4], [0.0; 4]),
        Some(st) => {
            let mut b = [0.0; 4];
            let mut a = [0.0; 4];
            for k in 0..4 {
                b[k] = st.beta_hat(k / 2, k % 2);
                a[k] = st.alpha_hat(k / 2, k % 2);
            }
            (b, a)
        }
    }
}

fn diverged(step: usize, time: f64, signal: &str, value: f64, bound: f64) -> Error {
    Error::Divergence {
        time,
        step,
        signal: signal.into(),
        value,
        bound,
    }
}

/// Runs a validated scenario to completion. Deterministic: identical scenarios
/// produce bitwise-identical traces.
pub fn run_scenario(scn: &Scenario) -> Result<SimTrace> {
    scn.validate()?;
    let params = scn.plant.motor();
    let nominal = dc_motor_model(&params)?;
    let truth = scn.plant.true_uncertainty()?;
    let true_model = apply_uncertainty(&nominal, &truth)?;
    let disturbance = scn.disturbance.profile()?;
    let period = scn.period();
    let steps = (scn.run.duration / period).round() as usize;
    let substeps = ((period / scn.run.dt).round() as usize).max(1);
    let dt = period / substeps as f64;
    let bound = scn.run.divergence_bound;

    let mut samplers = if scn.adc.enabled {
        let (a, b) = scn.adc.channels()?;
        Some((AdcSampler::new(a), AdcSampler::new(b)))
    } else {
        None
    };
    let mut ctrl = DcCascadeController::new(scn.cascade_config())?;
    let mut adaptation = if scn.adaptation.enabled {
        Some(scn.adaptation.initial_state(nominal.a())?)
    } else {
        None
    };
    let gmap = scn.cascade_config().surface_map();
    let surface_gain = [gmap[0][0], gmap[1][1]];

    let mut state = PlantState::new(DVector::from_vec(vec![scn.plant.theta0, scn.plant.current0]), 0.0);
    let mut rows: Vec<TraceRow> = Vec::with_capacity(steps + 1);
    // Surfaces and estimates of the previous step, for the Lyapunov difference.
    let mut pending: Option<(DVector<f64>, AdaptationState, AdaptationState)> = None;

    for i in 0..=steps {
        let t = i as f64 * period;
        let (theta_true, current_true) = (state.x[0], state.x[1]);
        let (theta_m, mu_theta, sat_theta, current_m, mu_current, sat_current, actual) = match samplers.as_mut() {
            Some((st, si)) => {
                let prev = (st.last_sample(), si.last_sample());
                let (tm, mt, tsat) = st.sample(theta_true);
                let (im, mi, isat) = si.sample(current_true);
                let actual = (
                    theta_true - prev.0.unwrap_or(tm),
                    current_true - prev.1.unwrap_or(im),
                );
                (tm, mt, tsat, im, mi, isat, actual)
            }
            None => (theta_true, 0.0, false, current_true, 0.0, false, (0.0, 0.0)),
        };

        let inputs = DcInputs {
            theta: theta_m,
            current: current_m,
            theta_d: scn.reference.at(t),
            theta_d_next: scn.reference.at(t + period),
            theta_d_next2: scn.reference.at(t + 2.0 * period),
            mu_theta,
            mu_current,
        };
        let out = ctrl.step(&inputs, adaptation.as_ref())?;
        let s = DVector::from_vec(vec![out.s1, out.s2]);

        if let (Some((s_prev, before, after)), Some(last)) = (pending.take(), rows.last_mut()) {
            let d = lyapunov_delta(&s_prev, &s, &before, &after, &truth, &surface_gain)?;
            last.lyap_delta = [d.delta[0], d.delta[1]];
        }
        if i == steps {
            // Final sample only closes the last Lyapunov difference.
            break;
        }

        let (beta_hat, alpha_hat) = estimates(adaptation.as_ref());
        let mut row = TraceRow {
            t,
            theta_ref: inputs.theta_d,
            theta_true,
            theta_meas: theta_m,
            current_true,
            current_meas: current_m,
            current_ref: out.current_ref,
            voltage: out.voltage,
            s1: out.s1,
            s2: out.s2,
            xi1: out.xi1,
            xi2: out.xi2,
            mu_theta,
            mu_current,
            mu_theta_actual: actual.0,
            mu_current_actual: actual.1,
            mu_current_ref: out.mu_current_ref,
            mu_voltage: out.mu_voltage,
            beta_hat,
            alpha_hat,
            disturbance: disturbance.fraction_at(t),
            sat_theta,
            sat_current,
            ..Default::default()
        };

        if let Some(st) = adaptation.as_mut() {
            let before = st.clone();
            let x = DVector::from_vec(vec![theta_m, current_m]);
            st.adapt_in_place(&s, &x, period)?;
            let v = crate::adapt::lyapunov_value(&s, &before, &truth);
            row.lyap = [v[0], v[1]];
            pending = Some((s.clone(), before, st.clone()));
        } else {
            let v = [0.5 * out.s1 * out.s1, 0.5 * out.s2 * out.s2];
            row.lyap = v;
            let id = AdaptationState::uniform(nominal.a().clone(), 1.0, 1.0)
                .with_masks(nalgebra::DMatrix::from_element(2, 2, false), nalgebra::DMatrix::from_element(2, 2, false));
            pending = Some((s.clone(), id.clone(), id));
        }
        row.lyap_predicted = [
            -(1.0 - surface_gain[0]) * out.s1 * out.s1,
            -(1.0 - surface_gain[1]) * out.s2 * out.s2,
        ];

        if !out.voltage.is_finite() || out.voltage.abs() > bound {
            return Err(diverged(i, t, "V", out.voltage, bound));
        }
        if !out.current_ref.is_finite() || out.current_ref.abs() > bound {
            return Err(diverged(i, t, "I_d", out.current_ref, bound));
        }
        rows.push(row);

        let u = DVector::from_element(1, out.voltage);
        for _ in 0..substeps {
            state = step_fine_bounded(&state, &true_model, &u, &disturbance, dt, bound).map_err(|e| match e {
                Error::Divergence { time, signal, value, bound, .. } => diverged(i, time, &signal, value, bound),
                other => other,
            })?;
        }
        // Keep sampling instants on the exact grid.
        state.t = (i + 1) as f64 * period;
    }

    Ok(SimTrace {
        name: scn.name.clone(),
        period,
        rows,
        warnings: scn.warnings(),
    })
}
