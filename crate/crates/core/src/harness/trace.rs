//! Per-step simulation records and their CSV form.

use std::io::Write;

use crate::error::Result;

/// One controller step. Values are those seen at the sampling instant `t`,
/// except `lyap_delta*`, which compare step `i` with step `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub t: f64,
    pub theta_ref: f64,
    pub theta_true: f64,
    pub theta_meas: f64,
    pub current_true: f64,
    pub current_meas: f64,
    pub current_ref: f64,
    pub voltage: f64,
    pub s1: f64,
    pub s2: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub mu_theta: f64,
    pub mu_current: f64,
    /// Drift of the true state since the previous held sample.
    pub mu_theta_actual: f64,
    pub mu_current_actual: f64,
    pub mu_current_ref: f64,
    pub mu_voltage: f64,
    /// Row-major `[11, 12, 21, 22]`.
    pub beta_hat: [f64; 4],
    pub alpha_hat: [f64; 4],
    pub lyap: [f64; 2],
    pub lyap_delta: [f64; 2],
    pub lyap_predicted: [f64; 2],
    pub disturbance: f64,
    pub sat_theta: bool,
    pub sat_current: bool,
}

pub const COLUMNS: &[&str] = &[
    "t",
    "theta_ref",
    "theta_true",
    "theta_meas",
    "I_true",
    "I_meas",
    "I_d",
    "V",
    "s1",
    "s2",
    "xi1",
    "xi2",
    "mu_theta",
    "mu_I",
    "mu_theta_actual",
    "mu_I_actual",
    "mu_Id",
    "mu_V",
    "beta_hat_11",
    "beta_hat_12",
    "beta_hat_21",
    "beta_hat_22",
    "alpha_hat_11",
    "alpha_hat_12",
    "alpha_hat_21",
    "alpha_hat_22",
    "lyap_1",
    "lyap_2",
    "lyap_delta_1",
    "lyap_delta_2",
    "lyap_pred_1",
    "lyap_pred_2",
    "disturbance",
    "sat_theta",
    "sat_I",
];

impl TraceRow {
    fn fields(&self) -> Vec<String> {
        let mut v: Vec<f64> = vec![
            self.t,
            self.theta_ref,
            self.theta_true,
            self.theta_meas,
            self.current_true,
            self.current_meas,
            self.current_ref,
            self.voltage,
            self.s1,
            self.s2,
            self.xi1,
            self.xi2,
            self.mu_theta,
            self.mu_current,
            self.mu_theta_actual,
            self.mu_current_actual,
            self.mu_current_ref,
            self.mu_voltage,
        ];
        v.extend(self.beta_hat);
        v.extend(self.alpha_hat);
        v.extend(self.lyap);
        v.extend(self.lyap_delta);
        v.extend(self.lyap_predicted);
        v.push(self.disturbance);
        let mut out: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        out.push(u8::from(self.sat_theta).to_string());
        out.push(u8::from(self.sat_current).to_string());
        out
    }

    pub fn tracking_error(&self) -> f64 {
        self.theta_true - self.theta_ref
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub name: String,
    pub period: f64,
    pub rows: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(COLUMNS)?;
        for r in &self.rows {
            wr.write_record(r.fields())?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_row_width() {
        assert_eq!(TraceRow::default().fields().len(), COLUMNS.len());
        let t = SimTrace {
            rows: vec![TraceRow::default(); 3],
            ..Default::default()
        };
        let text = t.to_csv_string().unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,theta_ref,theta_true"));
    }
}
