//! Nominal and perturbed linear plants, Euler discretization and the fine-step
//! integrator used to emulate the continuous plant between controller samples.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default magnitude bound on any state entry before the integrator reports divergence.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;

fn all_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> bool {
    it.all(|v| v.is_finite())
}

/// Continuous-time affine linear model `x' = A x + B u + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    state_names: Vec<String>,
    input_names: Vec<String>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let r = a.nrows();
        if r == 0 || b.ncols() == 0 {
            return Err(Error::invalid("model", "order and input count must be >= 1"));
        }
        if a.ncols() != r {
            return Err(Error::dim("A", format!("{r}x{r}"), format!("{}x{}", r, a.ncols())));
        }
        if b.nrows() != r {
            return Err(Error::dim("B rows", r, b.nrows()));
        }
        if c.len() != r {
            return Err(Error::dim("c", r, c.len()));
        }
        if !all_finite(a.iter()) || !all_finite(b.iter()) || !all_finite(c.iter()) {
            return Err(Error::invalid("model", "non-finite entry"));
        }
        let state_names = (1..=r).map(|k| format!("x{k}")).collect();
        let input_names = (1..=b.ncols()).map(|k| format!("u{k}")).collect();
        Ok(Self {
            a,
            b,
            c,
            state_names,
            input_names,
        })
    }

    /// Model without an affine term.
    pub fn homogeneous(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let r = a.nrows();
        Self::new(a, b, DVector::zeros(r))
    }

    pub fn with_names(mut self, states: &[&str], inputs: &[&str]) -> Result<Self> {
        if states.len() != self.order() {
            return Err(Error::dim("state_names", self.order(), states.len()));
        }
        if inputs.len() != self.inputs() {
            return Err(Error::dim("input_names", self.inputs(), inputs.len()));
        }
        self.state_names = states.iter().map(|s| s.to_string()).collect();
        self.input_names = inputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// Derivative `A x + B u + scale * c`.
    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>, load_scale: f64) -> DVector<f64> {
        let mut dx = &self.a * x;
        dx.gemv(1.0, &self.b, u, 1.0);
        dx.axpy(load_scale, &self.c, 1.0);
        dx
    }
}

/// Forward-Euler discretization `x(i+1) = Ad x(i) + Bd u(i) + cd`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub cd: DVector<f64>,
    pub period: f64,
}

impl DiscreteModel {
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut next = &self.ad * x;
        next.gemv(1.0, &self.bd, u, 1.0);
        next += &self.cd;
        next
    }
}

pub fn euler_discretize(model: &LinearModel, period: f64) -> Result<DiscreteModel> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::invalid("sampling period", format!("must be > 0, got {period}")));
    }
    let r = model.order();
    Ok(DiscreteModel {
        ad: model.a() * period + DMatrix::identity(r, r),
        bd: model.b() * period,
        cd: model.c() * period,
        period,
    })
}

/// Physical constants of the armature-controlled DC motor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcMotorParams {
    /// Rotor inertia J [kg m^2].
    #[serde(rename = "J")]
    pub inertia: f64,
    /// Armature resistance R [ohm].
    #[serde(rename = "R")]
    pub resistance: f64,
    /// Armature inductance L [H].
    #[serde(rename = "L")]
    pub inductance: f64,
    /// Torque constant k_m [N m / A].
    pub k_m: f64,
    /// Viscous damping k_f [N m s].
    pub k_f: f64,
    /// Back-EMF constant k_b [V s / rad].
    pub k_b: f64,
    /// Nominal shaft torque Gamma [N m]. Enters the speed equation as `+Gamma / J`.
    pub load_torque: f64,
}

impl Default for DcMotorParams {
    fn default() -> Self {
        Self {
            inertia: 0.02,
            resistance: 2.0,
            inductance: 0.5,
            k_m: 0.015,
            k_f: 0.02,
            k_b: 0.015,
            load_torque: 0.1,
        }
    }
}

impl DcMotorParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("J", self.inertia),
            ("R", self.resistance),
            ("L", self.inductance),
            ("k_m", self.k_m),
            ("k_f", self.k_f),
            ("k_b", self.k_b),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    format!("motor parameter {name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !self.load_torque.is_finite() {
            return Err(Error::invalid("motor parameter load_torque", "must be finite"));
        }
        Ok(())
    }
}

/// State `[theta (rad/s), current (A)]`, input `[V]`.
pub fn dc_motor_model(p: &DcMotorParams) -> Result<LinearModel> {
    p.validate()?;
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[
            -p.k_f / p.inertia,
            p.k_m / p.inertia,
            -p.k_b / p.inductance,
            -p.resistance / p.inductance,
        ],
    );
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0 / p.inductance]);
    let c = DVector::from_row_slice(&[p.load_torque / p.inertia, 0.0]);
    LinearModel::new(a, b, c)?.with_names(&["theta", "I"], &["V"])
}

/// Per-entry multiplicative (`beta`) and additive (`alpha`) perturbation of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec {
    beta: DMatrix<f64>,
    alpha: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl UncertaintySpec {
    pub fn new(beta: DMatrix<f64>, alpha: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        let spec = Self { beta, alpha, mask };
        spec.validate()?;
        Ok(spec)
    }

    /// `beta = 1`, `alpha = 0`, nothing masked.
    pub fn identity(r: usize) -> Self {
        Self {
            beta: DMatrix::from_element(r, r, 1.0),
            alpha: DMatrix::zeros(r, r),
            mask: DMatrix::from_element(r, r, false),
        }
    }

    /// The seven DC motor entries treated as unknown: alpha on all four entries,
    /// beta on (1,1), (2,1), (2,2). (1,2) carries the known speed-loop input gain.
    pub fn dc_motor_mask() -> DMatrix<bool> {
        DMatrix::from_row_slice(2, 2, &[true, true, true, true])
    }

    /// Whether beta_pq is unknown for the DC motor.
    pub fn dc_motor_beta_mask() -> DMatrix<bool> {
        DMatrix::from_row_slice(2, 2, &[true, false, true, true])
    }

    /// Perturbation where every masked entry gets `beta = 1 - fraction` and
    /// `alpha = fraction * |a_pq|`. `beta_mask` restricts which entries carry a
    /// multiplicative term.
    pub fn fractional(
        nominal: &DMatrix<f64>,
        mask: &DMatrix<bool>,
        beta_mask: &DMatrix<bool>,
        fraction: f64,
    ) -> Result<Self> {
        let r = nominal.nrows();
        if mask.shape() != (r, r) || beta_mask.shape() != (r, r) {
            return Err(Error::dim("uncertainty mask", format!("{r}x{r}"), format!("{:?}", mask.shape())));
        }
        let mut beta = DMatrix::from_element(r, r, 1.0);
        let mut alpha = DMatrix::zeros(r, r);
        for p in 0..r {
            for q in 0..r {
                if mask[(p, q)] {
                    alpha[(p, q)] = fraction * nominal[(p, q)].abs();
                    if beta_mask[(p, q)] {
                        beta[(p, q)] = 1.0 - fraction;
                    }
                }
            }
        }
        Self::new(beta, alpha, mask.clone())
    }

    pub fn order(&self) -> usize {
        self.beta.nrows()
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.beta.nrows();
        if self.beta.shape() != (r, r) || self.alpha.shape() != (r, r) || self.mask.shape() != (r, r) {
            return Err(Error::dim(
                "uncertainty spec",
                format!("{r}x{r}"),
                format!("beta {:?}, alpha {:?}, mask {:?}", self.beta.shape(), self.alpha.shape(), self.mask.shape()),
            ));
        }
        for p in 0..r {
            for q in 0..r {
                let (b, a) = (self.beta[(p, q)], self.alpha[(p, q)]);
                if !b.is_finite() || !a.is_finite() {
                    return Err(Error::invalid("uncertainty", format!("non-finite entry at ({},{})", p + 1, q + 1)));
                }
                if !self.mask[(p, q)] && (b != 1.0 || a != 0.0) {
                    return Err(Error::invalid(
                        "uncertainty",
                        format!(
                            "entry ({},{}) is not masked but has beta = {b}, alpha = {a}",
                            p + 1,
                            q + 1
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `A'_pq = beta_pq a_pq + alpha_pq`; `B` and `c` are unchanged.
pub fn apply_uncertainty(model: &LinearModel, spec: &UncertaintySpec) -> Result<LinearModel> {
    spec.validate()?;
    let r = model.order();
    if spec.order() != r {
        return Err(Error::dim("uncertainty vs model", r, spec.order()));
    }
    let a = model.a().zip_zip_map(spec.beta(), spec.alpha(), |a, b, al| b * a + al);
    Ok(LinearModel {
        a,
        ..model.clone()
    })
}

/// Piecewise-constant load-torque schedule. Each `(start, fraction)` holds from
/// `start` until the next entry; before the first entry the fraction is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceProfile {
    schedule: Vec<(f64, f64)>,
}

impl DisturbanceProfile {
    pub fn new(schedule: Vec<(f64, f64)>) -> Result<Self> {
        for w in schedule.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(
                    "disturbance schedule",
                    format!("times must be strictly increasing ({} then {})", w[0].0, w[1].0),
                ));
            }
        }
        if schedule.iter().any(|(t, f)| !t.is_finite() || !f.is_finite()) {
            return Err(Error::invalid("disturbance schedule", "non-finite entry"));
        }
        Ok(Self { schedule })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn schedule(&self) -> &[(f64, f64)] {
        &self.schedule
    }

    pub fn fraction_at(&self, t: f64) -> f64 {
        self.schedule
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(0.0, |&(_, f)| f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub t: f64,
}

impl PlantState {
    pub fn new(x: DVector<f64>, t: f64) -> Self {
        Self { x, t }
    }
}

/// One explicit-Euler substep of length `dt` with zero-order-held `u`; the
/// affine term is scaled by `1 + fraction` of the disturbance active at `state.t`.
pub fn step_fine(
    state: &PlantState,
    model: &LinearModel,
    u: &DVector<f64>,
    disturbance: &DisturbanceProfile,
    dt: f64,
) -> Result<PlantState> {
    step_fine_bounded(state, model, u, disturbance, dt, DEFAULT_DIVERGENCE_BOUND)
}

pub fn step_fine_bounded(
    state: &PlantState,
    model: &LinearModel,
    u: &DVector<f64>,
    disturbance: &DisturbanceProfile,
    dt: f64,
    bound: f64,
) -> Result<PlantState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("fine step", format!("must be > 0, got {dt}")));
    }
    if state.x.len() != model.order() {
        return Err(Error::dim("plant state", model.order(), state.x.len()));
    }
    if u.len() != model.inputs() {
        return Err(Error::dim("plant input", model.inputs(), u.len()));
    }
    if !all_finite(u.iter()) {
        return Err(Error::invalid("plant input", "non-finite control"));
    }
    let scale = 1.0 + disturbance.fraction_at(state.t);
    let mut x = state.x.clone();
    x.axpy(dt, &model.derivative(&state.x, u, scale), 1.0);
    let t = state.t + dt;
    for (k, v) in x.iter().enumerate() {
        if !v.is_finite() || v.abs() > bound {
            return Err(Error::Divergence {
                time: t,
                step: 0,
                signal: model.state_names()[k].clone(),
                value: *v,
                bound,
            });
        }
    }
    Ok(PlantState { x, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(a: f64, b: f64, c: f64) -> LinearModel {
        LinearModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DVector::from_element(1, c),
        )
        .unwrap()
    }

    #[test]
    fn appendix_motor_matrices() {
        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        let expect_a = [-1.0, 0.75, -0.03, -4.0];
        for (got, want) in m.a().transpose().iter().zip(expect_a) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert_relative_eq!(m.b()[(0, 0)], 0.0);
        assert_relative_eq!(m.b()[(1, 0)], 2.0);
        assert_relative_eq!(m.c()[0], 5.0, epsilon = 1e-12);
        assert_eq!(m.state_names(), ["theta", "I"]);
    }

    #[test]
    fn unit_motor_matrices() {
        let p = DcMotorParams {
            inertia: 1.0,
            resistance: 1.0,
            inductance: 1.0,
            k_m: 1.0,
            k_f: 1.0,
            k_b: 1.0,
            load_torque: 0.0,
        };
        let m = dc_motor_model(&p).unwrap();
        assert_eq!(m.a().as_slice(), &[-1.0, -1.0, 1.0, -1.0]);
        assert_eq!(m.b().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn zero_inductance_rejected() {
        let p = DcMotorParams {
            inductance: 0.0,
            ..Default::default()
        };
        assert!(matches!(dc_motor_model(&p), Err(Error::Invalid { .. })));
    }

    #[test]
    fn discretize_examples() {
        let d = euler_discretize(&scalar(0.0, 1.0, 0.0), 0.1).unwrap();
        assert_eq!(d.ad[(0, 0)], 1.0);
        assert_relative_eq!(d.bd[(0, 0)], 0.1);

        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        let d = euler_discretize(&m, 0.2).unwrap();
        let want = [0.8, 0.15, -0.006, 0.2];
        for (got, want) in d.ad.transpose().iter().zip(want) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert!(euler_discretize(&m, 0.0).is_err());
        assert!(euler_discretize(&m, -1.0).is_err());
    }

    #[test]
    fn uncertainty_entry() {
        let mask = DMatrix::from_element(1, 1, true);
        let spec = UncertaintySpec::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.1),
            mask,
        )
        .unwrap();
        let m = apply_uncertainty(&scalar(-1.0, 1.0, 0.0), &spec).unwrap();
        assert_relative_eq!(m.a()[(0, 0)], -0.4, epsilon = 1e-15);
    }

    #[test]
    fn identity_uncertainty_is_bitwise_identity() {
        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        let out = apply_uncertainty(&m, &UncertaintySpec::identity(2)).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn unmasked_perturbation_rejected() {
        let mut mask = DMatrix::from_element(2, 2, true);
        mask[(0, 1)] = false;
        let mut beta = DMatrix::from_element(2, 2, 1.0);
        beta[(0, 1)] = 0.9;
        let err = UncertaintySpec::new(beta, DMatrix::zeros(2, 2), mask).unwrap_err();
        assert!(err.to_string().contains("(1,2)"), "{err}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        assert!(matches!(
            apply_uncertainty(&m, &UncertaintySpec::identity(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn fractional_dc_perturbation() {
        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        let spec = UncertaintySpec::fractional(
            m.a(),
            &UncertaintySpec::dc_motor_mask(),
            &UncertaintySpec::dc_motor_beta_mask(),
            0.5,
        )
        .unwrap();
        assert_eq!(spec.beta()[(0, 1)], 1.0);
        assert_eq!(spec.beta()[(0, 0)], 0.5);
        assert_relative_eq!(spec.alpha()[(1, 1)], 2.0);
        assert_relative_eq!(spec.alpha()[(0, 1)], 0.375);
    }

    #[test]
    fn fine_step_examples() {
        let zero = LinearModel::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1), DVector::zeros(2)).unwrap();
        let s = PlantState::new(DVector::from_row_slice(&[3.0, -2.0]), 0.0);
        let next = step_fine(&s, &zero, &DVector::from_element(1, 7.0), &DisturbanceProfile::none(), 0.01).unwrap();
        assert_eq!(next.x, s.x);

        let m = scalar(-1.0, 1.0, 0.0);
        let s = PlantState::new(DVector::from_element(1, 1.0), 0.0);
        let next = step_fine(&s, &m, &DVector::zeros(1), &DisturbanceProfile::none(), 0.001).unwrap();
        assert_relative_eq!(next.x[0], 0.999, epsilon = 1e-15);
        assert_relative_eq!(next.t, 0.001);
    }

    #[test]
    fn disturbance_scales_affine_term() {
        let m = LinearModel::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1), DVector::from_row_slice(&[5.0, 0.0]))
            .unwrap();
        let dist = DisturbanceProfile::new(vec![(0.0, 0.2)]).unwrap();
        let s = PlantState::new(DVector::zeros(2), 0.5);
        let next = step_fine(&s, &m, &DVector::zeros(1), &dist, 1.0).unwrap();
        assert_relative_eq!(next.x[0], 6.0, epsilon = 1e-12);
        assert_eq!(next.x[1], 0.0);
    }

    #[test]
    fn disturbance_schedule_lookup() {
        let d = DisturbanceProfile::new(vec![(10.0, 0.2), (20.0, -0.1), (30.0, 0.0)]).unwrap();
        assert_eq!(d.fraction_at(5.0), 0.0);
        assert_eq!(d.fraction_at(10.0), 0.2);
        assert_eq!(d.fraction_at(25.0), -0.1);
        assert_eq!(d.fraction_at(99.0), 0.0);
        assert!(DisturbanceProfile::new(vec![(1.0, 0.1), (1.0, 0.2)]).is_err());
        assert_eq!(DisturbanceProfile::none().fraction_at(3.0), 0.0);
    }

    #[test]
    fn divergence_reports_time() {
        let m = scalar(1e9, 0.0, 0.0);
        let s = PlantState::new(DVector::from_element(1, 1.0), 2.0);
        match step_fine(&s, &m, &DVector::zeros(1), &DisturbanceProfile::none(), 0.01) {
            Err(Error::Divergence { time, .. }) => assert_relative_eq!(time, 2.01),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn single_substep_matches_discrete_map() {
        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        let d = euler_discretize(&m, 0.2).unwrap();
        let x = DVector::from_row_slice(&[12.0, 3.5]);
        let u = DVector::from_element(1, 24.0);
        let fine = step_fine(&PlantState::new(x.clone(), 0.0), &m, &u, &DisturbanceProfile::none(), 0.2).unwrap();
        let disc = d.step(&x, &u);
        for k in 0..2 {
            assert_relative_eq!(fine.x[k], disc[k], max_relative = 1e-14);
        }
    }

    #[test]
    fn fine_step_converges_with_dt() {
        // Constant input, 100 s horizon: halving dt from 1 ms must move the endpoint < 0.1 %.
        let m = dc_motor_model(&DcMotorParams::default()).unwrap();
        let u = DVector::from_element(1, 60.0);
        let run = |dt: f64| {
            let n = (100.0 / dt).round() as usize;
            let mut s = PlantState::new(DVector::zeros(2), 0.0);
            for _ in 0..n {
                s = step_fine(&s, &m, &u, &DisturbanceProfile::none(), dt).unwrap();
            }
            s.x
        };
        let coarse = run(1e-3);
        let fine = run(5e-4);
        for k in 0..2 {
            assert!(((coarse[k] - fine[k]) / fine[k]).abs() < 1e-3);
        }
    }
}
