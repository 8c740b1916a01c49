//! Discrete sliding mode control laws.
//!
//! Every law here is solved from a target surface map `S(i+1) = G S(i)` on the
//! Euler-discretized model: `G = P` for the first-order reaching law and
//! `G = -Phi` for the second-order law (which makes `Xi(i) = S(i+1) + Phi S(i)`
//! vanish). The robustified variants subtract `|mu_U| * sat(.)` per input.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adapt::AdaptationState;
use crate::adc::{dc_propagate_uncertainty_coupled, ControlUncertainty};
use crate::error::{Error, Result};
use crate::plant::{DcMotorParams, LinearModel};

/// Relative tolerance used for symmetry and diagonality checks.
const STRUCTURE_TOL: f64 = 1e-12;

/// Boundary-layer saturation `clamp(z / epsilon, -1, 1)`.
pub fn sat(z: f64, epsilon: f64) -> f64 {
    (z / epsilon).clamp(-1.0, 1.0)
}

pub(crate) fn invert(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Singular { name: name.into() });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let inv = m.clone().try_inverse().ok_or_else(|| Error::Singular { name: name.into() })?;
    // Reject numerically singular matrices whose inverse is all noise.
    if !inv.iter().all(|v| v.is_finite()) || inv.amax() * scale > 1e13 {
        return Err(Error::Singular { name: name.into() });
    }
    Ok(inv)
}

/// Whether the gain matrix is treated as decoupled (SISO) or coupled (MIMO).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Siso,
    Mimo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderGains {
    pub p: DMatrix<f64>,
    pub structure: Structure,
}

impl FirstOrderGains {
    pub fn diagonal(rho: &[f64]) -> Self {
        Self {
            p: DMatrix::from_diagonal(&DVector::from_row_slice(rho)),
            structure: Structure::Siso,
        }
    }

    pub fn coupled(p: DMatrix<f64>) -> Self {
        Self {
            p,
            structure: Structure::Mimo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderGains {
    pub phi: DMatrix<f64>,
}

impl SecondOrderGains {
    pub fn diagonal(phi: &[f64]) -> Self {
        Self {
            phi: DMatrix::from_diagonal(&DVector::from_row_slice(phi)),
        }
    }

    pub fn new(phi: DMatrix<f64>) -> Self {
        Self { phi }
    }

    /// The second-order law is SISO when Phi is diagonal.
    pub fn structure(&self) -> Structure {
        if is_diagonal(&self.phi) {
            Structure::Siso
        } else {
            Structure::Mimo
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gains {
    First(FirstOrderGains),
    Second(SecondOrderGains),
}

impl Gains {
    pub fn order(&self) -> usize {
        match self {
            Gains::First(g) => g.p.nrows(),
            Gains::Second(g) => g.phi.nrows(),
        }
    }

    /// `G` in `S(i+1) = G S(i)`.
    pub fn surface_map(&self) -> DMatrix<f64> {
        match self {
            Gains::First(g) => g.p.clone(),
            Gains::Second(g) => -&g.phi,
        }
    }
}

/// Outcome of [`validate_gains`].
#[derive(Debug, Clone, PartialEq)]
pub struct GainDiagnostics {
    pub spectral_radius: f64,
    pub asymmetry: f64,
    pub min_eigenvalue: Option<f64>,
    pub violations: Vec<String>,
}

impl GainDiagnostics {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.ok() {
            Ok(())
        } else {
            Err(Error::Gains(self.violations.join("; ")))
        }
    }
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let tol = STRUCTURE_TOL * m.amax().max(1.0);
    m.iter()
        .enumerate()
        .all(|(k, v)| k % m.nrows() == k / m.nrows() || v.abs() <= tol)
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn validate_gains(gains: &Gains) -> GainDiagnostics {
    let m = match gains {
        Gains::First(g) => &g.p,
        Gains::Second(g) => &g.phi,
    };
    let mut violations = Vec::new();
    if !m.is_square() || m.nrows() == 0 {
        violations.push(format!("gain matrix must be square and non-empty, got {:?}", m.shape()));
        return GainDiagnostics {
            spectral_radius: f64::NAN,
            asymmetry: f64::NAN,
            min_eigenvalue: None,
            violations,
        };
    }
    if !m.iter().all(|v| v.is_finite()) {
        violations.push("gain matrix has non-finite entries".into());
        return GainDiagnostics {
            spectral_radius: f64::NAN,
            asymmetry: f64::NAN,
            min_eigenvalue: None,
            violations,
        };
    }
    let asymmetry = (m - m.transpose()).norm();
    let rho = spectral_radius(m);
    let mut min_eigenvalue = None;
    match gains {
        Gains::First(g) => match g.structure {
            Structure::Siso => {
                if !is_diagonal(&g.p) {
                    violations.push("SISO gain matrix P must be diagonal".into());
                }
                for (k, v) in g.p.diagonal().iter().enumerate() {
                    if !(*v > 0.0 && *v < 1.0) {
                        violations.push(format!("rho_{} = {v} outside (0, 1)", k + 1));
                    }
                }
            }
            Structure::Mimo => {
                if rho >= 1.0 {
                    violations.push(format!(
                        "eigenvalues of P must lie inside the unit circle (spectral radius {rho:.6})"
                    ));
                }
            }
        },
        Gains::Second(g) => {
            let tol = STRUCTURE_TOL * g.phi.amax().max(1.0);
            if asymmetry > tol {
                violations.push(format!("Phi must be symmetric (asymmetry norm {asymmetry:.3e})"));
            } else {
                let sym = (&g.phi + g.phi.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                let (kmin, lmin) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
                let lmax = eig.eigenvalues.max();
                min_eigenvalue = Some(lmin);
                if lmin <= 0.0 {
                    let w = eig.eigenvectors.column(kmin);
                    violations.push(format!(
                        "Phi must be positive definite (eigenvalue {lmin:.6} with eigenvector {:?})",
                        w.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>()
                    ));
                }
                if lmax >= 1.0 {
                    violations.push(format!("Phi eigenvalues must be < 1 for contraction (max {lmax:.6})"));
                }
            }
        }
    }
    GainDiagnostics {
        spectral_radius: rho,
        asymmetry,
        min_eigenvalue,
        violations,
    }
}

/// Model data the square-input laws need: `A`, `B^-1`, the affine term and `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareModel {
    pub a: DMatrix<f64>,
    pub b_inv: DMatrix<f64>,
    pub c: DVector<f64>,
    pub period: f64,
}

impl SquareModel {
    pub fn new(model: &LinearModel, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::invalid("sampling period", format!("must be > 0, got {period}")));
        }
        if model.inputs() != model.order() {
            return Err(Error::dim("B (square input map)", model.order(), model.inputs()));
        }
        Ok(Self {
            a: model.a().clone(),
            b_inv: invert(model.b(), "B")?,
            c: model.c().clone(),
            period,
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

/// Boundary-layer widths, one per surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SatConfig {
    pub epsilon: Vec<f64>,
}

impl SatConfig {
    pub fn uniform(r: usize, epsilon: f64) -> Self {
        Self {
            epsilon: vec![epsilon; r],
        }
    }

    pub fn validate(&self, r: usize) -> Result<()> {
        if self.epsilon.len() != r {
            return Err(Error::dim("boundary layer", r, self.epsilon.len()));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::invalid("boundary layer", format!("epsilon must be > 0, got {e}")));
        }
        Ok(())
    }
}

fn check_len(ctx: &str, v: &DVector<f64>, r: usize) -> Result<()> {
    if v.len() != r {
        return Err(Error::dim(ctx, r, v.len()));
    }
    Ok(())
}

/// `B^-1 ((1/T)[G (x - x_d) + x_d(i+1) - x] - A x - c)`.
fn reaching_law(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    a: &DMatrix<f64>,
    model: &SquareModel,
    map: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let r = model.order();
    check_len("x", x, r)?;
    check_len("x_d", x_d, r)?;
    check_len("x_d(i+1)", x_d_next, r)?;
    if map.shape() != (r, r) {
        return Err(Error::dim("gain matrix", format!("{r}x{r}"), format!("{:?}", map.shape())));
    }
    let s = x - x_d;
    let inner = (map * s + x_d_next - x) / model.period - a * x - &model.c;
    Ok(&model.b_inv * inner)
}

fn subtract_switching(
    mut u: DVector<f64>,
    mu_u: &ControlUncertainty,
    arg: &DVector<f64>,
    sat_cfg: &SatConfig,
) -> Result<DVector<f64>> {
    let r = u.len();
    check_len("mu_U", &mu_u.0, r)?;
    check_len("switching argument", arg, r)?;
    sat_cfg.validate(r)?;
    for k in 0..r {
        u[k] -= mu_u.0[k].abs() * sat(arg[k], sat_cfg.epsilon[k]);
    }
    Ok(u)
}

fn checked(gains: Gains) -> Result<Gains> {
    validate_gains(&gains).into_result()?;
    Ok(gains)
}

pub fn first_order_control(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    model: &SquareModel,
    gains: &FirstOrderGains,
) -> Result<DVector<f64>> {
    checked(Gains::First(gains.clone()))?;
    reaching_law(x, x_d, x_d_next, &model.a, model, &gains.p)
}

pub fn first_order_control_modified(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    model: &SquareModel,
    gains: &FirstOrderGains,
    mu_u: &ControlUncertainty,
    s: &DVector<f64>,
    sat_cfg: &SatConfig,
) -> Result<DVector<f64>> {
    let u = first_order_control(x, x_d, x_d_next, model, gains)?;
    subtract_switching(u, mu_u, s, sat_cfg)
}

/// First-order law on the adapted model `A_hat = beta_hat .* A + alpha_hat`.
pub fn adaptive_first_order_control(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    model: &SquareModel,
    gains: &FirstOrderGains,
    adaptation: &AdaptationState,
    mu_u: &ControlUncertainty,
    sat_cfg: &SatConfig,
) -> Result<DVector<f64>> {
    checked(Gains::First(gains.clone()))?;
    let a_hat = adaptation.estimated_a();
    if a_hat.shape() != model.a.shape() {
        return Err(Error::dim("adaptation state", model.order(), a_hat.nrows()));
    }
    let u = reaching_law(x, x_d, x_d_next, &a_hat, model, &gains.p)?;
    subtract_switching(u, mu_u, &(x - x_d), sat_cfg)
}

/// `Xi(i-1) = S(i) + Phi S(i-1)`.
pub fn second_order_surface(s: &DVector<f64>, s_prev: &DVector<f64>, gains: &SecondOrderGains) -> DVector<f64> {
    s + &gains.phi * s_prev
}

pub fn second_order_control(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    model: &SquareModel,
    gains: &SecondOrderGains,
) -> Result<DVector<f64>> {
    checked(Gains::Second(gains.clone()))?;
    reaching_law(x, x_d, x_d_next, &model.a, model, &-&gains.phi)
}

pub fn second_order_control_modified(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    model: &SquareModel,
    gains: &SecondOrderGains,
    mu_u: &ControlUncertainty,
    xi_prev: &DVector<f64>,
    sat_cfg: &SatConfig,
) -> Result<DVector<f64>> {
    let u = second_order_control(x, x_d, x_d_next, model, gains)?;
    subtract_switching(u, mu_u, xi_prev, sat_cfg)
}

/// Second-order law on the adapted model, switching on `xi_prev`.
pub fn adaptive_second_order_control(
    x: &DVector<f64>,
    x_d: &DVector<f64>,
    x_d_next: &DVector<f64>,
    model: &SquareModel,
    gains: &SecondOrderGains,
    adaptation: &AdaptationState,
    mu_u: &ControlUncertainty,
    xi_prev: &DVector<f64>,
    sat_cfg: &SatConfig,
) -> Result<DVector<f64>> {
    checked(Gains::Second(gains.clone()))?;
    let a_hat = adaptation.estimated_a();
    if a_hat.shape() != model.a.shape() {
        return Err(Error::dim("adaptation state", model.order(), a_hat.nrows()));
    }
    let u = reaching_law(x, x_d, x_d_next, &a_hat, model, &-&gains.phi)?;
    subtract_switching(u, mu_u, xi_prev, sat_cfg)
}

// ---------------------------------------------------------------------------
// DC motor cascade
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    First,
    Second,
}

/// How the voltage law obtains `I_d(i+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurrentRefNext {
    /// Zero-order hold: `I_d(i+1) = I_d(i)`.
    #[default]
    Hold,
    /// Re-evaluate the speed law one step ahead, at the speed the outer loop is
    /// enforcing and the reference `theta_d(i+2)`.
    Predict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcCascadeConfig {
    pub order: Order,
    /// `P` (first order) or `Phi` (second order), rows/cols ordered (speed, current).
    pub gains: [[f64; 2]; 2],
    pub mu_u: bool,
    pub epsilon: [f64; 2],
    pub current_ref_next: CurrentRefNext,
    pub params: DcMotorParams,
    pub period: f64,
}

impl DcCascadeConfig {
    pub fn gain_matrix(&self) -> DMatrix<f64> {
        let g = self.gains;
        DMatrix::from_row_slice(2, 2, &[g[0][0], g[0][1], g[1][0], g[1][1]])
    }

    pub fn gains(&self) -> Gains {
        let m = self.gain_matrix();
        match self.order {
            Order::First => Gains::First(if is_diagonal(&m) {
                FirstOrderGains {
                    p: m,
                    structure: Structure::Siso,
                }
            } else {
                FirstOrderGains::coupled(m)
            }),
            Order::Second => Gains::Second(SecondOrderGains::new(m)),
        }
    }

    /// `G` with `S(i+1) = G S(i)`.
    pub fn surface_map(&self) -> [[f64; 2]; 2] {
        let g = self.gains;
        match self.order {
            Order::First => g,
            Order::Second => [[-g[0][0], -g[0][1]], [-g[1][0], -g[1][1]]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.period > 0.0) {
            return Err(Error::invalid("sampling period", format!("must be > 0, got {}", self.period)));
        }
        SatConfig {
            epsilon: self.epsilon.to_vec(),
        }
        .validate(2)?;
        validate_gains(&self.gains()).into_result()
    }
}

/// Measurements and references available to the cascade at step `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcInputs {
    pub theta: f64,
    pub current: f64,
    pub theta_d: f64,
    pub theta_d_next: f64,
    /// `theta_d(i+2)`, used only by [`CurrentRefNext::Predict`].
    pub theta_d_next2: f64,
    pub mu_theta: f64,
    pub mu_current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DcOutput {
    pub current_ref: f64,
    pub voltage: f64,
    pub s1: f64,
    pub s2: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub mu_current_ref: f64,
    pub mu_voltage: f64,
}

/// Speed loop with the synthetic current reference, followed by the current
/// loop with the armature voltage. One step of memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DcCascadeController {
    cfg: DcCascadeConfig,
    nominal_a: DMatrix<f64>,
    s_prev: Option<[f64; 2]>,
    current_ref_prev: Option<f64>,
}

impl DcCascadeController {
    pub fn new(cfg: DcCascadeConfig) -> Result<Self> {
        cfg.validate()?;
        let nominal_a = crate::plant::dc_motor_model(&cfg.params)?.a().clone();
        Ok(Self {
            cfg,
            nominal_a,
            s_prev: None,
            current_ref_prev: None,
        })
    }

    pub fn config(&self) -> &DcCascadeConfig {
        &self.cfg
    }

    pub fn nominal_a(&self) -> &DMatrix<f64> {
        &self.nominal_a
    }

    /// Speed-loop law without switching term. `a_hat` is the model used for
    /// compensation; its (1,2) deviation from nominal multiplies the current.
    fn speed_law(&self, a_hat: &DMatrix<f64>, theta: f64, current: f64, theta_d_next: f64, target: f64) -> f64 {
        let p = &self.cfg.params;
        let a12 = self.nominal_a[(0, 1)];
        let t = self.cfg.period;
        ((target + theta_d_next - theta) / t
            - a_hat[(0, 0)] * theta
            - (a_hat[(0, 1)] - a12) * current
            - p.load_torque / p.inertia)
            / a12
    }

    pub fn step(&mut self, inp: &DcInputs, adaptation: Option<&AdaptationState>) -> Result<DcOutput> {
        let vals = [inp.theta, inp.current, inp.theta_d, inp.theta_d_next, inp.mu_theta, inp.mu_current];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("controller input", format!("non-finite value in {inp:?}")));
        }
        let a_hat = match adaptation {
            Some(st) => st.estimated_a(),
            None => self.nominal_a.clone(),
        };
        let g = self.cfg.surface_map();
        let p = &self.cfg.params;
        let t = self.cfg.period;

        let s1 = inp.theta - inp.theta_d;
        // The current surface of this step depends on I_d(i) itself; the coupling
        // term uses the error against the reference still in force.
        let s2_pre = self.current_ref_prev.map_or(0.0, |id| inp.current - id);
        let prev = self.s_prev.unwrap_or([0.0, 0.0]);
        let target1 = g[0][0] * s1 + g[0][1] * s2_pre;
        let mut current_ref = self.speed_law(&a_hat, inp.theta, inp.current, inp.theta_d_next, target1);

        let (mu_id, mu_v) = if self.cfg.mu_u {
            dc_propagate_uncertainty_coupled(inp.mu_theta, inp.mu_current, g, p, t)
        } else {
            (0.0, 0.0)
        };

        let phi = self.cfg.gains;
        let xi1 = s1 + phi[0][0] * prev[0] + phi[0][1] * prev[1];
        let switch1 = match self.cfg.order {
            Order::First => s1,
            Order::Second => xi1,
        };
        current_ref -= mu_id.abs() * sat(switch1, self.cfg.epsilon[0]);

        let s2 = inp.current - current_ref;
        let current_ref_next = match self.cfg.current_ref_next {
            CurrentRefNext::Hold => current_ref,
            CurrentRefNext::Predict => {
                // Model prediction of the next speed sample, then the speed law
                // evaluated there with the reference that will hold at i+1.
                let theta_next = inp.theta
                    + t * (a_hat[(0, 0)] * inp.theta + a_hat[(0, 1)] * inp.current + p.load_torque / p.inertia);
                let s1_next = theta_next - inp.theta_d_next;
                let target_next = g[0][0] * s1_next + g[0][1] * s2;
                self.speed_law(&a_hat, theta_next, current_ref, inp.theta_d_next2, target_next)
            }
        };
        let xi2 = s2 + phi[1][0] * prev[0] + phi[1][1] * prev[1];
        let target2 = g[1][0] * s1 + g[1][1] * s2;
        let mut voltage = p.inductance
            * ((target2 + current_ref_next - inp.current) / t
                - a_hat[(1, 0)] * inp.theta
                - a_hat[(1, 1)] * inp.current);
        let switch2 = match self.cfg.order {
            Order::First => s2,
            Order::Second => xi2,
        };
        voltage -= mu_v.abs() * sat(switch2, self.cfg.epsilon[1]);

        self.s_prev = Some([s1, s2]);
        self.current_ref_prev = Some(current_ref);
        let (xi1, xi2) = match self.cfg.order {
            Order::First => (0.0, 0.0),
            Order::Second => (xi1, xi2),
        };
        Ok(DcOutput {
            current_ref,
            voltage,
            s1,
            s2,
            xi1,
            xi2,
            mu_current_ref: mu_id,
            mu_voltage: mu_v,
        })
    }
}
