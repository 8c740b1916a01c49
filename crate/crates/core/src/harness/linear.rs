//! Closed loop of a square-input linear model against its own Euler
//! discretization. No ADC, exact model: the reaching law holds to rounding.

use nalgebra::DVector;

use crate::error::Result;
use crate::plant::{euler_discretize, LinearModel};
use crate::smc::{first_order_control, second_order_control, FirstOrderGains, SecondOrderGains, SquareModel};

#[derive(Debug, Clone)]
pub enum LinearLaw {
    First(FirstOrderGains),
    Second(SecondOrderGains),
}

/// Sliding surfaces `S(0..=steps)` of the loop started at `x0`, following
/// `reference(i)`.
pub fn run_linear_loop(
    model: &LinearModel,
    period: f64,
    law: &LinearLaw,
    x0: DVector<f64>,
    reference: impl Fn(usize) -> DVector<f64>,
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let sq = SquareModel::new(model, period)?;
    let disc = euler_discretize(model, period)?;
    let mut x = x0;
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let xd = reference(i);
        out.push(&x - &xd);
        if i == steps {
            break;
        }
        let xdn = reference(i + 1);
        let u = match law {
            LinearLaw::First(g) => first_order_control(&x, &xd, &xdn, &sq, g)?,
            LinearLaw::Second(g) => second_order_control(&x, &xd, &xdn, &sq, g)?,
        };
        x = disc.step(&x, &u);
    }
    Ok(out)
}
