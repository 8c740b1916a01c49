//! Multiplicative/additive parameter adaptation and the Lyapunov difference
//! diagnostic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plant::UncertaintySpec;

/// Estimates `beta_hat`, `alpha_hat` of the perturbed dynamics matrix together
/// with their adaptation gains and masks. Unmasked entries stay pinned at
/// `beta_hat = 1`, `alpha_hat = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationState {
    nominal_a: DMatrix<f64>,
    beta_hat: DMatrix<f64>,
    alpha_hat: DMatrix<f64>,
    rho_beta: DMatrix<f64>,
    rho_alpha: DMatrix<f64>,
    beta_mask: DMatrix<bool>,
    alpha_mask: DMatrix<bool>,
}

impl AdaptationState {
    /// All entries adapt, with scalar gains.
    pub fn uniform(nominal_a: DMatrix<f64>, rho_beta: f64, rho_alpha: f64) -> Self {
        let (r, c) = nominal_a.shape();
        Self {
            beta_hat: DMatrix::from_element(r, c, 1.0),
            alpha_hat: DMatrix::zeros(r, c),
            rho_beta: DMatrix::from_element(r, c, rho_beta),
            rho_alpha: DMatrix::from_element(r, c, rho_alpha),
            beta_mask: DMatrix::from_element(r, c, true),
            alpha_mask: DMatrix::from_element(r, c, true),
            nominal_a,
        }
    }

    pub fn new(
        nominal_a: DMatrix<f64>,
        rho_beta: DMatrix<f64>,
        rho_alpha: DMatrix<f64>,
        beta_mask: DMatrix<bool>,
        alpha_mask: DMatrix<bool>,
    ) -> Result<Self> {
        let shape = nominal_a.shape();
        let st = Self {
            beta_hat: DMatrix::from_element(shape.0, shape.1, 1.0),
            alpha_hat: DMatrix::zeros(shape.0, shape.1),
            nominal_a,
            rho_beta,
            rho_alpha,
            beta_mask,
            alpha_mask,
        };
        st.validate()?;
        Ok(st)
    }

    pub fn with_masks(mut self, beta_mask: DMatrix<bool>, alpha_mask: DMatrix<bool>) -> Self {
        self.beta_mask = beta_mask;
        self.alpha_mask = alpha_mask;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.nominal_a.shape();
        if s.0 != s.1 {
            return Err(Error::dim("nominal A", "square", format!("{s:?}")));
        }
        for (name, shape) in [
            ("rho_beta", self.rho_beta.shape()),
            ("rho_alpha", self.rho_alpha.shape()),
            ("beta_mask", self.beta_mask.shape()),
            ("alpha_mask", self.alpha_mask.shape()),
        ] {
            if shape != s {
                return Err(Error::dim(name, format!("{s:?}"), format!("{shape:?}")));
            }
        }
        for p in 0..s.0 {
            for q in 0..s.1 {
                if self.beta_mask[(p, q)] && !(self.rho_beta[(p, q)] > 0.0) {
                    return Err(Error::invalid(
                        "adaptation gain",
                        format!("rho_beta_{}{} must be > 0, got {}", p + 1, q + 1, self.rho_beta[(p, q)]),
                    ));
                }
                if self.alpha_mask[(p, q)] && !(self.rho_alpha[(p, q)] > 0.0) {
                    return Err(Error::invalid(
                        "adaptation gain",
                        format!("rho_alpha_{}{} must be > 0, got {}", p + 1, q + 1, self.rho_alpha[(p, q)]),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Overwrites one estimate. Values on unmasked entries are stored but never
    /// reach [`estimated_a`](Self::estimated_a).
    pub fn set_estimate(&mut self, p: usize, q: usize, beta_hat: f64, alpha_hat: f64) {
        self.beta_hat[(p, q)] = beta_hat;
        self.alpha_hat[(p, q)] = alpha_hat;
    }

    pub fn order(&self) -> usize {
        self.nominal_a.nrows()
    }

    pub fn nominal_a(&self) -> &DMatrix<f64> {
        &self.nominal_a
    }

    /// Effective multiplicative estimate (1 where pinned).
    pub fn beta_hat(&self, p: usize, q: usize) -> f64 {
        if self.beta_mask[(p, q)] {
            self.beta_hat[(p, q)]
        } else {
            1.0
        }
    }

    /// Effective additive estimate (0 where pinned).
    pub fn alpha_hat(&self, p: usize, q: usize) -> f64 {
        if self.alpha_mask[(p, q)] {
            self.alpha_hat[(p, q)]
        } else {
            0.0
        }
    }

    pub fn beta_mask(&self) -> &DMatrix<bool> {
        &self.beta_mask
    }

    pub fn alpha_mask(&self) -> &DMatrix<bool> {
        &self.alpha_mask
    }

    pub fn rho_beta(&self) -> &DMatrix<f64> {
        &self.rho_beta
    }

    pub fn rho_alpha(&self) -> &DMatrix<f64> {
        &self.rho_alpha
    }

    /// `A_hat_pq = beta_hat_pq a_pq + alpha_hat_pq`.
    pub fn estimated_a(&self) -> DMatrix<f64> {
        let (r, c) = self.nominal_a.shape();
        DMatrix::from_fn(r, c, |p, q| self.beta_hat(p, q) * self.nominal_a[(p, q)] + self.alpha_hat(p, q))
    }

    /// One update: for every masked entry
    /// `beta_hat += T s_p a_pq x_q / rho_beta_pq`, `alpha_hat += T s_p x_q / rho_alpha_pq`.
    pub fn adapt_step(&self, s: &DVector<f64>, x: &DVector<f64>, period: f64) -> Result<Self> {
        let mut next = self.clone();
        next.adapt_in_place(s, x, period)?;
        Ok(next)
    }

    pub fn adapt_in_place(&mut self, s: &DVector<f64>, x: &DVector<f64>, period: f64) -> Result<()> {
        let r = self.order();
        if s.len() != r || x.len() != r {
            return Err(Error::dim("adaptation s/x", r, format!("{}/{}", s.len(), x.len())));
        }
        if !(period > 0.0) {
            return Err(Error::invalid("sampling period", format!("must be > 0, got {period}")));
        }
        self.validate()?;
        for p in 0..r {
            for q in 0..r {
                let drive = period * s[p] * x[q];
                if self.beta_mask[(p, q)] {
                    self.beta_hat[(p, q)] += drive * self.nominal_a[(p, q)] / self.rho_beta[(p, q)];
                }
                if self.alpha_mask[(p, q)] {
                    self.alpha_hat[(p, q)] += drive / self.rho_alpha[(p, q)];
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdaptationState::adapt_step`].
pub fn adapt_step(state: &AdaptationState, s: &DVector<f64>, x: &DVector<f64>, period: f64) -> Result<AdaptationState> {
    state.adapt_step(s, x, period)
}

/// Per-surface Lyapunov values and differences.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovDiag {
    /// `V_p(i)`.
    pub value: DVector<f64>,
    /// `V_p(i+1) - V_p(i)`.
    pub delta: DVector<f64>,
    /// `-(1 - g_p) s_p(i)^2` with `g_p` the diagonal surface gain.
    pub predicted: DVector<f64>,
    pub residual: DVector<f64>,
}

impl LyapunovDiag {
    pub fn total_value(&self) -> f64 {
        self.value.sum()
    }

    pub fn total_delta(&self) -> f64 {
        self.delta.sum()
    }
}

/// `V_p = s_p^2/2 + sum_q rho_beta_pq beta_err^2/2 + rho_alpha_pq alpha_err^2/2`
/// over the masked entries of row `p`, with errors taken against `truth`.
pub fn lyapunov_value(s: &DVector<f64>, est: &AdaptationState, truth: &UncertaintySpec) -> DVector<f64> {
    let r = est.order();
    DVector::from_fn(r, |p, _| {
        let mut v = 0.5 * s[p] * s[p];
        for q in 0..r {
            if est.beta_mask[(p, q)] {
                let e = truth.beta()[(p, q)] - est.beta_hat(p, q);
                v += 0.5 * est.rho_beta[(p, q)] * e * e;
            }
            if est.alpha_mask[(p, q)] {
                let e = truth.alpha()[(p, q)] - est.alpha_hat(p, q);
                v += 0.5 * est.rho_alpha[(p, q)] * e * e;
            }
        }
        v
    })
}

/// Lyapunov difference between two consecutive steps versus its predicted value.
pub fn lyapunov_delta(
    s: &DVector<f64>,
    s_next: &DVector<f64>,
    before: &AdaptationState,
    after: &AdaptationState,
    truth: &UncertaintySpec,
    surface_gain: &[f64],
) -> Result<LyapunovDiag> {
    let r = before.order();
    if s.len() != r || s_next.len() != r || surface_gain.len() != r || truth.order() != r || after.order() != r {
        return Err(Error::dim("lyapunov inputs", r, "mismatched lengths"));
    }
    let value = lyapunov_value(s, before, truth);
    let next = lyapunov_value(s_next, after, truth);
    let delta = &next - &value;
    let predicted = DVector::from_fn(r, |p, _| -(1.0 - surface_gain[p]) * s[p] * s[p]);
    let residual = &delta - &predicted;
    Ok(LyapunovDiag {
        value,
        delta,
        predicted,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn one(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn zero_surface_is_fixpoint() {
        let st = AdaptationState::uniform(DMatrix::from_row_slice(2, 2, &[-1.0, 0.75, -0.03, -4.0]), 10.0, 20.0);
        let next = st.adapt_step(&DVector::zeros(2), &DVector::from_row_slice(&[3.0, 4.0]), 0.2).unwrap();
        assert_eq!(next, st);
    }

    #[test]
    fn scalar_update_examples() {
        let st = AdaptationState::uniform(DMatrix::from_element(1, 1, -1.0), 10.0, 20.0);
        let next = adapt_step(&st, &one(0.5), &one(2.0), 0.2).unwrap();
        assert_relative_eq!(next.beta_hat(0, 0), 0.98, epsilon = 1e-15);
        assert_relative_eq!(next.alpha_hat(0, 0), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn non_positive_gain_rejected() {
        let st = AdaptationState::uniform(DMatrix::from_element(1, 1, -1.0), 0.0, 20.0);
        assert!(st.adapt_step(&one(0.5), &one(2.0), 0.2).is_err());
        // A zero gain on a pinned entry is fine.
        let st = st.with_masks(DMatrix::from_element(1, 1, false), DMatrix::from_element(1, 1, true));
        assert!(st.adapt_step(&one(0.5), &one(2.0), 0.2).is_ok());
    }

    #[test]
    fn predicted_difference_example() {
        let st = AdaptationState::uniform(DMatrix::from_element(1, 1, -1.0), 10.0, 10.0);
        let truth = UncertaintySpec::identity(1);
        let d = lyapunov_delta(&one(2.0), &one(1.0), &st, &st, &truth, &[0.5]).unwrap();
        assert_relative_eq!(d.predicted[0], -2.0);
        // Exact difference: (1 - 4)/2.
        assert_relative_eq!(d.delta[0], -1.5);
        assert_relative_eq!(d.residual[0], 0.5);

        let d = lyapunov_delta(&one(0.0), &one(0.0), &st, &st, &truth, &[0.5]).unwrap();
        assert_eq!(d.delta[0], 0.0);
    }

    #[test]
    fn scalar_closed_loop_difference_matches_up_to_quadratic_terms() {
        // For s(i+1) = rho s + T (beta_err a + alpha_err) x the exact difference
        // equals -(1-rho) s^2 plus the neglected quadratic increments.
        let a = -1.0;
        let (rho, t, x) = (0.5, 0.05, 3.0);
        let truth = UncertaintySpec::new(
            DMatrix::from_element(1, 1, 0.7),
            DMatrix::from_element(1, 1, 0.2),
            DMatrix::from_element(1, 1, true),
        )
        .unwrap();
        let st = AdaptationState::uniform(DMatrix::from_element(1, 1, a), 5.0, 5.0);
        let s = 0.4;
        let err = (0.7 - 1.0) * a + 0.2;
        let s_next = rho * s + t * err * x;
        let after = st.adapt_step(&one(s), &one(x), t).unwrap();
        let d = lyapunov_delta(&one(s), &one(s_next), &st, &after, &truth, &[rho]).unwrap();
        let ds = s_next - s;
        let db = after.beta_hat(0, 0) - st.beta_hat(0, 0);
        let da = after.alpha_hat(0, 0) - st.alpha_hat(0, 0);
        let quadratic = 0.5 * ds * ds + 0.5 * 5.0 * db * db + 0.5 * 5.0 * da * da;
        assert_relative_eq!(d.residual[0], quadratic, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn pinned_entries_never_move(s in prop::collection::vec(-5.0f64..5.0, 2), x in prop::collection::vec(-50.0f64..50.0, 2), steps in 1usize..20) {
            let bm = DMatrix::from_row_slice(2, 2, &[true, false, true, true]);
            let am = DMatrix::from_row_slice(2, 2, &[true, false, false, true]);
            let mut st = AdaptationState::new(
                DMatrix::from_row_slice(2, 2, &[-1.0, 0.75, -0.03, -4.0]),
                DMatrix::from_element(2, 2, 7.0),
                DMatrix::from_element(2, 2, 3.0),
                bm,
                am,
            ).unwrap();
            let (s, x) = (DVector::from_vec(s), DVector::from_vec(x));
            for _ in 0..steps {
                st.adapt_in_place(&s, &x, 0.2).unwrap();
            }
            prop_assert_eq!(st.beta_hat[(0, 1)].to_bits(), 1.0f64.to_bits());
            prop_assert_eq!(st.alpha_hat[(1, 0)].to_bits(), 0.0f64.to_bits());
            prop_assert_eq!(st.estimated_a()[(0, 1)].to_bits(), 0.75f64.to_bits());
        }
    }
}
