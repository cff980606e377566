//! Admissible decay weights for section spaces.
//!
//! A weight is a positive, nonincreasing function of time controlling both
//! the size of perturbations and the norm in which sections are measured.
//! Admissibility additionally bounds the logarithmic derivative: `|rho'| <=
//! C1 * rho`, which is what lets one unit of time shift change `rho` by at
//! most a fixed factor.

use std::sync::Arc;

use super::GraphError;

type WeightFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Positive nonincreasing weight `rho(t)` with `|rho'| <= C1 rho`.
#[derive(Clone)]
pub struct Weight {
    eval: Arc<WeightFn>,
    c1: f64,
    label: String,
}

impl Weight {
    /// Polynomial decay `<t>^(-alpha)` with `<t> = sqrt(1 + t^2)`.
    ///
    /// The logarithmic derivative is `alpha |t| / (1 + t^2)`, maximized at
    /// `t = 1`, so `C1 = alpha / 2`.
    pub fn power_law(alpha: f64) -> Self {
        assert!(alpha >= 0.0, "power-law exponent must be nonnegative");
        Self {
            eval: Arc::new(move |t: f64| (1.0 + t * t).powf(-alpha / 2.0)),
            c1: alpha / 2.0,
            label: format!("power:{alpha}"),
        }
    }

    /// Exponential decay `exp(-eta * t)` for `t >= 0`, with `C1 = eta`.
    pub fn exponential(eta: f64) -> Self {
        assert!(eta >= 0.0, "exponential rate must be nonnegative");
        Self {
            eval: Arc::new(move |t: f64| (-eta * t).exp()),
            c1: eta,
            label: format!("exp:{eta}"),
        }
    }

    /// Custom weight with a caller-declared logarithmic-derivative bound.
    pub fn custom(
        label: impl Into<String>,
        c1: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            c1,
            label: label.into(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// Declared bound `C1` on `|rho'| / rho`.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Samples positivity, monotonicity, and the logarithmic-derivative
    /// bound on `[t0, t1]`. The derivative is checked by central differences
    /// with a 5% slack on `C1` to absorb the stencil error.
    pub fn check_admissible(&self, t0: f64, t1: f64) -> Result<(), GraphError> {
        assert!(t1 > t0, "window must have positive length");
        const SAMPLES: usize = 256;
        let h = (t1 - t0) / 1e6;
        let mut prev = f64::INFINITY;
        for i in 0..=SAMPLES {
            let t = t0 + (t1 - t0) * i as f64 / SAMPLES as f64;
            let v = self.eval(t);
            if !(v > 0.0) || !v.is_finite() {
                return Err(GraphError::WeightNotAdmissible(format!(
                    "rho({t}) = {v} is not positive and finite"
                )));
            }
            if v > prev * (1.0 + 1e-12) {
                return Err(GraphError::WeightNotAdmissible(format!(
                    "rho increases near t = {t}"
                )));
            }
            let slope = (self.eval(t + h) - self.eval((t - h).max(t0))) / (2.0 * h);
            if slope.abs() > self.c1 * v * 1.05 + f64::EPSILON {
                return Err(GraphError::WeightNotAdmissible(format!(
                    "|rho'({t})| = {:.3e} exceeds C1 * rho = {:.3e}",
                    slope.abs(),
                    self.c1 * v
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Weight({}, C1 = {})", self.label, self.c1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_is_admissible_on_positive_window() {
        Weight::power_law(2.0).check_admissible(1.0, 500.0).unwrap();
    }

    #[test]
    fn growing_custom_weight_is_rejected() {
        let w = Weight::custom("bad", 1.0, |t| 1.0 + t);
        assert!(w.check_admissible(0.0, 10.0).is_err());
    }

    #[test]
    fn understated_derivative_bound_is_caught() {
        // exp(-3t) declared with C1 = 1.
        let w = Weight::custom("lied", 1.0, |t| (-3.0 * t).exp());
        assert!(w.check_admissible(0.0, 2.0).is_err());
    }
}
