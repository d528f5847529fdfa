//! Compensated summation and the distribution functions used for p-values.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Neumaier-compensated accumulator. Infinite terms are tracked separately so a
/// sum containing `+inf` is `+inf` rather than NaN from the compensation step.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    pos_inf: bool,
    neg_inf: bool,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        if v.is_infinite() {
            if v > 0.0 {
                self.pos_inf = true;
            } else {
                self.neg_inf = true;
            }
            return;
        }
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        match (self.pos_inf, self.neg_inf) {
            (true, true) => f64::NAN,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => self.sum + self.compensation,
        }
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

pub fn compensated_mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Upper tail `1 - Phi(z)` of the standard normal, computed through `erfc` so
/// that large positive `z` keeps full relative precision.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Psi_dof(t)` of Student's t distribution.
pub fn student_t_sf(t: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("degrees of freedom must be positive")
        .sf(t)
}
