//! Visit-indexed step sizes for the local TD term (`α`) and the reciprocity
//! term (`β`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `α_k = a / (k+1)^τ1`, `β_k = b / (k+1)^τ2`, with `k` the number of
    /// earlier visits of the pair. `epsilon1` is the reward moment constant
    /// entering the admissibility condition.
    Polynomial {
        a: f64,
        b: f64,
        tau1: f64,
        tau2: f64,
        epsilon1: f64,
    },
    /// Fixed `α` and `β` at every visit.
    Constant { alpha: f64, beta: f64 },
}

impl ScheduleConfig {
    pub fn polynomial(a: f64, b: f64, tau1: f64, tau2: f64, epsilon1: f64) -> Self {
        ScheduleConfig::Polynomial { a, b, tau1, tau2, epsilon1 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScheduleConfig::Polynomial { a, b, tau1, tau2, epsilon1 } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::config("schedule.a", "must be positive"));
                }
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::config("schedule.b", "must be positive"));
                }
                if !(tau1 > 0.5 && tau1 <= 1.0) {
                    return Err(Error::config("schedule.tau1", format!("{tau1} outside (1/2, 1]")));
                }
                if !(epsilon1 > 0.0 && epsilon1.is_finite()) {
                    return Err(Error::config("schedule.epsilon1", "must be positive"));
                }
                if !(tau2 > 0.0) {
                    return Err(Error::config("schedule.tau2", "must be positive"));
                }
                let bound = tau1 - 1.0 / (2.0 + epsilon1);
                if !(tau2 < bound) {
                    return Err(Error::config(
                        "schedule.tau2",
                        format!(
                            "requires tau2 < tau1 - 1/(2 + epsilon1): {tau2} < {tau1} - 1/(2 + {epsilon1}) = {bound} is false"
                        ),
                    ));
                }
            }
            ScheduleConfig::Constant { alpha, beta } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::config("schedule.alpha", format!("{alpha} outside [0, 1]")));
                }
                if !(0.0..=1.0).contains(&beta) {
                    return Err(Error::config("schedule.beta", format!("{beta} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// `2τ2 ≥ τ1 − 1/(2+ε1)`, the extra condition under which a `κ < 1`
    /// run tracks its `κ = 1` counterpart. Constant schedules never satisfy it.
    pub fn satisfies_kappa_one_tracking(&self) -> bool {
        match *self {
            ScheduleConfig::Polynomial { tau1, tau2, epsilon1, .. } => {
                2.0 * tau2 >= tau1 - 1.0 / (2.0 + epsilon1)
            }
            ScheduleConfig::Constant { .. } => false,
        }
    }

    pub fn alpha<T: Scalar>(&self, visits: u64) -> T {
        match *self {
            ScheduleConfig::Polynomial { a, tau1, .. } => T::lit(a / ((visits + 1) as f64).powf(tau1)),
            ScheduleConfig::Constant { alpha, .. } => T::lit(alpha),
        }
    }

    pub fn beta<T: Scalar>(&self, visits: u64) -> T {
        match *self {
            ScheduleConfig::Polynomial { b, tau2, .. } => T::lit(b / ((visits + 1) as f64).powf(tau2)),
            ScheduleConfig::Constant { beta, .. } => T::lit(beta),
        }
    }

    /// `(α_t, β_t)` for a pair: zero unless the pair is sampled at this step,
    /// in which case `visits` is the number of earlier samples.
    pub fn step_sizes<T: Scalar>(&self, visits: Option<u64>) -> (T, T) {
        match visits {
            Some(k) => (self.alpha(k), self.beta(k)),
            None => (T::zero(), T::zero()),
        }
    }
}
