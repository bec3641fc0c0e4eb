//! Cart-pole dynamics with per-task masses and pole length.
//!
//! Classic control constants: `dt = 0.02 s`, force `+-10 N`, gravity `9.8`,
//! termination at `|x| > 2.4 m` or `|angle| > 12 deg`. Semi-implicit Euler.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.8;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const STATE_DIM: usize = 4;

/// `pole_length` is the half-length of the pole, as in the classic benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 0.5,
        }
    }
}

impl CartPoleParams {
    pub fn new(cart_mass: f64, pole_mass: f64, pole_length: f64) -> Result<Self> {
        let p = CartPoleParams {
            cart_mass,
            pole_mass,
            pole_length,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "cart-pole {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 3] {
        [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_length", self.pole_length),
        ]
    }

    /// Accelerations `(x_acc, theta_acc)` for state `[x, x_dot, theta, theta_dot]`.
    pub fn accelerations(&self, state: &[f64; 4], force: f64) -> (f64, f64) {
        let [_, _, theta, theta_dot] = *state;
        let total_mass = self.cart_mass + self.pole_mass;
        let polemass_length = self.pole_mass * self.pole_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (self.pole_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        (x_acc, theta_acc)
    }

    /// One semi-implicit Euler step under `force`, without termination logic.
    pub fn integrate(&self, state: &[f64; 4], force: f64) -> [f64; 4] {
        let (x_acc, theta_acc) = self.accelerations(state, force);
        let [x, x_dot, theta, theta_dot] = *state;
        let x_dot = x_dot + TAU * x_acc;
        let theta_dot = theta_dot + TAU * theta_acc;
        [x + TAU * x_dot, x_dot, theta + TAU * theta_dot, theta_dot]
    }

    /// Action 0 pushes left, action 1 pushes right.
    pub fn step(&self, state: &[f64], action: usize) -> Result<([f64; 4], bool)> {
        let s: [f64; 4] = state
            .try_into()
            .map_err(|_| Error::dim(STATE_DIM, state.len()))?;
        let force = match action {
            0 => -FORCE_MAG,
            1 => FORCE_MAG,
            _ => {
                return Err(Error::Domain(format!(
                    "cart-pole action {action} not in {{0, 1}}"
                )))
            }
        };
        let next = self.integrate(&s, force);
        let done = next[0].abs() > X_THRESHOLD || next[2].abs() > THETA_THRESHOLD;
        Ok((next, done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_right_from_rest_moves_right() {
        let p = CartPoleParams::default();
        let (next, done) = p.step(&[0.0; 4], 1).unwrap();
        assert!(next[1] > 0.0);
        assert!(!done);
        let (next, _) = p.step(&[0.0; 4], 0).unwrap();
        assert!(next[1] < 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CartPoleParams::default();
        assert!(matches!(p.step(&[0.0; 4], 2), Err(Error::Domain(_))));
        assert!(p.step(&[0.0; 3], 0).is_err());
        assert!(CartPoleParams::new(0.0, 0.1, 0.5).is_err());
        assert!(CartPoleParams::new(1.0, 0.1, -0.5).is_err());
    }

    #[test]
    fn terminates_when_pole_falls() {
        let p = CartPoleParams::default();
        let (_, done) = p.step(&[0.0, 0.0, 0.21, 0.0], 0).unwrap();
        assert!(done);
        let (_, done) = p.step(&[2.39, 1.0, 0.0, 0.0], 1).unwrap();
        assert!(done);
    }
}
