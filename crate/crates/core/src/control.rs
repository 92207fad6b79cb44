//! Control law, reference with dither, and the reset supervisor.
//!
//! The feedback vector acts on `x = [e_I; x_p]`, `u = κᵀx`. The same law
//! written in PI-plus-extra-feedback form acts on `e_y = [−y; e_I]` and `x̂_p`;
//! [`control_law`] and [`control_law_pi_form`] are the two assemblies.

use nalgebra::{Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::{kappa_pole_placement, DesignSpec};
use crate::plant::Theta;

/// `u = κᵀ[e_I; y; x̂₂; x̂₃]` with `e_y = [−y; e_I]`.
pub fn control_law(kappa: &Vector4<f64>, e_y: &Vector2<f64>, x_p_hat: &Vector3<f64>) -> f64 {
    let x = Vector4::new(e_y[1], -e_y[0], x_p_hat[1], x_p_hat[2]);
    kappa.dot(&x)
}

/// `u = K_PI·e_y + K_x·x̂_p` with `K_PI = (−κ₂, κ₁)`, `K_x = (0, κ₃, κ₄)`.
pub fn control_law_pi_form(kappa: &Vector4<f64>, e_y: &Vector2<f64>, x_p_hat: &Vector3<f64>) -> f64 {
    let k_pi = Vector2::new(-kappa[1], kappa[0]);
    let k_x = Vector3::new(0.0, kappa[2], kappa[3]);
    k_pi.dot(e_y) + k_x.dot(x_p_hat)
}

/// Full-information law `u* = κ(θ)ᵀx` (oracle use only).
pub fn ideal_control(theta: &Theta, x: &Vector4<f64>, spec: &DesignSpec) -> f64 {
    kappa_pole_placement(theta, spec).dot(x)
}

/// Piecewise-constant main-line reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mainline {
    /// `high` on the first half of each period, `low` on the second.
    Square { period: f64, low: f64, high: f64 },
    /// `(t, value)` breakpoints; value holds from `t` until the next one.
    Steps { points: Vec<(f64, f64)> },
}

impl Mainline {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Mainline::Square { period, low, high } => {
                let phase = t.rem_euclid(*period);
                if phase < 0.5 * period {
                    *high
                } else {
                    *low
                }
            }
            Mainline::Steps { points } => points.iter().take_while(|(tp, _)| *tp <= t).last().map_or(0.0, |(_, v)| *v),
        }
    }

    /// Half-period of a square wave.
    pub fn half_period(&self) -> Option<f64> {
        match self {
            Mainline::Square { period, .. } => Some(0.5 * period),
            Mainline::Steps { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dither {
    pub alpha: f64,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl Dither {
    pub fn validate(&self) -> Result<()> {
        let n = self.amplitudes.len();
        if n == 0 || self.frequencies.len() != n {
            return Err(Error::config("dither needs n_d >= 1 matching amplitudes and frequencies"));
        }
        if !(self.alpha > 0.0) || self.amplitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::config("dither alpha and amplitudes must be positive"));
        }
        for i in 0..n {
            for j in 0..i {
                if self.frequencies[i] == self.frequencies[j] {
                    return Err(Error::config("dither frequencies must be distinct"));
                }
            }
        }
        Ok(())
    }

    /// `h(t − t_i⁺)e^{−α(t − t_i⁺)}Σaⱼ sin(ωⱼt)`.
    pub fn at(&self, t: f64, t_i: f64) -> f64 {
        if t < t_i {
            return 0.0;
        }
        let env = (-self.alpha * (t - t_i)).exp();
        env * self.amplitudes.iter().zip(&self.frequencies).map(|(a, w)| a * (w * t).sin()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub mainline: Mainline,
    pub dither: Dither,
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<()> {
        if let Mainline::Square { period, .. } = self.mainline {
            if !(period > 0.0) {
                return Err(Error::config("square-wave period must be positive"));
            }
        }
        self.dither.validate()
    }
}

/// `r(t) = c(t) + d(t)`; the dither restarts at `t_i_plus`.
pub fn reference(spec: &ReferenceSpec, t: f64, t_i_plus: f64) -> f64 {
    spec.mainline.at(t) + spec.dither.at(t, t_i_plus)
}

/// Reset rule on `f = ∫_{t_i⁺}^t (y − ŷ)²dτ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetPolicy {
    pub f_max: f64,
    /// Minimum spacing between resets.
    pub refractory: f64,
    pub criterion: f64,
    pub t_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupervisorAction {
    Continue,
    Reset { t: f64 },
}

impl ResetPolicy {
    pub fn new(f_max: f64, refractory: f64, t_start: f64) -> Result<Self> {
        if !(f_max > 0.0) || !(refractory >= 0.0) {
            return Err(Error::config("f_max must be positive and refractory non-negative"));
        }
        Ok(ResetPolicy { f_max, refractory, criterion: 0.0, t_i: t_start })
    }

    pub fn restart(&mut self, t: f64) {
        self.criterion = 0.0;
        self.t_i = t;
    }
}

/// Accumulates the criterion over one step ending at `t` and decides.
pub fn supervisor_step(policy: &mut ResetPolicy, y: f64, y_hat: f64, dt: f64, t: f64) -> SupervisorAction {
    if t < policy.t_i {
        return SupervisorAction::Continue;
    }
    let e = y - y_hat;
    policy.criterion += e * e * dt;
    if policy.criterion >= policy.f_max && t - policy.t_i >= policy.refractory {
        policy.restart(t);
        SupervisorAction::Reset { t }
    } else {
        SupervisorAction::Continue
    }
}
