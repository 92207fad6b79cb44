//! Gradient identification laws with a dead zone on the scalar regressor.
//!
//! Each stream follows `ẋ = −γ·M·(M·x − Y)` with `γ = g/M²`, i.e.
//! `ẋ = −g·(x − Y/M)`. The `1/M²` factor makes every law invariant to a joint
//! rescaling of `(Y, M)`, which is what lets the regression chain be
//! normalised freely.

use nalgebra::{DVector, Matrix3, SMatrix, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::canonical::eta_of_theta;
use crate::drem::Regression;
use crate::error::{Error, Result};
use crate::linalg::lambda_max_rank_one;
use crate::ode::{rk4_step, OdeState};
use crate::plant::Theta;
use crate::Vector9;

/// All adapted quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub eta_hat: Vector9,
    pub ti_hat: Matrix3<f64>,
    pub xdelta0_hat: DVector<f64>,
    pub kappa_hat: DVector<f64>,
}

impl Estimates {
    pub fn new(n_delta: usize, kappa0: DVector<f64>) -> Self {
        Estimates {
            eta_hat: Vector9::zeros(),
            ti_hat: Matrix3::zeros(),
            xdelta0_hat: DVector::zeros(n_delta),
            kappa_hat: kappa0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta_hat.iter().all(|v| v.is_finite())
            && self.ti_hat.iter().all(|v| v.is_finite())
            && self.xdelta0_hat.iter().all(|v| v.is_finite())
            && self.kappa_hat.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// `γ = (γ₁ + γ₀λ_max)/M²`.
    #[default]
    Scaled,
    /// `γ = γ₁/M²`.
    Constant,
}

impl std::str::FromStr for GammaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(GammaMode::Scaled),
            "constant" => Ok(GammaMode::Constant),
            other => Err(Error::config(format!("unknown gamma mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub gamma0: f64,
    pub gamma1: f64,
    /// Dead-zone threshold on the scalar regressor.
    pub rho: f64,
    pub c_bound: f64,
    #[serde(default)]
    pub mode: GammaMode,
}

impl GainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 >= 0.0 && self.gamma1 > 0.0 && self.rho >= 0.0 && self.c_bound >= 0.0) {
            return Err(Error::config("gains must be non-negative, gamma1 positive"));
        }
        if self.mode == GammaMode::Scaled && self.gamma1 <= self.c_bound {
            return Err(Error::config(format!("gamma1 = {} must exceed c = {}", self.gamma1, self.c_bound)));
        }
        Ok(())
    }

    fn rate(&self, lambda: f64) -> f64 {
        match self.mode {
            GammaMode::Scaled => self.gamma1 + self.gamma0 * lambda,
            GammaMode::Constant => self.gamma1,
        }
    }

    fn frozen(&self, m: f64) -> bool {
        !(m.abs() >= self.rho) || m == 0.0
    }
}

/// Conservative `c` from a prior box `[lo, hi]` on `θ` and a bound on
/// `|h_δᵀΦ_δ(t)|`: `γ₀·max‖ψ_d‖²·sup|h_δᵀΦ_δ|²`.
pub fn c_bound_from_prior(gamma0: f64, lo: &Theta, hi: &Theta, exo_sup: f64) -> Result<f64> {
    lo.validate()?;
    hi.validate()?;
    if lo.theta1 > hi.theta1 || lo.theta2 > hi.theta2 || lo.theta3 > hi.theta3 {
        return Err(Error::config("prior box has lo > hi"));
    }
    let psi_d = eta_of_theta(lo)?.psi_d;
    Ok(gamma0 * psi_d.norm_squared() * exo_sup * exo_sup)
}

/// `ẋ = −g·(M·x − Y)/M`, integrated by RK4 with `g`, `Y`, `M` held.
fn gradient_step<S>(x: &S, y: &S, m: f64, g: f64, dt: f64) -> S
where
    S: OdeState + std::ops::Sub<Output = S> + std::ops::Mul<f64, Output = S>,
{
    let target = y.clone() * (1.0 / m);
    rk4_step(0.0, x, dt, |_, v| (v.clone() - target.clone()) * (-g))
}

fn check(dt: f64) -> Result<()> {
    if dt > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("step size must be positive"))
    }
}

fn finite_or_fault(est: Estimates, what: &str) -> Result<Estimates> {
    if est.is_finite() {
        Ok(est)
    } else {
        Err(Error::NumericFault { step: 0, t: f64::NAN, what: what.into() })
    }
}

/// `η̂` law. `phi_hat` is `φ(y, u, δ̂)`.
pub fn update_eta(
    est: &Estimates,
    reg: &Regression<Vector9>,
    phi_hat: &SMatrix<f64, 3, 9>,
    sched: &GainSchedule,
    dt: f64,
) -> Result<Estimates> {
    check(dt)?;
    if sched.frozen(reg.m) {
        return Ok(est.clone());
    }
    // φφᵀ is diagonal with entries y², u² + δ², u².
    let lambda = (phi_hat * phi_hat.transpose()).diagonal().max();
    let mut next = est.clone();
    next.eta_hat = gradient_step(&est.eta_hat, &reg.y, reg.m, sched.rate(lambda), dt);
    finite_or_fault(next, "eta_hat")
}

/// `x̂_δ0` law (no excitation term in its gain).
pub fn update_xdelta0(
    est: &Estimates,
    reg: &Regression<DVector<f64>>,
    sched: &GainSchedule,
    dt: f64,
) -> Result<Estimates> {
    check(dt)?;
    if sched.frozen(reg.m) {
        return Ok(est.clone());
    }
    let mut next = est.clone();
    next.xdelta0_hat = gradient_step(&est.xdelta0_hat, &reg.y, reg.m, sched.rate(0.0), dt);
    finite_or_fault(next, "xdelta0_hat")
}

/// `T̂_I` law; `xi_hat_dot` is the observer's analytic right-hand side.
pub fn update_ti(
    est: &Estimates,
    reg: &Regression<Matrix3<f64>>,
    xi_hat: &Vector3<f64>,
    xi_hat_dot: &Vector3<f64>,
    sched: &GainSchedule,
    dt: f64,
) -> Result<Estimates> {
    check(dt)?;
    if sched.frozen(reg.m) {
        return Ok(est.clone());
    }
    let lambda = lambda_max_rank_one(xi_hat_dot.as_slice(), xi_hat.as_slice());
    let mut next = est.clone();
    next.ti_hat = gradient_step(&est.ti_hat, &reg.y, reg.m, sched.rate(lambda), dt);
    finite_or_fault(next, "ti_hat")
}

/// `κ̂` law; `x_hat = [ê_I; x̂_p]`.
pub fn update_kappa(
    est: &Estimates,
    reg: &Regression<DVector<f64>>,
    x_hat: &Vector4<f64>,
    sched: &GainSchedule,
    dt: f64,
) -> Result<Estimates> {
    check(dt)?;
    if sched.frozen(reg.m) {
        return Ok(est.clone());
    }
    let mut next = est.clone();
    let g = sched.rate(x_hat.norm_squared());
    next.kappa_hat = gradient_step(&est.kappa_hat, &reg.y, reg.m, g, dt);
    finite_or_fault(next, "kappa_hat")
}
