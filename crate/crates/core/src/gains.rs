//! Ideal controller parameters and the mapping families that carry a
//! regression `𝒴_θ = ℳ_θ θ` over to the controller parameters without any
//! division by an estimate.
//!
//! A family supplies `𝒢(θ)`, `𝒮(θ)` with `𝒮 = 𝒢κ`, a scaling `Π_κ(m)` and the
//! transformed maps `𝒯_𝒢`, `𝒯_𝒮` such that
//! `Π_κ(m)·𝒢(θ) = 𝒯_𝒢(m, mθ)` and `Π_κ(m)·𝒮(θ) = 𝒯_𝒮(m, mθ)`.
//! Feeding `(ℳ_θ, 𝒴_θ)` then yields `𝒯_𝒮 = 𝒯_𝒢·κ` from measurable signals.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::plant::Theta;

/// Desired closed-loop resonance and damping.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DesignSpec {
    pub omega_d: f64,
    pub xi_d: f64,
}

impl DesignSpec {
    pub fn new(omega_d: f64, xi_d: f64) -> Result<Self> {
        let spec = DesignSpec { omega_d, xi_d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_d > 0.0 && self.xi_d > 0.0 && self.omega_d.is_finite() && self.xi_d.is_finite() {
            Ok(())
        } else {
            Err(Error::config("omega_d and xi_d must be positive"))
        }
    }
}

/// Pole-placement gains `(K_I, K_P, K_1x, K_2x)` acting on `[e_I, x1, x2, x3]`.
///
/// Places all four closed-loop poles of `𝒜 + ℬκᵀ` at the roots of
/// `(s² + 2ξ_dω_d s + ω_d²)²`. Evaluated only on true `θ`.
pub fn kappa_pole_placement(theta: &Theta, spec: &DesignSpec) -> Vector4<f64> {
    let (t1, t2, t3) = (theta.theta1, theta.theta2, theta.theta3);
    let (w, xi) = (spec.omega_d, spec.xi_d);
    let p = t1 * t2 * t3;
    let w2 = w * w;
    Vector4::new(
        p * w2 * w2,
        -4.0 * t1 * xi * w,
        -4.0 * t1 * xi * w * (t2 * t3 * w2 - 1.0),
        (-p * w2 * (4.0 * xi * xi - t2 * t3 * w2 + 2.0) + t2 + t1) / t2,
    )
}

/// Baseline PI gains `(K_P, K_I)` for the motor speed loop.
pub fn pi_gains(theta: &Theta) -> (f64, f64) {
    (2.0 * (theta.theta1 / theta.theta3).sqrt(), theta.theta1 / (theta.theta2 * theta.theta3))
}

/// Heterogeneous mappings that re-express a `θ`-regression as a regression in
/// the controller parameters.
pub trait MappingFamily: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of controller parameters `n_κ`.
    fn dim(&self) -> usize;

    /// Exponent `ℓ_κ` with `det Π_κ(m) ≥ m^ℓ_κ` for `m ≥ 1`.
    fn degree(&self) -> f64;

    fn g(&self, theta: &Theta) -> DMatrix<f64>;

    fn s(&self, theta: &Theta) -> DVector<f64>;

    fn pi(&self, m: f64) -> DMatrix<f64>;

    /// `𝒯_𝒢` evaluated on a regressor `m` and regressand `y ≈ m·θ`.
    fn t_g(&self, m: f64, y: &Vector3<f64>) -> Result<DMatrix<f64>>;

    /// `𝒯_𝒮` evaluated on a regressor `m` and regressand `y ≈ m·θ`.
    fn t_s(&self, m: f64, y: &Vector3<f64>) -> Result<DVector<f64>>;

    /// Ideal parameters from true `θ` (oracle path).
    fn kappa(&self, theta: &Theta) -> DVector<f64>;

    /// Expands family parameters into the feedback row on `[e_I, x1, x2, x3]`.
    fn feedback(&self, kappa: &DVector<f64>) -> Vector4<f64>;
}

/// Family of the pole-placement law with feedbacks from load speed and
/// torsional torque.
#[derive(Debug, Clone, Copy)]
pub struct PolePlacementFamily {
    pub spec: DesignSpec,
}

pub fn family_pole_placement(spec: DesignSpec) -> PolePlacementFamily {
    PolePlacementFamily { spec }
}

impl MappingFamily for PolePlacementFamily {
    fn name(&self) -> &'static str {
        "pole_placement"
    }

    fn dim(&self) -> usize {
        4
    }

    fn degree(&self) -> f64 {
        12.0
    }

    fn g(&self, theta: &Theta) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, theta.theta2]))
    }

    fn s(&self, theta: &Theta) -> DVector<f64> {
        let m = theta.as_vector();
        self.t_s(1.0, &m).expect("pole-placement family has no positivity constraint")
    }

    fn pi(&self, m: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![m.powi(3), m, m.powi(3), m.powi(5)]))
    }

    fn t_g(&self, m: f64, y: &Vector3<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![m.powi(3), m, m.powi(3), m.powi(4) * y[1]])))
    }

    fn t_s(&self, m: f64, y: &Vector3<f64>) -> Result<DVector<f64>> {
        let (w, xi) = (self.spec.omega_d, self.spec.xi_d);
        let w2 = w * w;
        let m2 = m * m;
        let m4 = m2 * m2;
        let prod = y[0] * y[1] * y[2];
        let y23 = y[1] * y[2];
        Ok(DVector::from_vec(vec![
            prod * w2 * w2,
            -4.0 * y[0] * xi * w,
            -4.0 * y[0] * xi * w * (y23 * w2 - m2),
            -prod * w2 * (4.0 * m2 * xi * xi - y23 * w2 + 2.0 * m2) + m4 * y[1] + m4 * y[0],
        ]))
    }

    fn kappa(&self, theta: &Theta) -> DVector<f64> {
        let k = kappa_pole_placement(theta, &self.spec);
        DVector::from_column_slice(k.as_slice())
    }

    fn feedback(&self, kappa: &DVector<f64>) -> Vector4<f64> {
        Vector4::new(kappa[0], kappa[1], kappa[2], kappa[3])
    }
}

/// Family of the baseline PI controller, `κ = (K_P, K_I)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PiFamily;

pub fn family_pi() -> PiFamily {
    PiFamily
}

fn checked_sqrt(v: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v.sqrt())
    } else {
        Err(Error::PositivityLoss(format!("square root of negative {what} = {v}")))
    }
}

impl MappingFamily for PiFamily {
    fn name(&self) -> &'static str {
        "pi"
    }

    fn dim(&self) -> usize {
        2
    }

    fn degree(&self) -> f64 {
        2.5
    }

    fn g(&self, theta: &Theta) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![theta.theta3.sqrt(), theta.theta2 * theta.theta3]))
    }

    fn s(&self, theta: &Theta) -> DVector<f64> {
        DVector::from_vec(vec![2.0 * theta.theta1.sqrt(), theta.theta1])
    }

    fn pi(&self, m: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![m.sqrt(), m * m]))
    }

    fn t_g(&self, _m: f64, y: &Vector3<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![checked_sqrt(y[2], "Y_θ3")?, y[1] * y[2]])))
    }

    fn t_s(&self, m: f64, y: &Vector3<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![2.0 * checked_sqrt(y[0], "Y_θ1")?, m * y[0]]))
    }

    fn kappa(&self, theta: &Theta) -> DVector<f64> {
        let (kp, ki) = pi_gains(theta);
        DVector::from_vec(vec![kp, ki])
    }

    fn feedback(&self, kappa: &DVector<f64>) -> Vector4<f64> {
        // u = K_P·(−y) + K_I·e_I
        Vector4::new(kappa[1], -kappa[0], 0.0, 0.0)
    }
}
