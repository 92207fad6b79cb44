//! Sensorless adaptive vibration suppression for two-mass electromechanical
//! drives.
//!
//! Only the motor speed and the motor torque are measured. Physical load-side
//! states and the parameters of a pole-placement (or PI) controller are
//! reconstructed online from a chain of scalar-regressor regressions built by
//! dynamic regressor extension and mixing, so that no estimate is ever divided
//! by.
//!
//! Module map:
//!
//! * [`plant`] - ground-truth two-mass model, augmented integral-error
//!   dynamics and the disturbance exosystem.
//! * [`canonical`] - observer canonical form: `T(θ)`, `T_I(θ)`, `η(θ)` and
//!   the `ψ_ab` inversion.
//! * [`gains`] - ideal controller formulas and the mapping families that turn
//!   a regression in `θ` into one in the controller parameters.
//! * [`drem`] - filter bank and the regression pipeline.
//! * [`adapt`] - gradient identification laws with dead zone.
//! * [`observer`] - adaptive state observer.
//! * [`control`] - adaptive control law, reference with dither, reset
//!   supervisor.
//! * [`harness`] - scenario configuration, the coupled simulation loop,
//!   telemetry, CSV and SVG output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod canonical;
pub mod control;
pub mod drem;
pub mod error;
pub mod gains;
pub mod harness;
pub mod linalg;
pub mod observer;
pub mod ode;
pub mod plant;

pub use error::{Error, Result};
pub use plant::Theta;

pub use nalgebra::{Matrix3, Matrix4, SMatrix, SVector, Vector3, Vector4, Vector6};

/// 9-vector of canonical-form parameters `[ψ_a; ψ_b; ψ_d]`.
pub type Vector9 = SVector<f64, 9>;
/// 6×6 matrix (DREM accumulator).
pub type Matrix6 = SMatrix<f64, 6, 6>;
