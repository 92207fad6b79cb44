//! Ground-truth two-mass drive with elastic coupling.
//!
//! States are in per-unit: motor speed `x1`, load speed `x2`, torsional torque
//! `x3`. The augmented model prepends the integral tracking error `e_I`, so
//! the augmented vector is ordered `[e_I, x1, x2, x3]`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::ode::{rk4_step, OdeState};

/// Mechanical time constants of the drive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Theta {
    /// Motor mechanical time constant.
    pub theta1: f64,
    /// Load mechanical time constant.
    pub theta2: f64,
    /// Elastic joint time constant.
    pub theta3: f64,
}

impl Theta {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        let theta = Theta { theta1, theta2, theta3 };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.theta1, self.theta2, self.theta3].iter().all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("time constants must be positive, got {self:?}")))
        }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta1, self.theta2, self.theta3)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        Theta::new(v[0], v[1], v[2])
    }

    /// Product `θ₁θ₂θ₃`.
    pub fn product(&self) -> f64 {
        self.theta1 * self.theta2 * self.theta3
    }

    /// Torsional resonance `√((θ₁+θ₂)/(θ₁θ₂θ₃))` in rad/s.
    pub fn resonance(&self) -> f64 {
        ((self.theta1 + self.theta2) / self.product()).sqrt()
    }
}

/// `(A, B, C, D)` of the unaugmented drive.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    /// Output row, stored as a column.
    pub c: Vector3<f64>,
    pub d: Vector3<f64>,
}

pub fn plant_matrices(theta: &Theta) -> Result<PlantMatrices> {
    theta.validate()?;
    let (t1, t2, t3) = (theta.theta1, theta.theta2, theta.theta3);
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0,       0.0,       -1.0 / t1,
        0.0,       0.0,        1.0 / t2,
        1.0 / t3, -1.0 / t3,   0.0,
    );
    Ok(PlantMatrices {
        a,
        b: Vector3::new(1.0 / t1, 0.0, 0.0),
        c: Vector3::new(1.0, 0.0, 0.0),
        d: Vector3::new(0.0, -1.0 / t2, 0.0),
    })
}

/// Drive augmented with the integral of the tracking error.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatrices {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub d: Vector4<f64>,
    /// Output row selecting `x1`, stored as a column.
    pub c: Vector4<f64>,
}

pub fn augmented_matrices(theta: &Theta) -> Result<AugmentedMatrices> {
    let p = plant_matrices(theta)?;
    let mut a = Matrix4::zeros();
    for j in 0..3 {
        a[(0, j + 1)] = -p.c[j];
    }
    a.fixed_view_mut::<3, 3>(1, 1).copy_from(&p.a);
    let mut b = Vector4::zeros();
    b.fixed_rows_mut::<3>(1).copy_from(&p.b);
    let mut d = Vector4::zeros();
    d.fixed_rows_mut::<3>(1).copy_from(&p.d);
    Ok(AugmentedMatrices { a, b, d, c: Vector4::new(0.0, 1.0, 0.0, 0.0) })
}

/// Autonomous linear disturbance generator `ẋ_δ = A_δ x_δ`, `δ = h_δᵀ x_δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoModel {
    pub a_delta: DMatrix<f64>,
    pub h_delta: DVector<f64>,
    pub x_delta0: DVector<f64>,
    /// Instant at which `x_δ = x_δ0`.
    pub t0: f64,
}

impl ExoModel {
    /// Constant disturbance of the given level (`A_δ = 0`, `h_δ = 1`).
    pub fn constant(level: f64) -> Self {
        ExoModel {
            a_delta: DMatrix::zeros(1, 1),
            h_delta: DVector::from_element(1, 1.0),
            x_delta0: DVector::from_element(1, level),
            t0: 0.0,
        }
    }

    pub fn order(&self) -> usize {
        self.h_delta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        if n == 0 || self.a_delta.shape() != (n, n) || self.x_delta0.len() != n {
            return Err(Error::config("exosystem dimensions are inconsistent"));
        }
        // Observability of (h_δᵀ, A_δ).
        let mut obs = DMatrix::zeros(n, n);
        let mut row = self.h_delta.transpose();
        for i in 0..n {
            obs.set_row(i, &row);
            row = &row * &self.a_delta;
        }
        if obs.rank(1e-12) < n {
            return Err(Error::config("exosystem pair (h_delta, A_delta) is not observable"));
        }
        Ok(())
    }

    /// `δ(t) = h_δᵀ Φ_δ(t) x_δ0`.
    pub fn delta(&self, t: f64) -> f64 {
        self.h_delta.dot(&(exo_fundamental(self, t) * &self.x_delta0))
    }

    /// Row `h_δᵀ Φ_δ(t)`.
    pub fn output_row(&self, t: f64) -> DVector<f64> {
        exo_fundamental(self, t).transpose() * &self.h_delta
    }
}

/// Fundamental matrix `Φ_δ(t) = exp(A_δ (t − t0))`.
pub fn exo_fundamental(exo: &ExoModel, t: f64) -> DMatrix<f64> {
    let n = exo.order();
    if exo.a_delta.iter().all(|v| *v == 0.0) {
        return DMatrix::identity(n, n);
    }
    (&exo.a_delta * (t - exo.t0)).exp()
}

/// Augmented drive state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Motor speed.
    pub x1: f64,
    /// Load speed.
    pub x2: f64,
    /// Torsional torque.
    pub x3: f64,
    /// Integral of `r − y`.
    pub e_i: f64,
}

impl PlantState {
    /// `[e_I, x1, x2, x3]`.
    pub fn augmented(&self) -> Vector4<f64> {
        Vector4::new(self.e_i, self.x1, self.x2, self.x3)
    }

    pub fn from_augmented(x: &Vector4<f64>) -> Self {
        PlantState { e_i: x[0], x1: x[1], x2: x[2], x3: x[3] }
    }

    pub fn physical(&self) -> Vector3<f64> {
        Vector3::new(self.x1, self.x2, self.x3)
    }

    /// Measured motor speed.
    pub fn y(&self) -> f64 {
        self.x1
    }
}

impl OdeState for PlantState {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        PlantState {
            x1: self.x1 + h * rate.x1,
            x2: self.x2 + h * rate.x2,
            x3: self.x3 + h * rate.x3,
            e_i: self.e_i + h * rate.e_i,
        }
    }

    fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite() && self.e_i.is_finite()
    }
}

/// Ground-truth drive. Owns the true `θ`.
#[derive(Debug, Clone)]
pub struct Plant {
    theta: Theta,
    m: AugmentedMatrices,
}

impl Plant {
    pub fn new(theta: Theta) -> Result<Self> {
        Ok(Plant { theta, m: augmented_matrices(&theta)? })
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn matrices(&self) -> &AugmentedMatrices {
        &self.m
    }

    /// Right-hand side of the augmented dynamics.
    pub fn derivative(&self, x: &PlantState, u: f64, delta: f64, r: f64) -> PlantState {
        let xa = x.augmented();
        let mut dx = self.m.a * xa + self.m.b * u + self.m.d * delta;
        dx[0] += r;
        PlantState::from_augmented(&dx)
    }

    /// One RK4 step with `u`, `δ` and `r` held over the step.
    pub fn step(&self, state: &PlantState, u: f64, delta: f64, r: f64, dt: f64) -> Result<PlantState> {
        if !(dt > 0.0) {
            return Err(Error::domain("step size must be positive"));
        }
        let next = rk4_step(0.0, state, dt, |_, x| self.derivative(x, u, delta, r));
        if !next.is_finite() {
            return Err(Error::NumericFault { step: 0, t: f64::NAN, what: "plant state".into() });
        }
        Ok(next)
    }
}

/// Free function form of [`Plant::step`].
pub fn plant_step(theta: &Theta, state: &PlantState, u: f64, delta: f64, r: f64, dt: f64) -> Result<PlantState> {
    Plant::new(*theta)?.step(state, u, delta, r, dt)
}
