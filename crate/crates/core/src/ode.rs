//! Fixed-step classical Runge-Kutta integration.

use nalgebra::{DMatrix, DVector, SMatrix};

/// A state that can be advanced by an explicit integrator.
pub trait OdeState: Clone {
    /// Returns `self + h * rate`.
    fn add_scaled(&self, rate: &Self, h: f64) -> Self;

    /// True when every component is finite.
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        self + h * rate
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl<const R: usize, const C: usize> OdeState for SMatrix<f64, R, C> {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        self + rate * h
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl OdeState for DMatrix<f64> {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        self + rate * h
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl OdeState for DVector<f64> {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        self + rate * h
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<S, F>(t: f64, x: &S, dt: f64, f: F) -> S
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    let half = 0.5 * dt;
    let k1 = f(t, x);
    let k2 = f(t + half, &x.add_scaled(&k1, half));
    let k3 = f(t + half, &x.add_scaled(&k2, half));
    let k4 = f(t + dt, &x.add_scaled(&k3, dt));
    x.add_scaled(&k1, dt / 6.0).add_scaled(&k2, dt / 3.0).add_scaled(&k3, dt / 3.0).add_scaled(&k4, dt / 6.0)
}
