//! Observer canonical form of the two-mass drive.
//!
//! With `ξ = T(θ)·x_p` the drive becomes
//! `ξ̇ = A₀ξ + ψ_a y + ψ_b u + ψ_d δ`, `y = C₀ᵀξ`, where `A₀` is the 3×3 upper
//! shift and every unknown enters affinely through `η = [ψ_a; ψ_b; ψ_d]`.
//! Selector matrices are written out as constants so they can be compared
//! entry by entry with their printed forms.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::plant::{plant_matrices, Theta};
use crate::Vector9;

/// Upper shift matrix `A₀`.
pub fn a0() -> Matrix3<f64> {
    Matrix3::new(0., 1., 0., 0., 0., 1., 0., 0., 0.)
}

/// Output vector `C₀` (first canonical coordinate).
pub fn c0() -> Vector3<f64> {
    Vector3::new(1.0, 0.0, 0.0)
}

/// `ℒ_ab`: picks `(η₄, η₂, η₆)` (1-based) out of the 9-vector.
#[rustfmt::skip]
pub fn l_ab() -> SMatrix<f64, 3, 9> {
    SMatrix::<f64, 3, 9>::from_row_slice(&[
        0., 0., 0., 1., 0., 0., 0., 0., 0.,
        0., 1., 0., 0., 0., 0., 0., 0., 0.,
        0., 0., 0., 0., 0., 1., 0., 0., 0.,
    ])
}

/// `ℒ_a`: `ψ_a = ℒ_a η`.
#[rustfmt::skip]
pub fn l_a() -> SMatrix<f64, 3, 9> {
    SMatrix::<f64, 3, 9>::from_row_slice(&[
        1., 0., 0., 0., 0., 0., 0., 0., 0.,
        0., 1., 0., 0., 0., 0., 0., 0., 0.,
        0., 0., 1., 0., 0., 0., 0., 0., 0.,
    ])
}

/// `ℒ_b`: `ψ_b = ℒ_b η`.
#[rustfmt::skip]
pub fn l_b() -> SMatrix<f64, 3, 9> {
    SMatrix::<f64, 3, 9>::from_row_slice(&[
        0., 0., 0., 1., 0., 0., 0., 0., 0.,
        0., 0., 0., 0., 1., 0., 0., 0., 0.,
        0., 0., 0., 0., 0., 1., 0., 0., 0.,
    ])
}

/// `ℒ_d`: maps `[ψ_a; ψ_b]` to `ψ_d = [0, 0, −ψ_b3]`.
#[rustfmt::skip]
pub fn l_d() -> SMatrix<f64, 3, 6> {
    SMatrix::<f64, 3, 6>::from_row_slice(&[
        0., 0., 0., 0., 0.,  0.,
        0., 0., 0., 0., 0.,  0.,
        0., 0., 0., 0., 0., -1.,
    ])
}

/// Stacked canonical parameters `[ψ_a; ψ_b; ψ_d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaVector {
    pub psi_a: Vector3<f64>,
    pub psi_b: Vector3<f64>,
    pub psi_d: Vector3<f64>,
}

impl EtaVector {
    pub fn stacked(&self) -> Vector9 {
        let mut v = Vector9::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.psi_a);
        v.fixed_rows_mut::<3>(3).copy_from(&self.psi_b);
        v.fixed_rows_mut::<3>(6).copy_from(&self.psi_d);
        v
    }

    pub fn from_stacked(v: &Vector9) -> Self {
        EtaVector {
            psi_a: v.fixed_rows::<3>(0).into_owned(),
            psi_b: v.fixed_rows::<3>(3).into_owned(),
            psi_d: v.fixed_rows::<3>(6).into_owned(),
        }
    }
}

pub fn eta_of_theta(theta: &Theta) -> Result<EtaVector> {
    theta.validate()?;
    let prod = theta.product();
    Ok(EtaVector {
        psi_a: Vector3::new(0.0, -(theta.theta1 + theta.theta2) / prod, 0.0),
        psi_b: Vector3::new(1.0 / theta.theta1, 0.0, 1.0 / prod),
        psi_d: Vector3::new(0.0, 0.0, -1.0 / prod),
    })
}

/// Closed-form `T_I(θ) = T⁻¹(θ)`.
pub fn ti_closed_form(theta: &Theta) -> Matrix3<f64> {
    let (t1, t2, t3) = (theta.theta1, theta.theta2, theta.theta3);
    Matrix3::new(1.0, 0.0, 0.0, -t1 / t2, 0.0, t1 * t3, 0.0, -t1, 0.0)
}

/// `T(θ)` and `T_I(θ)`.
pub fn transform_matrices(theta: &Theta) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    theta.validate()?;
    let (t1, t2, t3) = (theta.theta1, theta.theta2, theta.theta3);
    #[rustfmt::skip]
    let t = Matrix3::new(
        1.0,             0.0,             0.0,
        0.0,             0.0,             -1.0 / t1,
        1.0 / (t2 * t3), 1.0 / (t1 * t3), 0.0,
    );
    Ok((t, ti_closed_form(theta)))
}

/// `T_I = [A²𝒪₃, A𝒪₃, 𝒪₃]` built from the observability matrix.
pub fn ti_from_observability(theta: &Theta) -> Result<Matrix3<f64>> {
    let p = plant_matrices(theta)?;
    let c = p.c.transpose();
    let obs_inv = Matrix3::from_rows(&[c, c * p.a, c * p.a * p.a]);
    let obs = obs_inv.try_inverse().ok_or_else(|| Error::Singular("observability matrix".into()))?;
    let o3 = obs.column(2).into_owned();
    Ok(Matrix3::from_columns(&[p.a * p.a * o3, p.a * o3, o3]))
}

/// The 3×9 regressor `φᵀ(y, u, δ)` with `φᵀη = ψ_a y + ψ_b u + ψ_d δ`.
pub fn phi_regressor(y: f64, u: f64, delta: f64) -> SMatrix<f64, 3, 9> {
    let mut m = SMatrix::<f64, 3, 9>::zeros();
    m[(0, 3)] = u;
    m[(1, 1)] = y;
    m[(2, 5)] = u;
    m[(2, 8)] = delta;
    m
}

/// `ψ_ab = ℒ_ab η = (1/θ₁, −(θ₁+θ₂)/(θ₁θ₂θ₃), 1/(θ₁θ₂θ₃))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiAb {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
}

impl PsiAb {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.psi1, self.psi2, self.psi3)
    }
}

pub fn psi_ab_select(eta: &EtaVector) -> PsiAb {
    let v = l_ab() * eta.stacked();
    PsiAb { psi1: v[0], psi2: v[1], psi3: v[2] }
}

/// Inverse of `θ ↦ ψ_ab`.
pub fn theta_of_psi_ab(psi: &PsiAb) -> Result<Theta> {
    let scale = psi.psi1.abs().max(psi.psi2.abs()).max(psi.psi3.abs());
    let tiny = f64::EPSILON * scale;
    if psi.psi1.abs() <= tiny || psi.psi3.abs() <= tiny {
        return Err(Error::Singular("ψ₁ or ψ₃ vanishes".into()));
    }
    let inv1 = 1.0 / psi.psi1;
    let w = -inv1 * psi.psi3 - psi.psi2;
    if w.abs() <= tiny {
        return Err(Error::Singular("−ψ₃/ψ₁ − ψ₂ vanishes".into()));
    }
    Theta::new(inv1, w / psi.psi3, 1.0 / (inv1 * w))
}

/// Analytic Jacobian `∇_θ ψ_ab`.
pub fn psi_ab_jacobian(theta: &Theta) -> Matrix3<f64> {
    let (t1, t2, t3) = (theta.theta1, theta.theta2, theta.theta3);
    #[rustfmt::skip]
    let j = Matrix3::new(
        -1.0 / (t1 * t1),               0.0,                            0.0,
        1.0 / (t1 * t1 * t3),           1.0 / (t2 * t2 * t3),           (t1 + t2) / (t1 * t2 * t3 * t3),
        -1.0 / (t1 * t1 * t2 * t3),     -1.0 / (t1 * t2 * t2 * t3),     -1.0 / (t1 * t2 * t3 * t3),
    );
    j
}
