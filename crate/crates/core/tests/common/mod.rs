//! Properties shared by the proptest suites and the acceptance runner.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use vibsup_core::adapt::{update_eta, update_kappa, update_ti, update_xdelta0, Estimates, GainSchedule, GammaMode};
use vibsup_core::canonical::{eta_of_theta, phi_regressor, psi_ab_select, theta_of_psi_ab};
use vibsup_core::control::{control_law, control_law_pi_form};
use vibsup_core::drem::{Regression, Stage};
use vibsup_core::gains::{family_pi, family_pole_placement, DesignSpec, MappingFamily};
use vibsup_core::linalg::adjugate_det;
use vibsup_core::ode::rk4_step;
use vibsup_core::plant::augmented_matrices;
use vibsup_core::{Theta, Vector9};

pub const SPEC: DesignSpec = DesignSpec { omega_d: 25.0, xi_d: 0.7 };

pub fn theta() -> impl Strategy<Value = Theta> {
    (0.02f64..5.0, 0.02f64..5.0, 1e-4f64..0.1).prop_map(|(a, b, c)| Theta::new(a, b, c).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn max_rel(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    let scale = want.amax().max(1.0);
    (got - want).amax() / scale
}

pub fn psi_round_trip(th: Theta) -> Result<(), TestCaseError> {
    let psi = psi_ab_select(&eta_of_theta(&th).unwrap());
    let back = theta_of_psi_ab(&psi).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (a, b) in back.as_vector().iter().zip(th.as_vector().iter()) {
        let e = (a - b).abs() / b.abs();
        prop_assert!(e <= 1e-12, "{th:?} -> {back:?} ({e:e})");
    }
    Ok(())
}

/// `Π(m)𝒢(θ) = 𝒯_𝒢(m, mθ)`, `Π(m)𝒮(θ) = 𝒯_𝒮(m, mθ)` and `𝒮 = 𝒢κ`.
pub fn mapping_identities(family: &dyn MappingFamily, th: Theta, m: f64) -> Result<(), TestCaseError> {
    let y = th.as_vector() * m;
    let pi = family.pi(m);
    let tg = family.t_g(m, &y).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let ts = family.t_s(m, &y).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let lhs_g = &pi * family.g(&th);
    let lhs_s = &pi * family.s(&th);
    let eg = max_rel(&tg, &lhs_g);
    let es = max_rel(
        &DMatrix::from_column_slice(ts.len(), 1, ts.as_slice()),
        &DMatrix::from_column_slice(lhs_s.len(), 1, lhs_s.as_slice()),
    );
    prop_assert!(eg <= 1e-9, "T_G mismatch {eg:e}");
    prop_assert!(es <= 1e-9, "T_S mismatch {es:e}");
    let gk = family.g(&th) * family.kappa(&th);
    let s = family.s(&th);
    for i in 0..s.len() {
        prop_assert!(rel(gk[i], s[i]) <= 1e-9, "S != G kappa at {i}: {} vs {}", gk[i], s[i]);
    }
    Ok(())
}

pub fn pole_placement_identities((th, m): (Theta, f64)) -> Result<(), TestCaseError> {
    mapping_identities(&family_pole_placement(SPEC), th, m)
}

pub fn pi_identities((th, m): (Theta, f64)) -> Result<(), TestCaseError> {
    mapping_identities(&family_pi(), th, m)
}

pub fn scaled() -> impl Strategy<Value = f64> {
    0.05f64..20.0
}

pub fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

pub fn adjugate_identity(a: DMatrix<f64>) -> Result<(), TestCaseError> {
    let n = a.nrows();
    let (adj, det) = adjugate_det(&a);
    let lhs = &adj * &a;
    let rhs = DMatrix::identity(n, n) * det;
    let scale = (adj.amax() * a.amax() * n as f64).max(1.0);
    let e = (lhs - rhs).amax() / scale;
    prop_assert!(e <= 1e-9, "n = {n}: {e:e}");
    let lu = a.clone().lu().determinant();
    prop_assert!((det - lu).abs() <= 1e-9 * scale, "det {det} vs LU {lu}");
    Ok(())
}

pub fn control_inputs() -> impl Strategy<Value = (Vector4<f64>, Vector2<f64>, Vector3<f64>)> {
    let v = || -100.0f64..100.0;
    (
        (v(), v(), v(), v()).prop_map(|(a, b, c, d)| Vector4::new(a, b, c, d)),
        (v(), v()).prop_map(|(a, b)| Vector2::new(a, b)),
        (v(), v(), v()).prop_map(|(a, b, c)| Vector3::new(a, b, c)),
    )
}

pub fn dual_assembly((k, e, x): (Vector4<f64>, Vector2<f64>, Vector3<f64>)) -> Result<(), TestCaseError> {
    let a = control_law(&k, &e, &x);
    let b = control_law_pi_form(&k, &e, &x);
    let scale = k.abs().dot(&Vector4::new(e[1].abs(), e[0].abs(), x[1].abs(), x[2].abs())).max(1.0);
    prop_assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
    Ok(())
}

/// Everything the four update laws consume.
#[derive(Debug, Clone)]
pub struct LawInputs {
    pub est: Estimates,
    pub y_eta: Vector9,
    pub y_ti: Matrix3<f64>,
    pub y_xd: DVector<f64>,
    pub y_k: DVector<f64>,
    pub m: f64,
    pub signals: [f64; 3],
    pub xi: Vector3<f64>,
    pub xi_dot: Vector3<f64>,
    pub x_hat: Vector4<f64>,
    pub mode: GammaMode,
}

pub fn law_inputs(m: impl Strategy<Value = f64>) -> impl Strategy<Value = LawInputs> {
    let v = || -10.0f64..10.0;
    (
        proptest::collection::vec(v(), 9 + 9 + 1 + 4),
        proptest::collection::vec(v(), 9 + 9 + 1 + 4),
        m,
        proptest::collection::vec(v(), 3 + 3 + 3 + 4),
        any::<bool>(),
    )
        .prop_map(|(e, y, m, s, scaled)| LawInputs {
            est: Estimates {
                eta_hat: Vector9::from_column_slice(&e[0..9]),
                ti_hat: Matrix3::from_column_slice(&e[9..18]),
                xdelta0_hat: DVector::from_column_slice(&e[18..19]),
                kappa_hat: DVector::from_column_slice(&e[19..23]),
            },
            y_eta: Vector9::from_column_slice(&y[0..9]) * m,
            y_ti: Matrix3::from_column_slice(&y[9..18]) * m,
            y_xd: DVector::from_column_slice(&y[18..19]) * m,
            y_k: DVector::from_column_slice(&y[19..23]) * m,
            m,
            signals: [s[0], s[1], s[2]],
            xi: Vector3::new(s[3], s[4], s[5]),
            xi_dot: Vector3::new(s[6], s[7], s[8]),
            x_hat: Vector4::new(s[9], s[10], s[11], s[12]),
            mode: if scaled { GammaMode::Scaled } else { GammaMode::Constant },
        })
}

pub fn schedule(mode: GammaMode) -> GainSchedule {
    GainSchedule { gamma0: 1e-3, gamma1: 1.0, rho: 1e-6, c_bound: 0.0, mode }
}

/// Runs all four laws once with `(Y, M)` scaled by `s`.
pub fn all_laws(inp: &LawInputs, s: f64, dt: f64) -> Estimates {
    let sched = schedule(inp.mode);
    let [y, u, d] = inp.signals;
    let phi = phi_regressor(y, u, d);
    let m = inp.m * s;
    let est = update_eta(&inp.est, &Regression::new(inp.y_eta * s, m, Stage::Eta), &phi, &sched, dt).unwrap();
    let est = update_xdelta0(&est, &Regression::new(&inp.y_xd * s, m, Stage::XDelta0), &sched, dt).unwrap();
    let est = update_ti(&est, &Regression::new(inp.y_ti * s, m, Stage::Ti), &inp.xi, &inp.xi_dot, &sched, dt).unwrap();
    update_kappa(&est, &Regression::new(&inp.y_k * s, m, Stage::Kappa), &inp.x_hat, &sched, dt).unwrap()
}

/// Below the threshold the estimates come back bit for bit.
pub fn dead_zone_freeze(inp: LawInputs) -> Result<(), TestCaseError> {
    let out = all_laws(&inp, 1.0, 1e-3);
    let bits = |e: &Estimates| -> Vec<u64> {
        e.eta_hat
            .iter()
            .chain(e.ti_hat.iter())
            .chain(e.xdelta0_hat.iter())
            .chain(e.kappa_hat.iter())
            .map(|v| v.to_bits())
            .collect()
    };
    prop_assert_eq!(bits(&out), bits(&inp.est));
    Ok(())
}

pub fn frozen_m() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), -9.99e-7f64..9.99e-7]
}

pub fn active_m() -> impl Strategy<Value = f64> {
    prop_oneof![1e-5f64..1e3, -1e3f64..-1e-5]
}

pub fn scale_invariance((inp, s): (LawInputs, f64)) -> Result<(), TestCaseError> {
    let a = all_laws(&inp, 1.0, 1e-2);
    let b = all_laws(&inp, s, 1e-2);
    let diff =
        |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs() / q.abs().max(1.0)).fold(0.0, f64::max);
    let e = diff(a.eta_hat.as_slice(), b.eta_hat.as_slice())
        .max(diff(a.ti_hat.as_slice(), b.ti_hat.as_slice()))
        .max(diff(a.xdelta0_hat.as_slice(), b.xdelta0_hat.as_slice()))
        .max(diff(a.kappa_hat.as_slice(), b.kappa_hat.as_slice()));
    prop_assert!(e <= 1e-12, "scale {s}: {e:e}");
    Ok(())
}

pub fn scale_factor() -> impl Strategy<Value = f64> {
    prop_oneof![1e-8f64..1e-1, 1e1f64..1e8]
}

/// Global error at `t = 1` of RK4 on the undamped plant (resonance and
/// integrator modes), against the matrix exponential, for `n` steps.
pub fn rk4_error(theta: &Theta, n: usize) -> f64 {
    let a: Matrix4<f64> = augmented_matrices(theta).unwrap().a;
    let x0 = Vector4::new(0.1, 1.0, -0.5, 0.3);
    let exact = a.exp() * x0;
    let dt = 1.0 / n as f64;
    let mut x = x0;
    for k in 0..n {
        x = rk4_step(k as f64 * dt, &x, dt, |_, v| a * v);
    }
    (x - exact).norm() / exact.norm()
}

/// Observed convergence order from halving the step.
pub fn rk4_order(theta: &Theta, n: usize) -> f64 {
    let e1 = rk4_error(theta, n);
    let e2 = rk4_error(theta, 2 * n);
    (e1 / e2).log2()
}
