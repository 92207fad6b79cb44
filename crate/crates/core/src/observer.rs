//! Adaptive state observer in canonical coordinates.
//!
//! `ξ̂̇ = A₀ξ̂ + φᵀ(y, u, δ̂)η̂ + L(ŷ − y)`, `ŷ = C₀ᵀξ̂`, so the estimation
//! error is driven by `A_L = A₀ + LC₀ᵀ`. Physical states are recovered as
//! `x̂_p = T̂_I ξ̂` and the disturbance as `δ̂ = h_δᵀΦ_δ x̂_δ0`.

use nalgebra::{Complex, DVector, Matrix3, Vector3};

use crate::adapt::Estimates;
use crate::canonical::{a0, c0, phi_regressor};
use crate::error::{Error, Result};
use crate::linalg::poly_from_roots;
use crate::ode::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObserverState {
    pub xi_hat: Vector3<f64>,
    /// Right-hand side at the start of the last step.
    pub last_xi_hat_dot: Vector3<f64>,
}

/// `ξ̂̇` for given estimates and measured signals.
pub fn observer_rhs(
    xi_hat: &Vector3<f64>,
    eta_hat: &crate::Vector9,
    y: f64,
    u: f64,
    delta_hat: f64,
    l: &Vector3<f64>,
) -> Vector3<f64> {
    a0() * xi_hat + phi_regressor(y, u, delta_hat) * eta_hat + l * (xi_hat[0] - y)
}

/// `δ̂ = h_δᵀΦ_δ(t)·x̂_δ0` for the exosystem output row `h_δᵀΦ_δ(t)`.
pub fn delta_hat(exo_row: &DVector<f64>, xdelta0_hat: &DVector<f64>) -> f64 {
    exo_row.dot(xdelta0_hat)
}

/// Advances `ξ̂` one step with `y`, `u`, `δ̂` and the estimates held.
/// Returns the new state, `x̂_p = T̂_I ξ̂` and `δ̂`.
pub fn observer_step(
    obs: &ObserverState,
    est: &Estimates,
    y: f64,
    u: f64,
    exo_row: &DVector<f64>,
    l: &Vector3<f64>,
    dt: f64,
) -> Result<(ObserverState, Vector3<f64>, f64)> {
    if !(dt > 0.0) {
        return Err(Error::domain("step size must be positive"));
    }
    let dh = delta_hat(exo_row, &est.xdelta0_hat);
    let rhs = |_: f64, x: &Vector3<f64>| observer_rhs(x, &est.eta_hat, y, u, dh, l);
    let xi = rk4_step(0.0, &obs.xi_hat, dt, rhs);
    if !xi.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericFault { step: 0, t: f64::NAN, what: "observer".into() });
    }
    let next = ObserverState { xi_hat: xi, last_xi_hat_dot: rhs(0.0, &obs.xi_hat) };
    Ok((next, est.ti_hat * xi, dh))
}

/// `L` such that `A₀ + LC₀ᵀ` has the requested spectrum.
///
/// `A₀ + LC₀ᵀ` is the companion matrix with first column `L`, whose
/// characteristic polynomial is `s³ − L₁s² − L₂s − L₃`.
pub fn place_output_injection(poles: &[Complex<f64>; 3]) -> Result<Vector3<f64>> {
    if poles.iter().any(|p| !(p.re < 0.0)) {
        return Err(Error::config("requested poles are not in the open left half plane"));
    }
    for p in poles {
        if p.im != 0.0 && !poles.iter().any(|q| (q - p.conj()).norm() < 1e-12) {
            return Err(Error::config("complex poles must come in conjugate pairs"));
        }
    }
    let c = poly_from_roots(poles);
    Ok(Vector3::new(-c[1], -c[2], -c[3]))
}

/// Same pole set as a filter gain `K` with `A_K = A₀ − KC₀ᵀ`.
pub fn place_filter_gain(poles: &[Complex<f64>; 3]) -> Result<Vector3<f64>> {
    Ok(-place_output_injection(poles)?)
}

pub fn a_l(l: &Vector3<f64>) -> Matrix3<f64> {
    a0() + l * c0().transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{eta_of_theta, transform_matrices};
    use crate::plant::{Plant, PlantState, Theta};

    const NOMINAL: Theta = Theta { theta1: 0.203, theta2: 0.203, theta3: 0.0026 };

    fn triple(p: f64) -> [Complex<f64>; 3] {
        [Complex::new(p, 0.0); 3]
    }

    #[test]
    fn placement_at_minus_fifty() {
        let l = place_output_injection(&triple(-50.0)).unwrap();
        assert_eq!(l, Vector3::new(-150.0, -7500.0, -125000.0));
        let k = place_filter_gain(&triple(-50.0)).unwrap();
        assert_eq!(k, Vector3::new(150.0, 7500.0, 125000.0));
    }

    #[test]
    fn placement_at_minus_one() {
        let l = place_output_injection(&triple(-1.0)).unwrap();
        assert_eq!(l, Vector3::new(-3.0, -3.0, -1.0));
    }

    #[test]
    fn placement_matches_eigenvalues() {
        let req = [Complex::new(-2.0, 3.0), Complex::new(-2.0, -3.0), Complex::new(-7.0, 0.0)];
        let l = place_output_injection(&req).unwrap();
        let mut got: Vec<_> = a_l(&l).complex_eigenvalues().iter().copied().collect();
        got.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut want = req.to_vec();
        want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-9);
        }
    }

    #[test]
    fn placement_rejects_unstable() {
        assert!(place_output_injection(&triple(0.0)).is_err());
        let bad = [Complex::new(-1.0, 1.0), Complex::new(-1.0, 2.0), Complex::new(-1.0, 0.0)];
        assert!(place_output_injection(&bad).is_err());
    }

    #[test]
    fn zero_stays_zero() {
        let est = Estimates::new(1, DVector::zeros(4));
        let l = place_output_injection(&triple(-50.0)).unwrap();
        let (o, xp, dh) =
            observer_step(&ObserverState::default(), &est, 0.0, 0.0, &DVector::from_element(1, 1.0), &l, 1e-3).unwrap();
        assert_eq!(o, ObserverState::default());
        assert_eq!(xp, Vector3::zeros());
        assert_eq!(dh, 0.0);
    }

    fn perfect(ti: Matrix3<f64>) -> Estimates {
        let mut est = Estimates::new(1, DVector::zeros(4));
        est.eta_hat = eta_of_theta(&NOMINAL).unwrap().stacked();
        est.ti_hat = ti;
        est.xdelta0_hat[0] = 0.5;
        est
    }

    /// Twin simulation: plant and observer integrated jointly, input held.
    fn twin(xi0: Option<Vector3<f64>>, t_end: f64) -> (Vec<f64>, f64) {
        let (t_mat, ti) = transform_matrices(&NOMINAL).unwrap();
        let est = perfect(ti);
        let plant = Plant::new(NOMINAL).unwrap();
        let l = place_output_injection(&triple(-50.0)).unwrap();
        let x0 = PlantState { x1: 0.2, x2: -0.1, x3: 0.05, e_i: 0.0 };
        let xi = xi0.unwrap_or(t_mat * x0.physical());
        let mut s = nalgebra::SVector::<f64, 7>::from_column_slice(&[x0.e_i, x0.x1, x0.x2, x0.x3, xi[0], xi[1], xi[2]]);
        let dt = 1e-4;
        let steps = (t_end / dt).round() as usize;
        let mut errs = Vec::new();
        let mut worst: f64 = 0.0;
        for k in 0..steps {
            let u = 3.0 * (7.0 * k as f64 * dt).sin();
            s = rk4_step(0.0, &s, dt, |_, v| {
                let p = PlantState::from_augmented(&v.fixed_rows::<4>(0).into_owned());
                let xi = v.fixed_rows::<3>(4).into_owned();
                let dp = plant.derivative(&p, u, 0.5, 0.0).augmented();
                let dx = observer_rhs(&xi, &est.eta_hat, p.y(), u, 0.5, &l);
                nalgebra::SVector::<f64, 7>::from_column_slice(&[dp[0], dp[1], dp[2], dp[3], dx[0], dx[1], dx[2]])
            });
            let p = PlantState::from_augmented(&s.fixed_rows::<4>(0).into_owned());
            let xi = s.fixed_rows::<3>(4).into_owned();
            worst = worst.max((est.ti_hat * xi - p.physical()).norm());
            errs.push((xi - t_mat * p.physical()).norm());
        }
        (errs, worst)
    }

    #[test]
    fn perfect_estimates_track_plant() {
        let (_, worst) = twin(None, 5.0);
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn wrong_initial_state_decays_at_observer_poles() {
        let (errs, _) = twin(Some(Vector3::new(1.0, 0.0, 0.0)), 0.4);
        // Triple pole at −50: the error is a polynomial in t times e^{−50t}.
        let e1 = errs[1999];
        let e2 = errs[3999];
        let rate = (e2 / e1).ln() / 0.2;
        assert!(rate < -40.0 && rate > -60.0, "rate {rate}");
    }
}
