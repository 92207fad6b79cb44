//! The coupled fixed-step loop.
//!
//! One step from `t_k` to `t_{k+1}`:
//!
//! 1. `u_k` from the estimates available at `t_k` (held over the step);
//! 2. plant, filter bank, observer `ξ̂` and the ideal reference model are
//!    integrated together by one RK4 step, with `r`, `δ` and `h_δᵀΦ_δ`
//!    evaluated at the stage times;
//! 3. integrals and regressions at `t_{k+1}`;
//! 4. identification laws (regressions and gains held over the step);
//! 5. `x̂_p` and `δ̂` from the new estimates;
//! 6. reset supervisor.
//!
//! Integrating everything driven by `y` in one RK4 state keeps the linear
//! relations between plant and filters exact up to rounding, which the
//! regressions rely on.

use nalgebra::{DVector, Matrix4, Vector2, Vector3, Vector4};

use crate::adapt::{update_eta, update_kappa, update_ti, update_xdelta0, Estimates};
use crate::canonical::{eta_of_theta, phi_regressor, ti_closed_form};
use crate::control::{control_law, reference, supervisor_step, ResetPolicy, SupervisorAction};
use crate::drem::{regression_chain, FeWindow, FilterBank, FilterStates, RegressionChain};
use crate::error::{Error, Result};
use crate::harness::config::Scenario;
use crate::harness::telemetry::{Record, Telemetry};
use crate::observer::observer_rhs;
use crate::ode::{rk4_step, OdeState};
use crate::plant::{exo_fundamental, Plant, PlantState, Theta};

#[derive(Debug, Clone)]
struct Joint {
    plant: PlantState,
    filters: FilterStates,
    xi_hat: Vector3<f64>,
    x_ref: Vector4<f64>,
}

impl OdeState for Joint {
    fn add_scaled(&self, r: &Self, h: f64) -> Self {
        Joint {
            plant: self.plant.add_scaled(&r.plant, h),
            filters: self.filters.add_scaled(&r.filters, h),
            xi_hat: self.xi_hat + r.xi_hat * h,
            x_ref: self.x_ref + r.x_ref * h,
        }
    }

    fn is_finite(&self) -> bool {
        self.plant.is_finite()
            && self.filters.is_finite()
            && self.xi_hat.iter().all(|v| v.is_finite())
            && self.x_ref.iter().all(|v| v.is_finite())
    }
}

/// Ground-truth quantities for diagnostics.
#[derive(Debug, Clone)]
pub struct Truth {
    pub theta: Theta,
    pub eta: crate::Vector9,
    pub ti: nalgebra::Matrix3<f64>,
    pub xdelta0: DVector<f64>,
    pub kappa: DVector<f64>,
}

/// Stepping interface to the loop; [`run`] drives it to the end.
pub struct Simulation<'a> {
    sc: &'a Scenario,
    k: u64,
    plant: Plant,
    a_ref: Matrix4<f64>,
    state: PlantState,
    bank: FilterBank,
    xi_hat: Vector3<f64>,
    x_ref: Vector4<f64>,
    est: Estimates,
    x_p_hat: Vector3<f64>,
    delta_hat: f64,
    u: f64,
    t_i: f64,
    policy: ResetPolicy,
    chain: Option<RegressionChain>,
    fe: FeWindow,
    resets: Vec<f64>,
    reset_now: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(sc: &'a Scenario) -> Result<Self> {
        let plant = Plant::new(sc.theta0)?;
        let a_ref = closed_loop(sc, &plant);
        let state = PlantState { x1: sc.x0[0], x2: sc.x0[1], x3: sc.x0[2], e_i: 0.0 };
        let t_eps = sc.filter.t_eps;
        let mut sim = Simulation {
            sc,
            k: 0,
            plant,
            a_ref,
            x_ref: state.augmented(),
            state,
            bank: FilterBank::new(&sc.filter),
            xi_hat: Vector3::zeros(),
            est: Estimates::new(sc.exo.order(), sc.kappa0.clone()),
            x_p_hat: Vector3::zeros(),
            delta_hat: 0.0,
            u: 0.0,
            t_i: t_eps,
            policy: ResetPolicy::new(sc.f_max, sc.refractory, t_eps)?,
            chain: None,
            fe: FeWindow::new(sc.fe_window.0, sc.fe_window.1),
            resets: Vec::new(),
            reset_now: false,
        };
        sim.bank.accumulate(&sc.filter, 0.0, state.y());
        sim.delta_hat = sim.exo_row(0.0).dot(&sim.est.xdelta0_hat);
        sim.u = sim.control();
        Ok(sim)
    }

    pub fn t(&self) -> f64 {
        self.k as f64 * self.sc.dt
    }

    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.sc.steps
    }

    pub fn plant_state(&self) -> &PlantState {
        &self.state
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn estimates(&self) -> &Estimates {
        &self.est
    }

    pub fn x_p_hat(&self) -> &Vector3<f64> {
        &self.x_p_hat
    }

    pub fn xi_hat(&self) -> &Vector3<f64> {
        &self.xi_hat
    }

    /// Regressions at the current instant (after the first step past `t_ε`).
    pub fn chain(&self) -> Option<&RegressionChain> {
        self.chain.as_ref()
    }

    pub fn resets(&self) -> &[f64] {
        &self.resets
    }

    pub fn fe_level(&self) -> f64 {
        self.fe.level()
    }

    pub fn truth(&self) -> Truth {
        let theta = *self.plant.theta();
        Truth {
            theta,
            eta: eta_of_theta(&theta).expect("validated theta").stacked(),
            ti: ti_closed_form(&theta),
            xdelta0: self.sc.xdelta0_at(self.k).clone(),
            kappa: self.sc.family.kappa(&theta),
        }
    }

    fn exo_row(&self, t: f64) -> DVector<f64> {
        exo_fundamental(&self.sc.exo, t).transpose() * &self.sc.exo.h_delta
    }

    fn r_at(&self, t: f64) -> f64 {
        if self.sc.dither_on && t >= self.sc.filter.t_eps {
            reference(&self.sc.reference, t, self.t_i)
        } else {
            self.sc.reference.mainline.at(t)
        }
    }

    fn control(&self) -> f64 {
        let fb = self.sc.family.feedback(&self.est.kappa_hat);
        let y = self.state.y();
        control_law(&fb, &Vector2::new(-y, self.state.e_i), &self.x_p_hat)
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<()> {
        let sc = self.sc;
        let dt = sc.dt;
        let t = self.t();
        let theta = sc.theta_at(self.k);
        if theta != *self.plant.theta() {
            self.plant = Plant::new(theta)?;
            self.a_ref = closed_loop(sc, &self.plant);
        }
        let xd0 = sc.xdelta0_at(self.k).clone();
        let u = self.u;
        let eta_hat = self.est.eta_hat;
        let xd0_hat = self.est.xdelta0_hat.clone();
        let d_vec = self.plant.matrices().d;

        let joint =
            Joint { plant: self.state, filters: self.bank.states.clone(), xi_hat: self.xi_hat, x_ref: self.x_ref };
        let next = rk4_step(t, &joint, dt, |tau, s| {
            let row = self.exo_row(tau);
            let delta = row.dot(&xd0);
            let delta_hat = row.dot(&xd0_hat);
            let r = self.r_at(tau);
            let y = s.plant.y();
            let mut x_ref_dot = self.a_ref * s.x_ref + d_vec * delta;
            x_ref_dot[0] += r;
            Joint {
                plant: self.plant.derivative(&s.plant, u, delta, r),
                filters: s.filters.rates(&sc.filter, y, u, &row),
                xi_hat: observer_rhs(&s.xi_hat, &eta_hat, y, u, delta_hat, &sc.l_obs),
                x_ref: x_ref_dot,
            }
        });
        self.k += 1;
        let t1 = self.t();
        if !next.is_finite() {
            return Err(Error::NumericFault { step: self.k, t: t1, what: "loop state".into() });
        }
        self.state = next.plant;
        self.bank.states = next.filters;
        self.xi_hat = next.xi_hat;
        self.x_ref = next.x_ref;
        let y = self.state.y();

        self.bank.accumulate(&sc.filter, t1, y);
        let row = self.exo_row(t1);
        if self.bank.is_accumulating() {
            let chain = regression_chain(&self.bank, sc.family.as_ref(), sc.normalize_floor);
            if sc.adaptation_on && chain.eta.m.abs() >= sc.gains.rho && chain.eta.m != 0.0 {
                let g = &sc.gains;
                let dh = row.dot(&self.est.xdelta0_hat);
                let phi_hat = phi_regressor(y, u, dh);
                let xi_dot = observer_rhs(&self.xi_hat, &self.est.eta_hat, y, u, dh, &sc.l_obs);
                let x_hat = Vector4::new(self.state.e_i, y, self.x_p_hat[1], self.x_p_hat[2]);
                let mut est = update_eta(&self.est, &chain.eta, &phi_hat, g, dt)?;
                est = update_xdelta0(&est, &chain.xdelta0, g, dt)?;
                est = update_ti(&est, &chain.ti, &self.xi_hat, &xi_dot, g, dt)?;
                est = update_kappa(&est, &chain.kappa, &x_hat, g, dt)?;
                self.est = est;
            }
            self.chain = Some(chain);
        }
        self.x_p_hat = self.est.ti_hat * self.xi_hat;
        self.delta_hat = row.dot(&self.est.xdelta0_hat);
        self.u = self.control();

        self.reset_now = false;
        if sc.reset_on && t1 >= sc.filter.t_eps {
            let y_hat = self.xi_hat[0];
            if let SupervisorAction::Reset { t } = supervisor_step(&mut self.policy, y, y_hat, dt, t1) {
                self.bank.reset(&sc.filter, t, y);
                self.t_i = t;
                self.resets.push(t);
                self.reset_now = true;
            }
        }
        self.fe.push(t1, &self.bank.states.phibar(&sc.filter, y, u));
        if !self.est.is_finite() {
            return Err(Error::NumericFault { step: self.k, t: t1, what: "estimates".into() });
        }
        Ok(())
    }

    /// Telemetry row for the current instant.
    pub fn record(&self) -> Record {
        let t = self.t();
        let truth = self.truth();
        let x_p = self.state.physical();
        let c = self.sc.reference.mainline.at(t);
        let r = self.r_at(t);
        let kappa_err = (&self.est.kappa_hat - &truth.kappa).norm();
        let xp_err = (self.x_p_hat - x_p).norm();
        let e_ref = (self.state.augmented() - self.x_ref).norm();
        let raw = self.chain.as_ref().map_or([0.0; 5], |c| c.raw_m);
        Record {
            t,
            r,
            c,
            d: r - c,
            y: self.state.y(),
            u: self.u,
            x_p: x_p.into(),
            x_p_hat: self.x_p_hat.into(),
            xi_hat: self.xi_hat.into(),
            delta: self.exo_row(t).dot(&truth.xdelta0),
            delta_hat: self.delta_hat,
            kappa_hat: self.est.kappa_hat.iter().copied().collect(),
            kappa: truth.kappa.iter().copied().collect(),
            eta_err: (self.est.eta_hat - truth.eta).norm() / truth.eta.norm(),
            ti_err: (self.est.ti_hat - truth.ti).norm() / truth.ti.norm(),
            xdelta0_err: (&self.est.xdelta0_hat - &truth.xdelta0).norm(),
            kappa_err: kappa_err / truth.kappa.norm(),
            xp_err,
            e_ref,
            zeta: (xp_err * xp_err + e_ref * e_ref + kappa_err * kappa_err).sqrt(),
            delta_m: raw[0],
            m_theta: raw[1],
            m_kappa: raw[4],
            criterion: self.policy.criterion,
            reset: self.reset_now,
        }
    }
}

fn closed_loop(sc: &Scenario, plant: &Plant) -> Matrix4<f64> {
    let fb = sc.family.feedback(&sc.family.kappa(plant.theta()));
    let m = plant.matrices();
    m.a + m.b * fb.transpose()
}

/// A run that stopped on a numeric fault, with the telemetry gathered so far.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct Aborted {
    pub error: Error,
    pub telemetry: Telemetry,
}

/// Runs a scenario to completion.
pub fn run(sc: &Scenario) -> Result<Telemetry, Box<Aborted>> {
    let mut tel = Telemetry::new(sc.family.dim());
    let mut sim = match Simulation::new(sc) {
        Ok(s) => s,
        Err(error) => return Err(Box::new(Aborted { error, telemetry: tel })),
    };
    tel.records.push(sim.record());
    while !sim.is_done() {
        if let Err(error) = sim.step() {
            tel.resets = sim.resets().to_vec();
            return Err(Box::new(Aborted { error, telemetry: tel }));
        }
        if sim.step_index() % sc.decimation as u64 == 0 || sim.reset_now {
            tel.records.push(sim.record());
        }
    }
    tel.resets = sim.resets().to_vec();
    tel.fe_level = Some(sim.fe_level());
    Ok(tel)
}
