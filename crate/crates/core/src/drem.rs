//! Measurable regressions by dynamic regressor extension and mixing.
//!
//! The filter bank turns the measured motor speed `y` and torque `u` into a
//! six-dimensional linear regression in `[ψ_a; ψ_b]` whose disturbance term
//! has been annihilated by an internal model of the exosystem. Exponentially
//! weighted integrals extend it to a square 6×6 system, and the adjugate mixes
//! it into scalar-regressor form `𝒴 = Δ·η`. Further algebraic stages give
//! scalar-regressor regressions in `θ`, `T_I(θ)`, `x_δ0` and the controller
//! parameters `κ`:
//!
//! ```text
//! bank ─► η (Δ) ─► θ (ℳ_θ) ─┬─► T_I (ℳ_TI)
//!   │                       └─► κ (ℳ_κ)
//!   └───────────────────────────► x_δ0 (ℳ_xδ0)
//! ```
//!
//! Every stage satisfies `Y = M·truth` identically once filter transients have
//! decayed, so the ratio `Y/M` is invariant to a joint rescaling. [`normalize`]
//! uses this to keep magnitudes in range between stages.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3, Vector6};

use crate::canonical::{a0, c0, l_a, l_ab, l_b, l_d};
use crate::error::{Error, Result};
use crate::gains::MappingFamily;
use crate::linalg::{adjugate_det, adjugate_det_fixed, solve_sylvester};
use crate::ode::{rk4_step, OdeState};
use crate::plant::ExoModel;
use crate::{Matrix6, Vector9};

/// Amplifier `k(t)` multiplying the mixed η-regression.
#[derive(Clone)]
pub enum Amplifier {
    Constant(f64),
    Schedule(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Amplifier {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Amplifier::Constant(k) => *k,
            Amplifier::Schedule(f) => f(t),
        }
    }
}

impl fmt::Debug for Amplifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amplifier::Constant(k) => write!(f, "Constant({k:e})"),
            Amplifier::Schedule(_) => write!(f, "Schedule(..)"),
        }
    }
}

/// Tuning of the filter bank.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// Output injection of the Kreisselmeier filters, `A_K = A₀ − K C₀ᵀ`.
    pub k_gain: Vector3<f64>,
    /// Internal-model filter matrix (`n_δ × n_δ`, Hurwitz).
    pub g: DMatrix<f64>,
    pub l: DVector<f64>,
    pub beta: DVector<f64>,
    /// First-order filter pole.
    pub k1: f64,
    /// Decay rate of the integrand weight `e^{−σ(τ−t_i⁺)}`.
    pub sigma: f64,
    pub k_amp: Amplifier,
    /// Instant from which the integrals start accumulating.
    pub t_eps: f64,
}

impl FilterConfig {
    pub fn a_k(&self) -> Matrix3<f64> {
        a0() - self.k_gain * c0().transpose()
    }

    pub fn order(&self) -> usize {
        self.l.len()
    }

    /// Checks the structural requirements against the exosystem in use.
    pub fn validate(&self, exo: &ExoModel) -> Result<()> {
        let n = exo.order();
        if self.g.shape() != (n, n) || self.l.len() != n || self.beta.len() != n {
            return Err(Error::config("G, l, beta must match the exosystem order"));
        }
        if !(self.k1 > 0.0 && self.sigma > 0.0) {
            return Err(Error::config("k1 and sigma must be positive"));
        }
        if !(self.t_eps >= 0.0) {
            return Err(Error::config("t_eps must be non-negative"));
        }
        let a_k = self.a_k();
        if a_k.complex_eigenvalues().iter().any(|z| z.re >= 0.0) {
            return Err(Error::config("A_K is not Hurwitz"));
        }
        let g_eigs = self.g.clone().complex_eigenvalues();
        if g_eigs.iter().any(|z| z.re >= 0.0) {
            return Err(Error::config("G is not Hurwitz"));
        }
        let mut ctrb = DMatrix::zeros(n, n);
        let mut col = self.l.clone();
        for j in 0..n {
            ctrb.set_column(j, &col);
            col = &self.g * col;
        }
        if ctrb.rank(1e-12) < n {
            return Err(Error::config("(G, l) is not controllable"));
        }
        let a_eigs = exo.a_delta.clone().complex_eigenvalues();
        for ga in g_eigs.iter() {
            if a_eigs.iter().any(|za| (za - ga).norm() < 1e-9) {
                return Err(Error::config("spectra of G and A_delta intersect"));
            }
        }
        Ok(())
    }
}

/// Solves `M_δ A_δ − G M_δ = l h̄ᵀ`, `h̄ = A_δᵀ h_δ`, and returns
/// `(β, M_δ)` with `βᵀ = h̄ᵀ M_δ⁻¹`.
pub fn internal_model_beta(exo: &ExoModel, g: &DMatrix<f64>, l: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let h_bar = exo.a_delta.transpose() * &exo.h_delta;
    let rhs = l * h_bar.transpose();
    let m = solve_sylvester(&exo.a_delta, g, &rhs)?;
    let m_inv_t = m.transpose().try_inverse().ok_or_else(|| Error::Singular("M_delta is singular".into()))?;
    Ok((m_inv_t * h_bar, m))
}

/// Continuous filter states integrated alongside the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStates {
    pub z: Vector3<f64>,
    pub omega: Matrix3<f64>,
    pub p: Matrix3<f64>,
    pub f: DVector<f64>,
    pub h: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub qbar_f: f64,
    pub phibar_f: Vector6<f64>,
    pub f_f: DVector<f64>,
    pub y_f: f64,
    /// `3 × 3n_δ`.
    pub v: DMatrix<f64>,
}

impl FilterStates {
    pub fn zeros(n_delta: usize) -> Self {
        FilterStates {
            z: Vector3::zeros(),
            omega: Matrix3::zeros(),
            p: Matrix3::zeros(),
            f: DVector::zeros(n_delta),
            h: DMatrix::zeros(n_delta, 3),
            n: DMatrix::zeros(n_delta, 3),
            qbar_f: 0.0,
            phibar_f: Vector6::zeros(),
            f_f: DVector::zeros(n_delta),
            y_f: 0.0,
            v: DMatrix::zeros(3, 3 * n_delta),
        }
    }

    /// `q̄ = y − C₀ᵀz`.
    pub fn qbar(&self, y: f64) -> f64 {
        y - self.z[0]
    }

    fn omega_dot(&self, cfg: &FilterConfig, y: f64) -> Matrix3<f64> {
        cfg.a_k() * self.omega + Matrix3::identity() * y
    }

    fn p_dot(&self, cfg: &FilterConfig, u: f64) -> Matrix3<f64> {
        cfg.a_k() * self.p + Matrix3::identity() * u
    }

    /// `φ̄ = [Ω̇ᵀC₀ + Nᵀβ; ṖᵀC₀ + Hᵀβ]` with analytic derivatives.
    pub fn phibar(&self, cfg: &FilterConfig, y: f64, u: f64) -> Vector6<f64> {
        let od = self.omega_dot(cfg, y);
        let pd = self.p_dot(cfg, u);
        let nb = self.n.transpose() * &cfg.beta;
        let hb = self.h.transpose() * &cfg.beta;
        let mut out = Vector6::zeros();
        for i in 0..3 {
            out[i] = od[(0, i)] + nb[i];
            out[i + 3] = pd[(0, i)] + hb[i];
        }
        out
    }

    /// Filtered regressand `q̄ − k₁q̄_f − βᵀ(F_f + l·y_f)`, equal to
    /// `φ̄_fᵀ[ψ_a; ψ_b]` up to decaying transients.
    pub fn regressand(&self, cfg: &FilterConfig, y: f64) -> f64 {
        let inner = &self.f_f + &cfg.l * self.y_f;
        self.qbar(y) - cfg.k1 * self.qbar_f - cfg.beta.dot(&inner)
    }

    /// Right-hand side for measured `y`, `u` and exosystem row `h_δᵀΦ_δ(t)`.
    pub fn rates(&self, cfg: &FilterConfig, y: f64, u: f64, exo_row: &DVector<f64>) -> FilterStates {
        let a_k = cfg.a_k();
        let z_dot = a_k * self.z + cfg.k_gain * y;
        let omega_dot = self.omega_dot(cfg, y);
        let p_dot = self.p_dot(cfg, u);
        let f_dot = &cfg.g * &self.f + &cfg.g * &cfg.l * y - &cfg.l * z_dot[0];
        let p_row = DMatrix::from_row_slice(1, 3, &[p_dot[(0, 0)], p_dot[(0, 1)], p_dot[(0, 2)]]);
        let o_row = DMatrix::from_row_slice(1, 3, &[omega_dot[(0, 0)], omega_dot[(0, 1)], omega_dot[(0, 2)]]);
        let l_col = DMatrix::from_column_slice(cfg.l.len(), 1, cfg.l.as_slice());
        let h_dot = &cfg.g * &self.h - &l_col * p_row;
        let n_dot = &cfg.g * &self.n - &l_col * o_row;
        let qbar = self.qbar(y);
        let phibar = self.phibar(cfg, y, u);
        let nd = exo_row.len();
        let a_k_dyn = DMatrix::from_fn(3, 3, |r, c| a_k[(r, c)]);
        let mut v_dot = a_k_dyn * &self.v;
        for j in 0..nd {
            for i in 0..3 {
                v_dot[(i, 3 * j + i)] += exo_row[j];
            }
        }
        FilterStates {
            z: z_dot,
            omega: omega_dot,
            p: p_dot,
            f: f_dot,
            h: h_dot,
            n: n_dot,
            qbar_f: -cfg.k1 * self.qbar_f + qbar,
            phibar_f: -self.phibar_f * cfg.k1 + phibar,
            f_f: -&self.f_f * cfg.k1 + &self.f,
            y_f: -cfg.k1 * self.y_f + y,
            v: v_dot,
        }
    }
}

impl OdeState for FilterStates {
    fn add_scaled(&self, r: &Self, h: f64) -> Self {
        FilterStates {
            z: self.z + r.z * h,
            omega: self.omega + r.omega * h,
            p: self.p + r.p * h,
            f: &self.f + &r.f * h,
            h: &self.h + &r.h * h,
            n: &self.n + &r.n * h,
            qbar_f: self.qbar_f + r.qbar_f * h,
            phibar_f: self.phibar_f + r.phibar_f * h,
            f_f: &self.f_f + &r.f_f * h,
            y_f: self.y_f + r.y_f * h,
            v: &self.v + &r.v * h,
        }
    }

    fn is_finite(&self) -> bool {
        self.z.is_finite()
            && self.omega.is_finite()
            && self.p.is_finite()
            && self.f.is_finite()
            && self.h.is_finite()
            && self.n.is_finite()
            && self.qbar_f.is_finite()
            && self.phibar_f.is_finite()
            && self.f_f.is_finite()
            && self.y_f.is_finite()
            && self.v.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Integrands {
    t: f64,
    q: Vector6<f64>,
    phi: Matrix6,
    p_f: DVector<f64>,
    v_f: DMatrix<f64>,
}

/// Filters plus the weighted integrals of the extension step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub states: FilterStates,
    pub q: Vector6<f64>,
    pub phi: Matrix6,
    pub p_f: DVector<f64>,
    pub v_f: DMatrix<f64>,
    /// Start of the current integration window `t_i⁺`.
    pub t_start: f64,
    last: Option<Integrands>,
    eta: Regression<Vector9>,
}

/// Which quantity a regression is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Eta,
    Theta,
    Ti,
    XDelta0,
    Kappa,
}

/// `y = m·(unknown)` with scalar regressor `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression<Y> {
    pub y: Y,
    pub m: f64,
    pub stage: Stage,
}

impl<Y> Regression<Y> {
    pub fn new(y: Y, m: f64, stage: Stage) -> Self {
        Regression { y, m, stage }
    }
}

impl FilterBank {
    pub fn new(cfg: &FilterConfig) -> Self {
        let nd = cfg.order();
        FilterBank {
            states: FilterStates::zeros(nd),
            q: Vector6::zeros(),
            phi: Matrix6::zeros(),
            p_f: DVector::zeros(nd),
            v_f: DMatrix::zeros(nd, nd),
            t_start: cfg.t_eps,
            last: None,
            eta: Regression::new(Vector9::zeros(), 0.0, Stage::Eta),
        }
    }

    /// True once the integrals have started.
    pub fn is_accumulating(&self) -> bool {
        self.last.is_some()
    }

    /// Zeroes the integrals and restarts them at `t` (the continuous filters
    /// are left untouched).
    pub fn reset(&mut self, cfg: &FilterConfig, t: f64, y: f64) {
        let nd = cfg.order();
        self.q = Vector6::zeros();
        self.phi = Matrix6::zeros();
        self.p_f = DVector::zeros(nd);
        self.v_f = DMatrix::zeros(nd, nd);
        self.t_start = t;
        self.last = None;
        self.accumulate(cfg, t, y);
    }

    /// Adds the interval since the previous sample to the integrals by the
    /// trapezoid rule and refreshes the η-regression. Does nothing before
    /// `t_ε`.
    pub fn accumulate(&mut self, cfg: &FilterConfig, t: f64, y: f64) {
        if t < cfg.t_eps {
            return;
        }
        let w = (-cfg.sigma * (t - self.t_start)).exp();
        let s = &self.states;
        let q_int = s.phibar_f * (w * s.regressand(cfg, y));
        let phi_int = s.phibar_f * s.phibar_f.transpose() * w;

        let (dq, dphi, dt) = match &self.last {
            Some(prev) => (prev.q, prev.phi, t - prev.t),
            None => (q_int, phi_int, 0.0),
        };
        self.q += (dq + q_int) * (0.5 * dt);
        self.phi += (dphi + phi_int) * (0.5 * dt);
        self.eta = mix_eta(&self.q, &self.phi, cfg.k_amp.at(t));

        // Disturbance-initial-condition extension, from the fresh η-regression.
        let delta = self.eta.m;
        let yv = &self.eta.y;
        let p = delta * s.qbar(y) - (s.omega.row(0) * (l_a() * yv))[0] - (s.p.row(0) * (l_b() * yv))[0];
        let y_psi_d = yv.fixed_rows::<3>(6).into_owned();
        let nd = cfg.order();
        let row = DVector::from_fn(nd, |j, _| {
            let block = s.v.view((0, 3 * j), (1, 3));
            (block * y_psi_d)[0]
        });
        let scale = w * delta * delta;
        let pf_int = &row * (scale * p);
        let vf_int = &row * row.transpose() * scale;
        let (dpf, dvf) = match &self.last {
            Some(prev) => (prev.p_f.clone(), prev.v_f.clone()),
            None => (pf_int.clone(), vf_int.clone()),
        };
        self.p_f += (dpf + &pf_int) * (0.5 * dt);
        self.v_f += (dvf + &vf_int) * (0.5 * dt);

        self.last = Some(Integrands { t, q: q_int, phi: phi_int, p_f: pf_int, v_f: vf_int });
    }

    /// Most recent η-regression (zero before `t_ε`).
    pub fn eta_regression(&self) -> &Regression<Vector9> {
        &self.eta
    }
}

/// `Y = [k·adj{φ}q; k·ℒ_d adj{φ}q]`, `Δ = k·det{φ}`.
pub fn mix_eta(q: &Vector6<f64>, phi: &Matrix6, k: f64) -> Regression<Vector9> {
    let (adj, det) = adjugate_det_fixed(phi);
    let top = adj * q * k;
    let mut y = Vector9::zeros();
    y.fixed_rows_mut::<6>(0).copy_from(&top);
    y.fixed_rows_mut::<3>(6).copy_from(&(l_d() * top));
    Regression::new(y, k * det, Stage::Eta)
}

/// One RK4 step of the continuous filters with `y`, `u` and the exosystem
/// row held, followed by accumulation of the integrals at `t + dt`.
pub fn filter_step(
    bank: &FilterBank,
    cfg: &FilterConfig,
    t: f64,
    y: f64,
    u: f64,
    exo_row: &DVector<f64>,
    dt: f64,
) -> Result<FilterBank> {
    if !(dt > 0.0) {
        return Err(Error::domain("step size must be positive"));
    }
    let mut next = bank.clone();
    next.states = rk4_step(t, &bank.states, dt, |_, s| s.rates(cfg, y, u, exo_row));
    if !next.states.is_finite() {
        return Err(Error::NumericFault { step: 0, t: t + dt, what: "filter bank".into() });
    }
    next.accumulate(cfg, t + dt, y);
    Ok(next)
}

/// η-regression at time `t` (zero before `t_ε`).
pub fn eta_regression_at(bank: &FilterBank, cfg: &FilterConfig, t: f64) -> Regression<Vector9> {
    if t < cfg.t_eps {
        return Regression::new(Vector9::zeros(), 0.0, Stage::Eta);
    }
    mix_eta(&bank.q, &bank.phi, cfg.k_amp.at(t))
}

/// `θ`-regression from the η-regression.
pub fn theta_regression(reg: &Regression<Vector9>) -> Regression<Vector3<f64>> {
    let yab = l_ab() * reg.y;
    let d = reg.m;
    let (y1, y2, y3) = (yab[0], yab[1], yab[2]);
    let mixed = -d * y3 - y1 * y2;
    let t_w = Vector3::new(d, mixed, y1 * y1);
    let t_r = Matrix3::from_diagonal(&Vector3::new(y1, y3 * y1, mixed));
    let (adj, det) = adjugate_det_fixed(&t_r);
    Regression::new(adj * t_w * det, det * det, Stage::Theta)
}

/// `T_I`-regression from the `θ`-regression.
pub fn ti_regression(reg: &Regression<Vector3<f64>>) -> Regression<Matrix3<f64>> {
    let m = reg.m;
    let y = reg.y;
    #[rustfmt::skip]
    let t_q = Matrix3::new(
        m,                0.0,   0.0,
        -m * m * y[0],    0.0,   y[0] * y[1] * y[2],
        0.0,              -y[0], 0.0,
    );
    let t_p = Matrix3::from_diagonal(&Vector3::new(m, m * m * y[1], m));
    let (adj, det) = adjugate_det_fixed(&t_p);
    Regression::new(adj * t_q, det, Stage::Ti)
}

/// `x_δ0`-regression `(adj{V_f} p_f, det{V_f})`.
pub fn xdelta0_regression(bank: &FilterBank) -> Regression<DVector<f64>> {
    let (adj, det) = adjugate_det(&bank.v_f);
    Regression::new(adj * &bank.p_f, det, Stage::XDelta0)
}

/// Controller-parameter regression. A family that loses positivity yields
/// the empty regression `(0, 0)`, which the dead zone then ignores.
pub fn kappa_regression(reg: &Regression<Vector3<f64>>, family: &dyn MappingFamily) -> Regression<DVector<f64>> {
    let n = family.dim();
    let empty = || Regression::new(DVector::zeros(n), 0.0, Stage::Kappa);
    let (t_g, t_s) = match (family.t_g(reg.m, &reg.y), family.t_s(reg.m, &reg.y)) {
        (Ok(g), Ok(s)) => (g, s),
        _ => return empty(),
    };
    let (adj, det) = adjugate_det(&t_g);
    Regression::new(adj * t_s, det, Stage::Kappa)
}

/// Anything a regression regressand can be.
pub trait Regressand: Clone {
    fn scaled(&self, s: f64) -> Self;
}

impl<const R: usize, const C: usize> Regressand for SMatrix<f64, R, C> {
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
}

impl Regressand for DVector<f64> {
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
}

impl Regressand for DMatrix<f64> {
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
}

/// Divides `(Y, M)` by `|M|` when `|M| > floor`; otherwise returns the input.
pub fn normalize<Y: Regressand>(reg: &Regression<Y>, floor: f64) -> Regression<Y> {
    let s = reg.m.abs();
    if s > floor && s.is_finite() {
        Regression::new(reg.y.scaled(1.0 / s), reg.m / s, reg.stage)
    } else {
        reg.clone()
    }
}

/// All stage regressions at one instant.
#[derive(Debug, Clone)]
pub struct RegressionChain {
    pub eta: Regression<Vector9>,
    pub theta: Regression<Vector3<f64>>,
    pub ti: Regression<Matrix3<f64>>,
    pub xdelta0: Regression<DVector<f64>>,
    pub kappa: Regression<DVector<f64>>,
    /// Stage regressors before their own normalisation, in chain order
    /// `[Δ, ℳ_θ, ℳ_TI, ℳ_xδ0, ℳ_κ]`.
    pub raw_m: [f64; 5],
}

/// Evaluates the whole chain from the bank, normalising each stage with
/// `floor` when `floor` is `Some`.
pub fn regression_chain(bank: &FilterBank, family: &dyn MappingFamily, floor: Option<f64>) -> RegressionChain {
    let norm3 = |r: Regression<Vector3<f64>>| match floor {
        Some(f) => normalize(&r, f),
        None => r,
    };
    let raw_eta = bank.eta_regression().clone();
    let eta = match floor {
        Some(f) => normalize(&raw_eta, f),
        None => raw_eta.clone(),
    };
    let raw_theta = theta_regression(&eta);
    let theta = norm3(raw_theta.clone());
    let raw_ti = ti_regression(&theta);
    let raw_xd = xdelta0_regression(bank);
    let raw_kappa = kappa_regression(&theta, family);
    let raw_m = [raw_eta.m, raw_theta.m, raw_ti.m, raw_xd.m, raw_kappa.m];
    let (ti, xdelta0, kappa) = match floor {
        Some(f) => (normalize(&raw_ti, f), normalize(&raw_xd, f), normalize(&raw_kappa, f)),
        None => (raw_ti, raw_xd, raw_kappa),
    };
    RegressionChain { eta, theta, ti, xdelta0, kappa, raw_m }
}

/// Trapezoid accumulation of `∫φ̄φ̄ᵀ` over a fixed window.
#[derive(Debug, Clone)]
pub struct FeWindow {
    pub t_a: f64,
    pub t_b: f64,
    gram: Matrix6,
    prev: Option<(f64, Matrix6)>,
}

impl FeWindow {
    pub fn new(t_a: f64, t_b: f64) -> Self {
        FeWindow { t_a, t_b, gram: Matrix6::zeros(), prev: None }
    }

    pub fn push(&mut self, t: f64, phibar: &Vector6<f64>) {
        if t < self.t_a || t > self.t_b {
            return;
        }
        let outer = phibar * phibar.transpose();
        if let Some((tp, op)) = &self.prev {
            self.gram += (op + outer) * (0.5 * (t - tp));
        }
        self.prev = Some((t, outer));
    }

    /// Smallest eigenvalue of the accumulated Gram matrix.
    pub fn level(&self) -> f64 {
        self.gram.symmetric_eigenvalues().min()
    }
}

/// Excitation level of `φ̄` over `[t_a, t_b]` from time-stamped samples.
pub fn fe_level(samples: &[(f64, Vector6<f64>)], window: (f64, f64)) -> f64 {
    let mut fe = FeWindow::new(window.0, window.1);
    for (t, v) in samples {
        fe.push(*t, v);
    }
    fe.level()
}
