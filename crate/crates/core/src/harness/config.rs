//! Scenario description and its TOML form.
//!
//! Every key has a default, and the defaults are the reference experiment:
//! a 40 s run with a load-inertia step at t = 11 and a load-torque reversal at
//! t = 27. A file only needs to list what it changes:
//!
//! ```toml
//! t_final = 10.0
//!
//! [plant]
//! switches = []
//!
//! [adaptation]
//! enabled = false
//! ```

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::adapt::{c_bound_from_prior, GainSchedule, GammaMode};
use crate::control::{Dither, Mainline, ReferenceSpec};
use crate::drem::{internal_model_beta, Amplifier, FilterConfig};
use crate::error::{Error, Result};
use crate::gains::{family_pi, family_pole_placement, DesignSpec, MappingFamily};
use crate::observer::{place_filter_gain, place_output_injection};
use crate::plant::{ExoModel, Theta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every n-th step in the telemetry.
    pub decimation: usize,
    pub plant: PlantConfig,
    pub disturbance: DisturbanceConfig,
    pub filters: FiltersConfig,
    pub adaptation: AdaptationConfig,
    pub controller: ControllerConfig,
    pub reference: ReferenceConfig,
    pub reset: ResetConfig,
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    /// Initial `[x1, x2, x3]`.
    pub x0: [f64; 3],
    pub switches: Vec<ThetaSwitch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSwitch {
    pub t: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceConfig {
    /// Row-major `A_δ`.
    pub a_delta: Vec<Vec<f64>>,
    pub h_delta: Vec<f64>,
    pub x_delta0: Vec<f64>,
    pub switches: Vec<DeltaSwitch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaSwitch {
    pub t: f64,
    pub x_delta0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiltersConfig {
    /// Real poles of `A_K`.
    pub a_k_poles: [f64; 3],
    /// Real poles of `A_L`.
    pub a_l_poles: [f64; 3],
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub l: Vec<f64>,
    /// Explicit `β`; solved from the internal-model equation when absent.
    pub beta: Option<Vec<f64>>,
    pub k1: f64,
    pub sigma: f64,
    pub k: f64,
    pub t_eps: f64,
    /// Stage regressors larger than this are rescaled to unit magnitude.
    pub normalize_floor: f64,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationConfig {
    pub enabled: bool,
    pub gamma0: f64,
    pub gamma1: f64,
    pub rho: f64,
    pub mode: GammaMode,
    /// Explicit `c`; derived from the prior box when absent.
    pub c_bound: Option<f64>,
    pub prior_lo: [f64; 3],
    pub prior_hi: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    PolePlacement,
    Pi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub family: FamilyKind,
    pub omega_d: f64,
    pub xi_d: f64,
    pub kappa0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub mainline: Mainline,
    pub dither_enabled: bool,
    pub alpha: f64,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResetConfig {
    pub enabled: bool,
    pub f_max: f64,
    pub refractory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub fe_window: [f64; 2],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            dt: 1e-4,
            t_final: 40.0,
            decimation: 10,
            plant: PlantConfig::default(),
            disturbance: DisturbanceConfig::default(),
            filters: FiltersConfig::default(),
            adaptation: AdaptationConfig::default(),
            controller: ControllerConfig::default(),
            reference: ReferenceConfig::default(),
            reset: ResetConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            theta1: 0.203,
            theta2: 0.203,
            theta3: 0.0026,
            x0: [0.0; 3],
            switches: vec![ThetaSwitch { t: 11.0, theta1: 0.203, theta2: 1.75 * 0.203, theta3: 0.0026 }],
        }
    }
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        DisturbanceConfig {
            a_delta: vec![vec![0.0]],
            h_delta: vec![1.0],
            x_delta0: vec![0.5],
            switches: vec![DeltaSwitch { t: 27.0, x_delta0: vec![-0.5] }],
        }
    }
}

impl Default for FiltersConfig {
    fn default() -> Self {
        FiltersConfig {
            a_k_poles: [-50.0; 3],
            a_l_poles: [-50.0; 3],
            g: vec![vec![-5.0]],
            l: vec![5.0],
            beta: Some(vec![1.0]),
            k1: 25.0,
            sigma: 5.0,
            k: 1e63,
            t_eps: 2.0,
            normalize_floor: 1e-9,
            normalize: true,
        }
    }
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        AdaptationConfig {
            enabled: true,
            gamma0: 1e-11,
            gamma1: 1.0,
            rho: 1e-9,
            mode: GammaMode::Scaled,
            c_bound: None,
            prior_lo: [0.1, 0.1, 0.001],
            prior_hi: [1.0, 1.0, 0.01],
        }
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            family: FamilyKind::PolePlacement,
            omega_d: 25.0,
            xi_d: 0.7,
            kappa0: vec![60.0, -1.5, 0.0, 0.0],
        }
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            mainline: Mainline::Square { period: 4.0, low: 0.0, high: 1.0 },
            dither_enabled: true,
            alpha: 1.0,
            amplitudes: vec![0.15],
            frequencies: vec![10.0],
        }
    }
}

impl Default for ResetConfig {
    fn default() -> Self {
        ResetConfig { enabled: true, f_max: 0.01, refractory: 1.0 }
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { fe_window: [2.0, 4.0] }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

fn square(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(format!("{what} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn real_poles(p: &[f64; 3]) -> [Complex<f64>; 3] {
    p.map(|re| Complex::new(re, 0.0))
}

fn on_grid(t: f64, dt: f64) -> Result<u64> {
    let k = (t / dt).round();
    if k < 0.0 || ((t / dt) - k).abs() > 1e-6 {
        return Err(Error::config(format!("event time {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as u64)
}

/// A validated, ready-to-run scenario. Switch times are stored as step
/// indices so that events land exactly on the integration grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dt: f64,
    pub steps: u64,
    pub decimation: usize,
    pub theta0: Theta,
    pub theta_switches: Vec<(u64, Theta)>,
    pub x0: Vector3<f64>,
    pub exo: ExoModel,
    pub delta_switches: Vec<(u64, DVector<f64>)>,
    pub filter: FilterConfig,
    pub normalize_floor: Option<f64>,
    pub l_obs: Vector3<f64>,
    pub gains: GainSchedule,
    pub family: Arc<dyn MappingFamily>,
    pub design: DesignSpec,
    pub kappa0: DVector<f64>,
    pub reference: ReferenceSpec,
    pub adaptation_on: bool,
    pub dither_on: bool,
    pub reset_on: bool,
    pub f_max: f64,
    pub refractory: f64,
    pub fe_window: (f64, f64),
}

impl Scenario {
    /// The reference experiment.
    pub fn nominal() -> Self {
        Self::from_config(&ScenarioConfig::default()).expect("default config is valid")
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
            return Err(Error::config("t_final must be positive"));
        }
        if cfg.decimation == 0 {
            return Err(Error::config("decimation must be at least 1"));
        }
        let steps = on_grid(cfg.t_final, cfg.dt)?;

        let p = &cfg.plant;
        let theta0 = Theta::new(p.theta1, p.theta2, p.theta3)?;
        let mut theta_switches = Vec::new();
        for s in &p.switches {
            theta_switches.push((on_grid(s.t, cfg.dt)?, Theta::new(s.theta1, s.theta2, s.theta3)?));
        }
        theta_switches.sort_by_key(|(k, _)| *k);

        let d = &cfg.disturbance;
        let n = d.h_delta.len();
        let exo = ExoModel {
            a_delta: square(&d.a_delta, n, "a_delta")?,
            h_delta: DVector::from_vec(d.h_delta.clone()),
            x_delta0: DVector::from_vec(d.x_delta0.clone()),
            t0: 0.0,
        };
        exo.validate()?;
        let mut delta_switches = Vec::new();
        for s in &d.switches {
            if s.x_delta0.len() != n {
                return Err(Error::config("disturbance switch has the wrong dimension"));
            }
            delta_switches.push((on_grid(s.t, cfg.dt)?, DVector::from_vec(s.x_delta0.clone())));
        }
        delta_switches.sort_by_key(|(k, _)| *k);

        let f = &cfg.filters;
        let g = square(&f.g, n, "G")?;
        let l = DVector::from_vec(f.l.clone());
        if l.len() != n {
            return Err(Error::config("l must match the exosystem order"));
        }
        let beta = match &f.beta {
            Some(b) => DVector::from_vec(b.clone()),
            None => internal_model_beta(&exo, &g, &l)?.0,
        };
        let filter = FilterConfig {
            k_gain: place_filter_gain(&real_poles(&f.a_k_poles))?,
            g,
            l,
            beta,
            k1: f.k1,
            sigma: f.sigma,
            k_amp: Amplifier::Constant(f.k),
            t_eps: f.t_eps,
        };
        filter.validate(&exo)?;
        if !(f.k > 0.0 && f.k.is_finite()) {
            return Err(Error::config("k must be positive"));
        }
        if !(f.normalize_floor >= 0.0) {
            return Err(Error::config("normalize_floor must be non-negative"));
        }
        on_grid(f.t_eps, cfg.dt)?;
        let l_obs = place_output_injection(&real_poles(&f.a_l_poles))?;

        let a = &cfg.adaptation;
        let c_bound = match a.c_bound {
            Some(c) => c,
            None => {
                let lo = Theta::new(a.prior_lo[0], a.prior_lo[1], a.prior_lo[2])?;
                let hi = Theta::new(a.prior_hi[0], a.prior_hi[1], a.prior_hi[2])?;
                let sup = exo_row_bound(&exo, cfg.t_final);
                c_bound_from_prior(a.gamma0, &lo, &hi, sup)?
            }
        };
        let gains = GainSchedule { gamma0: a.gamma0, gamma1: a.gamma1, rho: a.rho, c_bound, mode: a.mode };
        gains.validate()?;

        let c = &cfg.controller;
        let design = DesignSpec::new(c.omega_d, c.xi_d)?;
        let family: Arc<dyn MappingFamily> = match c.family {
            FamilyKind::PolePlacement => Arc::new(family_pole_placement(design)),
            FamilyKind::Pi => Arc::new(family_pi()),
        };
        if c.kappa0.len() != family.dim() {
            return Err(Error::config(format!(
                "kappa0 has {} entries, the {} family needs {}",
                c.kappa0.len(),
                family.name(),
                family.dim()
            )));
        }

        let r = &cfg.reference;
        let reference = ReferenceSpec {
            mainline: r.mainline.clone(),
            dither: Dither { alpha: r.alpha, amplitudes: r.amplitudes.clone(), frequencies: r.frequencies.clone() },
        };
        reference.validate()?;

        let rs = &cfg.reset;
        if !(rs.f_max > 0.0 && rs.refractory >= 0.0) {
            return Err(Error::config("f_max must be positive and refractory non-negative"));
        }
        let [ta, tb] = cfg.diagnostics.fe_window;
        if !(tb > ta) {
            return Err(Error::config("fe_window must be increasing"));
        }

        Ok(Scenario {
            dt: cfg.dt,
            steps,
            decimation: cfg.decimation,
            theta0,
            theta_switches,
            x0: Vector3::from(p.x0),
            exo,
            delta_switches,
            filter,
            normalize_floor: f.normalize.then_some(f.normalize_floor),
            l_obs,
            gains,
            family,
            design,
            kappa0: DVector::from_vec(c.kappa0.clone()),
            reference,
            adaptation_on: a.enabled,
            dither_on: r.dither_enabled,
            reset_on: rs.enabled,
            f_max: rs.f_max,
            refractory: rs.refractory,
            fe_window: (ta, tb),
        })
    }

    pub fn t_final(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// True parameters in force on the step starting at index `k`.
    pub fn theta_at(&self, k: u64) -> Theta {
        self.theta_switches.iter().take_while(|(ks, _)| *ks <= k).last().map_or(self.theta0, |(_, th)| *th)
    }

    /// True `x_δ0` in force on the step starting at index `k`.
    pub fn xdelta0_at(&self, k: u64) -> &DVector<f64> {
        self.delta_switches.iter().take_while(|(ks, _)| *ks <= k).last().map_or(&self.exo.x_delta0, |(_, x)| x)
    }
}

/// Upper bound of `‖h_δᵀΦ_δ(t)‖` over `[0, t_final]`, sampled.
fn exo_row_bound(exo: &ExoModel, t_final: f64) -> f64 {
    (0..=1000).map(|i| exo.output_row(t_final * i as f64 / 1000.0).norm()).fold(0.0, f64::max)
}
