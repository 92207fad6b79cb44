//! Fixtures shared by the benchmarks.

use vibsup_core::harness::{Scenario, ScenarioConfig, Simulation};

/// Reference scenario cut to `t_final` seconds.
pub fn nominal_scenario(t_final: f64) -> Scenario {
    let cfg = ScenarioConfig { t_final, ..Default::default() };
    Scenario::from_config(&cfg).expect("reference scenario is valid")
}

/// Steps `sim` up to time `t` so that the filters are accumulating.
pub fn advance(sim: &mut Simulation<'_>, t: f64) {
    while sim.t() < t && !sim.is_done() {
        sim.step().expect("reference scenario runs");
    }
}
