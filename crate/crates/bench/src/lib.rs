//! Shared fixtures for the benchmarks.

use mrlbm_core::adaptive::adaptive_step;
use mrlbm_core::{AdaptiveState, LeafField, RunConfig, UniformState};

/// State of the preset `name` at threshold `epsilon` after `warmup` adaptive steps.
pub fn warmed_state(name: &str, epsilon: f64, warmup: usize) -> AdaptiveState {
    let mut cfg = RunConfig::preset(name).expect("preset");
    cfg.epsilon = epsilon;
    let geometry = cfg.geometry().expect("geometry");
    let spec = cfg.build_scheme().expect("scheme");
    let initial = cfg.datum.datum().finest_averages(&geometry);
    let start = UniformState::at_equilibrium(geometry, &spec, &initial).expect("equilibrium");
    let mut state = AdaptiveState {
        field: LeafField::on_full_tree(geometry, spec.q(), start.into_values()).expect("field"),
        step: 0,
        policy: cfg.policy().expect("policy"),
        spec,
        prediction: cfg.prediction().expect("prediction"),
        collision: cfg.collision,
        boundary: cfg.boundary,
    };
    for _ in 0..warmup {
        adaptive_step(&mut state).expect("step");
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_compresses() {
        let s = warmed_state("II", 1e-4, 3);
        assert_eq!(s.step, 3);
        assert!(s.field.len() < s.field.geometry().finest_cells());
    }
}
