//! The full sampler: configuration, chain state, one Gibbs sweep, traces,
//! synthetic data and the joint-distribution correctness test.

mod config;
mod geweke;
mod joint;
mod state;
mod sweep;
mod synthetic;
mod trace;

pub use config::{MeasurementNoise, ModelConfig, Observations, PriorFamily, Schedule, Sharing};
pub use geweke::{geweke_joint_test, sample_prior_state, GewekeResult, GEWEKE_STATISTICS};
pub use joint::log_joint;
pub use state::{pseudo_observations, sample_dynamics_prior, sample_states, ChainState, NoiseState};
pub use sweep::{gibbs_sweep, gibbs_sweep_with, update_dynamics, SweepControl};
pub use synthetic::{
    emit_linear, empirical_self_transition, generate_synthetic, simulate_ar, simulate_scenario, simulate_states,
    spectral_radius, sticky_uniform_transitions, CustomScenario, Emission, Scenario, SyntheticData,
};
pub use trace::{run_chain_with, run_chains, MixtureSummary, ModeSummary, TraceRecord, ACTIVE_FRACTION};
