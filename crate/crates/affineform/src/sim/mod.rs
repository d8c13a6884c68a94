//! Event-triggered closed-loop simulation.
//!
//! A run advances the multi-agent system on a fixed time grid. Between
//! grid points every continuous quantity (states, observer states,
//! compensation estimates, adaptive parameters) is integrated with the
//! last-broadcast values frozen; at each grid point every agent evaluates
//! its trigger function and re-broadcasts when it turns positive. Events
//! therefore land on the grid, which bounds inter-event gaps below by
//! `dt` by construction; the [`trace::zeno_audit`] reports density
//! anomalies instead.
//!
//! Runs are deterministic: identical configuration and seed produce
//! bit-identical traces.

pub mod config;
pub mod lyapunov;
pub mod trace;
pub mod world;

pub use config::{
    DiagnosticsConfig, InitialConditions, Integrator, LyapunovConstants, PlantConfig,
    ScenarioConfig, ScenarioSetup, SplitMix64, StressSpec, TransformSpec, TriggerConstants,
    WeightsConfig,
};
pub use lyapunov::{lyapunov_monitor, LyapunovSeries};
pub use trace::{zeno_audit, AgentSeries, EventRecord, SimulationTrace, TraceSummary, ZenoAudit};
pub use world::{
    follower_control, follower_trigger_value, leader_control, leader_trigger_value, AgentState,
    EtcWorld, StepOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("numerical divergence at t = {t:.4}: agent {} norm {norm:.3e}", agent + 1)]
    NumericalDivergence { t: f64, agent: usize, norm: f64 },
    #[error("inadmissible monitor constants: {0}")]
    InvalidConstants(String),
    #[error(transparent)]
    Design(#[from] crate::design::DesignError),
    #[error(transparent)]
    Stress(#[from] crate::stress::StressError),
    #[error(transparent)]
    Formation(#[from] crate::formation::FormationError),
    #[error(transparent)]
    Target(#[from] crate::targets::TargetError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        SimError::Validation(vec![message.into()])
    }
}

/// Run a scenario end to end and return the full-resolution trace.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationTrace, SimError> {
    let setup = config.build()?;
    run_with_setup(config, &setup)
}

/// Run with an already assembled setup (lets callers reuse the design
/// across seeds or transforms).
pub fn run_with_setup(
    config: &ScenarioConfig,
    setup: &ScenarioSetup,
) -> Result<SimulationTrace, SimError> {
    let mut world = world::EtcWorld::new(setup, config)?;
    let steps = (config.t_end / config.dt).round() as usize;
    let mut trace = trace::SimulationTrace::new(&world, config.dt);
    for _ in 0..steps {
        let outcome = world.step(config.dt, config.integrator)?;
        trace.record_step(&world, &outcome);
    }
    trace.finalize();
    Ok(trace)
}
