//! Affine formation control toolkit.
//!
//! Design and simulate adaptive event-triggered formation controllers for
//! leader-follower multi-agent systems with general linear dynamics:
//!
//! - [`formation`]: communication graphs, nominal configurations, and the
//!   leader/follower partition.
//! - [`stress`]: equilibrium stress matrices, their validation, and
//!   affine localization of followers from leaders.
//! - [`targets`]: target formations as affine images of the nominal
//!   configuration, with bundled presets.
//! - [`design`]: Riccati-based gain synthesis, observer design, and
//!   leader compensation.
//! - [`sim`]: the event-triggered closed-loop simulator with trigger
//!   evaluation on a fixed grid, adaptive parameters, event logs, Zeno
//!   auditing, and an energy-bound monitor.
//! - [`scenario`]: scenario files, the bundled benchmark catalog, and
//!   trace emission.

pub mod design;
pub mod fixtures;
pub mod formation;
pub mod linalg;
pub mod scenario;
pub mod serde_util;
pub mod sim;
pub mod stress;
pub mod targets;

pub use design::{
    compensation_terms, design_observer, design_state_feedback, solve_care, CompensationMode,
    CompensationTerms, ControllerDesign, DesignError, PlantModel, ProtocolMode,
};
pub use formation::{affine_span_rank, FormationError, NominalFormation};
pub use stress::{
    compute_stress, follower_targets, localizability_check, validate_stress, Localizability,
    StressError, StressMatrix, StressSolverOptions, StressTolerances, StressValidationReport,
};
pub use targets::{
    preset_transform, target_formation, AffineTransform, BenchmarkCase, TargetError,
    TargetFormation,
};

// The guide's code blocks run as doc-tests so the book cannot drift from
// the library. One module per chapter keeps failures attributable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/formations.md")]
    mod formations {}
    #[doc = include_str!("../../../book/src/targets.md")]
    mod targets {}
    #[doc = include_str!("../../../book/src/gains.md")]
    mod gains {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
