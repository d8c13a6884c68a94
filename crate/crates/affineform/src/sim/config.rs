//! Scenario configuration: everything a closed-loop run needs, in a form
//! that serializes to a single TOML document.

use crate::design::{ControllerDesign, PlantModel, ProtocolMode};
use crate::formation::{FormationFile, NominalFormation};
use crate::serde_util::{matrix_to_rows, rows_to_matrix};
use crate::stress::{
    compute_stress, validate_stress, StressMatrix, StressSolverOptions, StressTolerances,
};
use crate::targets::{preset_transform, target_formation, AffineTransform, BenchmarkCase, TargetFormation};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Fixed-step integration scheme. Held values are frozen across Runge-
/// Kutta substages either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Integrator::Euler => write!(f, "euler"),
            Integrator::Rk4 => write!(f, "rk4"),
        }
    }
}

/// Trigger thresholds: events fire when the trigger function exceeds
/// zero, and each function carries a decaying floor `mu * exp(-varpi t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConstants {
    pub mu_leader: f64,
    pub varpi_leader: f64,
    pub mu_follower: f64,
    pub varpi_follower: f64,
}

/// Plant matrices as stored in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    #[serde(with = "crate::serde_util::rows")]
    pub a: Vec<Vec<f64>>,
    #[serde(with = "crate::serde_util::rows")]
    pub b: Vec<Vec<f64>>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub c: Option<Vec<Vec<f64>>>,
}

impl PlantConfig {
    pub fn build(&self) -> Result<PlantModel, SimError> {
        let a = rows_to_matrix(&self.a).map_err(|e| SimError::invalid(format!("plant.a: {e}")))?;
        let b = rows_to_matrix(&self.b).map_err(|e| SimError::invalid(format!("plant.b: {e}")))?;
        let c = match &self.c {
            Some(c) => {
                Some(rows_to_matrix(c).map_err(|e| SimError::invalid(format!("plant.c: {e}")))?)
            }
            None => None,
        };
        Ok(PlantModel::new(a, b, c)?)
    }

    pub fn from_model(m: &PlantModel) -> Self {
        Self {
            a: matrix_to_rows(&m.a),
            b: matrix_to_rows(&m.b),
            c: m.c.as_ref().map(matrix_to_rows),
        }
    }
}

/// Where the simulation stress comes from: solved fresh from the
/// formation, or supplied inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum StressSpec {
    Solve {
        #[serde(default)]
        solver: StressSolverOptions,
    },
    Inline {
        #[serde(with = "crate::serde_util::rows")]
        matrix: Vec<Vec<f64>>,
    },
}

impl Default for StressSpec {
    fn default() -> Self {
        StressSpec::Solve {
            solver: StressSolverOptions::default(),
        }
    }
}

/// Target transform: a catalog preset or an inline affine map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformSpec {
    Preset {
        case: BenchmarkCase,
        name: String,
    },
    Inline {
        #[serde(with = "crate::serde_util::rows")]
        gamma: Vec<Vec<f64>>,
        #[serde(with = "crate::serde_util::floats")]
        upsilon: Vec<f64>,
        #[serde(default)]
        label: Option<String>,
    },
}

impl TransformSpec {
    pub fn build(&self) -> Result<AffineTransform, SimError> {
        match self {
            TransformSpec::Preset { case, name } => Ok(preset_transform(*case, name)?),
            TransformSpec::Inline {
                gamma,
                upsilon,
                label,
            } => {
                let linear = rows_to_matrix(gamma)
                    .map_err(|e| SimError::invalid(format!("transform.gamma: {e}")))?;
                if linear.nrows() != linear.ncols() {
                    return Err(SimError::invalid("transform.gamma must be square"));
                }
                if upsilon.len() != linear.nrows() {
                    return Err(SimError::invalid(
                        "transform.upsilon length must match gamma",
                    ));
                }
                Ok(AffineTransform::new(
                    linear,
                    DVector::from_column_slice(upsilon),
                    label.clone().unwrap_or_else(|| "custom".into()),
                ))
            }
        }
    }
}

/// Design weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsConfig {
    #[serde(with = "crate::serde_util::rows")]
    pub r1: Vec<Vec<f64>>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub r2: Option<Vec<Vec<f64>>>,
}

impl WeightsConfig {
    pub fn identity(dim: usize, with_r2: bool) -> Self {
        let eye = matrix_to_rows(&DMatrix::identity(dim, dim));
        Self {
            r1: eye.clone(),
            r2: with_r2.then_some(eye),
        }
    }
}

/// Initial conditions: either a seeded per-coordinate uniform draw or a
/// pinned state table, plus the adaptive parameter starting values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    #[serde(default)]
    pub low: Option<f64>,
    #[serde(default)]
    pub high: Option<f64>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub states: Option<Vec<Vec<f64>>>,
    /// Starting value of each follower's coupling gain; must exceed 1.
    pub coupling0: f64,
    pub gamma0: f64,
    pub varphi0: f64,
    pub phi0: f64,
}

/// Energy-bound monitor constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    #[serde(with = "crate::serde_util::floats")]
    pub alpha: Vec<f64>,
    #[serde(with = "crate::serde_util::floats")]
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    /// Keep every k-th grid point when emitting state CSVs.
    pub decimation: usize,
    /// Abort with an error when any state norm exceeds this.
    pub divergence_bound: f64,
    /// Monitor constants; present means the monitor runs after the
    /// simulation.
    pub lyapunov: Option<LyapunovConstants>,
    /// Bound slack relative to the initial monitor value.
    pub lyapunov_tolerance: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            decimation: 1,
            divergence_bound: 1e9,
            lyapunov: None,
            lyapunov_tolerance: 1e-3,
        }
    }
}

/// A complete, serializable description of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: ProtocolMode,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    #[serde(with = "crate::serde_util::seed")]
    pub seed: u64,
    pub plant: PlantConfig,
    pub formation: FormationFile,
    #[serde(default)]
    pub stress: StressSpec,
    /// Optional externally supplied stress kept alongside the solver
    /// result as a cross-check; validated at load with print-rounding
    /// tolerances.
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub reference_stress: Option<Vec<Vec<f64>>>,
    pub transform: TransformSpec,
    pub weights: WeightsConfig,
    pub triggers: TriggerConstants,
    pub initial: InitialConditions,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

/// A validated scenario with every derived object assembled.
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    pub formation: NominalFormation,
    pub stress: StressMatrix,
    pub transform: AffineTransform,
    pub targets: TargetFormation,
    pub design: ControllerDesign,
}

impl ScenarioConfig {
    /// Check every static constraint, returning the full list of
    /// violations rather than the first one.
    // negated comparisons are deliberate: a NaN field must fail its check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SimError> {
        let mut violations = Vec::new();
        if !(self.dt > 0.0) {
            violations.push("dt > 0".to_string());
        }
        if !(self.t_end >= 0.0) {
            violations.push("t_end >= 0".to_string());
        }
        for (name, value) in [
            ("triggers.mu_leader", self.triggers.mu_leader),
            ("triggers.varpi_leader", self.triggers.varpi_leader),
            ("triggers.mu_follower", self.triggers.mu_follower),
            ("triggers.varpi_follower", self.triggers.varpi_follower),
        ] {
            if !(value > 0.0) {
                violations.push(format!("{name} > 0"));
            }
        }
        if !(self.initial.coupling0 > 1.0) {
            violations.push("initial.coupling0 > 1".to_string());
        }
        for (name, value) in [
            ("initial.gamma0", self.initial.gamma0),
            ("initial.varphi0", self.initial.varphi0),
            ("initial.phi0", self.initial.phi0),
        ] {
            if !(value > 0.0) {
                violations.push(format!("{name} > 0"));
            }
        }
        match (&self.initial.states, self.initial.low, self.initial.high) {
            (Some(states), _, _) => {
                if states.len() != self.formation.n {
                    violations.push(format!(
                        "initial.states must list {} agents",
                        self.formation.n
                    ));
                }
                if states.iter().any(|s| s.len() != self.formation.d) {
                    violations.push(format!(
                        "initial.states rows must have dimension {}",
                        self.formation.d
                    ));
                }
            }
            (None, Some(low), Some(high)) => {
                if !(low < high) {
                    violations.push("initial.low < initial.high".to_string());
                }
            }
            _ => violations.push(
                "initial needs either pinned `states` or a `low`/`high` range".to_string(),
            ),
        }
        if self.mode == ProtocolMode::Output {
            if self.plant.c.is_none() {
                violations.push("mode = output requires plant.c".to_string());
            }
            if self.weights.r2.is_none() {
                violations.push("mode = output requires weights.r2".to_string());
            }
        }
        if self.plant.a.len() != self.formation.d {
            violations.push(format!(
                "plant state dimension {} must equal formation dimension {}",
                self.plant.a.len(),
                self.formation.d
            ));
        }
        if self.diagnostics.decimation == 0 {
            violations.push("diagnostics.decimation >= 1".to_string());
        }
        if !(self.diagnostics.divergence_bound > 0.0) {
            violations.push("diagnostics.divergence_bound > 0".to_string());
        }
        if let StressSpec::Inline { matrix } = &self.stress {
            if matrix.len() != self.formation.n || matrix.iter().any(|r| r.len() != self.formation.n)
            {
                violations.push(format!(
                    "inline stress must be {n}x{n}",
                    n = self.formation.n
                ));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(violations))
        }
    }

    /// Validate and assemble the formation, stress, targets, and gains.
    pub fn build(&self) -> Result<ScenarioSetup, SimError> {
        self.validate()?;
        let formation = self.formation.build()?;
        let plant = self.plant.build()?;
        let stress = match &self.stress {
            StressSpec::Solve { solver } => compute_stress(&formation, solver)?,
            StressSpec::Inline { matrix } => {
                let m = rows_to_matrix(matrix)
                    .map_err(|e| SimError::invalid(format!("stress.matrix: {e}")))?;
                let report = validate_stress(&m, &formation, &StressTolerances::printed_grade());
                if !report.passed() {
                    return Err(SimError::invalid(format!(
                        "inline stress failed validation:\n{report}"
                    )));
                }
                StressMatrix::from_matrix(m, formation.leader_count())
            }
        };
        if let Some(reference) = &self.reference_stress {
            let m = rows_to_matrix(reference)
                .map_err(|e| SimError::invalid(format!("reference_stress: {e}")))?;
            let report = validate_stress(&m, &formation, &StressTolerances::printed_grade());
            if !report.passed() {
                return Err(SimError::invalid(format!(
                    "reference stress failed validation:\n{report}"
                )));
            }
        }
        let transform = self.transform.build()?;
        let targets = target_formation(&formation, &transform)?;
        let r1 = rows_to_matrix(&self.weights.r1)
            .map_err(|e| SimError::invalid(format!("weights.r1: {e}")))?;
        let r2 = match &self.weights.r2 {
            Some(r2) => Some(
                rows_to_matrix(r2).map_err(|e| SimError::invalid(format!("weights.r2: {e}")))?,
            ),
            None => None,
        };
        let design = ControllerDesign::assemble(plant, r1, r2, targets.leaders(), self.mode)?;
        Ok(ScenarioSetup {
            formation,
            stress,
            transform,
            targets,
            design,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialization")
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::invalid(format!("scenario parse error: {e}")))
    }
}

/// Split-mix style 64-bit generator: tiny, seedable, and stable across
/// platforms, which keeps trace replays bit-identical.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_f64()
    }
}
