//! Scenario loading, the bundled benchmark catalog, and trace
//! persistence.
//!
//! Scenario documents are TOML (see [`crate::sim::ScenarioConfig`]);
//! traces land in a directory as four artifacts:
//!
//! - `states.csv`: one row per (decimated) grid point with every agent's
//!   state, observer state, compensation estimate, and adaptive
//!   parameters, at full precision,
//! - `events.csv`: the broadcast log as `(agent, t)` rows,
//! - `plot.csv`: long-format `(series, t, value)` rows for error norms
//!   and adaptive parameters,
//! - `summary.toml`: final errors, event statistics, and the bound
//!   monitor verdict when it ran.

use crate::design::ProtocolMode;
use crate::fixtures;
use crate::formation::FormationFile;
use crate::serde_util::matrix_to_rows;
use crate::sim::{
    DiagnosticsConfig, InitialConditions, Integrator, LyapunovSeries, PlantConfig, ScenarioConfig,
    SimError, SimulationTrace, StressSpec, TransformSpec, TriggerConstants, WeightsConfig,
};
use crate::stress::StressSolverOptions;
use crate::targets::BenchmarkCase;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Identifiers of the bundled scenarios.
pub fn fixture_ids() -> Vec<&'static str> {
    vec![
        "case1-nominal",
        "case1-rotation",
        "case1-scale",
        "case1-shear",
        "case1-coplanar",
        "case1-combination",
        "case2-nominal",
        "case2-rotation",
        "case2-scale",
        "case2-shear",
        "case2-colinear",
        "case2-combination",
    ]
}

/// Build a bundled scenario by id.
pub fn fixture(id: &str) -> Option<ScenarioConfig> {
    let (case, preset) = match id.split_once('-') {
        Some(("case1", rest)) => (BenchmarkCase::Case1, rest),
        Some(("case2", rest)) => (BenchmarkCase::Case2, rest),
        _ => return None,
    };
    let preset = match preset {
        "nominal" => "identity",
        other => other,
    };
    if !crate::targets::preset_names(case).contains(&preset) {
        return None;
    }
    Some(match case {
        BenchmarkCase::Case1 => case1_scenario(id, preset),
        BenchmarkCase::Case2 => case2_scenario(id, preset),
    })
}

fn case1_scenario(name: &str, preset: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        mode: ProtocolMode::State,
        dt: 0.01,
        t_end: 10.0,
        integrator: Integrator::Euler,
        seed: 1,
        plant: PlantConfig {
            a: matrix_to_rows(&fixtures::case1_plant_a()),
            b: matrix_to_rows(&fixtures::case1_plant_b()),
            c: None,
        },
        formation: FormationFile::from(&fixtures::case1_formation()),
        stress: StressSpec::Solve {
            solver: StressSolverOptions::default(),
        },
        reference_stress: Some(matrix_to_rows(&fixtures::case1_printed_stress())),
        transform: TransformSpec::Preset {
            case: BenchmarkCase::Case1,
            name: preset.to_string(),
        },
        weights: WeightsConfig::identity(3, false),
        triggers: TriggerConstants {
            mu_leader: 1.0,
            varpi_leader: 1.0,
            mu_follower: 1.0,
            varpi_follower: 1.0,
        },
        initial: InitialConditions {
            low: Some(-5.0),
            high: Some(5.0),
            states: None,
            coupling0: 6.0,
            gamma0: 6.0,
            varphi0: 6.0,
            phi0: 6.0,
        },
        diagnostics: DiagnosticsConfig::default(),
    }
}

fn case2_scenario(name: &str, preset: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        mode: ProtocolMode::Output,
        dt: 0.01,
        t_end: 25.0,
        integrator: Integrator::Euler,
        seed: 1,
        plant: PlantConfig {
            a: matrix_to_rows(&fixtures::case2_plant_a()),
            b: matrix_to_rows(&fixtures::case2_plant_b()),
            c: Some(matrix_to_rows(&fixtures::case2_plant_c())),
        },
        formation: FormationFile::from(&fixtures::case2_formation()),
        stress: StressSpec::Solve {
            solver: StressSolverOptions::default(),
        },
        reference_stress: None,
        transform: TransformSpec::Preset {
            case: BenchmarkCase::Case2,
            name: preset.to_string(),
        },
        weights: WeightsConfig::identity(4, true),
        triggers: TriggerConstants {
            mu_leader: 1.0,
            varpi_leader: 0.6,
            mu_follower: 1.0,
            varpi_follower: 0.6,
        },
        initial: InitialConditions {
            low: Some(-5.0),
            high: Some(5.0),
            states: None,
            coupling0: 4.0,
            gamma0: 4.0,
            varphi0: 4.0,
            phi0: 4.0,
        },
        diagnostics: DiagnosticsConfig::default(),
    }
}

/// Resolve a scenario from a catalog id or a file path (ids win).
pub fn load_scenario(path_or_id: &str) -> Result<ScenarioConfig, SimError> {
    if let Some(config) = fixture(path_or_id) {
        config.validate()?;
        return Ok(config);
    }
    let text = std::fs::read_to_string(path_or_id).map_err(|e| {
        SimError::invalid(format!(
            "`{path_or_id}` is neither a bundled scenario id nor a readable file: {e}"
        ))
    })?;
    let config = ScenarioConfig::from_toml(&text)?;
    config.validate()?;
    Ok(config)
}

fn fmt_full(x: f64) -> String {
    format!("{x:.17e}")
}

/// Serialized run summary.
#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryFile {
    pub scenario: String,
    pub mode: String,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub final_leader_error: f64,
    pub final_formation_error: f64,
    pub final_compensation_error: f64,
    pub final_observer_error: Option<f64>,
    pub event_counts: Vec<usize>,
    pub event_frequencies_percent: Vec<f64>,
    pub mean_event_frequency_percent: f64,
    pub min_inter_event_gaps: Vec<f64>,
    pub zeno_suspects: Vec<usize>,
    pub lyapunov_bounded: Option<bool>,
    pub lyapunov_violations: Option<usize>,
}

/// Paths produced by [`emit_trace`].
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub states: PathBuf,
    pub events: PathBuf,
    pub plot: PathBuf,
    pub summary: PathBuf,
}

/// Write the four trace artifacts into `dir` (created if missing).
/// `decimation` keeps every k-th grid row in `states.csv` and `plot.csv`;
/// the event log and summary always cover the full run.
pub fn emit_trace(
    trace: &SimulationTrace,
    dir: impl AsRef<Path>,
    scenario_name: &str,
    decimation: usize,
    lyapunov: Option<&LyapunovSeries>,
) -> Result<EmittedFiles, SimError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let decimation = decimation.max(1);
    let n = trace.agent_count();
    let n_l = trace.leader_count();
    let dim = trace.agents[0].state[0].len();

    // states.csv
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for k in 0..dim {
            header.push(format!("p{}_{}", i + 1, k));
        }
    }
    if !trace.agents[0].observer.is_empty() {
        for i in 0..n {
            for k in 0..dim {
                header.push(format!("z{}_{}", i + 1, k));
            }
        }
    }
    let m = trace.agents.get(n_l).map_or(0, |a| {
        a.compensation.first().map_or(0, |y| y.len())
    });
    for i in n_l..n {
        for k in 0..m {
            header.push(format!("y{}_{}", i + 1, k));
        }
    }
    for i in 0..n_l {
        header.push(format!("gamma{}", i + 1));
    }
    for i in n_l..n {
        header.push(format!("coupling{}", i + 1));
        header.push(format!("varphi{}", i + 1));
        header.push(format!("phi{}", i + 1));
    }
    let mut states_csv = header.join(",");
    states_csv.push('\n');
    for (idx, &t) in trace.times.iter().enumerate() {
        if idx % decimation != 0 && idx != trace.times.len() - 1 {
            continue;
        }
        let mut row = vec![fmt_full(t)];
        for series in &trace.agents {
            row.extend(series.state[idx].iter().map(|&x| fmt_full(x)));
        }
        if !trace.agents[0].observer.is_empty() {
            for series in &trace.agents {
                row.extend(series.observer[idx].iter().map(|&x| fmt_full(x)));
            }
        }
        for series in trace.agents.iter().skip(n_l) {
            row.extend(series.compensation[idx].iter().map(|&x| fmt_full(x)));
        }
        for series in trace.agents.iter().take(n_l) {
            row.push(fmt_full(series.gamma[idx]));
        }
        for series in trace.agents.iter().skip(n_l) {
            row.push(fmt_full(series.coupling[idx]));
            row.push(fmt_full(series.varphi[idx]));
            row.push(fmt_full(series.phi[idx]));
        }
        states_csv.push_str(&row.join(","));
        states_csv.push('\n');
    }
    let states_path = dir.join("states.csv");
    std::fs::write(&states_path, states_csv)?;

    // events.csv
    let mut events_csv = String::from("agent,t\n");
    for e in &trace.events {
        events_csv.push_str(&format!("{},{}\n", e.agent + 1, fmt_full(e.time)));
    }
    let events_path = dir.join("events.csv");
    std::fs::write(&events_path, events_csv)?;

    // plot.csv: long format error norms and adaptive parameters
    let mut plot_csv = String::from("series,t,value\n");
    {
        let mut push = |series: &str, t: f64, value: f64| {
            plot_csv.push_str(&format!("{series},{},{}\n", fmt_full(t), fmt_full(value)));
        };
        for (idx, &t) in trace.times.iter().enumerate() {
            if idx % decimation != 0 && idx != trace.times.len() - 1 {
                continue;
            }
            let leader = &trace.errors.leader[idx];
            for i in 0..n_l {
                push(
                    &format!("leader_error_{}", i + 1),
                    t,
                    leader.rows(i * dim, dim).norm(),
                );
            }
            let formation = &trace.errors.formation[idx];
            for fi in 0..(n - n_l) {
                push(
                    &format!("formation_error_{}", n_l + fi + 1),
                    t,
                    formation.rows(fi * dim, dim).norm(),
                );
            }
            if let Some(delta) = trace.errors.observer.get(idx) {
                push("observer_error", t, delta.norm());
            }
            for (i, series) in trace.agents.iter().enumerate() {
                if i < n_l {
                    push(&format!("gamma_{}", i + 1), t, series.gamma[idx]);
                } else {
                    push(&format!("coupling_{}", i + 1), t, series.coupling[idx]);
                    push(&format!("varphi_{}", i + 1), t, series.varphi[idx]);
                    push(&format!("phi_{}", i + 1), t, series.phi[idx]);
                }
            }
            if let Some(series) = lyapunov {
                push("lyapunov_value", t, series.value[idx]);
                push("lyapunov_bound", t, series.bound[idx]);
            }
        }
    }
    let plot_path = dir.join("plot.csv");
    std::fs::write(&plot_path, plot_csv)?;

    // summary.toml
    let audit = crate::sim::zeno_audit(trace);
    let summary = SummaryFile {
        scenario: scenario_name.to_string(),
        mode: trace.mode.to_string(),
        dt: trace.dt,
        t_end: trace.summary.t_end,
        steps: trace.summary.steps,
        final_leader_error: trace.summary.final_leader_error,
        final_formation_error: trace.summary.final_formation_error,
        final_compensation_error: trace.summary.final_compensation_error,
        final_observer_error: trace.summary.final_observer_error,
        event_counts: trace.summary.event_counts.clone(),
        event_frequencies_percent: trace
            .summary
            .event_frequencies
            .iter()
            .map(|f| 100.0 * f)
            .collect(),
        mean_event_frequency_percent: 100.0 * trace.summary.mean_event_frequency(),
        min_inter_event_gaps: trace.summary.min_inter_event_gaps.clone(),
        zeno_suspects: audit
            .per_agent
            .iter()
            .filter(|a| a.suspect)
            .map(|a| a.agent + 1)
            .collect(),
        lyapunov_bounded: lyapunov.map(|l| l.bounded()),
        lyapunov_violations: lyapunov.map(|l| l.violations.len()),
    };
    let summary_path = dir.join("summary.toml");
    std::fs::write(
        &summary_path,
        toml::to_string_pretty(&summary).expect("summary serialization"),
    )?;

    Ok(EmittedFiles {
        states: states_path,
        events: events_path,
        plot: plot_path,
        summary: summary_path,
    })
}

/// Read back a summary document.
pub fn load_summary(dir: impl AsRef<Path>) -> Result<SummaryFile, SimError> {
    let path = dir.as_ref().join("summary.toml");
    let text = std::fs::read_to_string(&path)?;
    toml::from_str(&text).map_err(|e| SimError::invalid(format!("summary parse error: {e}")))
}

/// Event-count table for a finished run, one column per agent.
pub fn event_count_table(summary: &SummaryFile) -> String {
    let n = summary.event_counts.len();
    let mut out = String::new();
    out.push_str(&format!(
        "Events per agent ({}, {}s at dt = {}):\n",
        summary.scenario, summary.t_end, summary.dt
    ));
    let agents: Vec<String> = (1..=n).map(|i| format!("{i:>6}")).collect();
    out.push_str(&format!("agent   {}\n", agents.join(" ")));
    let counts: Vec<String> = summary.event_counts.iter().map(|c| format!("{c:>6}")).collect();
    out.push_str(&format!("events  {}\n", counts.join(" ")));
    let freqs: Vec<String> = summary
        .event_frequencies_percent
        .iter()
        .map(|f| format!("{f:>5.1}%"))
        .collect();
    out.push_str(&format!("rate    {}\n", freqs.join(" ")));
    out.push_str(&format!(
        "mean rate {:.2}%  |  final errors: leader {:.3e}, formation {:.3e}\n",
        summary.mean_event_frequency_percent,
        summary.final_leader_error,
        summary.final_formation_error
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_scenario;

    #[test]
    fn every_fixture_builds_and_validates() {
        for id in fixture_ids() {
            let config = fixture(id).unwrap_or_else(|| panic!("missing fixture {id}"));
            config
                .build()
                .unwrap_or_else(|e| panic!("fixture {id} failed to build: {e}"));
        }
    }

    #[test]
    fn fixtures_carry_their_benchmark_parameters() {
        let c1 = fixture("case1-nominal").unwrap();
        assert_eq!(c1.initial.coupling0, 6.0);
        assert_eq!(c1.initial.gamma0, 6.0);
        assert_eq!(c1.triggers.varpi_leader, 1.0);
        assert_eq!(c1.t_end, 10.0);
        let c2 = fixture("case2-nominal").unwrap();
        assert_eq!(c2.initial.coupling0, 4.0);
        assert_eq!(c2.triggers.varpi_follower, 0.6);
        assert_eq!(c2.t_end, 25.0);
        assert!(c2.plant.c.is_some());
    }

    #[test]
    fn unknown_fixture_is_none() {
        assert!(fixture("case3-nominal").is_none());
        assert!(fixture("case1-twist").is_none());
    }

    #[test]
    fn load_scenario_rejects_garbage_file() {
        let dir = std::env::temp_dir().join("affineform-scenario-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.toml");
        std::fs::write(&path, "").unwrap();
        assert!(load_scenario(path.to_str().unwrap()).is_err());
    }

    #[test]
    fn scenario_file_round_trip_via_disk() {
        let dir = std::env::temp_dir().join("affineform-scenario-rt");
        std::fs::create_dir_all(&dir).unwrap();
        let config = fixture("case2-shear").unwrap();
        let path = dir.join("scenario.toml");
        std::fs::write(&path, config.to_toml()).unwrap();
        let back = load_scenario(path.to_str().unwrap()).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn emit_produces_expected_row_counts() {
        let mut config = fixture("case1-nominal").unwrap();
        config.t_end = 10.0 * 0.01 * 100.0; // 1000 steps
        let trace = run_scenario(&config).unwrap();
        assert_eq!(trace.steps(), 1000);
        let dir = std::env::temp_dir().join("affineform-emit-test");
        let files = emit_trace(&trace, &dir, &config.name, 10, None).unwrap();
        let text = std::fs::read_to_string(&files.states).unwrap();
        // header + 101 decimated rows (grid point 1000 is kept as final)
        assert_eq!(text.lines().count(), 1 + 101);
        let events = std::fs::read_to_string(&files.events).unwrap();
        let agents: std::collections::BTreeSet<&str> = events
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert!(agents.len() <= 10);
        assert!(!agents.is_empty(), "a converging run logs events");
        let summary = load_summary(&dir).unwrap();
        assert_eq!(summary.event_counts.len(), 10);
        let table = event_count_table(&summary);
        assert!(table.contains("events"));
    }

    #[test]
    fn zero_length_run_emits_headers_only() {
        let mut config = fixture("case1-nominal").unwrap();
        config.t_end = 0.0;
        let trace = run_scenario(&config).unwrap();
        let dir = std::env::temp_dir().join("affineform-emit-zero");
        let files = emit_trace(&trace, &dir, &config.name, 1, None).unwrap();
        let events = std::fs::read_to_string(&files.events).unwrap();
        assert_eq!(events.lines().count(), 1); // header only
        let states = std::fs::read_to_string(&files.states).unwrap();
        assert_eq!(states.lines().count(), 2); // header + t = 0 row
    }
}
