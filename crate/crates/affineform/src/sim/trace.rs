//! Time-indexed records of a closed-loop run: states, held values,
//! adaptive parameters, error vectors, trigger values, and the event log.

use crate::design::ProtocolMode;
use nalgebra::DVector;

use super::world::{EtcWorld, StepOutcome};

/// One broadcast event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub agent: usize,
    pub time: f64,
}

/// Per-agent series over the grid. Leaders fill `gamma`; followers fill
/// `compensation`, `coupling`, `varphi`, `phi`.
#[derive(Debug, Clone, Default)]
pub struct AgentSeries {
    pub state: Vec<DVector<f64>>,
    pub observer: Vec<DVector<f64>>,
    pub compensation: Vec<DVector<f64>>,
    pub held_state: Vec<DVector<f64>>,
    pub held_compensation: Vec<DVector<f64>>,
    pub coupling: Vec<f64>,
    pub gamma: Vec<f64>,
    pub varphi: Vec<f64>,
    pub phi: Vec<f64>,
    /// Pre-update trigger value at each grid point.
    pub trigger: Vec<f64>,
}

/// Stacked error series over the grid.
#[derive(Debug, Clone, Default)]
pub struct ErrorSeries {
    pub leader: Vec<DVector<f64>>,
    pub formation: Vec<DVector<f64>>,
    pub compensation: Vec<DVector<f64>>,
    pub observer: Vec<DVector<f64>>,
}

/// End-of-run aggregates.
#[derive(Debug, Clone)]
pub struct TraceSummary {
    pub t_end: f64,
    pub steps: usize,
    pub final_leader_error: f64,
    pub final_formation_error: f64,
    pub final_compensation_error: f64,
    pub final_observer_error: Option<f64>,
    pub event_counts: Vec<usize>,
    /// Events divided by grid steps, per agent.
    pub event_frequencies: Vec<f64>,
    /// Smallest inter-event gap per agent; `t_end` when an agent logged
    /// fewer than two events.
    pub min_inter_event_gaps: Vec<f64>,
}

impl TraceSummary {
    pub fn mean_event_frequency(&self) -> f64 {
        if self.event_frequencies.is_empty() {
            return 0.0;
        }
        self.event_frequencies.iter().sum::<f64>() / self.event_frequencies.len() as f64
    }
}

/// Full record of one run, at grid resolution.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub mode: ProtocolMode,
    pub dt: f64,
    pub times: Vec<f64>,
    pub agents: Vec<AgentSeries>,
    pub errors: ErrorSeries,
    pub events: Vec<EventRecord>,
    pub post_event_triggers: Vec<(usize, usize, f64)>,
    pub summary: TraceSummary,
    n_leaders: usize,
}

impl SimulationTrace {
    pub(super) fn new(world: &EtcWorld, dt: f64) -> Self {
        let n = world.agent_count();
        let mut trace = Self {
            mode: world.mode(),
            dt,
            times: Vec::new(),
            agents: vec![AgentSeries::default(); n],
            errors: ErrorSeries::default(),
            events: Vec::new(),
            post_event_triggers: Vec::new(),
            summary: TraceSummary {
                t_end: 0.0,
                steps: 0,
                final_leader_error: 0.0,
                final_formation_error: 0.0,
                final_compensation_error: 0.0,
                final_observer_error: None,
                event_counts: vec![0; n],
                event_frequencies: vec![0.0; n],
                min_inter_event_gaps: vec![0.0; n],
            },
            n_leaders: world.leader_count(),
        };
        // initial grid point: triggers evaluated but no events at t = 0
        let initial_triggers: Vec<f64> = (0..n).map(|i| world.trigger_value(i)).collect();
        trace.record_point(world, &initial_triggers);
        trace
    }

    pub fn leader_count(&self) -> usize {
        self.n_leaders
    }

    pub fn follower_count(&self) -> usize {
        self.agents.len() - self.n_leaders
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    fn record_point(&mut self, world: &EtcWorld, triggers: &[f64]) {
        self.times.push(world.time());
        for (i, series) in self.agents.iter_mut().enumerate() {
            let agent = world.agent(i);
            series.state.push(agent.state.clone());
            if let Some(z) = &agent.observer {
                series.observer.push(z.clone());
            }
            if let Some(y) = &agent.compensation {
                series.compensation.push(y.clone());
            }
            series.held_state.push(agent.held_state.clone());
            if let Some(hy) = &agent.held_compensation {
                series.held_compensation.push(hy.clone());
            }
            if i < self.n_leaders {
                series.gamma.push(agent.gamma);
            } else {
                series.coupling.push(agent.coupling);
                series.varphi.push(agent.varphi);
                series.phi.push(agent.phi);
            }
            series.trigger.push(triggers[i]);
        }
        let errors = world.errors();
        self.errors.leader.push(errors.leader);
        self.errors.formation.push(errors.formation);
        self.errors.compensation.push(errors.compensation);
        if let Some(delta) = errors.observer {
            self.errors.observer.push(delta);
        }
    }

    pub(super) fn record_step(&mut self, world: &EtcWorld, outcome: &StepOutcome) {
        let step_index = self.times.len();
        self.record_point(world, &outcome.trigger_values);
        for &agent in &outcome.fired {
            self.events.push(EventRecord {
                agent,
                time: world.time(),
            });
        }
        for &(agent, f) in &outcome.post_trigger_values {
            self.post_event_triggers.push((step_index, agent, f));
        }
    }

    pub(super) fn finalize(&mut self) {
        let n = self.agents.len();
        let steps = self.steps().max(1);
        let t_end = self.times.last().copied().unwrap_or(0.0);
        let mut counts = vec![0usize; n];
        let mut last_time: Vec<Option<f64>> = vec![None; n];
        let mut min_gaps = vec![t_end; n];
        for e in &self.events {
            counts[e.agent] += 1;
            if let Some(prev) = last_time[e.agent] {
                min_gaps[e.agent] = min_gaps[e.agent].min(e.time - prev);
            }
            last_time[e.agent] = Some(e.time);
        }
        let frequencies = counts.iter().map(|&c| c as f64 / steps as f64).collect();
        self.summary = TraceSummary {
            t_end,
            steps: self.steps(),
            final_leader_error: self.errors.leader.last().map_or(0.0, |v| v.norm()),
            final_formation_error: self.errors.formation.last().map_or(0.0, |v| v.norm()),
            final_compensation_error: self.errors.compensation.last().map_or(0.0, |v| v.norm()),
            final_observer_error: (self.mode == ProtocolMode::Output)
                .then(|| self.errors.observer.last().map_or(0.0, |v| v.norm())),
            event_counts: counts,
            event_frequencies: frequencies,
            min_inter_event_gaps: min_gaps,
        };
    }

    /// Events of one agent in time order.
    pub fn agent_events(&self, agent: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.agent == agent)
            .map(|e| e.time)
            .collect()
    }
}

/// Per-agent result of the event-density audit.
#[derive(Debug, Clone)]
pub struct ZenoAgentReport {
    pub agent: usize,
    pub event_count: usize,
    /// Smallest observed inter-event gap; `t_end` with fewer than two
    /// events.
    pub min_gap: f64,
    /// Event counts over consecutive windows of `window_seconds`.
    pub window_counts: Vec<usize>,
    /// Set when any window holds events at more than half of its grid
    /// points.
    pub suspect: bool,
}

/// Event-density audit over fixed one-second windows.
#[derive(Debug, Clone)]
pub struct ZenoAudit {
    pub window_seconds: f64,
    pub per_agent: Vec<ZenoAgentReport>,
}

impl ZenoAudit {
    pub fn any_suspect(&self) -> bool {
        self.per_agent.iter().any(|a| a.suspect)
    }

    /// True when the agent's last full window holds no more events than
    /// its first.
    pub fn density_non_increasing(&self, agent: usize) -> bool {
        let w = &self.per_agent[agent].window_counts;
        match (w.first(), w.last()) {
            (Some(first), Some(last)) => last <= first,
            _ => true,
        }
    }
}

/// Audit the event log for density anomalies. Grid-sampled triggering
/// bounds every inter-event gap below by `dt`, so instead of a Zeno test
/// proper this flags agents that fire at more than half of the grid
/// points inside any one-second window.
pub fn zeno_audit(trace: &SimulationTrace) -> ZenoAudit {
    let window_seconds = 1.0;
    let t_end = trace.summary.t_end;
    let full_windows = (t_end / window_seconds).floor() as usize;
    let steps_per_window = (window_seconds / trace.dt).round() as usize;
    let per_agent = (0..trace.agent_count())
        .map(|agent| {
            let times = trace.agent_events(agent);
            let mut window_counts = vec![0usize; full_windows.max(1)];
            for &t in &times {
                // events on the final boundary belong to the last window
                let w = (t / window_seconds).floor().max(0.0) as usize;
                let w = w.min(window_counts.len() - 1);
                window_counts[w] += 1;
            }
            let suspect = window_counts
                .iter()
                .any(|&c| 2 * c > steps_per_window.max(1));
            ZenoAgentReport {
                agent,
                event_count: times.len(),
                min_gap: trace.summary.min_inter_event_gaps[agent],
                window_counts,
                suspect,
            }
        })
        .collect();
    ZenoAudit {
        window_seconds,
        per_agent,
    }
}
