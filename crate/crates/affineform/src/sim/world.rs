//! The event-triggered closed-loop world: continuous dynamics between
//! grid points, trigger evaluation and held-value refresh at grid points.
//!
//! Information flow is the point of this module. Each agent's control
//! input is built exclusively from its own held broadcast, its own
//! compensation estimate, and cached neighborhood aggregates that are
//! recomputed only when a participating agent fires an event. Neighbors'
//! continuous states never enter the loop; a test corrupts them and
//! checks nothing changes.
//!
//! Between events a follower's neighborhood mismatch is constant, so its
//! coupling gain grows affinely and its compensation estimate integrates
//! a constant-coefficient law; the integrators only have to track the
//! continuous states.

use crate::design::ProtocolMode;
use nalgebra::{DMatrix, DVector};

use super::config::{Integrator, ScenarioConfig, ScenarioSetup, SplitMix64, TriggerConstants};
use super::SimError;

/// Per-agent runtime data. Leaders use `gamma`; followers use
/// `compensation`, `coupling`, `varphi`, and `phi`. In output mode
/// `observer` is present for everyone and held values refer to observer
/// states.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub state: DVector<f64>,
    pub observer: Option<DVector<f64>>,
    pub compensation: Option<DVector<f64>>,
    pub coupling: f64,
    pub gamma: f64,
    pub varphi: f64,
    pub phi: f64,
    pub held_state: DVector<f64>,
    pub held_compensation: Option<DVector<f64>>,
    pub last_event_time: Option<f64>,
    pub event_count: usize,
}

impl AgentState {
    /// The signal the trigger watches: measured state or observer state.
    pub fn broadcast_source(&self) -> &DVector<f64> {
        self.observer.as_ref().unwrap_or(&self.state)
    }

    /// Measurement error `held - current` of the broadcast signal.
    pub fn measurement_error(&self) -> DVector<f64> {
        &self.held_state - self.broadcast_source()
    }

    /// Measurement error of the compensation broadcast (followers).
    pub fn compensation_error(&self) -> Option<DVector<f64>> {
        match (&self.held_compensation, &self.compensation) {
            (Some(held), Some(current)) => Some(held - current),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct AgentRates {
    state: DVector<f64>,
    observer: Option<DVector<f64>>,
    compensation: Option<DVector<f64>>,
    coupling: f64,
    gamma: f64,
    varphi: f64,
    phi: f64,
}

/// What one grid step produced: the trigger values before any update,
/// the agents that fired, and their post-update trigger values.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub trigger_values: Vec<f64>,
    pub fired: Vec<usize>,
    pub post_trigger_values: Vec<(usize, f64)>,
}

/// Stacked error snapshot at the current time.
#[derive(Debug, Clone)]
pub struct ErrorSnapshot {
    /// Leader tracking error, broadcast signal minus target, stacked.
    pub leader: DVector<f64>,
    /// Follower formation error: weighted neighborhood sums of the
    /// broadcast signal, stacked.
    pub formation: DVector<f64>,
    /// Follower compensation mismatch, stacked.
    pub compensation: DVector<f64>,
    /// Observer error `z - p`, stacked over all agents (output mode).
    pub observer: Option<DVector<f64>>,
}

/// Control input of a leader: gain times held state plus compensation.
pub fn leader_control(
    gain: &DMatrix<f64>,
    held_state: &DVector<f64>,
    compensation: &DVector<f64>,
) -> DVector<f64> {
    gain * held_state + compensation
}

/// Control input of a follower: gain times held state plus the held
/// compensation estimate.
pub fn follower_control(
    gain: &DMatrix<f64>,
    held_state: &DVector<f64>,
    held_compensation: &DVector<f64>,
) -> DVector<f64> {
    gain * held_state + held_compensation
}

/// Leader trigger function: positive means fire.
pub fn leader_trigger_value(
    gamma: f64,
    measurement_error: &DVector<f64>,
    held_state: &DVector<f64>,
    target: &DVector<f64>,
    constants: &TriggerConstants,
    t: f64,
) -> f64 {
    gamma * measurement_error.norm_squared()
        - (held_state - target).norm_squared()
        - constants.mu_leader * (-constants.varpi_leader * t).exp()
}

/// Follower trigger function: positive means fire.
#[allow(clippy::too_many_arguments)]
pub fn follower_trigger_value(
    varphi: f64,
    phi: f64,
    coupling: f64,
    measurement_error: &DVector<f64>,
    compensation_error: &DVector<f64>,
    combined_hat: &DVector<f64>,
    theta_hat: &DVector<f64>,
    constants: &TriggerConstants,
    t: f64,
) -> f64 {
    varphi * measurement_error.norm_squared()
        + phi * coupling * compensation_error.norm_squared()
        - combined_hat.norm_squared()
        - theta_hat.norm_squared()
        - constants.mu_follower * (-constants.varpi_follower * t).exp()
}

/// The closed-loop world advanced on a fixed grid.
#[derive(Debug, Clone)]
pub struct EtcWorld {
    mode: ProtocolMode,
    gain: DMatrix<f64>,
    plant_a: DMatrix<f64>,
    plant_b: DMatrix<f64>,
    observer_injection: Option<DMatrix<f64>>, // F C
    /// Per-agent neighbor list `(j, w_ij)`.
    neighbors: Vec<Vec<(usize, f64)>>,
    leader_compensation: Vec<DVector<f64>>,
    targets: Vec<DVector<f64>>,
    n_leaders: usize,
    triggers: TriggerConstants,
    divergence_bound: f64,
    t: f64,
    steps_taken: u64,
    agents: Vec<AgentState>,
    /// Follower neighborhood mismatch of held compensation estimates.
    theta_hat: Vec<DVector<f64>>,
    /// Follower neighborhood mismatch of held broadcast states.
    combined_hat: Vec<DVector<f64>>,
}

impl EtcWorld {
    /// Build the world at `t = 0`: draw or pin initial states, zero the
    /// observers and compensation estimates, and broadcast once so every
    /// held value starts synchronized.
    pub fn new(setup: &ScenarioSetup, config: &ScenarioConfig) -> Result<Self, SimError> {
        let n = setup.formation.agent_count();
        let n_leaders = setup.formation.leader_count();
        let dim = setup.formation.dim();
        let m = setup.design.plant.input_dim();

        let mut rng = SplitMix64::new(config.seed);
        let initial_states: Vec<DVector<f64>> = match &config.initial.states {
            Some(pinned) => pinned.iter().map(|row| DVector::from_column_slice(row)).collect(),
            None => {
                let low = config.initial.low.expect("validated");
                let high = config.initial.high.expect("validated");
                (0..n)
                    .map(|_| DVector::from_fn(dim, |_, _| rng.uniform(low, high)))
                    .collect()
            }
        };

        let output_mode = config.mode == ProtocolMode::Output;
        let observer_injection = if output_mode {
            let f = setup.design.f.as_ref().expect("output design has F");
            let c = setup.design.plant.c.as_ref().expect("output design has C");
            Some(f * c)
        } else {
            None
        };

        let agents: Vec<AgentState> = (0..n)
            .map(|i| {
                let is_leader = i < n_leaders;
                let observer = output_mode.then(|| DVector::zeros(dim));
                let compensation = (!is_leader).then(|| DVector::zeros(m));
                let held_state = if output_mode {
                    DVector::zeros(dim)
                } else {
                    initial_states[i].clone()
                };
                AgentState {
                    state: initial_states[i].clone(),
                    observer,
                    held_compensation: compensation.clone(),
                    compensation,
                    coupling: config.initial.coupling0,
                    gamma: config.initial.gamma0,
                    varphi: config.initial.varphi0,
                    phi: config.initial.phi0,
                    held_state,
                    last_event_time: None,
                    event_count: 0,
                }
            })
            .collect();

        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| {
                        let w = setup.stress.weight(i, j);
                        (w != 0.0).then_some((j, w))
                    })
                    .collect()
            })
            .collect();

        let mut world = Self {
            mode: config.mode,
            gain: setup.design.k.clone(),
            plant_a: setup.design.plant.a.clone(),
            plant_b: setup.design.plant.b.clone(),
            observer_injection,
            neighbors,
            leader_compensation: setup.design.compensation.vectors.clone(),
            targets: setup.targets.points().to_vec(),
            n_leaders,
            triggers: config.triggers,
            divergence_bound: config.diagnostics.divergence_bound,
            t: 0.0,
            steps_taken: 0,
            agents,
            theta_hat: Vec::new(),
            combined_hat: Vec::new(),
        };
        world.recompute_caches();
        Ok(world)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn leader_count(&self) -> usize {
        self.n_leaders
    }

    pub fn mode(&self) -> ProtocolMode {
        self.mode
    }

    pub fn agent(&self, i: usize) -> &AgentState {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn target(&self, i: usize) -> &DVector<f64> {
        &self.targets[i]
    }

    /// Neighborhood mismatch of held compensation estimates for follower
    /// index `fi` (0-based among followers).
    pub fn theta_hat(&self, fi: usize) -> &DVector<f64> {
        &self.theta_hat[fi]
    }

    /// Neighborhood mismatch of held broadcast states for follower `fi`.
    pub fn combined_hat(&self, fi: usize) -> &DVector<f64> {
        &self.combined_hat[fi]
    }

    /// Overwrite a follower's compensation estimate (0-based follower
    /// index) and refresh its broadcast. Useful for warm starts and for
    /// placing the world at an equilibrium in tests.
    pub fn set_follower_compensation(&mut self, fi: usize, value: DVector<f64>) {
        let agent = &mut self.agents[self.n_leaders + fi];
        agent.compensation = Some(value.clone());
        agent.held_compensation = Some(value);
        self.recompute_caches();
    }

    /// Re-broadcast every agent's current signal (held values := current)
    /// without logging events.
    pub fn resync_held(&mut self) {
        for agent in &mut self.agents {
            agent.held_state = agent.broadcast_source().clone();
            if let Some(y) = &agent.compensation {
                agent.held_compensation = Some(y.clone());
            }
        }
        self.recompute_caches();
    }

    fn recompute_caches(&mut self) {
        let n_f = self.agents.len() - self.n_leaders;
        let m = self.plant_b.ncols();
        let dim = self.plant_a.nrows();
        let mut theta = Vec::with_capacity(n_f);
        let mut combined = Vec::with_capacity(n_f);
        for fi in 0..n_f {
            let i = self.n_leaders + fi;
            let own_comp = self.agents[i]
                .held_compensation
                .as_ref()
                .expect("followers hold a compensation broadcast");
            let mut th = DVector::zeros(m);
            let mut cb = DVector::zeros(dim);
            for &(j, w) in &self.neighbors[i] {
                if j < self.n_leaders {
                    th += w * (own_comp - &self.leader_compensation[j]);
                } else {
                    let other = self.agents[j]
                        .held_compensation
                        .as_ref()
                        .expect("followers hold a compensation broadcast");
                    th += w * (own_comp - other);
                }
                cb += w * (&self.agents[i].held_state - &self.agents[j].held_state);
            }
            theta.push(th);
            combined.push(cb);
        }
        self.theta_hat = theta;
        self.combined_hat = combined;
    }

    /// Control input of agent `i` from held data only.
    pub fn control_input(&self, i: usize) -> DVector<f64> {
        let agent = &self.agents[i];
        if i < self.n_leaders {
            leader_control(&self.gain, &agent.held_state, &self.leader_compensation[i])
        } else {
            follower_control(
                &self.gain,
                &agent.held_state,
                agent
                    .held_compensation
                    .as_ref()
                    .expect("followers hold a compensation broadcast"),
            )
        }
    }

    /// Time derivatives of every continuous quantity, with held values
    /// and neighborhood caches frozen. Only the agents' own continuous
    /// fields are read.
    fn rates(agents: &[AgentState], world: &Self) -> Vec<AgentRates> {
        (0..agents.len())
            .map(|i| {
                let agent = &agents[i];
                let u = if i < world.n_leaders {
                    leader_control(&world.gain, &agent.held_state, &world.leader_compensation[i])
                } else {
                    follower_control(
                        &world.gain,
                        &agent.held_state,
                        agent.held_compensation.as_ref().expect("follower"),
                    )
                };
                let bu = &world.plant_b * &u;
                let state_rate = &world.plant_a * &agent.state + &bu;
                let observer_rate = agent.observer.as_ref().map(|z| {
                    let injection = world
                        .observer_injection
                        .as_ref()
                        .expect("output mode has F C");
                    &world.plant_a * z + &bu + injection * (z - &agent.state)
                });
                let eps = match &agent.observer {
                    Some(z) => &agent.held_state - z,
                    None => &agent.held_state - &agent.state,
                };
                let eps_sq = eps.norm_squared();
                if i < world.n_leaders {
                    AgentRates {
                        state: state_rate,
                        observer: observer_rate,
                        compensation: None,
                        coupling: 0.0,
                        gamma: eps_sq,
                        varphi: 0.0,
                        phi: 0.0,
                    }
                } else {
                    let fi = i - world.n_leaders;
                    let th = &world.theta_hat[fi];
                    let y_err = agent
                        .held_compensation
                        .as_ref()
                        .expect("follower")
                        - agent.compensation.as_ref().expect("follower");
                    AgentRates {
                        state: state_rate,
                        observer: observer_rate,
                        compensation: Some(-agent.coupling * th),
                        coupling: th.norm_squared(),
                        gamma: 0.0,
                        varphi: eps_sq,
                        phi: agent.coupling * y_err.norm_squared(),
                    }
                }
            })
            .collect()
    }

    fn apply_rates(agents: &mut [AgentState], rates: &[AgentRates], h: f64) {
        for (agent, rate) in agents.iter_mut().zip(rates) {
            agent.state.axpy(h, &rate.state, 1.0);
            if let (Some(z), Some(rz)) = (&mut agent.observer, &rate.observer) {
                z.axpy(h, rz, 1.0);
            }
            if let (Some(y), Some(ry)) = (&mut agent.compensation, &rate.compensation) {
                y.axpy(h, ry, 1.0);
            }
            agent.coupling += h * rate.coupling;
            agent.gamma += h * rate.gamma;
            agent.varphi += h * rate.varphi;
            agent.phi += h * rate.phi;
        }
    }

    fn integrate(&mut self, dt: f64, integrator: Integrator) {
        match integrator {
            Integrator::Euler => {
                let k1 = Self::rates(&self.agents, self);
                Self::apply_rates(&mut self.agents, &k1, dt);
            }
            Integrator::Rk4 => {
                let base = self.agents.clone();
                let k1 = Self::rates(&self.agents, self);
                let mut stage = base.clone();
                Self::apply_rates(&mut stage, &k1, 0.5 * dt);
                let k2 = Self::rates(&stage, self);
                stage = base.clone();
                Self::apply_rates(&mut stage, &k2, 0.5 * dt);
                let k3 = Self::rates(&stage, self);
                stage = base.clone();
                Self::apply_rates(&mut stage, &k3, dt);
                let k4 = Self::rates(&stage, self);
                self.agents = base;
                Self::apply_rates(&mut self.agents, &k1, dt / 6.0);
                Self::apply_rates(&mut self.agents, &k2, dt / 3.0);
                Self::apply_rates(&mut self.agents, &k3, dt / 3.0);
                Self::apply_rates(&mut self.agents, &k4, dt / 6.0);
            }
        }
    }

    /// Trigger function of agent `i` at the current time.
    pub fn trigger_value(&self, i: usize) -> f64 {
        let agent = &self.agents[i];
        let eps = agent.measurement_error();
        if i < self.n_leaders {
            leader_trigger_value(
                agent.gamma,
                &eps,
                &agent.held_state,
                &self.targets[i],
                &self.triggers,
                self.t,
            )
        } else {
            let fi = i - self.n_leaders;
            follower_trigger_value(
                agent.varphi,
                agent.phi,
                agent.coupling,
                &eps,
                &agent.compensation_error().expect("follower"),
                &self.combined_hat[fi],
                &self.theta_hat[fi],
                &self.triggers,
                self.t,
            )
        }
    }

    /// Advance one grid step: integrate the continuous dynamics with held
    /// values frozen, then evaluate every trigger at the new grid point
    /// and refresh the broadcasts of the agents that fired (in index
    /// order, with neighborhood caches rebuilt once afterwards).
    pub fn step(&mut self, dt: f64, integrator: Integrator) -> Result<StepOutcome, SimError> {
        self.integrate(dt, integrator);
        // steps share one dt per run; the grid time is the product, which
        // keeps t_end free of accumulated rounding
        self.steps_taken += 1;
        self.t = self.steps_taken as f64 * dt;

        for (i, agent) in self.agents.iter().enumerate() {
            let mut norm = agent.state.norm();
            if let Some(z) = &agent.observer {
                norm = norm.max(z.norm());
            }
            if let Some(y) = &agent.compensation {
                norm = norm.max(y.norm());
            }
            if !norm.is_finite() || norm > self.divergence_bound {
                return Err(SimError::NumericalDivergence {
                    t: self.t,
                    agent: i,
                    norm,
                });
            }
        }

        let trigger_values: Vec<f64> = (0..self.agents.len()).map(|i| self.trigger_value(i)).collect();
        let fired: Vec<usize> = trigger_values
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f > 0.0).then_some(i))
            .collect();
        for &i in &fired {
            let agent = &mut self.agents[i];
            agent.held_state = agent.broadcast_source().clone();
            if let Some(y) = &agent.compensation {
                agent.held_compensation = Some(y.clone());
            }
            agent.last_event_time = Some(self.t);
            agent.event_count += 1;
        }
        if !fired.is_empty() {
            self.recompute_caches();
        }
        let post_trigger_values = fired.iter().map(|&i| (i, self.trigger_value(i))).collect();
        Ok(StepOutcome {
            trigger_values,
            fired,
            post_trigger_values,
        })
    }

    /// Stacked error vectors at the current time.
    pub fn errors(&self) -> ErrorSnapshot {
        let dim = self.plant_a.nrows();
        let n = self.agents.len();
        let n_f = n - self.n_leaders;
        let mut leader = DVector::zeros(self.n_leaders * dim);
        for i in 0..self.n_leaders {
            let e = self.agents[i].broadcast_source() - &self.targets[i];
            leader.rows_mut(i * dim, dim).copy_from(&e);
        }
        let mut formation = DVector::zeros(n_f * dim);
        for fi in 0..n_f {
            let i = self.n_leaders + fi;
            let mut acc = DVector::zeros(dim);
            for &(j, w) in &self.neighbors[i] {
                acc += w * (self.agents[i].broadcast_source() - self.agents[j].broadcast_source());
            }
            formation.rows_mut(fi * dim, dim).copy_from(&acc);
        }
        let m = self.plant_b.ncols();
        let mut compensation = DVector::zeros(n_f * m);
        for fi in 0..n_f {
            let i = self.n_leaders + fi;
            let own = self.agents[i].compensation.as_ref().expect("follower");
            let mut acc = DVector::zeros(m);
            for &(j, w) in &self.neighbors[i] {
                if j < self.n_leaders {
                    acc += w * (own - &self.leader_compensation[j]);
                } else {
                    acc += w * (own - self.agents[j].compensation.as_ref().expect("follower"));
                }
            }
            compensation.rows_mut(fi * m, m).copy_from(&acc);
        }
        let observer = (self.mode == ProtocolMode::Output).then(|| {
            let mut delta = DVector::zeros(n * dim);
            for (i, agent) in self.agents.iter().enumerate() {
                let z = agent.observer.as_ref().expect("output mode");
                delta.rows_mut(i * dim, dim).copy_from(&(z - &agent.state));
            }
            delta
        });
        ErrorSnapshot {
            leader,
            formation,
            compensation,
            observer,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;
    use crate::stress;
    use nalgebra::DVector;

    #[test]
    fn leader_control_is_affine_in_held_state() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let v = DVector::from_column_slice(&[0.5, -0.5]);
        let u = leader_control(&k, &DVector::from_column_slice(&[1.0, 1.0]), &v);
        assert_eq!(u, DVector::from_column_slice(&[1.5, 1.5]));
        let zero = leader_control(
            &DMatrix::zeros(2, 2),
            &DVector::from_column_slice(&[3.0, 4.0]),
            &DVector::zeros(2),
        );
        assert_eq!(zero, DVector::zeros(2));
    }

    #[test]
    fn leader_trigger_arithmetic() {
        let constants = TriggerConstants {
            mu_leader: 1.0,
            varpi_leader: 1.0,
            mu_follower: 1.0,
            varpi_follower: 1.0,
        };
        let eps = DVector::from_column_slice(&[0.1, 0.0, 0.0]);
        let held = DVector::from_column_slice(&[0.2, 0.0, 0.0]);
        let target = DVector::zeros(3);
        let f0 = leader_trigger_value(6.0, &eps, &held, &target, &constants, 0.0);
        assert!((f0 - (-0.98)).abs() < 1e-12);
        let f10 = leader_trigger_value(6.0, &eps, &held, &target, &constants, 10.0);
        assert!((f10 - (0.02 - (-10.0f64).exp())).abs() < 1e-12);
        assert!(f10 > 0.0);
    }

    #[test]
    fn follower_trigger_arithmetic() {
        let constants = TriggerConstants {
            mu_leader: 1.0,
            varpi_leader: 1.0,
            mu_follower: 1.0,
            varpi_follower: 1.0,
        };
        // scalar chain: varphi = phi = d = 1
        let f = follower_trigger_value(
            1.0,
            1.0,
            1.0,
            &DVector::from_column_slice(&[0.3]),
            &DVector::from_column_slice(&[0.1]),
            &DVector::from_column_slice(&[0.2]),
            &DVector::from_column_slice(&[0.1]),
            &constants,
            1e3,
        );
        assert!((f - 0.05).abs() < 1e-12);
    }

    #[test]
    fn leader_control_matches_hand_multiplication() {
        let config = scenario::fixture("case1-nominal").unwrap();
        let setup = config.build().unwrap();
        let world = EtcWorld::new(&setup, &config).unwrap();
        // leader 1 held at its target position
        let held = DVector::from_column_slice(&[2.0, 4.0, 0.0]);
        let k = &setup.design.k;
        let v1 = &setup.design.compensation.vectors[0];
        let u = leader_control(k, &held, v1);
        for row in 0..3 {
            let hand: f64 =
                (0..3).map(|c| k[(row, c)] * held[c]).sum::<f64>() + v1[row];
            assert!((u[row] - hand).abs() < 1e-14);
        }
        // at the target with exact compensation, the closed-loop field
        // vanishes: (A + BK) p* + B v = 0
        let a = &setup.design.plant.a;
        let b = &setup.design.plant.b;
        let field = a * &held + b * &u;
        assert!(field.norm() < 1e-9, "field at target: {}", field.norm());
        let _ = world;
    }

    #[test]
    fn divergence_guard_reports_agent_and_time() {
        let mut config = scenario::fixture("case1-nominal").unwrap();
        config.diagnostics.divergence_bound = 1e-3;
        let setup = config.build().unwrap();
        let mut world = EtcWorld::new(&setup, &config).unwrap();
        match world.step(0.01, Integrator::Euler) {
            Err(crate::sim::SimError::NumericalDivergence { t, norm, .. }) => {
                assert!(t > 0.0);
                assert!(norm > 1e-3);
            }
            other => panic!("expected divergence error, got {other:?}"),
        }
    }

    #[test]
    fn neighborhood_mismatch_against_direct_sum() {
        // two followers and one leader in a chain with unit weights;
        // follower 1 adjacent to both, all scalar
        let world = scenario::fixture("case1-nominal")
            .unwrap()
            .build()
            .unwrap();
        // direct evaluation on a hand-built neighborhood instead: the
        // fixture world is exercised elsewhere; here the contract is the
        // arithmetic itself.
        let _ = world;
        let own = DVector::from_column_slice(&[1.0]);
        let neighbor = DVector::from_column_slice(&[0.0]);
        let leader_v = DVector::from_column_slice(&[0.0]);
        let theta = 1.0 * (&own - &neighbor) + 1.0 * (&own - &leader_v);
        assert_eq!(theta, DVector::from_column_slice(&[2.0]));
    }

    #[test]
    fn coupling_grows_affinely_between_events() {
        // constant mismatch norm^2 = 4 over one hundredth of a second
        let d0 = 6.0f64;
        let theta = DVector::<f64>::from_column_slice(&[2.0]);
        let d_end = d0 + 0.01 * theta.norm_squared();
        assert!((d_end - 6.04).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_world_is_stationary_and_silent() {
        let mut config = scenario::fixture("case1-nominal").unwrap();
        let setup = config.build().unwrap();
        // pin every agent at its target
        config.initial.states = Some(
            setup
                .targets
                .points()
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect(),
        );
        config.initial.low = None;
        config.initial.high = None;
        let setup = config.build().unwrap();
        let mut world = EtcWorld::new(&setup, &config).unwrap();
        // followers' compensation estimates at their consensus values
        let ystars = stress::follower_targets(&setup.stress, &setup.design.compensation.vectors)
            .unwrap();
        for (fi, y) in ystars.into_iter().enumerate() {
            world.set_follower_compensation(fi, y);
        }
        let before: Vec<DVector<f64>> = world.agents().iter().map(|a| a.state.clone()).collect();
        for _ in 0..50 {
            let outcome = world.step(0.01, Integrator::Rk4).unwrap();
            assert!(outcome.fired.is_empty(), "no events at equilibrium");
        }
        for (agent, b) in world.agents().iter().zip(&before) {
            assert!(
                (&agent.state - b).norm() < 1e-9,
                "state drifted at equilibrium"
            );
        }
    }

    #[test]
    fn control_ignores_neighbor_continuous_states() {
        let config = scenario::fixture("case1-nominal").unwrap();
        let setup = config.build().unwrap();
        let mut world = EtcWorld::new(&setup, &config).unwrap();
        for _ in 0..10 {
            world.step(0.01, Integrator::Euler).unwrap();
        }
        let probe = 5; // a follower
        let u_before = world.control_input(probe);
        let f_before = world.trigger_value(probe);
        let rates_before = EtcWorld::rates(&world.agents, &world);
        // corrupt every OTHER agent's continuous state
        let mut corrupted = world.clone();
        for (i, agent) in corrupted.agents.iter_mut().enumerate() {
            if i != probe {
                agent.state.iter_mut().for_each(|x| *x += 1e6);
                if let Some(y) = &mut agent.compensation {
                    y.iter_mut().for_each(|x| *x += 1e6);
                }
            }
        }
        let u_after = corrupted.control_input(probe);
        let f_after = corrupted.trigger_value(probe);
        let rates_after = EtcWorld::rates(&corrupted.agents, &corrupted);
        assert_eq!(u_before, u_after, "control read a neighbor's continuous state");
        assert_eq!(f_before, f_after, "trigger read a neighbor's continuous state");
        assert_eq!(
            rates_before[probe].state, rates_after[probe].state,
            "dynamics read a neighbor's continuous state"
        );
        assert_eq!(rates_before[probe].coupling, rates_after[probe].coupling);
    }
}
