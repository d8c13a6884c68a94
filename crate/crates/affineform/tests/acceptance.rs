//! Acceptance suite: one test per shipping criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see them on success).
//!
//! Thresholds are pinned here, in code. Event-count bands are used where
//! exact counts are not reproducible (random initial states); error
//! tolerances come from the benchmark definitions.

use affineform::fixtures;
use affineform::scenario::{self};
use affineform::sim::{
    lyapunov_monitor, run_with_setup, zeno_audit, Integrator, LyapunovConstants, ScenarioConfig,
    ScenarioSetup, SimulationTrace, SplitMix64,
};
use affineform::stress::{validate_stress, StressSolverOptions, StressTolerances};
use affineform::{
    compute_stress, design_observer, design_state_feedback, follower_targets, solve_care,
    PlantModel, ProtocolMode,
};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn fixture(id: &str) -> ScenarioConfig {
    scenario::fixture(id).unwrap_or_else(|| panic!("missing fixture {id}"))
}

fn run_seeded(config: &ScenarioConfig, setup: &ScenarioSetup, seed: u64) -> SimulationTrace {
    let mut c = config.clone();
    c.seed = seed;
    run_with_setup(&c, setup).expect("simulation run")
}

#[test]
fn criterion_01_gain_reproduction() {
    let start = Instant::now();
    let a = fixtures::case1_plant_a();
    let b = fixtures::case1_plant_b();
    let plant = PlantModel::new(a, b, None).unwrap();
    let feedback = design_state_feedback(&plant, &DMatrix::identity(3, 3)).unwrap();
    let elapsed = start.elapsed();

    let p_ref = fixtures::case1_reference_p();
    let k_ref = fixtures::case1_reference_k();
    let mut max_dev = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            max_dev = max_dev.max((feedback.p[(i, j)] - p_ref[(i, j)]).abs());
            max_dev = max_dev.max((feedback.k[(i, j)] - k_ref[(i, j)]).abs());
        }
    }
    let pass = max_dev <= 0.02 && elapsed.as_secs_f64() < 1.0;
    verdict(
        "01 gain reproduction",
        pass,
        &format!("max |entry - reference| = {max_dev:.4} (tol 0.02), {elapsed:.2?} (< 1 s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_stress_validation() {
    let start = Instant::now();
    let formation = fixtures::case1_formation();

    let mut printed_tol = StressTolerances::printed_grade();
    printed_tol.equilibrium = 0.15;
    let printed_report = validate_stress(&fixtures::case1_printed_stress(), &formation, &printed_tol);

    let solved = compute_stress(&formation, &StressSolverOptions::default()).unwrap();
    let solver_report = validate_stress(solved.matrix(), &formation, &StressTolerances::solver_grade());
    let elapsed = start.elapsed();

    let pass = printed_report.passed()
        && printed_report.rank == 6
        && solver_report.passed()
        && solver_report.rank == 6
        && elapsed.as_secs_f64() < 5.0;
    verdict(
        "02 stress validation",
        pass,
        &format!(
            "printed: {} (rank {}), solver: {} (rank {}), {elapsed:.2?} (< 5 s)",
            if printed_report.passed() { "ok" } else { "failed" },
            printed_report.rank,
            if solver_report.passed() { "ok" } else { "failed" },
            solver_report.rank
        ),
    );
    if !pass {
        println!("printed report:\n{printed_report}\nsolver report:\n{solver_report}");
    }
    assert!(pass);
}

#[test]
fn criterion_03_planar_spectrum() {
    let start = Instant::now();
    let formation = fixtures::case2_formation();
    let stress = compute_stress(&formation, &StressSolverOptions::default()).unwrap();
    let scaled = stress.scaled_to_trace(fixtures::CASE2_SPECTRUM_TRACE);
    let spectrum = scaled.positive_eigenvalues(1e-7);
    let elapsed = start.elapsed();

    let expected = fixtures::CASE2_POSITIVE_SPECTRUM;
    let mut max_dev = f64::INFINITY;
    let count_ok = spectrum.len() == expected.len();
    if count_ok {
        max_dev = spectrum
            .iter()
            .zip(expected.iter())
            .map(|(got, want)| (got - want).abs())
            .fold(0.0, f64::max);
    }
    let pass = count_ok && max_dev <= 0.05 && elapsed.as_secs_f64() < 5.0;
    verdict(
        "03 planar positive spectrum",
        pass,
        &format!(
            "eigenvalues {:?} vs {:?}, max deviation {max_dev:.4} (tol 0.05), {elapsed:.2?} (< 5 s)",
            spectrum.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            expected
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_state_mode_convergence() {
    let config = fixture("case1-nominal");
    let setup = config.build().unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for seed in 1..=5u64 {
        let start = Instant::now();
        let trace = run_seeded(&config, &setup, seed);
        let elapsed = start.elapsed();
        let xi = trace.summary.final_formation_error;
        let e_l = trace.summary.final_leader_error;
        let ok = xi < 1e-2 && e_l < 1e-2 && elapsed.as_secs_f64() < 10.0;
        pass &= ok;
        detail.push_str(&format!("seed {seed}: xi {xi:.1e} e_l {e_l:.1e} ({elapsed:.2?}); "));
    }
    verdict(
        "04 state-mode convergence",
        pass,
        &format!("thresholds 1e-2 at t = 10, < 10 s per seed — {detail}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_output_mode_convergence() {
    let config = fixture("case2-nominal");
    let setup = config.build().unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for seed in 1..=5u64 {
        let start = Instant::now();
        let trace = run_seeded(&config, &setup, seed);
        let elapsed = start.elapsed();
        let eta = trace.summary.final_formation_error;
        let e_zl = trace.summary.final_leader_error;
        let delta = trace.summary.final_observer_error.unwrap();
        let ok = eta < 1e-2 && e_zl < 1e-2 && delta < 1e-2 && elapsed.as_secs_f64() < 20.0;
        pass &= ok;
        detail.push_str(&format!(
            "seed {seed}: eta {eta:.1e} e_zl {e_zl:.1e} delta {delta:.1e} ({elapsed:.2?}); "
        ));
    }
    verdict(
        "05 output-mode convergence",
        pass,
        &format!("thresholds 1e-2 at t = 25, < 20 s per seed — {detail}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_trigger_economy() {
    let config1 = fixture("case1-nominal");
    let setup1 = config1.build().unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for seed in 1..=5u64 {
        let trace = run_seeded(&config1, &setup1, seed);
        let freqs = &trace.summary.event_frequencies;
        let max = freqs.iter().cloned().fold(0.0, f64::max);
        let mean = trace.summary.mean_event_frequency();
        let ok = max < 0.12 && mean < 0.06;
        pass &= ok;
        detail.push_str(&format!("c1 seed {seed}: max {:.1}% mean {:.1}%; ", max * 100.0, mean * 100.0));
    }
    let config2 = fixture("case2-nominal");
    let setup2 = config2.build().unwrap();
    for seed in 1..=5u64 {
        let trace = run_seeded(&config2, &setup2, seed);
        let freqs = &trace.summary.event_frequencies;
        let leader_max = freqs[..3].iter().cloned().fold(0.0, f64::max);
        let follower_max = freqs[3..].iter().cloned().fold(0.0, f64::max);
        let ok = leader_max < 0.03 && follower_max < 0.10;
        pass &= ok;
        detail.push_str(&format!(
            "c2 seed {seed}: leaders {:.1}% followers {:.1}%; ",
            leader_max * 100.0,
            follower_max * 100.0
        ));
    }
    verdict(
        "06 trigger economy",
        pass,
        &format!("bands: c1 agents < 12% mean < 6%; c2 leaders < 3% followers < 10% — {detail}"),
    );
    assert!(pass);
}

/// Per-fixture thresholds: convergence errors, event bands of the owning
/// benchmark, and final follower positions against the transformed
/// targets.
#[test]
fn criterion_07_affine_transform_suite() {
    let ids = [
        "case1-rotation",
        "case1-scale",
        "case1-shear",
        "case1-coplanar",
        "case1-combination",
        "case2-rotation",
        "case2-scale",
        "case2-shear",
        "case2-colinear",
        "case2-combination",
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for id in ids {
        let config = fixture(id);
        let setup = config.build().unwrap();
        let trace = run_seeded(&config, &setup, config.seed);
        let freqs = &trace.summary.event_frequencies;
        let case1 = id.starts_with("case1");
        let errors_ok = if case1 {
            trace.summary.final_formation_error < 1e-2 && trace.summary.final_leader_error < 1e-2
        } else {
            trace.summary.final_formation_error < 1e-2
                && trace.summary.final_leader_error < 1e-2
                && trace.summary.final_observer_error.unwrap() < 1e-2
        };
        let bands_ok = if case1 {
            let max = freqs.iter().cloned().fold(0.0, f64::max);
            let mean = trace.summary.mean_event_frequency();
            max < 0.12 && mean < 0.06
        } else {
            let leader_max = freqs[..3].iter().cloned().fold(0.0, f64::max);
            let follower_max = freqs[3..].iter().cloned().fold(0.0, f64::max);
            leader_max < 0.03 && follower_max < 0.10
        };
        let n_l = trace.leader_count();
        let mut position_dev = 0.0f64;
        for (fi, series) in trace.agents.iter().enumerate().skip(n_l) {
            let final_state = series.state.last().unwrap();
            position_dev = position_dev.max((final_state - setup.targets.point(fi)).norm());
        }
        let positions_ok = position_dev < 1e-2;
        let ok = errors_ok && bands_ok && positions_ok;
        pass &= ok;
        lines.push(format!(
            "  {id}: {} (errors {}, bands {}, follower targets dev {:.1e})",
            if ok { "pass" } else { "FAIL" },
            if errors_ok { "ok" } else { "exceeded" },
            if bands_ok { "ok" } else { "exceeded" },
            position_dev
        ));
    }
    verdict(
        "07 affine-transform suite",
        pass,
        "per-fixture convergence, event bands, and follower target match (1e-2)",
    );
    for line in &lines {
        println!("{line}");
    }
    // Known red: case1-scale converges and matches its targets but runs
    // hotter than the event bands calibrated on the nominal run (fleet
    // mean 6.3-7.1% vs < 6%, max 11-14% vs < 12%, across 25 seeds, both
    // stress choices, both integrators, and every initial-state range
    // tried). The bands are kept as stated rather than widened to fit.
    assert!(pass, "transform suite failures:\n{}", lines.join("\n"));
}

#[test]
fn criterion_08_energy_bound() {
    let config = fixture("case1-nominal");
    let setup = config.build().unwrap();
    let trace = run_seeded(&config, &setup, 1);
    let constants = LyapunovConstants {
        alpha: vec![3.5, 1.0, 2.5],
        beta: vec![28.0, 330.0, 800.0, 220.0],
    };
    let series = lyapunov_monitor(
        &trace,
        &constants,
        &setup.design,
        &setup.stress,
        &config.triggers,
        1e-3,
    )
    .unwrap();
    let pass = series.bounded();
    verdict(
        "08 energy bound",
        pass,
        &format!(
            "V(t) <= V(0) + integral Pi within 1e-3 V(0) at all {} grid points ({} violations)",
            series.times.len(),
            series.violations.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_property_suites() {
    let start = Instant::now();

    // Riccati residual, symmetry, stabilization, and duality over 100
    // randomized instances.
    let mut rng = SplitMix64::new(0x5eed);
    let mut care_checked = 0;
    while care_checked < 100 {
        let d = 2 + (rng.next_u64() % 3) as usize;
        let m = 1 + (rng.next_u64() % d as u64) as usize;
        let a = DMatrix::from_fn(d, d, |_, _| rng.uniform(-1.5, 1.5));
        let b = DMatrix::from_fn(d, m, |_, _| rng.uniform(-1.0, 1.0));
        let r = DMatrix::identity(d, d);
        let p = match solve_care(&a, &b, &r) {
            Ok(p) => p,
            Err(_) => continue, // resample unstabilizable or degenerate draws
        };
        let residual = (&p * &a + a.transpose() * &p - &p * &b * b.transpose() * &p + &r).norm();
        assert!(residual <= 1e-8, "CARE residual {residual}");
        assert!((&p - p.transpose()).norm() <= 1e-10, "CARE symmetry");
        let k = -b.transpose() * &p;
        assert!(
            affineform::linalg::spectral_abscissa(&(&a + &b * &k)) < 0.0,
            "closed loop not Hurwitz"
        );
        // duality: observer on (A, C) equals state feedback on (A', C')
        let r_out = 1 + (rng.next_u64() % d as u64) as usize;
        let c = DMatrix::from_fn(r_out, d, |_, _| rng.uniform(-1.0, 1.0));
        let plant = match PlantModel::new(a.clone(), b.clone(), Some(c.clone())) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if let Ok(obs) = design_observer(&plant, &r) {
            let dual_plant = PlantModel::new(a.transpose(), c.transpose(), None).unwrap();
            let dual = design_state_feedback(&dual_plant, &r).unwrap();
            assert!((&obs.q - &dual.p).norm() <= 1e-7, "observer duality");
        }
        care_checked += 1;
    }

    // Follower localization: linearity and affine invariance over 100
    // randomized instances on the ten-agent solver stress.
    let formation = fixtures::case1_formation();
    let stress = compute_stress(&formation, &StressSolverOptions::default()).unwrap();
    let nominal_followers = formation.follower_positions();
    let mut rng = SplitMix64::new(0xaff1);
    for _ in 0..100 {
        let x: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(3, |_, _| rng.uniform(-5.0, 5.0)))
            .collect();
        let y: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(3, |_, _| rng.uniform(-5.0, 5.0)))
            .collect();
        let (alpha, beta) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        let combo: Vec<DVector<f64>> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let fx = follower_targets(&stress, &x).unwrap();
        let fy = follower_targets(&stress, &y).unwrap();
        let fc = follower_targets(&stress, &combo).unwrap();
        for ((fa, fb), fcv) in fx.iter().zip(&fy).zip(&fc) {
            assert!(
                (alpha * fa + beta * fb - fcv).norm() <= 1e-10,
                "follower localization is not linear"
            );
        }
        // affine invariance with a well-conditioned random map
        let gamma = loop {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.uniform(-1.5, 1.5));
            if g.determinant().abs() > 0.1 {
                break g;
            }
        };
        let offset = DVector::from_fn(3, |_, _| rng.uniform(-3.0, 3.0));
        let leaders: Vec<DVector<f64>> = formation
            .leader_positions()
            .iter()
            .map(|a| &gamma * a + &offset)
            .collect();
        let followers = follower_targets(&stress, &leaders).unwrap();
        for (got, nominal) in followers.iter().zip(nominal_followers) {
            let expect = &gamma * nominal + &offset;
            let dev = (got - expect).norm();
            assert!(dev <= 1e-6, "affine invariance violated: |dev| = {dev}");
        }
    }

    // Trace properties over 100 seeded short runs (60 state-mode, 40
    // output-mode): trigger soundness, post-event negativity, adaptive
    // monotonicity, held-value constancy, and bit-identical determinism.
    let mut short1 = fixture("case1-nominal");
    short1.t_end = 0.4;
    let setup1 = short1.build().unwrap();
    let mut short2 = fixture("case2-nominal");
    short2.t_end = 0.4;
    let setup2 = short2.build().unwrap();
    for instance in 0..100u64 {
        let (config, setup) = if instance < 60 {
            (&short1, &setup1)
        } else {
            (&short2, &setup2)
        };
        let seed = 1000 + instance;
        let trace = run_seeded(config, setup, seed);
        let repeat = run_seeded(config, setup, seed);
        assert_trace_properties(&trace);
        assert_traces_identical(&trace, &repeat);
    }

    let elapsed = start.elapsed();
    let pass = elapsed.as_secs_f64() < 60.0;
    verdict(
        "09 property suites",
        pass,
        &format!(
            "CARE x100, localization x100, trace properties x100 in {elapsed:.2?} (< 60 s)"
        ),
    );
    assert!(pass);
}

fn event_steps(trace: &SimulationTrace, agent: usize) -> Vec<usize> {
    trace
        .agent_events(agent)
        .iter()
        .map(|&t| (t / trace.dt).round() as usize)
        .collect()
}

fn assert_trace_properties(trace: &SimulationTrace) {
    for (i, series) in trace.agents.iter().enumerate() {
        let events = event_steps(trace, i);
        // trigger soundness: nonpositive off events, positive at events
        for (step, &f) in series.trigger.iter().enumerate() {
            if events.contains(&step) {
                assert!(f > 0.0, "agent {i} fired at step {step} with f = {f}");
            } else {
                assert!(f <= 0.0, "agent {i} idle at step {step} with f = {f}");
            }
        }
        // adaptive monotonicity
        for w in series.gamma.windows(2) {
            assert!(w[1] >= w[0], "gamma decreased");
        }
        for w in series.coupling.windows(2) {
            assert!(w[1] >= w[0], "coupling decreased");
        }
        for w in series.varphi.windows(2) {
            assert!(w[1] >= w[0], "varphi decreased");
        }
        for w in series.phi.windows(2) {
            assert!(w[1] >= w[0], "phi decreased");
        }
        // held-value constancy between events (bit-identical)
        for step in 1..series.held_state.len() {
            if !events.contains(&step) {
                assert_eq!(
                    series.held_state[step], series.held_state[step - 1],
                    "agent {i} held value changed without an event at step {step}"
                );
                if !series.held_compensation.is_empty() {
                    assert_eq!(
                        series.held_compensation[step],
                        series.held_compensation[step - 1],
                        "agent {i} held compensation changed without an event at step {step}"
                    );
                }
            }
        }
    }
    // post-event trigger values are strictly negative
    for &(step, agent, f) in &trace.post_event_triggers {
        assert!(
            f < 0.0,
            "agent {agent} post-event trigger at step {step} is {f}"
        );
    }
}

fn assert_traces_identical(a: &SimulationTrace, b: &SimulationTrace) {
    assert_eq!(a.times, b.times);
    assert_eq!(a.events.len(), b.events.len());
    for (ea, eb) in a.events.iter().zip(&b.events) {
        assert_eq!(ea.agent, eb.agent);
        assert_eq!(ea.time, eb.time);
    }
    for (sa, sb) in a.agents.iter().zip(&b.agents) {
        assert_eq!(sa.state, sb.state, "state series differ between replays");
        assert_eq!(sa.trigger, sb.trigger);
        assert_eq!(sa.gamma, sb.gamma);
        assert_eq!(sa.coupling, sb.coupling);
    }
}

#[test]
fn criterion_10_zeno_audit() {
    let mut pass = true;
    let mut detail = String::new();
    for id in scenario::fixture_ids() {
        let config = fixture(id);
        let setup = config.build().unwrap();
        let trace = run_seeded(&config, &setup, config.seed);
        let audit = zeno_audit(&trace);
        if audit.any_suspect() {
            pass = false;
            detail.push_str(&format!("{id}: density suspects; "));
        }
    }
    // density non-increasing from first to last full window per agent
    let config = fixture("case1-nominal");
    let setup = config.build().unwrap();
    let trace = run_seeded(&config, &setup, 1);
    let audit = zeno_audit(&trace);
    for agent in 0..trace.agent_count() {
        if !audit.density_non_increasing(agent) {
            pass = false;
            detail.push_str(&format!(
                "agent {} density grew ({:?}); ",
                agent + 1,
                audit.per_agent[agent].window_counts
            ));
        }
    }
    if detail.is_empty() {
        detail = "no suspects on 12 fixtures; per-agent density non-increasing on case1-nominal".into();
    }
    verdict("10 zeno audit", pass, &detail);
    assert!(pass);
}

/// Cross-integrator oracle: a fourth-order run lands on the same answer.
#[test]
fn integrator_cross_check() {
    let config = fixture("case1-nominal");
    let setup = config.build().unwrap();
    let euler = run_seeded(&config, &setup, 1);
    let mut rk4_config = config.clone();
    rk4_config.integrator = Integrator::Rk4;
    rk4_config.seed = 1;
    let rk4 = run_with_setup(&rk4_config, &setup).unwrap();
    let diff = (euler.summary.final_formation_error - rk4.summary.final_formation_error).abs();
    assert!(diff < 1e-3, "integrator disagreement {diff}");
}

/// Scalar closed-form oracle for the leader loop: with A = 0, B = 1,
/// K = -1, target 0, and a trigger weight so large that the leader
/// re-broadcasts at every grid point, the sampled closed loop is
/// p_{k+1} = (1 - dt) p_k, the forward-Euler discretization of
/// p' = -p. At t = 1 that sits within O(dt) of exp(-1).
#[test]
fn scalar_closed_form_cross_check() {
    use affineform::formation::FormationFile;
    use affineform::sim::{
        DiagnosticsConfig, InitialConditions, PlantConfig, StressSpec, TransformSpec,
        TriggerConstants, WeightsConfig,
    };

    let config = ScenarioConfig {
        name: "scalar-leader".into(),
        mode: ProtocolMode::State,
        dt: 0.01,
        t_end: 1.0,
        integrator: Integrator::Euler,
        seed: 0,
        plant: PlantConfig {
            a: vec![vec![0.0]],
            b: vec![vec![1.0]],
            c: None,
        },
        formation: FormationFile {
            n: 2,
            n_leaders: 1,
            d: 1,
            positions: vec![vec![1.0], vec![0.0]],
            edges: vec![(1, 2)],
        },
        // the two-point line admits only the zero stress (rank n-d-1 = 0)
        stress: StressSpec::Inline {
            matrix: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        },
        reference_stress: None,
        transform: TransformSpec::Inline {
            gamma: vec![vec![0.0]],
            upsilon: vec![0.0],
            label: Some("origin".into()),
        },
        weights: WeightsConfig::identity(1, false),
        triggers: TriggerConstants {
            mu_leader: 1.0,
            varpi_leader: 1.0,
            mu_follower: 1.0,
            varpi_follower: 1.0,
        },
        initial: InitialConditions {
            low: None,
            high: None,
            states: Some(vec![vec![1.0], vec![0.0]]),
            coupling0: 6.0,
            // any nonzero measurement error trips the trigger: the leader
            // broadcasts at every grid point
            gamma0: 1e12,
            varphi0: 6.0,
            phi0: 6.0,
        },
        diagnostics: DiagnosticsConfig::default(),
    };
    let trace = affineform::sim::run_scenario(&config).unwrap();
    let p_final = trace.agents[0].state.last().unwrap()[0];
    let sampled: f64 = (1.0 - 0.01f64).powi(100);
    assert!(
        (p_final - sampled).abs() < 1e-12,
        "per-step broadcast loop should match the sampled closed form: {p_final} vs {sampled}"
    );
    assert!(
        (p_final - (-1.0f64).exp()).abs() < 5e-3,
        "Euler at dt = 0.01 should sit within O(dt) of exp(-1): {p_final}"
    );
    // the leader fired at (almost) every grid point
    assert!(trace.agent_events(0).len() >= 99);
}

#[test]
fn output_mode_stays_certified_only_above_half() {
    let config = fixture("case2-nominal");
    let setup = config.build().unwrap();
    assert!(setup.design.output_certified());
    assert!(setup.design.lambda_min_r1() > 0.5);
}
