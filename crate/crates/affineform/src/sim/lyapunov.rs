//! Runtime energy-bound monitor.
//!
//! The convergence argument behind the protocols bounds a composite
//! quadratic functional along every trajectory:
//!
//! ```text
//! V(t) <= V(0) + integral_0^t Pi(s) ds,
//! Pi(t) = (mu_l n_l + mu_f n_f) exp(-min(varpi_l, varpi_f) t)
//! ```
//!
//! with `V` built from the formation error, the compensation mismatch,
//! the leader error, the adaptive parameter offsets, and (in output mode)
//! the observer error. The functional's admissible constants must satisfy
//! a family of inequalities; the monitor refuses to run with constants
//! that violate any of them, naming the first one that fails.
//!
//! The monitor is a diagnostic: it evaluates `V` on a recorded trace and
//! flags grid points where the bound is exceeded beyond a slack
//! proportional to `V(0)`.

use crate::design::{ControllerDesign, ProtocolMode};
use crate::linalg;
use crate::stress::StressMatrix;
use nalgebra::{DMatrix, DVector};

use super::config::{LyapunovConstants, TriggerConstants};
use super::trace::SimulationTrace;
use super::SimError;

/// Monitor output: the functional, the bound, and any violations.
#[derive(Debug, Clone)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub value: Vec<f64>,
    pub bound: Vec<f64>,
    /// Grid indices where `value > bound + tolerance`.
    pub violations: Vec<usize>,
    /// Absolute slack applied to the bound.
    pub tolerance: f64,
}

impl LyapunovSeries {
    pub fn bounded(&self) -> bool {
        self.violations.is_empty()
    }
}

struct MonitorContext {
    alpha: [f64; 4],
    beta: [f64; 4],
    p: DMatrix<f64>,
    q_inv: Option<DMatrix<f64>>,
    omega_ff: DMatrix<f64>,
}

fn require(name: &str, ok: bool, detail: String) -> Result<(), SimError> {
    if ok {
        Ok(())
    } else {
        Err(SimError::InvalidConstants(format!("{name}: {detail}")))
    }
}

fn validate_constants(
    constants: &LyapunovConstants,
    design: &ControllerDesign,
    stress: &StressMatrix,
    mode: ProtocolMode,
) -> Result<MonitorContext, SimError> {
    if constants.alpha.len() < 3 || constants.beta.len() != 4 {
        return Err(SimError::InvalidConstants(
            "need alpha[0..3] (alpha[3] in output mode) and beta[0..4]".into(),
        ));
    }
    let a1 = constants.alpha[0];
    let a2 = constants.alpha[1];
    let a3 = constants.alpha[2];
    let [b1, b2, b3, b4] = [
        constants.beta[0],
        constants.beta[1],
        constants.beta[2],
        constants.beta[3],
    ];
    let lambda_min_r1 = design.lambda_min_r1();
    let lam = linalg::spectral_norm(&design.gain_weight());
    let omega_ff = stress.follower_block();
    let omega_fl = stress.follower_leader_block();
    let off_sq = linalg::spectral_norm(&(&omega_ff * &omega_ff));
    let ofl_sq = linalg::spectral_norm(&(omega_fl.transpose() * &omega_fl));

    require("alpha2", a2 > 0.0, format!("must be positive, got {a2}"))?;
    match mode {
        ProtocolMode::State => {
            require(
                "alpha1",
                a1 > 3.0 * a2 / lambda_min_r1,
                format!("must exceed 3*alpha2/lambda_min(R1) = {}", 3.0 * a2 / lambda_min_r1),
            )?;
            require(
                "alpha3",
                a3 > 2.0 * a2 / lambda_min_r1,
                format!("must exceed 2*alpha2/lambda_min(R1) = {}", 2.0 * a2 / lambda_min_r1),
            )?;
            require(
                "beta1",
                b1 > (8.0 * a1 / a2 - 1.0).max(1.0),
                format!(
                    "must exceed max(1, 8*alpha1/alpha2 - 1) = {}",
                    (8.0 * a1 / a2 - 1.0).max(1.0)
                ),
            )?;
        }
        ProtocolMode::Output => {
            let margin = 2.0 * lambda_min_r1 - 1.0;
            require(
                "lambda_min(R1)",
                margin > 0.0,
                format!("output-mode monitor needs lambda_min(R1) > 1/2, got {lambda_min_r1}"),
            )?;
            require(
                "alpha1",
                a1 > 6.0 * a2 / margin,
                format!("must exceed 6*alpha2/(2*lambda_min(R1)-1) = {}", 6.0 * a2 / margin),
            )?;
            require(
                "alpha3",
                a3 > 4.0 * a2 / margin,
                format!("must exceed 4*alpha2/(2*lambda_min(R1)-1) = {}", 4.0 * a2 / margin),
            )?;
            require(
                "beta1",
                b1 > 8.0 * a1 / a2 - 1.0,
                format!("must exceed 8*alpha1/alpha2 - 1 = {}", 8.0 * a1 / a2 - 1.0),
            )?;
        }
    }
    require(
        "beta2",
        b2 > (4.0 * a1 / a2 + b1) * off_sq,
        format!(
            "must exceed (4*alpha1/alpha2 + beta1)*|O_ff^2| = {}",
            (4.0 * a1 / a2 + b1) * off_sq
        ),
    )?;
    require(
        "beta3",
        b3 > 3.0 * off_sq + 4.0 * a1 / a2 * off_sq * lam,
        format!(
            "must exceed 3*|O_ff^2| + (4*alpha1/alpha2)*|O_ff^2|*|L| = {}",
            3.0 * off_sq + 4.0 * a1 / a2 * off_sq * lam
        ),
    )?;
    require(
        "beta4",
        b4 > 2.0 + a3 / a2 * lam + 3.0 * ofl_sq + 4.0 * a1 / a2 * ofl_sq * lam,
        format!(
            "must exceed 2 + (alpha3/alpha2)*|L| + 3*|O_fl'O_fl| + (4*alpha1/alpha2)*|O_fl'O_fl|*|L| = {}",
            2.0 + a3 / a2 * lam + 3.0 * ofl_sq + 4.0 * a1 / a2 * ofl_sq * lam
        ),
    )?;

    let (a4, q_inv) = match mode {
        ProtocolMode::State => (0.0, None),
        ProtocolMode::Output => {
            if constants.alpha.len() != 4 {
                return Err(SimError::InvalidConstants(
                    "output mode needs alpha[3] for the observer term".into(),
                ));
            }
            let a4 = constants.alpha[3];
            let q = design
                .q
                .as_ref()
                .ok_or_else(|| SimError::InvalidConstants("design lacks Q".into()))?;
            let c = design
                .plant
                .c
                .as_ref()
                .ok_or_else(|| SimError::InvalidConstants("plant lacks C".into()))?;
            let f = design
                .f
                .as_ref()
                .ok_or_else(|| SimError::InvalidConstants("design lacks F".into()))?;
            let q_inv = q
                .clone()
                .try_inverse()
                .ok_or_else(|| SimError::InvalidConstants("Q is singular".into()))?;
            let s = c.transpose() * c + &q_inv * &q_inv;
            let lambda_min_s = linalg::symmetric_eigenvalues(&s)[0];
            let pfc = linalg::spectral_norm(&(&design.p * f * c)).powi(2);
            let floor = (4.0 * a1 * off_sq * pfc / lambda_min_s)
                .max((2.0 * a3 * pfc + 4.0 * a1 * ofl_sq * pfc) / lambda_min_s);
            require(
                "alpha4",
                a4 > floor,
                format!("must exceed the observer-error floor = {floor}"),
            )?;
            (a4, Some(q_inv))
        }
    };

    Ok(MonitorContext {
        alpha: [a1, a2, a3, a4],
        beta: [b1, b2, b3, b4],
        p: design.p.clone(),
        q_inv,
        omega_ff,
    })
}

fn quadratic_blocks(v: &DVector<f64>, w: &DMatrix<f64>) -> f64 {
    // sum_i v_i' W v_i over consecutive blocks of size W.nrows()
    let d = w.nrows();
    let mut acc = 0.0;
    let mut k = 0;
    while k + d <= v.len() {
        let block = v.rows(k, d);
        acc += (block.transpose() * w * block)[(0, 0)];
        k += d;
    }
    acc
}

fn kron_inverse_quadratic(theta: &DVector<f64>, omega_ff: &DMatrix<f64>) -> f64 {
    // theta' (O_ff^{-1} (x) I_m) theta via a solve on the follower block
    let n_f = omega_ff.nrows();
    let m = theta.len() / n_f;
    let theta_mat = DMatrix::from_fn(n_f, m, |i, j| theta[i * m + j]);
    let solved = omega_ff
        .clone()
        .lu()
        .solve(&theta_mat)
        .expect("follower block invertible");
    (theta_mat.component_mul(&solved)).sum()
}

/// Evaluate the bound functional over a recorded trace.
pub fn lyapunov_monitor(
    trace: &SimulationTrace,
    constants: &LyapunovConstants,
    design: &ControllerDesign,
    stress: &StressMatrix,
    triggers: &TriggerConstants,
    relative_tolerance: f64,
) -> Result<LyapunovSeries, SimError> {
    let ctx = validate_constants(constants, design, stress, trace.mode)?;
    let [a1, a2, a3, a4] = ctx.alpha;
    let [b1, b2, b3, b4] = ctx.beta;
    let n_l = trace.leader_count() as f64;
    let n_f = trace.follower_count() as f64;
    let pi_scale = triggers.mu_leader * n_l + triggers.mu_follower * n_f;
    let pi_rate = triggers.varpi_leader.min(triggers.varpi_follower);

    let mut value = Vec::with_capacity(trace.times.len());
    for (idx, _t) in trace.times.iter().enumerate() {
        let xi = &trace.errors.formation[idx];
        let theta = &trace.errors.compensation[idx];
        let e_l = &trace.errors.leader[idx];
        let mut v = a1 * quadratic_blocks(xi, &ctx.p)
            + a2 * kron_inverse_quadratic(theta, &ctx.omega_ff)
            + a3 * quadratic_blocks(e_l, &ctx.p);
        for series in trace.agents.iter() {
            if series.gamma.is_empty() {
                v += a2 * 0.5
                    * ((series.coupling[idx] - b1).powi(2)
                        + (series.phi[idx] - b2).powi(2)
                        + (series.varphi[idx] - b3).powi(2));
            } else {
                v += a2 * 0.5 * (series.gamma[idx] - b4).powi(2);
            }
        }
        if let Some(q_inv) = &ctx.q_inv {
            let delta = &trace.errors.observer[idx];
            v += a4 * quadratic_blocks(delta, q_inv);
        }
        value.push(v);
    }

    // trapezoidal integral of Pi on the grid
    let mut bound = Vec::with_capacity(trace.times.len());
    let mut integral = 0.0;
    let v0 = value.first().copied().unwrap_or(0.0);
    for (idx, &t) in trace.times.iter().enumerate() {
        if idx > 0 {
            let t_prev = trace.times[idx - 1];
            let pi_prev = pi_scale * (-pi_rate * t_prev).exp();
            let pi_now = pi_scale * (-pi_rate * t).exp();
            integral += 0.5 * (pi_prev + pi_now) * (t - t_prev);
        }
        bound.push(v0 + integral);
    }

    let tolerance = relative_tolerance * v0.abs();
    let violations = value
        .iter()
        .zip(&bound)
        .enumerate()
        .filter_map(|(i, (v, b))| (*v > b + tolerance).then_some(i))
        .collect();
    Ok(LyapunovSeries {
        times: trace.times.clone(),
        value,
        bound,
        violations,
        tolerance,
    })
}
