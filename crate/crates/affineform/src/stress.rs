//! Equilibrium stress matrices: computation, validation, and affine
//! localization.
//!
//! A stress assigns a scalar weight to every edge of a formation so that
//! the weighted position differences balance at each agent:
//!
//! ```text
//! sum_{j ~ i} w_ij (a_i - a_j) = 0          for every agent i
//! ```
//!
//! Collected into the matrix form `Omega a = 0` with
//! `[Omega]_ij = -w_ij` on edges and row sums zero, the stress encodes the
//! formation's shape in a way that is invariant under every affine map of
//! the nominal configuration. The solver below looks for a stress that is
//! additionally positive semidefinite with rank `n - d - 1` (with `d` the
//! affine dimension of the configuration), which is what makes follower
//! positions recoverable from leader positions alone.

use crate::formation::NominalFormation;
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StressError {
    #[error("leaders do not affinely span the configuration hull: {0}")]
    AssumptionViolated(String),
    #[error(
        "no positive semidefinite stress of rank {expected_rank} found \
         (best minimum reduced eigenvalue {best_margin:.3e} after {iterations} iterations)"
    )]
    NoValidStress {
        expected_rank: usize,
        best_margin: f64,
        iterations: usize,
    },
    #[error("follower block is singular to working precision (min |eig| = {min_abs_eig:.3e})")]
    NotLocalizable { min_abs_eig: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("stress file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("stress CSV parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// An equilibrium stress with its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct StressMatrix {
    omega: DMatrix<f64>,
    weights: BTreeMap<(usize, usize), f64>,
    n_leaders: usize,
}

impl StressMatrix {
    /// Wrap an existing matrix, reading edge weights off the off-diagonal
    /// pattern. No validation happens here; see [`validate_stress`].
    pub fn from_matrix(omega: DMatrix<f64>, n_leaders: usize) -> Self {
        let n = omega.nrows();
        let mut weights = BTreeMap::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = -0.5 * (omega[(i, j)] + omega[(j, i)]);
                if w != 0.0 {
                    weights.insert((i, j), w);
                }
            }
        }
        Self {
            omega,
            weights,
            n_leaders,
        }
    }

    fn from_weights(
        n: usize,
        n_leaders: usize,
        weights: BTreeMap<(usize, usize), f64>,
    ) -> Self {
        let omega = omega_from_weights(n, &weights);
        Self {
            omega,
            weights,
            n_leaders,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn agent_count(&self) -> usize {
        self.omega.nrows()
    }

    pub fn leader_count(&self) -> usize {
        self.n_leaders
    }

    pub fn follower_count(&self) -> usize {
        self.agent_count() - self.n_leaders
    }

    /// Weight of edge `(i, j)`, zero when the pair is not an edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.weights.get(&key).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.weights
    }

    pub fn leader_block(&self) -> DMatrix<f64> {
        self.omega.view((0, 0), (self.n_leaders, self.n_leaders)).into_owned()
    }

    pub fn leader_follower_block(&self) -> DMatrix<f64> {
        let nf = self.follower_count();
        self.omega.view((0, self.n_leaders), (self.n_leaders, nf)).into_owned()
    }

    pub fn follower_leader_block(&self) -> DMatrix<f64> {
        let nf = self.follower_count();
        self.omega.view((self.n_leaders, 0), (nf, self.n_leaders)).into_owned()
    }

    pub fn follower_block(&self) -> DMatrix<f64> {
        let nf = self.follower_count();
        self.omega
            .view((self.n_leaders, self.n_leaders), (nf, nf))
            .into_owned()
    }

    /// Eigenvalues of the whole stress, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(&self.omega)
    }

    /// Strictly positive eigenvalues (above a relative zero band),
    /// ascending. For a valid stress these are the `n - d - 1` nonzero
    /// eigenvalues.
    pub fn positive_eigenvalues(&self, rank_rel_tol: f64) -> Vec<f64> {
        let ev = self.eigenvalues();
        let max = ev.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let band = rank_rel_tol * max.max(1.0);
        ev.into_iter().filter(|&l| l > band).collect()
    }

    /// Rescale so that the positive spectrum sums to `target` (for a PSD
    /// stress this equals rescaling the trace).
    pub fn scaled_to_trace(&self, target: f64) -> StressMatrix {
        let tr = self.omega.trace();
        assert!(tr.abs() > 1e-300, "cannot rescale a zero-trace stress");
        let factor = target / tr;
        let weights = self
            .weights
            .iter()
            .map(|(&k, &w)| (k, w * factor))
            .collect();
        StressMatrix {
            omega: &self.omega * factor,
            weights,
            n_leaders: self.n_leaders,
        }
    }

    /// Dense CSV export, row-major, full precision.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), StressError> {
        write_matrix_csv(&self.omega, path)
    }
}

pub fn write_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<(), StressError> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>, StressError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| StressError::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(StressError::Parse {
            line: 0,
            message: "empty matrix file".into(),
        });
    }
    let ncols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(StressError::Parse {
                line: i + 1,
                message: format!("expected {} columns, found {}", ncols, r.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn omega_from_weights(n: usize, weights: &BTreeMap<(usize, usize), f64>) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(n, n);
    for (&(i, j), &w) in weights {
        omega[(i, j)] -= w;
        omega[(j, i)] -= w;
        omega[(i, i)] += w;
        omega[(j, j)] += w;
    }
    omega
}

/// Options for the stress solver. All defaults are deterministic; two
/// calls with equal inputs return bit-identical results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct StressSolverOptions {
    /// Supergradient ascent iteration cap.
    pub max_iterations: usize,
    /// Base step length; step at iteration k is `step_scale / sqrt(k + 1)`.
    pub step_scale: f64,
    /// Success margin: the smallest reduced eigenvalue must exceed this.
    pub min_margin: f64,
    /// Rescale the result so `trace(Omega) = n`.
    pub normalize_trace: bool,
}

impl Default for StressSolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 800,
            step_scale: 0.5,
            min_margin: 1e-9,
            normalize_trace: true,
        }
    }
}

/// Compute a positive semidefinite equilibrium stress of rank
/// `n - d - 1` for the formation, or report that none exists for this
/// edge set within the iteration budget.
///
/// The equilibrium and sparsity constraints are linear in the edge
/// weights, so the candidate stresses form a subspace; a basis of that
/// subspace is extracted by SVD. Within the subspace the smallest
/// eigenvalue on the complement of the affine kernel is maximized by
/// projected supergradient ascent from the deterministic start `c = e1`.
pub fn compute_stress(
    formation: &NominalFormation,
    opts: &StressSolverOptions,
) -> Result<StressMatrix, StressError> {
    if !formation.leaders_span() {
        return Err(StressError::AssumptionViolated(format!(
            "leader span rank {} does not reach the configuration's affine rank {}",
            crate::formation::affine_span_rank(formation.leader_positions()),
            formation.affine_dim() + 1
        )));
    }
    let n = formation.agent_count();
    let dim = formation.dim();
    let d_eff = formation.affine_dim();
    let expected_rank = n - d_eff - 1;
    let edges: Vec<(usize, usize)> = formation.edges().collect();
    if edges.is_empty() {
        return Err(StressError::NoValidStress {
            expected_rank,
            best_margin: f64::NEG_INFINITY,
            iterations: 0,
        });
    }

    // Equilibrium constraints Omega(w) * P(a) = 0, one block row per agent.
    let mut constraints = DMatrix::zeros(n * dim, edges.len());
    for (k, &(i, j)) in edges.iter().enumerate() {
        let diff = formation.position(i) - formation.position(j);
        for c in 0..dim {
            constraints[(i * dim + c, k)] = diff[c];
            constraints[(j * dim + c, k)] = -diff[c];
        }
    }
    let basis = linalg::nullspace_basis(&constraints, 1e-12);
    let k_dim = basis.ncols();
    if k_dim == 0 {
        return Err(StressError::NoValidStress {
            expected_rank,
            best_margin: f64::NEG_INFINITY,
            iterations: 0,
        });
    }

    // Reduce onto the orthogonal complement of the affine kernel; the
    // remaining eigenvalues are exactly the candidate stress's nonzero
    // spectrum.
    let complement = linalg::column_space_complement(&formation.augmented_configuration(), 1e-10);
    let reduced: Vec<DMatrix<f64>> = (0..k_dim)
        .map(|t| {
            let weights = weights_from_coeffs(&edges, &basis, &DVector::from_fn(k_dim, |r, _| {
                if r == t {
                    1.0
                } else {
                    0.0
                }
            }));
            let omega = omega_from_weights(n, &weights);
            complement.transpose() * omega * &complement
        })
        .collect();

    let eval = |c: &DVector<f64>| -> (f64, DVector<f64>) {
        let mut m = DMatrix::zeros(expected_rank, expected_rank);
        for (ci, mt) in c.iter().zip(reduced.iter()) {
            m += mt * *ci;
        }
        let (vals, vecs) = linalg::symmetric_eigen_sorted(&m);
        (vals[0], vecs.column(0).into_owned())
    };

    // Deterministic start: e1 with the better sign.
    let mut c = DVector::zeros(k_dim);
    c[0] = 1.0;
    let (lam_pos, _) = eval(&c);
    c[0] = -1.0;
    let (lam_neg, _) = eval(&c);
    if lam_pos >= lam_neg {
        c[0] = 1.0;
    }

    let mut best_c = c.clone();
    let mut best_val = eval(&c).0;
    let mut iterations = 0;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let (val, vec) = eval(&c);
        if val > best_val {
            best_val = val;
            best_c = c.clone();
        }
        let grad = DVector::from_fn(k_dim, |t, _| (vec.transpose() * &reduced[t] * &vec)[(0, 0)]);
        let gnorm = grad.norm();
        if gnorm < 1e-15 {
            break;
        }
        let step = opts.step_scale / ((it + 1) as f64).sqrt();
        c += step * grad;
        let cnorm = c.norm();
        if cnorm < 1e-15 {
            break;
        }
        c /= cnorm;
    }

    if best_val <= opts.min_margin {
        return Err(StressError::NoValidStress {
            expected_rank,
            best_margin: best_val,
            iterations,
        });
    }

    let weights = weights_from_coeffs(&edges, &basis, &best_c);
    let mut stress = StressMatrix::from_weights(n, formation.leader_count(), weights);
    if opts.normalize_trace {
        stress = stress.scaled_to_trace(n as f64);
    }
    Ok(stress)
}

fn weights_from_coeffs(
    edges: &[(usize, usize)],
    basis: &DMatrix<f64>,
    coeffs: &DVector<f64>,
) -> BTreeMap<(usize, usize), f64> {
    let w = basis * coeffs;
    edges
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| ((i, j), w[k]))
        .collect()
}

/// Tolerances for [`validate_stress`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StressTolerances {
    /// Max absolute entry of `Omega - Omega^T`.
    pub symmetry: f64,
    /// Max absolute entry allowed on non-edges off the diagonal.
    pub sparsity: f64,
    /// Max absolute row sum.
    pub row_sum: f64,
    /// Frobenius norm of `Omega * P(a)`.
    pub equilibrium: f64,
    /// Relative zero band for rank counting: eigenvalues with magnitude
    /// below `rank_rel * max(1, lambda_max)` count as kernel.
    pub rank_rel: f64,
    /// Eigenvalues outside the zero band must exceed `-psd_margin`.
    pub psd_margin: f64,
}

impl StressTolerances {
    /// Tolerances appropriate for solver output.
    pub fn solver_grade() -> Self {
        Self {
            symmetry: 1e-10,
            sparsity: 1e-10,
            row_sum: 1e-10,
            equilibrium: 1e-8,
            rank_rel: 1e-7,
            psd_margin: 1e-6,
        }
    }

    /// Tolerances appropriate for externally supplied matrices with
    /// entries rounded to a couple of decimals.
    pub fn printed_grade() -> Self {
        Self {
            symmetry: 0.15,
            sparsity: 1e-9,
            row_sum: 0.05,
            equilibrium: 0.15,
            rank_rel: 0.05,
            psd_margin: 1e-6,
        }
    }
}

impl Default for StressTolerances {
    fn default() -> Self {
        Self::solver_grade()
    }
}

#[derive(Debug, Clone)]
pub struct StressCheck {
    pub name: &'static str,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
}

/// Per-invariant pass/fail report for a candidate stress matrix.
#[derive(Debug, Clone)]
pub struct StressValidationReport {
    pub checks: Vec<StressCheck>,
    pub rank: usize,
    pub expected_rank: usize,
    pub min_eig_ff: f64,
}

impl StressValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for StressValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<14} {}  (observed {: >12.4e}, threshold {: >10.3e})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.observed,
                c.threshold
            )?;
        }
        writeln!(f, "rank           {} (expected {})", self.rank, self.expected_rank)?;
        write!(f, "min eig(O_ff)  {:.6}", self.min_eig_ff)
    }
}

/// Check a candidate matrix against every stress invariant of the
/// formation. A failing matrix produces a failing report, never an error;
/// the only precondition is that the dimensions agree.
pub fn validate_stress(
    omega: &DMatrix<f64>,
    formation: &NominalFormation,
    tol: &StressTolerances,
) -> StressValidationReport {
    let n = formation.agent_count();
    assert_eq!(omega.nrows(), n, "stress row count != agent count");
    assert_eq!(omega.ncols(), n, "stress must be square");
    let d_eff = formation.affine_dim();
    let expected_rank = n - d_eff - 1;

    let mut checks = Vec::new();

    let sym = linalg::max_abs(&(omega - omega.transpose()));
    checks.push(StressCheck {
        name: "symmetry",
        passed: sym <= tol.symmetry,
        observed: sym,
        threshold: tol.symmetry,
    });

    let mut sparsity = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            if !formation.has_edge(i, j) {
                sparsity = sparsity.max(omega[(i, j)].abs()).max(omega[(j, i)].abs());
            }
        }
    }
    checks.push(StressCheck {
        name: "sparsity",
        passed: sparsity <= tol.sparsity,
        observed: sparsity,
        threshold: tol.sparsity,
    });

    let ones = DVector::from_element(n, 1.0);
    let row_sum = (omega * ones).abs().max();
    checks.push(StressCheck {
        name: "row-sums",
        passed: row_sum <= tol.row_sum,
        observed: row_sum,
        threshold: tol.row_sum,
    });

    let equilibrium = (omega * formation.configuration()).norm();
    checks.push(StressCheck {
        name: "equilibrium",
        passed: equilibrium <= tol.equilibrium,
        observed: equilibrium,
        threshold: tol.equilibrium,
    });

    let eigs = linalg::symmetric_eigenvalues(&(0.5 * (omega + omega.transpose())));
    let lam_max = eigs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let band = tol.rank_rel * lam_max.max(1.0);
    let lam_min = eigs.first().copied().unwrap_or(0.0);
    let psd_floor = band.max(tol.psd_margin);
    checks.push(StressCheck {
        name: "psd",
        passed: lam_min >= -psd_floor,
        observed: lam_min,
        threshold: psd_floor,
    });

    let rank = eigs.iter().filter(|&&l| l > band).count();
    checks.push(StressCheck {
        name: "rank",
        passed: rank == expected_rank,
        observed: rank as f64,
        threshold: expected_rank as f64,
    });

    let stress_view = StressMatrix::from_matrix(omega.clone(), formation.leader_count());
    let min_eig_ff = linalg::symmetric_eigenvalues(&stress_view.follower_block())
        .first()
        .copied()
        .unwrap_or(f64::NAN);

    StressValidationReport {
        checks,
        rank,
        expected_rank,
        min_eig_ff,
    }
}

/// Result of the affine localizability test.
#[derive(Debug, Clone, Copy)]
pub struct Localizability {
    pub localizable: bool,
    pub min_eig_ff: f64,
}

/// Followers are localizable exactly when the follower block is
/// nonsingular; under the standing assumptions that block is then
/// positive definite, so its smallest eigenvalue is reported alongside.
pub fn localizability_check(stress: &StressMatrix) -> Localizability {
    let ff = stress.follower_block();
    let eigs = linalg::symmetric_eigenvalues(&ff);
    let min_eig_ff = eigs.first().copied().unwrap_or(f64::NAN);
    let max_abs = eigs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let localizable = eigs.iter().all(|&l| l.abs() > 1e-10 * max_abs.max(1.0));
    Localizability {
        localizable,
        min_eig_ff,
    }
}

/// Solve for the follower positions induced by the leader positions:
/// `p_f = -(O_ff^-1 O_fl (x) I_d) p_l`.
pub fn follower_targets(
    stress: &StressMatrix,
    leader_targets: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>, StressError> {
    let n_l = stress.leader_count();
    if leader_targets.len() != n_l {
        return Err(StressError::Dimension(format!(
            "expected {} leader targets, got {}",
            n_l,
            leader_targets.len()
        )));
    }
    let loc = localizability_check(stress);
    if !loc.localizable {
        let ff = stress.follower_block();
        let min_abs_eig = linalg::symmetric_eigenvalues(&ff)
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x.abs()));
        return Err(StressError::NotLocalizable { min_abs_eig });
    }
    let dim = leader_targets[0].len();
    let n_f = stress.follower_count();
    // Stack leader targets as rows and solve O_ff X = -O_fl L.
    let leaders = DMatrix::from_fn(n_l, dim, |i, k| leader_targets[i][k]);
    let rhs = -stress.follower_leader_block() * leaders;
    let solved = stress
        .follower_block()
        .lu()
        .solve(&rhs)
        .ok_or(StressError::NotLocalizable { min_abs_eig: 0.0 })?;
    Ok((0..n_f)
        .map(|i| DVector::from_fn(dim, |k, _| solved[(i, k)]))
        .collect())
}
