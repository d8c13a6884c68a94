//! Gain synthesis: Riccati solutions, feedback and observer gains, and
//! leader compensation terms.
//!
//! The continuous-time algebraic Riccati equation
//!
//! ```text
//! P A + A^T P - P B B^T P + R = 0
//! ```
//!
//! is solved by extracting the stable invariant subspace of the 2d x 2d
//! Hamiltonian via a real Schur decomposition whose eigenvalue blocks are
//! reordered in place, then polishing the subspace solution with a few
//! Kleinman–Newton steps. The dual equation for observer design reuses the
//! same routine on the transposed data.
//!
//! Leader compensation makes each target position an equilibrium of the
//! closed loop: `(A + BK) p* + B v = 0`. Whether such `v` exists depends
//! on the shape of `B`; both the redundant-actuator case (full row rank)
//! and the thin case (full column rank, which constrains admissible
//! targets) are handled.

use crate::linalg;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

const CARE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("matrix dimensions are inconsistent: {0}")]
    Dimension(String),
    #[error("input matrix must have full column rank (rank {rank} < {cols})")]
    RankDeficientInput { rank: usize, cols: usize },
    #[error("weight matrix must be symmetric positive definite (min eigenvalue {min_eig:.3e})")]
    WeightNotPositiveDefinite { min_eig: f64 },
    #[error(
        "pair is not stabilizable: mode at {eigenvalue} fails the eigenvector test \
         (min singular value {sigma_min:.3e})"
    )]
    NotStabilizable { eigenvalue: String, sigma_min: f64 },
    #[error(
        "pair is not detectable: mode at {eigenvalue} fails the eigenvector test \
         (min singular value {sigma_min:.3e})"
    )]
    NotDetectable { eigenvalue: String, sigma_min: f64 },
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),
    #[error("compensation infeasible for leaders {}", format_residuals(.residuals))]
    InfeasibleTarget { residuals: Vec<(usize, f64)> },
    #[error("design file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("design file parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

fn format_residuals(residuals: &[(usize, f64)]) -> String {
    residuals
        .iter()
        .map(|(i, r)| format!("{} (residual {:.3e})", i + 1, r))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Whether the protocol runs on measured state or on observer state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolMode {
    State,
    Output,
}

impl std::fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolMode::State => write!(f, "state"),
            ProtocolMode::Output => write!(f, "output"),
        }
    }
}

/// The agents' shared linear dynamics `p' = A p + B u`, `q = C p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: Option<DMatrix<f64>>,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: Option<DMatrix<f64>>,
    ) -> Result<Self, DesignError> {
        if a.nrows() != a.ncols() {
            return Err(DesignError::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(DesignError::Dimension(format!(
                "B has {} rows, expected {}",
                b.nrows(),
                a.nrows()
            )));
        }
        let b_rank = linalg::rank(&b, 1e-10);
        if b_rank != b.ncols() {
            return Err(DesignError::RankDeficientInput {
                rank: b_rank,
                cols: b.ncols(),
            });
        }
        if let Some(c) = &c {
            if c.ncols() != a.nrows() {
                return Err(DesignError::Dimension(format!(
                    "C has {} columns, expected {}",
                    c.ncols(),
                    a.nrows()
                )));
            }
        }
        Ok(Self { a, b, c })
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension, zero when no output map is configured.
    pub fn output_dim(&self) -> usize {
        self.c.as_ref().map_or(0, |c| c.nrows())
    }
}

fn check_weight(r: &DMatrix<f64>, d: usize, name: &str) -> Result<(), DesignError> {
    if r.nrows() != d || r.ncols() != d {
        return Err(DesignError::Dimension(format!(
            "{name} must be {d}x{d}, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let min_eig = linalg::symmetric_eigenvalues(r)[0];
    if linalg::asymmetry(r) > 1e-9 || min_eig <= 0.0 {
        return Err(DesignError::WeightNotPositiveDefinite { min_eig });
    }
    Ok(())
}

/// Eigenvector (PBH) test: every eigenvalue of `A` with real part at or
/// right of the imaginary axis must keep `[A - lambda I, B]` full rank.
fn pbh_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Result<(), (String, f64)>, DesignError> {
    let scale = linalg::spectral_norm(a).max(1.0);
    let eigenvalues = linalg::try_complex_eigenvalues(a).ok_or_else(|| {
        DesignError::NoStabilizingSolution("eigenvalue iteration did not converge on A".into())
    })?;
    for lambda in eigenvalues {
        if lambda.re < -1e-9 {
            continue;
        }
        let sigma = linalg::pbh_min_singular_value(a, b, lambda);
        if sigma < 1e-8 * scale {
            return Ok(Err((format!("{:.4}{:+.4}i", lambda.re, lambda.im), sigma)));
        }
    }
    Ok(Ok(()))
}

/// Diagonal block layout of a real quasi-triangular matrix.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let two = i + 1 < n && t[(i + 1, i)].abs() > 1e-12 * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs() + 1.0);
        if two {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn block_is_stable(t: &DMatrix<f64>, start: usize, size: usize) -> bool {
    if size == 1 {
        t[(start, start)] < 0.0
    } else {
        0.5 * (t[(start, start)] + t[(start + 1, start + 1)]) < 0.0
    }
}

/// Swap two adjacent diagonal blocks of a real Schur form with an
/// orthogonal similarity, accumulating the transformation into `q`.
fn swap_adjacent_blocks(
    t: &mut DMatrix<f64>,
    q: &mut DMatrix<f64>,
    start: usize,
    p: usize,
    sz_q: usize,
) -> Result<(), DesignError> {
    let n = t.nrows();
    let t11 = t.view((start, start), (p, p)).into_owned();
    let t12 = t.view((start, start + p), (p, sz_q)).into_owned();
    let t22 = t.view((start + p, start + p), (sz_q, sz_q)).into_owned();
    // Invariant subspace for the trailing block: columns of [X; I] with
    // T11 X - X T22 = -T12.
    let x = linalg::solve_sylvester(&t11, &t22, &(-&t12)).ok_or_else(|| {
        DesignError::NoStabilizingSolution("Schur reordering encountered equal eigenvalues".into())
    })?;
    let mut w = DMatrix::zeros(p + sz_q, sz_q);
    for i in 0..p {
        for j in 0..sz_q {
            w[(i, j)] = x[(i, j)];
        }
    }
    for j in 0..sz_q {
        w[(p + j, j)] = 1.0;
    }
    let g = linalg::full_qr_q(&w);
    let mut g_full = DMatrix::identity(n, n);
    for i in 0..(p + sz_q) {
        for j in 0..(p + sz_q) {
            g_full[(start + i, start + j)] = g[(i, j)];
        }
    }
    *t = g_full.transpose() * &*t * &g_full;
    *q *= &g_full;
    // The lower-left block of the swapped window is structurally zero.
    for i in 0..p {
        for j in 0..sz_q {
            t[(start + sz_q + i, start + j)] = 0.0;
        }
    }
    // Entries below the first subdiagonal are structural zeros everywhere.
    for i in 0..n {
        for j in 0..n {
            if i > j + 1 {
                t[(i, j)] = 0.0;
            }
        }
    }
    Ok(())
}

/// Real Schur decomposition with the stable (negative real part)
/// eigenvalue blocks bubbled to the top-left. Returns `(Q, T, n_stable)`.
fn stable_ordered_schur(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, usize), DesignError> {
    let (mut q, mut t) = linalg::schur_with_retries(h).ok_or_else(|| {
        DesignError::NoStabilizingSolution(
            "Schur iteration did not converge on the Hamiltonian".into(),
        )
    })?;
    loop {
        let blocks = schur_blocks(&t);
        let mut swapped = false;
        for w in blocks.windows(2) {
            let (s1, p) = w[0];
            let (_, sz) = w[1];
            if !block_is_stable(&t, s1, p) && block_is_stable(&t, s1 + p, sz) {
                swap_adjacent_blocks(&mut t, &mut q, s1, p, sz)?;
                swapped = true;
                break;
            }
        }
        if !swapped {
            break;
        }
    }
    let n_stable: usize = schur_blocks(&t)
        .iter()
        .take_while(|&&(s, p)| block_is_stable(&t, s, p))
        .map(|&(_, p)| p)
        .sum();
    Ok((q, t, n_stable))
}

/// Solve `P A + A^T P - P B B^T P + R = 0` for the symmetric stabilizing
/// solution. Pass `(A^T, C^T, R)` to solve the dual (filter) equation.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, DesignError> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(DesignError::Dimension("A must be square".into()));
    }
    if b.nrows() != d {
        return Err(DesignError::Dimension(format!(
            "B has {} rows, expected {}",
            b.nrows(),
            d
        )));
    }
    check_weight(r, d, "R")?;
    if let Err((eigenvalue, sigma_min)) = pbh_check(a, b)? {
        return Err(DesignError::NotStabilizable {
            eigenvalue,
            sigma_min,
        });
    }

    let s = b * b.transpose();
    let mut h = DMatrix::zeros(2 * d, 2 * d);
    h.view_mut((0, 0), (d, d)).copy_from(a);
    h.view_mut((0, d), (d, d)).copy_from(&(-&s));
    h.view_mut((d, 0), (d, d)).copy_from(&(-r));
    h.view_mut((d, d), (d, d)).copy_from(&(-a.transpose()));

    let (q, t, n_stable) = stable_ordered_schur(&h)?;
    let h_scale = linalg::spectral_norm(&h).max(1.0);
    for lambda in linalg::eigenvalues_of_quasi_triangular(&t) {
        if lambda.re.abs() < 1e-9 * h_scale {
            return Err(DesignError::NoStabilizingSolution(format!(
                "Hamiltonian eigenvalue {:.3e}{:+.3e}i sits on the imaginary axis",
                lambda.re, lambda.im
            )));
        }
    }
    if n_stable != d {
        return Err(DesignError::NoStabilizingSolution(format!(
            "expected a {d}-dimensional stable subspace, found {n_stable}"
        )));
    }
    let u1 = q.view((0, 0), (d, d)).into_owned();
    let u2 = q.view((d, 0), (d, d)).into_owned();
    let u1_t_inv_u2_t = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or_else(|| DesignError::NoStabilizingSolution("singular subspace basis".into()))?;
    let mut p = u1_t_inv_u2_t.transpose();
    p = 0.5 * (&p + p.transpose());

    // Kleinman refinement: each step solves a Lyapunov equation for the
    // closed loop of the previous iterate.
    for _ in 0..5 {
        let residual = &p * a + a.transpose() * &p - &p * &s * &p + r;
        if residual.norm() <= 1e-11 {
            break;
        }
        let a_k = a - &s * &p;
        let w = -(r + &p * &s * &p);
        match linalg::solve_lyapunov(&a_k, &w) {
            Some(next) => p = next,
            None => break,
        }
    }

    let residual = (&p * a + a.transpose() * &p - &p * &s * &p + r).norm();
    if residual > CARE_RESIDUAL_TOL {
        return Err(DesignError::NoStabilizingSolution(format!(
            "refined residual {residual:.3e} exceeds {CARE_RESIDUAL_TOL:.0e}"
        )));
    }
    let closed_loop_stable = linalg::try_complex_eigenvalues(&(a - &s * &p))
        .map(|eigs| eigs.iter().all(|l| l.re < 0.0))
        .ok_or_else(|| {
            DesignError::NoStabilizingSolution(
                "eigenvalue iteration did not converge on the closed loop".into(),
            )
        })?;
    if !closed_loop_stable {
        return Err(DesignError::NoStabilizingSolution(
            "closed loop of the computed solution is not Hurwitz".into(),
        ));
    }
    Ok(p)
}

/// State-feedback half of a design: `P` and `K = -B^T P`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeedback {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

pub fn design_state_feedback(
    plant: &PlantModel,
    r1: &DMatrix<f64>,
) -> Result<StateFeedback, DesignError> {
    let p = solve_care(&plant.a, &plant.b, r1)?;
    let k = -plant.b.transpose() * &p;
    Ok(StateFeedback { p, k })
}

/// Observer half of a design: `Q` and `F = -Q C^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverDesign {
    pub q: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

pub fn design_observer(plant: &PlantModel, r2: &DMatrix<f64>) -> Result<ObserverDesign, DesignError> {
    let c = plant
        .c
        .as_ref()
        .ok_or_else(|| DesignError::Dimension("observer design needs an output map C".into()))?;
    let q = solve_care(&plant.a.transpose(), &c.transpose(), r2).map_err(|e| match e {
        DesignError::NotStabilizable {
            eigenvalue,
            sigma_min,
        } => DesignError::NotDetectable {
            eigenvalue,
            sigma_min,
        },
        other => other,
    })?;
    let f = -&q * c.transpose();
    Ok(ObserverDesign { q, f })
}

/// How leader compensation is realized, following the shape of `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationMode {
    FullRowRank,
    FullColumnRank,
}

/// Per-leader compensation inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationTerms {
    pub vectors: Vec<DVector<f64>>,
    pub mode: CompensationMode,
}

/// Compute the leader compensation inputs `v_i` with
/// `(A + BK) p*_i + B v_i = 0`.
///
/// With `B` of full row rank any target is admissible and the right
/// inverse gives an exact solution. With `B` thin (full column rank) the
/// component of `A p*_i` outside the range of `B` cannot be cancelled, so
/// feasibility requires that component to vanish.
pub fn compensation_terms(
    plant: &PlantModel,
    k: &DMatrix<f64>,
    leader_targets: &[DVector<f64>],
) -> Result<CompensationTerms, DesignError> {
    let d = plant.state_dim();
    let m = plant.input_dim();
    let a = &plant.a;
    let b = &plant.b;
    for (i, t) in leader_targets.iter().enumerate() {
        if t.len() != d {
            return Err(DesignError::Dimension(format!(
                "leader target {} has dimension {}, expected {}",
                i + 1,
                t.len(),
                d
            )));
        }
    }
    let closed = a + b * k;

    let bbt = b * b.transpose();
    let row_rank_full = linalg::rank(&bbt, 1e-10) == d;
    if row_rank_full {
        let bbt_lu = bbt.lu();
        let vectors = leader_targets
            .iter()
            .map(|t| {
                let rhs = &closed * t;
                let y = bbt_lu.solve(&rhs).expect("BB^T invertible");
                -(b.transpose() * y)
            })
            .collect();
        return Ok(CompensationTerms {
            vectors,
            mode: CompensationMode::FullRowRank,
        });
    }

    // Thin B: project A p* onto the complement of range(B) to test
    // feasibility, then invert through U1 = (B^T B)^{-1} B^T.
    let btb = b.transpose() * b;
    let btb_lu = btb.lu();
    let scale = linalg::spectral_norm(a).max(1.0);
    let mut residuals = Vec::new();
    for (i, t) in leader_targets.iter().enumerate() {
        let ap = a * t;
        let y = btb_lu
            .solve(&(b.transpose() * &ap))
            .expect("B^T B invertible for full column rank B");
        let residual = (&ap - b * y).norm();
        if residual > 1e-8 * scale {
            residuals.push((i, residual));
        }
    }
    if !residuals.is_empty() {
        return Err(DesignError::InfeasibleTarget { residuals });
    }
    let vectors = leader_targets
        .iter()
        .map(|t| {
            let rhs = &closed * t;
            let y = btb_lu
                .solve(&(b.transpose() * &rhs))
                .expect("B^T B invertible");
            let v: DVector<f64> = -y;
            debug_assert_eq!(v.len(), m);
            v
        })
        .collect();
    Ok(CompensationTerms {
        vectors,
        mode: CompensationMode::FullColumnRank,
    })
}

/// Everything the protocols need: gains, Riccati certificates, weights,
/// and leader compensation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDesign {
    pub plant: PlantModel,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub q: Option<DMatrix<f64>>,
    pub f: Option<DMatrix<f64>>,
    pub r1: DMatrix<f64>,
    pub r2: Option<DMatrix<f64>>,
    pub compensation: CompensationTerms,
}

impl ControllerDesign {
    /// Assemble the full design for the given mode and leader targets.
    pub fn assemble(
        plant: PlantModel,
        r1: DMatrix<f64>,
        r2: Option<DMatrix<f64>>,
        leader_targets: &[DVector<f64>],
        mode: ProtocolMode,
    ) -> Result<Self, DesignError> {
        check_weight(&r1, plant.state_dim(), "R1")?;
        let feedback = design_state_feedback(&plant, &r1)?;
        let (q, f, r2) = match mode {
            ProtocolMode::State => (None, None, r2),
            ProtocolMode::Output => {
                let r2 = r2.ok_or_else(|| {
                    DesignError::Dimension("output mode requires the weight R2".into())
                })?;
                check_weight(&r2, plant.state_dim(), "R2")?;
                let obs = design_observer(&plant, &r2)?;
                (Some(obs.q), Some(obs.f), Some(r2))
            }
        };
        let compensation = compensation_terms(&plant, &feedback.k, leader_targets)?;
        Ok(Self {
            plant,
            p: feedback.p,
            k: feedback.k,
            q,
            f,
            r1,
            r2,
            compensation,
        })
    }

    /// Gain-squared weight `P B B^T P`, a diagnostic quantity used by the
    /// bound monitor.
    pub fn gain_weight(&self) -> DMatrix<f64> {
        let bt_p = self.plant.b.transpose() * &self.p;
        bt_p.transpose() * bt_p
    }

    /// Smallest eigenvalue of `R1`.
    pub fn lambda_min_r1(&self) -> f64 {
        linalg::symmetric_eigenvalues(&self.r1)[0]
    }

    /// The output-feedback convergence certificate additionally requires
    /// `lambda_min(R1) > 1/2`. A design that fails this still runs; it
    /// just carries no guarantee.
    pub fn output_certified(&self) -> bool {
        self.lambda_min_r1() > 0.5
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DesignError> {
        let file = DesignFile::from(self);
        let text = toml::to_string_pretty(&file).expect("design serialization");
        if let Some(parent) = path.as_ref().parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let text = std::fs::read_to_string(path)?;
        let file: DesignFile = toml::from_str(&text)?;
        file.build()
    }
}

/// On-disk design document.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignFile {
    #[serde(with = "crate::serde_util::rows")]
    pub a: Vec<Vec<f64>>,
    #[serde(with = "crate::serde_util::rows")]
    pub b: Vec<Vec<f64>>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(with = "crate::serde_util::rows")]
    pub p: Vec<Vec<f64>>,
    #[serde(with = "crate::serde_util::rows")]
    pub k: Vec<Vec<f64>>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub f: Option<Vec<Vec<f64>>>,
    #[serde(with = "crate::serde_util::rows")]
    pub r1: Vec<Vec<f64>>,
    #[serde(default, with = "crate::serde_util::opt_rows")]
    pub r2: Option<Vec<Vec<f64>>>,
    #[serde(with = "crate::serde_util::rows")]
    pub compensation: Vec<Vec<f64>>,
    pub compensation_mode: CompensationMode,
}

impl From<&ControllerDesign> for DesignFile {
    fn from(d: &ControllerDesign) -> Self {
        use crate::serde_util::{matrix_to_rows, vector_to_row};
        DesignFile {
            a: matrix_to_rows(&d.plant.a),
            b: matrix_to_rows(&d.plant.b),
            c: d.plant.c.as_ref().map(matrix_to_rows),
            p: matrix_to_rows(&d.p),
            k: matrix_to_rows(&d.k),
            q: d.q.as_ref().map(matrix_to_rows),
            f: d.f.as_ref().map(matrix_to_rows),
            r1: matrix_to_rows(&d.r1),
            r2: d.r2.as_ref().map(matrix_to_rows),
            compensation: d.compensation.vectors.iter().map(vector_to_row).collect(),
            compensation_mode: d.compensation.mode,
        }
    }
}

impl DesignFile {
    pub fn build(&self) -> Result<ControllerDesign, DesignError> {
        use crate::serde_util::rows_to_matrix;
        let to_m = |rows: &Vec<Vec<f64>>, name: &str| {
            rows_to_matrix(rows).map_err(|e| DesignError::Dimension(format!("{name}: {e}")))
        };
        let plant = PlantModel::new(
            to_m(&self.a, "a")?,
            to_m(&self.b, "b")?,
            self.c.as_ref().map(|c| to_m(c, "c")).transpose()?,
        )?;
        Ok(ControllerDesign {
            plant,
            p: to_m(&self.p, "p")?,
            k: to_m(&self.k, "k")?,
            q: self.q.as_ref().map(|m| to_m(m, "q")).transpose()?,
            f: self.f.as_ref().map(|m| to_m(m, "f")).transpose()?,
            r1: to_m(&self.r1, "r1")?,
            r2: self.r2.as_ref().map(|m| to_m(m, "r2")).transpose()?,
            compensation: CompensationTerms {
                vectors: self
                    .compensation
                    .iter()
                    .map(|row| DVector::from_column_slice(row))
                    .collect(),
                mode: self.compensation_mode,
            },
        })
    }
}
