//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here operates on `nalgebra` dynamic matrices. The problem
//! sizes are desk-scale (agent counts below ~20, state dimensions below
//! ~10), so dense decompositions and Kronecker-product solves are the
//! right tool throughout.

use nalgebra::{Complex, DMatrix, DVector};

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = 0.5 * (m + m.transpose());
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Eigen decomposition of a symmetric matrix with eigenvalues sorted
/// ascending and eigenvectors in matching column order.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Numerical rank with a threshold relative to the largest singular value
/// (floored at 1.0 so that near-zero matrices report rank 0).
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let cutoff = rel_tol * sv.max().max(1.0);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal basis of the right nullspace of `m`, one basis vector per
/// column.
///
/// Works on the Gram matrix `M^T M`, whose eigenvectors below the squared
/// singular-value cutoff span the kernel. Deterministic for a fixed input.
pub fn nullspace_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let gram = m.transpose() * m;
    kernel_of_gram(&gram, rel_tol)
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `m`, one basis vector per column (the kernel of `M^T`).
pub fn column_space_complement(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let gram = m * m.transpose();
    kernel_of_gram(&gram, rel_tol)
}

fn kernel_of_gram(gram: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (values, vectors) = symmetric_eigen_sorted(gram);
    let lam_max = values.last().copied().unwrap_or(0.0).max(0.0);
    // Exact kernel directions of the Gram matrix land at machine-epsilon
    // scale relative to the largest eigenvalue, so the squared relative
    // cutoff is floored there.
    let cutoff = lam_max.max(1.0) * (rel_tol * rel_tol).max(1e-13);
    let dim = values.iter().filter(|&&l| l <= cutoff).count();
    let n = gram.nrows();
    let mut basis = DMatrix::zeros(n, dim);
    for k in 0..dim {
        basis.set_column(k, &vectors.column(k));
    }
    basis
}

/// Real Schur decomposition with an iteration cap and deterministic
/// orthogonal-similarity retries.
///
/// The plain Francis iteration can cycle on matrices whose spectrum is
/// symmetric about both axes (Hamiltonians are the prime example); a
/// fixed rotation of the input breaks the symmetry without touching the
/// eigenvalues, and the accumulated factor is corrected afterwards.
pub fn schur_with_retries(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let max_niter = 100 * n.max(10);
    if let Some(s) = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, max_niter) {
        let (q, t) = s.unpack();
        return Some((q, t));
    }
    let mut seed = 0x9e37_79b9_7f4a_7c15u64;
    for _ in 0..4 {
        let q0 = deterministic_orthogonal(n, &mut seed);
        let rotated = q0.transpose() * m * &q0;
        if let Some(s) = nalgebra::linalg::Schur::try_new(rotated, f64::EPSILON, max_niter) {
            let (q, t) = s.unpack();
            return Some((&q0 * q, t));
        }
    }
    None
}

fn deterministic_orthogonal(n: usize, seed: &mut u64) -> DMatrix<f64> {
    let mut next = || {
        *seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = *seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
    };
    let random = DMatrix::from_fn(n, n, |_, _| next());
    full_qr_q(&random)
}

/// Eigenvalues read off a real quasi-triangular (Schur) factor.
pub fn eigenvalues_of_quasi_triangular(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let coupled = i + 1 < n
            && t[(i + 1, i)].abs() > 1e-12 * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs() + 1.0);
        if coupled {
            let (a, b) = (t[(i, i)], t[(i, i + 1)]);
            let (c, d) = (t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let root = disc.sqrt();
                out.push(Complex::new(mean + root, 0.0));
                out.push(Complex::new(mean - root, 0.0));
            } else {
                let imag = (-disc).sqrt();
                out.push(Complex::new(mean, imag));
                out.push(Complex::new(mean, -imag));
            }
            i += 2;
        } else {
            out.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Eigenvalues via the capped Schur iteration; `None` when the iteration
/// fails to converge even after retries.
pub fn try_complex_eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    schur_with_retries(m).map(|(_, t)| eigenvalues_of_quasi_triangular(&t))
}

/// Largest real part over the eigenvalues of a (generally nonsymmetric)
/// matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    try_complex_eigenvalues(m)
        .expect("eigenvalue iteration did not converge")
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// All eigenvalues have strictly negative real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    spectral_abscissa(m) < 0.0
}

/// Smallest singular value of the complex pencil `[A - lambda*I, B]`,
/// used by the eigenvector (PBH) tests for stabilizability and
/// detectability.
pub fn pbh_min_singular_value(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: Complex<f64>) -> f64 {
    let d = a.nrows();
    let k = b.ncols();
    let mut pencil = DMatrix::<Complex<f64>>::zeros(d, d + k);
    for i in 0..d {
        for j in 0..d {
            pencil[(i, j)] = Complex::new(a[(i, j)], 0.0);
            if i == j {
                pencil[(i, j)] -= lambda;
            }
        }
        for j in 0..k {
            pencil[(i, d + j)] = Complex::new(b[(i, j)], 0.0);
        }
    }
    pencil.svd(false, false).singular_values.min()
}

/// Solve the Sylvester equation `A X - X B = C` by a dense Kronecker
/// expansion. Intended for the tiny (at most 2x2) blocks that appear when
/// reordering a real Schur form.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let p = a.nrows();
    let q = b.nrows();
    let eye_p = DMatrix::<f64>::identity(p, p);
    let eye_q = DMatrix::<f64>::identity(q, q);
    // vec(A X) = (I_q (x) A) vec(X); vec(X B) = (B^T (x) I_p) vec(X)
    let system = eye_q.kronecker(a) - b.transpose().kronecker(&eye_p);
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = system.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(p, q, sol.as_slice()))
}

/// Solve the Lyapunov equation `A^T X + X A = W` for symmetric `W`.
pub fn solve_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = a.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let at = a.transpose();
    let system = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_column_slice(w.as_slice());
    let sol = system.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(d, d, sol.as_slice());
    Some(0.5 * (&x + x.transpose()))
}

/// Full (square) orthogonal factor of a tall-thin QR factorization,
/// accumulated from Householder reflections. The first `m.ncols()` columns
/// span the column space of `m`.
pub fn full_qr_q(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = m.nrows();
    let cols = m.ncols();
    let mut r = m.clone();
    let mut q = DMatrix::<f64>::identity(rows, rows);
    for k in 0..cols.min(rows.saturating_sub(1)) {
        let mut v = DVector::zeros(rows);
        for i in k..rows {
            v[i] = r[(i, k)];
        }
        let alpha = -v[k].signum() * v.rows(k, rows - k).norm();
        if alpha.abs() < 1e-300 {
            continue;
        }
        v[k] -= alpha;
        let vnorm = v.rows(k, rows - k).norm();
        if vnorm < 1e-300 {
            continue;
        }
        for i in k..rows {
            v[i] /= vnorm;
        }
        // r <- (I - 2 v v^T) r ; q <- q (I - 2 v v^T)
        let vt_r = v.transpose() * &r;
        r -= 2.0 * &v * vt_r;
        let q_v = &q * &v;
        q -= 2.0 * q_v * v.transpose();
    }
    q
}

/// Frobenius norm of the symmetry defect `M - M^T`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

/// Maximum absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_deficient_matrix() {
        // rows are multiples of (1, 1, 0)
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let ns = nullspace_basis(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let w = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let x = solve_lyapunov(&a, &w).unwrap();
        let res = a.transpose() * &x + &x * &a - &w;
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn sylvester_solution_satisfies_equation() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let c = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        let res = &a * &x - &x * &b - &c;
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn full_qr_is_orthogonal_and_spans() {
        let m = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 2.0, -1.0]);
        let q = full_qr_q(&m);
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(4, 4)).norm() < 1e-12);
        // first 2 columns span col(m): projecting m onto them loses nothing
        let q2 = q.columns(0, 2);
        let proj = q2 * (q2.transpose() * &m);
        assert!((proj - &m).norm() < 1e-10);
    }

    #[test]
    fn pbh_detects_uncontrollable_mode() {
        // A diagonal, B touches only the first state: mode at +2 uncontrollable
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let s = pbh_min_singular_value(&a, &b, Complex::new(2.0, 0.0));
        assert!(s < 1e-12);
        let s_ok = pbh_min_singular_value(&a, &b, Complex::new(1.0, 0.0));
        assert!(s_ok > 0.5);
    }
}
