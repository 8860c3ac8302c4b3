//! Dense symmetric linear algebra used by the interior-point solver:
//! a blocked Cholesky factorization, triangular solves against one or many
//! right-hand sides, and small symmetric-eigenvalue helpers.
//!
//! Everything here is single-threaded and deterministic; the blocked
//! factorization routes its trailing updates through `gemm`, which is the
//! only place the flops matter.

use nalgebra::{DMatrix, DVector};

/// Panel width for the blocked factorization.
const NB: usize = 96;

/// In-place lower Cholesky `A = L Lᵀ`.  Only the lower triangle of `a` is
/// read or written; on success the lower triangle holds `L`.  Returns
/// `Err(k)` when pivot `k` is not strictly positive.
pub fn cholesky_in_place(a: &mut DMatrix<f64>) -> Result<(), usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut k = 0;
    while k < n {
        let nb = NB.min(n - k);
        factor_panel(a, k, nb)?;
        let rest = n - k - nb;
        if rest > 0 {
            // Copy the freshly factored sub-diagonal panel and update the
            // trailing matrix: A22 -= L21 · L21ᵀ.  The upper triangle of A22
            // receives garbage, which is fine: it is never read.
            let l21 = a.view((k + nb, k), (rest, nb)).clone_owned();
            let l21_t = l21.transpose();
            a.view_mut((k + nb, k + nb), (rest, rest))
                .gemm(-1.0, &l21, &l21_t, 1.0);
        }
        k += nb;
    }
    Ok(())
}

/// Factor the diagonal block `A[k..k+nb, k..k+nb]` (unblocked, column by
/// column) and divide the rows below it, producing panel columns of `L`.
fn factor_panel(a: &mut DMatrix<f64>, k: usize, nb: usize) -> Result<(), usize> {
    let n = a.nrows();
    let s = a.as_mut_slice(); // column-major, length n*n
    for c in 0..nb {
        let kc = k + c; // global column
        let col_off = kc * n;
        // Subtract the contributions of the previous panel columns t < c.
        for t in 0..c {
            let kt = k + t;
            let coef = s[kt * n + kc]; // L[kc, kt]
            if coef == 0.0 {
                continue;
            }
            // Columns kt < kc live strictly before column kc in memory, so a
            // split at the column start gives disjoint borrows.
            let (src_part, dst_part) = s.split_at_mut(col_off);
            let src = &src_part[kt * n + kc..kt * n + n];
            let dst = &mut dst_part[kc..n];
            // dst[r] and src[r] both correspond to row kc + r.
            for (d, x) in dst.iter_mut().zip(src.iter()) {
                *d -= coef * *x;
            }
        }
        let pivot = s[col_off + kc];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(kc);
        }
        let root = pivot.sqrt();
        s[col_off + kc] = root;
        let inv = 1.0 / root;
        for r in kc + 1..n {
            s[col_off + r] *= inv;
        }
    }
    Ok(())
}

/// Solve `L x = b` in place (forward substitution), `L` lower triangular.
pub fn solve_lower_vec(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    let s = l.as_slice();
    for j in 0..n {
        let xj = b[j] / s[j * n + j];
        b[j] = xj;
        if xj != 0.0 {
            let col = &s[j * n + j + 1..j * n + n];
            for (r, &lv) in col.iter().enumerate() {
                b[j + 1 + r] -= xj * lv;
            }
        }
    }
}

/// Solve `Lᵀ x = b` in place (backward substitution), `L` lower triangular.
pub fn solve_lower_transpose_vec(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    let s = l.as_slice();
    for j in (0..n).rev() {
        let col = &s[j * n + j + 1..j * n + n];
        let mut dot = 0.0;
        for (r, &lv) in col.iter().enumerate() {
            dot += lv * b[j + 1 + r];
        }
        b[j] = (b[j] - dot) / s[j * n + j];
    }
}

/// Solve `L Lᵀ x = b` in place for one vector.
pub fn chol_solve_vec(l: &DMatrix<f64>, b: &mut [f64]) {
    solve_lower_vec(l, b);
    solve_lower_transpose_vec(l, b);
}

/// Solve `L Lᵀ X = B` in place, column by column.
pub fn chol_solve_mat(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    assert_eq!(b.nrows(), n);
    let ncols = b.ncols();
    let bs = b.as_mut_slice();
    for c in 0..ncols {
        let col = &mut bs[c * n..(c + 1) * n];
        solve_lower_vec(l, col);
        solve_lower_transpose_vec(l, col);
    }
}

/// Solve `L X = B` in place (each column), `L` lower triangular.
pub fn solve_lower_mat(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    assert_eq!(b.nrows(), n);
    let ncols = b.ncols();
    let bs = b.as_mut_slice();
    for c in 0..ncols {
        solve_lower_vec(l, &mut bs[c * n..(c + 1) * n]);
    }
}

/// Smallest eigenvalue of a symmetric matrix (the matrix is symmetrized
/// first to shed roundoff asymmetry).
pub fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &x| a.min(x))
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Largest step `α ∈ (0, 1]`-scale such that `X + α ΔX ⪰ 0`, given the
/// Cholesky factor `L` of `X ≻ 0`.  Returns `f64::INFINITY` when every step
/// keeps the matrix PSD.  Computed from the smallest eigenvalue of
/// `L⁻¹ ΔX L⁻ᵀ`.
pub fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    // P = L⁻¹ ΔX, then Y = L⁻¹ Pᵀ; Yᵀ = L⁻¹ ΔX L⁻ᵀ (symmetric up to
    // roundoff).
    let mut p = dx.clone();
    solve_lower_mat(l, &mut p);
    let mut pt = p.transpose();
    solve_lower_mat(l, &mut pt);
    let lam = sym_min_eig(&pt);
    if lam >= -1e-14 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

/// Dot product of two vectors (fixed order, deterministic).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `‖v‖_∞`.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Frobenius inner product of two symmetric matrices.
pub fn sym_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let sa = a.as_slice();
    let sb = b.as_slice();
    let mut t = 0.0;
    for (x, y) in sa.iter().zip(sb) {
        t += x * y;
    }
    t
}

#[allow(unused)]
pub fn sym_solve_small(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}
