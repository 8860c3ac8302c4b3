//! Sparse semidefinite programs over block-diagonal cones with free variables,
//! and a self-contained primal-dual interior-point solver.
//!
//! # Problem form
//!
//! A program holds `num_free` free (sign-unconstrained) variables `y`, a list
//! of symmetric PSD blocks `Z_0, …, Z_{B-1}` with dimensions `block_dims`, and
//! `rows.len()` affine equality rows.  Row `r` states
//!
//! ```text
//!   Σ_k c_k · y_k  +  Σ_e c_e · Z_{b_e}[i_e, j_e]  =  rhs_r
//! ```
//!
//! where each PSD entry `(b, i, j)` with `i ≥ j` is referenced once (the
//! matrix is symmetric, so the coefficient applies to the entry value, not to
//! an ordered position).  The solver minimizes `obj_free · y` subject to the
//! rows and `Z_b ⪰ 0`; the objective lives on the free variables only.
//!
//! Problems built from exact rational data can carry that data along in
//! [`RationalCopy`]; the float rows are then rounded images of the rational
//! rows and certification code can replay the same constraints exactly.
//!
//! # Solution
//!
//! [`solve`](SdpProblem::solve) runs a Nesterov–Todd scaled Mehrotra
//! predictor-corrector method.  It is single-threaded and deterministic: the
//! same problem and options produce bitwise-identical output.  Statuses:
//!
//! * [`SdpStatus::Optimal`] — converged to the requested tolerance,
//! * [`SdpStatus::Infeasible`] — a dual improving ray certifies primal
//!   infeasibility,
//! * [`SdpStatus::NumericalLimit`] — progress stalled; the best iterate so
//!   far is returned with its achieved residuals.

mod linalg;
mod preprocess;
mod presolve;
mod solve;

pub use linalg::{cholesky_in_place, sym_eigenvalues, sym_min_eig};
pub use preprocess::{select_rows, Preprocessed, RANK_TOL};
pub use solve::{solve_sdp, IterStat, SolveOptions};

use crate::Rat;
use nalgebra::DMatrix;
use std::io::Write as IoWrite;

/// One affine equality row of an [`SdpProblem`], float coefficients.
#[derive(Debug, Clone, Default)]
pub struct SdpRow {
    /// `(free variable index, coefficient)`.
    pub free: Vec<(usize, f64)>,
    /// `(block, i, j, coefficient)` with `i ≥ j`; coefficient of the matrix
    /// entry `Z_b[i, j]` (referenced once; the matrix is symmetric).
    pub psd: Vec<(usize, usize, usize, f64)>,
}

/// One affine equality row in exact rational arithmetic (same shape as
/// [`SdpRow`]).
#[derive(Debug, Clone, Default)]
pub struct RatRow {
    pub free: Vec<(usize, Rat)>,
    pub psd: Vec<(usize, usize, usize, Rat)>,
}

/// Exact master copy of the constraint data, parallel to the float rows.
#[derive(Debug, Clone)]
pub struct RationalCopy {
    pub rows: Vec<RatRow>,
    pub rhs: Vec<Rat>,
}

/// A block-diagonal SDP with free variables.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub num_free: usize,
    pub block_dims: Vec<usize>,
    pub rows: Vec<SdpRow>,
    pub rhs: Vec<f64>,
    /// Objective coefficients on the free variables (minimized).
    pub obj_free: Vec<f64>,
    /// Optional exact copy of rows and right-hand sides.
    pub rational: Option<RationalCopy>,
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Converged: primal/dual residuals and relative gap below tolerance.
    Optimal,
    /// A dual improving ray proves there is no feasible point.
    Infeasible,
    /// The solver could not reach the tolerance; best iterate returned.
    NumericalLimit,
}

/// Result of a solve: the primal/dual iterate plus achieved accuracy.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Free variable values.
    pub y: Vec<f64>,
    /// Primal PSD blocks (with any `eps_shift` added back, so with a shift
    /// `ε > 0` every returned block satisfies `λ_min ≥ ε` up to roundoff).
    pub blocks: Vec<DMatrix<f64>>,
    /// Equality multipliers, indexed like `rows` (zero for rows dropped as
    /// linearly dependent).  For an infeasible problem this is the ray.
    pub lambda: Vec<f64>,
    /// Objective value `obj_free · y`.
    pub objective: f64,
    /// Relative duality gap `|c·y − b·λ| / (1 + |c·y| + |b·λ|)`.
    pub rel_gap: f64,
    /// `‖A(y, z) − b‖_∞ / (1 + ‖b‖_∞)` over all original rows.
    pub eps_aff: f64,
    /// Relative dual residual.
    pub dual_res: f64,
    pub iterations: usize,
    /// Objective/residual trace, one entry per iteration.
    pub trace: Vec<IterStat>,
}

/// Feasibility diagnostics of a point against a problem.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    /// `‖A(y, z) − b‖_∞ / (1 + ‖b‖_∞)`.
    pub eps_aff: f64,
    /// Smallest eigenvalue over all blocks (`+∞` if there are no blocks).
    pub min_eig: f64,
    /// Objective value `obj_free · y`.
    pub objective: f64,
}

/// Errors for malformed problems.  Numerical trouble during a solve is not an
/// error: it is reported through [`SdpStatus`].
#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("invalid SDP: {0}")]
    Invalid(String),
}

impl SdpProblem {
    /// An empty problem with the given shape.
    pub fn new(num_free: usize, block_dims: Vec<usize>) -> Self {
        SdpProblem {
            num_free,
            block_dims,
            rows: Vec::new(),
            rhs: Vec::new(),
            obj_free: vec![0.0; num_free],
            rational: None,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Check shape invariants: index ranges, `i ≥ j`, no duplicate entry
    /// within a row, matching row/rhs lengths, and (when a rational copy is
    /// present) identical sparsity between the float and rational rows.
    pub fn validate(&self) -> Result<(), SdpError> {
        use std::collections::HashSet;
        if self.rhs.len() != self.rows.len() {
            return Err(SdpError::Invalid(format!(
                "{} rows but {} right-hand sides",
                self.rows.len(),
                self.rhs.len()
            )));
        }
        if self.obj_free.len() != self.num_free {
            return Err(SdpError::Invalid(format!(
                "objective length {} does not match {} free variables",
                self.obj_free.len(),
                self.num_free
            )));
        }
        if self.block_dims.iter().any(|&d| d == 0) {
            return Err(SdpError::Invalid("zero-dimensional block".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            let mut seen_free = HashSet::new();
            for &(k, c) in &row.free {
                if k >= self.num_free {
                    return Err(SdpError::Invalid(format!(
                        "row {r}: free index {k} out of range"
                    )));
                }
                if !seen_free.insert(k) {
                    return Err(SdpError::Invalid(format!(
                        "row {r}: duplicate free index {k}"
                    )));
                }
                if !c.is_finite() {
                    return Err(SdpError::Invalid(format!("row {r}: non-finite coefficient")));
                }
            }
            let mut seen_psd = HashSet::new();
            for &(b, i, j, c) in &row.psd {
                if b >= self.block_dims.len() {
                    return Err(SdpError::Invalid(format!("row {r}: block {b} out of range")));
                }
                let d = self.block_dims[b];
                if i >= d || j >= d {
                    return Err(SdpError::Invalid(format!(
                        "row {r}: entry ({i},{j}) out of range for block {b} (dim {d})"
                    )));
                }
                if i < j {
                    return Err(SdpError::Invalid(format!(
                        "row {r}: entry ({i},{j}) must satisfy i ≥ j"
                    )));
                }
                if !seen_psd.insert((b, i, j)) {
                    return Err(SdpError::Invalid(format!(
                        "row {r}: duplicate entry (block {b}, {i}, {j})"
                    )));
                }
                if !c.is_finite() {
                    return Err(SdpError::Invalid(format!("row {r}: non-finite coefficient")));
                }
            }
            if !self.rhs[r].is_finite() {
                return Err(SdpError::Invalid(format!("row {r}: non-finite rhs")));
            }
        }
        if let Some(rc) = &self.rational {
            if rc.rows.len() != self.rows.len() || rc.rhs.len() != self.rhs.len() {
                return Err(SdpError::Invalid(
                    "rational copy has a different number of rows".into(),
                ));
            }
            for (r, (fr, rr)) in self.rows.iter().zip(&rc.rows).enumerate() {
                if fr.free.len() != rr.free.len()
                    || fr.psd.len() != rr.psd.len()
                    || fr
                        .free
                        .iter()
                        .zip(&rr.free)
                        .any(|(&(k, _), &(k2, _))| k != k2)
                    || fr
                        .psd
                        .iter()
                        .zip(&rr.psd)
                        .any(|(&(b, i, j, _), &(b2, i2, j2, _))| (b, i, j) != (b2, i2, j2))
                {
                    return Err(SdpError::Invalid(format!(
                        "rational copy row {r} has different sparsity than the float row"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Value of row `r` at the point `(y, blocks)`.
    pub fn row_value(&self, r: usize, y: &[f64], blocks: &[DMatrix<f64>]) -> f64 {
        let row = &self.rows[r];
        let mut v = 0.0;
        for &(k, c) in &row.free {
            v += c * y[k];
        }
        for &(b, i, j, c) in &row.psd {
            v += c * blocks[b][(i, j)];
        }
        v
    }

    /// `max_r |rhs_r|`.
    pub fn rhs_inf_norm(&self) -> f64 {
        self.rhs.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    /// Residuals and objective of a point: `eps_aff`, the minimum block
    /// eigenvalue, and the objective value.
    pub fn residuals(&self, y: &[f64], blocks: &[DMatrix<f64>]) -> Diagnostics {
        let mut worst = 0.0_f64;
        for r in 0..self.rows.len() {
            worst = worst.max((self.row_value(r, y, blocks) - self.rhs[r]).abs());
        }
        let eps_aff = worst / (1.0 + self.rhs_inf_norm());
        let min_eig = blocks
            .iter()
            .map(|m| sym_min_eig(m))
            .fold(f64::INFINITY, f64::min);
        let objective = self
            .obj_free
            .iter()
            .zip(y)
            .map(|(&c, &v)| c * v)
            .sum::<f64>();
        Diagnostics {
            eps_aff,
            min_eig,
            objective,
        }
    }

    /// Solve the program.  See the module documentation for the algorithm and
    /// [`SolveOptions`] for the knobs.
    pub fn solve(&self, opts: &SolveOptions) -> Result<SdpSolution, SdpError> {
        self.validate()?;
        Ok(solve_sdp(self, opts))
    }

    /// Plain-text dump for debugging: a header (free count, block dims,
    /// objective, rhs) followed by one line per nonzero,
    /// `constraint block row col value`, with the convention that free
    /// variables are "block 0" (entry `(k+1, k+1)`) and PSD block `b` is
    /// printed as block `b+1` with 1-based `(i+1, j+1)`, `i ≥ j`.
    pub fn dump_text<W: IoWrite>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "free {}", self.num_free)?;
        write!(w, "blocks")?;
        for d in &self.block_dims {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
        write!(w, "objective")?;
        for c in &self.obj_free {
            write!(w, " {c:.17e}")?;
        }
        writeln!(w)?;
        write!(w, "rhs")?;
        for b in &self.rhs {
            write!(w, " {b:.17e}")?;
        }
        writeln!(w)?;
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, c) in &row.free {
                writeln!(w, "{} 0 {} {} {c:.17e}", r + 1, k + 1, k + 1)?;
            }
            for &(b, i, j, c) in &row.psd {
                writeln!(w, "{} {} {} {} {c:.17e}", r + 1, b + 1, i + 1, j + 1)?;
            }
        }
        Ok(())
    }
}

/// Length of the packed lower triangle of a `d × d` symmetric matrix.
pub(crate) fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Index of entry `(i, j)` with `i ≥ j` in column-major packed lower-triangle
/// order: `(0,0), (1,0), …, (d-1,0), (1,1), …`.
pub(crate) fn svec_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < d);
    // Column j starts after d + (d-1) + … + (d-j+1) = j(2d - j + 1)/2 entries.
    j * (2 * d - j + 1) / 2 + (i - j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_indexing_is_a_bijection() {
        for d in 1..8 {
            let mut seen = vec![false; svec_len(d)];
            for j in 0..d {
                for i in j..d {
                    let k = svec_index(d, i, j);
                    assert!(!seen[k], "collision at ({i},{j})");
                    seen[k] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let mut p = SdpProblem::new(1, vec![2]);
        p.rows.push(SdpRow {
            free: vec![(0, 1.0)],
            psd: vec![(0, 0, 1, 1.0)], // i < j
        });
        p.rhs.push(0.0);
        assert!(p.validate().is_err());
        p.rows[0].psd = vec![(0, 1, 0, 1.0)];
        assert!(p.validate().is_ok());
        p.rows[0].psd.push((0, 1, 0, 2.0)); // duplicate
        assert!(p.validate().is_err());
    }

    /// `min y  s.t.  [[y, 1], [1, y]] ⪰ 0` — optimum `y* = 1`.
    fn min_y_problem() -> SdpProblem {
        let mut p = SdpProblem::new(1, vec![2]);
        p.obj_free = vec![1.0];
        p.rows = vec![
            SdpRow {
                free: vec![(0, -1.0)],
                psd: vec![(0, 0, 0, 1.0)],
            },
            SdpRow {
                free: vec![],
                psd: vec![(0, 1, 0, 1.0)],
            },
            SdpRow {
                free: vec![(0, -1.0)],
                psd: vec![(0, 1, 1, 1.0)],
            },
        ];
        p.rhs = vec![0.0, 1.0, 0.0];
        p
    }

    #[test]
    fn minimizes_y_on_two_by_two_psd() {
        let p = min_y_problem();
        let sol = p.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.y[0] - 1.0).abs() < 1e-7, "y = {}", sol.y[0]);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        let d = p.residuals(&sol.y, &sol.blocks);
        assert!(d.eps_aff < 1e-8);
        assert!(d.min_eig > -1e-9);
    }

    #[test]
    fn certifies_infeasibility_of_x_as_sum_of_squares() {
        // "x is a sum of squares in R[x]_{≤2}": Gram basis (1, x) with
        // Q_00 = 0, 2 Q_10 = 1, Q_11 = 0 — infeasible.
        let mut p = SdpProblem::new(0, vec![2]);
        p.rows = vec![
            SdpRow {
                free: vec![],
                psd: vec![(0, 0, 0, 1.0)],
            },
            SdpRow {
                free: vec![],
                psd: vec![(0, 1, 0, 2.0)],
            },
            SdpRow {
                free: vec![],
                psd: vec![(0, 1, 1, 1.0)],
            },
        ];
        p.rhs = vec![0.0, 1.0, 0.0];
        let sol = p.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        // The returned multipliers form an improving ray: b·λ > 0 while
        // −Σ λ_r B_r ⪰ −tiny.
        let blam: f64 = sol.lambda.iter().zip(&p.rhs).map(|(&l, &b)| l * b).sum();
        assert!(blam > 0.5, "b·λ = {blam}");
        let mut sray = DMatrix::<f64>::zeros(2, 2);
        for (r, row) in p.rows.iter().enumerate() {
            for &(_, i, j, c) in &row.psd {
                let v = sol.lambda[r] * c / blam;
                if i == j {
                    sray[(i, i)] -= v;
                } else {
                    sray[(i, j)] -= 0.5 * v;
                    sray[(j, i)] -= 0.5 * v;
                }
            }
        }
        assert!(sym_min_eig(&sray) > -1e-6);
    }

    #[test]
    fn eps_shift_keeps_blocks_uniformly_definite() {
        let p = min_y_problem();
        let eps = 1e-4;
        let sol = p
            .solve(&SolveOptions {
                eps_shift: eps,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        for b in &sol.blocks {
            assert!(sym_min_eig(b) >= eps - 1e-9);
        }
        // Z = [[y, 1], [1, y]] with λ_min = y − 1 ≥ ε pushes y* to 1 + ε.
        assert!((sol.y[0] - (1.0 + eps)).abs() < 1e-6, "y = {}", sol.y[0]);
    }

    #[test]
    fn largest_eigenvalue_as_sdp() {
        // min γ  s.t.  γI − Q ⪰ 0  gives γ* = λ_max(Q).
        let n = 6;
        let mut q = DMatrix::<f64>::zeros(n, n);
        let mut seed = 1.0f64;
        for i in 0..n {
            for j in 0..=i {
                seed = (seed * 997.0 + 13.0) % 101.0;
                let v = seed / 101.0 - 0.5;
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        let mut p = SdpProblem::new(1, vec![n]);
        p.obj_free = vec![1.0];
        for i in 0..n {
            for j in 0..=i {
                p.rows.push(SdpRow {
                    free: vec![(0, if i == j { -1.0 } else { 0.0 })],
                    psd: vec![(0, i, j, 1.0)],
                });
                p.rhs.push(-q[(i, j)]);
            }
        }
        let sol = p.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let lam_max = q
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        assert!(
            (sol.objective - lam_max).abs() <= 1e-7 * (1.0 + lam_max.abs()),
            "objective {} vs λ_max {}",
            sol.objective,
            lam_max
        );
    }

    #[test]
    fn weak_duality_along_the_run() {
        for p in [min_y_problem()] {
            let sol = p.solve(&SolveOptions::default()).unwrap();
            for (k, st) in sol.trace.iter().enumerate() {
                assert!(
                    st.primal_obj >= st.dual_obj - 1e-7 * (1.0 + st.primal_obj.abs()),
                    "iterate {k}: primal {} < dual {}",
                    st.primal_obj,
                    st.dual_obj
                );
            }
        }
    }

    #[test]
    fn row_scaling_leaves_solution_unchanged() {
        let p = min_y_problem();
        let base = p.solve(&SolveOptions::default()).unwrap();
        let mut scaled = p.clone();
        for (k, c) in scaled.rows[0].free.iter_mut() {
            let _ = k;
            *c *= 2.0;
        }
        for e in scaled.rows[0].psd.iter_mut() {
            e.3 *= 2.0;
        }
        scaled.rhs[0] *= 2.0;
        let sol = scaled.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.y[0] - base.y[0]).abs() < 1e-8);
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let p = min_y_problem();
        let a = p.solve(&SolveOptions::default()).unwrap();
        let b = p.solve(&SolveOptions::default()).unwrap();
        assert_eq!(a.y[0].to_bits(), b.y[0].to_bits());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
        for (x, y) in a.blocks[0].iter().zip(b.blocks[0].iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn residuals_report_eps_aff() {
        // One row: Z_00 = 1, with ‖b‖_∞ = 1.  Perturbing the entry by 1e-6
        // must report eps_aff = 5e-7.
        let mut p = SdpProblem::new(0, vec![1]);
        p.rows.push(SdpRow {
            free: vec![],
            psd: vec![(0, 0, 0, 1.0)],
        });
        p.rhs.push(1.0);
        let z = DMatrix::from_element(1, 1, 1.0 + 1e-6);
        let d = p.residuals(&[], &[z]);
        assert!((d.eps_aff - 5e-7).abs() < 1e-12);
    }
}
