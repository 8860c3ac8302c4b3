//! Row preprocessing for the interior-point solver: power-of-two row
//! equilibration and rank-revealing selection of a maximal linearly
//! independent subset of the equality rows.
//!
//! Rows are processed in order, as in a row-echelon reduction sweeping top to
//! bottom: each row is orthogonalized against the span of the earlier kept
//! rows and dropped when the residual is below tolerance.  Because a squared
//! residual computed by inner products alone drowns in cancellation noise
//! (f64 noise sits around 1e-16 times the row norm, far above the square of
//! the 1e-11 tolerance), rows whose fast-path residual is suspiciously small
//! are re-checked against an explicitly formed residual vector, which is
//! accurate at the scale the tolerance asks for.  The procedure is
//! deterministic, so exact-arithmetic consumers of the same problem can
//! replay the identical row set.

use super::{svec_index, svec_len, SdpProblem};

/// Relative tolerance below which a row is declared linearly dependent: the
/// row is dropped when the norm of its component orthogonal to the already
/// selected rows is at most `RANK_TOL` times its own norm.
pub const RANK_TOL: f64 = 1e-11;

/// Fast-path threshold on the squared relative residual.  Above it a row is
/// kept outright; below it the decision is delegated to the explicit
/// residual (the fast path cannot be trusted there because of cancellation).
const FLAG_TOL2: f64 = 1e-13;

/// Result of preprocessing.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Original indices of the kept rows, ascending.
    pub kept: Vec<usize>,
    /// Per original row: the power-of-two factor that scales the row's
    /// largest coefficient into `[1, 2)`.  `1.0` for all-zero rows.
    pub scale: Vec<f64>,
}

/// Equilibrate rows by powers of two and select a maximal independent subset.
pub fn select_rows(p: &SdpProblem) -> Preprocessed {
    let m = p.rows.len();
    let scale: Vec<f64> = (0..m).map(|r| row_scale(p, r)).collect();
    if m == 0 {
        return Preprocessed {
            kept: vec![],
            scale,
        };
    }

    // Sparse coordinates of the scaled rows in the joint (free, svec) space.
    // Off-diagonal matrix entries carry 1/√2 so that the Euclidean inner
    // product of coordinates matches the symmetric inner product of rows.
    let nfree = p.num_free;
    let mut blk_off = vec![0usize; p.block_dims.len()];
    let mut acc_len = nfree;
    for (b, &d) in p.block_dims.iter().enumerate() {
        blk_off[b] = acc_len;
        acc_len += svec_len(d);
    }
    let rows_c: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|r| {
            let row = &p.rows[r];
            let s = scale[r];
            let mut v = Vec::with_capacity(row.free.len() + row.psd.len());
            for &(k, c) in &row.free {
                v.push((k, c * s));
            }
            for &(b, i, j, c) in &row.psd {
                let idx = blk_off[b] + svec_index(p.block_dims[b], i, j);
                let w = if i == j {
                    c * s
                } else {
                    c * s * std::f64::consts::FRAC_1_SQRT_2
                };
                v.push((idx, w));
            }
            v
        })
        .collect();

    let mut kept: Vec<usize> = Vec::new();
    // Lower-triangular rows of the factor: kept row t equals
    // Σ_{u ≤ t} l[t][u] q_u over the orthonormal residual directions q_u.
    let mut lrows: Vec<Vec<f64>> = Vec::new();
    let mut dense = vec![0.0f64; acc_len];

    for r in 0..m {
        let norm2: f64 = rows_c[r].iter().map(|&(_, v)| v * v).sum();
        if norm2 == 0.0 {
            continue;
        }
        for &(k, v) in &rows_c[r] {
            dense[k] = v;
        }
        let rank = kept.len();
        // g_t = ⟨row_r, kept_t⟩, then coordinates over q: c = L⁻¹ g.
        let mut cvec = vec![0.0f64; rank];
        for t in 0..rank {
            let mut g = 0.0;
            for &(k, v) in &rows_c[kept[t]] {
                g += dense[k] * v;
            }
            for u in 0..t {
                g -= lrows[t][u] * cvec[u];
            }
            cvec[t] = g / lrows[t][t];
        }
        let proj2: f64 = cvec.iter().map(|&c| c * c).sum();
        let diag2 = norm2 - proj2;

        if diag2 > FLAG_TOL2 * norm2 {
            // Comfortably independent.
            let mut lrow = cvec;
            lrow.push(diag2.sqrt());
            lrows.push(lrow);
            kept.push(r);
        } else {
            // Suspiciously small residual: form it explicitly.  Coordinates
            // over the kept rows solve Lᵀ x = c.
            let mut x = cvec.clone();
            for t in (0..rank).rev() {
                let mut v = x[t];
                for u in t + 1..rank {
                    v -= lrows[u][t] * x[u];
                }
                x[t] = v / lrows[t][t];
            }
            let mut res = dense.clone();
            for t in 0..rank {
                let xt = x[t];
                if xt != 0.0 {
                    for &(k, v) in &rows_c[kept[t]] {
                        res[k] -= xt * v;
                    }
                }
            }
            let res_norm2: f64 = res.iter().map(|&v| v * v).sum();
            if res_norm2 > (RANK_TOL * RANK_TOL) * norm2 {
                let mut lrow = cvec;
                lrow.push(res_norm2.sqrt());
                lrows.push(lrow);
                kept.push(r);
            }
            // else: dependent, dropped.
        }
        for &(k, _) in &rows_c[r] {
            dense[k] = 0.0;
        }
    }
    Preprocessed { kept, scale }
}

fn row_scale(p: &SdpProblem, r: usize) -> f64 {
    let row = &p.rows[r];
    let mut maxabs = 0.0f64;
    for &(_, c) in &row.free {
        maxabs = maxabs.max(c.abs());
    }
    for &(_, _, _, c) in &row.psd {
        maxabs = maxabs.max(c.abs());
    }
    if maxabs == 0.0 || !maxabs.is_finite() {
        return 1.0;
    }
    let mut s = 2f64.powi(-(maxabs.log2().floor() as i32));
    while maxabs * s >= 2.0 {
        s *= 0.5;
    }
    while maxabs * s < 1.0 {
        s *= 2.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SdpRow;

    fn row(free: Vec<(usize, f64)>, psd: Vec<(usize, usize, usize, f64)>) -> SdpRow {
        SdpRow { free, psd }
    }

    #[test]
    fn duplicate_and_zero_rows_are_dropped() {
        let mut p = SdpProblem::new(2, vec![2]);
        p.rows = vec![
            row(vec![(0, 1.0)], vec![(0, 0, 0, 1.0)]),
            row(vec![(1, 3.0)], vec![(0, 1, 0, -2.0)]),
            // 2 × row 0 + row 1: dependent
            row(vec![(0, 2.0), (1, 3.0)], vec![(0, 0, 0, 2.0), (0, 1, 0, -2.0)]),
            // zero row
            row(vec![], vec![]),
            row(vec![], vec![(0, 1, 1, 5.0)]),
        ];
        p.rhs = vec![0.0; 5];
        let pre = select_rows(&p);
        assert_eq!(pre.kept, vec![0, 1, 4]);
    }

    #[test]
    fn scales_are_powers_of_two_into_unit_range() {
        let mut p = SdpProblem::new(1, vec![1]);
        p.rows = vec![
            row(vec![(0, 0.3)], vec![]),
            row(vec![(0, 1.0)], vec![(0, 0, 0, 1000.0)]),
            row(vec![], vec![(0, 0, 0, 1.0)]),
        ];
        p.rhs = vec![0.0; 3];
        let pre = select_rows(&p);
        for (r, &s) in pre.scale.iter().enumerate() {
            assert!(s.log2().fract() == 0.0, "row {r}: {s} not a power of two");
            let maxabs: f64 = p.rows[r]
                .free
                .iter()
                .map(|&(_, c)| c.abs())
                .chain(p.rows[r].psd.iter().map(|&(_, _, _, c)| c.abs()))
                .fold(0.0, f64::max);
            let scaled = maxabs * s;
            assert!((1.0..2.0).contains(&scaled), "row {r}: {scaled}");
        }
    }

    #[test]
    fn near_dependent_rows_survive_above_tolerance() {
        // Rows differing by a relative 1e-6 (fast path) and 1e-9 (explicit
        // recheck territory) are both far above RANK_TOL and must be kept.
        let mut p = SdpProblem::new(3, vec![1]);
        p.rows = vec![
            row(vec![(0, 1.0), (1, 1.0)], vec![]),
            row(vec![(0, 1.0), (1, 1.0 + 1e-6)], vec![]),
            row(vec![(0, 1.0), (1, 1.0), (2, 1e-9)], vec![]),
        ];
        p.rhs = vec![0.0; 3];
        let pre = select_rows(&p);
        assert_eq!(pre.kept, vec![0, 1, 2]);
    }

    #[test]
    fn exact_duplicate_among_near_dependent_rows_is_dropped() {
        let mut p = SdpProblem::new(3, vec![1]);
        p.rows = vec![
            row(vec![(0, 1.0), (1, 1.0)], vec![]),
            row(vec![(0, 1.0), (1, 1.0 + 1e-7)], vec![]),
            row(vec![(0, 1.0), (1, 1.0)], vec![]), // duplicate of row 0
        ];
        p.rhs = vec![0.0; 3];
        let pre = select_rows(&p);
        assert_eq!(pre.kept, vec![0, 1]);
    }
}
