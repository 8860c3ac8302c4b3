//! Primal-dual interior-point solver: Nesterov–Todd scaling with a Mehrotra
//! predictor-corrector, free variables eliminated through a second Schur
//! complement.
//!
//! The working problem is
//!
//! ```text
//!   minimize    c · y
//!   subject to  A_y y + A_z z = b,     mat(z) = (Z_0, …) ⪰ 0,
//! ```
//!
//! with dual  `maximize b·λ  s.t.  A_yᵀ λ = c,  S = −mat(A_zᵀ λ) ⪰ 0`.
//! All state lives in plain matrices; svec packing only fixes index
//! conventions.  Everything is single-threaded and runs in a fixed order, so
//! repeated solves of the same problem are bitwise identical.

use super::linalg::{
    chol_solve_mat, chol_solve_vec, cholesky_in_place, dot, inf_norm, max_step, sym_inner,
    sym_min_eig,
};
use super::preprocess::select_rows;
use super::presolve::presolve_free_only;
use super::{SdpProblem, SdpRow, SdpSolution, SdpStatus};
use nalgebra::DMatrix;

/// Knobs for [`solve_sdp`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Substitute `Z = Z' + ε I` and solve for `Z' ⪰ 0`, so every returned
    /// block satisfies `λ_min ≥ ε` up to roundoff.  `0.0` disables the shift.
    pub eps_shift: f64,
    /// Relative tolerance on primal/dual residuals and duality gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
    /// When a solve stalls with clean residuals but an open duality gap
    /// (the signature of an optimal face without strict complementarity),
    /// re-solve restricted to the face spanned by the primal blocks' large
    /// eigenvectors and accept the result only after verifying primal
    /// feasibility, dual feasibility, and the gap against the original data.
    pub face_polish: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_shift: 0.0,
            tol: 1e-7,
            max_iter: 120,
            verbose: false,
            face_polish: true,
        }
    }
}

/// Per-iteration record: objectives, residuals and barrier parameter at the
/// iterate (entry 0 is the initial point).
#[derive(Debug, Clone, Copy)]
pub struct IterStat {
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub mu: f64,
}

const FRACTION_TO_BOUNDARY: f64 = 0.98;

pub fn solve_sdp(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let sol = solve_ipm(p, opts);
    // A stall with clean residuals but an open gap is the signature of an
    // optimal face hit without strict complementarity: the primal blocks have
    // settled on their ranks, but dead eigenvalue pairs (both sides → 0)
    // strangle the step sizes before the gap closes.  Restricting to the
    // face turns the same optimum into a strictly complementary one, which
    // the interior-point method then polishes to full accuracy.  Every
    // candidate is re-verified against the *original* data, so a wrong face
    // guess degrades to the stalled answer instead of an unsound "Optimal".
    if !opts.face_polish
        || opts.eps_shift != 0.0
        || sol.status != SdpStatus::NumericalLimit
        || !(sol.eps_aff <= 10.0 * opts.tol)
        || !(sol.dual_res <= 10.0 * opts.tol)
    {
        return sol;
    }
    for tau in [1e-2, 1e-4, 1e-6] {
        if let Some(polished) = face_polish(p, opts, &sol, tau) {
            if opts.verbose {
                eprintln!("  face polish at tau {tau:.0e} verified; objective {:.9}", polished.objective);
            }
            return polished;
        }
    }
    sol
}

/// One face-restriction attempt.  Each block is restricted to the span of
/// the stalled primal block's eigenvectors with relative eigenvalue above
/// `tau`; the restricted program keeps the row order, so the multipliers
/// carry over one-to-one.  Returns the expanded solution only if the pair
/// passes primal feasibility, dual feasibility (including positive
/// semidefiniteness of the original dual slack), and the duality gap at the
/// caller's tolerance, all measured on the original problem.
fn face_polish(
    p: &SdpProblem,
    opts: &SolveOptions,
    sol: &SdpSolution,
    tau: f64,
) -> Option<SdpSolution> {
    let nblocks = p.block_dims.len();

    let mut bases: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
    let mut restricted_any = false;
    for bk in 0..nblocks {
        let d = p.block_dims[bk];
        let eig = sol.blocks[bk].clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let mut rank = order
            .iter()
            .filter(|&&i| eig.eigenvalues[i] > tau * lmax)
            .count();
        rank = rank.max(1);
        if rank < d {
            restricted_any = true;
        }
        let mut pmat = DMatrix::zeros(d, rank);
        for (c, &i) in order[..rank].iter().enumerate() {
            pmat.set_column(c, &eig.eigenvectors.column(i));
        }
        bases.push(pmat);
    }
    if !restricted_any {
        return None;
    }
    if opts.verbose {
        let dims: Vec<String> = (0..nblocks)
            .map(|bk| format!("{}->{}", p.block_dims[bk], bases[bk].ncols()))
            .collect();
        eprintln!("  face polish at tau {tau:.0e}: blocks {}", dims.join(" "));
    }

    // Restricted problem: same rows, same free part, blocks congruent by the
    // face bases.  Entry convention: a stored `(i, j, c)` with `i > j`
    // contributes `c/2` to both off-diagonal positions, so the restricted
    // coefficient for `i >= j` is the matrix entry (diagonal) or twice it.
    let mut rp = SdpProblem {
        num_free: p.num_free,
        block_dims: bases.iter().map(|b| b.ncols()).collect(),
        rows: Vec::with_capacity(p.rows.len()),
        rhs: p.rhs.clone(),
        obj_free: p.obj_free.clone(),
        rational: None,
    };
    for row in &p.rows {
        let mut psd: Vec<(usize, usize, usize, f64)> = Vec::new();
        let mut touched: Vec<usize> = row.psd.iter().map(|&(bk, _, _, _)| bk).collect();
        touched.sort_unstable();
        touched.dedup();
        for &bk in &touched {
            let d = p.block_dims[bk];
            let mut f = DMatrix::zeros(d, d);
            for &(b2, i, j, c) in &row.psd {
                if b2 != bk {
                    continue;
                }
                if i == j {
                    f[(i, i)] += c;
                } else {
                    f[(i, j)] += 0.5 * c;
                    f[(j, i)] += 0.5 * c;
                }
            }
            let fr = bases[bk].transpose() * f * &bases[bk];
            let r = fr.nrows();
            for i in 0..r {
                for j in 0..=i {
                    let c = if i == j { fr[(i, i)] } else { 2.0 * fr[(i, j)] };
                    if c != 0.0 {
                        psd.push((bk, i, j, c));
                    }
                }
            }
        }
        rp.rows.push(SdpRow {
            free: row.free.clone(),
            psd,
        });
    }

    let mut iopts = opts.clone();
    iopts.face_polish = false;
    let isol = solve_ipm(&rp, &iopts);
    if isol.status != SdpStatus::Optimal {
        return None;
    }

    // Expand and verify against the original data.
    let z: Vec<DMatrix<f64>> = (0..nblocks)
        .map(|bk| &bases[bk] * &isol.blocks[bk] * bases[bk].transpose())
        .collect();
    let diag = p.residuals(&isol.y, &z);
    let tol = opts.tol;
    if !(diag.eps_aff <= tol) || !(diag.min_eig >= -tol) {
        return None;
    }

    let cnorm = p
        .obj_free
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut aty = vec![0.0; p.num_free];
    let mut smat: Vec<DMatrix<f64>> = p
        .block_dims
        .iter()
        .map(|&d| DMatrix::zeros(d, d))
        .collect();
    for (r, row) in p.rows.iter().enumerate() {
        let l = isol.lambda[r];
        if l == 0.0 {
            continue;
        }
        for &(k, v) in &row.free {
            aty[k] += v * l;
        }
        for &(bk, i, j, c) in &row.psd {
            if i == j {
                smat[bk][(i, i)] -= c * l;
            } else {
                smat[bk][(i, j)] -= 0.5 * c * l;
                smat[bk][(j, i)] -= 0.5 * c * l;
            }
        }
    }
    let dlin = (0..p.num_free)
        .map(|k| (p.obj_free[k] - aty[k]).abs())
        .fold(0.0f64, f64::max)
        / (1.0 + cnorm);
    let smin = smat
        .iter()
        .map(sym_min_eig)
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let dres = dlin.max(-smin / (1.0 + cnorm));
    if !(dres <= tol) {
        return None;
    }

    let obj_p = diag.objective;
    let obj_d: f64 = p
        .rhs
        .iter()
        .zip(&isol.lambda)
        .map(|(&b, &l)| b * l)
        .sum();
    let gap = (obj_p - obj_d).abs() / (1.0 + obj_p.abs() + obj_d.abs());
    if !(gap <= tol) {
        return None;
    }

    let mut trace = sol.trace.clone();
    trace.extend(isol.trace.iter().cloned());
    Some(SdpSolution {
        status: SdpStatus::Optimal,
        y: isol.y.clone(),
        blocks: z,
        lambda: isol.lambda.clone(),
        objective: obj_p,
        rel_gap: gap,
        eps_aff: diag.eps_aff,
        dual_res: dres,
        iterations: sol.iterations + isol.iterations,
        trace,
    })
}

fn solve_ipm(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let pre = select_rows(p);
    let dims = p.block_dims.clone();
    let nblocks = dims.len();
    let eps = opts.eps_shift;

    // Scaled kept rows.
    let m_kept = pre.kept.len();
    let mut kept_free: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m_kept);
    let mut kept_psd: Vec<Vec<(usize, usize, usize, f64)>> = Vec::with_capacity(m_kept);
    let mut kept_b = Vec::with_capacity(m_kept);
    for (&o, _) in pre.kept.iter().zip(0..) {
        let s = pre.scale[o];
        let row = &p.rows[o];
        kept_free.push(row.free.iter().map(|&(k, c)| (k, c * s)).collect());
        kept_psd.push(
            row.psd
                .iter()
                .map(|&(bk, i, j, c)| (bk, i, j, c * s))
                .collect(),
        );
        let diag_sum: f64 = row
            .psd
            .iter()
            .filter(|&&(_, i, j, _)| i == j)
            .map(|&(_, _, _, c)| c)
            .sum();
        kept_b.push(s * (p.rhs[o] - eps * diag_sum));
    }

    // Remove hidden free-only row combinations so the Schur complement is
    // nonsingular at every iterate; solutions are mapped back at the end.
    let ps = presolve_free_only(kept_free, kept_psd, kept_b, &p.obj_free, p.num_free);
    let m = ps.b.len();
    let f = ps.cols.len();
    if opts.verbose && ps.is_active() {
        eprintln!(
            "presolve: rows {} -> {}, free {} -> {}",
            m_kept,
            m,
            p.num_free,
            f
        );
    }
    let rows_free = &ps.rows_free;
    let rows_psd = &ps.rows_psd;
    let b = &ps.b;
    let c = &ps.c;
    if std::env::var_os("LOGSOB_PRESOLVE_CHECK").is_some() && ps.is_active() {
        // Random-point equivalence check: for arbitrary (y_red, Z), every
        // surviving reduced row must evaluate exactly like its original row
        // at the expanded point, and every committed combination must sum to
        // zero residual over the original rows.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let y_red: Vec<f64> = (0..f).map(|_| rnd()).collect();
        let zblks: Vec<DMatrix<f64>> = dims
            .iter()
            .map(|&dd| {
                let mut mt = DMatrix::<f64>::zeros(dd, dd);
                for i in 0..dd {
                    for j in 0..=i {
                        let v = rnd();
                        mt[(i, j)] = v;
                        mt[(j, i)] = v;
                    }
                }
                mt
            })
            .collect();
        let y_full = ps.expand_y(&y_red);
        // Original kept-row residuals at the expanded point.
        let rho: Vec<f64> = pre
            .kept
            .iter()
            .map(|&o| {
                let s = pre.scale[o];
                let row = &p.rows[o];
                let mut v: f64 =
                    row.free.iter().map(|&(k, cf)| cf * s * y_full[k]).sum();
                for &(bk, i, j, cf) in &row.psd {
                    let w = if i == j { 1.0 } else { 1.0 };
                    v += cf * s * zblks[bk][(i, j)] * w;
                }
                v - pre.scale[o] * p.rhs[o]
            })
            .collect();
        // Reduced-row residuals at the reduced point.
        for (slot, &orig_kept) in ps.slot_of_ipm.iter().enumerate() {
            let mut v: f64 = ps.rows_free[slot]
                .iter()
                .map(|&(k, cf)| cf * y_red[k])
                .sum();
            for &(bk, i, j, cf) in &ps.rows_psd[slot] {
                v += cf * zblks[bk][(i, j)];
            }
            let diff = (v - ps.b[slot]) - rho[orig_kept];
            if diff.abs() > 1e-9 {
                eprintln!(
                    "PRESOLVE-CHECK surviving slot {slot} (kept {orig_kept}): reduced {v:.6e} vs original {:.6e}, diff {diff:.3e}",
                    rho[orig_kept] + ps.b[slot]
                );
            }
        }
        for (j, u) in ps.combos.iter().enumerate() {
            let tot: f64 = u.iter().zip(&rho).map(|(&uc, &rr)| uc * rr).sum();
            if tot.abs() > 1e-9 {
                eprintln!("PRESOLVE-CHECK combo {j}: residual sum {tot:.3e}");
            }
        }
        eprintln!("PRESOLVE-CHECK done");
    }
    let bnorm = inf_norm(b);
    let cnorm = inf_norm(c);
    let nu: f64 = dims.iter().sum::<usize>() as f64;

    let mut rows_by_block: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
    for (r, row) in rows_psd.iter().enumerate() {
        let mut last = usize::MAX;
        for &(bk, _, _, _) in row {
            if bk != last {
                if !rows_by_block[bk].last().is_some_and(|&x| x == r) {
                    rows_by_block[bk].push(r);
                }
                last = bk;
            }
        }
    }

    let finish = |status: SdpStatus,
                  y_red: Vec<f64>,
                  z: &[DMatrix<f64>],
                  lam_ipm: &[f64],
                  dual_res: f64,
                  rel_gap: f64,
                  iters: usize,
                  trace: Vec<IterStat>| {
        let blocks: Vec<DMatrix<f64>> = z
            .iter()
            .map(|zb| {
                let mut out = zb.clone();
                for i in 0..out.nrows() {
                    out[(i, i)] += eps;
                }
                out
            })
            .collect();
        let y = ps.expand_y(&y_red);
        // Stationarity target for the multiplier reconstruction: the
        // objective for a solution, zero for an improving ray.
        let lam_slots = if status == SdpStatus::Infeasible {
            ps.expand_lam(lam_ipm, None)
        } else {
            ps.expand_lam(lam_ipm, Some(&p.obj_free))
        };
        let mut lambda = vec![0.0; p.rows.len()];
        for (k, &o) in pre.kept.iter().enumerate() {
            lambda[o] = lam_slots[k] * pre.scale[o];
        }
        let diag = p.residuals(&y, &blocks);
        if opts.verbose {
            let mut kept_pos = vec![usize::MAX; p.rows.len()];
            for (k, &o) in pre.kept.iter().enumerate() {
                kept_pos[o] = k;
            }
            let live: std::collections::HashSet<usize> =
                ps.slot_of_ipm.iter().copied().collect();
            let mut viols: Vec<(f64, usize, &str)> = (0..p.rows.len())
                .map(|o| {
                    let r = (p.row_value(o, &y, &blocks) - p.rhs[o]).abs();
                    let kind = if kept_pos[o] == usize::MAX {
                        "pre-dropped"
                    } else if !live.contains(&kept_pos[o]) {
                        "presolve-removed"
                    } else {
                        "live"
                    };
                    (r, o, kind)
                })
                .collect();
            viols.sort_by(|a, b| b.0.total_cmp(&a.0));
            for (r, o, kind) in viols.iter().take(8) {
                eprintln!("  residual row {o:4} |r|={r:.3e}  [{kind}]");
            }
        }
        SdpSolution {
            status,
            y,
            blocks,
            lambda,
            objective: diag.objective,
            rel_gap,
            eps_aff: diag.eps_aff,
            dual_res,
            iterations: iters,
            trace,
        }
    };

    if m == 0 {
        // No effective constraints: any PSD point is feasible; the objective
        // is unbounded unless it is identically zero.
        let z: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::identity(d, d)).collect();
        let status = if cnorm == 0.0 {
            SdpStatus::Optimal
        } else {
            SdpStatus::NumericalLimit
        };
        return finish(status, vec![0.0; f], &z, &[], 0.0, 0.0, 0, vec![]);
    }

    // Dense A_y (m × f) for the free-variable Schur complement.
    let ay = {
        let mut a = DMatrix::<f64>::zeros(m, f);
        for (r, row) in rows_free.iter().enumerate() {
            for &(k, v) in row {
                a[(r, k)] = v;
            }
        }
        a
    };

    // Constant normal matrix A Aᵀ of the full row map over the coordinates
    // (y, lower-triangular Z entries), factored once.  Each search direction
    // is projected back onto its linearized equality system: the recovery of
    // `dz` from the scaled dual step multiplies the Schur-solve error by
    // `‖W‖²`, which grows like `1/μ`, and without the projection the primal
    // residual bottoms out early and then *rises* as the barrier shrinks.
    // After the presolve the rows are linearly independent, so the normal
    // matrix is comfortably positive definite.
    let proj = {
        let mut g = &ay * ay.transpose();
        let mut by_pos: std::collections::BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> =
            std::collections::BTreeMap::new();
        for (r, row) in rows_psd.iter().enumerate() {
            for &(bk, i, j, v) in row {
                by_pos.entry((bk, i, j)).or_default().push((r, v));
            }
        }
        for list in by_pos.values() {
            for (a, &(ra, va)) in list.iter().enumerate() {
                for &(rb, vb) in &list[a..] {
                    g[(ra, rb)] += va * vb;
                    if ra != rb {
                        g[(rb, ra)] += va * vb;
                    }
                }
            }
        }
        let gd = (0..m).fold(0.0f64, |a, i| a.max(g[(i, i)]));
        factor_with_jitter(&g, gd)
    };

    // Initial point.
    let eta_p = 1.0 + bnorm;
    let eta_d = 1.0 + cnorm;
    let mut y = vec![0.0; f];
    let mut lam = vec![0.0; m];
    let mut z: Vec<DMatrix<f64>> = dims
        .iter()
        .map(|&d| DMatrix::identity(d, d) * eta_p)
        .collect();
    let mut s: Vec<DMatrix<f64>> = dims
        .iter()
        .map(|&d| DMatrix::identity(d, d) * eta_d)
        .collect();

    let mut trace: Vec<IterStat> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<DMatrix<f64>>, Vec<f64>, f64, f64)> = None;
    let mut mu_prev = f64::INFINITY;
    let mut stall_mu = 0usize;
    let mut stall_step = 0usize;
    let mut status = SdpStatus::NumericalLimit;
    let mut iters = 0usize;
    let mut final_dres = f64::INFINITY;
    let mut prev_mu = f64::INFINITY;
    let mut mu_stalls = 0usize;
    let mut final_gap = f64::INFINITY;

    for iter in 0..=opts.max_iter {
        iters = iter;
        // ---- residuals ------------------------------------------------
        let rp: Vec<f64> = (0..m)
            .map(|r| {
                let mut v = b[r];
                for &(k, cf) in &rows_free[r] {
                    v -= cf * y[k];
                }
                for &(bk, i, j, cf) in &rows_psd[r] {
                    v -= cf * z[bk][(i, j)];
                }
                v
            })
            .collect();
        let atl = mat_adjoint(&dims, &rows_psd, &lam);
        let rd_free: Vec<f64> = {
            let mut acc = vec![0.0; f];
            for (r, row) in rows_free.iter().enumerate() {
                let l = lam[r];
                if l != 0.0 {
                    for &(k, v) in row {
                        acc[k] += v * l;
                    }
                }
            }
            (0..f).map(|k| c[k] - acc[k]).collect()
        };
        let rd_psd: Vec<DMatrix<f64>> = (0..nblocks).map(|bk| -&s[bk] - &atl[bk]).collect();

        let obj_p = dot(&c, &y);
        let obj_d = dot(&b, &lam);
        let mut zs = 0.0;
        for bk in 0..nblocks {
            zs += sym_inner(&z[bk], &s[bk]);
        }
        let mu = if nu > 0.0 { zs / nu } else { 0.0 };
        let pres = inf_norm(&rp) / (1.0 + bnorm);
        let dres = {
            let mut worst = inf_norm(&rd_free);
            for rd in &rd_psd {
                worst = worst.max(rd.abs().max());
            }
            worst / (1.0 + cnorm)
        };
        let gap = (obj_p - obj_d).abs() / (1.0 + obj_p.abs() + obj_d.abs());
        trace.push(IterStat {
            primal_obj: obj_p,
            dual_obj: obj_d,
            primal_res: pres,
            dual_res: dres,
            mu,
        });
        if opts.verbose {
            let ynorm = inf_norm(&y);
            let znorm = z.iter().map(|zb| zb.abs().max()).fold(0.0f64, f64::max);
            let snorm = s.iter().map(|sb| sb.abs().max()).fold(0.0f64, f64::max);
            let lnorm = inf_norm(&lam);
            eprintln!(
                "iter {iter:3}  obj {obj_p:+.9e}  dual {obj_d:+.9e}  pres {pres:.2e}  dres {dres:.2e}  mu {mu:.2e}  |y| {ynorm:.1e} |z| {znorm:.1e} |s| {snorm:.1e} |lam| {lnorm:.1e}"
            );
        }
        if !pres.is_finite() || !dres.is_finite() || !mu.is_finite() {
            break;
        }
        // Once the barrier parameter stops shrinking the scaled directions
        // are pure roundoff; the best iterate so far is all we will get.
        if mu > 0.5 * prev_mu && mu < 1e-10 {
            mu_stalls += 1;
            if mu_stalls >= 2 {
                break;
            }
        } else {
            mu_stalls = 0;
        }
        prev_mu = mu;
        let score = pres.max(dres).max(gap);
        if best.as_ref().is_none_or(|(bs, ..)| score < *bs) {
            best = Some((score, y.clone(), z.clone(), lam.clone(), dres, gap));
        }
        final_dres = dres;
        final_gap = gap;

        // ---- convergence ----------------------------------------------
        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol {
            status = SdpStatus::Optimal;
            return finish(status, y, &z, &lam, dres, gap, iters, trace);
        }

        // ---- infeasibility: dual improving ray ------------------------
        let bl = obj_d;
        if bl > 1e-10 * (1.0 + inf_norm(&lam) * (1.0 + bnorm)) {
            let lhat_norm = inf_norm(&lam) / bl;
            let ray_free = rd_free
                .iter()
                .zip(c)
                .map(|(&rdk, &ck)| (ck - rdk) / bl)
                .fold(0.0f64, |a, x| a.max(x.abs()));
            if ray_free <= 1e-9 * (1.0 + lhat_norm) {
                let min_ray = atl
                    .iter()
                    .map(|a| sym_min_eig(&(-a / bl)))
                    .fold(f64::INFINITY, f64::min);
                if min_ray >= -1e-9 * (1.0 + lhat_norm) {
                    let lam_ray: Vec<f64> = lam.iter().map(|&v| v / bl).collect();
                    status = SdpStatus::Infeasible;
                    return finish(status, y, &z, &lam_ray, dres, gap, iters, trace);
                }
            }
        }
        if iter == opts.max_iter {
            break;
        }

        // ---- Nesterov–Todd scaling ------------------------------------
        let mut scal = Vec::with_capacity(nblocks);
        let mut scaling_ok = true;
        for bk in 0..nblocks {
            match nt_scaling(&z[bk], &s[bk]) {
                Some(sc) => scal.push(sc),
                None => {
                    scaling_ok = false;
                    break;
                }
            }
        }
        if !scaling_ok {
            break;
        }

        // ---- Schur complement M = A_z D A_zᵀ --------------------------
        let mut mmat = DMatrix::<f64>::zeros(m, m);
        for bk in 0..nblocks {
            let d = dims[bk];
            let w = &scal[bk].w;
            let rlist = &rows_by_block[bk];
            let mut fmat = DMatrix::<f64>::zeros(d, d);
            let mut btmp = DMatrix::<f64>::zeros(d, d);
            let mut tmp = DMatrix::<f64>::zeros(d, d);
            for (pos, &r) in rlist.iter().enumerate() {
                let entries: Vec<(usize, usize, f64)> = rows_psd[r]
                    .iter()
                    .filter(|&&(bb, _, _, _)| bb == bk)
                    .map(|&(_, i, j, cf)| (i, j, cf))
                    .collect();
                build_f(w, &entries, &mut fmat, &mut btmp, &mut tmp);
                for &sr in &rlist[pos..] {
                    let mut val = 0.0;
                    for &(bb, i, j, cf) in &rows_psd[sr] {
                        if bb == bk {
                            val += cf * fmat[(i, j)];
                        }
                    }
                    mmat[(r, sr)] += val;
                    if sr != r {
                        mmat[(sr, r)] += val;
                    }
                }
            }
        }
        // Proximal regularization: linear combinations of equality rows can
        // cancel in the PSD coordinates while remaining independent through
        // the free columns (common for structured programs), which makes M
        // exactly singular even though the full KKT system is nonsingular.
        // Factoring M + ρI (and S_f + δI below) keeps the two-stage
        // elimination stable; iterative refinement against the exact,
        // unregularized system restores full accuracy.
        let max_diag = (0..m).fold(0.0f64, |a, i| a.max(mmat[(i, i)]));
        let reg = (1.0 + max_diag) * 1e-11;
        let mreg = {
            let mut t = mmat.clone();
            for i in 0..m {
                t[(i, i)] += reg;
            }
            t
        };
        let lm = match factor_with_jitter(&mreg, max_diag) {
            Some(l) => l,
            None => break,
        };

        // Free-variable Schur complement: X = (M+ρI)⁻¹ A_y, S_f = A_yᵀ X.
        let (xmat, lsf) = if f > 0 {
            let mut x = ay.clone();
            chol_solve_mat(&lm, &mut x);
            let mut sf = ay.transpose() * &x;
            let sfd = (0..f).fold(0.0f64, |a, i| a.max(sf[(i, i)]));
            let regf = (1.0 + sfd) * 1e-11;
            for i in 0..f {
                sf[(i, i)] += regf;
            }
            match factor_with_jitter(&sf, sfd) {
                Some(l) => (x, Some(l)),
                None => break,
            }
        } else {
            (DMatrix::zeros(m, 0), None)
        };

        // KKT solve for a given complementarity right-hand side.  The
        // regularized two-stage factorization is a preconditioner; iterative
        // refinement against the exact KKT matrix
        //
        //   [ M    A_y ] [dλ]   [gv ]
        //   [ A_yᵀ  0  ] [dy] = [rdf]
        //
        // recovers the unregularized solution to near machine precision.
        let solve_kkt = |gv: &[f64], rdf: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let raw = |gv: &[f64], rdf: &[f64]| -> (Vec<f64>, Vec<f64>) {
                let mut u1 = gv.to_vec();
                chol_solve_vec(&lm, &mut u1);
                if f == 0 {
                    return (u1, vec![]);
                }
                let mut rhs_y = vec![0.0; f];
                for k in 0..f {
                    let mut v = -rdf[k];
                    for r in 0..m {
                        v += ay[(r, k)] * u1[r];
                    }
                    rhs_y[k] = v;
                }
                chol_solve_vec(lsf.as_ref().unwrap(), &mut rhs_y);
                let dy = rhs_y;
                let mut dl = u1;
                for r in 0..m {
                    let mut v = 0.0;
                    for k in 0..f {
                        v += xmat[(r, k)] * dy[k];
                    }
                    dl[r] -= v;
                }
                (dl, dy)
            };
            let residual = |dl: &[f64], dy: &[f64]| -> (Vec<f64>, Vec<f64>) {
                let mut r1 = vec![0.0; m];
                for r in 0..m {
                    let mut v = gv[r];
                    for t in 0..m {
                        v -= mmat[(r, t)] * dl[t];
                    }
                    for k in 0..f {
                        v -= ay[(r, k)] * dy[k];
                    }
                    r1[r] = v;
                }
                let mut r2 = vec![0.0; f];
                for k in 0..f {
                    let mut v = rdf[k];
                    for r in 0..m {
                        v -= ay[(r, k)] * dl[r];
                    }
                    r2[k] = v;
                }
                (r1, r2)
            };
            let scale = 1.0 + inf_norm(gv).max(inf_norm(rdf));
            let (mut dl, mut dy) = raw(gv, rdf);
            let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
            let mut prev = f64::INFINITY;
            for _pass in 0..8 {
                let (r1, r2) = residual(&dl, &dy);
                let rn = inf_norm(&r1).max(inf_norm(&r2));
                if best.as_ref().is_none_or(|(b, ..)| rn < *b) {
                    best = Some((rn, dl.clone(), dy.clone()));
                }
                if rn <= 1e-13 * scale || rn >= 0.5 * prev {
                    break;
                }
                prev = rn;
                let (cl, cy) = raw(&r1, &r2);
                for (a, b) in dl.iter_mut().zip(&cl) {
                    *a += b;
                }
                for (a, b) in dy.iter_mut().zip(&cy) {
                    *a += b;
                }
            }
            match best {
                Some((_, bl, by)) => (bl, by),
                None => (dl, dy),
            }
        };

        // Direction from a complementarity target RC (matrices per block).
        let direction = |rc: &[DMatrix<f64>]| -> Direction {
            let v: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|bk| {
                    let w = &scal[bk].w;
                    rc[bk].clone() - w * (&rd_psd[bk] * w)
                })
                .collect();
            let gv: Vec<f64> = (0..m)
                .map(|r| {
                    let mut val = rp[r];
                    for &(bk, i, j, cf) in &rows_psd[r] {
                        val -= cf * v[bk][(i, j)];
                    }
                    val
                })
                .collect();
            let (dl, dy) = solve_kkt(&gv, &rd_free);
            let dsl = mat_adjoint(&dims, &rows_psd, &dl);
            let ds: Vec<DMatrix<f64>> =
                (0..nblocks).map(|bk| &rd_psd[bk] - &dsl[bk]).collect();
            let dz: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|bk| {
                    let w = &scal[bk].w;
                    &rc[bk] - w * (&ds[bk] * w)
                })
                .collect();
            let mut dir = Direction { dy, dl, dz, ds };
            // Put the primal step exactly back on `A_y dy + A_z dz = rp`
            // (minimum-norm correction through the prefactored normal
            // matrix); the dual step already satisfies its equations to
            // machine precision by construction.
            if let Some(lg) = &proj {
                let mut rho = vec![0.0; m];
                for r in 0..m {
                    let mut v = rp[r];
                    for k in 0..f {
                        v -= ay[(r, k)] * dir.dy[k];
                    }
                    for &(bk, i, j, cf) in &rows_psd[r] {
                        v -= cf * dir.dz[bk][(i, j)];
                    }
                    rho[r] = v;
                }
                chol_solve_vec(lg, &mut rho);
                for r in 0..m {
                    let wr = rho[r];
                    if wr == 0.0 {
                        continue;
                    }
                    for k in 0..f {
                        dir.dy[k] += ay[(r, k)] * wr;
                    }
                    for &(bk, i, j, cf) in &rows_psd[r] {
                        dir.dz[bk][(i, j)] += cf * wr;
                        if i != j {
                            dir.dz[bk][(j, i)] += cf * wr;
                        }
                    }
                }
            }
            dir
        };

        // ---- predictor -------------------------------------------------
        let rc_aff: Vec<DMatrix<f64>> = (0..nblocks).map(|bk| -&z[bk]).collect();
        let aff = direction(&rc_aff);
        let (apm, adm) = step_bounds(&scal, &z, &s, &aff);
        let ap = apm.min(1.0);
        let ad = adm.min(1.0);
        let mut zs_aff = 0.0;
        for bk in 0..nblocks {
            zs_aff += sym_inner(&z[bk], &s[bk])
                + ap * sym_inner(&aff.dz[bk], &s[bk])
                + ad * sym_inner(&z[bk], &aff.ds[bk])
                + ap * ad * sym_inner(&aff.dz[bk], &aff.ds[bk]);
        }
        let mu_aff = (zs_aff / nu).max(0.0);
        let sigma = ((mu_aff / mu).clamp(0.0, 1.0)).powi(3).max(1e-12);

        // ---- corrector --------------------------------------------------
        let rc_corr: Vec<DMatrix<f64>> = (0..nblocks)
            .map(|bk| {
                let sc = &scal[bk];
                let d = dims[bk];
                let dzh = &sc.ginv * (&aff.dz[bk] * sc.ginv.transpose());
                let dsh = sc.g.transpose() * (&aff.ds[bk] * &sc.g);
                let h = &dzh * &dsh;
                let mut rhat = DMatrix::<f64>::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        let symv = 0.5 * (h[(i, j)] + h[(j, i)]);
                        let mut v = -symv;
                        if i == j {
                            v += sigma * mu - sc.lam_nt[i] * sc.lam_nt[i];
                        }
                        rhat[(i, j)] = 2.0 * v / (sc.lam_nt[i] + sc.lam_nt[j]);
                    }
                }
                &sc.g * (rhat * sc.g.transpose())
            })
            .collect();
        let mut rc_total = rc_corr;
        let mut dir = direction(&rc_total);
        let (apm, adm) = step_bounds(&scal, &z, &s, &dir);
        let mut ap = (FRACTION_TO_BOUNDARY * apm).min(1.0);
        let mut ad = (FRACTION_TO_BOUNDARY * adm).min(1.0);

        // ---- multiple centrality correctors ------------------------------
        // Near a degenerate optimum a handful of complementarity pairs drift
        // far from the target σμ and their blow-up in the scaled direction
        // strangles the step sizes.  Each extra corrector pushes the outlying
        // eigenvalues of the scaled trial product back into the cone
        // [βmin σμ, βmax σμ] and is kept only when it lengthens the step;
        // the factorization is reused, so a round costs two backsolves.
        const BETA_MIN: f64 = 0.1;
        const BETA_MAX: f64 = 10.0;
        for _round in 0..4 {
            if ap.min(ad) >= 0.9 {
                break;
            }
            let apt = (1.08 * ap + 0.08).min(1.0);
            let adt = (1.08 * ad + 0.08).min(1.0);
            let target = sigma * mu;
            let mut any_out = false;
            let rc_extra: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|bk| {
                    let sc = &scal[bk];
                    let d = dims[bk];
                    // Scaled trial point Λ + α dẑ, Λ + α dŝ and its product.
                    let mut zh = &sc.ginv * (&dir.dz[bk] * sc.ginv.transpose());
                    let mut sh = sc.g.transpose() * (&dir.ds[bk] * &sc.g);
                    zh *= apt;
                    sh *= adt;
                    for i in 0..d {
                        zh[(i, i)] += sc.lam_nt[i];
                        sh[(i, i)] += sc.lam_nt[i];
                    }
                    let prod = &zh * &sh;
                    let mut hsym = DMatrix::<f64>::zeros(d, d);
                    for i in 0..d {
                        for j in 0..d {
                            hsym[(i, j)] = 0.5 * (prod[(i, j)] + prod[(j, i)]);
                        }
                    }
                    let eig = hsym.symmetric_eigen();
                    let mut delta = DMatrix::<f64>::zeros(d, d);
                    let mut any = false;
                    for k in 0..d {
                        let th = eig.eigenvalues[k];
                        let clamped = th.clamp(BETA_MIN * target, BETA_MAX * target);
                        if clamped != th {
                            any = true;
                            let u = eig.eigenvectors.column(k);
                            let wd = clamped - th;
                            for i in 0..d {
                                for j in 0..d {
                                    delta[(i, j)] += wd * u[i] * u[j];
                                }
                            }
                        }
                    }
                    if !any {
                        return DMatrix::zeros(d, d);
                    }
                    any_out = true;
                    let mut x = DMatrix::<f64>::zeros(d, d);
                    for i in 0..d {
                        for j in 0..d {
                            x[(i, j)] = 2.0 * delta[(i, j)] / (sc.lam_nt[i] + sc.lam_nt[j]);
                        }
                    }
                    &sc.g * (x * sc.g.transpose())
                })
                .collect();
            if !any_out {
                break;
            }
            for bk in 0..nblocks {
                rc_total[bk] += &rc_extra[bk];
            }
            let dir2 = direction(&rc_total);
            let (apm2, adm2) = step_bounds(&scal, &z, &s, &dir2);
            let ap2 = (FRACTION_TO_BOUNDARY * apm2).min(1.0);
            let ad2 = (FRACTION_TO_BOUNDARY * adm2).min(1.0);
            if ap2 >= ap && ad2 >= ad && ap2 + ad2 > ap + ad {
                dir = dir2;
                ap = ap2;
                ad = ad2;
            } else {
                break;
            }
        }
        let (dir, ap, ad) = (dir, ap, ad);
        if opts.verbose {
            let dznorm = dir.dz.iter().map(|d| d.abs().max()).fold(0.0f64, f64::max);
            let pairs: Vec<String> = (0..nblocks)
                .map(|bk| {
                    format!(
                        "{bk}:({:.1e},{:.1e})",
                        sym_min_eig(&z[bk]),
                        sym_min_eig(&s[bk])
                    )
                })
                .collect();
            eprintln!(
                "       ap {ap:.3e} ad {ad:.3e} sigma {sigma:.2e} |dz| {dznorm:.2e}\n       eigs {}",
                pairs.join(" ")
            );
        }

        // ---- update -----------------------------------------------------
        for k in 0..f {
            y[k] += ap * dir.dy[k];
        }
        for r in 0..m {
            lam[r] += ad * dir.dl[r];
        }
        for bk in 0..nblocks {
            z[bk] += &dir.dz[bk] * ap;
            s[bk] += &dir.ds[bk] * ad;
            // Re-symmetrize to stop roundoff drift.
            let sym_z = (&z[bk] + z[bk].transpose()) * 0.5;
            z[bk] = sym_z;
            let sym_s = (&s[bk] + s[bk].transpose()) * 0.5;
            s[bk] = sym_s;
        }

        // ---- stall detection -------------------------------------------
        if ap.min(ad) < 1e-6 {
            stall_step += 1;
        } else {
            stall_step = 0;
        }
        if mu > 0.9 * mu_prev {
            stall_mu += 1;
        } else {
            stall_mu = 0;
        }
        mu_prev = mu;
        if stall_step >= 3 || stall_mu >= 8 {
            break;
        }
    }

    // Did not converge: return the best iterate seen.
    let (_, by, bz, blam, bdres, bgap) = best.unwrap_or((
        f64::INFINITY,
        y,
        z,
        lam,
        final_dres,
        final_gap,
    ));
    finish(status, by, &bz, &blam, bdres, bgap, iters, trace)
}

struct Direction {
    dy: Vec<f64>,
    dl: Vec<f64>,
    dz: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
}

struct NtScaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lam_nt: Vec<f64>,
    lz: DMatrix<f64>,
    ls: DMatrix<f64>,
}

/// Cholesky with escalating diagonal jitter; `None` after three failures.
fn factor_with_jitter(a: &DMatrix<f64>, max_diag: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut jitter = 0.0f64;
    for attempt in 0..4 {
        let mut l = a.clone();
        if jitter > 0.0 {
            for i in 0..n {
                l[(i, i)] += jitter;
            }
        }
        if cholesky_in_place(&mut l).is_ok() {
            zero_upper(&mut l);
            return Some(l);
        }
        jitter = (1.0 + max_diag) * 1e-14 * 100f64.powi(attempt);
    }
    None
}

fn zero_upper(l: &mut DMatrix<f64>) {
    let n = l.nrows();
    for j in 1..n {
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
}

/// Nesterov–Todd scaling point of a PD pair: `G` with `GᵀSG = G⁻¹ZG⁻ᵀ = Λ`.
fn nt_scaling(z: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<NtScaling> {
    let d = z.nrows();
    let mut lz = z.clone();
    if cholesky_in_place(&mut lz).is_err() {
        return None;
    }
    zero_upper(&mut lz);
    let mut ls = s.clone();
    if cholesky_in_place(&mut ls).is_err() {
        return None;
    }
    zero_upper(&mut ls);
    let cmat = lz.transpose() * &ls;
    let svd = cmat.svd(true, true);
    let u = svd.u.as_ref()?;
    let sig = &svd.singular_values;
    if sig.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut g = lz.clone() * u;
    for j in 0..d {
        let inv_root = 1.0 / sig[j].sqrt();
        for i in 0..d {
            g[(i, j)] *= inv_root;
        }
    }
    // ginv = Σ^{1/2} Uᵀ L_z⁻¹, computed by triangular solves on Uᵀ's rows:
    // (L_z⁻ᵀ U)ᵀ scaled by Σ^{1/2}.
    let mut lzinv_tu = u.clone();
    // solve L_zᵀ X = U ⟹ X = L_z⁻ᵀ U; then ginv = Σ^{1/2} Xᵀ.
    {
        let n = lz.nrows();
        let xs = lzinv_tu.as_mut_slice();
        for col in 0..d {
            super::linalg::solve_lower_transpose_vec(&lz, &mut xs[col * n..(col + 1) * n]);
        }
    }
    let mut ginv = lzinv_tu.transpose();
    for i in 0..d {
        let root = sig[i].sqrt();
        for j in 0..d {
            ginv[(i, j)] *= root;
        }
    }
    let w = &g * g.transpose();
    let lam_nt: Vec<f64> = (0..d).map(|i| sig[i]).collect();
    Some(NtScaling {
        g,
        ginv,
        w,
        lam_nt,
        lz,
        ls,
    })
}

/// Longest feasible primal/dual steps for a direction.
fn step_bounds(
    scal: &[NtScaling],
    _z: &[DMatrix<f64>],
    _s: &[DMatrix<f64>],
    dir: &Direction,
) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (bk, sc) in scal.iter().enumerate() {
        ap = ap.min(max_step(&sc.lz, &dir.dz[bk]));
        ad = ad.min(max_step(&sc.ls, &dir.ds[bk]));
    }
    (ap, ad)
}

/// `mat(A_zᵀ v)` per block: the symmetric matrices `Σ_r v_r B_r`.
fn mat_adjoint(
    dims: &[usize],
    rows_psd: &[Vec<(usize, usize, usize, f64)>],
    v: &[f64],
) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (r, row) in rows_psd.iter().enumerate() {
        let vr = v[r];
        if vr == 0.0 {
            continue;
        }
        for &(bk, i, j, cf) in row {
            if i == j {
                out[bk][(i, i)] += cf * vr;
            } else {
                let half = 0.5 * cf * vr;
                out[bk][(i, j)] += half;
                out[bk][(j, i)] += half;
            }
        }
    }
    out
}

/// `F = W B W` for the symmetric coefficient matrix `B` described by sparse
/// entries `(i, j, c)` with `i ≥ j` (diagonal weight `c`, off-diagonal `c/2`
/// on each side).  Chooses a rank-update or dense-gemm path by sparsity.
fn build_f(
    w: &DMatrix<f64>,
    entries: &[(usize, usize, f64)],
    f: &mut DMatrix<f64>,
    btmp: &mut DMatrix<f64>,
    tmp: &mut DMatrix<f64>,
) {
    let d = w.nrows();
    if entries.len() >= d {
        btmp.fill(0.0);
        for &(i, j, c) in entries {
            if i == j {
                btmp[(i, i)] = c;
            } else {
                btmp[(i, j)] = 0.5 * c;
                btmp[(j, i)] = 0.5 * c;
            }
        }
        tmp.gemm(1.0, btmp, w, 0.0);
        f.gemm(1.0, w, tmp, 0.0);
        return;
    }
    f.fill(0.0);
    let ws = w.as_slice();
    let fs = f.as_mut_slice();
    for &(i, j, c) in entries {
        let wi = &ws[i * d..(i + 1) * d];
        if i == j {
            for k in 0..d {
                let coef = c * wi[k];
                if coef != 0.0 {
                    let fc = &mut fs[k * d..(k + 1) * d];
                    for (fv, wv) in fc.iter_mut().zip(wi) {
                        *fv += coef * wv;
                    }
                }
            }
        } else {
            let wj = &ws[j * d..(j + 1) * d];
            let c2 = 0.5 * c;
            for k in 0..d {
                let a = c2 * wj[k];
                let b2 = c2 * wi[k];
                let fc = &mut fs[k * d..(k + 1) * d];
                for t in 0..d {
                    fc[t] += a * wi[t] + b2 * wj[t];
                }
            }
        }
    }
}
