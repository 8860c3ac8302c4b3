//! Elimination of hidden free-variable equalities.
//!
//! Structured programs routinely contain linear combinations of equality rows
//! whose PSD coefficients cancel exactly while the free-variable coefficients
//! do not (for SOS programs: linear functionals that annihilate every cone
//! basis product but not the multiplier columns).  Such combinations make the
//! Schur complement `A_z D A_zᵀ` singular at *every* interior-point iterate,
//! which caps the attainable accuracy of the search directions.
//!
//! This pass finds those combinations once, from the PSD Gram matrix of the
//! kept rows (the null space is independent of the iterate), rewrites each as
//! an explicit free-only equation `eᵀy = h`, removes one participating row
//! per combination, and eliminates one free variable per equation by
//! substitution.  The reduced system has PSD parts of full row rank, so the
//! interior-point Schur complement is nonsingular for every scaling.  The
//! transformation is an exact reparametrization: solutions and multipliers of
//! the original kept system are recovered by [`Presolved::expand_y`] and
//! [`Presolved::expand_lam`].

use super::linalg::inf_norm;
use nalgebra::DMatrix;

/// Beyond this many kept rows the dense Gram/eigen analysis is skipped; large
/// programs produced by the orbit reduction have structurally independent PSD
/// parts and do not need the pass.
const MAX_ROWS: usize = 2048;
/// Relative eigenvalue threshold below which a Gram direction counts as null.
const NULL_TOL: f64 = 1e-12;
/// Verification bound on the PSD coefficients of a candidate combination.
const CANCEL_TOL: f64 = 1e-8;

type FreeRow = Vec<(usize, f64)>;
type PsdRow = Vec<(usize, usize, usize, f64)>;

pub(crate) struct Presolved {
    /// IPM row index → slot in the kept-row order.
    pub slot_of_ipm: Vec<usize>,
    /// Free parts of the surviving rows, substituted and column-compressed.
    pub rows_free: Vec<FreeRow>,
    pub rows_psd: Vec<PsdRow>,
    pub b: Vec<f64>,
    /// Objective over the reduced free variables.
    pub c: Vec<f64>,
    /// Reduced column index → original free index.
    pub cols: Vec<usize>,
    /// Substitutions `y[k] = w0 + Σ cᵢ·y[kᵢ]` in elimination order; later
    /// entries never reference earlier-eliminated variables, so applying them
    /// in reverse resolves every eliminated variable.
    subs: Vec<(usize, Vec<(usize, f64)>, f64)>,
    /// Original-frame free-only equations, one per eliminated combination.
    eqs: Vec<Vec<f64>>,
    /// Kept-slot coefficients of each eliminated combination.
    pub combos: Vec<Vec<f64>>,
    /// Unmodified free parts of all kept rows (scaled frame).
    orig_rows_free: Vec<FreeRow>,
    num_free: usize,
}

impl Presolved {
    pub(crate) fn is_active(&self) -> bool {
        !self.eqs.is_empty()
    }

    /// Reduced free vector → original free vector.
    pub(crate) fn expand_y(&self, y_red: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.num_free];
        for (r, &k) in self.cols.iter().enumerate() {
            y[k] = y_red[r];
        }
        for (k, coeffs, w0) in self.subs.iter().rev() {
            let mut v = *w0;
            for &(kk, cc) in coeffs {
                v += cc * y[kk];
            }
            y[*k] = v;
        }
        y
    }

    /// IPM multipliers → kept-slot multipliers, including the rows removed by
    /// the pass.  `target` is the free-variable stationarity right-hand side:
    /// the objective for a solution, zeros for an infeasibility ray.  The
    /// correction solves `Σ νⱼ eⱼ = target − A_yᵀ λ` over the eliminated
    /// equations and distributes `νⱼ` along each combination.
    pub(crate) fn expand_lam(&self, lam_ipm: &[f64], target: Option<&[f64]>) -> Vec<f64> {
        let m_kept = self.orig_rows_free.len();
        let mut lam = vec![0.0; m_kept];
        for (i, &slot) in self.slot_of_ipm.iter().enumerate() {
            lam[slot] = lam_ipm[i];
        }
        if self.eqs.is_empty() {
            return lam;
        }
        let f = self.num_free;
        let mut g = vec![0.0; f];
        if let Some(t) = target {
            g.copy_from_slice(t);
        }
        for (slot, row) in self.orig_rows_free.iter().enumerate() {
            let l = lam[slot];
            if l != 0.0 {
                for &(k, v) in row {
                    g[k] -= v * l;
                }
            }
        }
        let q = self.eqs.len();
        let mut gram = DMatrix::<f64>::zeros(q, q);
        let mut rhs = vec![0.0; q];
        for a in 0..q {
            for bql in a..q {
                let v: f64 = (0..f).map(|k| self.eqs[a][k] * self.eqs[bql][k]).sum();
                gram[(a, bql)] = v;
                gram[(bql, a)] = v;
            }
            rhs[a] = (0..f).map(|k| self.eqs[a][k] * g[k]).sum();
        }
        // Tiny SPD solve; the equations were pivot-checked at construction.
        let jitter = 1e-14 * (1.0 + (0..q).fold(0.0f64, |acc, i| acc.max(gram[(i, i)])));
        for i in 0..q {
            gram[(i, i)] += jitter;
        }
        let nu = gram
            .cholesky()
            .map(|ch| ch.solve(&nalgebra::DVector::from_vec(rhs.clone())))
            .map(|v| v.as_slice().to_vec())
            .unwrap_or(rhs);
        for (j, combo) in self.combos.iter().enumerate() {
            let njv = nu[j];
            if njv != 0.0 {
                for (slot, &u) in combo.iter().enumerate() {
                    lam[slot] += njv * u;
                }
            }
        }
        lam
    }
}

/// Run the pass on the scaled kept system.  Returns an identity transform
/// when the system is too large, has no free variables, or has PSD parts of
/// full row rank already.
pub(crate) fn presolve_free_only(
    rows_free: Vec<FreeRow>,
    rows_psd: Vec<PsdRow>,
    b: Vec<f64>,
    c: &[f64],
    num_free: usize,
) -> Presolved {
    let m = b.len();
    let identity = |rows_free: Vec<FreeRow>, rows_psd: Vec<PsdRow>, b: Vec<f64>| {
        let orig = rows_free.clone();
        Presolved {
            slot_of_ipm: (0..m).collect(),
            rows_free,
            rows_psd,
            b,
            c: c.to_vec(),
            cols: (0..num_free).collect(),
            subs: Vec::new(),
            eqs: Vec::new(),
            combos: Vec::new(),
            orig_rows_free: orig,
            num_free,
        }
    };
    if m == 0 || num_free == 0 || m > MAX_ROWS {
        return identity(rows_free, rows_psd, b);
    }

    // Gram matrix of the PSD parts in the true matrix inner product: a stored
    // off-diagonal coefficient v represents a symmetric pair of entries v/2,
    // so its contribution to ⟨F_r, F_t⟩ is v_r·v_t/2.
    let gram = psd_gram(&rows_psd, m);
    let eig = gram.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if lam_max == 0.0 {
        return identity(rows_free, rows_psd, b);
    }
    let mut null_idx: Vec<usize> = (0..m)
        .filter(|&i| eig.eigenvalues[i].abs() <= NULL_TOL * lam_max)
        .collect();
    if null_idx.is_empty() {
        return identity(rows_free, rows_psd, b);
    }
    null_idx.sort_by(|&a, &bq| {
        eig.eigenvalues[a]
            .abs()
            .partial_cmp(&eig.eigenvalues[bq].abs())
            .unwrap()
            .then(a.cmp(&bq))
    });

    let orig_rows_free = rows_free.clone();
    let mut combos: Vec<Vec<f64>> = Vec::new();
    let mut eqs: Vec<Vec<f64>> = Vec::new();
    let mut subs: Vec<(usize, Vec<(usize, f64)>, f64)> = Vec::new();
    let mut removed = vec![false; m];
    let mut pivot_rows: Vec<usize> = Vec::new();
    let mut col_gone = vec![false; num_free];
    let mut new_b = b.clone();
    let mut new_rows_free = rows_free;
    let mut new_c = c.to_vec();

    for &ni in &null_idx {
        let mut u: Vec<f64> = (0..m).map(|r| eig.eigenvectors[(r, ni)]).collect();
        // Make this combination vanish on the rows already chosen for removal
        // so the removal set stays invertible against the combination set.
        for (j, &pr) in pivot_rows.iter().enumerate() {
            let factor = u[pr] / combos[j][pr];
            if factor != 0.0 {
                for r in 0..m {
                    u[r] -= factor * combos[j][r];
                }
            }
        }
        let dbg = std::env::var_os("LOGSOB_PRESOLVE_DEBUG").is_some();
        let unorm = inf_norm(&u);
        if unorm < 1e-6 {
            if dbg {
                eprintln!("reject: reduced away (unorm {unorm:.2e})");
            }
            continue;
        }
        // Verify the PSD coefficients cancel.
        let mut acc: std::collections::BTreeMap<(usize, usize, usize), f64> =
            std::collections::BTreeMap::new();
        for r in 0..m {
            if u[r] == 0.0 {
                continue;
            }
            for &(bk, i, j, v) in &rows_psd[r] {
                let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
                *acc.entry((bk, hi, lo)).or_insert(0.0) += u[r] * v;
            }
        }
        let cancel = acc.values().fold(0.0f64, |a, &v| a.max(v.abs()));
        if cancel > CANCEL_TOL * unorm {
            if dbg {
                eprintln!("reject: psd parts do not cancel (cancel {cancel:.2e}, unorm {unorm:.2e})");
            }
            continue;
        }
        // Original-frame free-only equation.
        let mut e = vec![0.0; num_free];
        let mut h = 0.0;
        for r in 0..m {
            if u[r] != 0.0 {
                for &(k, v) in &orig_rows_free[r] {
                    e[k] += u[r] * v;
                }
                h += u[r] * b[r];
            }
        }
        // Row to remove: largest remaining coefficient of the combination.
        let (rstar, rmag) = (0..m)
            .filter(|&r| !removed[r])
            .map(|r| (r, u[r].abs()))
            .fold((usize::MAX, 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
        if rstar == usize::MAX || rmag < 1e-6 * unorm {
            if dbg {
                eprintln!("reject: no removable row (rmag {rmag:.2e}, unorm {unorm:.2e})");
            }
            continue;
        }
        let h_tol = 1e-7 * (1.0 + inf_norm(&b));
        if inf_norm(&e) <= CANCEL_TOL * unorm {
            // The whole combination vanishes: a redundant row survived the
            // rank selection.  Remove one row; no variable is eliminated.
            if h.abs() > h_tol {
                if dbg {
                    eprintln!("reject: zero row combination with rhs {h:.2e}");
                }
                continue;
            }
            if dbg {
                eprintln!("commit (row only): rm_row={rstar} (|e| {:.2e})", inf_norm(&e));
            }
            removed[rstar] = true;
            pivot_rows.push(rstar);
            combos.push(u);
            eqs.push(e);
            continue;
        }
        // Substitute the already-eliminated variables, then pick a pivot.
        let mut e_sub = e.clone();
        let mut h_sub = h;
        for (k, coeffs, w0) in &subs {
            let cv = e_sub[*k];
            if cv != 0.0 {
                e_sub[*k] = 0.0;
                for &(kk, cc) in coeffs {
                    e_sub[kk] += cv * cc;
                }
                h_sub -= cv * w0;
            }
        }
        let (kstar, pmag) = (0..num_free)
            .filter(|&k| !col_gone[k])
            .map(|k| (k, e_sub[k].abs()))
            .fold((usize::MAX, 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
        if kstar == usize::MAX || pmag <= CANCEL_TOL * (1.0 + inf_norm(&e_sub)) {
            // The equation is implied by the ones already committed; the row
            // is still redundant and can go.
            if h_sub.abs() > h_tol {
                if dbg {
                    eprintln!("reject: implied equation with rhs gap {h_sub:.2e}");
                }
                continue;
            }
            if dbg {
                eprintln!("commit (row only): rm_row={rstar} (pmag {pmag:.2e})");
            }
            removed[rstar] = true;
            pivot_rows.push(rstar);
            combos.push(u);
            eqs.push(e);
            continue;
        }
        // Commit:  y[kstar] = h_sub/p − Σ_{k≠kstar} e_sub[k]/p · y[k].
        let p = e_sub[kstar];
        let coeffs: Vec<(usize, f64)> = (0..num_free)
            .filter(|&k| k != kstar && e_sub[k] != 0.0)
            .map(|k| (k, -e_sub[k] / p))
            .collect();
        let w0 = h_sub / p;
        removed[rstar] = true;
        col_gone[kstar] = true;
        if std::env::var_os("LOGSOB_PRESOLVE_DEBUG").is_some() {
            let rows_used: Vec<(usize, f64)> = (0..m)
                .filter(|&r| u[r].abs() > 1e-9 * unorm)
                .map(|r| (r, u[r]))
                .collect();
            let e_used: Vec<(usize, f64)> = (0..num_free)
                .filter(|&k| e[k].abs() > 1e-12)
                .map(|k| (k, e[k]))
                .collect();
            eprintln!(
                "commit #{:02}: cancel={cancel:.2e} unorm={unorm:.2e} rm_row={rstar} pivot_var={kstar} p={p:.3e} w0={w0:.6e}\n  rows {rows_used:.4?}\n  eq   {e_used:.4?}  h={h:.6e}",
                subs.len(),
            );
        }
        pivot_rows.push(rstar);
        subs.push((kstar, coeffs, w0));
        combos.push(u);
        eqs.push(e);
    }

    if std::env::var_os("LOGSOB_PRESOLVE_DEBUG").is_some() {
        eprintln!(
            "presolve: {} null vectors, {} committed ({} subs)",
            null_idx.len(),
            combos.len(),
            subs.len()
        );
        let mut evs: Vec<f64> = (0..m).map(|i| eig.eigenvalues[i]).collect();
        evs.sort_by(|a, b| a.total_cmp(b));
        let lmax = evs.last().copied().unwrap_or(1.0).max(1e-300);
        let rels: Vec<String> =
            evs.iter().take(40).map(|&v| format!("{:.1e}", v / lmax)).collect();
        eprintln!("gram eigs/λmax: {}", rels.join(" "));
    }
    if combos.is_empty() {
        return Presolved {
            slot_of_ipm: (0..m).collect(),
            rows_free: new_rows_free,
            rows_psd,
            b: new_b,
            c: new_c,
            cols: (0..num_free).collect(),
            subs,
            eqs,
            combos,
            orig_rows_free,
            num_free,
        };
    }

    // Apply the substitutions, in order, to every surviving row and to the
    // objective.  Later substitutions never reintroduce earlier variables.
    for (k, coeffs, w0) in &subs {
        for (r, row) in new_rows_free.iter_mut().enumerate() {
            if let Some(pos) = row.iter().position(|&(kk, _)| kk == *k) {
                let cv = row[pos].1;
                row.swap_remove(pos);
                for &(kk, cc) in coeffs {
                    match row.iter().position(|&(k2, _)| k2 == kk) {
                        Some(p2) => row[p2].1 += cv * cc,
                        None => row.push((kk, cv * cc)),
                    }
                }
                new_b[r] -= cv * w0;
            }
        }
        let cv = new_c[*k];
        if cv != 0.0 {
            new_c[*k] = 0.0;
            for &(kk, cc) in coeffs {
                new_c[kk] += cv * cc;
            }
            // The constant cv·w0 shifts the objective; it is reapplied when
            // the full solution is evaluated against the original objective.
        }
    }

    // Compress columns and filter removed rows.
    let cols: Vec<usize> = (0..num_free).filter(|&k| !col_gone[k]).collect();
    let mut col_of = vec![usize::MAX; num_free];
    for (r, &k) in cols.iter().enumerate() {
        col_of[k] = r;
    }
    let slot_of_ipm: Vec<usize> = (0..m).filter(|&r| !removed[r]).collect();
    let rows_free: Vec<FreeRow> = slot_of_ipm
        .iter()
        .map(|&r| {
            let mut row: FreeRow = new_rows_free[r]
                .iter()
                .filter(|&&(_, v)| v != 0.0)
                .map(|&(k, v)| (col_of[k], v))
                .collect();
            row.sort_by_key(|&(k, _)| k);
            row
        })
        .collect();
    let rows_psd_out: Vec<PsdRow> = slot_of_ipm.iter().map(|&r| rows_psd[r].clone()).collect();
    let b_out: Vec<f64> = slot_of_ipm.iter().map(|&r| new_b[r]).collect();
    let c_out: Vec<f64> = cols.iter().map(|&k| new_c[k]).collect();

    Presolved {
        slot_of_ipm,
        rows_free,
        rows_psd: rows_psd_out,
        b: b_out,
        c: c_out,
        cols,
        subs,
        eqs,
        combos,
        orig_rows_free,
        num_free,
    }
}

fn psd_gram(rows_psd: &[PsdRow], m: usize) -> DMatrix<f64> {
    // Group rows by svec position (collapsing duplicate entries within a row
    // first), then accumulate pairwise products.  BTreeMaps keep the
    // accumulation order, and therefore the result, deterministic.
    let mut by_pos: std::collections::BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    for (r, row) in rows_psd.iter().enumerate() {
        let mut per_row: std::collections::BTreeMap<(usize, usize, usize), f64> =
            std::collections::BTreeMap::new();
        for &(bk, i, j, v) in row {
            let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
            *per_row.entry((bk, hi, lo)).or_insert(0.0) += v;
        }
        for (pos, v) in per_row {
            by_pos.entry(pos).or_default().push((r, v));
        }
    }
    let mut g = DMatrix::<f64>::zeros(m, m);
    for ((_, hi, lo), list) in &by_pos {
        let w = if hi == lo { 1.0 } else { 0.5 };
        for (a, &(ra, va)) in list.iter().enumerate() {
            for &(rb, vb) in &list[a..] {
                let v = w * va * vb;
                g[(ra, rb)] += v;
                if ra != rb {
                    g[(rb, ra)] += v;
                }
            }
        }
    }
    g
}
