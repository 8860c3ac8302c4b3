//! Orbit symmetrization of the main hierarchy.
//!
//! When the chain has a nontrivial automorphism group (state permutations
//! preserving both the stationary law and the kernel), the hierarchy's
//! optimum is attained at a group-invariant certificate: averaging any
//! feasible certificate over the group preserves feasibility and the bound.
//! Restricting to invariant certificates therefore loses nothing, and it
//! collapses the program dramatically: Gram matrices are constant on orbits
//! of basis pairs, the multiplier is constant on monomial orbits, the
//! decision polynomials are tied along state orbits, and one identity row per
//! monomial orbit implies all the rest.
//!
//! The reduced program is a linear matrix inequality in the orbit variables
//! `q` (each PSD block must equal `sum_k q_k E_k` for 0/1 orbit indicators
//! `E_k`), which is exactly the *dual* shape of the interior-point solver:
//!
//! ```text
//! solver primal: min c.y  s.t.  A_y y + <F_r, Q> = b_r,  Q >= 0
//! solver dual:   max b.l  s.t.  A_y^T l = c,  S = -sum_r l_r F_r >= 0
//! ```
//!
//! Encoding one solver row per reduced variable `q_k` with `F_k = E_k`
//! (so `S = sum_k q_k E_k` under `q = -l`), one solver free variable per kept
//! identity row with `A_y[k][j] = L[j][k]` and `c_j = -e_j` (so stationarity
//! reads `L q = e`), and `b_k = f_k` (so the dual objective is `-f.q`) makes
//! the solver's dual side solve `min f.q  s.t.  L q = e, sum q_k E_k >= 0` —
//! the reduced hierarchy. The optimal `gamma` is `-lambda[gamma]`, and the
//! solver's primal objective cross-checks it as `-objective`.
//!
//! Only the float bounding path uses this; exact certification always runs on
//! the direct compilation.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::cones::{chebyshev_points, interval_cone, rational_upper_inv_sqrt};
use super::{CompiledLsi, HierarchyOptions, SosError};
use crate::markov::Chain;
use crate::poly::{monomial_basis, pade_log, taylor_majorant, Monomial, Polynomial, UniPoly};
use crate::ratla::{rat_int, rat_to_f64};
use crate::sdp::{SdpProblem, SdpRow};
use crate::Rat;

/// A group of state permutations preserving the chain.
pub enum Group {
    /// The full symmetric group on `n` states.
    Full(usize),
    /// An explicit element list (always contains the identity).
    Elements(Vec<Vec<usize>>),
}

impl Group {
    pub fn is_trivial(&self) -> bool {
        match self {
            Group::Full(n) => *n <= 1,
            Group::Elements(g) => g.len() <= 1,
        }
    }

    /// Group order; `None` for the full symmetric group (too large to count).
    pub fn order(&self) -> Option<u64> {
        match self {
            Group::Full(_) => None,
            Group::Elements(g) => Some(g.len() as u64),
        }
    }

    /// Orbits of the states, each sorted, ordered by smallest element.
    pub fn state_orbits(&self) -> Vec<Vec<usize>> {
        match self {
            Group::Full(n) => vec![(0..*n).collect()],
            Group::Elements(g) => {
                let n = g[0].len();
                let mut seen = vec![false; n];
                let mut orbits = Vec::new();
                for i in 0..n {
                    if seen[i] {
                        continue;
                    }
                    let mut orb: Vec<usize> = g.iter().map(|p| p[i]).collect();
                    orb.sort_unstable();
                    orb.dedup();
                    for &v in &orb {
                        seen[v] = true;
                    }
                    orbits.push(orb);
                }
                orbits
            }
        }
    }

    /// For each member of `orbit(rep)`, a group element mapping `rep` there
    /// (index-aligned with the sorted orbit).
    fn transversal(&self, rep: usize, orbit: &[usize]) -> Vec<Vec<usize>> {
        match self {
            Group::Full(n) => orbit
                .iter()
                .map(|&i| {
                    let mut p: Vec<usize> = (0..*n).collect();
                    p.swap(rep, i);
                    p
                })
                .collect(),
            Group::Elements(g) => orbit
                .iter()
                .map(|&i| {
                    g.iter()
                        .find(|p| p[rep] == i)
                        .expect("orbit member without witness")
                        .clone()
                })
                .collect(),
        }
    }

    /// Canonical representative of a monomial orbit, as an exponent key.
    fn canon_mono(&self, e: &[u8], memo: &mut HashMap<Vec<u8>, Vec<u8>>) -> Vec<u8> {
        match self {
            Group::Full(_) => {
                let mut v = e.to_vec();
                v.sort_unstable_by(|a, b| b.cmp(a));
                v
            }
            Group::Elements(g) => {
                if let Some(k) = memo.get(e) {
                    return k.clone();
                }
                let mut best: Option<Vec<u8>> = None;
                for p in g {
                    let mut img = vec![0u8; e.len()];
                    for (i, &ei) in e.iter().enumerate() {
                        img[p[i]] = ei;
                    }
                    if best.as_ref().is_none_or(|b| img < *b) {
                        best = Some(img);
                    }
                }
                let k = best.expect("empty group");
                memo.insert(e.to_vec(), k.clone());
                k
            }
        }
    }

    /// Canonical key of an unordered pair of exponent vectors under the
    /// simultaneous action.
    fn canon_pair(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        match self {
            Group::Full(_) => {
                let fwd = sorted_columns(a, b, None);
                let rev = sorted_columns(b, a, None);
                fwd.min(rev)
            }
            Group::Elements(g) => {
                let mut best: Option<Vec<u8>> = None;
                for p in g {
                    for (x, y) in [(a, b), (b, a)] {
                        let mut img = vec![0u8; 2 * a.len()];
                        for (i, &e) in x.iter().enumerate() {
                            img[p[i]] = e;
                        }
                        for (i, &e) in y.iter().enumerate() {
                            img[a.len() + p[i]] = e;
                        }
                        if best.as_ref().is_none_or(|bst| img < *bst) {
                            best = Some(img);
                        }
                    }
                }
                best.expect("empty group")
            }
        }
    }

    /// Canonical key of an unordered pair under the stabilizer of `fixed`.
    fn canon_pair_stab(&self, fixed: usize, a: &[u8], b: &[u8]) -> Vec<u8> {
        match self {
            Group::Full(_) => {
                let fwd = sorted_columns(a, b, Some(fixed));
                let rev = sorted_columns(b, a, Some(fixed));
                fwd.min(rev)
            }
            Group::Elements(g) => {
                let mut best: Option<Vec<u8>> = None;
                for p in g.iter().filter(|p| p[fixed] == fixed) {
                    for (x, y) in [(a, b), (b, a)] {
                        let mut img = vec![0u8; 2 * a.len()];
                        for (i, &e) in x.iter().enumerate() {
                            img[p[i]] = e;
                        }
                        for (i, &e) in y.iter().enumerate() {
                            img[a.len() + p[i]] = e;
                        }
                        if best.as_ref().is_none_or(|bst| img < *bst) {
                            best = Some(img);
                        }
                    }
                }
                best.expect("stabilizer is empty")
            }
        }
    }
}

/// Column-multiset encoding: pairs `(a_i, b_i)` sorted descending, the
/// distinguished column (if any) pulled to the front.
fn sorted_columns(a: &[u8], b: &[u8], fixed: Option<usize>) -> Vec<u8> {
    let mut cols: Vec<(u8, u8)> = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        if Some(i) != fixed {
            cols.push((a[i], b[i]));
        }
    }
    cols.sort_unstable_by(|x, y| y.cmp(x));
    let mut out = Vec::with_capacity(2 * a.len());
    if let Some(f) = fixed {
        out.push(a[f]);
        out.push(b[f]);
    }
    for (x, y) in cols {
        out.push(x);
        out.push(y);
    }
    out
}

/// Detects the automorphism group of a chain: permutations `g` with
/// `pi[g(i)] = pi[i]` and `K[g(i)][g(j)] = K[i][j]`.
pub fn chain_automorphism_group(chain: &Chain) -> Group {
    let n = chain.len();
    let pi = chain.pi();
    let k = chain.kernel();
    // All states alike and all off-diagonal transitions alike: the full
    // symmetric group acts.
    let uniform = pi.iter().all(|p| *p == pi[0])
        && (0..n).all(|i| k[i][i] == k[0][0])
        && (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).all(
            |(i, j)| k[i][j] == k[0][1.min(n - 1)],
        );
    if uniform && n >= 2 {
        return Group::Full(n);
    }
    Group::Elements(enumerate_automorphisms(pi, k, 20_000))
}

/// Backtracking enumeration of all automorphisms; falls back to the trivial
/// group if the count exceeds `cap` (a symmetric special case should have
/// been detected instead).
fn enumerate_automorphisms(pi: &[Rat], k: &[Vec<Rat>], cap: usize) -> Vec<Vec<usize>> {
    let n = pi.len();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn dfs(
        u: usize,
        n: usize,
        pi: &[Rat],
        k: &[Vec<Rat>],
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> bool {
        if out.len() > cap {
            return false;
        }
        if u == n {
            out.push(map.clone());
            return true;
        }
        'cand: for v in 0..n {
            if used[v] || pi[v] != pi[u] || k[v][v] != k[u][u] {
                continue;
            }
            for w in 0..u {
                if k[v][map[w]] != k[u][w] || k[map[w]][v] != k[w][u] {
                    continue 'cand;
                }
            }
            map[u] = v;
            used[v] = true;
            let ok = dfs(u + 1, n, pi, k, map, used, out, cap);
            used[v] = false;
            map[u] = usize::MAX;
            if !ok {
                return false;
            }
        }
        true
    }
    if !dfs(0, n, pi, k, &mut map, &mut used, &mut out, cap) {
        return vec![(0..n).collect()];
    }
    out
}

/// Reduced variables of the orbit program, ordered: objective first, then
/// decision-polynomial coefficients, multiplier orbits, Gram-entry orbits,
/// and the (small, unreduced) interval Gram entries.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum QKey {
    Gamma,
    /// (state orbit, decision basis index)
    A(usize, usize),
    /// canonical monomial key of the multiplier coefficient orbit
    Phi(Vec<u8>),
    /// canonical pair key in the unweighted Gram block
    Gram0(Vec<u8>),
    /// (state orbit, canonical stabilizer-pair key) in the tied `x_i` block
    GramS(usize, Vec<u8>),
    /// (state orbit, interval block, i, j) with `i >= j`
    Uni(usize, usize, usize, usize),
}

/// Kept identity rows: one per monomial orbit, plus each representative's
/// interval rows.  Interval identities are pinned pointwise at a fixed grid
/// of rational near-Chebyshev nodes instead of per power of `t`: both frames
/// are equivalent for polynomials within the degree budget, but coefficient
/// extraction in the monomial frame is exponentially ill-conditioned in the
/// budget while evaluation stays well scaled.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum EqKey {
    Main(Vec<u8>),
    /// (state orbit, evaluation node index)
    Uni(usize, usize),
}

/// Facts about a symmetric compilation, for reports and decoding.
pub struct SymmetricCompilation {
    /// `None` means the full symmetric group.
    pub group_order: Option<u64>,
    pub state_orbits: Vec<Vec<usize>>,
    /// Row index of the objective variable in the dualized program.
    pub gamma_row: usize,
    pub num_equalities: usize,
    pub num_reduced_vars: usize,
}

pub(crate) fn build_lsi_symmetric(
    chain: &Chain,
    opts: &HierarchyOptions,
) -> Result<CompiledLsi, SosError> {
    let group = chain_automorphism_group(chain);
    if group.is_trivial() {
        let mut direct = opts.clone();
        direct.symmetry = false;
        return super::build_lsi_hierarchy(chain, &direct);
    }
    let n = chain.len();
    let pi = chain.pi();
    let d = opts.d;
    let m = opts.m;
    let pade = pade_log(m);
    let strict = opts.strict;
    let mut memo: HashMap<Vec<u8>, Vec<u8>> = HashMap::new();

    // Decision polynomial structure (as in the direct build).
    let tm1 = UniPoly::new(vec![rat_int(-1), Rat::one()]);
    let (p_fixed, p_basis): (UniPoly<Rat>, Vec<UniPoly<Rat>>) = match opts.taylor {
        Some(k) => (taylor_majorant(2 * k - 1), Vec::new()),
        None => {
            let mut basis = Vec::new();
            let mut pw = tm1.mul(&tm1);
            for _k in 2..=2 * d {
                basis.push(pw.clone());
                pw = pw.mul(&tm1);
            }
            (tm1.scale(&rat_int(2)), basis)
        }
    };

    let orbits = group.state_orbits();
    let a_orbit = |o: usize| if opts.shared_p { 0 } else { o };

    let mut coe: BTreeMap<QKey, BTreeMap<EqKey, f64>> = BTreeMap::new();
    let mut psd: BTreeMap<QKey, Vec<(usize, usize, usize)>> = BTreeMap::new();
    let mut rhs_acc: BTreeMap<EqKey, f64> = BTreeMap::new();

    fn bump(
        coe: &mut BTreeMap<QKey, BTreeMap<EqKey, f64>>,
        q: &QKey,
        eq: EqKey,
        v: f64,
    ) {
        if v != 0.0 {
            *coe.entry(q.clone()).or_default().entry(eq).or_insert(0.0) += v;
        }
    }

    // gamma stream: -E.
    let qg = QKey::Gamma;
    for (mono, c) in chain.dirichlet_poly().terms() {
        let key = EqKey::Main(group.canon_mono(&mono.0, &mut memo));
        bump(&mut coe, &qg, key, -rat_to_f64(c));
    }
    coe.entry(QKey::Gamma).or_default();

    // Right-hand side stream: -sum_i pi_i p_fixed(x_i).
    for i in 0..n {
        let poly = p_fixed.to_multivariate(n, i).scale(&pi[i]);
        for (mono, c) in poly.terms() {
            let key = EqKey::Main(group.canon_mono(&mono.0, &mut memo));
            *rhs_acc.entry(key).or_insert(0.0) += -rat_to_f64(c);
        }
    }

    // Decision coefficient streams into the main identity.
    for (o, orbit) in orbits.iter().enumerate() {
        for (kk, basis_k) in p_basis.iter().enumerate() {
            let q = QKey::A(a_orbit(o), kk);
            for &i in orbit {
                let poly = basis_k.to_multivariate(n, i).scale(&pi[i]);
                for (mono, c) in poly.terms() {
                    let key = EqKey::Main(group.canon_mono(&mono.0, &mut memo));
                    bump(&mut coe, &q, key, rat_to_f64(c));
                }
            }
        }
    }

    // Multiplier stream: orbit sums of x^beta (||x||_pi^2 - 1).
    let mut sphere = chain.pi_norm_poly();
    sphere.add_term(Monomial::one(n), rat_int(-1));
    for beta in monomial_basis(n, 2 * d - 2) {
        let q = QKey::Phi(group.canon_mono(&beta.0, &mut memo));
        let poly = Polynomial::monomial(beta, Rat::one()).mul(&sphere);
        for (mono, c) in poly.terms() {
            let key = EqKey::Main(group.canon_mono(&mono.0, &mut memo));
            bump(&mut coe, &q, key, rat_to_f64(c));
        }
    }

    // Gram basis keys (aligned with the direct build's basis order).
    let alphas0: Vec<Monomial> = monomial_basis(n, d)
        .into_iter()
        .filter(|a| !strict || a.degree() > 0)
        .collect();
    let alphas1: Vec<Monomial> = monomial_basis(n, d - 1)
        .into_iter()
        .filter(|a| !strict || a.degree() > 0)
        .collect();
    let basis_poly = |a: &Monomial| -> Polynomial<Rat> {
        let mut p = Polynomial::monomial(a.clone(), Rat::one());
        if strict {
            p.add_term(Monomial::one(n), rat_int(-1));
        }
        p
    };

    // Unweighted block: orbit-tied Gram over alphas0.
    for r in 0..alphas0.len() {
        let br = basis_poly(&alphas0[r]);
        for c in 0..=r {
            let q = QKey::Gram0(group.canon_pair(&alphas0[r].0, &alphas0[c].0));
            psd.entry(q.clone()).or_default().push((0, r, c));
            let mut prod = br.mul(&basis_poly(&alphas0[c]));
            if r != c {
                prod = prod.scale(&rat_int(2));
            }
            for (mono, cf) in prod.terms() {
                let key = EqKey::Main(group.canon_mono(&mono.0, &mut memo));
                bump(&mut coe, &q, key, rat_to_f64(cf));
            }
        }
    }

    // One tied block per state orbit: sigma_{g.rep} = sigma_rep o g^{-1}.
    for (o, orbit) in orbits.iter().enumerate() {
        let rep = orbit[0];
        let maps = group.transversal(rep, orbit);
        for r in 0..alphas1.len() {
            for c in 0..=r {
                let q = QKey::GramS(o, group.canon_pair_stab(rep, &alphas1[r].0, &alphas1[c].0));
                psd.entry(q.clone()).or_default().push((1 + o, r, c));
                let mut prod = basis_poly(&alphas1[r]).mul(&basis_poly(&alphas1[c]));
                if r != c {
                    prod = prod.scale(&rat_int(2));
                }
                for (pos, &i) in orbit.iter().enumerate() {
                    let img = prod.permute_vars(&maps[pos]);
                    for (mono, cf) in img.terms() {
                        let mut e = mono.0.clone();
                        e[i] += 1;
                        let key = EqKey::Main(group.canon_mono(&e, &mut memo));
                        bump(&mut coe, &q, key, rat_to_f64(cf));
                    }
                }
            }
        }
    }

    // Interval constraints for one representative per orbit.
    let mut endpoints = Vec::with_capacity(n);
    let mut block_dims: Vec<usize> = vec![alphas0.len()];
    block_dims.extend(std::iter::repeat(alphas1.len()).take(orbits.len()));
    if opts.taylor.is_none() {
        for i in 0..n {
            endpoints.push(rational_upper_inv_sqrt(&pi[i], opts.endpoint_bits));
        }
        let budget = 2 * (d + m.div_ceil(2));
        let strict_pt = Rat::one();
        let neg2t2r = UniPoly::new(vec![Rat::zero(), Rat::zero(), rat_int(2), rat_int(-2)])
            .mul(&pade.r);
        for (o, orbit) in orbits.iter().enumerate() {
            let rep = orbit[0];
            let cone = interval_cone(
                &Rat::zero(),
                &endpoints[rep],
                budget,
                if strict { Some(&strict_pt) } else { None },
            );
            let nodes = chebyshev_points(&Rat::zero(), &endpoints[rep], budget + 1);
            let mut at_nodes = |q: &QKey, poly: &UniPoly<Rat>| {
                for (kpt, pt) in nodes.iter().enumerate() {
                    bump(&mut coe, q, EqKey::Uni(o, kpt), rat_to_f64(&poly.eval(pt)));
                }
            };
            for (t, (w, basis)) in cone.blocks.iter().enumerate() {
                let blk = block_dims.len();
                block_dims.push(basis.len());
                for bi in 0..basis.len() {
                    let wr = w.mul(&basis[bi]);
                    for bj in 0..=bi {
                        let q = QKey::Uni(o, t, bi, bj);
                        psd.entry(q.clone()).or_default().push((blk, bi, bj));
                        let mut prod = wr.mul(&basis[bj]);
                        if bi != bj {
                            prod = prod.scale(&rat_int(2));
                        }
                        at_nodes(&q, &prod);
                    }
                }
            }
            for (kk, basis_k) in p_basis.iter().enumerate() {
                let q = QKey::A(a_orbit(o), kk);
                at_nodes(&q, &pade.s.mul(basis_k).neg());
            }
            let rhs = pade.s.mul(&p_fixed).add(&neg2t2r);
            for (kpt, pt) in nodes.iter().enumerate() {
                let v = rhs.eval(pt);
                if !v.is_zero() {
                    *rhs_acc.entry(EqKey::Uni(o, kpt)).or_insert(0.0) += rat_to_f64(&v);
                }
            }
        }
    }

    // Index the kept equality rows and the reduced variables.
    let mut eq_index: BTreeMap<EqKey, usize> = BTreeMap::new();
    for keys in coe.values() {
        for k in keys.keys() {
            let next = eq_index.len();
            eq_index.entry(k.clone()).or_insert(next);
        }
    }
    for k in rhs_acc.keys() {
        let next = eq_index.len();
        eq_index.entry(k.clone()).or_insert(next);
    }
    // Re-number in sorted order for determinism.
    for (j, (_, v)) in eq_index.iter_mut().enumerate() {
        *v = j;
    }
    let num_eq = eq_index.len();

    let mut qkeys: Vec<&QKey> = coe.keys().collect();
    for k in psd.keys() {
        if !coe.contains_key(k) {
            qkeys.push(k);
        }
    }
    qkeys.sort();

    let mut problem = SdpProblem::new(num_eq, block_dims);
    let mut gamma_row = usize::MAX;
    for (ridx, q) in qkeys.iter().enumerate() {
        if matches!(**q, QKey::Gamma) {
            gamma_row = ridx;
        }
        let mut free: Vec<(usize, f64)> = coe
            .get(*q)
            .map(|m| {
                m.iter()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(k, &v)| (eq_index[k], v))
                    .collect()
            })
            .unwrap_or_default();
        free.sort_unstable_by_key(|&(j, _)| j);
        let psd_row: Vec<(usize, usize, usize, f64)> = psd
            .get(*q)
            .map(|pos| {
                pos.iter()
                    .map(|&(b, i, j)| (b, i, j, if i == j { 1.0 } else { 2.0 }))
                    .collect()
            })
            .unwrap_or_default();
        problem.rows.push(SdpRow { free, psd: psd_row });
        problem.rhs.push(if matches!(**q, QKey::Gamma) { 1.0 } else { 0.0 });
    }
    for (k, j) in &eq_index {
        problem.obj_free[*j] = -rhs_acc.get(k).copied().unwrap_or(0.0);
    }
    problem.validate()?;

    let num_rows = problem.rows.len();
    Ok(CompiledLsi {
        sdp: problem,
        row_keys: Vec::new(),
        n,
        d,
        m,
        strict,
        shared_p: opts.shared_p || opts.taylor.is_some(),
        taylor: opts.taylor,
        gamma: 0,
        p_fixed,
        p_basis,
        p_vars: Vec::new(),
        phi_vars: Vec::new(),
        blocks: Vec::new(),
        endpoints,
        pade,
        symmetry: Some(SymmetricCompilation {
            group_order: group.order(),
            state_orbits: orbits,
            gamma_row,
            num_equalities: num_eq,
            num_reduced_vars: num_rows,
        }),
    })
}
