//! Sum-of-squares programs that bound log-Sobolev-type constants from below.
//!
//! The main hierarchy, indexed by `(d, m)`, certifies `gamma * E(x,x) >=
//! sum_i pi_i p_i(x_i)` on the nonnegative part of the ellipsoid
//! `||x||_pi = 1` while forcing each `p_i` to dominate `t^2 log t^2` on
//! `[0, 1/sqrt(pi_i)]` through the degree-`m` Padé substitute for the
//! logarithm. Every feasible `gamma` yields the certified bound
//! `alpha >= 1/gamma` on the log-Sobolev constant, so minimizing `gamma`
//! gives the hierarchy value `alpha_{d,m}`.
//!
//! A Taylor variant fixes all `p_i` to the odd-degree Taylor majorant of
//! `t^2 log t^2` and optimizes `gamma` alone.
//!
//! The modified-log-Sobolev hierarchy follows the same pattern on the simplex
//! `E_pi[x] = 1`: bivariate polynomials `p_ij` are squeezed below
//! `rbar (t log t) - t log s` using Padé bounds on both sides, and their
//! weighted sum is forced nonnegative on the simplex. The reported value is
//! `rho_{d,m} = 1 - rbar*`. The two-sided substitution is only a certificate
//! for `rho <= 1` territory (`rbar* >= 0`); beyond it the program is the
//! standard hierarchy value but the pointwise argument no longer applies in
//! one direction, so tests pin only directionally safe facts (positivity,
//! `rho <= 2 lambda`, consistency with an independent search).
//!
//! Strict mode (default) removes the forced degeneracy at `x = 1`: the
//! identity pins every square block to vanish there, so bases are replaced by
//! vanishing families. This restores a strictly feasible interior point
//! without changing the optimal value.

pub mod builder;
pub mod cones;
pub mod symmetry;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::markov::Chain;
use crate::poly::{
    monomial_basis, monomial_basis_polys, pade_log, taylor_majorant, vanishing_basis, Monomial,
    PadeLog, Polynomial, UniPoly,
};
use crate::ratla::rat_int;
use crate::sdp::{SdpError, SdpProblem, SdpSolution, SdpStatus, SolveOptions};
use crate::Rat;

pub use builder::{BuiltProgram, ProgramBuilder, RowFamily, RowKey};
pub use cones::{
    box_cone, chebyshev_points, interval_cone, rational_upper_inv_sqrt, subst_pair, BoxCone,
    IntervalCone, ENDPOINT_BITS,
};

#[derive(Debug, Error)]
pub enum SosError {
    #[error("the hierarchy needs d >= 2, got d = {0}")]
    DegreeTooSmall(usize),
    #[error("Taylor variant needs d >= k, got d = {d}, k = {k}")]
    TaylorBudget { d: usize, k: usize },
    #[error("degree {deg} exceeds the cone budget {budget}")]
    DegreeOverflow { deg: usize, budget: usize },
    #[error("semidefinite solve failed: {0}")]
    Sdp(#[from] SdpError),
    #[error("{0}")]
    Invalid(String),
}

/// Options for the main hierarchy build.
#[derive(Clone, Debug)]
pub struct HierarchyOptions {
    pub d: usize,
    pub m: usize,
    /// Use vanishing-at-one bases (strictly feasible program). Default true.
    pub strict: bool,
    /// One shared decision polynomial for all states instead of one per
    /// state. Sound always; lossless for state-transitive chains.
    pub shared_p: bool,
    /// `Some(k)`: fix all `p_i` to the degree `2k-1` Taylor majorant and drop
    /// the univariate constraints.
    pub taylor: Option<usize>,
    /// Dyadic bits for the interval endpoint round-up.
    pub endpoint_bits: u32,
    /// Exploit a declared state symmetry of the chain (orbit rows, tied
    /// Gram entries). Solves the same program restricted to invariant
    /// certificates; exact for vertex-transitive chains.
    pub symmetry: bool,
}

impl HierarchyOptions {
    pub fn new(d: usize, m: usize) -> Self {
        HierarchyOptions {
            d,
            m,
            strict: true,
            shared_p: false,
            taylor: None,
            endpoint_bits: ENDPOINT_BITS,
            symmetry: false,
        }
    }

    pub fn taylor(d: usize, k: usize) -> Self {
        let mut o = Self::new(d, 0);
        o.taylor = Some(k);
        o
    }
}

/// What one PSD block of a compiled program represents: the block's
/// contribution to its identity is `weight * b(x)^T Q b(x)`.
#[derive(Clone, Debug)]
pub struct BlockDescr {
    pub family: RowFamily,
    /// Multiplier polynomial (in the family's variables).
    pub weight: Polynomial<Rat>,
    /// Gram basis polynomials (in the family's variables).
    pub basis: Vec<Polynomial<Rat>>,
}

/// A compiled main-hierarchy program plus everything needed to decode and
/// re-verify its solutions.
pub struct CompiledLsi {
    pub sdp: SdpProblem,
    pub row_keys: Vec<RowKey>,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub strict: bool,
    pub shared_p: bool,
    /// `Some(k)` when the Taylor variant (degree `2k-1`) was compiled.
    pub taylor: Option<usize>,
    /// Free-variable index of `gamma`.
    pub gamma: usize,
    /// Fixed part of every decision polynomial (`2(t-1)`, or the whole
    /// Taylor majorant).
    pub p_fixed: UniPoly<Rat>,
    /// Free basis `(t-1)^k`, `k = 2..=2d` (empty in Taylor mode).
    pub p_basis: Vec<UniPoly<Rat>>,
    /// Per-state free-variable indices into the basis (all states share one
    /// list under `shared_p`).
    pub p_vars: Vec<Vec<usize>>,
    /// Free multiplier coefficients: `(monomial, variable index)`.
    pub phi_vars: Vec<(Monomial, usize)>,
    /// Block descriptors, index-aligned with `sdp.block_dims`.
    pub blocks: Vec<BlockDescr>,
    /// Certified interval endpoints per state (`>= 1/sqrt(pi_i)` exactly).
    pub endpoints: Vec<Rat>,
    /// The Padé polynomials used by the univariate constraints.
    pub pade: PadeLog,
    /// Present when the program was compiled on symmetry orbits.
    pub symmetry: Option<symmetry::SymmetricCompilation>,
}

impl CompiledLsi {
    /// Decodes the decision polynomial of `state` from a free-variable
    /// vector. For symmetric compilations (which have no per-state variables
    /// in the solver's space) this returns the fixed part only.
    pub fn p_poly_f64(&self, y: &[f64], state: usize) -> UniPoly<f64> {
        let mut p = self.p_fixed.to_f64_poly();
        if self.p_vars.is_empty() {
            return p;
        }
        for (k, &var) in self.p_vars[state.min(self.p_vars.len() - 1)].iter().enumerate() {
            p = p.add(&self.p_basis[k].to_f64_poly().scale(&y[var]));
        }
        p
    }

    /// Decodes the decision polynomial with exact coefficients.
    pub fn p_poly_rat(&self, y: &[Rat], state: usize) -> UniPoly<Rat> {
        let mut p = self.p_fixed.clone();
        if self.p_vars.is_empty() {
            return p;
        }
        for (k, &var) in self.p_vars[state.min(self.p_vars.len() - 1)].iter().enumerate() {
            p = p.add(&self.p_basis[k].scale(&y[var]));
        }
        p
    }
}

/// Block sizes and counts of a compiled semidefinite problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeReport {
    pub num_rows: usize,
    pub num_free: usize,
    pub block_dims: Vec<usize>,
    pub total_psd_dim: usize,
}

pub fn size_report(p: &SdpProblem) -> SizeReport {
    SizeReport {
        num_rows: p.rows.len(),
        num_free: p.num_free,
        block_dims: p.block_dims.clone(),
        total_psd_dim: p.block_dims.iter().sum(),
    }
}

/// Binomial coefficient as usize (panics on overflow).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).expect("binomial overflows usize")
}

/// Solved value of one hierarchy cell.
pub struct HierarchyResult {
    pub d: usize,
    pub m: usize,
    pub gamma_star: f64,
    /// `1/gamma_star`: the certified-by-construction lower bound reported by
    /// the float path (exact certification is a separate step).
    pub alpha_lower: f64,
    pub status: SdpStatus,
    pub eps_aff: f64,
    pub min_block_eig: f64,
    pub sizes: SizeReport,
    pub solution: SdpSolution,
}

/// The weighted-sphere cone: appends `sigma_0 + sum_i x_i sigma_i` blocks and
/// the free multiplier `phi * g` for one identity (`g` the sphere or mean
/// constraint), returning the block descriptors and the `phi` variable
/// indices.
///
/// Gram bases are reduced modulo the ideal generated by `g`: only monomials
/// whose last-variable exponent is at most `last_var_cap` are kept (1 when
/// `g` is quadratic in the last variable, 0 when it is linear). Without this
/// reduction the program has a primal recession ray — `g` itself lies in the
/// span of the Gram basis, so adding `(coeffs g)(coeffs g)^T` to the first
/// Gram block while subtracting `g` from `phi` changes nothing — which forces
/// every dual-feasible slack to be singular and stalls interior-point solves
/// well short of tight tolerances. The reduction is value-lossless: any full
/// Gram matrix is carried to a reduced one by the congruence that rewrites
/// basis elements modulo `g`, with the discarded multiples absorbed by `phi`.
#[allow(clippy::too_many_arguments)]
fn append_sphere_cone(
    b: &mut ProgramBuilder,
    family: RowFamily,
    pi: &[Rat],
    d: usize,
    strict: bool,
    multiplier_poly: &Polynomial<Rat>,
    phi_deg: usize,
    last_var_cap: u8,
    tag: &str,
) -> (Vec<BlockDescr>, Vec<(Monomial, usize)>) {
    let n = pi.len();
    let mut blocks = Vec::new();
    let last_var_cap = if std::env::var_os("LOGSOB_NO_QUOTIENT").is_some() {
        u8::MAX
    } else {
        last_var_cap
    };
    let sos_basis = |deg: usize| -> Vec<Polynomial<Rat>> {
        let full = if strict {
            vanishing_basis(n, deg)
        } else {
            monomial_basis_polys(n, deg)
        };
        full.into_iter()
            .filter(|p| p.terms().all(|(mono, _)| mono.0[n - 1] <= last_var_cap))
            .collect()
    };
    let basis0 = sos_basis(d);
    let one = Polynomial::constant(n, Rat::one());
    b.add_gram_block(family, &one, &basis0);
    blocks.push(BlockDescr { family, weight: one, basis: basis0 });
    let basis_i = sos_basis(d - 1);
    for i in 0..n {
        let xi = Polynomial::var(i, n);
        b.add_gram_block(family, &xi, &basis_i);
        blocks.push(BlockDescr { family, weight: xi, basis: basis_i.clone() });
    }
    let mut phi_vars = Vec::new();
    for beta in monomial_basis(n, phi_deg) {
        let var = b.add_free(format!("{tag}[{:?}]", beta.0));
        let poly = Polynomial::monomial(beta.clone(), Rat::one()).mul(multiplier_poly);
        b.add_free_poly(family, var, &poly);
        phi_vars.push((beta, var));
    }
    (blocks, phi_vars)
}

/// Builds the main hierarchy program for a chain.
pub fn build_lsi_hierarchy(chain: &Chain, opts: &HierarchyOptions) -> Result<CompiledLsi, SosError> {
    let d = opts.d;
    let m = opts.m;
    if d < 2 {
        return Err(SosError::DegreeTooSmall(d));
    }
    if let Some(k) = opts.taylor {
        if k < 2 {
            return Err(SosError::Invalid("Taylor variant needs k >= 2".into()));
        }
        if d < k {
            return Err(SosError::TaylorBudget { d, k });
        }
    }
    if opts.symmetry {
        return symmetry::build_lsi_symmetric(chain, opts);
    }
    let n = chain.len();
    let pi = chain.pi();
    let pade = pade_log(m);
    let mut b = ProgramBuilder::new();
    let gamma = b.add_free("gamma");

    // Decision polynomials p_i(t) = p_fixed(t) + sum_k a_k (t-1)^k.
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
    let p_vars: Vec<Vec<usize>> = if opts.shared_p || opts.taylor.is_some() {
        let vars: Vec<usize> =
            (0..p_basis.len()).map(|k| b.add_free(format!("p.a{}", k + 2))).collect();
        vec![vars; n.max(1)]
    } else {
        (0..n)
            .map(|i| (0..p_basis.len()).map(|k| b.add_free(format!("p{i}.a{}", k + 2))).collect())
            .collect()
    };

    // Main identity:
    //   sigma_0 + sum_i x_i sigma_i + phi (||x||_pi^2 - 1)
    //     - gamma E + sum_i pi_i p_i(x_i) = 0.
    b.add_free_poly(RowFamily::Main, gamma, &chain.dirichlet_poly().neg());
    let mut rhs_main = Polynomial::zero(n);
    for i in 0..n {
        let fixed_i = p_fixed.to_multivariate(n, i).scale(&pi[i]);
        rhs_main = rhs_main.sub(&fixed_i);
        for (k, basis_k) in p_basis.iter().enumerate() {
            let poly = basis_k.to_multivariate(n, i).scale(&pi[i]);
            b.add_free_poly(RowFamily::Main, p_vars[i][k], &poly);
        }
    }
    b.add_rhs_poly(RowFamily::Main, &rhs_main);
    let mut sphere = chain.pi_norm_poly();
    sphere.add_term(Monomial::one(n), rat_int(-1));
    let (mut blocks, phi_vars) = append_sphere_cone(
        &mut b,
        RowFamily::Main,
        pi,
        d,
        opts.strict,
        &sphere,
        2 * d - 2,
        1,
        "phi",
    );

    // Univariate constraints S_m p_i - 2 t^2 (t-1) R_m >= 0 on [0, b_i].
    let mut endpoints = Vec::with_capacity(n);
    if opts.taylor.is_none() {
        let budget = 2 * (d + m.div_ceil(2));
        let strict_pt = Rat::one();
        // -2 t^2 (t-1) R_m(t).
        let neg2t2 = UniPoly::new(vec![Rat::zero(), Rat::zero(), Rat::zero(), rat_int(-2)])
            .add(&UniPoly::new(vec![Rat::zero(), Rat::zero(), rat_int(2)]));
        let tail = neg2t2.mul(&pade.r);
        for i in 0..n {
            let endpoint = rational_upper_inv_sqrt(&pi[i], opts.endpoint_bits);
            let family = RowFamily::Uni(i);
            b.set_value_frame(family, chebyshev_points(&Rat::zero(), &endpoint, budget + 1));
            let cone = interval_cone(
                &Rat::zero(),
                &endpoint,
                budget,
                if opts.strict { Some(&strict_pt) } else { None },
            );
            for (w, basis) in &cone.blocks {
                let wm = w.to_multivariate(1, 0);
                let bm: Vec<Polynomial<Rat>> =
                    basis.iter().map(|q| q.to_multivariate(1, 0)).collect();
                b.add_gram_block(family, &wm, &bm);
                blocks.push(BlockDescr { family, weight: wm, basis: bm });
            }
            // cone + sum_k a_k (-S_m (t-1)^k) = S_m p_fixed - 2 t^2 (t-1) R_m.
            for (k, basis_k) in p_basis.iter().enumerate() {
                let coeff = pade.s.mul(basis_k).neg().to_multivariate(1, 0);
                b.add_free_poly(family, p_vars[i][k], &coeff);
            }
            let rhs = pade.s.mul(&p_fixed).add(&tail).to_multivariate(1, 0);
            b.add_rhs_poly(family, &rhs);
            endpoints.push(endpoint);
        }
    }

    let built = b.build(&[(gamma, 1.0)]);
    Ok(CompiledLsi {
        sdp: built.sdp,
        row_keys: built.row_keys,
        n,
        d,
        m,
        strict: opts.strict,
        shared_p: opts.shared_p || opts.taylor.is_some(),
        taylor: opts.taylor,
        gamma,
        p_fixed,
        p_basis,
        p_vars,
        phi_vars,
        blocks,
        endpoints,
        pade,
        symmetry: None,
    })
}

/// The Taylor variant: all decision polynomials fixed to the degree `2k-1`
/// Taylor majorant of `t^2 log t^2`; only `gamma` is optimized.
pub fn build_lsi_taylor(chain: &Chain, d: usize, k: usize) -> Result<CompiledLsi, SosError> {
    build_lsi_hierarchy(chain, &HierarchyOptions::taylor(d, k))
}

/// Solves a compiled main-hierarchy program.
pub fn solve_lsi(c: &CompiledLsi, opts: &SolveOptions) -> Result<HierarchyResult, SosError> {
    let solution = c.sdp.solve(opts)?;
    let gamma_star = match &c.symmetry {
        // Orbit compilations run through the solver's dual: the reduced
        // variables are `-lambda`, and the objective cross-checks as
        // `-(primal objective)`.
        Some(sym) => {
            let lam = solution.lambda.get(sym.gamma_row).copied().unwrap_or(0.0);
            if lam != 0.0 {
                -lam
            } else {
                -solution.objective
            }
        }
        None => solution.y[c.gamma],
    };
    let diag = c.sdp.residuals(&solution.y, &solution.blocks);
    Ok(HierarchyResult {
        d: c.d,
        m: c.m,
        gamma_star,
        alpha_lower: if gamma_star > 0.0 { 1.0 / gamma_star } else { f64::NAN },
        status: solution.status,
        eps_aff: diag.eps_aff,
        min_block_eig: diag.min_eig,
        sizes: size_report(&c.sdp),
        solution,
    })
}

/// Builds and solves one hierarchy cell with default options.
pub fn lsi_lower_bound(chain: &Chain, d: usize, m: usize) -> Result<HierarchyResult, SosError> {
    let c = build_lsi_hierarchy(chain, &HierarchyOptions::new(d, m))?;
    solve_lsi(&c, &SolveOptions::default())
}

/// A compiled modified-log-Sobolev program.
pub struct CompiledMlsi {
    pub sdp: SdpProblem,
    pub row_keys: Vec<RowKey>,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub strict: bool,
    /// Free-variable index of `rho_bar`.
    pub rho_bar: usize,
    /// Ordered pairs `(i, j)` with `K_ij > 0`, index-aligned with the
    /// `RowFamily::Pair` indices.
    pub pairs: Vec<(usize, usize)>,
    /// Bivariate basis of each decision polynomial.
    pub q_basis: Vec<Polynomial<Rat>>,
    /// Per-pair free-variable indices into `q_basis`.
    pub q_vars: Vec<Vec<usize>>,
    pub psi_vars: Vec<(Monomial, usize)>,
    pub blocks: Vec<BlockDescr>,
    pub pade: PadeLog,
}

/// Builds the modified-log-Sobolev hierarchy program.
pub fn build_mlsi_hierarchy(
    chain: &Chain,
    d: usize,
    m: usize,
    strict: bool,
) -> Result<CompiledMlsi, SosError> {
    if d < 2 {
        return Err(SosError::DegreeTooSmall(d));
    }
    let n = chain.len();
    let pi = chain.pi();
    let kernel = chain.kernel();
    let pade = pade_log(m);
    let mut b = ProgramBuilder::new();
    let rho_bar = b.add_free("rho_bar");

    // Decision polynomial basis: all bivariate monomials of degree <= 2d in
    // the shifted variables (strict pins p(1,1) = 0 by dropping the constant).
    let t1 = if strict {
        Polynomial::var(0, 2).sub(&Polynomial::constant(2, Rat::one()))
    } else {
        Polynomial::var(0, 2)
    };
    let s1 = if strict {
        Polynomial::var(1, 2).sub(&Polynomial::constant(2, Rat::one()))
    } else {
        Polynomial::var(1, 2)
    };
    let mut tp = vec![Polynomial::constant(2, Rat::one())];
    let mut sp = vec![Polynomial::constant(2, Rat::one())];
    for j in 1..=2 * d {
        tp.push(tp[j - 1].mul(&t1));
        sp.push(sp[j - 1].mul(&s1));
    }
    let mut q_basis = Vec::new();
    for mono in monomial_basis(2, 2 * d) {
        let (a, bb) = (mono.0[0] as usize, mono.0[1] as usize);
        if strict && a + bb == 0 {
            continue;
        }
        q_basis.push(tp[a].mul(&sp[bb]));
    }

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if !kernel[i][j].is_zero() {
                pairs.push((i, j));
            }
        }
    }
    let q_vars: Vec<Vec<usize>> = pairs
        .iter()
        .map(|(i, j)| {
            (0..q_basis.len()).map(|k| b.add_free(format!("p[{i},{j}].c{k}"))).collect()
        })
        .collect();

    // Simplex identity: sigma_0 + sum_l x_l sigma_l + psi (E_pi[x] - 1)
    //   - sum_pairs pi_i K_ij p_ij(x_i, x_j) = 0.
    for (pidx, &(i, j)) in pairs.iter().enumerate() {
        let w = -(&pi[i] * &kernel[i][j]);
        for (k, q) in q_basis.iter().enumerate() {
            let poly = subst_pair(q, i, j, n).scale(&w);
            b.add_free_poly(RowFamily::Main, q_vars[pidx][k], &poly);
        }
    }
    let mut mean = Polynomial::zero(n);
    for (i, pii) in pi.iter().enumerate() {
        mean.add_term(Monomial::var(i, n), pii.clone());
    }
    mean.add_term(Monomial::one(n), rat_int(-1));
    let (mut blocks, psi_vars) =
        append_sphere_cone(&mut b, RowFamily::Main, pi, d, strict, &mean, 2 * d - 1, 0, "psi");

    // Per-pair box identity: with A = (t-1) Rbar(t) S(s) and
    // B = t (s-1) R(s) Sbar(t),
    //   cone + sum_k c_k (Sbar S q_k) - rho_bar A = -B.
    let r_rev = pade.r_rev().to_multivariate(2, 0);
    let s_rev_t = pade.s_rev().to_multivariate(2, 0);
    let s_in_s = pade.s.to_multivariate(2, 1);
    let r_in_s = pade.r.to_multivariate(2, 1);
    let tvar = Polynomial::<Rat>::var(0, 2);
    let svar = Polynomial::<Rat>::var(1, 2);
    let one2 = Polynomial::constant(2, Rat::one());
    let a_poly = tvar.sub(&one2).mul(&r_rev).mul(&s_in_s);
    let b_poly = tvar.mul(&svar.sub(&one2)).mul(&r_in_s).mul(&s_rev_t);
    let sbar_s = s_rev_t.mul(&s_in_s);
    for (pidx, &(i, j)) in pairs.iter().enumerate() {
        let family = RowFamily::Pair(pidx);
        let cone = box_cone(&pi[i], &pi[j], d + m, strict);
        for (w, basis) in &cone.blocks {
            b.add_gram_block(family, w, basis);
            blocks.push(BlockDescr { family, weight: w.clone(), basis: basis.clone() });
        }
        for (k, q) in q_basis.iter().enumerate() {
            b.add_free_poly(family, q_vars[pidx][k], &sbar_s.mul(q));
        }
        b.add_free_poly(family, rho_bar, &a_poly.neg());
        b.add_rhs_poly(family, &b_poly.neg());
    }

    let built = b.build(&[(rho_bar, 1.0)]);
    Ok(CompiledMlsi {
        sdp: built.sdp,
        row_keys: built.row_keys,
        n,
        d,
        m,
        strict,
        rho_bar,
        pairs,
        q_basis,
        q_vars,
        psi_vars,
        blocks,
        pade,
    })
}

/// Solved value of one modified-log-Sobolev cell.
pub struct MlsiResult {
    pub d: usize,
    pub m: usize,
    pub rho_bar_star: f64,
    /// `1 - rho_bar_star`.
    pub rho: f64,
    pub status: SdpStatus,
    pub eps_aff: f64,
    pub sizes: SizeReport,
    pub solution: SdpSolution,
}

pub fn solve_mlsi(c: &CompiledMlsi, opts: &SolveOptions) -> Result<MlsiResult, SosError> {
    let solution = c.sdp.solve(opts)?;
    let rho_bar_star = solution.y[c.rho_bar];
    let diag = c.sdp.residuals(&solution.y, &solution.blocks);
    Ok(MlsiResult {
        d: c.d,
        m: c.m,
        rho_bar_star,
        rho: 1.0 - rho_bar_star,
        status: solution.status,
        eps_aff: diag.eps_aff,
        sizes: size_report(&c.sdp),
        solution,
    })
}

pub fn mlsi_lower_bound(chain: &Chain, d: usize, m: usize) -> Result<MlsiResult, SosError> {
    let c = build_mlsi_hierarchy(chain, d, m, true)?;
    solve_mlsi(&c, &SolveOptions::default())
}

/// Encodes `p >= 0 on [a, b]` at the given budget as a feasibility problem
/// (one cone identity, no free variables).
pub fn interval_nonneg_program(
    p: &UniPoly<Rat>,
    a: &Rat,
    b: &Rat,
    budget: usize,
) -> Result<BuiltProgram, SosError> {
    if !p.is_zero() && p.degree() > budget {
        return Err(SosError::DegreeOverflow { deg: p.degree(), budget });
    }
    let cone = interval_cone(a, b, budget, None);
    let mut builder = ProgramBuilder::new();
    for (w, basis) in &cone.blocks {
        let wm = w.to_multivariate(1, 0);
        let bm: Vec<Polynomial<Rat>> = basis.iter().map(|q| q.to_multivariate(1, 0)).collect();
        builder.add_gram_block(RowFamily::Uni(0), &wm, &bm);
    }
    builder.add_rhs_poly(RowFamily::Uni(0), &p.to_multivariate(1, 0));
    Ok(builder.build(&[]))
}

/// Encodes `f` nonnegative on the weighted sphere section
/// `{x >= 0, ||x||_pi^2 = 1}` at relaxation order `d` as a feasibility
/// problem.
pub fn hyperellipsoid_nonneg_program(
    f: &Polynomial<Rat>,
    pi: &[Rat],
    d: usize,
    strict: bool,
) -> Result<BuiltProgram, SosError> {
    if !f.is_zero() && f.degree() > 2 * d {
        return Err(SosError::DegreeOverflow { deg: f.degree(), budget: 2 * d });
    }
    let n = pi.len();
    assert_eq!(f.nvars(), n);
    let mut builder = ProgramBuilder::new();
    let mut sphere = Polynomial::zero(n);
    for (i, pii) in pi.iter().enumerate() {
        let mut e = vec![0u8; n];
        e[i] = 2;
        sphere.add_term(Monomial(e), pii.clone());
    }
    sphere.add_term(Monomial::one(n), rat_int(-1));
    append_sphere_cone(&mut builder, RowFamily::Main, pi, d, strict, &sphere, 2 * d - 2, 1, "phi");
    builder.add_rhs_poly(RowFamily::Main, f);
    Ok(builder.build(&[]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratla::rat_i64;

    fn rel_err(x: f64, target: f64) -> f64 {
        (x - target).abs() / target.abs()
    }

    #[test]
    fn block_shape_matches_the_counting_formulas() {
        // Non-strict, n = 3, d = 2: the full monomial count C(5,2)=10 for the
        // main block loses the one degree-(d-2) multiple of the sphere
        // polynomial (the basis is reduced modulo the sphere ideal), giving 9;
        // the weighted blocks keep all C(4,1)=4 degree-1 monomials. Strict
        // mode shrinks every block by one more (no constant element).
        let chain = Chain::complete(3).unwrap();
        let mut opts = HierarchyOptions::new(2, 1);
        opts.strict = false;
        let c = build_lsi_hierarchy(&chain, &opts).unwrap();
        assert_eq!(&c.sdp.block_dims[..4], &[9, 4, 4, 4]);
        opts.strict = true;
        let c = build_lsi_hierarchy(&chain, &opts).unwrap();
        assert_eq!(&c.sdp.block_dims[..4], &[8, 3, 3, 3]);
        // Univariate blocks also lose their constant basis element in strict
        // mode: budget 2(d + ceil(m/2)) = 6 gives sizes {4, 3} -> {3, 2}.
        assert_eq!(&c.sdp.block_dims[4..6], &[3, 2]);

        // n = 10, d = 3: C(13,3) = 286 monomials of degree <= 3, minus the
        // C(11,1) = 11 reducible ones (degree <= 1 times the sphere), is 275.
        let chain = Chain::complete(10).unwrap();
        let mut opts = HierarchyOptions::new(3, 1);
        opts.strict = false;
        let c = build_lsi_hierarchy(&chain, &opts).unwrap();
        assert_eq!(c.sdp.block_dims[0], 286 - 11);
        assert_eq!(size_report(&c.sdp).block_dims[0], 275);
    }

    #[test]
    fn compiled_identity_reproduces_itself_on_a_feasible_point() {
        // Solve a small cell, then check the solver-reported affine residual:
        // the Gram blocks and free variables must reassemble the identity.
        let chain = Chain::complete(3).unwrap();
        let c = build_lsi_hierarchy(&chain, &HierarchyOptions::new(2, 1)).unwrap();
        let res = solve_lsi(&c, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SdpStatus::Optimal);
        assert!(res.eps_aff < 1e-7, "eps_aff = {}", res.eps_aff);
        assert!(res.min_block_eig > -1e-9, "min eig = {}", res.min_block_eig);
    }

    #[test]
    fn complete_three_at_d3_m5_matches_the_known_constant() {
        let chain = Chain::complete(3).unwrap();
        let res = lsi_lower_bound(&chain, 3, 5).unwrap();
        assert_eq!(res.status, SdpStatus::Optimal);
        let target = 0.72134751987;
        assert!(
            rel_err(res.alpha_lower, target) < 1e-6,
            "alpha = {}, want {}",
            res.alpha_lower,
            target
        );
        // Soundness: never above the closed form.
        assert!(res.alpha_lower <= chain.known_log_sobolev().unwrap() + 1e-7);
    }

    #[test]
    fn decision_polynomial_decodes_with_correct_side_conditions() {
        let chain = Chain::complete(3).unwrap();
        let c = build_lsi_hierarchy(&chain, &HierarchyOptions::new(2, 3)).unwrap();
        let res = solve_lsi(&c, &SolveOptions::default()).unwrap();
        let p = c.p_poly_f64(&res.solution.y, 0);
        // p(1) = 0 and p'(1) = 2 are hardwired by the parametrization.
        assert!(p.eval_f64(1.0).abs() < 1e-12);
        let dp = p.derivative();
        assert!((dp.eval_f64(1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_variant_is_dominated_by_the_pade_cell() {
        // Same relaxation order: the fixed Taylor majorant can only do worse
        // (the Padé program optimizes over p and its majorant is tighter).
        let chain = Chain::complete(3).unwrap();
        let tay = solve_lsi(
            &build_lsi_taylor(&chain, 3, 3).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        let pad = lsi_lower_bound(&chain, 3, 5).unwrap();
        assert_eq!(tay.status, SdpStatus::Optimal);
        assert!(tay.alpha_lower > 0.0);
        assert!(
            tay.alpha_lower < pad.alpha_lower,
            "taylor {} should fall below pade {}",
            tay.alpha_lower,
            pad.alpha_lower
        );
        // And it stays a sound lower bound.
        assert!(tay.alpha_lower <= chain.known_log_sobolev().unwrap() + 1e-7);
    }

    #[test]
    fn shared_decision_polynomial_is_lossless_on_a_transitive_chain() {
        let chain = Chain::complete(4).unwrap();
        let mut opts = HierarchyOptions::new(2, 3);
        opts.shared_p = true;
        let shared = solve_lsi(
            &build_lsi_hierarchy(&chain, &opts).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        let per_state = lsi_lower_bound(&chain, 2, 3).unwrap();
        assert!(
            (shared.alpha_lower - per_state.alpha_lower).abs() < 1e-7,
            "shared {} vs per-state {}",
            shared.alpha_lower,
            per_state.alpha_lower
        );
    }

    #[test]
    fn orbit_compilation_agrees_with_the_direct_one() {
        for chain in [Chain::complete(4).unwrap(), Chain::cycle(5).unwrap()] {
            let direct = lsi_lower_bound(&chain, 2, 3).unwrap();
            let mut opts = HierarchyOptions::new(2, 3);
            opts.symmetry = true;
            let c = build_lsi_hierarchy(&chain, &opts).unwrap();
            assert!(c.symmetry.is_some());
            let sym = solve_lsi(&c, &SolveOptions::default()).unwrap();
            assert!(
                (sym.alpha_lower - direct.alpha_lower).abs() < 1e-6,
                "{}: orbit {} vs direct {}",
                chain.name(),
                sym.alpha_lower,
                direct.alpha_lower
            );
            // The reduction must actually shrink the program.
            assert!(sym.sizes.num_rows < direct.sizes.num_rows);
        }
    }

    #[test]
    fn automorphism_groups_have_the_expected_orders() {
        use super::symmetry::chain_automorphism_group;
        let g = chain_automorphism_group(&Chain::complete(5).unwrap());
        assert!(g.order().is_none(), "complete graph should use S_n");
        let g = chain_automorphism_group(&Chain::cycle(5).unwrap());
        assert_eq!(g.order(), Some(10));
        let g = chain_automorphism_group(&Chain::cycle(7).unwrap());
        assert_eq!(g.order(), Some(14));
        let g = chain_automorphism_group(&Chain::hypercube(3).unwrap());
        assert_eq!(g.order(), Some(48));
        let g = chain_automorphism_group(&Chain::petersen());
        assert_eq!(g.order(), Some(120));
        let g = chain_automorphism_group(&Chain::stick(rat_i64(1, 4)).unwrap());
        assert_eq!(g.order(), Some(1));
        assert!(g.is_trivial());
    }

    #[test]
    fn interval_feasibility_probe_distinguishes_signs() {
        // t >= 0 on [0,1] is certifiable at budget 1; t - 2 is not.
        let t = UniPoly::<Rat>::x();
        let prog = interval_nonneg_program(&t, &Rat::zero(), &Rat::one(), 1).unwrap();
        let sol = prog.sdp.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let bad = t.sub(&UniPoly::constant(rat_int(2)));
        let prog = interval_nonneg_program(&bad, &Rat::zero(), &Rat::one(), 1).unwrap();
        let sol = prog.sdp.solve(&SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn mlsi_on_the_symmetric_two_state_chain_reaches_two_lambda() {
        // two_state(1/2) has spectral gap 1 and modified constant 2 = 2*lambda;
        // the m = 3 cell must get essentially there and never beyond.
        let chain = Chain::two_state(rat_i64(1, 2)).unwrap();
        let res = mlsi_lower_bound(&chain, 2, 3).unwrap();
        assert_eq!(res.status, SdpStatus::Optimal);
        let two_lambda = 2.0 * chain.poincare_constant();
        assert!(res.rho > 1.99, "rho = {}", res.rho);
        assert!(res.rho <= two_lambda + 1e-8, "rho = {} > 2λ", res.rho);
    }

    #[test]
    fn mlsi_dominates_four_alpha_on_reversible_chains() {
        for chain in [
            Chain::complete(3).unwrap(),
            Chain::two_state(rat_i64(1, 4)).unwrap(),
        ] {
            let rho = mlsi_lower_bound(&chain, 2, 3).unwrap();
            let alpha = lsi_lower_bound(&chain, 2, 3).unwrap();
            assert!(
                rho.rho >= 4.0 * alpha.alpha_lower - 1e-6,
                "{}: rho {} < 4 alpha {}",
                chain.name(),
                rho.rho,
                alpha.alpha_lower
            );
            assert!(rho.rho <= 2.0 * chain.poincare_constant() + 1e-8);
        }
    }

    #[test]
    fn hierarchy_rejects_undersized_degrees() {
        let chain = Chain::complete(3).unwrap();
        assert!(matches!(
            build_lsi_hierarchy(&chain, &HierarchyOptions::new(1, 2)),
            Err(SosError::DegreeTooSmall(1))
        ));
        assert!(matches!(
            build_lsi_taylor(&chain, 2, 3),
            Err(SosError::TaylorBudget { d: 2, k: 3 })
        ));
        assert!(build_mlsi_hierarchy(&chain, 1, 2, true).is_err());
    }
}
