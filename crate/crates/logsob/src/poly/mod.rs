//! Multivariate polynomial arithmetic over exact rationals or floats.
//!
//! Terms live in a `BTreeMap` keyed by monomials in graded lexicographic order
//! (total degree first, ties lexicographic), so iteration order — and therefore
//! every downstream constraint ordering — is deterministic.

pub mod pade;
pub mod uni;

use std::collections::BTreeMap;

use crate::Rat;

pub use pade::{pade_log, taylor_majorant, PadeLog};
pub use uni::UniPoly;

/// Coefficient ring: implemented by `f64` and by exact `Rat`.
///
/// Mixing rings is a compile error by construction; the only runtime contract is
/// that operands agree on the number of variables.
pub trait Coeff: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_ref(&self, o: &Self) -> Self;
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn div_ref(&self, o: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn from_int(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn div_ref(&self, o: &Self) -> Self {
        self / o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for Rat {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn div_ref(&self, o: &Self) -> Self {
        self / o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn from_int(v: i64) -> Self {
        crate::ratla::rat_int(v)
    }
    fn to_f64(&self) -> f64 {
        crate::ratla::rat_to_f64(self)
    }
}

/// Exponent vector with graded lexicographic ordering.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u8>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(i: usize, nvars: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.0.len(), o.0.len(), "monomial nvars mismatch");
        Monomial(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    /// Number of distinct variables appearing.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&e| e > 0).count()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial<C: Coeff> {
    nvars: usize,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> Polynomial<C> {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn var(i: usize, nvars: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(i, nvars), C::one());
        p
    }

    pub fn monomial(m: Monomial, c: C) -> Self {
        let mut p = Self::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        assert_eq!(m.nvars(), self.nvars, "monomial nvars mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get().add_ref(&c);
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars, "polynomial nvars mismatch");
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars, "polynomial nvars mismatch");
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.neg_ref());
        }
        r
    }

    pub fn neg(&self) -> Self {
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c = c.neg_ref();
        }
        r
    }

    pub fn scale(&self, s: &C) -> Self {
        if s.is_zero() {
            return Self::zero(self.nvars);
        }
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c = c.mul_ref(s);
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars, "polynomial nvars mismatch");
        let mut r = Self::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                r.add_term(ma.mul(mb), ca.mul_ref(cb));
            }
        }
        r
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut r = Self::constant(self.nvars, C::one());
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    /// Substitute a univariate polynomial for variable `i`.
    pub fn subst_var(&self, i: usize, u: &UniPoly<C>) -> Self {
        assert!(i < self.nvars, "variable index out of range");
        let u_multi = u.to_multivariate(self.nvars, i);
        let max_pow = self
            .terms
            .keys()
            .map(|m| m.0[i] as usize)
            .max()
            .unwrap_or(0);
        let mut powers = Vec::with_capacity(max_pow + 1);
        powers.push(Self::constant(self.nvars, C::one()));
        for k in 1..=max_pow {
            powers.push(powers[k - 1].mul(&u_multi));
        }
        let mut r = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let k = m.0[i] as usize;
            let mut rest = m.clone();
            rest.0[i] = 0;
            let base = Self::monomial(rest, c.clone());
            r = r.add(&base.mul(&powers[k]));
        }
        r
    }

    pub fn eval(&self, pt: &[C]) -> C {
        assert_eq!(pt.len(), self.nvars, "evaluation point length mismatch");
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    t = t.mul_ref(&pt[i]);
                }
            }
            acc = acc.add_ref(&t);
        }
        acc
    }

    /// Gradient evaluated at a point.
    pub fn grad_eval(&self, pt: &[C]) -> Vec<C> {
        assert_eq!(pt.len(), self.nvars, "evaluation point length mismatch");
        let mut g = vec![C::zero(); self.nvars];
        for (m, c) in &self.terms {
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut t = c.mul_ref(&C::from_int(e as i64));
                for (j, &ej) in m.0.iter().enumerate() {
                    let p = if j == i { ej - 1 } else { ej };
                    for _ in 0..p {
                        t = t.mul_ref(&pt[j]);
                    }
                }
                g[i] = g[i].add_ref(&t);
            }
        }
        g
    }

    /// Hessian matrix evaluated at a point (dense, row-major).
    pub fn hess_eval(&self, pt: &[C]) -> Vec<Vec<C>> {
        assert_eq!(pt.len(), self.nvars, "evaluation point length mismatch");
        let n = self.nvars;
        let mut h = vec![vec![C::zero(); n]; n];
        for (m, c) in &self.terms {
            for i in 0..n {
                let ei = m.0[i];
                if ei == 0 {
                    continue;
                }
                for j in 0..n {
                    let ej = m.0[j];
                    let factor = if i == j {
                        if ei < 2 {
                            continue;
                        }
                        (ei as i64) * (ei as i64 - 1)
                    } else {
                        if ej == 0 {
                            continue;
                        }
                        (ei as i64) * (ej as i64)
                    };
                    let mut t = c.mul_ref(&C::from_int(factor));
                    for (k, &ek) in m.0.iter().enumerate() {
                        let mut p = ek;
                        if k == i {
                            p -= 1;
                        }
                        if k == j {
                            p -= 1;
                        }
                        for _ in 0..p {
                            t = t.mul_ref(&pt[k]);
                        }
                    }
                    h[i][j] = h[i][j].add_ref(&t);
                }
            }
        }
        h
    }

    /// Largest absolute coefficient, viewed as f64.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Apply a variable permutation: variable `i` becomes variable `perm[i]`.
    pub fn permute_vars(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.nvars, "permutation length mismatch");
        let mut r = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut e = vec![0u8; self.nvars];
            for (i, &ei) in m.0.iter().enumerate() {
                e[perm[i]] += ei;
            }
            r.add_term(Monomial(e), c.clone());
        }
        r
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Polynomial<D> {
        let mut r = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            r.add_term(m.clone(), f(c));
        }
        r
    }
}

impl Polynomial<Rat> {
    pub fn to_f64_poly(&self) -> Polynomial<f64> {
        self.map_coeffs(|c| c.to_f64())
    }
}

impl Polynomial<f64> {
    /// Max absolute coefficient difference; both polynomials must share nvars.
    pub fn max_coeff_diff(&self, o: &Self) -> f64 {
        assert_eq!(self.nvars, o.nvars, "polynomial nvars mismatch");
        self.sub(o).max_abs_coeff()
    }
}

/// All monomials of total degree at most `d` in `nvars` variables, graded-lex
/// ascending. Length is C(nvars + d, d).
pub fn monomial_basis(nvars: usize, d: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; nvars];
    gen_monomials(nvars, d, 0, &mut cur, &mut out);
    out.sort();
    out
}

fn gen_monomials(nvars: usize, d: usize, i: usize, cur: &mut Vec<u8>, out: &mut Vec<Monomial>) {
    if i == nvars {
        out.push(Monomial(cur.clone()));
        return;
    }
    let used: usize = cur[..i].iter().map(|&e| e as usize).sum();
    for e in 0..=(d - used) as u8 {
        cur[i] = e;
        gen_monomials(nvars, d, i + 1, cur, out);
    }
    cur[i] = 0;
}

/// The vanishing-at-one basis {x^gamma - 1 : 0 < |gamma| <= d}, used to restore
/// strict feasibility: products of its elements span exactly the polynomials with
/// p(1) = 0 and grad p(1) = 0.
pub fn vanishing_basis<C: Coeff>(nvars: usize, d: usize) -> Vec<Polynomial<C>> {
    monomial_basis(nvars, d)
        .into_iter()
        .filter(|m| m.degree() > 0)
        .map(|m| {
            let mut p = Polynomial::monomial(m, C::one());
            p.add_term(Monomial::one(nvars), C::one().neg_ref());
            p
        })
        .collect()
}

/// Plain monomial basis as polynomials.
pub fn monomial_basis_polys<C: Coeff>(nvars: usize, d: usize) -> Vec<Polynomial<C>> {
    monomial_basis(nvars, d)
        .into_iter()
        .map(|m| Polynomial::monomial(m, C::one()))
        .collect()
}

/// Explicit weighted squares summing to (sum_{j=0}^{d-1} ||x||_pi^{2j}) * ||x-1||_pi^2.
///
/// Each entry is `(w, g)` with `w > 0` rational and the identity
/// `sum w * g^2 = target` exact. Term count grows like n^d; intended for the
/// small-instance identity checks documenting why the hyperellipsoid program is
/// feasible for large gamma.
pub fn var_pi_squares(pi: &[Rat], d: usize) -> Vec<(Rat, Polynomial<Rat>)> {
    let n = pi.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; 1];
    for len in 1..=d {
        idx.clear();
        idx.resize(len, 0);
        loop {
            // weight = prod pi_{alpha_k}; poly = (x_{alpha_1} - 1) x_{alpha_2} ... x_{alpha_len}
            let mut w = Rat::one();
            for &a in idx.iter() {
                w = w.mul_ref(&pi[a]);
            }
            let mut g = Polynomial::<Rat>::var(idx[0], n);
            g.add_term(Monomial::one(n), Rat::from_int(-1));
            for &a in &idx[1..] {
                g = g.mul(&Polynomial::var(a, n));
            }
            out.push((w, g));
            // advance multi-index over [n]^len
            let mut k = len;
            loop {
                if k == 0 {
                    break;
                }
                idx[k - 1] += 1;
                if idx[k - 1] < n {
                    break;
                }
                idx[k - 1] = 0;
                k -= 1;
            }
            if k == 0 {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratla::{rat_i64, rat_int};

    fn binom(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        let mut r = 1usize;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }

    #[test]
    fn monomial_basis_counts() {
        // (nvars=2, d=2) -> 6
        assert_eq!(monomial_basis(2, 2).len(), 6);
        // (10, 3) -> C(13,3) = 286
        assert_eq!(monomial_basis(10, 3).len(), 286);
        for (n, d) in [(1, 4), (3, 2), (4, 3), (5, 2)] {
            assert_eq!(monomial_basis(n, d).len(), binom(n + d, d));
        }
    }

    #[test]
    fn monomial_order_graded_then_lex() {
        let b = monomial_basis(2, 2);
        let degs: Vec<usize> = b.iter().map(|m| m.degree()).collect();
        let mut sorted = degs.clone();
        sorted.sort();
        assert_eq!(degs, sorted, "graded order violated");
        // within degree 1: (0,1) before (1,0) in vector lex
        let d1: Vec<_> = b.iter().filter(|m| m.degree() == 1).collect();
        assert_eq!(d1[0].0, vec![0, 1]);
        assert_eq!(d1[1].0, vec![1, 0]);
    }

    #[test]
    fn square_of_sum_expands() {
        // (x1 + x2)^2 = x1^2 + 2 x1 x2 + x2^2
        let p = Polynomial::<Rat>::var(0, 2).add(&Polynomial::var(1, 2));
        let sq = p.mul(&p);
        assert_eq!(sq.coeff(&Monomial(vec![2, 0])), rat_int(1));
        assert_eq!(sq.coeff(&Monomial(vec![1, 1])), rat_int(2));
        assert_eq!(sq.coeff(&Monomial(vec![0, 2])), rat_int(1));
        assert_eq!(sq.num_terms(), 3);
    }

    #[test]
    fn gradient_of_pi_norm_at_one() {
        // ||x||_pi^2 = sum pi_i x_i^2, gradient at 1 is 2 pi
        let pi = [rat_i64(1, 4), rat_i64(1, 4), rat_i64(1, 2)];
        let mut p = Polynomial::<Rat>::zero(3);
        for (i, w) in pi.iter().enumerate() {
            let mut m = vec![0u8; 3];
            m[i] = 2;
            p.add_term(Monomial(m), w.clone());
        }
        let ones = vec![rat_int(1); 3];
        let g = p.grad_eval(&ones);
        for (gi, w) in g.iter().zip(pi.iter()) {
            assert_eq!(gi, &(w.add_ref(w)));
        }
    }

    #[test]
    fn hessian_finite_difference_agreement() {
        // p = x0^3 x1 + 2 x0 x1^2
        let x0 = Polynomial::<f64>::var(0, 2);
        let x1 = Polynomial::<f64>::var(1, 2);
        let p = x0.pow(3).mul(&x1).add(&x0.mul(&x1.pow(2)).scale(&2.0));
        let pt = [1.3, -0.7];
        let h = p.hess_eval(&pt);
        let g = |q: &[f64]| p.grad_eval(q);
        let eps = 1e-6;
        for i in 0..2 {
            let mut pp = pt.to_vec();
            pp[i] += eps;
            let mut pm = pt.to_vec();
            pm[i] -= eps;
            let gp = g(&pp);
            let gm = g(&pm);
            for j in 0..2 {
                let fd = (gp[j] - gm[j]) / (2.0 * eps);
                assert!((fd - h[i][j]).abs() < 1e-5, "hessian entry ({i},{j})");
            }
        }
        // symmetry
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn substitution_into_one_variable() {
        // p(x0, x1) = x0^2 x1, substitute x0 <- t + 1 (as univariate u)
        let p = Polynomial::<Rat>::var(0, 2).pow(2).mul(&Polynomial::var(1, 2));
        let u = UniPoly::new(vec![rat_int(1), rat_int(1)]); // 1 + t
        let q = p.subst_var(0, &u);
        // (x0+1)^2 x1 = x0^2 x1 + 2 x0 x1 + x1
        assert_eq!(q.coeff(&Monomial(vec![2, 1])), rat_int(1));
        assert_eq!(q.coeff(&Monomial(vec![1, 1])), rat_int(2));
        assert_eq!(q.coeff(&Monomial(vec![0, 1])), rat_int(1));
    }

    #[test]
    fn vanishing_basis_products_span_expected_dimension() {
        // span{b_i b_j} = {p in R[x]_{2d} : p(1) = 0, grad p(1) = 0}
        // dimension C(n + 2d, 2d) - 1 - n, checked for n <= 3, d <= 2 by exact rank.
        for n in 1..=3usize {
            for d in 1..=2usize {
                let basis = vanishing_basis::<Rat>(n, d);
                let monos = monomial_basis(n, 2 * d);
                let col_of: std::collections::HashMap<_, _> =
                    monos.iter().cloned().zip(0..).collect();
                let mut rows = Vec::new();
                for i in 0..basis.len() {
                    for j in i..basis.len() {
                        let prod = basis[i].mul(&basis[j]);
                        let mut row = vec![rat_int(0); monos.len()];
                        for (m, c) in prod.terms() {
                            row[col_of[m]] = c.clone();
                        }
                        rows.push(row);
                    }
                }
                let rank = crate::ratla::rank_exact(&rows);
                let expect = binom(n + 2 * d, 2 * d) - 1 - n;
                assert_eq!(rank, expect, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn var_pi_identity_exact() {
        // sum w g^2 = (sum_{j<d} ||x||^{2j}) ||x-1||^2 for n <= 3, d <= 3
        for n in 1..=3usize {
            let pi: Vec<Rat> = (1..=n).map(|i| rat_i64(i as i64, (n * (n + 1) / 2) as i64)).collect();
            for d in 1..=3usize {
                let sq = var_pi_squares(&pi, d);
                let mut lhs = Polynomial::<Rat>::zero(n);
                for (w, g) in &sq {
                    lhs = lhs.add(&g.mul(g).scale(w));
                }
                // rhs
                let mut norm = Polynomial::<Rat>::zero(n);
                let mut shift = Polynomial::<Rat>::zero(n);
                for i in 0..n {
                    let mut e2 = vec![0u8; n];
                    e2[i] = 2;
                    norm.add_term(Monomial(e2), pi[i].clone());
                    let mut xm1 = Polynomial::<Rat>::var(i, n);
                    xm1.add_term(Monomial::one(n), rat_int(-1));
                    shift = shift.add(&xm1.mul(&xm1).scale(&pi[i]));
                }
                let mut series = Polynomial::<Rat>::zero(n);
                for j in 0..d {
                    series = series.add(&norm.pow(j));
                }
                let rhs = series.mul(&shift);
                assert_eq!(lhs, rhs, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn permute_vars_relabels() {
        let p = Polynomial::<Rat>::var(0, 3).mul(&Polynomial::var(1, 3).pow(2));
        let q = p.permute_vars(&[1, 2, 0]);
        assert_eq!(q.coeff(&Monomial(vec![0, 1, 2])), rat_int(1));
    }
}
