//! Dense univariate polynomials with exact arithmetic, affine composition,
//! coefficient reversal, exact division, and Sturm-chain root counting.

use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::{Coeff, Monomial, Polynomial};
use crate::Rat;

/// Coefficients ascending by degree; trailing zeros are never stored, so the
/// zero polynomial has an empty coefficient vector.
#[derive(Clone, PartialEq, Debug)]
pub struct UniPoly<C: Coeff> {
    coeffs: Vec<C>,
}

impl<C: Coeff> UniPoly<C> {
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UniPoly { coeffs }
    }

    pub fn zero() -> Self {
        UniPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::new(vec![c])
    }

    pub fn x() -> Self {
        Self::new(vec![C::zero(), C::one()])
    }

    pub fn from_ints(v: &[i64]) -> Self {
        Self::new(v.iter().map(|&k| C::from_int(k)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> C {
        self.coeffs.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn leading(&self) -> C {
        self.coeffs.last().cloned().unwrap_or_else(C::zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut v = Vec::with_capacity(n);
        for k in 0..n {
            v.push(self.coeff(k).add_ref(&o.coeff(k)));
        }
        Self::new(v)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        let mut v = Vec::with_capacity(n);
        for k in 0..n {
            v.push(self.coeff(k).sub_ref(&o.coeff(k)));
        }
        Self::new(v)
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.neg_ref()).collect())
    }

    pub fn scale(&self, s: &C) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.mul_ref(s)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut v = vec![C::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                v[i + j] = v[i + j].add_ref(&a.mul_ref(b));
            }
        }
        Self::new(v)
    }

    /// Multiply by t^k.
    pub fn mul_xk(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut v = vec![C::zero(); k];
        v.extend(self.coeffs.iter().cloned());
        Self::new(v)
    }

    pub fn eval(&self, t: &C) -> C {
        let mut acc = C::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul_ref(t).add_ref(c);
        }
        acc
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c.to_f64();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let v = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.mul_ref(&C::from_int(k as i64)))
            .collect();
        Self::new(v)
    }

    /// General composition p(u(t)) by Horner over polynomial arithmetic.
    pub fn compose(&self, u: &Self) -> Self {
        let mut acc = Self::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(u).add(&Self::constant(c.clone()));
        }
        acc
    }

    /// p(a*t + b).
    pub fn compose_affine(&self, a: &C, b: &C) -> Self {
        self.compose(&Self::new(vec![b.clone(), a.clone()]))
    }

    /// Coefficient reversal t^m * p(1/t); requires m >= degree.
    pub fn reversal(&self, m: usize) -> Self {
        assert!(self.is_zero() || m >= self.degree(), "reversal order below degree");
        let mut v = vec![C::zero(); m + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            v[m - k] = c.clone();
        }
        Self::new(v)
    }

    /// Euclidean division: self = q * d + r with deg r < deg d. Panics on zero divisor.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let dd = d.degree();
        let lead = d.leading();
        let mut r = self.clone();
        let mut q = vec![C::zero(); self.coeffs.len().saturating_sub(dd)];
        while !r.is_zero() && r.degree() >= dd {
            let k = r.degree() - dd;
            let f = r.leading().div_ref(&lead);
            q[k] = q[k].add_ref(&f);
            let sub = d.scale(&f).mul_xk(k);
            r = r.sub(&sub);
            if r.coeffs.len() > k + dd {
                // leading term must have cancelled exactly
                r.coeffs.truncate(k + dd);
                r = Self::new(std::mem::take(&mut r.coeffs));
            }
        }
        (Self::new(q), r)
    }

    /// Exact division: Some(q) with self = q * d iff the remainder vanishes.
    pub fn divide_exact(&self, d: &Self) -> Option<Self> {
        let (q, r) = self.div_rem(d);
        if r.is_zero() {
            Some(q)
        } else {
            None
        }
    }

    /// Divide by (t - r)^2, asserting exact divisibility.
    pub fn divide_by_double_root(&self, r: &C) -> Option<Self> {
        let lin = Self::new(vec![r.neg_ref(), C::one()]);
        self.divide_exact(&lin.mul(&lin))
    }

    /// Embed as a multivariate polynomial in variable `var` of `nvars`.
    pub fn to_multivariate(&self, nvars: usize, var: usize) -> Polynomial<C> {
        assert!(var < nvars, "variable index out of range");
        let mut p = Polynomial::zero(nvars);
        for (k, c) in self.coeffs.iter().enumerate() {
            let mut e = vec![0u8; nvars];
            e[var] = u8::try_from(k).expect("degree exceeds exponent range");
            p.add_term(Monomial(e), c.clone());
        }
        p
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> UniPoly<D> {
        UniPoly::new(self.coeffs.iter().map(f).collect())
    }
}

impl UniPoly<Rat> {
    pub fn to_f64_poly(&self) -> UniPoly<f64> {
        self.map_coeffs(|c| c.to_f64())
    }

    /// Scale by the positive rational that makes coefficients integral with unit
    /// content, preserving signs. Keeps Sturm chains from blowing up.
    fn primitive(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut lcm_den = num_bigint::BigInt::from(1);
        for c in &self.coeffs {
            if !Zero::is_zero(c) {
                lcm_den = lcm_den.lcm(c.denom());
            }
        }
        let mut gcd_num = num_bigint::BigInt::from(0);
        for c in &self.coeffs {
            if !Zero::is_zero(c) {
                let scaled = c.numer() * &lcm_den / c.denom();
                gcd_num = gcd_num.gcd(&scaled.abs());
            }
        }
        let factor = Rat::new(lcm_den, gcd_num);
        self.scale(&factor)
    }
}

/// Canonical Sturm chain: p, p', then negated Euclidean remainders, each reduced
/// to primitive integer form (a positive rescale, so sign variations are
/// unchanged).
pub fn sturm_chain(p: &UniPoly<Rat>) -> Vec<UniPoly<Rat>> {
    assert!(!p.is_zero(), "Sturm chain of zero polynomial");
    let mut chain = vec![p.primitive()];
    let d = p.derivative();
    if d.is_zero() {
        return chain;
    }
    chain.push(d.primitive());
    loop {
        let n = chain.len();
        let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
        if r.is_zero() {
            break;
        }
        chain.push(r.neg().primitive());
    }
    chain
}

fn sign(r: &Rat) -> i8 {
    if Zero::is_zero(r) {
        0
    } else if r.numer().sign() == num_bigint::Sign::Minus {
        -1
    } else {
        1
    }
}

/// Number of sign changes in the chain evaluated at `x`, zeros skipped.
pub fn sign_variations_at(chain: &[UniPoly<Rat>], x: &Rat) -> usize {
    let mut last: i8 = 0;
    let mut count = 0;
    for p in chain {
        let s = sign(&p.eval(x));
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Distinct real roots of `p` in the open interval (a, b). Requires a < b and
/// p nonzero at both endpoints.
pub fn count_distinct_roots(p: &UniPoly<Rat>, a: &Rat, b: &Rat) -> usize {
    assert!(a < b, "empty interval");
    assert!(
        !Zero::is_zero(&p.eval(a)) && !Zero::is_zero(&p.eval(b)),
        "endpoint is a root; Sturm count undefined"
    );
    let chain = sturm_chain(p);
    sign_variations_at(&chain, a) - sign_variations_at(&chain, b)
}

/// Certifies p(t) > 0 for every t in the closed interval [a, b]: strictly
/// positive endpoints and no interior roots. A tangency from above (double root)
/// is rejected, so the answer is exact for strict positivity.
pub fn positive_on_interval(p: &UniPoly<Rat>, a: &Rat, b: &Rat) -> bool {
    if p.is_zero() || a > b {
        return false;
    }
    let pa = p.eval(a);
    if sign(&pa) <= 0 {
        return false;
    }
    if a == b {
        return true;
    }
    let pb = p.eval(b);
    if sign(&pb) <= 0 {
        return false;
    }
    count_distinct_roots(p, a, b) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratla::{rat_i64, rat_int};

    type RP = UniPoly<Rat>;

    #[test]
    fn arithmetic_and_eval() {
        // (1 + 2t)(3 + t) = 3 + 7t + 2t^2
        let a = RP::from_ints(&[1, 2]);
        let b = RP::from_ints(&[3, 1]);
        let p = a.mul(&b);
        assert_eq!(p.coeffs(), &[rat_int(3), rat_int(7), rat_int(2)]);
        assert_eq!(p.eval(&rat_int(2)), rat_int(3 + 14 + 8));
        assert_eq!(p.eval_f64(2.0), 25.0);
        assert!(a.sub(&a).is_zero());
        assert_eq!(a.add(&b).coeffs(), &[rat_int(4), rat_int(3)]);
    }

    #[test]
    fn derivative_and_compose() {
        // d/dt (t^3 - 2t) = 3t^2 - 2
        let p = RP::from_ints(&[0, -2, 0, 1]);
        assert_eq!(p.derivative().coeffs(), &[rat_int(-2), rat_int(0), rat_int(3)]);
        // (t+1)^2 via compose_affine on t^2
        let sq = RP::from_ints(&[0, 0, 1]);
        let shifted = sq.compose_affine(&rat_int(1), &rat_int(1));
        assert_eq!(shifted.coeffs(), &[rat_int(1), rat_int(2), rat_int(1)]);
        // general composition p(u) with u = t^2: (t^2)^3 - 2 t^2
        let u = RP::from_ints(&[0, 0, 1]);
        let c = p.compose(&u);
        assert_eq!(c.coeff(6), rat_int(1));
        assert_eq!(c.coeff(2), rat_int(-2));
    }

    #[test]
    fn reversal_matches_scaled_reciprocal() {
        // rev_m p (t) = t^m p(1/t), checked by rational evaluation
        let p = RP::new(vec![rat_i64(1, 3), rat_int(0), rat_int(2), rat_int(5)]);
        let m = 5;
        let r = p.reversal(m);
        for tv in [rat_i64(2, 1), rat_i64(-3, 2), rat_i64(1, 7)] {
            let inv = rat_int(1).div_ref(&tv);
            let mut tm = rat_int(1);
            for _ in 0..m {
                tm = tm.mul_ref(&tv);
            }
            assert_eq!(r.eval(&tv), tm.mul_ref(&p.eval(&inv)));
        }
    }

    #[test]
    fn division_exact_and_with_remainder() {
        let q = RP::from_ints(&[2, -1, 3]);
        let r2 = {
            let lin = RP::from_ints(&[-5, 1]); // t - 5
            lin.mul(&lin)
        };
        let p = q.mul(&r2);
        assert_eq!(p.divide_by_double_root(&rat_int(5)).unwrap(), q);
        // non-exact division leaves the right remainder
        let p2 = p.add(&RP::from_ints(&[1]));
        assert!(p2.divide_exact(&r2).is_none());
        let (qq, rr) = p2.div_rem(&r2);
        assert_eq!(qq, q);
        assert_eq!(rr.coeffs(), &[rat_int(1)]);
        // quotient * divisor + remainder reproduces the dividend
        assert_eq!(qq.mul(&r2).add(&rr), p2);
    }

    #[test]
    fn sturm_counts_roots() {
        // (t-1)(t-2)(t-3) = t^3 - 6t^2 + 11t - 6
        let p = RP::from_ints(&[-6, 11, -6, 1]);
        assert_eq!(count_distinct_roots(&p, &rat_int(0), &rat_i64(5, 2)), 2);
        assert_eq!(count_distinct_roots(&p, &rat_int(0), &rat_int(10)), 3);
        assert_eq!(count_distinct_roots(&p, &rat_i64(7, 2), &rat_int(10)), 0);
        // repeated roots counted once: (t-1)^2 (t-4)
        let p2 = RP::from_ints(&[-1, 1]).mul(&RP::from_ints(&[-1, 1])).mul(&RP::from_ints(&[-4, 1]));
        assert_eq!(count_distinct_roots(&p2, &rat_int(0), &rat_int(10)), 2);
    }

    #[test]
    fn positivity_certificates() {
        // t^2 + 1 > 0 everywhere
        let p = RP::from_ints(&[1, 0, 1]);
        assert!(positive_on_interval(&p, &rat_int(-5), &rat_int(5)));
        // (t-1)^2 touches zero inside [0, 2]
        let q = RP::from_ints(&[1, -2, 1]);
        assert!(!positive_on_interval(&q, &rat_int(0), &rat_int(2)));
        // but is positive on [2, 3]
        assert!(positive_on_interval(&q, &rat_int(2), &rat_int(3)));
        // negative endpoint rejected
        let r = RP::from_ints(&[-1, 0, 1]); // t^2 - 1
        assert!(!positive_on_interval(&r, &rat_int(0), &rat_int(5)));
        // degenerate single-point interval
        assert!(positive_on_interval(&p, &rat_int(3), &rat_int(3)));
    }

    #[test]
    fn primitive_scaling_preserves_signs() {
        let p = RP::new(vec![rat_i64(-2, 3), rat_i64(4, 9), rat_i64(-8, 3)]);
        let q = p.primitive();
        // -2/3, 4/9, -8/3 scaled by 9/2 -> -3, 2, -12
        assert_eq!(q.coeffs(), &[rat_int(-3), rat_int(2), rat_int(-12)]);
    }

    #[test]
    fn multivariate_embedding() {
        let p = RP::from_ints(&[1, 0, 2]);
        let m = p.to_multivariate(3, 1);
        assert_eq!(m.coeff(&Monomial(vec![0, 2, 0])), rat_int(2));
        assert_eq!(m.coeff(&Monomial(vec![0, 0, 0])), rat_int(1));
    }
}
