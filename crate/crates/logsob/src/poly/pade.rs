//! Padé approximants of the logarithm at t = 1 and Taylor majorants of
//! t^2 log(t^2), both with exact rational coefficients.
//!
//! The (m+1, m) approximant is written rbar_m(t) = (t - 1) R_m(t) / S_m(t) with
//! deg R_m = deg S_m = m and R_m(1) = S_m(1) = 1. It overestimates the
//! logarithm: 0 <= rbar_m(t) - log t <= (t-1)^2 / (t (m+1)^2) for t > 0, m >= 2,
//! and the family decreases pointwise in m. Substituting it for log turns the
//! entropy comparison into a polynomial inequality while giving up only the
//! stated error.

use num_traits::{One, Zero};

use super::uni::UniPoly;
use crate::ratla::{rat_i64, rat_int};
use crate::Rat;

/// Numerator/denominator pair of the (m+1, m) Padé approximant of log at 1.
#[derive(Clone, Debug)]
pub struct PadeLog {
    pub m: usize,
    /// R_m(t), degree m, R_m(1) = 1.
    pub r: UniPoly<Rat>,
    /// S_m(t), degree m, S_m(1) = 1.
    pub s: UniPoly<Rat>,
}

impl PadeLog {
    /// rbar_m(t) = (t-1) R_m(t) / S_m(t), evaluated in floats.
    pub fn rbar_f64(&self, t: f64) -> f64 {
        (t - 1.0) * self.r.eval_f64(t) / self.s.eval_f64(t)
    }

    /// rbar_m(t) as an exact rational; panics if S_m(t) = 0.
    pub fn rbar(&self, t: &Rat) -> Rat {
        let num = (t - &Rat::one()) * self.r.eval(t);
        num / self.s.eval(t)
    }

    /// Degree-m reversal t^m R_m(1/t).
    pub fn r_rev(&self) -> UniPoly<Rat> {
        self.r.reversal(self.m)
    }

    /// Degree-m reversal t^m S_m(1/t).
    pub fn s_rev(&self) -> UniPoly<Rat> {
        self.s.reversal(self.m)
    }
}

/// Compute the (m+1, m) Padé approximant of log at t = 1 by matching the series
/// of log(1 + u) through order 2m+1: with N(u) = u + n_2 u^2 + ... + n_{m+1}
/// u^{m+1} and D(u) = 1 + d_1 u + ... + d_m u^m, the orders m+2 .. 2m+1 give an
/// m-by-m rational system for D, after which N is read off directly.
pub fn pade_log(m: usize) -> PadeLog {
    // log(1+u) series coefficients l_k = (-1)^{k+1} / k, k >= 1.
    let l = |k: usize| -> Rat {
        let s = if k % 2 == 1 { 1 } else { -1 };
        rat_i64(s, k as i64)
    };
    let mut d = vec![Rat::one()]; // d_0 = 1
    if m > 0 {
        // Row for order k (k = m+2 .. 2m+1): sum_{j=1}^{m} d_j l_{k-j} = -l_k.
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for k in (m + 2)..=(2 * m + 1) {
            let row: Vec<Rat> = (1..=m).map(|j| l(k - j)).collect();
            rows.push(row);
            rhs.push(-l(k));
        }
        let sol = crate::ratla::solve_exact_one(&rows, &rhs)
            .expect("Pade system is nonsingular for every order");
        d.extend(sol);
    }
    // n_k = sum_{j=0}^{min(m, k-1)} d_j l_{k-j} for k = 1 .. m+1.
    let mut n = vec![Rat::zero()]; // constant term of N is 0
    for k in 1..=(m + 1) {
        let mut acc = Rat::zero();
        for (j, dj) in d.iter().enumerate().take(k.min(m + 1)) {
            if k - j >= 1 {
                acc += dj * l(k - j);
            }
        }
        n.push(acc);
    }
    // N(u) = u * Rhat(u); convert to t = 1 + u and normalize at t = 1.
    let rhat_u = UniPoly::new(n[1..].to_vec());
    let d_u = UniPoly::new(d);
    let shift = |p: &UniPoly<Rat>| p.compose_affine(&Rat::one(), &rat_int(-1)); // u = t - 1
    let r_t = shift(&rhat_u);
    let s_t = shift(&d_u);
    debug_assert_eq!(r_t.eval(&Rat::one()), Rat::one());
    debug_assert_eq!(s_t.eval(&Rat::one()), Rat::one());
    PadeLog { m, r: r_t, s: s_t }
}

/// Odd-degree Taylor majorant of t^2 log(t^2) around t = 1: the truncation of
/// the expansion in powers of (t - 1) at odd degree `deg` satisfies
/// p(t) >= t^2 log(t^2) for all t >= 0. The coefficient of (t-1)^k is
/// 2 [ (-1)^{k+1}/k + 2 (-1)^k/(k-1) + (-1)^{k-1}/(k-2) ], dropping terms whose
/// denominator would be nonpositive.
pub fn taylor_majorant(deg: usize) -> UniPoly<Rat> {
    assert!(deg >= 3 && deg % 2 == 1, "majorant degree must be odd and >= 3");
    let mut u_coeffs = vec![Rat::zero()]; // k = 0 term vanishes
    for k in 1..=deg {
        let mut c = Rat::zero();
        let sgn = |e: usize| if e % 2 == 0 { 1 } else { -1 };
        c += rat_i64(sgn(k + 1), k as i64);
        if k >= 2 {
            c += rat_i64(2 * sgn(k), (k - 1) as i64);
        }
        if k >= 3 {
            c += rat_i64(sgn(k + 1), (k - 2) as i64);
        }
        u_coeffs.push(c * rat_int(2));
    }
    UniPoly::new(u_coeffs).compose_affine(&Rat::one(), &rat_int(-1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratla::rat_i64;

    #[test]
    fn order_zero_is_t_minus_one() {
        let p = pade_log(0);
        assert_eq!(p.r.coeffs(), &[rat_int(1)]);
        assert_eq!(p.s.coeffs(), &[rat_int(1)]);
    }

    #[test]
    fn order_one_matches_closed_form() {
        // rbar_1 = (t-1)(t+5) / (2(2t+1)): R_1 = (t+5)/6, S_1 = (2t+1)/3
        let p = pade_log(1);
        assert_eq!(p.r.coeffs(), &[rat_i64(5, 6), rat_i64(1, 6)]);
        assert_eq!(p.s.coeffs(), &[rat_i64(1, 3), rat_i64(2, 3)]);
    }

    #[test]
    fn series_agreement_to_order_2m_plus_1() {
        // (t-1) R - log-series * S = O(u^{2m+2}) checked exactly on truncations
        for m in 0..=6usize {
            let p = pade_log(m);
            let order = 2 * m + 4;
            // log(1+u) truncated
            let mut log_u = vec![Rat::zero()];
            for k in 1..=order {
                log_u.push(rat_i64(if k % 2 == 1 { 1 } else { -1 }, k as i64));
            }
            let log_u = UniPoly::new(log_u);
            let one = Rat::one();
            let to_u = |q: &UniPoly<Rat>| q.compose_affine(&one, &one); // t = 1 + u
            let lhs = UniPoly::from_ints(&[0, 1]).mul(&to_u(&p.r)); // u * R(1+u)
            let rhs = log_u.mul(&to_u(&p.s));
            let diff = lhs.sub(&rhs);
            for k in 0..=(2 * m + 1) {
                assert_eq!(diff.coeff(k), Rat::zero(), "m={m} order u^{k}");
            }
            assert_ne!(diff.coeff(2 * m + 2), Rat::zero(), "m={m} should not exceed Pade order");
        }
    }

    #[test]
    fn overestimates_log_within_stated_error() {
        // 0 <= rbar_m(t) - log t <= (t-1)^2 / (t (m+1)^2) for m >= 2 on a grid
        for m in 2..=6usize {
            let p = pade_log(m);
            let mut t = 0.05;
            while t <= 20.0 {
                let gap = p.rbar_f64(t) - t.ln();
                let cap = (t - 1.0) * (t - 1.0) / (t * ((m + 1) * (m + 1)) as f64);
                assert!(gap >= -1e-12, "m={m} t={t}: below log by {gap}");
                assert!(gap <= cap + 1e-12, "m={m} t={t}: {gap} > {cap}");
                t += 0.05;
            }
        }
    }

    #[test]
    fn family_decreases_in_m() {
        let ps: Vec<PadeLog> = (0..=5).map(pade_log).collect();
        for w in ps.windows(2) {
            let mut t = 0.1;
            while t <= 10.0 {
                assert!(
                    w[1].rbar_f64(t) <= w[0].rbar_f64(t) + 1e-12,
                    "m={} -> {} at t={t}",
                    w[0].m,
                    w[1].m
                );
                t += 0.1;
            }
        }
    }

    #[test]
    fn denominators_positive_on_wide_interval() {
        use crate::poly::uni::positive_on_interval;
        for m in 0..=6usize {
            let p = pade_log(m);
            assert!(
                positive_on_interval(&p.s, &rat_int(0), &rat_int(1000)),
                "S_{m} must be positive on [0, 1000]"
            );
        }
    }

    #[test]
    fn reversals_evaluate_as_scaled_reciprocals() {
        let p = pade_log(3);
        let t = rat_i64(7, 3);
        let inv = rat_i64(3, 7);
        let mut t3 = Rat::one();
        for _ in 0..3 {
            t3 *= &t;
        }
        assert_eq!(p.s_rev().eval(&t), &t3 * p.s.eval(&inv));
        assert_eq!(p.r_rev().eval(&t), &t3 * p.r.eval(&inv));
    }

    #[test]
    fn degree5_majorant_coefficients() {
        // 2u + 3u^2 + (2/3)u^3 - (1/6)u^4 + (1/15)u^5 in u = t-1
        let p = taylor_majorant(5);
        let u = p.compose_affine(&Rat::one(), &Rat::one()); // back to u coords
        assert_eq!(u.coeff(0), Rat::zero());
        assert_eq!(u.coeff(1), rat_int(2));
        assert_eq!(u.coeff(2), rat_int(3));
        assert_eq!(u.coeff(3), rat_i64(2, 3));
        assert_eq!(u.coeff(4), rat_i64(-1, 6));
        assert_eq!(u.coeff(5), rat_i64(1, 15));
    }

    #[test]
    fn majorants_dominate_entropy_kernel() {
        // p(t) >= t^2 log(t^2) on t >= 0 for degrees 3, 5, 7
        for deg in [3usize, 5, 7] {
            let p = taylor_majorant(deg).to_f64_poly();
            let mut t = 0.0f64;
            while t <= 8.0 {
                let kernel = if t == 0.0 { 0.0 } else { t * t * (t * t).ln() };
                assert!(
                    p.eval_f64(t) >= kernel - 1e-9,
                    "deg={deg} t={t}: {} < {kernel}",
                    p.eval_f64(t)
                );
                t += 0.01;
            }
        }
    }

    #[test]
    fn corrected_interval_witness_identity() {
        // p(t) = 3t^3 - 4t^2 + t satisfies S_0 p - 2t^2(t-1) R_0 = t (t-1)^2,
        // a product of the interval generator t and a square — the explicit
        // feasibility witness for the order-zero univariate constraint.
        let p = UniPoly::<Rat>::from_ints(&[0, 1, -4, 3]);
        let pade = pade_log(0);
        let lhs = pade.s.mul(&p).sub(
            &UniPoly::from_ints(&[0, 0, -2, 2]).mul(&pade.r), // 2t^2(t-1)
        );
        let expect = UniPoly::from_ints(&[0, 1]).mul(&UniPoly::from_ints(&[-1, 1]).mul(&UniPoly::from_ints(&[-1, 1])));
        assert_eq!(lhs, expect);
    }
}
