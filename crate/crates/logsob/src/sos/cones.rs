//! Cone geometry for the hierarchy: interval cones on `[a, b]` and box cones
//! on `[0, 1/pi_i] x [0, 1/pi_j]`, all with exact rational data.
//!
//! Interval nonnegativity is certified through the affine change of variables
//! `s = (2t - a - b)/(b - a)` onto `[-1, 1]`, where nonnegativity at an even
//! degree budget `B` means `sigma_e(s) + (1 - s^2) sigma_o(s)` and at an odd
//! budget means `(1 - s) sigma_1(s) + (1 + s) sigma_2(s)`, with all sigmas
//! sums of squares. When the true right endpoint is irrational (`1/sqrt(pi_i)`
//! in the main hierarchy), we certify on a slightly larger dyadic endpoint,
//! which is sound because the target interval is contained in the certified
//! one.
//!
//! Square bases use the Chebyshev polynomials `T_j(s)` rather than the powers
//! `s^j`. The two span the same space, so the cone is unchanged, but the
//! Chebyshev products `T_i T_j = (T_{i+j} + T_{|i-j|})/2` keep the emitted
//! semidefinite rows nearly orthogonal, while power products `s^{i+j}`
//! collapse onto few directions and leave the row Gram with a geometric tail
//! of near-null eigenvalues (condition roughly `9^B` at budget `B`), which in
//! turn caps the accuracy reachable by the interior-point solver.
//!
//! In strict mode every square block is restricted to polynomials vanishing
//! at a prescribed interior point (the image of `t = 1`). This removes the
//! degeneracy created by constraint polynomials that are forced to vanish
//! there while representing exactly the same cone of such polynomials: a
//! polynomial nonnegative on the interval with an interior zero factors as
//! `(s - s1)^2` times an interval-nonnegative polynomial, and multiplying
//! each square of the factor's certificate by `(s - s1)` lands back in the
//! vanishing bases.

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::poly::{monomial_basis, Monomial, Polynomial, UniPoly};
use crate::ratla::{rat_int, rat_to_f64};
use crate::Rat;

/// Dyadic grid used when rounding interval endpoints upward.
pub const ENDPOINT_BITS: u32 = 32;

fn pow2(bits: u32) -> Rat {
    Rat::new(BigInt::from(2u64).pow(bits), BigInt::one())
}

/// Smallest value on the `2^-bits` grid at or above `x` (exact).
pub fn dyadic_ceil(x: &Rat, bits: u32) -> Rat {
    (x * pow2(bits)).ceil() / pow2(bits)
}

/// A rational `b` on the dyadic grid with `b >= 1/sqrt(x)` for `x > 0`,
/// verified exactly via `b^2 x >= 1`. The float estimate only seeds the
/// search; correctness never depends on it.
pub fn rational_upper_inv_sqrt(x: &Rat, bits: u32) -> Rat {
    assert!(x.is_positive(), "needs a positive rational");
    let est = (1.0 / rat_to_f64(x)).sqrt();
    let step = Rat::new(BigInt::one(), BigInt::from(2u64).pow(bits));
    let mut b = if est.is_finite() && est > 0.0 {
        dyadic_ceil(&crate::ratla::rat_from_f64(est).unwrap(), bits)
    } else {
        step.clone()
    };
    if !b.is_positive() {
        b = step.clone();
    }
    // Exact fix-up in both directions; terminates after a few steps because
    // the float seed is already within a few ulps.
    while &b * &b * x < Rat::one() {
        b += &step;
    }
    loop {
        let down = &b - &step;
        if down.is_positive() && &down * &down * x >= Rat::one() {
            b = down;
        } else {
            break;
        }
    }
    b
}

/// `count` pairwise-distinct rational points in `[a, b]`, clustered toward
/// the ends like Chebyshev nodes and rounded to a fine dyadic grid. Used as
/// evaluation frames for pointwise identity rows: the node distribution keeps
/// the evaluation map well conditioned, and correctness needs only the
/// distinctness, which is checked exactly.
pub fn chebyshev_points(a: &Rat, b: &Rat, count: usize) -> Vec<Rat> {
    assert!(count >= 1, "need at least one point");
    assert!(b > a, "interval must be nondegenerate");
    const GRID: i64 = 1 << 20;
    let two = rat_int(2);
    let half = (b - a) / &two;
    let mid = (a + b) / &two;
    let mut pts = Vec::with_capacity(count);
    for k in 0..count {
        let theta = if count == 1 { 0.5 } else { k as f64 / (count - 1) as f64 };
        let node = (std::f64::consts::PI * theta).cos();
        let num = (node * GRID as f64).round() as i64;
        let s = Rat::new(BigInt::from(num), BigInt::from(GRID));
        pts.push(&mid + &half * s);
    }
    pts.dedup();
    assert_eq!(pts.len(), count, "node grid too coarse for {count} points");
    pts
}

/// The sum-of-squares description of nonnegativity on `[a, b]` at a degree
/// budget, expressed in the original variable `t`.
#[derive(Clone, Debug)]
pub struct IntervalCone {
    pub a: Rat,
    pub b: Rat,
    /// The affine image `s(t)` mapping `[a, b]` onto `[-1, 1]`.
    pub s: UniPoly<Rat>,
    /// Image of the strict vanishing point, when one was requested.
    pub s1: Option<Rat>,
    /// Total degree budget.
    pub budget: usize,
    /// `(weight, square basis)` pairs in the variable `t`; empty blocks are
    /// dropped.
    pub blocks: Vec<(UniPoly<Rat>, Vec<UniPoly<Rat>>)>,
}

/// Builds the interval cone for `[a, b]` at the given budget. `strict_at`
/// restricts every square basis to polynomials vanishing at that point, which
/// must be interior.
pub fn interval_cone(a: &Rat, b: &Rat, budget: usize, strict_at: Option<&Rat>) -> IntervalCone {
    assert!(b > a, "interval must be nondegenerate");
    assert!(budget >= 1, "interval budget must be positive");
    // s(t) = (2t - a - b) / (b - a).
    let width = b - a;
    let s = UniPoly::new(vec![-(a + b) / &width, rat_int(2) / &width]);
    let s1 = strict_at.map(|t1| {
        let v = s.eval(t1);
        assert!(
            v > rat_int(-1) && v < Rat::one(),
            "strict interval cones need the vanishing point in the interior"
        );
        v
    });
    let half = budget / 2;
    // Chebyshev polynomials of s, expanded in t:  T_0 = 1, T_1 = s,
    // T_{j+1} = 2 s T_j - T_{j-1}.
    let mut cheb = Vec::with_capacity(half + 1);
    cheb.push(UniPoly::constant(Rat::one()));
    if half >= 1 {
        cheb.push(s.clone());
        for j in 2..=half {
            let prev: &UniPoly<Rat> = &cheb[j - 1];
            let next = s.mul(prev).scale(&rat_int(2)).sub(&cheb[j - 2]);
            cheb.push(next);
        }
    }
    let make_basis = |cap: isize| -> Vec<UniPoly<Rat>> {
        if cap < 0 {
            return Vec::new();
        }
        let cap = cap as usize;
        match &s1 {
            Some(pt) => {
                // { T_j(s) - T_j(s1) : 1 <= j <= cap } spans the polynomials
                // of degree <= cap vanishing at s1 (degrees are exactly j).
                let mut vals = Vec::with_capacity(cap + 1);
                vals.push(Rat::one());
                if cap >= 1 {
                    vals.push(pt.clone());
                    for j in 2..=cap {
                        let v = rat_int(2) * pt * &vals[j - 1] - &vals[j - 2];
                        vals.push(v);
                    }
                }
                (1..=cap)
                    .map(|j| cheb[j].sub(&UniPoly::constant(vals[j].clone())))
                    .collect()
            }
            None => cheb[..=cap].to_vec(),
        }
    };
    let one = UniPoly::constant(Rat::one());
    let weighted: Vec<(UniPoly<Rat>, isize)> = if budget % 2 == 0 {
        vec![(one.clone(), half as isize), (one.sub(&s.mul(&s)), half as isize - 1)]
    } else {
        let lo = one.sub(&s);
        let hi = one.add(&s);
        vec![(lo, half as isize), (hi, half as isize)]
    };
    let mut blocks = Vec::new();
    for (w, cap) in weighted {
        let basis = make_basis(cap);
        if !basis.is_empty() {
            blocks.push((w, basis));
        }
    }
    IntervalCone { a: a.clone(), b: b.clone(), s, s1, budget, blocks }
}

/// Square-block descriptions certifying nonnegativity on the box
/// `[0, 1/pi_t] x [0, 1/pi_s]` in variables `(t, s)`: an unweighted block of
/// squares of degree `<= cap` plus one block per axis weighted by the
/// endpoint product `t (1 - pi t)`. Bases use the scaled monomials
/// `(pi_t t)^a (pi_s s)^b`, and the weights are normalized to peak at 1; both
/// are positive-diagonal changes of the Gram bases, so the cone is unchanged
/// while the semidefinite data stays well conditioned.
#[derive(Clone, Debug)]
pub struct BoxCone {
    pub pi_t: Rat,
    pub pi_s: Rat,
    /// `(weight in (t, s), basis in (t, s))` per block.
    pub blocks: Vec<(Polynomial<Rat>, Vec<Polynomial<Rat>>)>,
}

/// Builds the box cone at half-budget `cap` (certifies degree `<= 2 cap`).
/// In strict mode every basis vanishes at `(t, s) = (1, 1)`, which is
/// interior to the box since `pi < 1`.
pub fn box_cone(pi_t: &Rat, pi_s: &Rat, cap: usize, strict: bool) -> BoxCone {
    assert!(cap >= 1, "box cone needs half-budget >= 1");
    assert!(pi_t.is_positive() && pi_s.is_positive());
    if strict {
        assert!(pi_t < &Rat::one() && pi_s < &Rat::one(), "strict box cones need (1,1) interior");
    }
    let t = Polynomial::var(0, 2);
    let s = Polynomial::var(1, 2);
    let one = Polynomial::constant(2, Rat::one());
    // 4 pi t (1 - pi t), peaking at 1 in the middle of the axis.
    let axis_weight = |v: &Polynomial<Rat>, pi: &Rat| -> Polynomial<Rat> {
        let pv = v.scale(pi);
        pv.mul(&one.sub(&pv)).scale(&rat_int(4))
    };
    let weights: [(Polynomial<Rat>, usize); 3] = [
        (one.clone(), 0),
        (axis_weight(&t, pi_t), 1),
        (axis_weight(&s, pi_s), 1),
    ];
    let st = t.scale(pi_t);
    let ss = s.scale(pi_s);
    let mut tp = vec![one.clone()];
    let mut sp = vec![one.clone()];
    for j in 1..=cap {
        tp.push(tp[j - 1].mul(&st));
        sp.push(sp[j - 1].mul(&ss));
    }
    let mut blocks = Vec::new();
    for (w, half_wdeg) in weights {
        if half_wdeg > cap {
            continue;
        }
        let bcap = cap - half_wdeg;
        let mut basis = Vec::new();
        for mono in monomial_basis(2, bcap) {
            let (da, db) = (mono.0[0] as usize, mono.0[1] as usize);
            let elem = tp[da].mul(&sp[db]);
            if strict {
                if da == 0 && db == 0 {
                    continue; // constants cannot vanish at the corner
                }
                let val = elem.eval(&[Rat::one(), Rat::one()]);
                basis.push(elem.sub(&Polynomial::constant(2, val)));
            } else {
                basis.push(elem);
            }
        }
        if !basis.is_empty() {
            blocks.push((w, basis));
        }
    }
    BoxCone { pi_t: pi_t.clone(), pi_s: pi_s.clone(), blocks }
}

/// Substitutes `(t, s) -> (x_i, x_j)` in a bivariate polynomial, producing a
/// polynomial in `n` chain variables (handles `i == j`).
pub fn subst_pair(q: &Polynomial<Rat>, i: usize, j: usize, n: usize) -> Polynomial<Rat> {
    assert_eq!(q.nvars(), 2);
    let mut out = Polynomial::zero(n);
    for (mono, c) in q.terms() {
        let mut e = vec![0u8; n];
        e[i] += mono.0[0];
        e[j] += mono.0[1];
        out.add_term(Monomial(e), c.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use crate::ratla::rat_i64;

    #[test]
    fn upper_inverse_sqrt_is_exactly_verified() {
        for x in [rat_i64(1, 3), rat_i64(9, 10), rat_i64(1, 1000), rat_i64(2, 5)] {
            let b = rational_upper_inv_sqrt(&x, ENDPOINT_BITS);
            assert!(&b * &b * &x >= Rat::one(), "b^2 x >= 1 must hold exactly");
            let step = Rat::new(BigInt::one(), BigInt::from(2u64).pow(ENDPOINT_BITS));
            let down = &b - step;
            assert!(&down * &down * &x < Rat::one(), "b is the least grid point that works");
        }
    }

    #[test]
    fn even_interval_cone_blocks_and_strict_vanishing() {
        // [0, 3/2], budget 8, strict at t = 1: s = (2t - 3/2)/(3/2) = 4t/3 - 1.
        let cone = interval_cone(&Rat::zero(), &rat_i64(3, 2), 8, Some(&Rat::one()));
        assert_eq!(cone.s1, Some(rat_i64(1, 3)));
        assert_eq!(cone.blocks.len(), 2);
        assert_eq!(cone.blocks[0].1.len(), 4); // degrees 1..4 of the vanishing family
        assert_eq!(cone.blocks[1].1.len(), 3);
        for (_, basis) in &cone.blocks {
            for q in basis {
                assert!(q.eval(&Rat::one()).is_zero(), "strict basis vanishes at t = 1");
            }
        }
        // The even-parity weight vanishes at both endpoints.
        let w = &cone.blocks[1].0;
        assert!(w.eval(&Rat::zero()).is_zero());
        assert!(w.eval(&rat_i64(3, 2)).is_zero());
    }

    #[test]
    fn odd_interval_cone_uses_endpoint_weights() {
        // [0, 1], budget 1: blocks (1 - s) and (1 + s) with constant bases.
        let cone = interval_cone(&Rat::zero(), &Rat::one(), 1, None);
        assert_eq!(cone.blocks.len(), 2);
        assert_eq!(cone.blocks[0].1.len(), 1);
        assert_eq!(cone.blocks[1].1.len(), 1);
        // (1 - s)(t) = 2 - 2t vanishes at the right endpoint, (1 + s) at the left.
        assert!(cone.blocks[0].0.eval(&Rat::one()).is_zero());
        assert!(cone.blocks[1].0.eval(&Rat::zero()).is_zero());
    }

    #[test]
    fn box_cone_blocks_vanish_at_the_corner_in_strict_mode() {
        let cone = box_cone(&rat_i64(1, 3), &rat_i64(1, 2), 3, true);
        assert_eq!(cone.blocks.len(), 3);
        let pt = [Rat::one(), Rat::one()];
        for (w, basis) in &cone.blocks {
            assert!(w.eval(&pt).is_positive(), "weights are positive at the corner");
            for q in basis {
                assert!(q.eval(&pt).is_zero());
            }
        }
        // Axis weights vanish at both ends of their own axis.
        let w_t = &cone.blocks[1].0;
        assert!(w_t.eval(&[Rat::zero(), Rat::one()]).is_zero());
        assert!(w_t.eval(&[rat_i64(3, 1), Rat::one()]).is_zero());
    }

    #[test]
    fn pair_substitution_merges_exponents_on_the_diagonal() {
        // q = t^2 s at (i, j) = (1, 1) in 3 variables -> x_1^3.
        let t = Polynomial::<Rat>::var(0, 2);
        let s = Polynomial::<Rat>::var(1, 2);
        let q = t.mul(&t).mul(&s);
        let sub = subst_pair(&q, 1, 1, 3);
        assert_eq!(sub.coeff(&Monomial(vec![0, 3, 0])), Rat::one());
    }
}
