//! Exact rational scalar helpers and small dense linear algebra over the rationals.
//!
//! Everything the certification path touches must stay exact: conversions between
//! `f64` and `BigRational` here are bit-faithful (float to rational is exact;
//! rational to float rounds once, to nearest-even), and the solvers are plain
//! fraction-exact Gaussian elimination with magnitude-guided pivoting.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Rat;

/// Exact conversion; fails only on NaN/infinite input.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Correctly rounded conversion to `f64` (round to nearest, ties to even).
///
/// `num-rational`'s `to_f64` divides two separately rounded floats, which
/// overflows to NaN once numerator and denominator exceed f64 range; certificate
/// data routinely does. This routine extracts a 54-bit quotient plus a sticky bit
/// exactly and rounds once. (Values in the subnormal range may double-round; the
/// certificate logic never depends on that regime.)
pub fn rat_to_f64(x: &Rat) -> f64 {
    let (num, den) = (x.numer(), x.denom());
    if num.is_zero() {
        return 0.0;
    }
    let neg = num.is_negative();
    let num = num.abs();
    let mut shift: i64 = 54 - (num.bits() as i64 - den.bits() as i64);
    for _ in 0..4 {
        let (q, r) = shifted_div(&num, den, shift);
        let bits = q.bits() as i64;
        if bits != 54 {
            shift += 54 - bits;
            continue;
        }
        let sticky = !r.is_zero();
        let q = q.to_u64().expect("54-bit quotient fits u64");
        let g = q & 1;
        let mut h = q >> 1;
        if g == 1 && (sticky || (h & 1) == 1) {
            h += 1;
        }
        let v = scale_pow2(h as f64, -(shift - 1));
        return if neg { -v } else { v };
    }
    unreachable!("quotient bit-length did not stabilize");
}

fn shifted_div(num: &BigInt, den: &BigInt, shift: i64) -> (BigInt, BigInt) {
    use num_integer::Integer;
    if shift >= 0 {
        (num.clone() << shift as u64).div_mod_floor(den)
    } else {
        num.div_mod_floor(&(den.clone() << (-shift) as u64))
    }
}

/// Exact scaling by a power of two, staged to avoid spurious overflow.
fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e > 600 {
        v *= 2f64.powi(600);
        e -= 600;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -600 {
        v *= 2f64.powi(-600);
        e += 600;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

/// Parse "p/q" or "p" (integers, optional sign) into an exact rational. Decimal
/// literals are accepted and converted through their exact f64 value.
pub fn rat_parse(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        Some(Rat::new(p, q))
    } else if s.contains('.') || s.contains('e') || s.contains('E') {
        let f: f64 = s.parse().ok()?;
        rat_from_f64(f)
    } else {
        let p: BigInt = s.parse().ok()?;
        Some(Rat::from_integer(p))
    }
}

/// Render as "p/q" (or "p" for integers), the format used by all JSON files.
pub fn rat_fmt(x: &Rat) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rat_i64(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Best rational approximation with denominator at most `max_den`, via continued
/// fraction convergents. Returns the input unchanged if it already complies.
pub fn rat_limit_denominator(x: &Rat, max_den: &BigInt) -> Rat {
    if x.denom() <= max_den {
        return x.clone();
    }
    let neg = x.is_negative();
    let mut a = x.numer().abs();
    let mut b = x.denom().clone();
    // h_{-1}/k_{-1} = 1/0, h_{-2}/k_{-2} = 0/1; h_n = a_n h_{n-1} + h_{n-2}.
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    while !b.is_zero() {
        use num_integer::Integer;
        let (d, r) = a.div_mod_floor(&b);
        let p2 = &d * &p1 + &p0;
        let q2 = &d * &q1 + &q0;
        if &q2 > max_den {
            break;
        }
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        a = std::mem::replace(&mut b, r);
    }
    let v = Rat::new(p1, q1);
    if neg {
        -v
    } else {
        v
    }
}

/// Exact solve of a dense square rational system `A x = b` for several right-hand
/// sides at once. Returns `None` when `A` is singular. Pivoting picks the entry of
/// largest float magnitude in the current column to limit coefficient growth.
pub fn solve_exact(a: &[Vec<Rat>], rhs: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    if n == 0 {
        return Some(rhs.iter().map(|_| Vec::new()).collect());
    }
    assert!(a.iter().all(|r| r.len() == n), "solve_exact: non-square matrix");
    let k = rhs.len();
    assert!(rhs.iter().all(|r| r.len() == n), "solve_exact: rhs length mismatch");
    let mut m: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            for r in rhs {
                row.push(r[i].clone());
            }
            row
        })
        .collect();
    let w = n + k;
    for col in 0..n {
        let piv = (col..n)
            .filter(|&r| !m[r][col].is_zero())
            .max_by(|&x, &y| {
                rat_to_f64(&m[x][col])
                    .abs()
                    .partial_cmp(&rat_to_f64(&m[y][col]).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
        m.swap(col, piv);
        let inv = Rat::one() / m[col][col].clone();
        for j in col..w {
            let v = &m[col][j] * &inv;
            m[col][j] = v;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for j in col..w {
                    let v = &m[r][j] - &(&f * &m[col][j]);
                    m[r][j] = v;
                }
            }
        }
    }
    Some(
        (0..k)
            .map(|j| (0..n).map(|i| m[i][n + j].clone()).collect())
            .collect(),
    )
}

/// Exact solve with a single right-hand side.
pub fn solve_exact_one(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    solve_exact(a, &[b.to_vec()]).map(|mut v| v.remove(0))
}

/// Exact rank via row echelon over the rationals.
pub fn rank_exact(a: &[Vec<Rat>]) -> usize {
    if a.is_empty() {
        return 0;
    }
    let cols = a[0].len();
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut rank = 0;
    for col in 0..cols {
        if rank == m.len() {
            break;
        }
        let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = Rat::one() / m[rank][col].clone();
        for j in col..cols {
            let v = &m[rank][j] * &inv;
            m[rank][j] = v;
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for j in col..cols {
                    let v = &m[r][j] - &(&f * &m[rank][j]);
                    m[r][j] = v;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip_is_exact() {
        for &x in &[0.0, 1.0, -1.5, 0.1, 1e300, -3.25e-200, f64::MIN_POSITIVE] {
            let r = rat_from_f64(x).unwrap();
            assert_eq!(rat_to_f64(&r), x, "round trip failed for {x}");
        }
    }

    #[test]
    fn to_f64_survives_huge_components() {
        let big = BigInt::from(10u8).pow(400u32);
        let r = Rat::new(&big * 3, &big * 2);
        assert_eq!(rat_to_f64(&r), 1.5);
        let r = Rat::new(-&big * 3, &big * 2);
        assert_eq!(rat_to_f64(&r), -1.5);
    }

    #[test]
    fn to_f64_rounds_correctly() {
        assert_eq!(rat_to_f64(&rat_i64(1, 3)), 1.0 / 3.0);
        assert_eq!(rat_to_f64(&rat_i64(2, 3)), 2.0 / 3.0);
        assert_eq!(rat_to_f64(&rat_i64(-22, 7)), -22.0 / 7.0);
        let x = 1.0 + f64::EPSILON;
        assert_eq!(rat_to_f64(&rat_from_f64(x).unwrap()), x);
        // exact tie: 2^54 + 2 is representable, 2^54 + 1 is a tie -> rounds to even
        let tie = Rat::from_integer(BigInt::from((1u64 << 54) + 1));
        assert_eq!(rat_to_f64(&tie), (1u64 << 54) as f64);
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(rat_parse("3/4"), Some(rat_i64(3, 4)));
        assert_eq!(rat_parse("-7"), Some(rat_int(-7)));
        assert_eq!(rat_parse("1/0"), None);
        assert_eq!(rat_fmt(&rat_i64(3, 4)), "3/4");
        assert_eq!(rat_fmt(&rat_int(5)), "5");
        assert_eq!(rat_parse("0.25"), Some(rat_i64(1, 4)));
    }

    #[test]
    fn limit_denominator_finds_convergents() {
        let pi_approx = rat_from_f64(std::f64::consts::PI).unwrap();
        let lim = rat_limit_denominator(&pi_approx, &BigInt::from(1000));
        assert_eq!(lim, rat_i64(355, 113));
        let x = rat_i64(1, 7);
        assert_eq!(rat_limit_denominator(&x, &BigInt::from(100)), x);
    }

    #[test]
    fn exact_solve_small() {
        let a = vec![vec![rat_int(2), rat_int(1)], vec![rat_int(1), rat_int(3)]];
        let b = vec![rat_int(5), rat_int(10)];
        let x = solve_exact_one(&a, &b).unwrap();
        assert_eq!(x, vec![rat_int(1), rat_int(3)]);
        let a = vec![vec![rat_int(1), rat_int(2)], vec![rat_int(2), rat_int(4)]];
        assert!(solve_exact_one(&a, &b).is_none());
    }

    #[test]
    fn rank_matches_hand_counts() {
        let a = vec![
            vec![rat_int(1), rat_int(2), rat_int(3)],
            vec![rat_int(2), rat_int(4), rat_int(6)],
            vec![rat_int(0), rat_int(1), rat_int(1)],
        ];
        assert_eq!(rank_exact(&a), 2);
    }
}
