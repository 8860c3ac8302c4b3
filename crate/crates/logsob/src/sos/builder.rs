//! Assembly of sum-of-squares programs into semidefinite data.
//!
//! A program is a finite family of polynomial identities, each of the form
//!
//! ```text
//!   (Gram-cone contributions) + (free-variable polynomials) = constant polynomial,
//! ```
//!
//! held coefficient-by-coefficient. Identities live in separate *row
//! families*: the main identity over the chain variables, one univariate
//! identity per state, and one bivariate identity per ordered pair. The
//! builder accumulates exact rational coefficients keyed by
//! `(family, monomial)` and emits an [`SdpProblem`] carrying both the float
//! rows and their exact rational copy.
//!
//! A univariate family may instead be enforced *pointwise* through
//! [`ProgramBuilder::set_value_frame`]: the identity is required to hold at
//! `B + 1` fixed rational points, which is equivalent to coefficient equality
//! for degrees up to `B` but produces far better conditioned rows at high
//! budgets (coefficient extraction mixes the scales of all derivatives, while
//! evaluations at spread points stay bounded by the polynomial's sup-norm).
//! In a value frame the row key's "monomial" is the point index.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::poly::{Monomial, Polynomial};
use crate::ratla::rat_to_f64;
use crate::sdp::{RatRow, RationalCopy, SdpProblem, SdpRow};
use crate::Rat;

/// Identifies which polynomial identity a row belongs to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum RowFamily {
    /// The identity over the chain variables `x_0 .. x_{n-1}`.
    Main,
    /// The univariate identity attached to one state.
    Uni(usize),
    /// A bivariate identity attached to one ordered pair (index into the
    /// program's pair list).
    Pair(usize),
}

/// One equation: the coefficient of `mono` inside its family's identity.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct RowKey {
    pub family: RowFamily,
    pub mono: Monomial,
}

#[derive(Default, Clone)]
struct RowAccum {
    free: BTreeMap<usize, Rat>,
    psd: BTreeMap<(usize, usize, usize), Rat>,
    rhs: Rat,
}

/// Accumulates identities with exact coefficients, then emits semidefinite
/// data in a deterministic row order (families in `RowFamily` order, monomials
/// in graded lexicographic order).
pub struct ProgramBuilder {
    free_names: Vec<String>,
    block_dims: Vec<usize>,
    rows: BTreeMap<RowKey, RowAccum>,
    value_frames: BTreeMap<RowFamily, Vec<Rat>>,
}

/// The emitted problem plus the row keys, index-aligned with the rows.
pub struct BuiltProgram {
    pub sdp: SdpProblem,
    pub row_keys: Vec<RowKey>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        ProgramBuilder {
            free_names: Vec::new(),
            block_dims: Vec::new(),
            rows: BTreeMap::new(),
            value_frames: BTreeMap::new(),
        }
    }

    /// Switches a univariate family to pointwise rows: one equation per
    /// evaluation point instead of one per coefficient. Must be called before
    /// anything is added to the family. The points must be pairwise distinct
    /// and at least `deg + 1` many for every polynomial later added to the
    /// family (checked at add time).
    pub fn set_value_frame(&mut self, family: RowFamily, points: Vec<Rat>) {
        for (i, p) in points.iter().enumerate() {
            assert!(
                points[..i].iter().all(|q| q != p),
                "value-frame points must be distinct"
            );
        }
        assert!(!points.is_empty(), "value frame needs at least one point");
        assert!(
            !self.rows.keys().any(|k| k.family == family),
            "value frame must be set before rows are added to the family"
        );
        self.value_frames.insert(family, points);
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> usize {
        self.free_names.push(name.into());
        self.free_names.len() - 1
    }

    pub fn num_free(&self) -> usize {
        self.free_names.len()
    }

    pub fn free_names(&self) -> &[String] {
        &self.free_names
    }

    pub fn add_block(&mut self, dim: usize) -> usize {
        assert!(dim > 0, "PSD blocks must be nonempty");
        self.block_dims.push(dim);
        self.block_dims.len() - 1
    }

    fn row_mut(&mut self, family: RowFamily, mono: Monomial) -> &mut RowAccum {
        self.rows.entry(RowKey { family, mono }).or_default()
    }

    /// Row keys and coefficients contributed by `poly` to this family: its
    /// terms in a coefficient frame, its values at the family's points in a
    /// value frame (point index in the key).
    fn contributions(&self, family: RowFamily, poly: &Polynomial<Rat>) -> Vec<(Monomial, Rat)> {
        match self.value_frames.get(&family) {
            Some(points) => {
                assert_eq!(poly.nvars(), 1, "value frames are univariate");
                assert!(
                    poly.degree() < points.len(),
                    "value frame has too few points for degree {}",
                    poly.degree()
                );
                points
                    .iter()
                    .enumerate()
                    .map(|(k, pt)| {
                        (Monomial(vec![k as u8]), poly.eval(std::slice::from_ref(pt)))
                    })
                    .filter(|(_, v)| !v.is_zero())
                    .collect()
            }
            None => poly.terms().map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    /// Adds `poly`'s coefficients to the column of free variable `var` inside
    /// the given family.
    pub fn add_free_poly(&mut self, family: RowFamily, var: usize, poly: &Polynomial<Rat>) {
        assert!(var < self.free_names.len(), "free variable out of range");
        for (mono, c) in self.contributions(family, poly) {
            let acc = self.row_mut(family, mono);
            let entry = acc.free.entry(var).or_insert_with(Rat::zero);
            *entry += &c;
        }
    }

    /// Adds `poly`'s coefficients to the right-hand side of the family.
    pub fn add_rhs_poly(&mut self, family: RowFamily, poly: &Polynomial<Rat>) {
        for (mono, c) in self.contributions(family, poly) {
            let acc = self.row_mut(family, mono);
            acc.rhs += &c;
        }
    }

    /// Adds `poly`'s coefficients to the column of Gram entry `(blk, r, c)`
    /// (with `r >= c`). The polynomial must already include the factor 2 for
    /// off-diagonal pairs if the entry represents both `(r,c)` and `(c,r)`.
    pub fn add_gram_poly(
        &mut self,
        family: RowFamily,
        blk: usize,
        r: usize,
        c: usize,
        poly: &Polynomial<Rat>,
    ) {
        assert!(blk < self.block_dims.len(), "block out of range");
        assert!(r >= c && r < self.block_dims[blk], "Gram entry out of range");
        for (mono, coeff) in self.contributions(family, poly) {
            let acc = self.row_mut(family, mono);
            let entry = acc.psd.entry((blk, r, c)).or_insert_with(Rat::zero);
            *entry += &coeff;
        }
    }

    /// Compiles one Gram cone: for every entry of the Gram matrix over
    /// `basis`, scatters `weight * b_r * b_c` (doubled off the diagonal) into
    /// the family's rows. Returns the block index.
    pub fn add_gram_block(
        &mut self,
        family: RowFamily,
        weight: &Polynomial<Rat>,
        basis: &[Polynomial<Rat>],
    ) -> usize {
        let blk = self.add_block(basis.len());
        for r in 0..basis.len() {
            for c in 0..=r {
                let mut prod = basis[r].mul(&basis[c]).mul(weight);
                if r != c {
                    prod = prod.scale(&crate::ratla::rat_int(2));
                }
                self.add_gram_poly(family, blk, r, c, &prod);
            }
        }
        blk
    }

    /// Emits the semidefinite problem. `objective` lists `(free index, coeff)`
    /// pairs of the minimized linear objective.
    pub fn build(self, objective: &[(usize, f64)]) -> BuiltProgram {
        let num_free = self.free_names.len();
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut rat_rows = Vec::with_capacity(self.rows.len());
        let mut rhs = Vec::with_capacity(self.rows.len());
        let mut rat_rhs = Vec::with_capacity(self.rows.len());
        let mut row_keys = Vec::with_capacity(self.rows.len());
        for (key, acc) in self.rows {
            let free_rat: Vec<(usize, Rat)> =
                acc.free.into_iter().filter(|(_, c)| !c.is_zero()).collect();
            let psd_rat: Vec<(usize, usize, usize, Rat)> = acc
                .psd
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|((b, i, j), c)| (b, i, j, c))
                .collect();
            if free_rat.is_empty() && psd_rat.is_empty() && acc.rhs.is_zero() {
                continue; // trivially satisfied coefficient
            }
            rows.push(SdpRow {
                free: free_rat.iter().map(|(v, c)| (*v, rat_to_f64(c))).collect(),
                psd: psd_rat.iter().map(|(b, i, j, c)| (*b, *i, *j, rat_to_f64(c))).collect(),
            });
            rat_rows.push(RatRow { free: free_rat, psd: psd_rat });
            rhs.push(rat_to_f64(&acc.rhs));
            rat_rhs.push(acc.rhs);
            row_keys.push(key);
        }
        let mut obj_free = vec![0.0; num_free];
        for (v, c) in objective {
            obj_free[*v] = *c;
        }
        let sdp = SdpProblem {
            num_free,
            block_dims: self.block_dims,
            rows,
            rhs,
            obj_free,
            rational: Some(RationalCopy { rows: rat_rows, rhs: rat_rhs }),
        };
        BuiltProgram { sdp, row_keys }
    }
}

impl Default for ProgramBuilder {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratla::rat_int;

    #[test]
    fn rows_come_out_in_family_then_monomial_order() {
        let mut b = ProgramBuilder::new();
        let v = b.add_free("v");
        // Touch rows out of order across two families.
        let t2 = Polynomial::monomial(Monomial(vec![2]), rat_int(1));
        let one = Polynomial::constant(2, rat_int(1));
        let x0 = Polynomial::var(0, 2);
        b.add_free_poly(RowFamily::Uni(0), v, &t2);
        b.add_free_poly(RowFamily::Main, v, &x0);
        b.add_free_poly(RowFamily::Main, v, &one);
        let built = b.build(&[(v, 1.0)]);
        assert_eq!(built.row_keys.len(), 3);
        assert_eq!(built.row_keys[0].family, RowFamily::Main);
        assert_eq!(built.row_keys[0].mono, Monomial(vec![0, 0]));
        assert_eq!(built.row_keys[1].mono, Monomial(vec![1, 0]));
        assert_eq!(built.row_keys[2].family, RowFamily::Uni(0));
    }

    #[test]
    fn gram_block_doubles_off_diagonal_products() {
        // Basis {1, x} with weight 1: sigma = Q00 + 2 Q10 x + Q11 x^2.
        let mut b = ProgramBuilder::new();
        let basis = vec![Polynomial::constant(1, rat_int(1)), Polynomial::var(0, 1)];
        let one = Polynomial::constant(1, rat_int(1));
        let blk = b.add_gram_block(RowFamily::Main, &one, &basis);
        assert_eq!(blk, 0);
        let built = b.build(&[]);
        assert_eq!(built.sdp.rows.len(), 3);
        // Row for x^1 must reference entry (1,0) with coefficient 2.
        let r1 = &built.sdp.rows[1];
        assert_eq!(r1.psd, vec![(0, 1, 0, 2.0)]);
        // Rational copy matches the float copy entry for entry.
        let rat = built.sdp.rational.as_ref().unwrap();
        assert_eq!(rat.rows[1].psd[0].3, rat_int(2));
    }

    #[test]
    fn cancelling_contributions_drop_out_of_the_emitted_rows() {
        let mut b = ProgramBuilder::new();
        let v = b.add_free("v");
        let x0 = Polynomial::var(0, 1);
        b.add_free_poly(RowFamily::Main, v, &x0);
        b.add_free_poly(RowFamily::Main, v, &x0.neg());
        let built = b.build(&[]);
        assert!(built.sdp.rows.is_empty());
    }
}
