//! Finite Markov chains with exact rational kernels: validation, stationary
//! distributions, Dirichlet forms, entropy functionals, spectral gaps, and a
//! library of standard chains.

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Monomial, Polynomial};
use crate::ratla::{rat_fmt, rat_i64, rat_int, rat_parse, rat_to_f64};
use crate::Rat;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("kernel is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("kernel entry ({i},{j}) is negative")]
    NegativeEntry { i: usize, j: usize },
    #[error("row {0} does not sum to 1")]
    RowSum(usize),
    #[error("chain is not irreducible (state {0} unreachable or absorbing)")]
    NotIrreducible(usize),
    #[error("cannot parse rational entry '{0}'")]
    BadRational(String),
    #[error("empty kernel")]
    Empty,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("unknown chain shorthand '{0}'")]
    UnknownShorthand(String),
    #[error("random graph with n={n}, m={m} never came out connected")]
    DisconnectedRandomGraph { n: usize, m: usize },
}

/// Serializable chain description; kernel entries are rationals as strings
/// ("1/3", "0.25", "2").
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub kernel: Vec<Vec<String>>,
}

impl ChainSpec {
    pub fn to_chain(&self) -> Result<Chain, ChainError> {
        let rows: Result<Vec<Vec<Rat>>, ChainError> = self
            .kernel
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| rat_parse(s).ok_or_else(|| ChainError::BadRational(s.clone())))
                    .collect()
            })
            .collect();
        Chain::from_kernel(self.name.clone().unwrap_or_else(|| "custom".into()), rows?)
    }
}

/// An irreducible finite Markov chain with exact rational transition kernel and
/// exact stationary distribution.
#[derive(Clone, Debug)]
pub struct Chain {
    name: String,
    n: usize,
    k: Vec<Vec<Rat>>,
    pi: Vec<Rat>,
    reversible: bool,
    known_alpha: Option<f64>,
}

impl Chain {
    /// Validate a kernel and compute its exact stationary distribution.
    pub fn from_kernel(name: String, k: Vec<Vec<Rat>>) -> Result<Self, ChainError> {
        let n = k.len();
        if n == 0 {
            return Err(ChainError::Empty);
        }
        for (i, row) in k.iter().enumerate() {
            if row.len() != n {
                return Err(ChainError::NotSquare { row: i, len: row.len(), n });
            }
            let mut sum = Rat::zero();
            for (j, e) in row.iter().enumerate() {
                if e.is_negative() {
                    return Err(ChainError::NegativeEntry { i, j });
                }
                sum += e;
            }
            if !sum.is_one() {
                return Err(ChainError::RowSum(i));
            }
        }
        check_irreducible(&k)?;
        let pi = stationary_exact(&k)?;
        let reversible = (0..n).all(|i| {
            (i + 1..n).all(|j| &pi[i] * &k[i][j] == &pi[j] * &k[j][i])
        });
        Ok(Chain { name, n, k, pi, reversible, known_alpha: None })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kernel(&self) -> &[Vec<Rat>] {
        &self.k
    }

    pub fn pi(&self) -> &[Rat] {
        &self.pi
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn pi_f64(&self) -> Vec<f64> {
        self.pi.iter().map(rat_to_f64).collect()
    }

    pub fn pi_min_f64(&self) -> f64 {
        self.pi_f64().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn kernel_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| rat_to_f64(&self.k[i][j]))
    }

    pub fn to_spec(&self) -> ChainSpec {
        ChainSpec {
            name: Some(self.name.clone()),
            kernel: self
                .k
                .iter()
                .map(|row| row.iter().map(rat_fmt).collect())
                .collect(),
        }
    }

    /// Symmetric edge weight w_ij = (pi_i K_ij + pi_j K_ji) / 2, so that
    /// E(x,x) = sum_{i<j} w_ij (x_i - x_j)^2 for any chain (reversible or not).
    pub fn edge_weight(&self, i: usize, j: usize) -> Rat {
        (&self.pi[i] * &self.k[i][j] + &self.pi[j] * &self.k[j][i]) / rat_int(2)
    }

    /// Dirichlet form E(x,x) = (1/2) sum_ij pi_i K_ij (x_i - x_j)^2.
    pub fn dirichlet(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let w = rat_to_f64(&self.edge_weight(i, j));
                if w != 0.0 {
                    let d = x[i] - x[j];
                    acc += w * d * d;
                }
            }
        }
        acc
    }

    /// The quadratic form matrix A with E(x,x) = x^T A x: the symmetric part of
    /// D_pi (I - K) in the Euclidean pairing.
    pub fn dirichlet_matrix_f64(&self) -> DMatrix<f64> {
        let n = self.n;
        let kf = self.kernel_f64();
        let pif = self.pi_f64();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let dk = pif[i] * kf[(i, j)];
                a[(i, j)] -= 0.5 * dk;
                a[(j, i)] -= 0.5 * dk;
            }
            a[(i, i)] += pif[i];
        }
        a
    }

    /// Bilinear Dirichlet form E(f, g) = <f, (I - K) g>_pi (not symmetrized).
    pub fn dirichlet_pair(&self, f: &[f64], g: &[f64]) -> f64 {
        assert_eq!(f.len(), self.n);
        assert_eq!(g.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut kg = 0.0;
            for j in 0..self.n {
                kg += rat_to_f64(&self.k[i][j]) * g[j];
            }
            acc += rat_to_f64(&self.pi[i]) * f[i] * (g[i] - kg);
        }
        acc
    }

    /// E(x,x) as an exact polynomial in n variables.
    pub fn dirichlet_poly(&self) -> Polynomial<Rat> {
        let n = self.n;
        let mut p = Polynomial::zero(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.edge_weight(i, j);
                if w.is_zero() {
                    continue;
                }
                let mut ei = vec![0u8; n];
                ei[i] = 2;
                let mut ej = vec![0u8; n];
                ej[j] = 2;
                let mut eij = vec![0u8; n];
                eij[i] = 1;
                eij[j] = 1;
                p.add_term(Monomial(ei), w.clone());
                p.add_term(Monomial(ej), w.clone());
                p.add_term(Monomial(eij), -(&w * rat_int(2)));
            }
        }
        p
    }

    /// ||x||_pi^2 as an exact polynomial.
    pub fn pi_norm_poly(&self) -> Polynomial<Rat> {
        let mut p = Polynomial::zero(self.n);
        for i in 0..self.n {
            let mut e = vec![0u8; self.n];
            e[i] = 2;
            p.add_term(Monomial(e), self.pi[i].clone());
        }
        p
    }

    /// E_pi[y].
    pub fn expectation(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.n);
        y.iter()
            .zip(self.pi_f64())
            .map(|(yi, pi)| pi * yi)
            .sum()
    }

    /// Ent_pi[x^2] = E[x^2 log x^2] - E[x^2] log E[x^2], with 0 log 0 = 0.
    pub fn entropy_sq(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|&v| v * v).collect();
        self.entropy(&y)
    }

    /// Ent_pi[y] for y >= 0 entrywise, with 0 log 0 = 0.
    pub fn entropy(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.n);
        let mean = self.expectation(y);
        if mean <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (yi, pi) in y.iter().zip(self.pi_f64()) {
            if *yi > 0.0 {
                acc += pi * yi * yi.ln();
            }
        }
        acc - mean * mean.ln()
    }

    /// Spectral gap of the additive symmetrization: second-smallest eigenvalue
    /// of I - (K + K~)/2 in L^2(pi), computed as a symmetric eigenproblem.
    pub fn poincare_constant(&self) -> f64 {
        let n = self.n;
        let kf = self.kernel_f64();
        let pif = self.pi_f64();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] = (pif[i] / pif[j]).sqrt() * kf[(i, j)];
            }
        }
        let mut m = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] -= 0.5 * (c[(i, j)] + c[(j, i)]);
            }
        }
        let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        eig[1]
    }

    /// Closed-form log-Sobolev constant when one is known for this family.
    pub fn known_log_sobolev(&self) -> Option<f64> {
        self.known_alpha
    }

    // ----- standard chains -----

    /// Simple random walk on the complete graph K_n (zero diagonal).
    pub fn complete(n: usize) -> Result<Self, ChainError> {
        if n < 2 {
            return Err(ChainError::BadParameter("complete graph needs n >= 2".into()));
        }
        let off = rat_i64(1, (n - 1) as i64);
        let k = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Rat::zero() } else { off.clone() })
                    .collect()
            })
            .collect();
        let mut c = Self::from_kernel(format!("complete:{n}"), k)?;
        c.known_alpha = Some(if n == 2 {
            1.0
        } else {
            (n as f64 - 2.0) / ((n as f64 - 1.0) * ((n - 1) as f64).ln())
        });
        Ok(c)
    }

    /// Two-point i.i.d. sampler: both rows are (theta, 1 - theta), so the
    /// stationary law is (theta, 1 - theta).
    pub fn two_state(theta: Rat) -> Result<Self, ChainError> {
        if !theta.is_positive() || theta >= Rat::one() {
            return Err(ChainError::BadParameter("two-state theta must lie in (0,1)".into()));
        }
        let row = vec![theta.clone(), Rat::one() - &theta];
        let mut c = Self::from_kernel(
            format!("twostate:{}", rat_fmt(&theta)),
            vec![row.clone(), row],
        )?;
        let th = rat_to_f64(&theta);
        c.known_alpha = Some(if (th - 0.5).abs() < 1e-15 {
            0.5
        } else {
            (1.0 - 2.0 * th) / ((1.0 - th) / th).ln()
        });
        Ok(c)
    }

    /// Deterministic bit flip on {0,1}: K = [[0,1],[1,0]].
    pub fn flip() -> Self {
        let k = vec![
            vec![Rat::zero(), Rat::one()],
            vec![Rat::one(), Rat::zero()],
        ];
        let mut c = Self::from_kernel("flip".into(), k).expect("flip chain is valid");
        c.known_alpha = Some(1.0);
        c
    }

    /// Random walk on the d-dimensional hypercube: pick a uniform coordinate and
    /// flip it. Product of d flip chains with weights 1/d.
    pub fn hypercube(d: usize) -> Result<Self, ChainError> {
        if d == 0 {
            return Err(ChainError::BadParameter("hypercube needs d >= 1".into()));
        }
        let parts: Vec<(Chain, Rat)> = (0..d).map(|_| (Self::flip(), rat_i64(1, d as i64))).collect();
        let mut c = Self::product(&parts)?;
        c.name = format!("hypercube:{d}");
        c.known_alpha = Some(1.0 / d as f64);
        Ok(c)
    }

    /// Simple random walk on the n-cycle.
    pub fn cycle(n: usize) -> Result<Self, ChainError> {
        if n < 3 {
            return Err(ChainError::BadParameter("cycle needs n >= 3".into()));
        }
        let half = rat_i64(1, 2);
        let mut k = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            k[i][(i + 1) % n] = half.clone();
            k[i][(i + n - 1) % n] = half.clone();
        }
        let mut c = Self::from_kernel(format!("cycle:{n}"), k)?;
        let lambda = 1.0 - (2.0 * std::f64::consts::PI / n as f64).cos();
        c.known_alpha = if n == 3 {
            Some(1.0 / (2.0 * 2.0f64.ln()))
        } else if n % 2 == 0 || n <= 21 {
            // even cycles exactly; odd cycles verified through n = 21
            Some(lambda / 2.0)
        } else {
            None
        };
        Ok(c)
    }

    /// Simple random walk on the Petersen graph (outer 5-cycle, spokes, inner
    /// pentagram).
    pub fn petersen() -> Self {
        let mut adj = vec![vec![false; 10]; 10];
        let connect = |a: usize, b: usize, adj: &mut Vec<Vec<bool>>| {
            adj[a][b] = true;
            adj[b][a] = true;
        };
        for i in 0..5 {
            connect(i, (i + 1) % 5, &mut adj); // outer cycle
            connect(i, i + 5, &mut adj); // spokes
            connect(5 + i, 5 + (i + 2) % 5, &mut adj); // pentagram
        }
        let mut c = Self::graph_walk("petersen".into(), &adj).expect("petersen graph is valid");
        c.known_alpha = None;
        c
    }

    /// Three-point birth-death chain with middle-state bias p: from the middle,
    /// go left with probability p, right with 1-p; the ends reflect to the
    /// middle. Spectral gap is 1 for every p.
    pub fn stick(p: Rat) -> Result<Self, ChainError> {
        if !p.is_positive() || p >= Rat::one() {
            return Err(ChainError::BadParameter("stick bias must lie in (0,1)".into()));
        }
        let k = vec![
            vec![Rat::zero(), Rat::one(), Rat::zero()],
            vec![p.clone(), Rat::zero(), Rat::one() - &p],
            vec![Rat::zero(), Rat::one(), Rat::zero()],
        ];
        Self::from_kernel(format!("stick:{}", rat_fmt(&p)), k)
    }

    /// Simple random walk on an undirected graph: K_ij = 1/deg(i).
    pub fn graph_walk(name: String, adj: &[Vec<bool>]) -> Result<Self, ChainError> {
        let n = adj.len();
        let mut k = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            let deg = adj[i].iter().filter(|&&b| b).count();
            if deg == 0 {
                return Err(ChainError::NotIrreducible(i));
            }
            let w = rat_i64(1, deg as i64);
            for j in 0..n {
                if adj[i][j] {
                    if adj[j][i] != adj[i][j] {
                        return Err(ChainError::BadParameter("adjacency not symmetric".into()));
                    }
                    k[i][j] = w.clone();
                }
            }
        }
        Self::from_kernel(name, k)
    }

    /// Random walk on a uniformly sampled connected graph with n vertices and m
    /// edges; resamples (up to 1000 draws) until connected. Deterministic in the
    /// seed.
    pub fn random_graph(n: usize, m: usize, seed: u64) -> Result<Self, ChainError> {
        if n < 2 {
            return Err(ChainError::BadParameter("random graph needs n >= 2".into()));
        }
        let max_edges = n * (n - 1) / 2;
        if m < n - 1 || m > max_edges {
            return Err(ChainError::BadParameter(format!(
                "edge count m={m} outside [{}, {max_edges}]",
                n - 1
            )));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let all_pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        for _ in 0..1000 {
            // Floyd-style sample of m distinct pairs
            let mut chosen = std::collections::BTreeSet::new();
            while chosen.len() < m {
                chosen.insert(rng.random_range(0..all_pairs.len()));
            }
            let mut adj = vec![vec![false; n]; n];
            for idx in &chosen {
                let (i, j) = all_pairs[*idx];
                adj[i][j] = true;
                adj[j][i] = true;
            }
            if graph_connected(&adj) {
                return Self::graph_walk(format!("random:{n}:{m}:{seed}"), &adj);
            }
        }
        Err(ChainError::DisconnectedRandomGraph { n, m })
    }

    /// Product chain: pick component c with probability mu_c and move it with
    /// its own kernel. States are tuples in row-major order. Weights must sum
    /// to 1.
    pub fn product(parts: &[(Chain, Rat)]) -> Result<Self, ChainError> {
        if parts.is_empty() {
            return Err(ChainError::Empty);
        }
        let total: Rat = parts.iter().map(|(_, w)| w.clone()).sum();
        if !total.is_one() {
            return Err(ChainError::BadParameter("product weights must sum to 1".into()));
        }
        for (_, w) in parts {
            if !w.is_positive() {
                return Err(ChainError::BadParameter("product weights must be positive".into()));
            }
        }
        let sizes: Vec<usize> = parts.iter().map(|(c, _)| c.n).collect();
        let n: usize = sizes.iter().product();
        let decode = |mut s: usize| -> Vec<usize> {
            let mut idx = vec![0; sizes.len()];
            for (c, &sz) in sizes.iter().enumerate().rev() {
                idx[c] = s % sz;
                s /= sz;
            }
            idx
        };
        let encode = |idx: &[usize]| -> usize {
            idx.iter().zip(&sizes).fold(0, |acc, (&i, &sz)| acc * sz + i)
        };
        let mut k = vec![vec![Rat::zero(); n]; n];
        for s in 0..n {
            let idx = decode(s);
            for (c, (chain, w)) in parts.iter().enumerate() {
                for j in 0..chain.n {
                    let p = &chain.k[idx[c]][j];
                    if p.is_zero() {
                        continue;
                    }
                    let mut jdx = idx.clone();
                    jdx[c] = j;
                    k[s][encode(&jdx)] += w * p;
                }
            }
        }
        let name = format!(
            "product({})",
            parts
                .iter()
                .map(|(c, w)| format!("{}@{}", c.name, rat_fmt(w)))
                .collect::<Vec<_>>()
                .join(",")
        );
        let mut out = Self::from_kernel(name, k)?;
        // known constant: min over components of mu_c * alpha_c when all known
        let known: Option<Vec<f64>> = parts
            .iter()
            .map(|(c, w)| c.known_alpha.map(|a| a * rat_to_f64(w)))
            .collect();
        out.known_alpha = known.map(|v| v.into_iter().fold(f64::INFINITY, f64::min));
        Ok(out)
    }
}

/// Upper bounds on L^2 mixing time implied by a log-Sobolev constant and by a
/// spectral gap.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MixingBounds {
    /// (1/alpha) (1 + (1/2) log log (1/pi_min)); log log clamped at 0.
    pub via_log_sobolev: f64,
    /// (1/lambda) (1 + (1/2) log (1/pi_min)).
    pub via_spectral_gap: f64,
    /// True when pi_min >= 1/e forced the log log term to clamp at 0.
    pub log_log_clamped: bool,
}

pub fn mixing_bounds(alpha: f64, lambda: f64, pi_min: f64) -> MixingBounds {
    let log_inv = (1.0 / pi_min).ln();
    let (ll, clamped) = if log_inv > 1.0 {
        (log_inv.ln(), false)
    } else {
        (0.0, true)
    };
    MixingBounds {
        via_log_sobolev: (1.0 + 0.5 * ll) / alpha,
        via_spectral_gap: (1.0 + 0.5 * log_inv) / lambda,
        log_log_clamped: clamped,
    }
}

/// Parse shorthand like "complete:6", "cycle:7", "twostate:1/4", "hypercube:3",
/// "stick:1/3", "petersen", "random:8:12:42".
pub fn chain_from_shorthand(s: &str) -> Result<Chain, ChainError> {
    let parts: Vec<&str> = s.split(':').collect();
    let unknown = || ChainError::UnknownShorthand(s.to_string());
    let usize_arg = |t: &str| t.parse::<usize>().map_err(|_| unknown());
    let rat_arg = |t: &str| rat_parse(t).ok_or_else(unknown);
    match parts.as_slice() {
        ["complete", n] => Chain::complete(usize_arg(n)?),
        ["cycle", n] => Chain::cycle(usize_arg(n)?),
        ["hypercube", d] => Chain::hypercube(usize_arg(d)?),
        ["twostate", t] => Chain::two_state(rat_arg(t)?),
        ["stick", p] => Chain::stick(rat_arg(p)?),
        ["petersen"] => Ok(Chain::petersen()),
        ["flip"] => Ok(Chain::flip()),
        ["random", n, m, seed] => Chain::random_graph(
            usize_arg(n)?,
            usize_arg(m)?,
            seed.parse::<u64>().map_err(|_| unknown())?,
        ),
        _ => Err(unknown()),
    }
}

fn check_irreducible(k: &[Vec<Rat>]) -> Result<(), ChainError> {
    let n = k.len();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if forward { !k[i][j].is_zero() } else { !k[j][i].is_zero() };
                if edge && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    for i in 0..n {
        if !fwd[i] || !bwd[i] {
            return Err(ChainError::NotIrreducible(i));
        }
    }
    Ok(())
}

fn graph_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if adj[i][j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|b| b)
}

/// Exact stationary distribution: solve pi (K - I) = 0 with sum(pi) = 1 by
/// replacing one redundant balance equation with the normalization.
fn stationary_exact(k: &[Vec<Rat>]) -> Result<Vec<Rat>, ChainError> {
    let n = k.len();
    let mut a = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            // row i of (K^T - I)
            a[i][j] = k[j][i].clone();
            if i == j {
                a[i][j] -= Rat::one();
            }
        }
    }
    // overwrite last row with normalization
    for j in 0..n {
        a[n - 1][j] = Rat::one();
    }
    let mut b = vec![Rat::zero(); n];
    b[n - 1] = Rat::one();
    let pi = crate::ratla::solve_exact_one(&a, &b)
        .ok_or(ChainError::NotIrreducible(0))?;
    debug_assert!(pi.iter().all(|p| p.is_positive()), "stationary law must be positive");
    Ok(pi)
}

/// Verify pi K = pi exactly (used by tests and the certificate verifier).
pub fn is_stationary(k: &[Vec<Rat>], pi: &[Rat]) -> bool {
    let n = k.len();
    (0..n).all(|j| {
        let lhs: Rat = (0..n).map(|i| &pi[i] * &k[i][j]).sum();
        lhs == pi[j]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn complete_chain_properties() {
        let c = Chain::complete(5).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.is_reversible());
        for p in c.pi() {
            assert_eq!(p, &rat_i64(1, 5));
        }
        assert!(is_stationary(c.kernel(), c.pi()));
        // gap of K_n walk is n/(n-1)
        assert_relative_eq!(c.poincare_constant(), 5.0 / 4.0, epsilon = 1e-12);
        // alpha = (n-2)/((n-1) ln(n-1))
        assert_relative_eq!(
            c.known_log_sobolev().unwrap(),
            3.0 / (4.0 * 4.0f64.ln()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn two_state_family() {
        let c = Chain::two_state(rat_i64(1, 4)).unwrap();
        assert_eq!(c.pi(), &[rat_i64(1, 4), rat_i64(3, 4)]);
        assert!(c.is_reversible());
        assert_relative_eq!(c.poincare_constant(), 1.0, epsilon = 1e-12);
        let alpha = c.known_log_sobolev().unwrap();
        assert_relative_eq!(alpha, 0.5 / 3.0f64.ln(), epsilon = 1e-15);
        // balanced case: alpha = 1/2 = lambda/2 (the degenerate family)
        let b = Chain::two_state(rat_i64(1, 2)).unwrap();
        assert_relative_eq!(b.known_log_sobolev().unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(b.poincare_constant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hypercube_is_product_of_flips() {
        let h = Chain::hypercube(3).unwrap();
        assert_eq!(h.len(), 8);
        assert!(h.is_reversible());
        for p in h.pi() {
            assert_eq!(p, &rat_i64(1, 8));
        }
        assert_relative_eq!(h.poincare_constant(), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(h.known_log_sobolev().unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // kernel moves exactly one coordinate with probability 1/3
        let k = h.kernel();
        assert_eq!(k[0][1], rat_i64(1, 3)); // flip last bit
        assert_eq!(k[0][2], rat_i64(1, 3));
        assert_eq!(k[0][4], rat_i64(1, 3));
        assert_eq!(k[0][0], rat_int(0));
        assert_eq!(k[0][3], rat_int(0));
    }

    #[test]
    fn cycle_gap_and_known_constants() {
        let c4 = Chain::cycle(4).unwrap();
        let lambda4 = 1.0 - (std::f64::consts::PI / 2.0).cos(); // = 1
        assert_relative_eq!(c4.poincare_constant(), lambda4, epsilon = 1e-12);
        assert_relative_eq!(c4.known_log_sobolev().unwrap(), lambda4 / 2.0, epsilon = 1e-15);
        // cycle(3) is the complete graph on three vertices
        let c3 = Chain::cycle(3).unwrap();
        let k3 = Chain::complete(3).unwrap();
        assert_eq!(c3.kernel(), k3.kernel());
        assert_relative_eq!(
            c3.known_log_sobolev().unwrap(),
            1.0 / (2.0 * 2.0f64.ln()),
            epsilon = 1e-15
        );
        // odd cycle in the verified range
        let c5 = Chain::cycle(5).unwrap();
        let lambda5 = 1.0 - (2.0 * std::f64::consts::PI / 5.0).cos();
        assert_relative_eq!(c5.known_log_sobolev().unwrap(), lambda5 / 2.0, epsilon = 1e-15);
        // large odd cycle: open
        assert!(Chain::cycle(23).unwrap().known_log_sobolev().is_none());
    }

    #[test]
    fn dirichlet_form_hand_values() {
        let c = Chain::cycle(4).unwrap();
        // x = indicator of state 0: edges (0,1) and (0,3) each carry weight
        // pi_0 K_01 = 1/8, so E = (1/8 + 1/8) * 1 = 1/4
        assert_relative_eq!(c.dirichlet(&[1.0, 0.0, 0.0, 0.0]), 0.25, epsilon = 1e-15);
        // antisymmetric (1,1,-1,-1): edges (1,2) and (3,0) differ by 2
        assert_relative_eq!(c.dirichlet(&[1.0, 1.0, -1.0, -1.0]), 1.0, epsilon = 1e-15);
        // constants have zero energy
        assert_relative_eq!(c.dirichlet(&[2.0, 2.0, 2.0, 2.0]), 0.0, epsilon = 1e-15);
        // matrix form agrees
        let a = c.dirichlet_matrix_f64();
        let x = DVector::from_vec(vec![0.3, -1.2, 0.7, 2.0]);
        let quad = (x.transpose() * &a * &x)[(0, 0)];
        assert_relative_eq!(c.dirichlet(x.as_slice()), quad, epsilon = 1e-12);
        // polynomial form agrees
        let pf = c.dirichlet_poly().to_f64_poly();
        assert_relative_eq!(pf.eval(&[0.3, -1.2, 0.7, 2.0]), quad, epsilon = 1e-12);
    }

    #[test]
    fn dirichlet_pair_matches_quadratic_on_diagonal() {
        let c = Chain::petersen();
        let x: Vec<f64> = (0..10).map(|i| 0.2 + 0.1 * i as f64).collect();
        assert_relative_eq!(c.dirichlet_pair(&x, &x), c.dirichlet(&x), epsilon = 1e-12);
    }

    #[test]
    fn entropy_values() {
        let c = Chain::two_state(rat_i64(1, 2)).unwrap();
        // Ent[x^2] with x = (sqrt 2, 0): E[x^2] = 1, Ent = (1/2) 2 ln 2 = ln 2
        let e = c.entropy_sq(&[2f64.sqrt(), 0.0]);
        assert_relative_eq!(e, 2f64.ln(), epsilon = 1e-12);
        // constants have zero entropy
        assert_relative_eq!(c.entropy_sq(&[1.0, 1.0]), 0.0, epsilon = 1e-15);
        // scale invariance of the ratio functional inputs: Ent[c y] = c Ent[y]
        let y = [0.3, 1.7];
        assert_relative_eq!(c.entropy(&y.map(|v| 5.0 * v)), 5.0 * c.entropy(&y), epsilon = 1e-12);
    }

    #[test]
    fn petersen_structure() {
        let c = Chain::petersen();
        assert_eq!(c.len(), 10);
        assert!(c.is_reversible());
        for p in c.pi() {
            assert_eq!(p, &rat_i64(1, 10));
        }
        assert_relative_eq!(c.poincare_constant(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn stick_gap_is_one_for_all_biases() {
        for p in [rat_i64(1, 4), rat_i64(1, 2), rat_i64(2, 3), rat_i64(9, 10)] {
            let c = Chain::stick(p.clone()).unwrap();
            assert!(c.is_reversible());
            assert_relative_eq!(c.poincare_constant(), 1.0, epsilon = 1e-12);
            // pi = (p/2, 1/2, (1-p)/2)
            assert_eq!(c.pi()[0], &p / rat_int(2));
            assert_eq!(c.pi()[1], rat_i64(1, 2));
        }
    }

    #[test]
    fn random_graph_deterministic_and_connected() {
        let a = Chain::random_graph(8, 12, 42).unwrap();
        let b = Chain::random_graph(8, 12, 42).unwrap();
        assert_eq!(a.kernel(), b.kernel());
        let c = Chain::random_graph(8, 12, 43).unwrap();
        assert!(a.kernel() != c.kernel(), "different seeds should differ");
        assert!(a.is_reversible());
        // spanning-tree edge count forces connectivity check to matter
        let t = Chain::random_graph(6, 5, 7).unwrap();
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn product_known_constant_min_rule() {
        let parts = vec![
            (Chain::complete(3).unwrap(), rat_i64(1, 3)),
            (Chain::two_state(rat_i64(1, 2)).unwrap(), rat_i64(2, 3)),
        ];
        let p = Chain::product(&parts).unwrap();
        assert_eq!(p.len(), 6);
        let expect = (1.0f64 / (2.0 * 2.0f64.ln()) / 3.0).min(0.5 * 2.0 / 3.0);
        assert_relative_eq!(p.known_log_sobolev().unwrap(), expect, epsilon = 1e-15);
        assert!(is_stationary(p.kernel(), p.pi()));
    }

    #[test]
    fn validation_rejects_bad_kernels() {
        // rows must sum to one
        let bad = vec![
            vec![rat_i64(1, 2), rat_i64(1, 4)],
            vec![rat_i64(1, 2), rat_i64(1, 2)],
        ];
        assert!(matches!(
            Chain::from_kernel("bad".into(), bad),
            Err(ChainError::RowSum(0))
        ));
        // reducible chains rejected
        let split = vec![
            vec![Rat::one(), Rat::zero()],
            vec![Rat::zero(), Rat::one()],
        ];
        assert!(matches!(
            Chain::from_kernel("split".into(), split),
            Err(ChainError::NotIrreducible(_))
        ));
        // negative entries rejected
        let neg = vec![
            vec![rat_i64(3, 2), rat_i64(-1, 2)],
            vec![rat_i64(1, 2), rat_i64(1, 2)],
        ];
        assert!(matches!(
            Chain::from_kernel("neg".into(), neg),
            Err(ChainError::NegativeEntry { .. })
        ));
    }

    #[test]
    fn spec_round_trip() {
        let c = Chain::stick(rat_i64(1, 3)).unwrap();
        let spec = c.to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ChainSpec = serde_json::from_str(&json).unwrap();
        let c2 = back.to_chain().unwrap();
        assert_eq!(c.kernel(), c2.kernel());
        assert_eq!(c.pi(), c2.pi());
    }

    #[test]
    fn shorthand_parser() {
        assert_eq!(chain_from_shorthand("complete:6").unwrap().len(), 6);
        assert_eq!(chain_from_shorthand("petersen").unwrap().len(), 10);
        assert_eq!(chain_from_shorthand("twostate:1/4").unwrap().pi()[0], rat_i64(1, 4));
        assert_eq!(chain_from_shorthand("random:8:12:42").unwrap().len(), 8);
        assert!(chain_from_shorthand("dodecahedron").is_err());
        assert!(chain_from_shorthand("complete:x").is_err());
    }

    #[test]
    fn mixing_bound_formulas() {
        let b = mixing_bounds(0.25, 1.0, 0.01);
        let l = (100.0f64).ln();
        assert_relative_eq!(b.via_log_sobolev, 4.0 * (1.0 + 0.5 * l.ln()), epsilon = 1e-12);
        assert_relative_eq!(b.via_spectral_gap, 1.0 + 0.5 * l, epsilon = 1e-12);
        assert!(!b.log_log_clamped);
        // two-state uniform: pi_min = 1/2 > 1/e clamps the log log term
        let c = mixing_bounds(0.5, 1.0, 0.5);
        assert!(c.log_log_clamped);
        assert_relative_eq!(c.via_log_sobolev, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mixing_bound_lsi_beats_gap_on_hypercube() {
        // the log-Sobolev route scales like d log d vs d^2 for the gap route
        let d = 10usize;
        let alpha = 1.0 / d as f64;
        let lambda = 2.0 / d as f64;
        let pi_min = 0.5f64.powi(d as i32);
        let b = mixing_bounds(alpha, lambda, pi_min);
        assert!(b.via_log_sobolev < b.via_spectral_gap);
    }
}
