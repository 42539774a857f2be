//! Dense joint distributions over `q^L` outcomes and exact information
//! measures on them.
//!
//! Everything is in nats. Outcomes are stored in mixed radix with position 0
//! as the lowest digit, so outcome `(x_0, x_1, ..., x_{L-1})` lives at index
//! `x_0 + x_1 q + ... + x_{L-1} q^{L-1}`. Positions are zero-based throughout
//! the crate.
//!
//! ```
//! use unmask::info::TabularDist;
//!
//! // X_2 = X_0 xor X_1
//! let parity = TabularDist::parity(3, 2).unwrap();
//! let ln2 = std::f64::consts::LN_2;
//! assert!((parity.entropy() - 2.0 * ln2).abs() < 1e-12);
//! assert!((parity.total_correlation() - ln2).abs() < 1e-12);
//! assert!((parity.dual_total_correlation() - 2.0 * ln2).abs() < 1e-12);
//! ```

use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::gf::{Elem, Gf2m, RsCodeSpec};

/// Largest table a [`TabularDist`] may hold unless a different cap is given.
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

/// Probabilities below this count as exact zeros in entropy sums.
pub const ZERO_MASS: f64 = 1e-15;

const SUM_TOLERANCE: f64 = 1e-12;

/// `q^len`, or `None` if it overflows.
pub fn cell_count(q: usize, len: usize) -> Option<usize> {
    q.checked_pow(len.try_into().ok()?)
}

fn capacity_check(q: usize, len: usize, cap: usize) -> Result<usize> {
    match cell_count(q, len) {
        Some(n) if n <= cap => Ok(n),
        n => Err(Error::Capacity {
            what: "tabular distribution cells",
            needed: n.map_or(u128::MAX, |n| n as u128),
            cap: cap as u128,
        }),
    }
}

/// `-p ln p` with tiny masses treated as zero.
#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p < ZERO_MASS {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Values of a subset of positions, kept sorted by position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    positions: Vec<usize>,
    values: Vec<usize>,
}

impl Assignment {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an assignment from `(position, value)` pairs in any order.
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Arity("assignment repeats a position".into()));
        }
        let (positions, values) = pairs.into_iter().unzip();
        Ok(Self { positions, values })
    }

    /// The restriction of a full outcome to `positions`.
    pub fn restrict(outcome: &[usize], positions: &[usize]) -> Self {
        let mut pairs: Vec<_> = positions.iter().map(|&p| (p, outcome[p])).collect();
        pairs.sort_unstable();
        let (positions, values) = pairs.into_iter().unzip();
        Self { positions, values }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.positions
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn get(&self, position: usize) -> Option<usize> {
        self.positions
            .binary_search(&position)
            .ok()
            .map(|k| self.values[k])
    }

    /// This assignment extended by another on disjoint positions.
    pub fn union(&self, other: &Assignment) -> Result<Self> {
        Self::new(self.iter().chain(other.iter()))
    }
}

/// A joint law of `(X_0, ..., X_{L-1})` over alphabet `0..q`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDist {
    q: usize,
    len: usize,
    probs: Vec<f64>,
}

impl TabularDist {
    pub fn new(q: usize, len: usize, probs: Vec<f64>) -> Result<Self> {
        Self::with_cap(q, len, probs, DEFAULT_MAX_CELLS)
    }

    pub fn with_cap(q: usize, len: usize, probs: Vec<f64>, cap: usize) -> Result<Self> {
        if q < 2 || len == 0 {
            return Err(Error::InvalidDistribution(format!(
                "need q >= 2 and L >= 1, got q = {q}, L = {len}"
            )));
        }
        let cells = capacity_check(q, len, cap)?;
        if probs.len() != cells {
            return Err(Error::InvalidDistribution(format!(
                "expected {cells} probabilities, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution(format!("bad probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { q, len, probs })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(q: usize, len: usize, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(q, len, weights)
    }

    pub fn uniform(q: usize, len: usize) -> Result<Self> {
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        Self::new(q, len, vec![1.0 / cells as f64; cells])
    }

    pub fn point_mass(q: usize, outcome: &[usize]) -> Result<Self> {
        let cells = capacity_check(q, outcome.len(), DEFAULT_MAX_CELLS)?;
        let mut probs = vec![0.0; cells];
        probs[encode(q, outcome)] = 1.0;
        Self::new(q, outcome.len(), probs)
    }

    /// Independent coordinates with the given marginals.
    pub fn product(q: usize, marginals: &[Vec<f64>]) -> Result<Self> {
        let len = marginals.len();
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        if marginals.iter().any(|m| m.len() != q) {
            return Err(Error::Arity(format!("every marginal needs {q} entries")));
        }
        let mut digits = vec![0; len];
        let probs = (0..cells)
            .map(|idx| {
                decode_into(q, idx, &mut digits);
                digits.iter().zip(marginals).map(|(&x, m)| m[x]).product()
            })
            .collect();
        Self::new(q, len, probs)
    }

    /// A draw from the flat Dirichlet over the simplex.
    pub fn random<R: Rng + ?Sized>(q: usize, len: usize, rng: &mut R) -> Result<Self> {
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        let weights = (0..cells).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        Self::from_weights(q, len, weights)
    }

    /// Like [`TabularDist::random`] but each outcome is zeroed with
    /// probability `zero_frac` (at least one outcome survives).
    pub fn random_sparse<R: Rng + ?Sized>(
        q: usize,
        len: usize,
        zero_frac: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        let mut weights: Vec<f64> = (0..cells)
            .map(|_| {
                let w: f64 = rng.sample(Exp1);
                if rng.random::<f64>() < zero_frac {
                    0.0
                } else {
                    w
                }
            })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights[rng.random_range(0..cells)] = 1.0;
        }
        Self::from_weights(q, len, weights)
    }

    /// Uniform over sequences whose last symbol is the mod-`q` sum of the
    /// others (XOR checksum when `q = 2`).
    pub fn parity(len: usize, q: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidDistribution(
                "parity needs at least two positions".into(),
            ));
        }
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        let mass = 1.0 / cells as f64 * q as f64;
        let mut digits = vec![0; len];
        let probs = (0..cells)
            .map(|idx| {
                decode_into(q, idx, &mut digits);
                let sum: usize = digits[..len - 1].iter().sum();
                if sum % q == digits[len - 1] {
                    mass
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(q, len, probs)
    }

    /// Uniform over the column span of an `L x d` generator over GF(2^m).
    pub fn linear_code(field: &Gf2m, generator: &[Vec<Elem>]) -> Result<Self> {
        let len = generator.len();
        let q = field.q();
        let dim = generator.first().map_or(0, Vec::len);
        if len == 0 || dim == 0 || generator.iter().any(|row| row.len() != dim) {
            return Err(Error::Arity(
                "generator must be a nonempty L x d matrix".into(),
            ));
        }
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        let messages = capacity_check(q, dim, DEFAULT_MAX_CELLS)?;
        let mut hits = vec![0u32; cells];
        let mut msg = vec![0; dim];
        let mut word = vec![0; len];
        for m in 0..messages {
            decode_into(q, m, &mut msg);
            for (w, row) in word.iter_mut().zip(generator) {
                *w = row.iter().zip(&msg).fold(0 as Elem, |acc, (&g, &u)| {
                    field.add(acc, field.mul(g, u as Elem))
                }) as usize;
            }
            hits[encode(q, &word)] += 1;
        }
        let points = hits.iter().filter(|&&h| h > 0).count();
        if points != messages {
            return Err(Error::Rank {
                points,
                expected: messages,
            });
        }
        let mass = 1.0 / messages as f64;
        let probs = hits
            .iter()
            .map(|&h| if h > 0 { mass } else { 0.0 })
            .collect();
        Self::new(q, len, probs)
    }

    /// Uniform over the codewords of a (small) Reed-Solomon code.
    pub fn reed_solomon(spec: &RsCodeSpec) -> Result<Self> {
        Self::linear_code(spec.field(), &spec.generator_matrix())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, outcome: &[usize]) -> f64 {
        self.probs[encode(self.q, outcome)]
    }

    pub fn index_of(&self, outcome: &[usize]) -> usize {
        encode(self.q, outcome)
    }

    pub fn outcome(&self, index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.len];
        decode_into(self.q, index, &mut digits);
        digits
    }

    fn check_positions(&self, positions: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.len];
        for &p in positions {
            if p >= self.len {
                return Err(Error::Arity(format!(
                    "position {p} outside 0..{}",
                    self.len
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Arity(format!("position {p} repeated")));
            }
        }
        Ok(())
    }

    /// Sums the table onto `positions` (in the given order), restricted to
    /// outcomes agreeing with `ctx`.
    fn project(&self, positions: &[usize], ctx: &Assignment) -> Vec<f64> {
        let mut out_stride = vec![0usize; self.len];
        let mut stride = 1;
        for &p in positions {
            out_stride[p] = stride;
            stride *= self.q;
        }
        let mut out = vec![0.0; stride];
        let mut digits = vec![0; self.len];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode_into(self.q, idx, &mut digits);
            if ctx.iter().any(|(pos, v)| digits[pos] != v) {
                continue;
            }
            let sub: usize = digits.iter().zip(&out_stride).map(|(d, s)| d * s).sum();
            out[sub] += p;
        }
        out
    }

    /// Law of `X_S`, with `S` re-indexed `0..|S|` in the order given.
    pub fn marginal(&self, s: &[usize]) -> Result<TabularDist> {
        if s.is_empty() {
            return Err(Error::Arity("marginal over an empty index set".into()));
        }
        self.check_positions(s)?;
        let probs = self.project(s, &Assignment::empty());
        Ok(TabularDist {
            q: self.q,
            len: s.len(),
            probs,
        })
    }

    /// Law of `X_S` given `X_ctx = ctx`.
    pub fn conditional(&self, s: &[usize], ctx: &Assignment) -> Result<TabularDist> {
        if s.is_empty() {
            return Err(Error::Arity("conditional over an empty index set".into()));
        }
        self.check_positions(s)?;
        self.check_positions(ctx.positions())?;
        if s.iter().any(|p| ctx.get(*p).is_some()) {
            return Err(Error::Arity("target overlaps the context".into()));
        }
        if ctx.values().iter().any(|&v| v >= self.q) {
            return Err(Error::Arity("context symbol outside the alphabet".into()));
        }
        let mut probs = self.project(s, ctx);
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroContext);
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(TabularDist {
            q: self.q,
            len: s.len(),
            probs,
        })
    }

    /// Probability that `X_ctx = ctx`.
    pub fn context_mass(&self, ctx: &Assignment) -> f64 {
        if ctx.is_empty() {
            return 1.0;
        }
        self.project(ctx.positions(), ctx).iter().sum()
    }

    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|&p| plogp(p)).sum()
    }

    /// `H(X_S)`; zero for the empty set.
    pub fn subset_entropy(&self, s: &[usize]) -> f64 {
        if s.is_empty() {
            return 0.0;
        }
        self.project(s, &Assignment::empty())
            .into_iter()
            .map(plogp)
            .sum()
    }

    /// `H(X_S | X_T) = H(X_{S u T}) - H(X_T)`.
    pub fn conditional_entropy(&self, s: &[usize], t: &[usize]) -> Result<f64> {
        self.check_disjoint(s, t)?;
        Ok(self.subset_entropy(&union(s, t)) - self.subset_entropy(t))
    }

    pub fn total_correlation(&self) -> f64 {
        let singles: f64 = (0..self.len).map(|i| self.subset_entropy(&[i])).sum();
        singles - self.entropy()
    }

    pub fn dual_total_correlation(&self) -> f64 {
        let all: Vec<usize> = (0..self.len).collect();
        let joint = self.entropy();
        let residual: f64 = (0..self.len)
            .map(|i| joint - self.subset_entropy(&without(&all, i)))
            .sum();
        joint - residual
    }

    /// `sum_{i in S} H(X_i | X_T) - H(X_S | X_T)`.
    pub fn conditional_tc(&self, s: &[usize], t: &[usize]) -> Result<f64> {
        self.check_disjoint(s, t)?;
        let h_t = self.subset_entropy(t);
        let singles: f64 = s
            .iter()
            .map(|&i| self.subset_entropy(&union(&[i], t)) - h_t)
            .sum();
        Ok(singles - (self.subset_entropy(&union(s, t)) - h_t))
    }

    /// `H(X_S | X_T) - sum_{i in S} H(X_i | X_{(S \ i) u T})`.
    pub fn conditional_dtc(&self, s: &[usize], t: &[usize]) -> Result<f64> {
        self.check_disjoint(s, t)?;
        let st = union(s, t);
        let h_st = self.subset_entropy(&st);
        let residual: f64 = s
            .iter()
            .map(|&i| h_st - self.subset_entropy(&without(&st, i)))
            .sum();
        Ok(h_st - self.subset_entropy(t) - residual)
    }

    /// `I(X_i; X_{-i})`.
    pub fn mutual_info_loo(&self, i: usize) -> Result<f64> {
        self.check_positions(&[i])?;
        let all: Vec<usize> = (0..self.len).collect();
        Ok(self.subset_entropy(&[i]) + self.subset_entropy(&without(&all, i)) - self.entropy())
    }

    fn check_disjoint(&self, s: &[usize], t: &[usize]) -> Result<()> {
        if s.is_empty() {
            return Err(Error::Arity("empty target set".into()));
        }
        self.check_positions(s)?;
        self.check_positions(t)?;
        if s.iter().any(|p| t.contains(p)) {
            return Err(Error::Arity("target and conditioning sets overlap".into()));
        }
        Ok(())
    }

    /// Writes `index,probability` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["index", "probability"])
            .map_err(|e| Error::csv(path, e))?;
        for (idx, p) in self.probs.iter().enumerate() {
            w.write_record([idx.to_string(), p.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`TabularDist::write_csv`]. Missing indices
    /// are zero.
    pub fn read_csv(path: impl AsRef<Path>, q: usize, len: usize) -> Result<Self> {
        let path = path.as_ref();
        let cells = capacity_check(q, len, DEFAULT_MAX_CELLS)?;
        let mut probs = vec![0.0; cells];
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        for row in r.deserialize::<(usize, f64)>() {
            let (idx, p) = row.map_err(|e| Error::csv(path, e))?;
            if idx >= cells {
                return Err(Error::InvalidDistribution(format!(
                    "{}: index {idx} outside 0..{cells}",
                    path.display()
                )));
            }
            probs[idx] = p;
        }
        Self::new(q, len, probs)
    }
}

pub(crate) fn encode(q: usize, digits: &[usize]) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * q + d)
}

pub(crate) fn decode_into(q: usize, mut index: usize, digits: &mut [usize]) {
    for d in digits.iter_mut() {
        *d = index % q;
        index /= q;
    }
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn without(set: &[usize], i: usize) -> Vec<usize> {
    set.iter().copied().filter(|&p| p != i).collect()
}
