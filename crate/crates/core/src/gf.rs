//! Arithmetic in GF(2^m) and Reed-Solomon evaluation codes over it.
//!
//! Field elements are bit patterns `0..q` read as polynomials over GF(2),
//! bit `k` being the coefficient of `x^k`. Multiplication goes through
//! log/antilog tables built once per field, so a [`Gf2m`] is cheap to share
//! across threads after construction.
//!
//! ```
//! use unmask::gf::Gf2m;
//!
//! let gf8 = Gf2m::new(3).unwrap(); // x^3 + x + 1
//! assert_eq!(gf8.add(3, 5), 6);
//! assert_eq!(gf8.mul(2, 6), 7);
//! assert_eq!(gf8.inv(2).unwrap(), 5);
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A field element. Fields up to GF(2^16) fit.
pub type Elem = u16;

pub const MAX_DEGREE: u32 = 16;

/// Carry-less product of two polynomials over GF(2).
fn clmul(mut a: u32, b: u32) -> u64 {
    let mut acc = 0u64;
    let mut shifted = b as u64;
    while a != 0 {
        if a & 1 == 1 {
            acc ^= shifted;
        }
        a >>= 1;
        shifted <<= 1;
    }
    acc
}

fn degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

/// Remainder of `a` modulo `b` over GF(2). `b` must be nonzero.
fn poly_rem(mut a: u64, b: u64) -> u64 {
    let db = degree(b);
    while a != 0 && degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

/// Exhaustive trial division by every polynomial of degree `1..=m/2`.
pub fn is_irreducible(poly: u32, m: u32) -> bool {
    if m == 0 || degree(poly as u64) != m as i32 {
        return false;
    }
    let max_div = 1u64 << (m / 2 + 1);
    (2..max_div).all(|g| poly_rem(poly as u64, g) != 0)
}

/// The numerically smallest irreducible polynomial of degree `m`.
pub fn default_poly(m: u32) -> Result<u32> {
    if m == 0 || m > MAX_DEGREE {
        return Err(Error::InvalidField(format!(
            "extension degree {m} outside 1..={MAX_DEGREE}"
        )));
    }
    (1u32 << m..1u32 << (m + 1))
        .find(|&p| is_irreducible(p, m))
        .ok_or_else(|| Error::InvalidField(format!("no irreducible polynomial of degree {m}")))
}

/// GF(2^m) with log/antilog tables.
#[derive(Clone, Debug)]
pub struct Gf2m {
    m: u32,
    poly: u32,
    generator: Elem,
    // exp has 2(q-1) entries so that exp[log a + log b] needs no reduction.
    exp: Vec<Elem>,
    log: Vec<u32>,
}

impl PartialEq for Gf2m {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.poly == other.poly
    }
}

impl Eq for Gf2m {}

impl Gf2m {
    /// The field of size `2^m` reduced by [`default_poly`].
    pub fn new(m: u32) -> Result<Self> {
        Self::with_poly(m, default_poly(m)?)
    }

    pub fn with_poly(m: u32, poly: u32) -> Result<Self> {
        if m == 0 || m > MAX_DEGREE {
            return Err(Error::InvalidField(format!(
                "extension degree {m} outside 1..={MAX_DEGREE}"
            )));
        }
        if !is_irreducible(poly, m) {
            return Err(Error::InvalidField(format!(
                "{poly:#b} is not an irreducible polynomial of degree {m}"
            )));
        }
        let q = 1usize << m;
        let order = q - 1;
        let mul_slow = |a: u32, b: u32| poly_rem(clmul(a, b), poly as u64) as u32;

        // Smallest element whose powers hit every nonzero element.
        let mut found = None;
        for g in 1..q as u32 {
            let mut exp = Vec::with_capacity(order);
            let mut x = 1u32;
            loop {
                exp.push(x as Elem);
                x = mul_slow(x, g);
                if x == 1 || exp.len() > order {
                    break;
                }
            }
            if exp.len() == order {
                found = Some((g as Elem, exp));
                break;
            }
        }
        let (generator, mut exp) = found.ok_or_else(|| {
            Error::InvalidField(format!("no primitive element found for {poly:#b}"))
        })?;
        let mut log = vec![0u32; q];
        for (k, &e) in exp.iter().enumerate() {
            log[e as usize] = k as u32;
        }
        exp.extend_from_within(..);
        Ok(Self {
            m,
            poly,
            generator,
            exp,
            log,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Field size `2^m`.
    pub fn q(&self) -> usize {
        1usize << self.m
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// The primitive element the tables are built on.
    pub fn generator(&self) -> Elem {
        self.generator
    }

    pub fn contains(&self, a: Elem) -> bool {
        (a as usize) < self.q()
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a == 0 {
            return Err(Error::DivisionByZero { m: self.m });
        }
        let order = self.q() as u32 - 1;
        Ok(self.exp[((order - self.log[a as usize]) % order) as usize])
    }

    pub fn div(&self, a: Elem, b: Elem) -> Result<Elem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Elem, e: u64) -> Elem {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let order = self.q() as u64 - 1;
        let k = (self.log[a as usize] as u64 * (e % order)) % order;
        self.exp[k as usize]
    }

    /// Horner evaluation of `coeffs[0] + coeffs[1] x + ...` at `x`.
    pub fn eval_poly(&self, coeffs: &[Elem], x: Elem) -> Elem {
        coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| self.add(self.mul(acc, x), c))
    }
}

/// A Reed-Solomon code: polynomials of degree `< dim` evaluated at `len`
/// distinct nonzero points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsCodeSpec {
    field: Gf2m,
    dim: usize,
    eval_points: Vec<Elem>,
}

impl RsCodeSpec {
    /// Evaluation points are the field elements labelled `1..=len`.
    pub fn new(field: Gf2m, len: usize, dim: usize) -> Result<Self> {
        if len >= field.q() {
            return Err(Error::InvalidCode(format!(
                "length {len} exceeds q - 1 = {}",
                field.q() - 1
            )));
        }
        let points = (1..=len).map(|i| i as Elem).collect();
        Self::with_points(field, dim, points)
    }

    pub fn with_points(field: Gf2m, dim: usize, eval_points: Vec<Elem>) -> Result<Self> {
        let len = eval_points.len();
        if dim == 0 || dim > len || len > field.q() - 1 {
            return Err(Error::InvalidCode(format!(
                "need 1 <= d <= L <= q - 1, got d = {dim}, L = {len}, q = {}",
                field.q()
            )));
        }
        let mut seen = vec![false; field.q()];
        for &p in &eval_points {
            if p == 0 || !field.contains(p) {
                return Err(Error::InvalidCode(format!(
                    "evaluation point {p} is zero or outside the field"
                )));
            }
            if std::mem::replace(&mut seen[p as usize], true) {
                return Err(Error::InvalidCode(format!(
                    "duplicate evaluation point {p}"
                )));
            }
        }
        Ok(Self {
            field,
            dim,
            eval_points,
        })
    }

    pub fn field(&self) -> &Gf2m {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.eval_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eval_points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q(&self) -> usize {
        self.field.q()
    }

    pub fn eval_points(&self) -> &[Elem] {
        &self.eval_points
    }

    /// Evaluates the message polynomial at every point.
    pub fn encode(&self, coeffs: &[Elem]) -> Result<Vec<Elem>> {
        if coeffs.len() != self.dim {
            return Err(Error::Arity(format!(
                "expected {} coefficients, got {}",
                self.dim,
                coeffs.len()
            )));
        }
        self.check_symbols(coeffs.iter().copied())?;
        Ok(self
            .eval_points
            .iter()
            .map(|&x| self.field.eval_poly(coeffs, x))
            .collect())
    }

    /// Recovers the coefficient vector from at least `dim` known coordinates.
    ///
    /// The first `dim` positions (in ascending order) determine the
    /// polynomial; every further position must agree with it.
    pub fn interpolate(&self, assignments: &BTreeMap<usize, Elem>) -> Result<Vec<Elem>> {
        if assignments.len() < self.dim {
            return Err(Error::Underdetermined {
                needed: self.dim,
                got: assignments.len(),
            });
        }
        if let Some(&pos) = assignments.keys().find(|&&p| p >= self.len()) {
            return Err(Error::Arity(format!(
                "position {pos} outside code length {}",
                self.len()
            )));
        }
        self.check_symbols(assignments.values().copied())?;

        let f = &self.field;
        let (head, tail): (Vec<_>, Vec<_>) = assignments
            .iter()
            .enumerate()
            .partition(|(k, _)| *k < self.dim);
        let xs: Vec<Elem> = head
            .iter()
            .map(|(_, (&p, _))| self.eval_points[p])
            .collect();
        let ys: Vec<Elem> = head.iter().map(|(_, (_, &v))| v).collect();

        // master(x) = prod_j (x - x_j), coefficients low to high
        let mut master = vec![1 as Elem];
        for &xj in &xs {
            let mut next = vec![0 as Elem; master.len() + 1];
            for (k, &c) in master.iter().enumerate() {
                next[k + 1] = f.add(next[k + 1], c);
                next[k] = f.add(next[k], f.mul(c, xj));
            }
            master = next;
        }

        let d = self.dim;
        let mut coeffs = vec![0 as Elem; d];
        let mut quotient = vec![0 as Elem; d];
        for (&xj, &yj) in xs.iter().zip(&ys) {
            if yj == 0 {
                continue;
            }
            // master / (x - xj) by synthetic division
            quotient[d - 1] = master[d];
            for k in (1..d).rev() {
                quotient[k - 1] = f.add(master[k], f.mul(xj, quotient[k]));
            }
            let denom = f.eval_poly(&quotient, xj);
            let scale = f.div(yj, denom)?;
            for (c, &qk) in coeffs.iter_mut().zip(&quotient) {
                *c = f.add(*c, f.mul(scale, qk));
            }
        }

        for (_, (&pos, &val)) in tail {
            if f.eval_poly(&coeffs, self.eval_points[pos]) != val {
                return Err(Error::Inconsistent { position: pos });
            }
        }
        Ok(coeffs)
    }

    /// The `len x dim` Vandermonde generator: row `i` is `(1, a_i, a_i^2, ...)`.
    pub fn generator_matrix(&self) -> Vec<Vec<Elem>> {
        self.eval_points
            .iter()
            .map(|&a| (0..self.dim).map(|j| self.field.pow(a, j as u64)).collect())
            .collect()
    }

    fn check_symbols(&self, mut symbols: impl Iterator<Item = Elem>) -> Result<()> {
        match symbols.find(|&s| !self.field.contains(s)) {
            Some(s) => Err(Error::InvalidCode(format!(
                "symbol {s} outside GF({})",
                self.field.q()
            ))),
            None => Ok(()),
        }
    }
}
