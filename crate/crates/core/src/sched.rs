//! Randomized unmasking schedules.
//!
//! A schedule `pi(K, I)` reveals the index set `I` in exactly `K` steps. The
//! first step draws a batch size `l` from `w_l(K, |I|) / Psi(K, |I|)`, reveals
//! a uniformly random `l`-subset, and recurses on what is left with `K - 1`
//! steps. The weights come from a coefficient `f(K, L')` filled in by a
//! dynamic program over `1 <= K <= K_max`, `K <= L' <= L`:
//!
//! * TC-adaptive: `f(1, 1) = 0`, `f(1, L') = 1`; consecutive weights have
//!   ratio `(L'-l) f(K-1, L'-l) / (1 + (L'-l-2) f(K-1, L'-l-1))` and
//!   `f(K, L') = 1 - (1 + (L'-2) f(K-1, L'-1)) / Psi(K, L')`.
//! * DTC-adaptive: `f(1, L') = (L'-1) / (L-L'+1)`; ratio
//!   `(L-L'+l) f(K-1, L'-l) / (1 + (L-L'+l+2) f(K-1, L'-l-1))` and
//!   `f(K, L') = -1 + (1 + (L-L'+2) f(K-1, L'-1)) / Psi(K, L')`.
//!   The table depends on the ambient length `L`.
//!
//! The ratio between `w_{l+1}(K, L')` and `w_l(K, L')` only depends on
//! `m = L' - l + 1`, so `Psi(K, L') = 1 + r(K, L') Psi(K, L' - 1)` with
//! `Psi(K, K) = 1`, which makes the whole table `O(K_max L)`.
//! All weight arithmetic is done on logarithms.
//!
//! ```
//! use unmask::sched::{CoeffTable, SchemeKind};
//!
//! let table = CoeffTable::build(SchemeKind::TcAdaptive, 3, 2).unwrap();
//! assert!((table.f(2, 3) - 1.0 / 3.0).abs() < 1e-15);
//! let pmf = table.batch_size_pmf(2, 3).unwrap();
//! assert!((pmf[0] - 1.0 / 3.0).abs() < 1e-15 && (pmf[1] - 2.0 / 3.0).abs() < 1e-15);
//! ```

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Coefficients in `(-NEG_CLAMP, 0)` are rounding noise and snap to zero.
pub const NEG_CLAMP: f64 = 1e-12;

/// The generator used for every randomized routine.
pub type SchedRng = ChaCha8Rng;

/// A generator for one independent stream (trial) under a run seed.
///
/// Identical `(seed, stream)` pairs give identical draws on every platform.
pub fn stream_rng(seed: u64, stream: u64) -> SchedRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    TcAdaptive,
    DtcAdaptive,
    /// `ceil(L / K)` uniformly chosen positions per step. Has no table.
    FixedUniform,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::TcAdaptive => "tc",
            SchemeKind::DtcAdaptive => "dtc",
            SchemeKind::FixedUniform => "fixed",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "tc" => Ok(SchemeKind::TcAdaptive),
            "dtc" => Ok(SchemeKind::DtcAdaptive),
            "fixed" | "fixed-uniform" => Ok(SchemeKind::FixedUniform),
            other => Err(format!(
                "unknown scheme `{other}` (expected tc, dtc or fixed)"
            )),
        }
    }
}

/// `H_n = 1 + 1/2 + ... + 1/n`, with `H_0 = 0`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// `[H_0, H_1, ..., H_n]`.
pub fn harmonic_table(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..=n {
        acc += 1.0 / i as f64;
        out.push(acc);
    }
    out
}

/// Upper bound on `f_tc(K, L')` for `K >= 2`:
/// `(H_{L'-K+1} - 1) / (K + H_{L'-K+1} - 2)`.
pub fn tc_coeff_bound(k: usize, len: usize) -> f64 {
    tc_bound_with(k, len, &harmonic_table(len))
}

fn tc_bound_with(k: usize, len: usize, h: &[f64]) -> f64 {
    let hn = h[len - k + 1];
    (hn - 1.0) / (k as f64 + hn - 2.0)
}

/// Upper bound on `f_dtc(K, L')` for `K >= 2` in ambient length `L`:
/// `p / (L - p)` with `p = min(L' - K, (L/K)(H_{L-1} - H_{L-L'}))`.
pub fn dtc_coeff_bound(k: usize, len: usize, ambient: usize) -> f64 {
    dtc_bound_with(k, len, ambient, &harmonic_table(ambient))
}

fn dtc_bound_with(k: usize, len: usize, ambient: usize, h: &[f64]) -> f64 {
    let l = ambient as f64;
    let p = ((len - k) as f64).min(l / k as f64 * (h[ambient - 1] - h[ambient - len]));
    p / (l - p)
}

/// The closed-form rate `H_{L-1} / (K - H_{L-1})` for the DTC scheme, valid
/// when `K > H_{L-1}`.
pub fn dtc_rate_bound(k: usize, ambient: usize) -> Option<f64> {
    let h = harmonic(ambient - 1);
    (k as f64 > h).then(|| h / (k as f64 - h))
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Precomputed `f(K, L')`, `ln Psi(K, L')` and log weight ratios for one
/// adaptive scheme.
///
/// Immutable once built, so it can be shared freely across threads.
#[derive(Clone, Debug)]
pub struct CoeffTable {
    kind: SchemeKind,
    ambient_len: usize,
    k_max: usize,
    // Row K holds L' = K..=ambient_len and starts at offsets[K - 1].
    offsets: Vec<usize>,
    f: Vec<f64>,
    log_psi: Vec<f64>,
    // ln of w_{l+1}/w_l at level K for remaining length m = L' - l + 1;
    // stored at (K, m) for m > K.
    log_ratio: Vec<f64>,
    // exp(log_ratio), so the sampler's inner loop is a multiply
    ratio: Vec<f64>,
}

impl CoeffTable {
    pub fn build(kind: SchemeKind, ambient_len: usize, k_max: usize) -> Result<Self> {
        if kind == SchemeKind::FixedUniform {
            return Err(Error::Infeasible(
                "the fixed-size scheme has no coefficient table".into(),
            ));
        }
        if ambient_len == 0 || k_max == 0 || k_max > ambient_len {
            return Err(Error::Infeasible(format!(
                "need 1 <= K_max <= L, got K_max = {k_max}, L = {ambient_len}"
            )));
        }
        let mut offsets = Vec::with_capacity(k_max);
        let mut cells = 0;
        for k in 1..=k_max {
            offsets.push(cells);
            cells += ambient_len - k + 1;
        }
        let mut table = Self {
            kind,
            ambient_len,
            k_max,
            offsets,
            f: vec![0.0; cells],
            log_psi: vec![0.0; cells],
            log_ratio: vec![f64::NEG_INFINITY; cells],
            ratio: Vec::new(),
        };
        table.fill()?;
        table.ratio = table.log_ratio.iter().map(|lr| lr.exp()).collect();
        Ok(table)
    }

    #[inline]
    fn idx(&self, k: usize, len: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.k_max && len >= k && len <= self.ambient_len);
        self.offsets[k - 1] + (len - k)
    }

    fn fill(&mut self) -> Result<()> {
        let big_l = self.ambient_len;
        let lf = big_l as f64;
        for len in 1..=big_l {
            let i = self.idx(1, len);
            self.f[i] = match self.kind {
                SchemeKind::TcAdaptive => {
                    if len == 1 {
                        0.0
                    } else {
                        1.0
                    }
                }
                _ => (len - 1) as f64 / (big_l - len + 1) as f64,
            };
        }
        for k in 2..=self.k_max {
            for len in k..=big_l {
                let prev_f = |s: &Self, l: usize| s.f[s.idx(k - 1, l)];
                let i = self.idx(k, len);
                let log_psi = if len == k {
                    0.0
                } else {
                    let m = len;
                    let (num, den) = match self.kind {
                        SchemeKind::TcAdaptive => (
                            (m - 1) as f64 * prev_f(self, m - 1),
                            1.0 + (m - 3) as f64 * prev_f(self, m - 2),
                        ),
                        _ => (
                            (big_l - m + 1) as f64 * prev_f(self, m - 1),
                            1.0 + (big_l - m + 3) as f64 * prev_f(self, m - 2),
                        ),
                    };
                    let lr = num.ln() - den.ln();
                    self.log_ratio[i] = lr;
                    log_add_exp(0.0, lr + self.log_psi[i - 1])
                };
                self.log_psi[i] = log_psi;
                let f = match self.kind {
                    SchemeKind::TcAdaptive => {
                        let a = 1.0 + (len - 2) as f64 * prev_f(self, len - 1);
                        1.0 - (a.ln() - log_psi).exp()
                    }
                    _ => {
                        let a = 1.0 + (lf - len as f64 + 2.0) * prev_f(self, len - 1);
                        (a.ln() - log_psi).exp() - 1.0
                    }
                };
                self.f[i] = if f >= 0.0 {
                    f
                } else if f > -NEG_CLAMP {
                    0.0
                } else {
                    return Err(Error::NegativeCoefficient { k, len, value: f });
                };
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn ambient_len(&self) -> usize {
        self.ambient_len
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of `(K, L')` cells.
    pub fn cells(&self) -> usize {
        self.f.len()
    }

    /// `f(K, L')`. Panics outside `1 <= K <= K_max`, `K <= L' <= L`.
    pub fn f(&self, k: usize, len: usize) -> f64 {
        self.check(k, len).expect("coefficient index out of range");
        self.f[self.idx(k, len)]
    }

    /// `ln Psi(K, L')`; zero on the `K = 1` row where no weights exist.
    pub fn log_psi(&self, k: usize, len: usize) -> f64 {
        self.check(k, len).expect("coefficient index out of range");
        self.log_psi[self.idx(k, len)]
    }

    /// Overwrites one coefficient. Only for negative-control tests.
    #[doc(hidden)]
    pub fn corrupt(&mut self, k: usize, len: usize, value: f64) {
        let i = self.idx(k, len);
        self.f[i] = value;
    }

    fn check(&self, k: usize, len: usize) -> Result<()> {
        if k == 0 || k > self.k_max || len < k || len > self.ambient_len {
            return Err(Error::Infeasible(format!(
                "(K, L') = ({k}, {len}) outside the table (K_max = {}, L = {})",
                self.k_max, self.ambient_len
            )));
        }
        Ok(())
    }

    /// `P{|S| = l}` for `l = 1..=L'-K+1`.
    pub fn batch_size_pmf(&self, k: usize, len: usize) -> Result<Vec<f64>> {
        self.check(k, len)?;
        if k == 1 {
            let mut pmf = vec![0.0; len];
            pmf[len - 1] = 1.0;
            return Ok(pmf);
        }
        let support = len - k + 1;
        let base = self.idx(k, len);
        let mut log_p = -self.log_psi[base];
        let mut pmf = Vec::with_capacity(support);
        pmf.push(log_p.exp());
        for l in 1..support {
            // ratio for m = len - l + 1 sits at base - (l - 1)
            log_p += self.log_ratio[base - (l - 1)];
            pmf.push(log_p.exp());
        }
        Ok(pmf)
    }

    /// Draws a first-step batch size by inverse transform, walking the
    /// weight ratios from `l = 1` until the running mass reaches `u`.
    ///
    /// Costs `O(l)`. Ties go to the smaller size; mass lost to rounding is
    /// absorbed by the largest size.
    pub fn sample_batch_size<R: Rng + ?Sized>(
        &self,
        k: usize,
        len: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check(k, len)?;
        Ok(self.sample_batch_size_unchecked(k, len, rng))
    }

    fn sample_batch_size_unchecked<R: Rng + ?Sized>(
        &self,
        k: usize,
        len: usize,
        rng: &mut R,
    ) -> usize {
        if k == 1 {
            return len;
        }
        let support = len - k + 1;
        if support == 1 {
            return 1;
        }
        let u: f64 = rng.sample(Open01);
        let base = self.idx(k, len);
        let mut p = (-self.log_psi[base]).exp();
        let mut cum = p;
        let mut l = 1;
        while cum < u && l < support {
            p *= self.ratio[base - (l - 1)];
            cum += p;
            l += 1;
        }
        l
    }

    /// The batch sizes of one draw of `pi(K, I)` with `|I| = len`, without
    /// choosing positions. `O(K + len)`.
    pub fn sample_sizes<R: Rng + ?Sized>(
        &self,
        k: usize,
        len: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        self.check(k, len)?;
        let mut sizes = Vec::with_capacity(k);
        let mut remaining = len;
        for steps_left in (1..=k).rev() {
            let l = self.sample_batch_size_unchecked(steps_left, remaining, rng);
            sizes.push(l);
            remaining -= l;
        }
        Ok(sizes)
    }
}

/// An ordered partition of the target positions into nonempty steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScheduleRealization {
    target: Vec<usize>,
    steps: Vec<Vec<usize>>,
}

impl ScheduleRealization {
    /// Validates that `steps` partition `target` into nonempty sets.
    pub fn new(target: Vec<usize>, steps: Vec<Vec<usize>>) -> Result<Self> {
        let mut target = target;
        target.sort_unstable();
        if target.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Arity("target repeats a position".into()));
        }
        if steps.iter().any(Vec::is_empty) {
            return Err(Error::Arity("empty unmasking step".into()));
        }
        let mut covered: Vec<usize> = steps.iter().flatten().copied().collect();
        covered.sort_unstable();
        if covered != target {
            return Err(Error::Arity("steps do not partition the target set".into()));
        }
        Ok(Self { target, steps })
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn steps(&self) -> &[Vec<usize>] {
        &self.steps
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.steps.iter().map(Vec::len).collect()
    }

    /// Positions revealed before step `k` (zero-based), i.e. the union of
    /// steps `0..k`.
    pub fn revealed_before(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.steps[..k].iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }
}

/// Moves a uniform `count`-subset of `pool` to its front (partial
/// Fisher-Yates). `O(count)`.
fn choose_front<R: Rng + ?Sized>(pool: &mut [usize], count: usize, rng: &mut R) {
    for j in 0..count {
        let pick = rng.random_range(j..pool.len());
        pool.swap(j, pick);
    }
}

/// A uniformly random `size`-subset of `index_set`.
pub fn sample_subset<R: Rng + ?Sized>(
    index_set: &[usize],
    size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if size == 0 || size > index_set.len() {
        return Err(Error::Infeasible(format!(
            "cannot draw {size} of {} positions",
            index_set.len()
        )));
    }
    let mut pool = index_set.to_vec();
    choose_front(&mut pool, size, rng);
    pool.truncate(size);
    Ok(pool)
}

/// One draw of `pi(K, I)`.
///
/// For the DTC scheme the table must have been built for the global
/// sequence length, even when `I` is a strict subset.
pub fn sample_schedule<R: Rng + ?Sized>(
    table: &CoeffTable,
    k: usize,
    index_set: &[usize],
    rng: &mut R,
) -> Result<ScheduleRealization> {
    table.check(k, index_set.len())?;
    let mut pool = index_set.to_vec();
    let mut steps = Vec::with_capacity(k);
    let mut start = 0;
    for steps_left in (1..=k).rev() {
        let remaining = pool.len() - start;
        let l = table.sample_batch_size_unchecked(steps_left, remaining, rng);
        choose_front(&mut pool[start..], l, rng);
        steps.push(pool[start..start + l].to_vec());
        start += l;
    }
    ScheduleRealization::new(index_set.to_vec(), steps)
}

/// Step sizes of the fixed-size baseline: `ceil(L/K)` per step until the
/// positions run out (possibly in fewer than `K` steps).
pub fn fixed_uniform_sizes(k: usize, len: usize) -> Result<Vec<usize>> {
    if k == 0 || k > len {
        return Err(Error::Infeasible(format!(
            "need 1 <= K <= L, got K = {k}, L = {len}"
        )));
    }
    let chunk = len.div_ceil(k);
    let mut sizes = Vec::with_capacity(k);
    let mut remaining = len;
    while remaining > 0 {
        let l = chunk.min(remaining);
        sizes.push(l);
        remaining -= l;
    }
    Ok(sizes)
}

/// The fixed-size baseline on positions `0..len`.
pub fn fixed_uniform_schedule<R: Rng + ?Sized>(
    k: usize,
    len: usize,
    rng: &mut R,
) -> Result<ScheduleRealization> {
    let sizes = fixed_uniform_sizes(k, len)?;
    let mut pool: Vec<usize> = (0..len).collect();
    let mut steps = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for l in sizes {
        choose_front(&mut pool[start..], l, rng);
        steps.push(pool[start..start + l].to_vec());
        start += l;
    }
    ScheduleRealization::new((0..len).collect(), steps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub mean: f64,
    /// Sample standard deviation across trials.
    pub std: f64,
}

/// Monte Carlo mean and spread of `|S^(k)|` for each step `k` of
/// `pi(K, [len])`. Trial `t` draws from `stream_rng(seed, t)`.
pub fn mean_batch_size_profile(
    table: &CoeffTable,
    k: usize,
    len: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<StepStats>> {
    table.check(k, len)?;
    if trials == 0 {
        return Err(Error::Infeasible("need at least one trial".into()));
    }
    const CHUNK: usize = 256;
    let chunks: Vec<(Vec<u64>, Vec<u64>)> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0u64; k];
            let mut sum_sq = vec![0u64; k];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = stream_rng(seed, t as u64);
                let sizes = table
                    .sample_sizes(k, len, &mut rng)
                    .expect("range checked above");
                for (j, &l) in sizes.iter().enumerate() {
                    sum[j] += l as u64;
                    sum_sq[j] += (l * l) as u64;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    // integer sums, so the reduction order cannot change the result
    let mut sum = vec![0u64; k];
    let mut sum_sq = vec![0u64; k];
    for (s, sq) in chunks {
        sum.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        sum_sq.iter_mut().zip(sq).for_each(|(a, b)| *a += b);
    }
    let n = trials as f64;
    Ok(sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &sq)| {
            let mean = s as f64 / n;
            let var = if trials > 1 {
                ((sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            StepStats {
                mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// Worst-case comparison of a table against the harmonic-number bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub cells_checked: usize,
    /// `max (f - bound) / bound` over `K >= 2` cells with a positive bound,
    /// and `max (f - bound)` where the bound is zero. Negative means slack.
    pub worst_excess: f64,
    pub worst_cell: (usize, usize),
    /// `max |f(K, K)|`.
    pub max_diagonal: f64,
    pub min_f: f64,
}

impl BoundReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.worst_excess <= rel_tol && self.max_diagonal <= 1e-12 && self.min_f >= 0.0
    }
}

pub fn verify_coeff_bounds(table: &CoeffTable) -> BoundReport {
    let big_l = table.ambient_len;
    let h = harmonic_table(big_l);
    let mut report = BoundReport {
        cells_checked: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_cell: (0, 0),
        max_diagonal: 0.0,
        min_f: f64::INFINITY,
    };
    for k in 1..=table.k_max {
        for len in k..=big_l {
            let f = table.f[table.idx(k, len)];
            report.cells_checked += 1;
            report.min_f = report.min_f.min(f);
            if len == k {
                report.max_diagonal = report.max_diagonal.max(f.abs());
            }
            if k < 2 {
                continue;
            }
            let bound = match table.kind {
                SchemeKind::TcAdaptive => tc_bound_with(k, len, &h),
                _ => dtc_bound_with(k, len, big_l, &h),
            };
            let excess = if bound > 0.0 {
                (f - bound) / bound
            } else {
                f - bound
            };
            if excess > report.worst_excess {
                report.worst_excess = excess;
                report.worst_cell = (k, len);
            }
        }
    }
    report
}

/// Writes `kind,L,K,Lprime,f,log_psi` rows for every cell.
pub fn write_table_csv<W: Write>(table: &CoeffTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "L", "K", "Lprime", "f", "log_psi"])?;
    let kind = table.kind.as_str();
    let big_l = table.ambient_len.to_string();
    for k in 1..=table.k_max {
        let ks = k.to_string();
        for len in k..=table.ambient_len {
            let i = table.idx(k, len);
            w.write_record([
                kind,
                &big_l,
                &ks,
                &len.to_string(),
                &table.f[i].to_string(),
                &table.log_psi[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
