//! Exhaustive ground truth for small instances.
//!
//! Given a [`TabularDist`] and a mask predictor, the oracle enumerates every
//! realization of a schedule with its probability and evaluates the exact
//! KL between the data law and the law produced by the sampler. It also
//! evaluates the prediction error `eps_train` of an imperfect predictor,
//! which is exactly the gap between the KL with that predictor and the KL
//! with the true conditionals.
//!
//! ```
//! use unmask::info::TabularDist;
//! use unmask::oracle::{expected_kl, MaskPredictor};
//! use unmask::sched::{CoeffTable, SchemeKind};
//!
//! let p = TabularDist::parity(4, 2).unwrap();
//! let exact = MaskPredictor::exact(p.clone());
//! let kl = expected_kl(&p, SchemeKind::TcAdaptive, 2, &exact).unwrap();
//! let f = CoeffTable::build(SchemeKind::TcAdaptive, 4, 2).unwrap().f(2, 4);
//! assert!((kl - f * p.total_correlation()).abs() < 1e-12);
//! ```

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::info::{Assignment, TabularDist};
use crate::sched::{fixed_uniform_sizes, stream_rng, CoeffTable, ScheduleRealization, SchemeKind};

/// Default bound on the number of schedule realizations an enumeration may
/// visit.
pub const DEFAULT_REALIZATION_CAP: u128 = 10_000_000;

/// Bound on the number of stored predictor probabilities.
pub const MAX_PREDICTOR_ENTRIES: usize = 1 << 24;

/// Default probability floor of [`MaskPredictor::Perturbed`].
pub const DEFAULT_FLOOR: f64 = 1e-9;

/// Per-position conditional predictions `p_i(. | x_U)`.
#[derive(Clone, Debug)]
pub enum MaskPredictor {
    /// The true conditionals of `source`. At a zero-probability context the
    /// prediction is uniform.
    Exact { source: TabularDist },
    /// True conditionals times `exp(noise_scale * g)` with `g ~ N(0, 1)`
    /// drawn per entry from `(seed, position, context)`, floored at `floor`
    /// and renormalized.
    Perturbed {
        source: TabularDist,
        noise_scale: f64,
        floor: f64,
        seed: u64,
    },
}

impl MaskPredictor {
    pub fn exact(source: TabularDist) -> Self {
        MaskPredictor::Exact { source }
    }

    pub fn perturbed(source: TabularDist, noise_scale: f64, seed: u64) -> Self {
        MaskPredictor::Perturbed {
            source,
            noise_scale,
            floor: DEFAULT_FLOOR,
            seed,
        }
    }

    pub fn source(&self) -> &TabularDist {
        match self {
            MaskPredictor::Exact { source } | MaskPredictor::Perturbed { source, .. } => source,
        }
    }

    /// Predicted law of `X_i` given the revealed values `ctx`.
    pub fn query(&self, i: usize, ctx: &Assignment) -> Result<Vec<f64>> {
        let source = self.source();
        let q = source.q();
        if ctx.get(i).is_some() {
            return Err(Error::Arity(format!("position {i} is already revealed")));
        }
        let mut row = match source.conditional(&[i], ctx) {
            Ok(d) => d.probs().to_vec(),
            Err(Error::ZeroContext) => vec![1.0 / q as f64; q],
            Err(e) => return Err(e),
        };
        if let MaskPredictor::Perturbed { .. } = self {
            let mask = ctx.positions().iter().fold(0u64, |m, &p| m | 1 << p);
            let c = ctx
                .values()
                .iter()
                .rev()
                .fold(0usize, |acc, &v| acc * q + v);
            self.perturb(&mut row, i, mask, c);
        }
        Ok(row)
    }

    fn perturb(&self, row: &mut [f64], i: usize, mask: u64, c: usize) {
        let MaskPredictor::Perturbed {
            noise_scale,
            floor,
            seed,
            ..
        } = self
        else {
            return;
        };
        let key = (mask << 40) | ((c as u64) << 8) | i as u64;
        let mut rng = stream_rng(*seed, key);
        for v in row.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = (*v * (noise_scale * g).exp()).max(*floor);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
}

/// Every prediction a predictor can be asked for, laid out by context mask.
#[derive(Clone, Debug)]
struct PredictorRows {
    q: usize,
    len: usize,
    // block for mask U starts at offsets[U]; inside it,
    // ((c * len) + i) * q + a with c the mixed-radix value of x_U
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl PredictorRows {
    fn build(pred: &MaskPredictor) -> Result<Self> {
        let source = pred.source();
        let (q, len) = (source.q(), source.len());
        if len > 24 {
            return Err(Error::Capacity {
                what: "predictor positions",
                needed: len as u128,
                cap: 24,
            });
        }
        let masks = 1usize << len;
        let mut offsets = Vec::with_capacity(masks);
        let mut total = 0usize;
        for mask in 0..masks {
            offsets.push(total);
            total =
                total.saturating_add(q.saturating_pow(mask.count_ones()).saturating_mul(len * q));
        }
        if total > MAX_PREDICTOR_ENTRIES {
            return Err(Error::Capacity {
                what: "predictor table entries",
                needed: total as u128,
                cap: MAX_PREDICTOR_ENTRIES as u128,
            });
        }
        let mut rows = Self {
            q,
            len,
            offsets,
            data: vec![0.0; total],
        };
        let mut x = vec![0; len];
        for (idx, &p) in source.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            x.copy_from_slice(&source.outcome(idx));
            for mask in 0..masks {
                let c = rows.context_index(mask, &x);
                for (i, &xi) in x.iter().enumerate() {
                    if mask & (1 << i) == 0 {
                        let at = rows.at(mask, c, i) + xi;
                        rows.data[at] += p;
                    }
                }
            }
        }
        for mask in 0..masks {
            for c in 0..q.pow(mask.count_ones()) {
                for i in (0..len).filter(|i| mask & (1 << i) == 0) {
                    let at = rows.at(mask, c, i);
                    let row = &mut rows.data[at..at + q];
                    let s: f64 = row.iter().sum();
                    if s > 0.0 {
                        row.iter_mut().for_each(|v| *v /= s);
                    } else {
                        row.fill(1.0 / q as f64);
                    }
                    pred.perturb(row, i, mask as u64, c);
                }
            }
        }
        Ok(rows)
    }

    #[inline]
    fn context_index(&self, mask: usize, x: &[usize]) -> usize {
        let mut c = 0;
        let mut stride = 1;
        for (p, &v) in x.iter().enumerate() {
            if mask & (1 << p) != 0 {
                c += v * stride;
                stride *= self.q;
            }
        }
        c
    }

    #[inline]
    fn at(&self, mask: usize, c: usize, i: usize) -> usize {
        self.offsets[mask] + (c * self.len + i) * self.q
    }

    #[inline]
    fn prob(&self, mask: usize, x: &[usize], i: usize) -> f64 {
        self.data[self.at(mask, self.context_index(mask, x), i) + x[i]]
    }
}

/// `KL(p || r)` in nats, `+inf` when `r` misses part of the support of `p`.
pub fn kl(p: &TabularDist, r: &TabularDist) -> Result<f64> {
    if p.q() != r.q() || p.len() != r.len() {
        return Err(Error::Arity(format!(
            "KL between shapes ({}, {}) and ({}, {})",
            p.q(),
            p.len(),
            r.q(),
            r.len()
        )));
    }
    let mut acc = 0.0;
    for (&a, &b) in p.probs().iter().zip(r.probs()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).ln();
    }
    Ok(acc.max(0.0))
}

/// KL between `p(x_S | ctx)` and the product of its one-position
/// conditionals, i.e. the error of revealing `S` in one parallel step with
/// the true conditionals.
pub fn single_batch_kl(dist: &TabularDist, ctx: &Assignment, s: &[usize]) -> Result<f64> {
    let joint = dist.conditional(s, ctx)?;
    let marginals: Vec<Vec<f64>> = (0..s.len())
        .map(|j| joint.marginal(&[j]).map(|m| m.probs().to_vec()))
        .collect::<Result<_>>()?;
    let product = TabularDist::product(dist.q(), &marginals)?;
    kl(&joint, &product)
}

/// The law of one schedule, used to drive enumeration.
#[derive(Clone, Copy, Debug)]
pub enum SchemeLaw<'a> {
    Adaptive(&'a CoeffTable),
    FixedUniform,
}

impl<'a> SchemeLaw<'a> {
    fn sizes(
        &self,
        k: usize,
        n: usize,
        fixed: Option<&[usize]>,
        depth: usize,
    ) -> Result<Vec<(usize, f64)>> {
        match (self, fixed) {
            (_, Some(sizes)) => Ok(vec![(sizes[depth], 1.0)]),
            (SchemeLaw::Adaptive(t), None) => Ok(t
                .batch_size_pmf(k, n)?
                .into_iter()
                .enumerate()
                .filter(|(_, p)| *p > 0.0)
                .map(|(j, p)| (j + 1, p))
                .collect()),
            (SchemeLaw::FixedUniform, None) => unreachable!("fixed sizes are precomputed"),
        }
    }
}

/// The coefficient table a scheme needs for `K` steps on `ambient` positions.
pub fn table_for(kind: SchemeKind, ambient: usize, k: usize) -> Result<Option<CoeffTable>> {
    match kind {
        SchemeKind::FixedUniform => Ok(None),
        _ => CoeffTable::build(kind, ambient, k).map(Some),
    }
}

fn law_of(table: &Option<CoeffTable>) -> SchemeLaw<'_> {
    table
        .as_ref()
        .map_or(SchemeLaw::FixedUniform, SchemeLaw::Adaptive)
}

fn binom(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| {
        acc.saturating_mul((n - j) as u128) / (j as u128 + 1)
    })
}

type SplitVisitor<'f> = dyn FnMut(&[usize], &[usize]) -> Result<()> + 'f;
type RealizationVisitor<'f> = dyn FnMut(&[Vec<usize>], f64) -> Result<()> + 'f;

/// Calls `f(chosen, rest)` for every `k`-subset of `items`, lexicographically.
fn for_each_combination(items: &[usize], k: usize, f: &mut SplitVisitor<'_>) -> Result<()> {
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut chosen = Vec::with_capacity(k);
    let mut rest = Vec::with_capacity(n - k);
    loop {
        chosen.clear();
        rest.clear();
        let mut j = 0;
        for (pos, &item) in items.iter().enumerate() {
            if j < k && idx[j] == pos {
                chosen.push(item);
                j += 1;
            } else {
                rest.push(item);
            }
        }
        f(&chosen, &rest)?;
        // rightmost index that can still move
        let mut t = k;
        while t > 0 && idx[t - 1] == n - k + t - 1 {
            t -= 1;
        }
        if t == 0 {
            return Ok(());
        }
        idx[t - 1] += 1;
        for u in t..k {
            idx[u] = idx[u - 1] + 1;
        }
    }
}

struct Enumerator<'a> {
    law: SchemeLaw<'a>,
    fixed: Option<Vec<usize>>,
}

impl<'a> Enumerator<'a> {
    fn new(law: SchemeLaw<'a>, k: usize, index_set: &[usize]) -> Result<Self> {
        let n = index_set.len();
        if k == 0 || k > n {
            return Err(Error::Infeasible(format!(
                "cannot reveal {n} positions in {k} steps"
            )));
        }
        let fixed = match law {
            SchemeLaw::FixedUniform => Some(fixed_uniform_sizes(k, n)?),
            SchemeLaw::Adaptive(_) => None,
        };
        Ok(Self { law, fixed })
    }

    fn count(&self, k: usize, n: usize, depth: usize) -> Result<u128> {
        if let Some(sizes) = &self.fixed {
            let mut rem = n;
            return Ok(sizes[depth..].iter().fold(1u128, |acc, &l| {
                let c = binom(rem, l);
                rem -= l;
                acc.saturating_mul(c)
            }));
        }
        if k == 1 {
            return Ok(1);
        }
        let mut total = 0u128;
        for (l, _) in self.law.sizes(k, n, None, depth)? {
            total = total.saturating_add(binom(n, l).saturating_mul(self.count(
                k - 1,
                n - l,
                depth + 1,
            )?));
        }
        Ok(total)
    }

    fn check_cap(&self, k: usize, n: usize, cap: u128) -> Result<()> {
        let needed = self.count(k, n, 0)?;
        if needed > cap {
            return Err(Error::Capacity {
                what: "schedule realizations",
                needed,
                cap,
            });
        }
        Ok(())
    }

    fn visit(
        &self,
        k: usize,
        remaining: &[usize],
        depth: usize,
        prob: f64,
        steps: &mut Vec<Vec<usize>>,
        f: &mut RealizationVisitor<'_>,
    ) -> Result<()> {
        if remaining.is_empty() {
            return f(steps, prob);
        }
        for (l, p) in self
            .law
            .sizes(k, remaining.len(), self.fixed.as_deref(), depth)?
        {
            let each = prob * p / binom(remaining.len(), l) as f64;
            for_each_combination(remaining, l, &mut |chosen, rest| {
                steps.push(chosen.to_vec());
                let r = self.visit(k.saturating_sub(1), rest, depth + 1, each, steps, f);
                steps.pop();
                r
            })?;
        }
        Ok(())
    }
}

fn for_each_realization(
    law: SchemeLaw<'_>,
    k: usize,
    index_set: &[usize],
    cap: u128,
    f: &mut RealizationVisitor<'_>,
) -> Result<()> {
    let e = Enumerator::new(law, k, index_set)?;
    e.check_cap(k, index_set.len(), cap)?;
    e.visit(k, index_set, 0, 1.0, &mut Vec::with_capacity(k), f)
}

/// Every realization of a schedule on `index_set` with its probability.
///
/// Realizations are produced in the order of the generative description
/// (size, then subset, then the rest) and are not deduplicated.
pub fn enumerate_schedule_law(
    law: SchemeLaw<'_>,
    k: usize,
    index_set: &[usize],
    cap: u128,
) -> Result<Vec<(ScheduleRealization, f64)>> {
    let mut out = Vec::new();
    for_each_realization(law, k, index_set, cap, &mut |steps, p| {
        out.push((
            ScheduleRealization::new(index_set.to_vec(), steps.to_vec())?,
            p,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// The three sides of the one-step decomposition of the expected KL.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionParts {
    pub total: f64,
    pub first_batch: f64,
    pub remainder: f64,
}

impl RecursionParts {
    pub fn residual(&self) -> f64 {
        (self.total - self.first_batch - self.remainder).abs()
    }
}

/// Exact evaluation of schedules against one data law and one predictor.
///
/// Building it tabulates every prediction once; all queries are then pure
/// lookups.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    dist: &'a TabularDist,
    exact: PredictorRows,
    pred: PredictorRows,
    cap: u128,
}

impl<'a> Evaluator<'a> {
    pub fn new(dist: &'a TabularDist, pred: &MaskPredictor) -> Result<Self> {
        let src = pred.source();
        if src.q() != dist.q() || src.len() != dist.len() {
            return Err(Error::Arity(
                "predictor and data have different shapes".into(),
            ));
        }
        let exact = PredictorRows::build(&MaskPredictor::exact(dist.clone()))?;
        let pred = match pred {
            MaskPredictor::Exact { source } if source.probs() == dist.probs() => exact.clone(),
            _ => PredictorRows::build(pred)?,
        };
        Ok(Self {
            dist,
            exact,
            pred,
            cap: DEFAULT_REALIZATION_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn cap(&self) -> u128 {
        self.cap
    }

    /// The law of the sampler's output for one realization over all
    /// positions.
    pub fn sampled_distribution(&self, real: &ScheduleRealization) -> Result<TabularDist> {
        let len = self.dist.len();
        if real.target() != (0..len).collect::<Vec<_>>().as_slice() {
            return Err(Error::Arity("realization must cover every position".into()));
        }
        let n = self.dist.probs().len();
        let mut probs = Vec::with_capacity(n);
        for idx in 0..n {
            let x = self.dist.outcome(idx);
            probs.push(self.log_sampler(&self.pred, 0, real.steps(), &x).exp());
        }
        TabularDist::new(self.dist.q(), len, probs)
    }

    /// `ln prod_k prod_{i in S_k} rows(i | x_{U_{k-1}})`, with `U_0` = `ctx_mask`.
    fn log_sampler(
        &self,
        rows: &PredictorRows,
        ctx_mask: usize,
        steps: &[Vec<usize>],
        x: &[usize],
    ) -> f64 {
        let mut mask = ctx_mask;
        let mut acc = 0.0;
        for step in steps {
            for &i in step {
                acc += rows.prob(mask, x, i).ln();
            }
            for &i in step {
                mask |= 1 << i;
            }
        }
        acc
    }

    fn context(&self, ctx: &Assignment) -> Result<(usize, Vec<usize>, f64)> {
        let len = self.dist.len();
        let mut mask = 0usize;
        for &p in ctx.positions() {
            if p >= len {
                return Err(Error::Arity(format!("position {p} outside 0..{len}")));
            }
            mask |= 1 << p;
        }
        let mass = self.dist.context_mass(ctx);
        if mass <= 0.0 {
            return Err(Error::ZeroContext);
        }
        let free = (0..len).filter(|p| mask & (1 << p) == 0).collect();
        Ok((mask, free, mass))
    }

    /// Outcomes consistent with `ctx` and their conditional probabilities.
    fn support(&self, ctx: &Assignment, mass: f64) -> Vec<(Vec<usize>, f64)> {
        self.dist
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(idx, &p)| (self.dist.outcome(idx), p / mass))
            .filter(|(x, _)| ctx.iter().all(|(pos, v)| x[pos] == v))
            .collect()
    }

    fn kl_of(&self, support: &[(Vec<usize>, f64)], mask: usize, steps: &[Vec<usize>]) -> f64 {
        let mut acc = 0.0;
        for (x, p) in support {
            let lq = self.log_sampler(&self.pred, mask, steps, x);
            if lq == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            acc += p * (p.ln() - lq);
        }
        acc
    }

    /// `E_S KL(p(x_I | ctx) || sampler)` with `I` the positions outside
    /// `ctx` and `S ~ law(K, I)`.
    pub fn expected_kl_conditional(
        &self,
        law: SchemeLaw<'_>,
        k: usize,
        ctx: &Assignment,
    ) -> Result<f64> {
        let (mask, free, mass) = self.context(ctx)?;
        let support = self.support(ctx, mass);
        let mut total = 0.0;
        for_each_realization(law, k, &free, self.cap, &mut |steps, prob| {
            total += prob * self.kl_of(&support, mask, steps);
            Ok(())
        })?;
        Ok(total)
    }

    pub fn expected_kl(&self, law: SchemeLaw<'_>, k: usize) -> Result<f64> {
        self.expected_kl_conditional(law, k, &Assignment::empty())
    }

    /// `eps_train` at a fixed context: the expected log-ratio between the
    /// true conditionals and the predictor, summed over every revealed
    /// position of every step.
    ///
    /// Drawing the step `tau` with `P(tau = k) = |S_k| / |I|` and weighting
    /// by `|I| / |S_k|` gives exactly this per-step sum.
    pub fn prediction_error_conditional(
        &self,
        law: SchemeLaw<'_>,
        k: usize,
        ctx: &Assignment,
    ) -> Result<f64> {
        let (mask, free, mass) = self.context(ctx)?;
        let support = self.support(ctx, mass);
        let n = free.len() as f64;
        let mut total = 0.0;
        for_each_realization(law, k, &free, self.cap, &mut |steps, prob| {
            let mut m = mask;
            for step in steps {
                let tau_weight = step.len() as f64 / n;
                let mut inner = 0.0;
                for (x, p) in &support {
                    let gap: f64 = step
                        .iter()
                        .map(|&i| self.exact.prob(m, x, i).ln() - self.pred.prob(m, x, i).ln())
                        .sum();
                    inner += p * gap;
                }
                total += prob * tau_weight * (n / step.len() as f64) * inner;
                for &i in step {
                    m |= 1 << i;
                }
            }
            Ok(())
        })?;
        Ok(total)
    }

    pub fn prediction_error(&self, law: SchemeLaw<'_>, k: usize) -> Result<f64> {
        self.prediction_error_conditional(law, k, &Assignment::empty())
    }

    /// Splits the expected KL at `ctx` into the first batch's error and the
    /// expected error of the rest of the schedule given that batch. Each part
    /// is enumerated on its own.
    pub fn recursion_check(
        &self,
        table: &CoeffTable,
        k: usize,
        ctx: &Assignment,
    ) -> Result<RecursionParts> {
        if k < 2 {
            return Err(Error::Infeasible("the decomposition needs K >= 2".into()));
        }
        let law = SchemeLaw::Adaptive(table);
        let total = self.expected_kl_conditional(law, k, ctx)?;
        let (mask, free, _) = self.context(ctx)?;
        let pmf = table.batch_size_pmf(k, free.len())?;
        let q = self.dist.q();
        let mut first_batch = 0.0;
        let mut remainder = 0.0;
        for (j, &p_l) in pmf.iter().enumerate() {
            if p_l == 0.0 {
                continue;
            }
            let l = j + 1;
            let each = p_l / binom(free.len(), l) as f64;
            for_each_combination(&free, l, &mut |chosen, _| {
                // first batch: p(x_S | ctx) against the product of predictions
                let joint = self.dist.conditional(chosen, ctx)?;
                let mut x = vec![0usize; self.dist.len()];
                for (pos, v) in ctx.iter() {
                    x[pos] = v;
                }
                let mut term = 0.0;
                let mut digits = vec![0usize; l];
                for (idx, &pj) in joint.probs().iter().enumerate() {
                    let mut r = idx;
                    for d in digits.iter_mut() {
                        *d = r % q;
                        r /= q;
                    }
                    for (&pos, &v) in chosen.iter().zip(&digits) {
                        x[pos] = v;
                    }
                    if pj == 0.0 {
                        continue;
                    }
                    let lq: f64 = chosen
                        .iter()
                        .map(|&i| self.pred.prob(mask, &x, i).ln())
                        .sum();
                    term += pj * (pj.ln() - lq);
                    // rest of the schedule given x_S
                    let next = ctx.union(&Assignment::new(
                        chosen.iter().copied().zip(digits.iter().copied()),
                    )?)?;
                    remainder += each * pj * self.expected_kl_conditional(law, k - 1, &next)?;
                }
                first_batch += each * term;
                Ok(())
            })?;
        }
        Ok(RecursionParts {
            total,
            first_batch,
            remainder,
        })
    }
}

/// `E_S KL(p || sampler)` over `S ~ pi(K, [L])`, with the scheme's table
/// built for ambient length `L = dist.len()`.
pub fn expected_kl(
    dist: &TabularDist,
    kind: SchemeKind,
    k: usize,
    pred: &MaskPredictor,
) -> Result<f64> {
    let table = table_for(kind, dist.len(), k)?;
    Evaluator::new(dist, pred)?.expected_kl(law_of(&table), k)
}

/// Conditional form of [`expected_kl`] over the positions outside `ctx`.
pub fn expected_kl_conditional(
    dist: &TabularDist,
    kind: SchemeKind,
    k: usize,
    ctx: &Assignment,
    pred: &MaskPredictor,
) -> Result<f64> {
    let table = table_for(kind, dist.len(), k)?;
    Evaluator::new(dist, pred)?.expected_kl_conditional(law_of(&table), k, ctx)
}

pub fn prediction_error(
    dist: &TabularDist,
    kind: SchemeKind,
    k: usize,
    pred: &MaskPredictor,
) -> Result<f64> {
    let table = table_for(kind, dist.len(), k)?;
    Evaluator::new(dist, pred)?.prediction_error(law_of(&table), k)
}

pub fn sampled_distribution(
    dist: &TabularDist,
    real: &ScheduleRealization,
    pred: &MaskPredictor,
) -> Result<TabularDist> {
    Evaluator::new(dist, pred)?.sampled_distribution(real)
}

/// One-step decomposition of the expected KL for an adaptive scheme.
pub fn recursion_check(
    dist: &TabularDist,
    kind: SchemeKind,
    k: usize,
    ctx: &Assignment,
    pred: &MaskPredictor,
) -> Result<RecursionParts> {
    let table = table_for(kind, dist.len(), k)?.ok_or_else(|| {
        Error::Infeasible("the fixed-size scheme does not recurse on its own law".into())
    })?;
    Evaluator::new(dist, pred)?.recursion_check(&table, k, ctx)
}
