//! The Reed-Solomon experiment.
//!
//! For the uniform law on an MDS code of dimension `d`, any `d` revealed
//! coordinates pin down the codeword and fewer than `d` leave every other
//! coordinate uniform. A step that reveals `l` positions after `r` are known
//! therefore costs `(l - (d - r)) ln q` nats when `r < d < r + l` and nothing
//! otherwise, so the KL of a schedule depends only on its size sequence.
//!
//! ```
//! use unmask::gf::{Gf2m, RsCodeSpec};
//! use unmask::rsx::{rs_schedule_kl, rs_step_kl};
//!
//! let spec = RsCodeSpec::new(Gf2m::new(2).unwrap(), 3, 2).unwrap();
//! let ln4 = 4f64.ln();
//! assert_eq!(rs_step_kl(2, 0, &spec), 0.0);
//! assert!((rs_step_kl(3, 0, &spec) - ln4).abs() < 1e-15);
//! assert!((rs_schedule_kl(&[3], &spec).unwrap() - ln4).abs() < 1e-15);
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf::{Elem, RsCodeSpec};
use crate::sched::{
    dtc_rate_bound, fixed_uniform_schedule, fixed_uniform_sizes, sample_schedule, stream_rng,
    CoeffTable, SchemeKind,
};

/// Trial count used when none is given.
pub const DEFAULT_TRIALS: usize = 100_000;

/// CSV header of [`write_records_csv`].
pub const RECORD_HEADER: [&str; 11] = [
    "scheme",
    "L",
    "K",
    "q",
    "d",
    "trials",
    "seed",
    "kl_mean_nats",
    "kl_stderr_nats",
    "kl_exact_nats",
    "theory_nats",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    /// Converts a value in nats to this base.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            LogBase::Nats => v,
            LogBase::Bits => v / std::f64::consts::LN_2,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Nats => "nats",
            LogBase::Bits => "bits",
        }
    }
}

impl FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nats" | "e" => Ok(LogBase::Nats),
            "bits" | "2" => Ok(LogBase::Bits),
            other => Err(format!(
                "unknown log base `{other}` (expected nats or bits)"
            )),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.unit())
    }
}

/// Number of `ln q` units a step of size `l` costs after `r` reveals.
#[inline]
pub fn step_excess(l: usize, r: usize, d: usize) -> usize {
    if r >= d {
        0
    } else {
        l.saturating_sub(d - r)
    }
}

/// KL contributed by revealing `l` positions in parallel after `r` are known.
pub fn rs_step_kl(l: usize, r: usize, spec: &RsCodeSpec) -> f64 {
    step_excess(l, r, spec.dim()) as f64 * (spec.q() as f64).ln()
}

fn schedule_excess(sizes: &[usize], d: usize) -> usize {
    let mut r = 0;
    let mut total = 0;
    for &l in sizes {
        total += step_excess(l, r, d);
        r += l;
    }
    total
}

/// KL of a whole schedule given its step sizes.
pub fn rs_schedule_kl(sizes: &[usize], spec: &RsCodeSpec) -> Result<f64> {
    let sum: usize = sizes.iter().sum();
    if sum != spec.len() || sizes.contains(&0) {
        return Err(Error::Arity(format!(
            "step sizes must be positive and sum to L = {}, got sum {sum}",
            spec.len()
        )));
    }
    Ok(schedule_excess(sizes, spec.dim()) as f64 * (spec.q() as f64).ln())
}

/// Monte Carlo mean and standard error of the schedule KL, drawing only the
/// step sizes. Trial `t` uses stream `t` of `seed`.
///
/// Per-trial costs are whole multiples of `ln q`, so the sums are kept as
/// exact integers and the result does not depend on the thread count.
pub fn rs_expected_kl_mc(
    table: &CoeffTable,
    k: usize,
    spec: &RsCodeSpec,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let len = spec.len();
    if table.ambient_len() != len {
        return Err(Error::Arity(format!(
            "table built for L = {}, code has L = {len}",
            table.ambient_len()
        )));
    }
    table.batch_size_pmf(k, len)?;
    if trials == 0 {
        return Err(Error::Infeasible("need at least one trial".into()));
    }
    let d = spec.dim();
    const CHUNK: usize = 1024;
    let (sum, sum_sq) = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = 0u128;
            let mut sq = 0u128;
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = stream_rng(seed, t as u64);
                let mut remaining = len;
                let mut excess = 0u128;
                for steps_left in (1..=k).rev() {
                    let l = table
                        .sample_batch_size(steps_left, remaining, &mut rng)
                        .expect("state stays inside the table");
                    excess += step_excess(l, len - remaining, d) as u128;
                    remaining -= l;
                }
                s += excess;
                sq += excess * excess;
            }
            (s, sq)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(moments(sum, sum_sq, trials, spec.q()))
}

fn moments(sum: u128, sum_sq: u128, trials: usize, q: usize) -> (f64, f64) {
    let n = trials as u128;
    let ln_q = (q as f64).ln();
    let mean = sum as f64 / trials as f64 * ln_q;
    if trials < 2 {
        return (mean, 0.0);
    }
    // n * sum_sq - sum^2 is exact in integers
    let spread = (n * sum_sq - sum * sum) as f64;
    let var = spread / (trials as f64 * (trials as f64 - 1.0));
    (mean, (var / trials as f64).sqrt() * ln_q)
}

/// Exact expected schedule KL by dynamic programming over
/// `(steps left, positions still masked)`.
///
/// Costs `O(K L^2)` in the worst case.
pub fn rs_expected_kl_exact(table: &CoeffTable, k: usize, spec: &RsCodeSpec) -> Result<f64> {
    let len = spec.len();
    if table.ambient_len() != len {
        return Err(Error::Arity(format!(
            "table built for L = {}, code has L = {len}",
            table.ambient_len()
        )));
    }
    table.batch_size_pmf(k, len)?;
    let d = spec.dim();
    // value[n] = expected excess from `n` masked positions with `j` steps left
    let mut value: Vec<f64> = (0..=len)
        .map(|n| step_excess(n, len - n, d) as f64)
        .collect();
    for j in 2..=k {
        let mut next = vec![0.0; len + 1];
        // the largest count reachable with j steps left
        let top = len - (k - j);
        for (n, slot) in next.iter_mut().enumerate().take(top + 1).skip(j) {
            let pmf = table.batch_size_pmf(j, n)?;
            *slot = pmf
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(i, p)| {
                    let l = i + 1;
                    p * (step_excess(l, len - n, d) as f64 + value[n - l])
                })
                .sum();
        }
        value = next;
    }
    Ok(value[len] * (spec.q() as f64).ln())
}

/// Draws a sequence the way the sampler would with the true conditionals.
///
/// While fewer than `d` positions are known every new token is uniform and
/// independent; afterwards tokens come from the interpolated codeword. If an
/// earlier parallel step left the revealed values off the code, the context
/// has zero probability and tokens are drawn uniformly.
pub fn rs_generate_sequence<R: Rng + ?Sized>(
    table: Option<&CoeffTable>,
    k: usize,
    spec: &RsCodeSpec,
    rng: &mut R,
) -> Result<Vec<Elem>> {
    let len = spec.len();
    let d = spec.dim();
    let q = spec.q();
    let real = match table {
        Some(t) => sample_schedule(t, k, &(0..len).collect::<Vec<_>>(), rng)?,
        None => fixed_uniform_schedule(k, len, rng)?,
    };
    let mut out: Vec<Elem> = vec![0; len];
    let mut known = BTreeMap::new();
    let mut codeword: Option<Vec<Elem>> = None;
    let mut off_code = false;
    for step in real.steps() {
        if codeword.is_none() && !off_code && known.len() >= d {
            match spec.interpolate(&known) {
                Ok(coeffs) => codeword = Some(spec.encode(&coeffs)?),
                Err(Error::Inconsistent { .. }) => off_code = true,
                Err(e) => return Err(e),
            }
        }
        for &i in step {
            out[i] = match &codeword {
                Some(c) => c[i],
                None => rng.random_range(0..q) as Elem,
            };
        }
        for &i in step {
            known.insert(i, out[i]);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RsExperimentConfig {
    pub spec: RsCodeSpec,
    pub scheme: SchemeKind,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub exact_dp: bool,
    /// Unit for human-readable summaries. Records are always in nats.
    pub log_base: LogBase,
}

impl RsExperimentConfig {
    pub fn new(spec: RsCodeSpec, scheme: SchemeKind, k_values: Vec<usize>, seed: u64) -> Self {
        Self {
            spec,
            scheme,
            k_values,
            trials: DEFAULT_TRIALS,
            seed,
            exact_dp: false,
            log_base: LogBase::Nats,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.spec.len();
        if self.trials == 0 {
            return Err(Error::Infeasible("need at least one trial".into()));
        }
        if self.k_values.is_empty() {
            return Err(Error::Infeasible("no K values given".into()));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k > len) {
            return Err(Error::Infeasible(format!("K = {k} outside 1..={len}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub scheme: SchemeKind,
    pub len: usize,
    pub k: usize,
    pub q: usize,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    pub kl_mean: f64,
    pub kl_stderr: f64,
    pub kl_exact: Option<f64>,
    /// The exact value `f_tc(K, L) (L - d) ln q` for TC, an upper bound for
    /// DTC, and the deterministic KL for the fixed-size scheme.
    pub theory: f64,
}

/// Upper bound for the DTC scheme on an RS code: `H_{L-1} / (K - H_{L-1})`
/// times `d ln q` when `K > H_{L-1}`, otherwise `f_dtc(K, L) d ln q`.
pub fn dtc_theory(table: &CoeffTable, k: usize, spec: &RsCodeSpec) -> f64 {
    let dtc = spec.dim() as f64 * (spec.q() as f64).ln();
    match dtc_rate_bound(k, spec.len()) {
        Some(rate) => rate * dtc,
        None => table.f(k, spec.len()) * dtc,
    }
}

/// One record per `K`, in the order given. Deterministic in the seed.
pub fn run_experiment(config: &RsExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let spec = &config.spec;
    let len = spec.len();
    let (d, q) = (spec.dim(), spec.q());
    let ln_q = (q as f64).ln();
    let table = match config.scheme {
        SchemeKind::FixedUniform => None,
        kind => Some(CoeffTable::build(
            kind,
            len,
            *config.k_values.iter().max().unwrap(),
        )?),
    };
    let mut records = Vec::with_capacity(config.k_values.len());
    for &k in &config.k_values {
        let (kl_mean, kl_stderr, kl_exact, theory) = match &table {
            None => {
                let v = schedule_excess(&fixed_uniform_sizes(k, len)?, d) as f64 * ln_q;
                (v, 0.0, config.exact_dp.then_some(v), v)
            }
            Some(t) => {
                let (mean, se) = rs_expected_kl_mc(t, k, spec, config.trials, config.seed)?;
                let exact = if config.exact_dp {
                    Some(rs_expected_kl_exact(t, k, spec)?)
                } else {
                    None
                };
                let theory = match config.scheme {
                    SchemeKind::TcAdaptive => t.f(k, len) * (len - d) as f64 * ln_q,
                    _ => dtc_theory(t, k, spec),
                };
                (mean, se, exact, theory)
            }
        };
        records.push(RunRecord {
            scheme: config.scheme,
            len,
            k,
            q,
            d,
            trials: config.trials,
            seed: config.seed,
            kl_mean,
            kl_stderr,
            kl_exact,
            theory,
        });
    }
    Ok(records)
}

pub fn write_records_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.scheme.as_str().to_string(),
            r.len.to_string(),
            r.k.to_string(),
            r.q.to_string(),
            r.d.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
            r.kl_mean.to_string(),
            r.kl_stderr.to_string(),
            r.kl_exact.map_or_else(String::new, |v| v.to_string()),
            r.theory.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes records to `path`, naming the path in any error.
pub fn write_records_csv_path(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_csv(records, std::io::BufWriter::new(file)).map_err(|e| Error::csv(path, e))
}
