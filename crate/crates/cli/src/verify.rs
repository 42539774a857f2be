//! The `verify` subcommand: exact identity and bound checks over random
//! small distributions and the full coefficient tables.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rand::Rng;
use unmask::info::{Assignment, TabularDist};
use unmask::oracle::{
    kl, single_batch_kl, Evaluator, MaskPredictor, SchemeLaw, DEFAULT_REALIZATION_CAP,
};
use unmask::sched::{stream_rng, verify_coeff_bounds, CoeffTable, SchemeKind};

use crate::{parse_u128, parse_u64, parse_usize, CliError, OutputArgs};

pub const CHECKS: [&str; 10] = [
    "tc-equality",
    "dtc-bound",
    "single-batch",
    "recursion",
    "decoupling",
    "tc-dtc-relation",
    "tc-as-kl",
    "tc-coeff-bound",
    "dtc-coeff-bound",
    "psi",
];

const EXACT_TOL: f64 = 1e-10;
const BOUND_REL_TOL: f64 = 1e-9;
const TABLE_L: usize = 2000;
const TABLE_KMAX: usize = 1000;
const PSI_L: usize = 200;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated subset of checks; all when omitted.
    #[arg(long, value_delimiter = ',', value_parser = clap::builder::PossibleValuesParser::new(CHECKS))]
    pub checks: Vec<String>,
    /// Random distributions per oracle check.
    #[arg(long, default_value = "20", value_parser = parse_usize)]
    pub dists: usize,
    /// Fix the sequence length of the random distributions (default: cycle 3..=6).
    #[arg(long = "L", value_parser = parse_usize)]
    pub len: Option<usize>,
    /// Fix the step count (default: cycle 2..=4), capped at the length.
    #[arg(long = "K", value_parser = parse_usize)]
    pub k: Option<usize>,
    /// Alphabet size of the random distributions.
    #[arg(long, default_value = "2", value_parser = parse_usize)]
    pub q: usize,
    #[arg(long, default_value = "0", value_parser = parse_u64)]
    pub seed: u64,
    /// Largest number of schedule realizations one evaluation may enumerate.
    #[arg(long, default_value_t = DEFAULT_REALIZATION_CAP, value_parser = parse_u128)]
    pub cap: u128,
    #[arg(long, hide = true)]
    pub corrupt_table: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub instances: usize,
    /// `None` when the check stopped on the realization cap.
    pub max_residual: Option<f64>,
    pub pass: bool,
}

struct Suite<'a> {
    args: &'a VerifyArgs,
}

impl Suite<'_> {
    fn case(&self, stream: u64, i: usize) -> unmask::Result<(TabularDist, usize)> {
        let a = self.args;
        let mut rng = stream_rng(a.seed, (stream << 32) | i as u64);
        let len = a.len.unwrap_or(3 + i % 4);
        let k = a.k.unwrap_or(2 + i % 3).min(len).max(1);
        let dist = if i % 5 == 4 {
            TabularDist::random_sparse(a.q, len, 0.3, &mut rng)?
        } else {
            TabularDist::random(a.q, len, &mut rng)?
        };
        Ok((dist, k))
    }

    fn evaluator<'d>(
        &self,
        p: &'d TabularDist,
        pred: &MaskPredictor,
    ) -> unmask::Result<Evaluator<'d>> {
        Ok(Evaluator::new(p, pred)?.with_cap(self.args.cap))
    }

    fn tc_equality(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        for i in 0..self.args.dists {
            let (p, k) = self.case(1, i)?;
            let mut t = CoeffTable::build(SchemeKind::TcAdaptive, p.len(), k)?;
            if self.args.corrupt_table {
                t.corrupt(k, p.len(), t.f(k, p.len()) + 0.05);
            }
            let got = self
                .evaluator(&p, &MaskPredictor::exact(p.clone()))?
                .expected_kl(SchemeLaw::Adaptive(&t), k)?;
            worst = worst.max((got - t.f(k, p.len()) * p.total_correlation()).abs());
        }
        Ok((self.args.dists, worst))
    }

    fn dtc_bound(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        let mut rng = stream_rng(self.args.seed, 2 << 32 | 0xffff_ffff);
        for i in 0..self.args.dists {
            let (p, k) = self.case(2, i)?;
            let len = p.len();
            let t = CoeffTable::build(SchemeKind::DtcAdaptive, len, k)?;
            let ev = self.evaluator(&p, &MaskPredictor::exact(p.clone()))?;
            let got = ev.expected_kl(SchemeLaw::Adaptive(&t), k)?;
            worst = worst.max(got - t.f(k, len) * p.dual_total_correlation());
            if len < 3 {
                continue;
            }
            let ctx = context(&p, rng.random_range(1..=len - 2), &mut rng);
            let free: Vec<usize> = (0..len).filter(|j| ctx.get(*j).is_none()).collect();
            let n = free.len();
            let kc = k.min(n);
            let got = ev.expected_kl_conditional(SchemeLaw::Adaptive(&t), kc, &ctx)?;
            let local = p.conditional(&free, &ctx)?;
            let bound = t.f(kc, n)
                * ((len - n) as f64 / n as f64 * local.total_correlation()
                    + len as f64 / n as f64 * local.dual_total_correlation());
            worst = worst.max(got - bound);
        }
        Ok((self.args.dists, worst.max(0.0)))
    }

    fn single_batch(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        let mut rng = stream_rng(self.args.seed, 3 << 32 | 0xffff_ffff);
        for i in 0..self.args.dists {
            let (p, _) = self.case(3, i)?;
            let len = p.len();
            let revealed = rng.random_range(0..len);
            let ctx = context(&p, revealed, &mut rng);
            let free: Vec<usize> = (0..len).filter(|j| ctx.get(*j).is_none()).collect();
            let size = rng.random_range(1..=free.len());
            let s: Vec<usize> = unmask::sched::sample_subset(&free, size, &mut rng)?;
            let got = single_batch_kl(&p, &ctx, &s)?;
            let want = p.conditional(&s, &ctx)?.total_correlation();
            worst = worst.max((got - want).abs());
        }
        Ok((self.args.dists, worst))
    }

    fn recursion(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        for i in 0..self.args.dists {
            let (p, k) = self.case(4, i)?;
            let k = k.max(2).min(p.len());
            if k < 2 {
                continue;
            }
            let kind = if i % 2 == 0 {
                SchemeKind::TcAdaptive
            } else {
                SchemeKind::DtcAdaptive
            };
            let pred = if i % 3 == 2 {
                MaskPredictor::perturbed(p.clone(), 0.3, self.args.seed ^ i as u64)
            } else {
                MaskPredictor::exact(p.clone())
            };
            let t = CoeffTable::build(kind, p.len(), k)?;
            let r = self
                .evaluator(&p, &pred)?
                .recursion_check(&t, k, &Assignment::empty())?;
            worst = worst.max(r.residual());
        }
        Ok((self.args.dists, worst))
    }

    fn decoupling(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        for i in 0..self.args.dists {
            let (p, k) = self.case(5, i)?;
            let noisy = MaskPredictor::perturbed(
                p.clone(),
                0.2 + 0.05 * (i % 10) as f64,
                self.args.seed ^ i as u64,
            );
            let exact = self.evaluator(&p, &MaskPredictor::exact(p.clone()))?;
            let approx = self.evaluator(&p, &noisy)?;
            let kind = [
                SchemeKind::TcAdaptive,
                SchemeKind::DtcAdaptive,
                SchemeKind::FixedUniform,
            ][i % 3];
            let table = unmask::oracle::table_for(kind, p.len(), k)?;
            let law = table
                .as_ref()
                .map_or(SchemeLaw::FixedUniform, SchemeLaw::Adaptive);
            let gap = approx.expected_kl(law, k)? - exact.expected_kl(law, k)?;
            let eps = approx.prediction_error(law, k)?;
            worst = worst.max((gap - eps).abs());
            if eps < -EXACT_TOL {
                worst = worst.max(-eps);
            }
        }
        Ok((self.args.dists, worst))
    }

    fn tc_dtc_relation(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        for i in 0..self.args.dists {
            let (p, _) = self.case(6, i)?;
            let (tc, dtc) = (p.total_correlation(), p.dual_total_correlation());
            let n = p.len() as f64;
            worst = worst.max(tc - (n - 1.0) * dtc).max(dtc - (n - 1.0) * tc);
        }
        Ok((self.args.dists, worst.max(0.0)))
    }

    fn tc_as_kl(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        for i in 0..self.args.dists {
            let (p, _) = self.case(7, i)?;
            let marginals = (0..p.len())
                .map(|j| p.marginal(&[j]).map(|m| m.probs().to_vec()))
                .collect::<unmask::Result<Vec<_>>>()?;
            let product = TabularDist::product(p.q(), &marginals)?;
            worst = worst.max((kl(&p, &product)? - p.total_correlation()).abs());
        }
        Ok((self.args.dists, worst))
    }

    fn coeff_bound(&self, kind: SchemeKind) -> unmask::Result<(usize, f64, bool)> {
        let t = CoeffTable::build(kind, TABLE_L, TABLE_KMAX)?;
        let r = verify_coeff_bounds(&t);
        Ok((
            r.cells_checked,
            r.worst_excess.max(r.max_diagonal).max(0.0),
            r.passes(BOUND_REL_TOL),
        ))
    }

    fn psi(&self) -> unmask::Result<(usize, f64)> {
        let mut worst = 0.0f64;
        let mut cells = 0;
        for kind in [SchemeKind::TcAdaptive, SchemeKind::DtcAdaptive] {
            let t = CoeffTable::build(kind, PSI_L, PSI_L)?;
            for k in 2..=PSI_L {
                for len in k..=PSI_L {
                    let want = direct_log_psi(&t, k, len);
                    let got = t.log_psi(k, len);
                    worst = worst.max((got - want).abs() / want.abs().max(1.0));
                    cells += 1;
                }
            }
        }
        Ok((cells, worst))
    }

    fn run(&self, name: &str) -> Result<CheckRow, CliError> {
        let result = match name {
            "tc-coeff-bound" => self.coeff_bound(SchemeKind::TcAdaptive),
            "dtc-coeff-bound" => self.coeff_bound(SchemeKind::DtcAdaptive),
            other => {
                let r = match other {
                    "tc-equality" => self.tc_equality(),
                    "dtc-bound" => self.dtc_bound(),
                    "single-batch" => self.single_batch(),
                    "recursion" => self.recursion(),
                    "decoupling" => self.decoupling(),
                    "tc-dtc-relation" => self.tc_dtc_relation(),
                    "tc-as-kl" => self.tc_as_kl(),
                    "psi" => self.psi(),
                    _ => return Err(CliError::Args(format!("unknown check `{other}`"))),
                };
                r.map(|(n, res)| (n, res, res <= EXACT_TOL))
            }
        };
        match result {
            Ok((instances, residual, pass)) => Ok(CheckRow {
                check: name.to_string(),
                instances,
                max_residual: Some(residual),
                pass,
            }),
            Err(e @ unmask::Error::Capacity { .. }) => {
                eprintln!("{name}: {e}");
                Ok(CheckRow {
                    check: name.to_string(),
                    instances: 0,
                    max_residual: None,
                    pass: false,
                })
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// A context on `revealed` random positions, read off an outcome of positive
/// mass.
fn context<R: Rng>(p: &TabularDist, revealed: usize, rng: &mut R) -> Assignment {
    if revealed == 0 {
        return Assignment::empty();
    }
    let support: Vec<usize> = (0..p.probs().len())
        .filter(|&j| p.probs()[j] > 0.0)
        .collect();
    let outcome = p.outcome(support[rng.random_range(0..support.len())]);
    let all: Vec<usize> = (0..p.len()).collect();
    let positions = unmask::sched::sample_subset(&all, revealed, rng).expect("revealed <= len");
    Assignment::restrict(&outcome, &positions)
}

/// `ln Psi` summed term by term from the weight products.
fn direct_log_psi(t: &CoeffTable, k: usize, len: usize) -> f64 {
    let big_l = t.ambient_len() as f64;
    let f = |l: usize| t.f(k - 1, l);
    let mut logs = vec![0.0];
    let mut log_w = 0.0;
    for i in 1..=len - k {
        let (a, b) = (len - i, (len - i) as f64);
        let factor = match t.kind() {
            SchemeKind::TcAdaptive => b * f(a) / (1.0 + (b - 2.0) * f(a - 1)),
            _ => {
                let c = big_l - len as f64 + i as f64;
                c * f(a) / (1.0 + (c + 2.0) * f(a - 1))
            }
        };
        log_w += factor.ln();
        logs.push(log_w);
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logs.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Runs the selected checks (all when `args.checks` is empty).
pub fn run_checks(args: &VerifyArgs) -> Result<Vec<CheckRow>, CliError> {
    if args.q < 2 {
        return Err(CliError::Args("--q must be at least 2".into()));
    }
    if args.len == Some(0) || args.k == Some(0) {
        return Err(CliError::Args("--L and --K must be positive".into()));
    }
    let suite = Suite { args };
    let names: Vec<&str> = if args.checks.is_empty() {
        CHECKS.to_vec()
    } else {
        args.checks.iter().map(String::as_str).collect()
    };
    names.into_iter().map(|n| suite.run(n)).collect()
}

pub fn write_rows(rows: &[CheckRow], w: &mut dyn Write) -> Result<(), CliError> {
    let mut c = csv::Writer::from_writer(w);
    let err = |e: csv::Error| CliError::Io {
        path: "<output>".into(),
        source: e.into(),
    };
    c.write_record(["check", "instances", "max_residual", "pass"])
        .map_err(err)?;
    for r in rows {
        let residual = r
            .max_residual
            .map_or_else(String::new, |v| format!("{v:e}"));
        let pass = match (r.max_residual, r.pass) {
            (None, _) => "capacity",
            (_, true) => "true",
            (_, false) => "false",
        };
        c.write_record([
            r.check.clone(),
            r.instances.to_string(),
            residual,
            pass.to_string(),
        ])
        .map_err(err)?;
    }
    c.flush().map_err(|e| CliError::Io {
        path: "<output>".into(),
        source: e,
    })
}

pub fn cmd_verify(args: &VerifyArgs, argv: &[String]) -> Result<(), CliError> {
    let started = crate::unix_now();
    let rows = run_checks(args)?;
    let out: Option<PathBuf> = args.output.out.clone();
    crate::emit(
        out.as_deref(),
        args.output.manifest,
        Some(args.seed),
        argv,
        started,
        |w| write_rows(&rows, w),
    )?;
    let failed = rows
        .iter()
        .filter(|r| r.max_residual.is_some() && !r.pass)
        .count();
    if failed > 0 {
        return Err(CliError::Verify { failed });
    }
    let capped = rows.iter().filter(|r| r.max_residual.is_none()).count();
    if capped > 0 {
        return Err(CliError::Capacity { checks: capped });
    }
    Ok(())
}
