//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use common::{corpus_case, direct_log_psi, harmonic_ref, ols, random_context};
use rand::Rng;
use unmask::gf::{Gf2m, RsCodeSpec};
use unmask::info::TabularDist;
use unmask::oracle::{
    enumerate_schedule_law, kl, single_batch_kl, Evaluator, MaskPredictor, SchemeLaw,
};
use unmask::rsx::{rs_expected_kl_mc, rs_schedule_kl};
use unmask::sched::{
    fixed_uniform_sizes, mean_batch_size_profile, sample_schedule, stream_rng, tc_coeff_bound,
    verify_coeff_bounds, CoeffTable, ScheduleRealization, SchemeKind,
};

/// One seed for every randomized criterion, fixed before any run.
const SEED: u64 = 1;
const CORPUS: usize = 50;
const EXACT_TOL: f64 = 1e-10;
const FULL_L: usize = 2000;
const FULL_M: u32 = 11;
const TRIALS: usize = 100_000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ln_q() -> f64 {
    ((1usize << FULL_M) as f64).ln()
}

fn rs(d: usize) -> RsCodeSpec {
    RsCodeSpec::new(Gf2m::new(FULL_M).unwrap(), FULL_L, d).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..CORPUS {
        let (p, k) = corpus_case(SEED, i);
        let t = CoeffTable::build(SchemeKind::TcAdaptive, p.len(), k).unwrap();
        let ev = Evaluator::new(&p, &MaskPredictor::exact(p.clone())).unwrap();
        let got = ev.expected_kl(SchemeLaw::Adaptive(&t), k).unwrap();
        worst = worst.max((got - t.f(k, p.len()) * p.total_correlation()).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= EXACT_TOL && secs < 30.0,
        format!("{CORPUS} distributions, max |E KL - f_tc TC| = {worst:.2e}, {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..CORPUS {
        let (p, k) = corpus_case(SEED, i);
        let t = CoeffTable::build(SchemeKind::DtcAdaptive, p.len(), k).unwrap();
        let ev = Evaluator::new(&p, &MaskPredictor::exact(p.clone())).unwrap();
        let got = ev.expected_kl(SchemeLaw::Adaptive(&t), k).unwrap();
        worst = worst.max(got - t.f(k, p.len()) * p.dual_total_correlation());
    }
    let mut rng = stream_rng(SEED, 1 << 20);
    let mut worst_cond = f64::NEG_INFINITY;
    for i in 0..20 {
        let (p, _) = corpus_case(SEED, i);
        let len = p.len();
        let ctx = random_context(&p, rng.random_range(1..=len - 2), &mut rng);
        let free: Vec<usize> = (0..len).filter(|j| ctx.get(*j).is_none()).collect();
        let n = free.len();
        let k = rng.random_range(2..=n.min(4));
        let t = CoeffTable::build(SchemeKind::DtcAdaptive, len, k).unwrap();
        let ev = Evaluator::new(&p, &MaskPredictor::exact(p.clone())).unwrap();
        let got = ev
            .expected_kl_conditional(SchemeLaw::Adaptive(&t), k, &ctx)
            .unwrap();
        let local = p.conditional(&free, &ctx).unwrap();
        let bound = t.f(k, n)
            * ((len - n) as f64 / n as f64 * local.total_correlation()
                + len as f64 / n as f64 * local.dual_total_correlation());
        worst_cond = worst_cond.max(got - bound);
    }
    outcome(
        worst <= EXACT_TOL && worst_cond <= EXACT_TOL,
        format!("max excess over f_dtc DTC {worst:.2e} ({CORPUS} distributions), conditional form {worst_cond:.2e} (20 contexts)"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut min_eps = f64::INFINITY;
    for i in 0..20 {
        let (p, k) = corpus_case(SEED + 1, i);
        let noisy = MaskPredictor::perturbed(p.clone(), 0.1 + 0.05 * i as f64, SEED + i as u64);
        let t = CoeffTable::build(SchemeKind::TcAdaptive, p.len(), k).unwrap();
        let law = SchemeLaw::Adaptive(&t);
        let with_hat = Evaluator::new(&p, &noisy).unwrap();
        let with_star = Evaluator::new(&p, &MaskPredictor::exact(p.clone())).unwrap();
        let gap = with_hat.expected_kl(law, k).unwrap() - with_star.expected_kl(law, k).unwrap();
        let eps = with_hat.prediction_error(law, k).unwrap();
        min_eps = min_eps.min(eps);
        worst = worst.max((gap - eps).abs());
    }
    outcome(
        worst <= EXACT_TOL,
        format!("20 pairs, max |gap - eps_train| = {worst:.2e}, smallest eps_train {min_eps:.3e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    for kind in [SchemeKind::TcAdaptive, SchemeKind::DtcAdaptive] {
        let start = Instant::now();
        let t = CoeffTable::build(kind, FULL_L, 1000).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let r = verify_coeff_bounds(&t);
        pass &= r.worst_excess <= 1e-9 && r.max_diagonal <= 1e-12 && r.min_f >= 0.0 && secs < 5.0;
        parts.push(format!(
            "{kind}: {} cells, worst relative excess {:.2e} at {:?}, max |f(K,K)| {:.1e}, build {secs:.2} s",
            r.cells_checked, r.worst_excess, r.worst_cell, r.max_diagonal
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    let mut check = |t: &CoeffTable| {
        for k in 2..=t.k_max() {
            for len in k..=t.ambient_len() {
                let direct = direct_log_psi(t, k, len);
                let fast = t.log_psi(k, len);
                let err = if direct == 0.0 {
                    fast.abs()
                } else {
                    ((fast - direct) / direct).abs()
                };
                worst = worst.max(err);
                cells += 1;
            }
        }
    };
    check(&CoeffTable::build(SchemeKind::TcAdaptive, 200, 200).unwrap());
    for ambient in 2..=200 {
        check(&CoeffTable::build(SchemeKind::DtcAdaptive, ambient, ambient).unwrap());
    }
    outcome(
        worst <= 1e-10,
        format!(
            "{cells} cells (TC at L=200, DTC at every L <= 200), max relative error {worst:.2e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let spec = rs(FULL_L - 5);
    let t = CoeffTable::build(SchemeKind::TcAdaptive, FULL_L, 1000).unwrap();
    let mut pass = true;
    let mut worst_z = 0.0f64;
    let mut parts = vec![];
    for k in [10, 50, 100, 200, 500, 1000] {
        let (mean, se) = rs_expected_kl_mc(&t, k, &spec, TRIALS, SEED).unwrap();
        let exact = t.f(k, FULL_L) * 5.0 * ln_q();
        let bound = tc_coeff_bound(k, FULL_L) * 5.0 * ln_q();
        let fixed = rs_schedule_kl(&fixed_uniform_sizes(k, FULL_L).unwrap(), &spec).unwrap();
        let z = (mean - exact) / se;
        worst_z = worst_z.max(z.abs());
        let ok = z.abs() <= 4.0 && mean <= bound && mean <= fixed;
        pass &= ok;
        parts.push(format!("K={k} {mean:.4}({se:.4})"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    outcome(
        pass,
        format!(
            "max |z| vs f_tc 5 ln q = {worst_z:.2}, mean(stderr) per K: {}; {secs:.1} s",
            parts.join(" ")
        ),
    )
}

/// Largest `|residual| / stderr` of an OLS line through the MC means.
fn worst_affine_residual(kind: SchemeKind, dims: &dyn Fn(usize) -> usize) -> f64 {
    let t = CoeffTable::build(kind, FULL_L, 500).unwrap();
    let (mut xs, mut ys, mut ses) = (vec![], vec![], vec![]);
    for c in 1..=10 {
        let (m, se) = rs_expected_kl_mc(&t, 500, &rs(dims(c)), TRIALS, SEED).unwrap();
        xs.push(c as f64);
        ys.push(m);
        ses.push(se);
    }
    let (a, b) = ols(&xs, &ys);
    (0..10)
        .map(|i| ((ys[i] - a - b * xs[i]) / ses[i]).abs())
        .fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let tc = worst_affine_residual(SchemeKind::TcAdaptive, &|c| FULL_L - c);
    let dtc = worst_affine_residual(SchemeKind::DtcAdaptive, &|c| c);
    outcome(
        tc < 2.0 && dtc < 2.0,
        format!(
            "max |OLS residual| / stderr: TC vs codimension {tc:.2}, DTC vs dimension {dtc:.2}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let spec = rs(5);
    let t = CoeffTable::build(SchemeKind::DtcAdaptive, FULL_L, 1000).unwrap();
    let h = harmonic_ref(FULL_L - 1);
    let mut pass = true;
    let mut parts = vec![];
    for k in [10, 50, 100, 500, 1000] {
        let (mean, se) = rs_expected_kl_mc(&t, k, &spec, TRIALS, SEED).unwrap();
        let bound = h / (k as f64 - h) * 5.0 * ln_q();
        let fixed = rs_schedule_kl(&fixed_uniform_sizes(k, FULL_L).unwrap(), &spec).unwrap();
        pass &= mean <= bound + 4.0 * se && mean <= fixed;
        parts.push(format!("K={k} {mean:.3}/{bound:.3}"));
    }
    outcome(pass, format!("mean/bound: {}", parts.join(" ")))
}

fn criterion_9() -> Outcome {
    let n = 10_000usize;
    let mut pass = true;
    let mut parts = vec![];
    for kind in [SchemeKind::TcAdaptive, SchemeKind::DtcAdaptive] {
        let t = CoeffTable::build(kind, FULL_L, 1000).unwrap();
        let prof = mean_batch_size_profile(&t, 1000, FULL_L, n, SEED).unwrap();
        let (first, last) = (prof[0], prof[999]);
        let sigma = ((first.std.powi(2) + last.std.powi(2)) / n as f64).sqrt();
        let z = (first.mean - last.mean) / sigma;
        let z = if kind == SchemeKind::TcAdaptive {
            z
        } else {
            -z
        };
        pass &= z > 5.0;
        parts.push(format!(
            "{kind}: first {:.3}, last {:.3}, separation {z:.1} sigma",
            first.mean, last.mean
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let mut rng = stream_rng(SEED, 1 << 21);
    let mut failures = 0usize;
    let mut counts = vec![];

    // TC <= (n - 1) DTC
    for _ in 0..200 {
        let q = rng.random_range(2..=3);
        let len = rng.random_range(2..=5);
        let p = TabularDist::random(q, len, &mut rng).unwrap();
        if p.total_correlation() > (len - 1) as f64 * p.dual_total_correlation() + 1e-12 {
            failures += 1;
        }
    }
    counts.push("200 TC/DTC");

    // one-batch KL is the pointwise conditional TC
    for _ in 0..200 {
        let q = rng.random_range(2..=3);
        let len = rng.random_range(2..=5);
        let p = TabularDist::random(q, len, &mut rng).unwrap();
        let ctx = random_context(&p, rng.random_range(0..len), &mut rng);
        let free: Vec<usize> = (0..len).filter(|j| ctx.get(*j).is_none()).collect();
        let s = &free[..rng.random_range(1..=free.len())];
        let got = single_batch_kl(&p, &ctx, s).unwrap();
        let want = p.conditional(s, &ctx).unwrap().total_correlation();
        if (got - want).abs() > 1e-12 {
            failures += 1;
        }
    }
    counts.push("200 one-batch");

    // singleton steps reproduce the source exactly, in every order
    for _ in 0..20 {
        let q = rng.random_range(2..=3);
        let len = rng.random_range(2..=4);
        let p = TabularDist::random(q, len, &mut rng).unwrap();
        let ev = Evaluator::new(&p, &MaskPredictor::exact(p.clone())).unwrap();
        let t = CoeffTable::build(SchemeKind::DtcAdaptive, len, len).unwrap();
        let idx: Vec<usize> = (0..len).collect();
        for (real, _) in enumerate_schedule_law(SchemeLaw::Adaptive(&t), len, &idx, 1000).unwrap() {
            let out = ev.sampled_distribution(&real).unwrap();
            if out
                .probs()
                .iter()
                .zip(p.probs())
                .any(|(a, b)| (a - b).abs() > 1e-12)
            {
                failures += 1;
            }
        }
    }
    counts.push("20 chain-rule");

    // RS KL depends only on step sizes
    for (m, len) in [(2u32, 3usize), (3, 4)] {
        for d in 1..=len {
            let spec = RsCodeSpec::new(Gf2m::new(m).unwrap(), len, d).unwrap();
            let dist = TabularDist::reed_solomon(&spec).unwrap();
            let ev = Evaluator::new(&dist, &MaskPredictor::exact(dist.clone())).unwrap();
            let mut sizes = vec![];
            let mut left = len;
            while left > 0 {
                let l = rng.random_range(1..=left);
                sizes.push(l);
                left -= l;
            }
            let closed = rs_schedule_kl(&sizes, &spec).unwrap();
            for _ in 0..100 {
                let mut perm: Vec<usize> = (0..len).collect();
                for j in 0..len {
                    let pick = rng.random_range(j..len);
                    perm.swap(j, pick);
                }
                let mut steps = vec![];
                let mut at = 0;
                for &l in &sizes {
                    steps.push(perm[at..at + l].to_vec());
                    at += l;
                }
                let real = ScheduleRealization::new((0..len).collect(), steps).unwrap();
                let brute = kl(&dist, &ev.sampled_distribution(&real).unwrap()).unwrap();
                if (brute - closed).abs() > 1e-12 {
                    failures += 1;
                }
            }
        }
    }
    counts.push("700 RS size-only");

    // sampled schedules partition their index set
    for trial in 0..10_000u64 {
        let kind = if trial % 2 == 0 {
            SchemeKind::TcAdaptive
        } else {
            SchemeKind::DtcAdaptive
        };
        let len = rng.random_range(1..=64);
        let k = rng.random_range(1..=len);
        let t = CoeffTable::build(kind, len, k).unwrap();
        let target: Vec<usize> = (0..len).collect();
        let real = sample_schedule(&t, k, &target, &mut rng).unwrap();
        let mut all: Vec<usize> = real.steps().iter().flatten().copied().collect();
        all.sort_unstable();
        if real.num_steps() != k || all != target {
            failures += 1;
        }
    }
    counts.push("10000 partitions");

    outcome(
        failures == 0,
        format!("{} checks, {failures} failures", counts.join(", ")),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("exact TC-scheme equality on the small corpus", criterion_1),
        ("DTC-scheme bound, plain and conditional", criterion_2),
        ("prediction-error decoupling", criterion_3),
        (
            "harmonic coefficient bounds at L=2000, K_max=1000",
            criterion_4,
        ),
        ("Psi recurrence vs direct expansion", criterion_5),
        ("TC scheme on RS, L-d=5, K sweep", criterion_6),
        (
            "KL affine in codimension (TC) and dimension (DTC)",
            criterion_7,
        ),
        ("DTC scheme on RS, d=5, K sweep", criterion_8),
        ("mean batch-size profile ordering", criterion_9),
        ("property suites", criterion_10),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{tag}] {name}: {} ({:.1} s)",
            n + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
