#![allow(dead_code)]

use rand::Rng;
use unmask::info::{Assignment, TabularDist};
use unmask::sched::{stream_rng, CoeffTable, SchemeKind};

/// Case `i` of the small-distribution corpus: binary alphabet,
/// `L` cycling through 3..=6 and `K` through 2..=4 (capped at `L`).
/// Every fifth case has about a third of its outcomes set to zero.
pub fn corpus_case(seed: u64, i: usize) -> (TabularDist, usize) {
    let mut rng = stream_rng(seed, i as u64);
    let len = 3 + i % 4;
    let k = (2 + i % 3).min(len);
    let dist = if i % 5 == 4 {
        TabularDist::random_sparse(2, len, 0.3, &mut rng).unwrap()
    } else {
        TabularDist::random(2, len, &mut rng).unwrap()
    };
    (dist, k)
}

/// A context on `revealed` random positions whose values are read off an
/// outcome drawn from `dist`, so it always has positive mass.
pub fn random_context<R: Rng>(dist: &TabularDist, revealed: usize, rng: &mut R) -> Assignment {
    let mut positions: Vec<usize> = (0..dist.len()).collect();
    for j in 0..revealed {
        let pick = rng.random_range(j..positions.len());
        positions.swap(j, pick);
    }
    positions.truncate(revealed);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut idx = dist.probs().len() - 1;
    for (j, &p) in dist.probs().iter().enumerate() {
        acc += p;
        if acc > u && p > 0.0 {
            idx = j;
            break;
        }
    }
    while dist.probs()[idx] == 0.0 {
        idx -= 1;
    }
    Assignment::restrict(&dist.outcome(idx), &positions)
}

/// `ln sum_l w_l(K, L')` from the weight products, with a max-shifted
/// log-sum-exp.
pub fn direct_log_psi(table: &CoeffTable, k: usize, len: usize) -> f64 {
    let big_l = table.ambient_len() as f64;
    let f = |l: usize| table.f(k - 1, l);
    let mut logs = vec![0.0];
    let mut log_w = 0.0;
    for i in 1..=len - k {
        let (a, b) = (len - i, (len - i) as f64);
        let factor = match table.kind() {
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

/// Ordinary least-squares line `(intercept, slope)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// `1 + 1/2 + ... + 1/n`, summed from the small terms up.
pub fn harmonic_ref(n: usize) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}
