#![allow(dead_code)]

use community_mode::rng::mix_seed;
use community_mode::{run, AlgorithmId, IdentityMode, Instance, Oracle};

/// Statistic an exact mixed-setting estimator takes the argmax of.
#[derive(Clone, Copy)]
pub enum Tally {
    /// Raw draw counts per community.
    Frequency,
    /// Distinct individuals per community.
    Distinct,
}

/// Exact error probability of an argmax-of-tally estimator on a single box
/// with community sizes `sizes`, by enumerating all N^t draw sequences.
/// Ties are broken uniformly; a tie between a mode and a non-mode counts
/// with the non-mode share of the tie.
pub fn exact_error(sizes: &[u64], t: u32, tally: Tally) -> f64 {
    let n: u64 = sizes.iter().sum();
    let community: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &d)| std::iter::repeat_n(j, d as usize))
        .collect();
    let top = *sizes.iter().max().unwrap();
    let is_mode: Vec<bool> = sizes.iter().map(|&d| d == top).collect();

    let sequences = n.pow(t);
    let mut error = 0.0;
    for code in 0..sequences {
        let mut draws = Vec::with_capacity(t as usize);
        let mut c = code;
        for _ in 0..t {
            draws.push((c % n) as usize);
            c /= n;
        }
        let mut counts = vec![0u64; sizes.len()];
        match tally {
            Tally::Frequency => {
                for &u in &draws {
                    counts[community[u]] += 1;
                }
            }
            Tally::Distinct => {
                let mut seen = draws.clone();
                seen.sort_unstable();
                seen.dedup();
                for u in seen {
                    counts[community[u]] += 1;
                }
            }
        }
        let best = *counts.iter().max().unwrap();
        let winners: Vec<usize> = (0..sizes.len()).filter(|&j| counts[j] == best).collect();
        let wrong = winners.iter().filter(|&&j| !is_mode[j]).count();
        error += wrong as f64 / winners.len() as f64;
    }
    error / sequences as f64
}

/// Estimates of `a` and `b` on the same oracle seed.
pub fn paired_estimates(
    d: &Instance,
    a: AlgorithmId,
    b: AlgorithmId,
    t: u64,
    seed: u64,
    box_sizes: Option<&[u64]>,
) -> (usize, usize) {
    let go = |alg: AlgorithmId| {
        let mut oracle = Oracle::new(d, seed, alg.identity_mode());
        run(alg, &mut oracle, t, box_sizes).expect("run").estimate
    };
    (go(a), go(b))
}

/// Share of `trials` paired seeds on which `a` and `b` return the same
/// estimate.
pub fn agreement(
    d: &Instance,
    a: AlgorithmId,
    b: AlgorithmId,
    t: u64,
    trials: u64,
    master_seed: u64,
    box_sizes: Option<&[u64]>,
) -> f64 {
    let same = (0..trials)
        .filter(|&i| {
            let (x, y) = paired_estimates(d, a, b, t, mix_seed(&[master_seed, i]), box_sizes);
            x == y
        })
        .count();
    same as f64 / trials as f64
}

pub fn oracle(d: &Instance, seed: u64) -> Oracle {
    Oracle::new(d, seed, IdentityMode::Identity)
}
