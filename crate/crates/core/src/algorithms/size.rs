//! Occupancy helpers: expected number of distinct individuals after `k`
//! uniform draws with replacement from `N`, and the inverse used to guess a
//! box size from an observed distinct count.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("distinct count {distinct} exceeds the number of draws {draws}")]
pub struct SizeEstimateError {
    pub distinct: u64,
    pub draws: u64,
}

/// `N (1 - (1 - 1/N)^k)`, via `expm1`/`ln_1p`, never above `min(N, k)`.
pub fn expected_distinct(n: u64, k: u64) -> f64 {
    if k == 0 || n == 0 {
        return 0.0;
    }
    if n == 1 {
        return 1.0;
    }
    let nf = n as f64;
    let value = -nf * (k as f64 * (-1.0 / nf).ln_1p()).exp_m1();
    value.min(nf).min(k as f64)
}

/// Box size from `distinct` individuals seen in `draws` queries.
///
/// `distinct <= 1` returns `distinct`; no collision at all (`distinct ==
/// draws >= 2`) returns the cap `draws²`; otherwise the smallest `N >=
/// distinct` with `expected_distinct(N, draws) >= distinct`.
pub fn estimate_box_size(distinct: u64, draws: u64) -> Result<u64, SizeEstimateError> {
    if distinct > draws {
        return Err(SizeEstimateError { distinct, draws });
    }
    if distinct <= 1 {
        return Ok(distinct);
    }
    if distinct == draws {
        return Ok(draws.saturating_mul(draws));
    }
    let target = distinct as f64;
    let mut lo = distinct;
    if expected_distinct(lo, draws) >= target {
        return Ok(lo);
    }
    // expected_distinct(N, k) rises towards k > distinct, so doubling ends
    let mut hi = lo.saturating_mul(2);
    while expected_distinct(hi, draws) < target {
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    // invariant: E(lo) < target <= E(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if expected_distinct(mid, draws) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
