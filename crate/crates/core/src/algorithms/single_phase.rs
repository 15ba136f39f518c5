//! Single-phase estimators for any setting: each box gets a fixed share of
//! the budget up front, then per-community evidence is pooled across boxes.

use std::cmp::Ordering;

use super::mixed::{pick_max, sample_boxes};
use super::size::expected_distinct;
use super::tally::{largest_remainder, Score, Tallies};
use super::{require_identity, require_sizes, AlgorithmError, AlgorithmId, RunResult};
use crate::oracle::Oracle;

/// Real-valued score whose comparisons treat values within 1e-12
/// (relative) as equal, so that sums of equal fractions still tie.
#[derive(Debug, Clone, Copy)]
struct Pooled(f64);

impl Score for Pooled {
    fn cmp_score(&self, other: &Self) -> Ordering {
        let scale = self.0.abs().max(other.0.abs());
        if (self.0 - other.0).abs() <= 1e-12 * scale {
            Ordering::Equal
        } else {
            self.0.total_cmp(&other.0)
        }
    }
}

fn uniform_plan(boxes: usize, t: u64) -> Vec<(usize, u64)> {
    let share = t / boxes as u64;
    (0..boxes).map(|b| (b, share)).collect()
}

fn explore(oracle: &mut Oracle, plan: &[(usize, u64)]) -> Result<(Tallies, u64), AlgorithmError> {
    let mut tallies = Tallies::new(oracle.num_boxes(), oracle.num_communities());
    let start = oracle.query_count();
    sample_boxes(oracle, &mut tallies, plan)?;
    Ok((tallies, oracle.query_count() - start))
}

fn finish(estimate: usize, queries_used: u64, tallies: &Tallies) -> RunResult {
    RunResult {
        estimate,
        queries_used,
        elimination_order: None,
        tallies: tallies.distinct_matrix(),
    }
}

/// Distinct Samples Uniform Exploration: `floor(t / b)` queries per box,
/// answer `argmax_j sum_i S_ij`.
pub fn run_ds_ue(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    require_identity(oracle, AlgorithmId::DsUe)?;
    let (tallies, used) = explore(oracle, &uniform_plan(oracle.num_boxes(), t))?;
    let estimate = pick_max(oracle, tallies.distinct_by_community());
    Ok(finish(estimate, used, &tallies))
}

/// Distinct Samples Proportional Exploration: box `i` gets `t N_i / N`
/// queries (largest-remainder rounding).
pub fn run_ds_pe(
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::DsPe;
    require_identity(oracle, id)?;
    let sizes = require_sizes(oracle, id, box_sizes)?;
    let plan: Vec<(usize, u64)> = largest_remainder(t, sizes)
        .into_iter()
        .enumerate()
        .collect();
    let (tallies, used) = explore(oracle, &plan)?;
    let estimate = pick_max(oracle, tallies.distinct_by_community());
    Ok(finish(estimate, used, &tallies))
}

// sum_i S_ij * N_i / denom_i over boxes with a positive denominator
fn pooled_scores(
    tallies: &Tallies,
    sizes: &[u64],
    denominators: &[f64],
    communities: usize,
) -> Vec<Pooled> {
    let mut scores = vec![0.0; communities];
    for (b, (&size, &denom)) in sizes.iter().zip(denominators).enumerate() {
        if denom <= 0.0 {
            continue;
        }
        for (score, &s) in scores.iter_mut().zip(tallies.distinct_row(b)) {
            *score += s as f64 * size as f64 / denom;
        }
    }
    scores.into_iter().map(Pooled).collect()
}

/// Normalized uniform exploration: answer `argmax_j sum_i (S_ij / S_i) N_i`.
pub fn run_nds_ue(
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::NdsUe;
    require_identity(oracle, id)?;
    let sizes = require_sizes(oracle, id, box_sizes)?;
    let (tallies, used) = explore(oracle, &uniform_plan(oracle.num_boxes(), t))?;
    let denominators: Vec<f64> = (0..sizes.len())
        .map(|b| tallies.box_distinct(b) as f64)
        .collect();
    let scores = pooled_scores(&tallies, sizes, &denominators, oracle.num_communities());
    let estimate = pick_max(oracle, scores);
    Ok(finish(estimate, used, &tallies))
}

/// Expectation-normalized uniform exploration: the denominator is
/// `expected_distinct(N_i, floor(t / b))`.
pub fn run_ends_ue(
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::EndsUe;
    require_identity(oracle, id)?;
    let sizes = require_sizes(oracle, id, box_sizes)?;
    let share = t / oracle.num_boxes() as u64;
    let (tallies, used) = explore(oracle, &uniform_plan(oracle.num_boxes(), t))?;
    let denominators: Vec<f64> = sizes.iter().map(|&n| expected_distinct(n, share)).collect();
    let scores = pooled_scores(&tallies, sizes, &denominators, oracle.num_communities());
    let estimate = pick_max(oracle, scores);
    Ok(finish(estimate, used, &tallies))
}
