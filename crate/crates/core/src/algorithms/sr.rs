//! Successive-rejects estimators.
//!
//! All of them share one skeleton: `b - 1` phases, each topping up the
//! surviving boxes and then rejecting the box with the smallest statistic
//! (largest, for collision counts). They differ in how a phase budget is
//! split across boxes and in the statistic.

use super::mixed::{pick_max, sample_boxes};
use super::size::{estimate_box_size, expected_distinct};
use super::tally::{argmax_set, argmin_set, largest_remainder, Ratio, Score, Tallies};
use super::{
    require_identity, require_setting, require_sizes, AlgorithmError, AlgorithmId, RunResult,
};
use crate::oracle::Oracle;
use crate::schedule::{sr_round_lengths, SrSchedule};

enum Allocation<'s> {
    /// Every survivor gets `K_r - K_{r-1}` queries.
    Uniform,
    /// The phase total is split in proportion to these box sizes.
    Proportional(&'s [u64]),
}

struct Outcome {
    survivor: usize,
    order: Vec<usize>,
    tallies: Tallies,
    queries: u64,
}

fn schedule_for(
    algorithm: AlgorithmId,
    budget: u64,
    boxes: usize,
) -> Result<SrSchedule, AlgorithmError> {
    if boxes >= 2 && budget <= boxes as u64 {
        return Err(AlgorithmError::BudgetTooSmall {
            algorithm,
            budget,
            minimum: boxes as u64 + 1,
        });
    }
    Ok(sr_round_lengths(budget, boxes)?)
}

fn successive_rejects<S, F>(
    oracle: &mut Oracle,
    algorithm: AlgorithmId,
    t: u64,
    allocation: Allocation<'_>,
    mut statistic: F,
) -> Result<Outcome, AlgorithmError>
where
    S: Score,
    F: FnMut(&Tallies, usize) -> Result<S, AlgorithmError>,
{
    let boxes = oracle.num_boxes();
    let schedule = schedule_for(algorithm, t, boxes)?;
    let mut tallies = Tallies::new(boxes, oracle.num_communities());
    let mut alive: Vec<usize> = (0..boxes).collect();
    let mut order = Vec::with_capacity(boxes - 1);
    let start = oracle.query_count();

    for r in 1..=schedule.phases() {
        let pulls = schedule.phase_pulls(r);
        let plan: Vec<(usize, u64)> = match allocation {
            Allocation::Uniform => alive.iter().map(|&b| (b, pulls)).collect(),
            Allocation::Proportional(sizes) => {
                let weights: Vec<u64> = alive.iter().map(|&b| sizes[b]).collect();
                let total = pulls * alive.len() as u64;
                alive
                    .iter()
                    .copied()
                    .zip(largest_remainder(total, &weights))
                    .collect()
            }
        };
        sample_boxes(oracle, &mut tallies, &plan)?;

        let mut scored = Vec::with_capacity(alive.len());
        for &b in &alive {
            scored.push((b, statistic(&tallies, b)?));
        }
        let rejected = oracle.tie_break(&argmin_set(&scored));
        alive.retain(|&b| b != rejected);
        order.push(rejected);
    }

    Ok(Outcome {
        survivor: alive[0],
        order,
        tallies,
        queries: oracle.query_count() - start,
    })
}

fn finish_box(oracle: &mut Oracle, outcome: Outcome) -> RunResult {
    let estimate = pick_max(
        oracle,
        outcome.tallies.distinct_row(outcome.survivor).to_vec(),
    );
    RunResult {
        estimate,
        queries_used: outcome.queries,
        elimination_order: Some(outcome.order),
        tallies: outcome.tallies.distinct_matrix(),
    }
}

fn max_over_box(tallies: &Tallies, b: usize) -> u64 {
    tallies.max_distinct(b)
}

/// Distinct Samples SR, one community per box: reject the box with the
/// fewest distinct individuals.
pub fn run_ds_sr_separated(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::DsSrSep;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let outcome = successive_rejects(oracle, id, t, Allocation::Uniform, |tl, b| {
        Ok(tl.box_distinct(b))
    })?;
    // the survivor's community is whatever it returned
    let raw: Vec<(usize, u64)> = outcome
        .tallies
        .raw_row(outcome.survivor)
        .iter()
        .copied()
        .enumerate()
        .collect();
    let estimate = oracle.tie_break(&argmax_set(&raw));
    Ok(RunResult {
        estimate,
        queries_used: outcome.queries,
        elimination_order: Some(outcome.order),
        tallies: outcome.tallies.distinct_matrix(),
    })
}

/// Distinct Samples SR over boxes: reject the box whose best community has
/// the fewest distinct individuals, then answer with the best community of
/// the last box.
pub fn run_ds_sr_box(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::DsSrBox;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let outcome = successive_rejects(oracle, id, t, Allocation::Uniform, |tl, b| {
        Ok(max_over_box(tl, b))
    })?;
    Ok(finish_box(oracle, outcome))
}

/// DS-SR with each phase budget split across survivors in proportion to
/// their sizes.
pub fn run_ds_psr(
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::DsPsr;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let sizes = require_sizes(oracle, id, box_sizes)?;
    let outcome = successive_rejects(oracle, id, t, Allocation::Proportional(sizes), |tl, b| {
        Ok(max_over_box(tl, b))
    })?;
    Ok(finish_box(oracle, outcome))
}

// max_j (S_ij / S_i) * size, exactly; S_i = 0 scores 0
fn normalized(tallies: &Tallies, b: usize, size: u64) -> Ratio {
    Ratio::new(
        tallies.max_distinct(b) as u128 * size as u128,
        tallies.box_distinct(b) as u128,
    )
}

/// Normalized DS-SR: statistic `max_j (S_ij / S_i) N_i`.
pub fn run_nds_sr(
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::NdsSr;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let sizes = require_sizes(oracle, id, box_sizes)?;
    let outcome = successive_rejects(oracle, id, t, Allocation::Uniform, |tl, b| {
        Ok(normalized(tl, b, sizes[b]))
    })?;
    Ok(finish_box(oracle, outcome))
}

/// Expectation-normalized DS-SR: statistic `max_j S_ij N_i / E[S_i]`, with
/// `E[S_i]` the expected distinct count after the queries made so far.
pub fn run_ends_sr(
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::EndsSr;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let sizes = require_sizes(oracle, id, box_sizes)?;
    let outcome = successive_rejects(oracle, id, t, Allocation::Uniform, |tl, b| {
        let expected = expected_distinct(sizes[b], tl.queries(b));
        Ok(if expected > 0.0 {
            tl.max_distinct(b) as f64 * sizes[b] as f64 / expected
        } else {
            0.0
        })
    })?;
    Ok(finish_box(oracle, outcome))
}

/// Normalized DS-SR with each box size replaced by its estimate from the
/// box's own distinct count, refreshed every phase.
pub fn run_nds_sr_mle(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::NdsSrMle;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let outcome = successive_rejects(oracle, id, t, Allocation::Uniform, |tl, b| {
        let size = estimate_box_size(tl.box_distinct(b), tl.queries(b))?;
        Ok(normalized(tl, b, size))
    })?;
    Ok(finish_box(oracle, outcome))
}

/// Consecutive-collision SR: pulls are disjoint sample pairs, a collision is
/// a pair returning the same individual, and the box with most collisions
/// is rejected each phase.
pub fn run_cc_sr(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    let id = AlgorithmId::CcSr;
    require_setting(oracle, id)?;
    require_identity(oracle, id)?;
    let boxes = oracle.num_boxes();
    let minimum = 2 * boxes as u64 + 2;
    if t < minimum {
        return Err(AlgorithmError::BudgetTooSmall {
            algorithm: id,
            budget: t,
            minimum,
        });
    }
    // odd budgets drop the last query
    let schedule = schedule_for(id, t / 2, boxes)?;
    let mut tallies = Tallies::new(boxes, oracle.num_communities());
    let mut collisions = vec![0u64; boxes];
    let mut alive: Vec<usize> = (0..boxes).collect();
    let mut order = Vec::with_capacity(boxes - 1);
    let start = oracle.query_count();

    for r in 1..=schedule.phases() {
        for &b in &alive {
            for _ in 0..schedule.phase_pulls(r) {
                let first = oracle.sample(b)?;
                let second = oracle.sample(b)?;
                tallies.record(&first);
                tallies.record(&second);
                if first.pseudo_id == second.pseudo_id {
                    collisions[b] += 1;
                }
            }
        }
        let scored: Vec<(usize, u64)> = alive.iter().map(|&b| (b, collisions[b])).collect();
        let rejected = oracle.tie_break(&argmax_set(&scored));
        alive.retain(|&b| b != rejected);
        order.push(rejected);
    }

    let survivor = alive[0];
    let raw: Vec<(usize, u64)> = tallies
        .raw_row(survivor)
        .iter()
        .copied()
        .enumerate()
        .collect();
    let estimate = oracle.tie_break(&argmax_set(&raw));
    Ok(RunResult {
        estimate,
        queries_used: oracle.query_count() - start,
        elimination_order: Some(order),
        tallies: tallies.distinct_matrix(),
    })
}
