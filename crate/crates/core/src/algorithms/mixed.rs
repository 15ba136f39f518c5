//! Single-box estimators: sample frequency and distinct-sample maximization.

use super::tally::{argmax_set, Score, Tallies};
use super::{require_identity, require_setting, AlgorithmError, AlgorithmId, RunResult};
use crate::oracle::Oracle;

/// Argmax over per-community scores, ties broken on the oracle's tie stream.
pub(super) fn pick_max<S: Score>(oracle: &mut Oracle, scores: Vec<S>) -> usize {
    let scored: Vec<(usize, S)> = scores.into_iter().enumerate().collect();
    let candidates = argmax_set(&scored);
    oracle.tie_break(&candidates)
}

fn draw_box(
    oracle: &mut Oracle,
    tallies: &mut Tallies,
    b: usize,
    n: u64,
) -> Result<(), AlgorithmError> {
    for _ in 0..n {
        let obs = oracle.sample(b)?;
        tallies.record(&obs);
    }
    Ok(())
}

pub(super) fn sample_boxes(
    oracle: &mut Oracle,
    tallies: &mut Tallies,
    allocation: &[(usize, u64)],
) -> Result<(), AlgorithmError> {
    for &(b, n) in allocation {
        draw_box(oracle, tallies, b, n)?;
    }
    Ok(())
}

/// Sample Frequency Maximization: the community drawn most often.
pub fn run_sfm(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    require_setting(oracle, AlgorithmId::Sfm)?;
    let mut tallies = Tallies::new(1, oracle.num_communities());
    draw_box(oracle, &mut tallies, 0, t)?;
    let estimate = pick_max(oracle, tallies.raw_row(0).to_vec());
    Ok(RunResult {
        estimate,
        queries_used: t,
        elimination_order: None,
        tallies: tallies.raw_matrix(),
    })
}

/// Distinct Samples Maximization: the community with most distinct
/// individuals seen.
pub fn run_dsm(oracle: &mut Oracle, t: u64) -> Result<RunResult, AlgorithmError> {
    require_setting(oracle, AlgorithmId::Dsm)?;
    require_identity(oracle, AlgorithmId::Dsm)?;
    let mut tallies = Tallies::new(1, oracle.num_communities());
    draw_box(oracle, &mut tallies, 0, t)?;
    let estimate = pick_max(oracle, tallies.distinct_row(0).to_vec());
    Ok(RunResult {
        estimate,
        queries_used: t,
        elimination_order: None,
        tallies: tallies.distinct_matrix(),
    })
}
