//! The sampling oracle.
//!
//! A query names a box; the oracle draws an individual uniformly at random
//! (with replacement) from that box and reveals its community. With
//! identity information it also attaches a pseudo-identity token and says
//! whether that individual has been seen before.
//!
//! Individuals of box `i` are indexed `0..N_i`, laid out community by
//! community, so the community of an individual is found by binary search
//! over the row's prefix sums.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Setting};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("box index {index} out of range ({boxes} boxes)")]
    BoxOutOfRange { index: usize, boxes: usize },
    #[error("box {0} is empty")]
    EmptyBox(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentityMode {
    Identity,
    Identityless,
}

/// Opaque per-individual token. Tokens are handed out in first-seen order
/// within each box; equal tokens mean the same individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PseudoId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub box_index: usize,
    pub community: usize,
    pub pseudo_id: Option<PseudoId>,
    pub first_time: Option<bool>,
}

/// One traced query, including the ground-truth individual index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: u64,
    pub observation: Observation,
    pub individual: u64,
}

struct BoxLayout {
    size: u64,
    // non-empty columns of the row and their cumulative end offsets
    columns: Vec<usize>,
    ends: Vec<u64>,
}

impl BoxLayout {
    fn new(row: &[u64]) -> Self {
        let mut columns = Vec::new();
        let mut ends = Vec::new();
        let mut acc = 0;
        for (j, &d) in row.iter().enumerate() {
            if d > 0 {
                acc += d;
                columns.push(j);
                ends.push(acc);
            }
        }
        BoxLayout {
            size: acc,
            columns,
            ends,
        }
    }

    fn community_of(&self, individual: u64) -> usize {
        self.columns[self.ends.partition_point(|&end| end <= individual)]
    }
}

pub struct Oracle {
    communities: usize,
    setting: Setting,
    mode: IdentityMode,
    layouts: Vec<BoxLayout>,
    // tokens[b][u] = 1 + first-seen ordinal of individual u, 0 if unseen
    tokens: Vec<Vec<u32>>,
    distinct: Vec<u64>,
    sampler: ChaCha8Rng,
    ties: ChaCha8Rng,
    queries: u64,
    trace: Option<Vec<TraceRecord>>,
}

impl Oracle {
    pub fn new(instance: &Instance, seed: u64, mode: IdentityMode) -> Self {
        let layouts: Vec<BoxLayout> = (0..instance.num_boxes())
            .map(|b| BoxLayout::new(instance.row(b)))
            .collect();
        let tokens = match mode {
            IdentityMode::Identity => layouts
                .iter()
                .map(|l| vec![0u32; l.size as usize])
                .collect(),
            IdentityMode::Identityless => Vec::new(),
        };
        Oracle {
            communities: instance.num_communities(),
            setting: instance.classify_setting(),
            mode,
            distinct: vec![0; layouts.len()],
            layouts,
            tokens,
            sampler: stream_rng(seed, Stream::Sampling),
            ties: stream_rng(seed, Stream::TieBreak),
            queries: 0,
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn num_boxes(&self) -> usize {
        self.layouts.len()
    }

    pub fn num_communities(&self) -> usize {
        self.communities
    }

    /// The structural setting is public knowledge; the counts are not.
    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn identity_mode(&self) -> IdentityMode {
        self.mode
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    /// Number of distinct individuals drawn so far from a box.
    pub fn distinct_seen(&self, box_index: usize) -> u64 {
        self.distinct[box_index]
    }

    pub fn sample(&mut self, box_index: usize) -> Result<Observation, OracleError> {
        let layout = self
            .layouts
            .get(box_index)
            .ok_or(OracleError::BoxOutOfRange {
                index: box_index,
                boxes: self.layouts.len(),
            })?;
        if layout.size == 0 {
            return Err(OracleError::EmptyBox(box_index));
        }
        let individual = self.sampler.random_range(0..layout.size);
        let community = layout.community_of(individual);
        self.queries += 1;

        let (pseudo_id, first_time) = match self.mode {
            IdentityMode::Identityless => (None, None),
            IdentityMode::Identity => {
                let slot = &mut self.tokens[box_index][individual as usize];
                let first = *slot == 0;
                if first {
                    self.distinct[box_index] += 1;
                    *slot = self.distinct[box_index] as u32;
                }
                let token = ((box_index as u64) << 32) | u64::from(*slot - 1);
                (Some(PseudoId(token)), Some(first))
            }
        };
        let observation = Observation {
            box_index,
            community,
            pseudo_id,
            first_time,
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                step: self.queries,
                observation,
                individual,
            });
        }
        Ok(observation)
    }

    /// Uniform choice among tie candidates, from the dedicated tie stream.
    /// A single candidate consumes no randomness.
    pub fn tie_break(&mut self, candidates: &[usize]) -> usize {
        match candidates {
            [] => panic!("tie_break needs at least one candidate"),
            [only] => *only,
            _ => *candidates.choose(&mut self.ties).expect("non-empty"),
        }
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    /// Writes the trace as CSV: `step,box,community,first_time`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["step", "box", "community", "first_time"])?;
        for rec in self.trace().unwrap_or(&[]) {
            let o = &rec.observation;
            writer.write_record([
                rec.step.to_string(),
                o.box_index.to_string(),
                o.community.to_string(),
                o.first_time.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
        writer.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn first_draw_is_new() {
        let d = Instance::from_counts(vec![vec![2, 0]]).unwrap();
        let mut o = Oracle::new(&d, 1, IdentityMode::Identity);
        let obs = o.sample(0).unwrap();
        assert_eq!(obs.community, 0);
        assert_eq!(obs.first_time, Some(true));
    }

    #[test]
    fn single_community_box() {
        let d = Instance::from_counts(vec![vec![0, 5]]).unwrap();
        let mut o = Oracle::new(&d, 3, IdentityMode::Identity);
        for _ in 0..50 {
            assert_eq!(o.sample(0).unwrap().community, 1);
        }
        assert_eq!(o.query_count(), 50);
    }

    #[test]
    fn errors() {
        let d = Instance::from_counts(vec![vec![1, 0], vec![0, 0]]).unwrap();
        let mut o = Oracle::new(&d, 0, IdentityMode::Identity);
        assert_eq!(
            o.sample(2),
            Err(OracleError::BoxOutOfRange { index: 2, boxes: 2 })
        );
        assert_eq!(o.sample(1), Err(OracleError::EmptyBox(1)));
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let d = Instance::from_counts(vec![vec![40, 30], vec![0, 25]]).unwrap();
        let run = |seed| {
            let mut o = Oracle::new(&d, seed, IdentityMode::Identity);
            (0..200)
                .map(|k| o.sample(k % 2).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn identityless_hides_identity() {
        let d = Instance::mixed(&[3, 4]).unwrap();
        let mut o = Oracle::new(&d, 5, IdentityMode::Identityless);
        for _ in 0..20 {
            let obs = o.sample(0).unwrap();
            assert_eq!(obs.pseudo_id, None);
            assert_eq!(obs.first_time, None);
        }
    }

    #[test]
    fn community_frequency_matches_composition() {
        // [[4,2]]: P(community 0) = 4/6, checked within 3 binomial sigma
        let d = Instance::mixed(&[4, 2]).unwrap();
        let mut o = Oracle::new(&d, 2024, IdentityMode::Identityless);
        let n = 100_000u64;
        let hits = (0..n)
            .filter(|_| o.sample(0).unwrap().community == 0)
            .count() as f64;
        let p = 4.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() < 3.0 * sigma, "hits={hits}");
    }

    #[test]
    fn pseudo_ids_match_ground_truth() {
        let d = Instance::from_counts(vec![vec![3, 2, 0], vec![0, 0, 4]]).unwrap();
        let mut o = Oracle::new(&d, 77, IdentityMode::Identity).with_trace();
        for k in 0..300 {
            o.sample(k % 2).unwrap();
        }
        let trace = o.trace().unwrap();
        let mut by_token: HashMap<(usize, PseudoId), u64> = HashMap::new();
        let mut by_individual: HashMap<(usize, u64), u64> = HashMap::new();
        let mut token_of: HashMap<(usize, u64), PseudoId> = HashMap::new();
        let mut seen_tokens = std::collections::HashSet::new();
        for rec in trace {
            let obs = rec.observation;
            let id = obs.pseudo_id.unwrap();
            *by_token.entry((obs.box_index, id)).or_default() += 1;
            *by_individual
                .entry((obs.box_index, rec.individual))
                .or_default() += 1;
            let prev = *token_of
                .entry((obs.box_index, rec.individual))
                .or_insert(id);
            assert_eq!(prev, id, "token must be stable per individual");
            assert_eq!(obs.first_time.unwrap(), seen_tokens.insert(id));
        }
        let mut a: Vec<u64> = by_token.values().copied().collect();
        let mut b: Vec<u64> = by_individual.values().copied().collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert!(o.distinct_seen(0) <= 5 && o.distinct_seen(1) <= 4);
    }

    #[test]
    fn collision_law() {
        // P(repeat | s distinct seen) = s / N
        let n = 8u64;
        let d = Instance::mixed(&[5, 3]).unwrap();
        let mut repeats = vec![0u64; n as usize + 1];
        let mut totals = vec![0u64; n as usize + 1];
        for seed in 0..4000 {
            let mut o = Oracle::new(&d, seed, IdentityMode::Identity);
            for _ in 0..12 {
                let s = o.distinct_seen(0) as usize;
                let first = o.sample(0).unwrap().first_time.unwrap();
                totals[s] += 1;
                if !first {
                    repeats[s] += 1;
                }
            }
        }
        for s in 1..n as usize {
            let p = s as f64 / n as f64;
            let t = totals[s] as f64;
            let sigma = (t * p * (1.0 - p)).sqrt();
            assert!(
                (repeats[s] as f64 - t * p).abs() < 4.0 * sigma + 1.0,
                "s={s} repeats={} total={t}",
                repeats[s]
            );
        }
    }

    #[test]
    fn trace_csv() {
        let d = Instance::mixed(&[2, 1]).unwrap();
        let mut o = Oracle::new(&d, 1, IdentityMode::Identity).with_trace();
        o.sample(0).unwrap();
        o.sample(0).unwrap();
        let mut buf = Vec::new();
        o.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,box,community,first_time");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,0,") && lines[1].ends_with(",true"));
    }
}
