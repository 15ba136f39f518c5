use std::cmp::Ordering;

use crate::oracle::Observation;

/// Running per-(box, community) counts built from observations only.
#[derive(Debug, Clone)]
pub struct Tallies {
    communities: usize,
    /// Distinct individuals per (box, community), `S_ij`.
    distinct: Vec<u64>,
    /// Raw draws per (box, community).
    raw: Vec<u64>,
    /// Distinct individuals per box, `S_i`.
    box_distinct: Vec<u64>,
    /// Queries issued to each box.
    queries: Vec<u64>,
}

impl Tallies {
    pub fn new(boxes: usize, communities: usize) -> Self {
        Tallies {
            communities,
            distinct: vec![0; boxes * communities],
            raw: vec![0; boxes * communities],
            box_distinct: vec![0; boxes],
            queries: vec![0; boxes],
        }
    }

    pub fn record(&mut self, obs: &Observation) {
        let cell = obs.box_index * self.communities + obs.community;
        self.raw[cell] += 1;
        self.queries[obs.box_index] += 1;
        if obs.first_time == Some(true) {
            self.distinct[cell] += 1;
            self.box_distinct[obs.box_index] += 1;
        }
    }

    pub fn distinct_row(&self, b: usize) -> &[u64] {
        &self.distinct[b * self.communities..(b + 1) * self.communities]
    }

    pub fn raw_row(&self, b: usize) -> &[u64] {
        &self.raw[b * self.communities..(b + 1) * self.communities]
    }

    pub fn box_distinct(&self, b: usize) -> u64 {
        self.box_distinct[b]
    }

    pub fn queries(&self, b: usize) -> u64 {
        self.queries[b]
    }

    /// `max_j S_ij`.
    pub fn max_distinct(&self, b: usize) -> u64 {
        self.distinct_row(b).iter().copied().max().unwrap_or(0)
    }

    /// `sum_i S_ij` for every community.
    pub fn distinct_by_community(&self) -> Vec<u64> {
        let boxes = self.box_distinct.len();
        let mut totals = vec![0; self.communities];
        for b in 0..boxes {
            for (t, &s) in totals.iter_mut().zip(self.distinct_row(b)) {
                *t += s;
            }
        }
        totals
    }

    pub fn distinct_matrix(&self) -> Vec<Vec<u64>> {
        (0..self.box_distinct.len())
            .map(|b| self.distinct_row(b).to_vec())
            .collect()
    }

    pub fn raw_matrix(&self) -> Vec<Vec<u64>> {
        (0..self.box_distinct.len())
            .map(|b| self.raw_row(b).to_vec())
            .collect()
    }
}

/// Ordering used for elimination and decision statistics.
pub trait Score {
    fn cmp_score(&self, other: &Self) -> Ordering;
}

impl Score for u64 {
    fn cmp_score(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

impl Score for f64 {
    fn cmp_score(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
}

/// Exact non-negative fraction. A zero denominator reads as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Self {
        if den == 0 {
            Ratio { num: 0, den: 1 }
        } else {
            Ratio { num, den }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Score for Ratio {
    fn cmp_score(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Indices whose score equals the best under `want` (Greater for argmax,
/// Less for argmin).
pub fn extreme_set<S: Score>(scored: &[(usize, S)], want: Ordering) -> Vec<usize> {
    let Some((_, first)) = scored.first() else {
        return Vec::new();
    };
    let mut best = first;
    for (_, s) in scored {
        if s.cmp_score(best) == want {
            best = s;
        }
    }
    scored
        .iter()
        .filter(|(_, s)| s.cmp_score(best) == Ordering::Equal)
        .map(|&(i, _)| i)
        .collect()
}

pub fn argmax_set<S: Score>(scored: &[(usize, S)]) -> Vec<usize> {
    extreme_set(scored, Ordering::Greater)
}

pub fn argmin_set<S: Score>(scored: &[(usize, S)]) -> Vec<usize> {
    extreme_set(scored, Ordering::Less)
}

/// Splits `total` over `weights` proportionally: floors first, then one
/// extra unit each to the largest fractional remainders (lower index wins
/// equal remainders). Zero total weight yields all zeros.
pub fn largest_remainder(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut shares = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let scaled = total as u128 * w as u128;
        shares.push((scaled / sum) as u64);
        remainders.push((scaled % sum, i));
    }
    let left = total - shares.iter().sum::<u64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(left as usize) {
        shares[i] += 1;
    }
    shares
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_split() {
        assert_eq!(largest_remainder(9, &[6, 3]), vec![6, 3]);
        assert_eq!(largest_remainder(10, &[6, 3]), vec![7, 3]);
        assert_eq!(largest_remainder(10, &[5, 5]), vec![5, 5]);
        assert_eq!(largest_remainder(3, &[1, 1]), vec![2, 1]);
        assert_eq!(largest_remainder(0, &[1, 2]), vec![0, 0]);
        assert_eq!(largest_remainder(5, &[0, 0]), vec![0, 0]);
        assert_eq!(largest_remainder(7, &[1, 0, 3]).iter().sum::<u64>(), 7);
    }

    #[test]
    fn extremes() {
        let s = [(0, 3u64), (1, 7), (2, 7), (3, 1)];
        assert_eq!(argmax_set(&s), vec![1, 2]);
        assert_eq!(argmin_set(&s), vec![3]);
        let r = [
            (0, Ratio::new(3, 5)),
            (1, Ratio::new(6, 10)),
            (2, Ratio::new(1, 0)),
        ];
        assert_eq!(argmax_set(&r), vec![0, 1]);
        assert_eq!(argmin_set(&r), vec![2]);
    }
}
