//! Successive-rejects phase lengths.
//!
//! With `b` arms and budget `t`, phase `r` (1-based, `r < b`) ends once
//! every surviving arm has been pulled
//! `K_r = ceil((t - b) / (log_bar(b) * (b - r + 1)))` times in total.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("need at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("budget {budget} must exceed the number of arms {arms}")]
    BudgetTooSmall { budget: u64, arms: usize },
}

/// `1/2 + sum_{i=2}^{b} 1/i`.
pub fn log_bar(b: usize) -> Result<f64, ScheduleError> {
    if b < 2 {
        return Err(ScheduleError::TooFewArms(b));
    }
    Ok(0.5 + (2..=b).map(|i| 1.0 / i as f64).sum::<f64>())
}

// Ceiling that absorbs rounding noise on exact integers.
fn ceil_tolerant(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SrSchedule {
    pub budget: u64,
    pub arms: usize,
    /// `K_0 = 0, K_1, …, K_{b-1}`.
    pub cumulative: Vec<u64>,
}

impl SrSchedule {
    pub fn phases(&self) -> usize {
        self.arms - 1
    }

    /// Pulls per surviving arm in phase `r` (1-based).
    pub fn phase_pulls(&self, r: usize) -> u64 {
        self.cumulative[r] - self.cumulative[r - 1]
    }

    pub fn per_phase_pulls(&self) -> Vec<u64> {
        (1..=self.phases()).map(|r| self.phase_pulls(r)).collect()
    }

    /// Arms alive during phase `r`.
    pub fn survivors(&self, r: usize) -> usize {
        self.arms - r + 1
    }

    /// Total queries: `sum_r (b - r + 1)(K_r - K_{r-1})`.
    pub fn total_consumption(&self) -> u64 {
        (1..=self.phases())
            .map(|r| self.survivors(r) as u64 * self.phase_pulls(r))
            .sum()
    }
}

pub fn sr_round_lengths(budget: u64, arms: usize) -> Result<SrSchedule, ScheduleError> {
    let lb = log_bar(arms)?;
    if budget <= arms as u64 {
        return Err(ScheduleError::BudgetTooSmall { budget, arms });
    }
    let spare = (budget - arms as u64) as f64;
    let mut cumulative = Vec::with_capacity(arms);
    cumulative.push(0);
    for r in 1..arms {
        cumulative.push(ceil_tolerant(spare / (lb * (arms - r + 1) as f64)));
    }
    let mut schedule = SrSchedule {
        budget,
        arms,
        cumulative,
    };
    // Ceilings add at most b - 1 queries on top of t - b, so this is a guard
    // rather than a regular path; trim the last phase if it ever overshoots.
    while schedule.total_consumption() > budget {
        let last = arms - 1;
        if schedule.cumulative[last] == schedule.cumulative[last - 1] {
            break;
        }
        schedule.cumulative[last] -= 1;
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_bar_values() {
        assert_eq!(log_bar(2).unwrap(), 1.0);
        assert!((log_bar(3).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        // 1/2 + 1/2 + 1/3 + 1/4 + 1/5 = 107/60
        assert!((log_bar(5).unwrap() - 107.0 / 60.0).abs() < 1e-15);
        assert_eq!(log_bar(1), Err(ScheduleError::TooFewArms(1)));
    }

    #[test]
    fn hand_schedules() {
        let s = sr_round_lengths(100, 4).unwrap();
        assert_eq!(s.cumulative, vec![0, 16, 21, 31]);
        assert_eq!(s.per_phase_pulls(), vec![16, 5, 10]);
        assert_eq!(s.total_consumption(), 99);

        // b = 2: (t - b) / (1 * 2)
        let s = sr_round_lengths(10, 2).unwrap();
        assert_eq!(s.cumulative, vec![0, 4]);

        assert_eq!(
            sr_round_lengths(4, 4),
            Err(ScheduleError::BudgetTooSmall { budget: 4, arms: 4 })
        );
    }

    proptest! {
        #[test]
        fn monotone_and_within_budget(b in 2usize..40, extra in 1u64..5000) {
            let t = b as u64 + extra;
            let s = sr_round_lengths(t, b).unwrap();
            prop_assert!(s.cumulative.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(s.total_consumption() <= t);
            let s2 = sr_round_lengths(t + 1, b).unwrap();
            for r in 1..b {
                prop_assert!(s2.cumulative[r] >= s.cumulative[r]);
            }
        }
    }
}
