//! Problem instances: the box × community count matrix.
//!
//! Row `i` is a box (a sampling domain), column `j` a community. Entry
//! `(i, j)` is the number of individuals of community `j` living in box `i`.
//! All indices are 0-based.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance has no boxes or no communities")]
    Empty,
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("negative count {value} at box {row}, community {col}")]
    NegativeEntry { row: usize, col: usize, value: i64 },
    #[error("all-zero instance: at least one individual is required")]
    AllZero,
    #[error("{kind} labels: expected {expected}, found {found}")]
    LabelCount {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("duplicate {kind} label {label:?}")]
    DuplicateLabel { kind: &'static str, label: String },
    #[error("instance io: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Structural class of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// A single box holding every community.
    Mixed,
    /// One community per box (after dropping empty rows and columns).
    Separated,
    /// Every community lives in exactly one box.
    DisjointBox,
    General,
}

impl Setting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Mixed => "Mixed",
            Setting::Separated => "Separated",
            Setting::DisjointBox => "DisjointBox",
            Setting::General => "General",
        }
    }
}

/// A validated, immutable instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    boxes: usize,
    communities: usize,
    // row-major, boxes × communities
    counts: Vec<u64>,
    box_labels: Vec<String>,
    community_labels: Vec<String>,
}

/// Derived sizes and the mode set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceSummary {
    pub box_sizes: Vec<u64>,
    pub community_sizes: Vec<u64>,
    pub total: u64,
    /// Indices of all communities of maximal size, ascending.
    pub mode_set: Vec<usize>,
}

impl InstanceSummary {
    pub fn is_mode(&self, community: usize) -> bool {
        self.mode_set.binary_search(&community).is_ok()
    }

    pub fn has_unique_mode(&self) -> bool {
        self.mode_set.len() == 1
    }
}

/// On-disk JSON layout. Omitted label lists get generated labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default)]
    pub boxes: Vec<String>,
    #[serde(default)]
    pub communities: Vec<String>,
    pub counts: Vec<Vec<i64>>,
}

fn check_labels(
    kind: &'static str,
    labels: &[String],
    expected: usize,
) -> Result<(), InstanceError> {
    if labels.len() != expected {
        return Err(InstanceError::LabelCount {
            kind,
            expected,
            found: labels.len(),
        });
    }
    let mut seen = HashSet::with_capacity(labels.len());
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(InstanceError::DuplicateLabel {
                kind,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

impl Instance {
    /// Validates a count matrix and its labels.
    pub fn new(
        counts: Vec<Vec<i64>>,
        box_labels: Vec<String>,
        community_labels: Vec<String>,
    ) -> Result<Self, InstanceError> {
        let boxes = counts.len();
        let communities = counts.first().map_or(0, Vec::len);
        if boxes == 0 || communities == 0 {
            return Err(InstanceError::Empty);
        }
        let mut flat = Vec::with_capacity(boxes * communities);
        for (row, values) in counts.iter().enumerate() {
            if values.len() != communities {
                return Err(InstanceError::Ragged {
                    row,
                    found: values.len(),
                    expected: communities,
                });
            }
            for (col, &value) in values.iter().enumerate() {
                if value < 0 {
                    return Err(InstanceError::NegativeEntry { row, col, value });
                }
                flat.push(value as u64);
            }
        }
        if flat.iter().all(|&v| v == 0) {
            return Err(InstanceError::AllZero);
        }
        check_labels("box", &box_labels, boxes)?;
        check_labels("community", &community_labels, communities)?;
        Ok(Instance {
            boxes,
            communities,
            counts: flat,
            box_labels,
            community_labels,
        })
    }

    /// Builds an instance with generated labels `B0, B1, …` and `C0, C1, …`.
    pub fn from_counts(counts: Vec<Vec<i64>>) -> Result<Self, InstanceError> {
        Self::from_file(InstanceFile {
            boxes: Vec::new(),
            communities: Vec::new(),
            counts,
        })
    }

    /// Single-box instance with the given community sizes.
    pub fn mixed(sizes: &[u64]) -> Result<Self, InstanceError> {
        Self::from_counts(vec![sizes.iter().map(|&d| d as i64).collect()])
    }

    /// One community per box, on the diagonal.
    pub fn separated(sizes: &[u64]) -> Result<Self, InstanceError> {
        let n = sizes.len();
        let counts = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { sizes[i] as i64 } else { 0 })
                    .collect()
            })
            .collect();
        Self::from_counts(counts)
    }

    /// Disjoint boxes: each inner slice lists the community sizes of one box.
    /// Communities are numbered box by box.
    pub fn disjoint_boxes(boxes: &[&[u64]]) -> Result<Self, InstanceError> {
        let m: usize = boxes.iter().map(|b| b.len()).sum();
        let mut counts = vec![vec![0i64; m]; boxes.len()];
        let mut col = 0;
        for (i, sizes) in boxes.iter().enumerate() {
            for &d in sizes.iter() {
                counts[i][col] = d as i64;
                col += 1;
            }
        }
        Self::from_counts(counts)
    }

    pub fn num_boxes(&self) -> usize {
        self.boxes
    }

    pub fn num_communities(&self) -> usize {
        self.communities
    }

    pub fn count(&self, b: usize, c: usize) -> u64 {
        self.counts[b * self.communities + c]
    }

    pub fn row(&self, b: usize) -> &[u64] {
        &self.counts[b * self.communities..(b + 1) * self.communities]
    }

    pub fn box_labels(&self) -> &[String] {
        &self.box_labels
    }

    pub fn community_labels(&self) -> &[String] {
        &self.community_labels
    }

    pub fn box_size(&self, b: usize) -> u64 {
        self.row(b).iter().sum()
    }

    pub fn box_sizes(&self) -> Vec<u64> {
        (0..self.boxes).map(|b| self.box_size(b)).collect()
    }

    pub fn community_sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.communities];
        for b in 0..self.boxes {
            for (s, &d) in sizes.iter_mut().zip(self.row(b)) {
                *s += d;
            }
        }
        sizes
    }

    pub fn summarize(&self) -> InstanceSummary {
        let box_sizes = self.box_sizes();
        let community_sizes = self.community_sizes();
        let total = box_sizes.iter().sum();
        let max = community_sizes.iter().copied().max().unwrap_or(0);
        let mode_set = community_sizes
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == max)
            .map(|(j, _)| j)
            .collect();
        InstanceSummary {
            box_sizes,
            community_sizes,
            total,
            mode_set,
        }
    }

    /// Checked in the order Mixed, Separated, DisjointBox, General.
    pub fn classify_setting(&self) -> Setting {
        if self.boxes == 1 {
            return Setting::Mixed;
        }
        let nonzero_in_row = |b: usize| self.row(b).iter().filter(|&&d| d > 0).count();
        let nonzero_in_col = |c: usize| (0..self.boxes).filter(|&b| self.count(b, c) > 0).count();

        let rows: Vec<usize> = (0..self.boxes).map(nonzero_in_row).collect();
        let cols: Vec<usize> = (0..self.communities).map(nonzero_in_col).collect();

        let live_rows = rows.iter().filter(|&&n| n > 0).count();
        let live_cols = cols.iter().filter(|&&n| n > 0).count();
        if rows.iter().all(|&n| n <= 1) && cols.iter().all(|&n| n <= 1) && live_rows == live_cols {
            return Setting::Separated;
        }
        if cols.iter().all(|&n| n == 1) {
            return Setting::DisjointBox;
        }
        Setting::General
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            boxes: self.box_labels.clone(),
            communities: self.community_labels.clone(),
            counts: (0..self.boxes)
                .map(|b| self.row(b).iter().map(|&d| d as i64).collect())
                .collect(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self, InstanceError> {
        let InstanceFile {
            mut boxes,
            mut communities,
            counts,
        } = file;
        if boxes.is_empty() {
            boxes = (0..counts.len()).map(|i| format!("B{i}")).collect();
        }
        if communities.is_empty() {
            let width = counts.first().map_or(0, Vec::len);
            communities = (0..width).map(|j| format!("C{j}")).collect();
        }
        Self::new(counts, boxes, communities)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}
