//! Mode estimators.
//!
//! Every estimator talks to the world only through an [`Oracle`]: it learns
//! the number of boxes and communities, the structural setting, and, when
//! granted, the box sizes. Counts are never visible.

mod mixed;
mod single_phase;
pub mod size;
mod sr;
pub mod tally;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Setting;
use crate::oracle::{IdentityMode, Oracle, OracleError};
use crate::schedule::ScheduleError;

pub use mixed::{run_dsm, run_sfm};
pub use single_phase::{run_ds_pe, run_ds_ue, run_ends_ue, run_nds_ue};
pub use size::{estimate_box_size, expected_distinct, SizeEstimateError};
pub use sr::{
    run_cc_sr, run_ds_psr, run_ds_sr_box, run_ds_sr_separated, run_ends_sr, run_nds_sr,
    run_nds_sr_mle,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgorithmError {
    #[error("{algorithm} does not apply to a {setting:?} instance")]
    NotApplicable {
        algorithm: AlgorithmId,
        setting: Setting,
    },
    #[error("{0} needs identity information (pseudo-identities)")]
    IdentityRequired(AlgorithmId),
    #[error("{0} needs the box sizes")]
    BoxSizesRequired(AlgorithmId),
    #[error("box sizes list has {found} entries for {expected} boxes")]
    BoxSizesLength { expected: usize, found: usize },
    #[error("{algorithm}: budget {budget} below the minimum {minimum}")]
    BudgetTooSmall {
        algorithm: AlgorithmId,
        budget: u64,
        minimum: u64,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    SizeEstimate(#[from] SizeEstimateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmId {
    #[serde(rename = "SFM")]
    Sfm,
    #[serde(rename = "DSM")]
    Dsm,
    #[serde(rename = "CC_SR")]
    CcSr,
    #[serde(rename = "DS_SR_SEP")]
    DsSrSep,
    #[serde(rename = "DS_SR_BOX")]
    DsSrBox,
    #[serde(rename = "DS_PSR")]
    DsPsr,
    #[serde(rename = "NDS_SR")]
    NdsSr,
    #[serde(rename = "ENDS_SR")]
    EndsSr,
    #[serde(rename = "NDS_SR_MLE")]
    NdsSrMle,
    #[serde(rename = "DS_UE")]
    DsUe,
    #[serde(rename = "DS_PE")]
    DsPe,
    #[serde(rename = "NDS_UE")]
    NdsUe,
    #[serde(rename = "ENDS_UE")]
    EndsUe,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 13] = [
        AlgorithmId::Sfm,
        AlgorithmId::Dsm,
        AlgorithmId::CcSr,
        AlgorithmId::DsSrSep,
        AlgorithmId::DsSrBox,
        AlgorithmId::DsPsr,
        AlgorithmId::NdsSr,
        AlgorithmId::EndsSr,
        AlgorithmId::NdsSrMle,
        AlgorithmId::DsUe,
        AlgorithmId::DsPe,
        AlgorithmId::NdsUe,
        AlgorithmId::EndsUe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Sfm => "SFM",
            AlgorithmId::Dsm => "DSM",
            AlgorithmId::CcSr => "CC_SR",
            AlgorithmId::DsSrSep => "DS_SR_SEP",
            AlgorithmId::DsSrBox => "DS_SR_BOX",
            AlgorithmId::DsPsr => "DS_PSR",
            AlgorithmId::NdsSr => "NDS_SR",
            AlgorithmId::EndsSr => "ENDS_SR",
            AlgorithmId::NdsSrMle => "NDS_SR_MLE",
            AlgorithmId::DsUe => "DS_UE",
            AlgorithmId::DsPe => "DS_PE",
            AlgorithmId::NdsUe => "NDS_UE",
            AlgorithmId::EndsUe => "ENDS_UE",
        }
    }

    /// Stable ordinal used in seed derivation.
    pub fn ordinal(self) -> u64 {
        Self::ALL.iter().position(|&a| a == self).expect("listed") as u64
    }

    pub fn accepts(self, setting: Setting) -> bool {
        use AlgorithmId::*;
        match self {
            Sfm | Dsm => setting == Setting::Mixed,
            CcSr | DsSrSep => setting == Setting::Separated,
            DsSrBox | DsPsr | NdsSr | EndsSr | NdsSrMle => {
                matches!(setting, Setting::Separated | Setting::DisjointBox)
            }
            DsUe | DsPe | NdsUe | EndsUe => true,
        }
    }

    pub fn requires_box_sizes(self) -> bool {
        use AlgorithmId::*;
        matches!(self, DsPsr | NdsSr | EndsSr | DsPe | NdsUe | EndsUe)
    }

    /// Sampling model the estimator runs under.
    pub fn identity_mode(self) -> IdentityMode {
        match self {
            AlgorithmId::Sfm => IdentityMode::Identityless,
            _ => IdentityMode::Identity,
        }
    }

    pub fn check(self, setting: Setting, knowledge: KnowledgeMode) -> Result<(), AlgorithmError> {
        if !self.accepts(setting) {
            return Err(AlgorithmError::NotApplicable {
                algorithm: self,
                setting,
            });
        }
        if self.requires_box_sizes() && !knowledge.box_sizes_known {
            return Err(AlgorithmError::BoxSizesRequired(self));
        }
        Ok(())
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown algorithm {0:?}")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for AlgorithmId {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == wanted)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

/// What the agent knows besides the oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeMode {
    pub box_sizes_known: bool,
}

impl KnowledgeMode {
    pub const BLIND: KnowledgeMode = KnowledgeMode {
        box_sizes_known: false,
    };
    pub const SIZES: KnowledgeMode = KnowledgeMode {
        box_sizes_known: true,
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub estimate: usize,
    pub queries_used: u64,
    /// Boxes in the order they were rejected (SR estimators only).
    pub elimination_order: Option<Vec<usize>>,
    /// Final per-(box, community) tallies: distinct individuals, or raw draw
    /// counts for SFM which has no identity information.
    pub tallies: Vec<Vec<u64>>,
}

fn require_setting(oracle: &Oracle, algorithm: AlgorithmId) -> Result<(), AlgorithmError> {
    let setting = oracle.setting();
    if algorithm.accepts(setting) {
        Ok(())
    } else {
        Err(AlgorithmError::NotApplicable { algorithm, setting })
    }
}

fn require_identity(oracle: &Oracle, algorithm: AlgorithmId) -> Result<(), AlgorithmError> {
    match oracle.identity_mode() {
        IdentityMode::Identity => Ok(()),
        IdentityMode::Identityless => Err(AlgorithmError::IdentityRequired(algorithm)),
    }
}

fn require_sizes<'s>(
    oracle: &Oracle,
    algorithm: AlgorithmId,
    box_sizes: Option<&'s [u64]>,
) -> Result<&'s [u64], AlgorithmError> {
    let sizes = box_sizes.ok_or(AlgorithmError::BoxSizesRequired(algorithm))?;
    if sizes.len() != oracle.num_boxes() {
        return Err(AlgorithmError::BoxSizesLength {
            expected: oracle.num_boxes(),
            found: sizes.len(),
        });
    }
    Ok(sizes)
}

/// Runs `algorithm` with budget `t`. `box_sizes` is consulted only by the
/// estimators that need it.
pub fn run(
    algorithm: AlgorithmId,
    oracle: &mut Oracle,
    t: u64,
    box_sizes: Option<&[u64]>,
) -> Result<RunResult, AlgorithmError> {
    use AlgorithmId::*;
    match algorithm {
        Sfm => run_sfm(oracle, t),
        Dsm => run_dsm(oracle, t),
        CcSr => run_cc_sr(oracle, t),
        DsSrSep => run_ds_sr_separated(oracle, t),
        DsSrBox => run_ds_sr_box(oracle, t),
        DsPsr => run_ds_psr(oracle, t, box_sizes),
        NdsSr => run_nds_sr(oracle, t, box_sizes),
        EndsSr => run_ends_sr(oracle, t, box_sizes),
        NdsSrMle => run_nds_sr_mle(oracle, t),
        DsUe => run_ds_ue(oracle, t),
        DsPe => run_ds_pe(oracle, t, box_sizes),
        NdsUe => run_nds_ue(oracle, t, box_sizes),
        EndsUe => run_ends_ue(oracle, t, box_sizes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in AlgorithmId::ALL {
            assert_eq!(a.name().parse::<AlgorithmId>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
        assert_eq!(
            "ds-sr-box".parse::<AlgorithmId>().unwrap(),
            AlgorithmId::DsSrBox
        );
        assert!("XYZ".parse::<AlgorithmId>().is_err());
    }

    #[test]
    fn applicability_matrix() {
        use AlgorithmId::*;
        assert!(Sfm.accepts(Setting::Mixed) && !Sfm.accepts(Setting::Separated));
        assert!(CcSr.accepts(Setting::Separated) && !CcSr.accepts(Setting::DisjointBox));
        assert!(DsPsr.accepts(Setting::Separated) && DsPsr.accepts(Setting::DisjointBox));
        assert!(!NdsSr.accepts(Setting::General) && !NdsSr.accepts(Setting::Mixed));
        for s in [
            Setting::Mixed,
            Setting::Separated,
            Setting::DisjointBox,
            Setting::General,
        ] {
            assert!(DsUe.accepts(s) && EndsUe.accepts(s));
        }
        assert_eq!(
            NdsSr.check(Setting::DisjointBox, KnowledgeMode::BLIND),
            Err(AlgorithmError::BoxSizesRequired(NdsSr))
        );
        assert!(NdsSrMle
            .check(Setting::DisjointBox, KnowledgeMode::BLIND)
            .is_ok());
    }
}
