//! Building instances from record files: each data row is one individual,
//! grouped by a box column and a community column.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, InstanceError};

/// Share of malformed rows above which ingestion fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0} not found")]
    MissingColumn(ColumnRef),
    #[error("box and community columns are the same (index {0})")]
    SameColumn(usize),
    #[error("{malformed} of {rows} rows are malformed (limit 10%)")]
    TooManyMalformed { malformed: u64, rows: u64 },
    #[error("unknown normalization {0:?} (none, trim, trim+casefold)")]
    UnknownNormalization(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A column by header name or 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => write!(f, "{n:?}"),
        }
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

impl ColumnRef {
    /// Header names win; a name that matches no header but parses as an
    /// integer is taken as a position.
    fn resolve(&self, header: Option<&csv::StringRecord>) -> Result<usize, IngestError> {
        match self {
            ColumnRef::Index(i) => Ok(*i),
            ColumnRef::Name(name) => header
                .and_then(|h| h.iter().position(|field| field.trim() == name.trim()))
                .or_else(|| name.trim().parse().ok())
                .ok_or_else(|| IngestError::MissingColumn(self.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    #[default]
    None,
    Trim,
    TrimCasefold,
}

impl Normalization {
    pub fn apply(self, label: &str) -> String {
        match self {
            Normalization::None => label.to_string(),
            Normalization::Trim => label.trim().to_string(),
            Normalization::TrimCasefold => label.trim().to_lowercase(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Trim => "trim",
            Normalization::TrimCasefold => "trim+casefold",
        }
    }
}

impl FromStr for Normalization {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "trim" => Ok(Normalization::Trim),
            "trim+casefold" | "trim-casefold" | "casefold" => Ok(Normalization::TrimCasefold),
            _ => Err(IngestError::UnknownNormalization(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSpec {
    pub path: PathBuf,
    pub box_column: ColumnRef,
    pub community_column: ColumnRef,
    pub delimiter: u8,
    pub has_header: bool,
    pub normalization: Normalization,
}

impl IngestSpec {
    /// Comma-delimited with a header row and no normalization.
    pub fn new(
        path: impl Into<PathBuf>,
        box_column: impl Into<ColumnRef>,
        community_column: impl Into<ColumnRef>,
    ) -> Self {
        IngestSpec {
            path: path.into(),
            box_column: box_column.into(),
            community_column: community_column.into(),
            delimiter: b',',
            has_header: true,
            normalization: Normalization::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub instance: Instance,
    /// Rows that contributed an individual.
    pub rows: u64,
    /// Rows skipped: too few fields, undecodable, or an empty label.
    pub malformed: u64,
}

pub fn ingest_csv(spec: &IngestSpec) -> Result<IngestReport, IngestError> {
    let file = File::open(&spec.path).map_err(|source| IngestError::Io {
        path: spec.path.clone(),
        source,
    })?;
    ingest_reader(spec, file)
}

/// Same as [`ingest_csv`] but reads from `input`; `spec.path` is ignored.
pub fn ingest_reader<R: Read>(spec: &IngestSpec, input: R) -> Result<IngestReport, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(spec.has_header)
        .flexible(true)
        .from_reader(input);
    let header = if spec.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let box_col = spec.box_column.resolve(header.as_ref())?;
    let comm_col = spec.community_column.resolve(header.as_ref())?;
    if box_col == comm_col {
        return Err(IngestError::SameColumn(box_col));
    }
    if let Some(h) = &header {
        for (col, r) in [
            (box_col, &spec.box_column),
            (comm_col, &spec.community_column),
        ] {
            if col >= h.len() {
                return Err(IngestError::MissingColumn(r.clone()));
            }
        }
    }

    let mut counts: HashMap<(String, String), u64> = HashMap::new();
    let mut rows = 0u64;
    let mut malformed = 0u64;
    for record in reader.records() {
        let Ok(record) = record else {
            malformed += 1;
            continue;
        };
        let labels = (record.get(box_col), record.get(comm_col));
        let (Some(b), Some(c)) = labels else {
            malformed += 1;
            continue;
        };
        let (b, c) = (spec.normalization.apply(b), spec.normalization.apply(c));
        if b.is_empty() || c.is_empty() {
            malformed += 1;
            continue;
        }
        *counts.entry((b, c)).or_default() += 1;
        rows += 1;
    }

    let seen = rows + malformed;
    if seen > 0 && malformed as f64 > MAX_MALFORMED_FRACTION * seen as f64 {
        return Err(IngestError::TooManyMalformed {
            malformed,
            rows: seen,
        });
    }
    if rows == 0 {
        return Err(InstanceError::AllZero.into());
    }

    let index = |labels: BTreeSet<&String>| -> BTreeMap<String, usize> {
        labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect()
    };
    let boxes = index(counts.keys().map(|(b, _)| b).collect());
    let communities = index(counts.keys().map(|(_, c)| c).collect());
    let mut matrix = vec![vec![0i64; communities.len()]; boxes.len()];
    for ((b, c), n) in &counts {
        matrix[boxes[b]][communities[c]] = *n as i64;
    }
    let instance = Instance::new(
        matrix,
        boxes.into_keys().collect(),
        communities.into_keys().collect(),
    )?;
    Ok(IngestReport {
        instance,
        rows,
        malformed,
    })
}
