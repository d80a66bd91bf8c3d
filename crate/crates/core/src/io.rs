//! Problem file format, version 1.
//!
//! ```json
//! {"version": 1, "dim": 2,
//!  "T": [[[1,0],[0,0]], [[0,0],[1,0]]],
//!  "P": [[[[-1,0],[0,0]], [[0,0],[2,0]]]]}
//! ```
//!
//! Matrices are row-major arrays of rows; each entry is `[re, im]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{HermitianMatrix, LinalgError, C64};
use crate::problem::{HqcqpProblem, ProblemError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("unsupported version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("{matrix}: expected {expected} rows, found {found}")]
    RowCount { matrix: String, expected: usize, found: usize },
    #[error("{matrix}: row {row} has {found} entries, expected {expected}")]
    RowLength { matrix: String, row: usize, expected: usize, found: usize },
    #[error("{matrix}: {source}")]
    Matrix { matrix: String, source: LinalgError },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

/// On-disk representation, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFileV1 {
    pub version: u32,
    pub dim: usize,
    #[serde(rename = "T")]
    pub t: RawMatrix,
    #[serde(rename = "P")]
    pub p: Vec<RawMatrix>,
}

fn to_raw(m: &HermitianMatrix) -> RawMatrix {
    m.to_rows().iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn from_raw(name: String, dim: usize, raw: &RawMatrix) -> Result<HermitianMatrix, FormatError> {
    if raw.len() != dim {
        return Err(FormatError::RowCount { matrix: name, expected: dim, found: raw.len() });
    }
    if let Some((row, r)) = raw.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(FormatError::RowLength { matrix: name, row, expected: dim, found: r.len() });
    }
    let rows: Vec<Vec<C64>> = raw.iter().map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect()).collect();
    HermitianMatrix::from_rows(&rows).map_err(|source| FormatError::Matrix { matrix: name, source })
}

impl ProblemFileV1 {
    pub fn from_problem(prob: &HqcqpProblem) -> Self {
        Self {
            version: FORMAT_VERSION,
            dim: prob.dim(),
            t: to_raw(prob.objective()),
            p: prob.constraints().iter().map(to_raw).collect(),
        }
    }

    pub fn into_problem(self) -> Result<HqcqpProblem, FormatError> {
        if self.version != FORMAT_VERSION {
            return Err(FormatError::Version(self.version));
        }
        let t = from_raw("T".into(), self.dim, &self.t)?;
        let p = self
            .p
            .iter()
            .enumerate()
            .map(|(i, m)| from_raw(format!("P[{i}]"), self.dim, m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HqcqpProblem::new(t, p)?)
    }
}

pub fn parse_problem(text: &str) -> Result<HqcqpProblem, FormatError> {
    let file: ProblemFileV1 = serde_json::from_str(text)
        .map_err(|e| FormatError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
    file.into_problem()
}

pub fn problem_to_json(prob: &HqcqpProblem) -> String {
    serde_json::to_string_pretty(&ProblemFileV1::from_problem(prob)).expect("finite matrices always serialize")
}
