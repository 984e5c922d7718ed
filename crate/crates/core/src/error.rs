use std::fmt;
use std::path::PathBuf;

/// Pipeline stage that produced an error during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Anchors,
    AnchorGraph,
    BlockSystem,
    Eigen,
    Extract,
    Encode,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Anchors => "anchors",
            Stage::AnchorGraph => "anchor-graph",
            Stage::BlockSystem => "block-system",
            Stage::Eigen => "eigen",
            Stage::Extract => "extract",
            Stage::Encode => "encode",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("dimension mismatch{}: expected {expected}, found {found}", fmt_row(.row))]
    DimensionMismatch {
        expected: usize,
        found: usize,
        row: Option<usize>,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("split leaves an empty partition")]
    EmptySplit,
    #[error("anchor count {m} exceeds the {n} available rows")]
    AnchorCountExceedsData { m: usize, n: usize },
    #[error("row {row} has zero total anchor similarity (sigma too small?)")]
    ZeroRowSimilarity { row: usize },
    #[error("anchor {anchor} receives no similarity mass from any row")]
    OrphanAnchor { anchor: usize },
    #[error("matrix of size {n} exceeds the materialization guard of {limit}")]
    SizeGuard { n: usize, limit: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("only {available} non-trivial eigenpairs available, {needed} needed")]
    TooFewEigenpairs { needed: usize, available: usize },
    #[error("covariance is singular beyond regularization")]
    SingularCovariance,
    #[error("labels missing for {0}")]
    MissingLabels(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

fn fmt_row(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::ZeroRowSimilarity { .. }
                | Error::OrphanAnchor { .. }
                | Error::NotSymmetric(_)
                | Error::TooFewEigenpairs { .. }
                | Error::SingularCovariance
        )
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
