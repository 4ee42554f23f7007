//! Survey analysis: SUS scoring and curved grades, Cronbach's alpha and
//! paired comparisons. Every variance here is the sample (n − 1) estimator.

mod alpha;
mod dataset;
mod instrument;
mod paired;
pub mod special;
mod sus;

pub use alpha::{cronbach_alpha, AlphaReport, ReliabilityLabel};
pub use dataset::{Condition, SurveyDataset};
pub use instrument::{bundled_instruments, Instrument, InstrumentItem};
pub use paired::{paired_comparison, ComparisonSummary, TestKind};
pub use sus::{sus_grade, sus_score, GradeBand, GradeTable, SusGrade, SUS_ITEMS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("expected {expected} items, got {got}")]
    WrongItemCount { expected: usize, got: usize },
    #[error("response {value} outside the {min}-{max} scale")]
    ResponseOutOfRange { value: i64, min: u8, max: u8 },
    #[error("score {0} outside [0, 100]")]
    ScoreOutOfRange(f64),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("{0} has zero variance; the statistic is undefined")]
    ZeroVariance(&'static str),
    #[error("paired samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("unknown item label {0:?}")]
    UnknownItem(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator), two-pass.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
