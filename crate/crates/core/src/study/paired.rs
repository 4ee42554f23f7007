use serde::{Deserialize, Serialize};

use super::special::student_t_two_tailed;
use super::{mean, sample_variance, StudyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PairedT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub mean_a: f64,
    pub sd_a: f64,
    pub mean_b: f64,
    pub sd_b: f64,
    pub n: usize,
    pub t_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub test_kind: TestKind,
}

/// Paired t-test on `d = a − b`, two-tailed with n − 1 degrees of freedom.
pub fn paired_comparison(a: &[f64], b: &[f64]) -> Result<ComparisonSummary, StudyError> {
    if a.len() != b.len() {
        return Err(StudyError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(StudyError::TooFew {
            what: "pairs",
            needed: 2,
            got: n,
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StudyError::Invalid("scores must be finite".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let var_d = sample_variance(&d);
    if var_d == 0.0 {
        return Err(StudyError::ZeroVariance("paired differences"));
    }
    let t_stat = mean(&d) / (var_d / n as f64).sqrt();
    let df = n - 1;
    Ok(ComparisonSummary {
        mean_a: mean(a),
        sd_a: sample_variance(a).sqrt(),
        mean_b: mean(b),
        sd_b: sample_variance(b).sqrt(),
        n,
        t_stat,
        df,
        p_value: student_t_two_tailed(t_stat, df as f64),
        test_kind: TestKind::PairedT,
    })
}
