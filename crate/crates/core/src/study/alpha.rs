use serde::{Deserialize, Serialize};

use super::{sample_variance, StudyError, SurveyDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReliabilityLabel {
    Excellent,
    Good,
    Acceptable,
    BelowAcceptable,
}

impl ReliabilityLabel {
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha >= 0.9 {
            ReliabilityLabel::Excellent
        } else if alpha >= 0.8 {
            ReliabilityLabel::Good
        } else if alpha >= 0.7 {
            ReliabilityLabel::Acceptable
        } else {
            ReliabilityLabel::BelowAcceptable
        }
    }
}

impl std::fmt::Display for ReliabilityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReliabilityLabel::Excellent => "excellent",
            ReliabilityLabel::Good => "good",
            ReliabilityLabel::Acceptable => "acceptable",
            ReliabilityLabel::BelowAcceptable => "below-acceptable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub alpha: f64,
    pub k: usize,
    pub n: usize,
    pub label: ReliabilityLabel,
}

/// `α = k / (k − 1) × (1 − Σ var(item) / var(row total))`.
pub fn cronbach_alpha(dataset: &SurveyDataset) -> Result<AlphaReport, StudyError> {
    let (k, n) = (dataset.k(), dataset.n());
    if k < 2 {
        return Err(StudyError::TooFew {
            what: "items",
            needed: 2,
            got: k,
        });
    }
    if n < 2 {
        return Err(StudyError::TooFew {
            what: "respondents",
            needed: 2,
            got: n,
        });
    }
    let item_var: f64 = (0..k).map(|i| sample_variance(&dataset.column(i))).sum();
    let totals: Vec<f64> = dataset
        .responses
        .iter()
        .map(|row| row.iter().map(|&r| r as f64).sum())
        .collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(StudyError::ZeroVariance("total score"));
    }
    let k_f = k as f64;
    let alpha = k_f / (k_f - 1.0) * (1.0 - item_var / total_var);
    Ok(AlphaReport {
        alpha,
        k,
        n,
        label: ReliabilityLabel::for_alpha(alpha),
    })
}
