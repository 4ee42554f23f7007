use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mean, sus_score, StudyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Baseline,
    Proposed,
}

/// Complete n × k matrix of 1–5 responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDataset {
    pub participants: Vec<String>,
    pub items: Vec<String>,
    pub responses: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

/// Header names accepted for an optional leading participant-id column.
const ID_HEADERS: [&str; 3] = ["participant", "participant_id", "id"];

impl SurveyDataset {
    pub fn new(
        participants: Vec<String>,
        items: Vec<String>,
        responses: Vec<Vec<u8>>,
        condition: Option<Condition>,
    ) -> Result<Self, StudyError> {
        if items.is_empty() {
            return Err(StudyError::TooFew {
                what: "items",
                needed: 1,
                got: 0,
            });
        }
        if responses.is_empty() {
            return Err(StudyError::TooFew {
                what: "respondents",
                needed: 1,
                got: 0,
            });
        }
        if participants.len() != responses.len() {
            return Err(StudyError::Invalid(format!(
                "{} participant ids for {} response rows",
                participants.len(),
                responses.len()
            )));
        }
        for (i, label) in items.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(StudyError::Invalid(format!(
                    "item {} has an empty label",
                    i + 1
                )));
            }
            if items[..i].contains(label) {
                return Err(StudyError::Invalid(format!(
                    "duplicate item label {label:?}"
                )));
            }
        }
        for row in &responses {
            if row.len() != items.len() {
                return Err(StudyError::WrongItemCount {
                    expected: items.len(),
                    got: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|r| !(1..=5).contains(*r)) {
                return Err(StudyError::ResponseOutOfRange {
                    value: bad as i64,
                    min: 1,
                    max: 5,
                });
            }
        }
        Ok(SurveyDataset {
            participants,
            items,
            responses,
            condition,
        })
    }

    /// CSV with a header row of item labels and one row of integer cells
    /// per participant. A leading `participant` column, if present, holds
    /// ids; otherwise rows are numbered `P1`, `P2`, ….
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, StudyError> {
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = csv
            .headers()
            .map_err(|e| StudyError::Invalid(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let has_ids = headers
            .first()
            .is_some_and(|h| ID_HEADERS.contains(&h.to_ascii_lowercase().as_str()));
        let items: Vec<String> = headers[usize::from(has_ids)..].to_vec();
        let mut participants = Vec::new();
        let mut responses = Vec::new();
        for (row_no, record) in csv.records().enumerate() {
            let record = record.map_err(|e| StudyError::Invalid(e.to_string()))?;
            let mut cells = record.iter();
            participants.push(if has_ids {
                cells.next().unwrap_or_default().to_string()
            } else {
                format!("P{}", row_no + 1)
            });
            let row = cells
                .map(|cell| {
                    let value: i64 = cell.parse().map_err(|_| {
                        StudyError::Invalid(format!(
                            "row {}: {cell:?} is not an integer",
                            row_no + 1
                        ))
                    })?;
                    u8::try_from(value)
                        .ok()
                        .filter(|v| (1..=5).contains(v))
                        .ok_or(StudyError::ResponseOutOfRange {
                            value,
                            min: 1,
                            max: 5,
                        })
                })
                .collect::<Result<Vec<u8>, _>>()?;
            responses.push(row);
        }
        SurveyDataset::new(participants, items, responses, None)
    }

    pub fn load(path: &Path) -> Result<Self, StudyError> {
        let file = std::fs::File::open(path).map_err(|e| StudyError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        SurveyDataset::from_csv(file)
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn k(&self) -> usize {
        self.items.len()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.responses.iter().map(|row| row[index] as f64).collect()
    }

    /// Sub-dataset restricted to `labels`, in the given order.
    pub fn select(&self, labels: &[&str]) -> Result<SurveyDataset, StudyError> {
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| {
                self.items
                    .iter()
                    .position(|i| i == l)
                    .ok_or_else(|| StudyError::UnknownItem(l.to_string()))
            })
            .collect::<Result<_, _>>()?;
        SurveyDataset::new(
            self.participants.clone(),
            idx.iter().map(|&i| self.items[i].clone()).collect(),
            self.responses
                .iter()
                .map(|row| idx.iter().map(|&i| row[i]).collect())
                .collect(),
            self.condition,
        )
    }

    /// Per-participant mean across items.
    pub fn row_means(&self) -> Vec<f64> {
        self.responses
            .iter()
            .map(|row| mean(&row.iter().map(|&r| r as f64).collect::<Vec<_>>()))
            .collect()
    }

    /// Per-participant SUS score; the dataset must have exactly 10 items.
    pub fn sus_scores(&self) -> Result<Vec<f64>, StudyError> {
        self.responses.iter().map(|row| sus_score(row)).collect()
    }
}
