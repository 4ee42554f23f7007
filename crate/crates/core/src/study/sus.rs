use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::StudyError;

pub const SUS_ITEMS: usize = 10;

/// `2.5 × (Σ over odd items of (r − 1) + Σ over even items of (5 − r))`,
/// items in questionnaire order.
pub fn sus_score(responses: &[u8]) -> Result<f64, StudyError> {
    if responses.len() != SUS_ITEMS {
        return Err(StudyError::WrongItemCount {
            expected: SUS_ITEMS,
            got: responses.len(),
        });
    }
    let mut raw = 0u32;
    for (i, &r) in responses.iter().enumerate() {
        if !(1..=5).contains(&r) {
            return Err(StudyError::ResponseOutOfRange {
                value: r as i64,
                min: 1,
                max: 5,
            });
        }
        raw += if i % 2 == 0 {
            r as u32 - 1
        } else {
            5 - r as u32
        };
    }
    Ok(raw as f64 * 2.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeBand {
    pub grade: String,
    pub min: f64,
}

/// Curved grade bands, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeTable {
    #[serde(rename = "band")]
    pub bands: Vec<GradeBand>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SusGrade {
    /// Fine grade such as `A-`.
    pub grade: String,
    /// Letter family such as `A`.
    pub family: char,
}

static BUNDLED: LazyLock<GradeTable> = LazyLock::new(|| {
    GradeTable::from_toml(include_str!(
        "../../../../fixtures/instruments/sus-grades.toml"
    ))
    .expect("bundled grade table is valid")
});

impl GradeTable {
    pub fn bundled() -> &'static GradeTable {
        &BUNDLED
    }

    /// Bands must have strictly decreasing minimums ending at 0.
    pub fn from_toml(text: &str) -> Result<Self, StudyError> {
        let table: GradeTable =
            toml::from_str(text).map_err(|e| StudyError::Invalid(e.to_string()))?;
        if table.bands.is_empty() || table.bands.last().unwrap().min != 0.0 {
            return Err(StudyError::Invalid(
                "grade table must end with a band starting at 0".into(),
            ));
        }
        if table.bands.windows(2).any(|w| w[0].min <= w[1].min) {
            return Err(StudyError::Invalid(
                "grade band minimums must strictly decrease".into(),
            ));
        }
        if table.bands.iter().any(|b| b.grade.is_empty()) {
            return Err(StudyError::Invalid("empty grade label".into()));
        }
        Ok(table)
    }

    pub fn grade(&self, score: f64) -> Result<SusGrade, StudyError> {
        if !(0.0..=100.0).contains(&score) {
            return Err(StudyError::ScoreOutOfRange(score));
        }
        let band = self
            .bands
            .iter()
            .find(|b| score >= b.min)
            .expect("last band starts at 0");
        Ok(SusGrade {
            grade: band.grade.clone(),
            family: band.grade.chars().next().unwrap(),
        })
    }

    /// Position of a grade from the top (0 = best).
    pub fn rank(&self, grade: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.grade == grade)
    }
}

pub fn sus_grade(mean_score: f64) -> Result<SusGrade, StudyError> {
    GradeTable::bundled().grade(mean_score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(sus_score(&[5, 1, 5, 1, 5, 1, 5, 1, 5, 1]).unwrap(), 100.0);
        assert_eq!(sus_score(&[3; 10]).unwrap(), 50.0);
        assert_eq!(sus_score(&[5, 2, 4, 1, 5, 2, 4, 1, 5, 1]).unwrap(), 90.0);
        assert_eq!(sus_score(&[1, 5, 1, 5, 1, 5, 1, 5, 1, 5]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            sus_score(&[3; 9]),
            Err(StudyError::WrongItemCount { got: 9, .. })
        ));
        assert!(matches!(
            sus_score(&[3, 3, 3, 3, 3, 3, 3, 3, 3, 6]),
            Err(StudyError::ResponseOutOfRange { value: 6, .. })
        ));
        assert!(sus_score(&[0; 10]).is_err());
    }

    #[test]
    fn grades() {
        assert_eq!(sus_grade(84.58).unwrap().family, 'A');
        assert_eq!(sus_grade(0.0).unwrap().grade, "F");
        assert_eq!(sus_grade(100.0).unwrap().grade, "A+");
        assert_eq!(sus_grade(80.8).unwrap().grade, "A");
        assert_eq!(sus_grade(80.79).unwrap().grade, "A-");
        assert!(sus_grade(100.5).is_err());
        assert!(sus_grade(-1.0).is_err());
        assert!(sus_grade(f64::NAN).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(GradeTable::from_toml("[[band]]\ngrade='A'\nmin=50.0\n").is_err());
        assert!(GradeTable::from_toml(
            "[[band]]\ngrade='A'\nmin=0.0\n[[band]]\ngrade='B'\nmin=10.0\n"
        )
        .is_err());
        let t =
            GradeTable::from_toml("[[band]]\ngrade='P'\nmin=50.0\n[[band]]\ngrade='F'\nmin=0.0\n")
                .unwrap();
        assert_eq!(t.grade(49.9).unwrap().grade, "F");
    }
}
