use serde::{Deserialize, Serialize};

use super::{StudyError, SurveyDataset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentItem {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscale: Option<String>,
    pub text: String,
}

/// A questionnaire definition that datasets can be checked against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instrument {
    pub name: String,
    pub title: String,
    pub scale_min: u8,
    pub scale_max: u8,
    #[serde(rename = "item")]
    pub items: Vec<InstrumentItem>,
}

const BUNDLED: [&str; 3] = [
    include_str!("../../../../fixtures/instruments/sus.toml"),
    include_str!("../../../../fixtures/instruments/basic-needs.toml"),
    include_str!("../../../../fixtures/instruments/presence-trust.toml"),
];

pub fn bundled_instruments() -> Vec<Instrument> {
    BUNDLED
        .iter()
        .map(|text| Instrument::from_toml(text).expect("bundled instruments are valid"))
        .collect()
}

impl Instrument {
    pub fn from_toml(text: &str) -> Result<Self, StudyError> {
        let instrument: Instrument =
            toml::from_str(text).map_err(|e| StudyError::Invalid(e.to_string()))?;
        if instrument.items.is_empty() {
            return Err(StudyError::Invalid(format!(
                "instrument {} has no items",
                instrument.name
            )));
        }
        Ok(instrument)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.label.as_str()).collect()
    }

    /// Item labels belonging to `subscale`, in questionnaire order.
    pub fn subscale(&self, subscale: &str) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| i.subscale.as_deref() == Some(subscale))
            .map(|i| i.label.as_str())
            .collect()
    }

    /// Ok when every instrument item is a dataset column.
    pub fn check(&self, dataset: &SurveyDataset) -> Result<(), StudyError> {
        match self
            .items
            .iter()
            .find(|i| !dataset.items.contains(&i.label))
        {
            Some(missing) => Err(StudyError::UnknownItem(missing.label.clone())),
            None => Ok(()),
        }
    }
}
