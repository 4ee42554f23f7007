use serde::{Deserialize, Serialize};

/// Role-play vignette shown to the human participant. Agents never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioTag {
    Scenario1,
    Scenario2,
    Scenario3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub tag: ScenarioTag,
    pub title: &'static str,
    pub vignette: &'static str,
}

pub const SCENARIOS: [Scenario; 3] = [
    Scenario {
        tag: ScenarioTag::Scenario1,
        title: "Missing protective gear on site",
        vignette: "You run an excavator on a busy site and you are 27. Several people on your crew have \
                   stopped wearing harnesses and hard hats, and the supply trailer has been short on gloves \
                   and eye protection for weeks. You want to raise it without being labelled a troublemaker, \
                   and you are not sure what the rules actually require of your employer.",
    },
    Scenario {
        tag: ScenarioTag::Scenario2,
        title: "Back to work too soon after an injury",
        vignette: "You are a 45-year-old carpenter. A fall from a platform hurt your shoulder, and your \
                   doctor told you to rest, but money is tight and you are thinking about going back early. \
                   The crew jokes that everyone works hurt. The pain keeps you up at night and you feel \
                   anxious about losing hours or your spot on the team.",
    },
    Scenario {
        tag: ScenarioTag::Scenario3,
        title: "Worn out and overlooked",
        vignette: "You have operated cranes for 25 years and you are now 50. Newer hires keep getting \
                   promoted while you are handed the same heavy, repetitive jobs. You have little input into \
                   how work is assigned, quitting is not an option with a family at home, and lately it is hard \
                   to care about the job at all.",
    },
];

impl ScenarioTag {
    pub fn scenario(self) -> &'static Scenario {
        SCENARIOS
            .iter()
            .find(|s| s.tag == self)
            .expect("every tag has a scenario")
    }
}

impl std::str::FromStr for ScenarioTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scenario1" => Ok(ScenarioTag::Scenario1),
            "scenario2" => Ok(ScenarioTag::Scenario2),
            "scenario3" => Ok(ScenarioTag::Scenario3),
            other => Err(format!("unknown scenario tag {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for s in &SCENARIOS {
            let json = serde_json::to_string(&s.tag).unwrap();
            let parsed: ScenarioTag = json.trim_matches('"').parse().unwrap();
            assert_eq!(parsed, s.tag);
            assert_eq!(parsed.scenario().title, s.title);
        }
        assert!("none".parse::<ScenarioTag>().is_err());
    }
}
