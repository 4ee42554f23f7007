use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{slugify, PersonaSeed, StudioError};

/// A preset seed together with its bundled knowledge document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preset {
    pub seed: PersonaSeed,
    pub knowledge_doc_id: String,
    pub knowledge_text: String,
}

impl Preset {
    pub fn agent_id(&self) -> String {
        slugify(&self.seed.name)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    name: String,
    occupation: String,
    personality: String,
    conversation_goals: String,
    #[serde(default)]
    avatar_ref: Option<String>,
    knowledge: String,
}

const BUNDLED: [(&str, &str, &str, &str); 3] = [
    (
        "01-osh-specialist.toml",
        include_str!("../../../../fixtures/personas/01-osh-specialist.toml"),
        "osh-specialist.txt",
        include_str!("../../../../fixtures/knowledge/osh-specialist.txt"),
    ),
    (
        "02-hr-advisor.toml",
        include_str!("../../../../fixtures/personas/02-hr-advisor.toml"),
        "hr-advisor.txt",
        include_str!("../../../../fixtures/knowledge/hr-advisor.txt"),
    ),
    (
        "03-worker-peer.toml",
        include_str!("../../../../fixtures/personas/03-worker-peer.toml"),
        "worker-peer.txt",
        include_str!("../../../../fixtures/knowledge/worker-peer.txt"),
    ),
];

fn parse(
    persona_path: &Path,
    persona_text: &str,
    knowledge: impl FnOnce(&str) -> Result<String, StudioError>,
) -> Result<Preset, StudioError> {
    let fixture = |reason: String| StudioError::Fixture {
        path: persona_path.to_path_buf(),
        reason,
    };
    let file: PresetFile = toml::from_str(persona_text).map_err(|e| fixture(e.to_string()))?;
    let seed = PersonaSeed {
        name: file.name,
        occupation: file.occupation,
        personality: file.personality,
        conversation_goals: file.conversation_goals,
        avatar_ref: file.avatar_ref,
    };
    seed.validate().map_err(|e| fixture(e.to_string()))?;
    let knowledge_text = knowledge(&file.knowledge)?;
    if knowledge_text.trim().is_empty() {
        return Err(fixture(format!(
            "knowledge document {} is empty",
            file.knowledge
        )));
    }
    let knowledge_doc_id = Path::new(&file.knowledge)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(&file.knowledge)
        .to_string();
    Ok(Preset {
        seed,
        knowledge_doc_id,
        knowledge_text,
    })
}

/// Presets compiled into the binary from `fixtures/`.
pub fn bundled_presets() -> Vec<Preset> {
    BUNDLED
        .iter()
        .map(
            |(persona_name, persona_text, knowledge_name, knowledge_text)| {
                parse(Path::new(persona_name), persona_text, |referenced| {
                    assert_eq!(
                        referenced, *knowledge_name,
                        "bundled preset table out of sync"
                    );
                    Ok(knowledge_text.to_string())
                })
                .expect("bundled preset fixtures are valid")
            },
        )
        .collect()
}

/// Reads `<root>/personas/*.toml` in file-name order, resolving each
/// `knowledge` entry against `<root>/knowledge/`.
pub fn load_presets(root: &Path) -> Result<Vec<Preset>, StudioError> {
    let personas = root.join("personas");
    let knowledge_dir = root.join("knowledge");
    let read_dir = std::fs::read_dir(&personas).map_err(|e| StudioError::Fixture {
        path: personas.clone(),
        reason: e.to_string(),
    })?;
    let mut files: Vec<PathBuf> = read_dir
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(StudioError::Fixture {
            path: personas,
            reason: "no persona fixtures".into(),
        });
    }
    files
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|e| StudioError::Fixture {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            parse(path, &text, |name| {
                let kpath = knowledge_dir.join(name);
                std::fs::read_to_string(&kpath).map_err(|e| StudioError::Fixture {
                    path: kpath,
                    reason: e.to_string(),
                })
            })
        })
        .collect()
}
