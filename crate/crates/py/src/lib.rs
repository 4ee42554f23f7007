//! Python module `crewroom`.
//!
//! `Room` wraps a full engine (agents, private knowledge, conversations)
//! backed by a scripted or live provider. Free functions cover the pure
//! parts: chunking, direct-address detection, verdict parsing, seeded
//! shuffles and the survey statistics.

use std::path::PathBuf;
use std::sync::Arc;

use crewroom_core::clock::{LogicalClock, SystemClock};
use crewroom_core::engine::{Engine, EngineConfig, EngineError, NewConversation, SeedSource};
use crewroom_core::knowledge::chunk_document;
use crewroom_core::orchestrator::{self, ModePolicy};
use crewroom_core::provider::{Gateway, LiveConfig, ScriptedBehavior};
use crewroom_core::scenario::ScenarioTag;
use crewroom_core::studio::{bundled_presets, AgentPersona, PersonaSeed, StagePrompts};
use crewroom_core::study::{self, StudyError, SurveyDataset};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn engine_err(e: EngineError) -> PyErr {
    match e.code() {
        "not_found" => PyKeyError::new_err(e.to_string()),
        "conflict" | "invalid_request" | "empty_roster" => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn study_err(e: StudyError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_mode(mode: &str) -> PyResult<ModePolicy> {
    mode.parse().map_err(PyValueError::new_err)
}

/// A group-chat room persisted under `data_dir`.
#[pyclass(module = "crewroom")]
struct Room {
    engine: Arc<Engine>,
    runtime: tokio::runtime::Runtime,
}

impl Room {
    fn open(config: EngineConfig) -> PyResult<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let engine = Engine::open(config).map_err(engine_err)?;
        Ok(Room {
            engine: Arc::new(engine),
            runtime,
        })
    }
}

#[pymethods]
impl Room {
    /// Room driven by a scripted provider file, with a logical clock.
    #[staticmethod]
    #[pyo3(signature = (data_dir, script, seed=None))]
    fn scripted(data_dir: PathBuf, script: PathBuf, seed: Option<u64>) -> PyResult<Self> {
        let behavior =
            ScriptedBehavior::load(&script).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let gateway =
            Gateway::scripted(behavior).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let mut config = EngineConfig::new(data_dir, gateway, Arc::new(LogicalClock::default()));
        config.seeds = seed.map_or(SeedSource::Random, SeedSource::Fixed);
        Room::open(config)
    }

    /// Room using the live provider configured through CREWROOM_* variables.
    #[staticmethod]
    #[pyo3(signature = (data_dir, seed=None))]
    fn live(data_dir: PathBuf, seed: Option<u64>) -> PyResult<Self> {
        let live = LiveConfig::from_env().map_err(|e| PyValueError::new_err(e.to_string()))?;
        let mut config = EngineConfig::new(data_dir, Gateway::live(&live), Arc::new(SystemClock));
        config.seeds = seed.map_or(SeedSource::Random, SeedSource::Fixed);
        Room::open(config)
    }

    #[pyo3(signature = (name, occupation="", personality="", conversation_goals=""))]
    fn create_agent<'py>(
        &self,
        py: Python<'py>,
        name: &str,
        occupation: &str,
        personality: &str,
        conversation_goals: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let seed = PersonaSeed::new(name)
            .occupation(occupation)
            .personality(personality)
            .goals(conversation_goals);
        let engine = self.engine.clone();
        let agent = py
            .detach(|| self.runtime.block_on(engine.create_agent(seed)))
            .map_err(engine_err)?;
        to_py(py, &agent)
    }

    fn list_agents<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.engine.list_agents())
    }

    fn delete_agent(&self, py: Python<'_>, agent_id: &str) -> PyResult<()> {
        let engine = self.engine.clone();
        py.detach(|| self.runtime.block_on(engine.delete_agent(agent_id)))
            .map_err(engine_err)
    }

    /// Returns the number of chunks added.
    fn upload_knowledge(
        &self,
        py: Python<'_>,
        agent_id: &str,
        doc_id: &str,
        text: &str,
    ) -> PyResult<usize> {
        let engine = self.engine.clone();
        py.detach(|| {
            self.runtime
                .block_on(engine.upload_knowledge(agent_id, doc_id, text))
        })
        .map_err(engine_err)
    }

    /// Installs the bundled presets and returns their agent ids.
    fn install_presets(&self, py: Python<'_>) -> PyResult<Vec<String>> {
        let engine = self.engine.clone();
        let agents: Vec<AgentPersona> = py
            .detach(|| {
                self.runtime
                    .block_on(engine.install_presets(&bundled_presets()))
            })
            .map_err(engine_err)?;
        Ok(agents.into_iter().map(|a| a.agent_id).collect())
    }

    /// Returns the new conversation id.
    #[pyo3(signature = (roster=Vec::new(), scenario_tag=None, baseline=false))]
    fn create_conversation(
        &self,
        roster: Vec<String>,
        scenario_tag: Option<&str>,
        baseline: bool,
    ) -> PyResult<String> {
        let scenario_tag = scenario_tag
            .map(|t| t.parse::<ScenarioTag>().map_err(PyValueError::new_err))
            .transpose()?;
        let record = self
            .engine
            .create_conversation(NewConversation {
                roster,
                scenario_tag,
                baseline,
            })
            .map_err(engine_err)?;
        Ok(record.conversation_id)
    }

    /// Runs one round and returns `(round, events)`.
    #[pyo3(signature = (conversation_id, text, mode="auto", seed=None))]
    fn post_message<'py>(
        &self,
        py: Python<'py>,
        conversation_id: &str,
        text: &str,
        mode: &str,
        seed: Option<u64>,
    ) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
        let policy = parse_mode(mode)?;
        let engine = self.engine.clone();
        let mut events = Vec::new();
        let round = py
            .detach(|| {
                self.runtime.block_on(engine.post_message(
                    conversation_id,
                    text,
                    policy,
                    seed,
                    &mut |e| events.push(e),
                ))
            })
            .map_err(engine_err)?;
        Ok((to_py(py, &round)?, to_py(py, &events)?))
    }

    #[pyo3(signature = (conversation_id, format="text"))]
    fn transcript<'py>(
        &self,
        py: Python<'py>,
        conversation_id: &str,
        format: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        match format {
            "text" => Ok(pyo3::types::PyString::new(
                py,
                &self
                    .engine
                    .export_text(conversation_id)
                    .map_err(engine_err)?,
            )
            .into_any()),
            "structured" => {
                let body = self
                    .engine
                    .export_structured(conversation_id)
                    .map_err(engine_err)?;
                py.import("json")?.call_method1("loads", (body,))
            }
            other => Err(PyValueError::new_err(format!("unknown format {other:?}"))),
        }
    }
}

/// Character windows as `(start, end, text)` triples.
#[pyfunction]
#[pyo3(signature = (text, chunk_size=800, overlap=200))]
fn chunk_text(
    text: &str,
    chunk_size: usize,
    overlap: usize,
) -> PyResult<Vec<(usize, usize, String)>> {
    let spans = chunk_document(text, chunk_size, overlap)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(spans
        .into_iter()
        .map(|s| (s.char_start, s.char_end, s.text))
        .collect())
}

fn named_agents(names: &[String]) -> Vec<AgentPersona> {
    names
        .iter()
        .map(|n| AgentPersona {
            agent_id: n.clone(),
            seed: PersonaSeed::new(n.as_str()),
            description: String::new(),
            stage_prompts: StagePrompts {
                gating_prompt: String::new(),
                response_prompt: String::new(),
            },
            collection_id: None,
        })
        .collect()
}

/// Names from `names` that `text` addresses directly.
#[pyfunction]
fn detect_direct_address(text: &str, names: Vec<String>) -> Vec<String> {
    orchestrator::detect_direct_address(text, &named_agents(&names))
        .into_iter()
        .collect()
}

/// `(respond, score, reason)` or `None` if no line follows the grammar.
#[pyfunction]
fn parse_verdict(reply: &str) -> Option<(bool, f64, String)> {
    orchestrator::parse_verdict(reply).map(|v| (v.respond, v.score, v.reason))
}

/// The seeded Fisher–Yates order used for responder plans.
#[pyfunction]
fn seeded_shuffle(items: Vec<String>, seed: u64) -> Vec<String> {
    let mut items = items;
    orchestrator::seeded_shuffle(&mut items, seed);
    items
}

#[pyfunction]
fn sus_score(responses: Vec<u8>) -> PyResult<f64> {
    study::sus_score(&responses).map_err(study_err)
}

/// `(grade, letter_family)`.
#[pyfunction]
fn sus_grade(score: f64) -> PyResult<(String, String)> {
    let g = study::sus_grade(score).map_err(study_err)?;
    Ok((g.grade, g.family.to_string()))
}

fn dataset(rows: Vec<Vec<u8>>) -> PyResult<SurveyDataset> {
    let k = rows.first().map_or(0, Vec::len);
    SurveyDataset::new(
        (1..=rows.len()).map(|i| format!("P{i}")).collect(),
        (1..=k).map(|i| format!("q{i}")).collect(),
        rows,
        None,
    )
    .map_err(study_err)
}

/// Cronbach's alpha for an n × k list of 1–5 responses.
#[pyfunction]
fn cronbach_alpha<'py>(py: Python<'py>, rows: Vec<Vec<u8>>) -> PyResult<Bound<'py, PyAny>> {
    let report = study::cronbach_alpha(&dataset(rows)?).map_err(study_err)?;
    to_py(py, &report)
}

/// Paired t-test of `a` against `b`.
#[pyfunction]
fn paired_comparison<'py>(
    py: Python<'py>,
    a: Vec<f64>,
    b: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let summary = study::paired_comparison(&a, &b).map_err(study_err)?;
    to_py(py, &summary)
}

#[pymodule]
fn crewroom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Room>()?;
    m.add_function(wrap_pyfunction!(chunk_text, m)?)?;
    m.add_function(wrap_pyfunction!(detect_direct_address, m)?)?;
    m.add_function(wrap_pyfunction!(parse_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(seeded_shuffle, m)?)?;
    m.add_function(wrap_pyfunction!(sus_score, m)?)?;
    m.add_function(wrap_pyfunction!(sus_grade, m)?)?;
    m.add_function(wrap_pyfunction!(cronbach_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(paired_comparison, m)?)?;
    Ok(())
}
