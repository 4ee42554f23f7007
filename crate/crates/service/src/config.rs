use std::path::PathBuf;
use std::sync::Arc;

use crewroom_core::clock::{Clock, LogicalClock, SystemClock};
use crewroom_core::engine::{Engine, EngineConfig, EngineError, SeedSource};
use crewroom_core::provider::{Gateway, LiveConfig, ProviderError, ScriptedBehavior};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderMode {
    Live,
    Scripted,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(ProviderMode::Live),
            "scripted" => Ok(ProviderMode::Scripted),
            other => Err(format!(
                "unknown mode {other:?} (expected live or scripted)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub mode: ProviderMode,
    pub provider_script: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("scripted mode needs --provider-script")]
    MissingScript,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Scripted mode uses a logical clock so runs are reproducible; live mode
/// reads provider settings from the environment and fails naming the first
/// missing variable.
pub fn build_engine(config: &ServiceConfig) -> Result<Engine, ConfigError> {
    let (gateway, clock): (Gateway, Arc<dyn Clock>) = match config.mode {
        ProviderMode::Live => (
            Gateway::live(&LiveConfig::from_env()?),
            Arc::new(SystemClock),
        ),
        ProviderMode::Scripted => {
            let script = config
                .provider_script
                .as_ref()
                .ok_or(ConfigError::MissingScript)?;
            (
                Gateway::scripted(ScriptedBehavior::load(script)?)?,
                Arc::new(LogicalClock::default()),
            )
        }
    };
    let mut engine_config = EngineConfig::new(&config.data_dir, gateway, clock);
    engine_config.seeds = match config.seed {
        Some(seed) => SeedSource::Fixed(seed),
        None => SeedSource::Random,
    };
    Ok(Engine::open(engine_config)?)
}
