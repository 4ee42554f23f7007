//! Multi-agent group chat for domain-specific worker support.

pub mod clock;
pub mod conversation;
pub mod engine;
pub mod knowledge;
pub mod orchestrator;
pub mod provider;
pub mod replay;
pub mod scenario;
pub mod studio;
pub mod study;
