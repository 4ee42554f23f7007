use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    ExecutionMode, ModePolicy, OrchestrationPlan, OrchestratorError, RelevanceVerdict,
    VerdictSource,
};

/// Responder count at which `auto` switches to parallel execution.
pub const AUTO_PARALLEL_THRESHOLD: usize = 3;

/// Fisher–Yates from the last index down, drawing `j = next_u64() % (i + 1)`
/// from a ChaCha8 stream seeded with `seed`.
pub fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// `verdicts` must hold one entry per active agent, in roster order.
pub fn build_plan(
    round_id: impl Into<String>,
    mut verdicts: Vec<RelevanceVerdict>,
    policy: ModePolicy,
    rng_seed: u64,
) -> Result<OrchestrationPlan, OrchestratorError> {
    if verdicts.is_empty() {
        return Err(OrchestratorError::EmptyRoster);
    }
    let mut responders: Vec<String> = verdicts
        .iter()
        .filter(|v| v.respond)
        .map(|v| v.agent_id.clone())
        .collect();
    if responders.is_empty() {
        let best = verdicts
            .iter_mut()
            .reduce(|best, v| {
                let better =
                    v.score > best.score || (v.score == best.score && v.agent_id < best.agent_id);
                if better {
                    v
                } else {
                    best
                }
            })
            .expect("non-empty");
        best.respond = true;
        best.source = VerdictSource::Fallback;
        responders.push(best.agent_id.clone());
    }
    seeded_shuffle(&mut responders, rng_seed);
    let mode = match policy {
        ModePolicy::Sequential => ExecutionMode::Sequential,
        ModePolicy::Parallel => ExecutionMode::Parallel,
        ModePolicy::Auto if responders.len() >= AUTO_PARALLEL_THRESHOLD => ExecutionMode::Parallel,
        ModePolicy::Auto => ExecutionMode::Sequential,
    };
    Ok(OrchestrationPlan {
        round_id: round_id.into(),
        responders,
        mode,
        rng_seed,
        verdicts,
    })
}
