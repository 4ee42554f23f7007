use std::path::{Path, PathBuf};
use std::sync::Arc;

use crewroom_core::clock::LogicalClock;
use crewroom_core::engine::{
    Engine, EngineConfig, EngineError, NewConversation, RoundEvent, RoundEventKind, SeedSource,
};
use crewroom_core::orchestrator::ModePolicy;
use crewroom_core::provider::{Gateway, ScriptedBehavior};
use crewroom_core::studio::{bundled_presets, PersonaSeed};

fn script() -> ScriptedBehavior {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/replays/room.script.toml");
    ScriptedBehavior::load(&path).unwrap()
}

fn engine(dir: &Path) -> Engine {
    let gateway = Gateway::scripted(script()).unwrap();
    let mut config = EngineConfig::new(dir, gateway, Arc::new(LogicalClock::default()));
    config.seeds = SeedSource::Fixed(42);
    Engine::open(config).unwrap()
}

async fn room(engine: &Engine) -> Vec<String> {
    let mut ids: Vec<String> = engine
        .install_presets(&bundled_presets())
        .await
        .unwrap()
        .into_iter()
        .map(|a| a.agent_id)
        .collect();
    let alice = engine
        .create_agent(PersonaSeed::new("Alice").occupation("site supervisor"))
        .await
        .unwrap();
    ids.push(alice.agent_id);
    ids
}

fn conversation(engine: &Engine, roster: Vec<String>) -> String {
    engine
        .create_conversation(NewConversation {
            roster,
            scenario_tag: None,
            baseline: false,
        })
        .unwrap()
        .conversation_id
}

#[tokio::test]
async fn agent_crud_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let ann = engine
        .create_agent(PersonaSeed::new("Ann").occupation("crane operator"))
        .await
        .unwrap();
    assert_eq!(ann.agent_id, "ann");
    assert!(ann.description.starts_with("Ann is a crane operator"));
    assert_eq!(ann.collection_id.as_deref(), Some("ann"));
    assert!(engine.knowledge().contains("ann"));

    let dup = engine
        .create_agent(PersonaSeed::new("ANN").occupation("x"))
        .await
        .unwrap_err();
    assert_eq!(dup.code(), "conflict");
    let reserved = engine
        .create_agent(PersonaSeed::new("User").occupation("x"))
        .await
        .unwrap_err();
    assert_eq!(reserved.code(), "conflict");
    let empty = engine
        .create_agent(PersonaSeed::new("  "))
        .await
        .unwrap_err();
    assert_eq!(empty.code(), "invalid_request");

    engine.delete_agent("ann").await.unwrap();
    assert!(matches!(
        engine.agent("ann"),
        Err(EngineError::NotFound { .. })
    ));
    assert!(!engine.knowledge().contains("ann"));
    // the retired id is never handed out again
    let again = engine
        .create_agent(PersonaSeed::new("Ann").occupation("x"))
        .await
        .unwrap();
    assert_eq!(again.agent_id, "ann-2");
    assert_eq!(
        engine.delete_agent("ghost").await.unwrap_err().code(),
        "not_found"
    );

    drop(engine);
    let reopened = self::engine(dir.path());
    let ids: Vec<String> = reopened
        .list_agents()
        .into_iter()
        .map(|a| a.agent_id)
        .collect();
    assert_eq!(ids, ["ann-2"]);
}

#[tokio::test]
async fn knowledge_upload_chunks_and_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let ann = engine
        .create_agent(PersonaSeed::new("Ann").occupation("x"))
        .await
        .unwrap();
    let text: String = "scaffold tags are checked each morning. "
        .chars()
        .cycle()
        .take(2000)
        .collect();
    assert_eq!(
        engine
            .upload_knowledge(&ann.agent_id, "guide", &text)
            .await
            .unwrap(),
        3
    );
    assert_eq!(engine.knowledge().chunk_count("ann").unwrap(), 3);
    let dup = engine
        .upload_knowledge(&ann.agent_id, "guide", &text)
        .await
        .unwrap_err();
    assert_eq!(dup.code(), "conflict");
    let missing = engine
        .upload_knowledge("nobody", "guide", &text)
        .await
        .unwrap_err();
    assert_eq!(missing.code(), "not_found");
}

#[tokio::test]
async fn conversation_validation() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let ids = room(&engine).await;
    assert_eq!(
        engine
            .create_conversation(NewConversation {
                roster: vec!["ghost".into()],
                scenario_tag: None,
                baseline: false
            })
            .unwrap_err()
            .code(),
        "not_found"
    );
    assert_eq!(
        engine
            .create_conversation(NewConversation {
                roster: vec![ids[0].clone(), ids[0].clone()],
                scenario_tag: None,
                baseline: false
            })
            .unwrap_err()
            .code(),
        "conflict"
    );
    let conv = conversation(&engine, ids);
    let err = engine
        .post_message(&conv, "   ", ModePolicy::Auto, None, &mut |_| {})
        .await
        .unwrap_err();
    assert_eq!(err.code(), "invalid_request");
    let err = engine
        .post_message("conv-9999", "hi", ModePolicy::Auto, None, &mut |_| {})
        .await
        .unwrap_err();
    assert_eq!(err.code(), "not_found");
}

#[tokio::test]
async fn events_follow_protocol_order_and_match_commit() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let conv = conversation(&engine, room(&engine).await);
    let mut events: Vec<RoundEvent> = Vec::new();
    let round = engine
        .post_message(
            &conv,
            "I also hurt my shoulder last month and feel pressured to come back early.",
            ModePolicy::Parallel,
            None,
            &mut |e| events.push(e),
        )
        .await
        .unwrap();
    let kinds: Vec<RoundEventKind> = events.iter().map(|e| e.event).collect();
    let n = round.replies.len();
    assert_eq!(n, 3);
    let mut want = vec![RoundEventKind::RoundStarted];
    want.extend(std::iter::repeat_n(RoundEventKind::AgentSelected, n));
    want.extend(std::iter::repeat_n(RoundEventKind::AgentReply, n));
    want.push(RoundEventKind::RoundComplete);
    assert_eq!(kinds, want);

    let selected: Vec<_> = events[1..=n]
        .iter()
        .map(|e| e.agent_id.clone().unwrap())
        .collect();
    assert_eq!(selected, round.plan.responders);
    let streamed: Vec<_> = events.iter().filter_map(RoundEvent::message).collect();
    let stored = engine.conversation(&conv).unwrap();
    let committed = stored.rounds().last().unwrap();
    assert_eq!(streamed, committed.replies);
    assert_eq!(events.last().unwrap().payload["seq"], 2);
}

#[tokio::test]
async fn direct_address_and_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let conv = conversation(&engine, room(&engine).await);
    let round = engine
        .post_message(
            &conv,
            "Hey Alice, what do you think?",
            ModePolicy::Auto,
            None,
            &mut |_| {},
        )
        .await
        .unwrap();
    assert_eq!(round.plan.responders, ["alice"]);
    let round = engine
        .post_message(
            &conv,
            "Thanks, everyone.",
            ModePolicy::Auto,
            None,
            &mut |_| {},
        )
        .await
        .unwrap();
    assert_eq!(round.plan.responders, ["hr-advisor"]);
    let fallback = round
        .plan
        .verdicts
        .iter()
        .find(|v| v.agent_id == "hr-advisor")
        .unwrap();
    assert_eq!(
        fallback.source,
        crewroom_core::orchestrator::VerdictSource::Fallback
    );
}

#[tokio::test]
async fn concurrent_posts_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Arc::new(engine(dir.path()));
    let conv = conversation(&engine, room(&engine).await);
    let tasks: Vec<_> = ["Hey Alice, one?", "Hey Alice, two?", "Hey Alice, three?"]
        .into_iter()
        .map(|text| {
            let engine = engine.clone();
            let conv = conv.clone();
            tokio::spawn(async move {
                engine
                    .post_message(&conv, text, ModePolicy::Auto, None, &mut |_| {})
                    .await
                    .unwrap()
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
    let stored = engine.conversation(&conv).unwrap();
    let ids: Vec<_> = stored.rounds().map(|r| r.round_id.clone()).collect();
    assert_eq!(
        ids,
        [
            format!("{conv}-r1"),
            format!("{conv}-r2"),
            format!("{conv}-r3")
        ]
    );
    let seqs: Vec<u64> = stored.entries.iter().map(|(s, _)| *s).collect();
    assert_eq!(seqs, [1, 2, 3, 4]);
    // each round saw every earlier round in its history
    assert_eq!(stored.messages().len(), 6);
}

#[tokio::test]
async fn fixed_seed_runs_emit_identical_events() {
    async fn run() -> Vec<String> {
        let dir = tempfile::tempdir().unwrap();
        let engine = engine(dir.path());
        let conv = conversation(&engine, room(&engine).await);
        let mut lines = Vec::new();
        for text in [
            "Half my crew stopped wearing a harness and we are out of gloves. What should I do?",
            "I also hurt my shoulder last month and feel pressured to come back early.",
        ] {
            engine
                .post_message(&conv, text, ModePolicy::Auto, None, &mut |e| {
                    lines.push(serde_json::to_string(&e).unwrap())
                })
                .await
                .unwrap();
        }
        lines
    }
    let a = run().await;
    let b = run().await;
    assert!(a.len() > 8);
    assert_eq!(a, b);
}

#[tokio::test]
async fn deleting_an_agent_updates_rosters_but_keeps_history() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let conv = conversation(&engine, room(&engine).await);
    engine
        .post_message(
            &conv,
            "Hey Alice, what do you think?",
            ModePolicy::Auto,
            None,
            &mut |_| {},
        )
        .await
        .unwrap();
    engine.delete_agent("alice").await.unwrap();
    let stored = engine.conversation(&conv).unwrap();
    assert!(!stored.roster().contains(&"alice".to_string()));
    assert_eq!(stored.messages()[1].author, "alice");
    let round = engine
        .post_message(
            &conv,
            "Hey Alice, still there?",
            ModePolicy::Auto,
            None,
            &mut |_| {},
        )
        .await
        .unwrap();
    assert!(!round.plan.responders.contains(&"alice".to_string()));
}

#[tokio::test]
async fn baseline_conversation_has_single_assistant() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let record = engine
        .create_conversation(NewConversation {
            roster: Vec::new(),
            scenario_tag: None,
            baseline: true,
        })
        .unwrap();
    assert_eq!(record.roster, ["assistant"]);
    let round = engine
        .post_message(
            &record.conversation_id,
            "What PPE do I need?",
            ModePolicy::Parallel,
            None,
            &mut |_| {},
        )
        .await
        .unwrap();
    assert_eq!(round.plan.responders, ["assistant"]);
    assert_eq!(round.replies[0].author_name, "Assistant");
}
