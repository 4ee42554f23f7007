mod common;

use common::*;
use crewroom_core::clock::LogicalClock;
use crewroom_core::engine::baseline_agent;
use crewroom_core::knowledge::{ChunkParams, KnowledgeBase};
use crewroom_core::orchestrator::{
    build_plan, execute_round, Message, ModePolicy, OrchestrationPlan, OrchestratorError,
    RelevanceVerdict, RoundSettings, VerdictSource, USER_AUTHOR, USER_DISPLAY_NAME,
};
use crewroom_core::provider::{FailKind, MatchRule, ScriptedBehavior};
use crewroom_core::studio::AgentPersona;

fn user(text: &str) -> Message {
    Message {
        message_id: "c-r1-m0".into(),
        conversation_id: "c".into(),
        author: USER_AUTHOR.into(),
        author_name: USER_DISPLAY_NAME.into(),
        text: text.into(),
        timestamp: 0,
        round_id: "c-r1".into(),
        failed: false,
    }
}

fn fixed_plan(ids: &[&str], parallel: bool) -> OrchestrationPlan {
    OrchestrationPlan {
        round_id: "c-r1".into(),
        responders: ids.iter().map(|s| s.to_string()).collect(),
        mode: if parallel {
            crewroom_core::orchestrator::ExecutionMode::Parallel
        } else {
            crewroom_core::orchestrator::ExecutionMode::Sequential
        },
        rng_seed: 0,
        verdicts: ids
            .iter()
            .map(|id| RelevanceVerdict {
                agent_id: id.to_string(),
                respond: true,
                score: 1.0,
                reason: "test".into(),
                source: VerdictSource::ModelGate,
            })
            .collect(),
    }
}

fn respond_rule(name: &str, reply: &str) -> MatchRule {
    MatchRule::substring(format!("Agent: {name}\nStage: respond"), reply)
}

struct Room {
    _dir: tempfile::TempDir,
    knowledge: KnowledgeBase,
    clock: LogicalClock,
}

fn room() -> Room {
    let dir = tempfile::tempdir().unwrap();
    Room {
        knowledge: KnowledgeBase::open(dir.path()).unwrap(),
        _dir: dir,
        clock: LogicalClock::new(1000, 10),
    }
}

#[tokio::test(start_paused = true)]
async fn parallel_replies_commit_in_plan_order() {
    let r = room();
    let behavior = ScriptedBehavior::new("?")
        .rule(respond_rule("Slow", "slow reply").delayed(300))
        .rule(respond_rule("Fast", "fast reply").delayed(50));
    let gateway = crewroom_core::provider::Gateway::scripted(behavior).unwrap();
    let roster = vec![persona("slow", "Slow", None), persona("fast", "Fast", None)];
    let mut seen = Vec::new();
    let round = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("go"),
        fixed_plan(&["slow", "fast"], true),
        RoundSettings::default(),
        &mut |o| seen.push((o.position, o.message.author.clone())),
    )
    .await
    .unwrap();
    assert_eq!(seen, vec![(0, "slow".to_string()), (1, "fast".to_string())]);
    let texts: Vec<_> = round.replies.iter().map(|m| m.text.as_str()).collect();
    assert_eq!(texts, ["slow reply", "fast reply"]);
    assert!(round.replies[0].timestamp < round.replies[1].timestamp);
    assert_eq!(round.replies[0].message_id, "c-r1-m1");
    assert_eq!(round.replies[1].message_id, "c-r1-m2");
    assert!(round
        .per_reply_context
        .iter()
        .all(|c| c.visible_reply_ids.is_empty()));
}

#[tokio::test]
async fn sequential_requests_see_earlier_replies() {
    let r = room();
    let behavior = ScriptedBehavior::new("?")
        .rule(respond_rule("Ann", "first"))
        .rule(respond_rule("Bo", "second"))
        .rule(respond_rule("Cy", "third"));
    let (gateway, chat) = recording_gateway(behavior);
    let roster = vec![
        persona("ann", "Ann", None),
        persona("bo", "Bo", None),
        persona("cy", "Cy", None),
    ];
    let round = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("hello"),
        fixed_plan(&["cy", "ann", "bo"], false),
        RoundSettings::default(),
        &mut |_| {},
    )
    .await
    .unwrap();
    let requests = chat.requests();
    let tails: Vec<Vec<String>> = requests
        .iter()
        .map(|req| {
            req.turns
                .iter()
                .skip(1)
                .map(|t| t.content.clone())
                .collect()
        })
        .collect();
    assert_eq!(
        tails,
        vec![
            vec![],
            vec!["third".to_string()],
            vec!["third".into(), "first".into()]
        ]
    );
    assert_eq!(
        round.per_reply_context[2].visible_reply_ids,
        vec!["c-r1-m1", "c-r1-m2"]
    );
}

#[tokio::test]
async fn failed_reply_becomes_placeholder_and_is_hidden() {
    let r = room();
    let behavior = ScriptedBehavior::new("?")
        .rule(respond_rule("Ann", "").failing(FailKind::Authentication))
        .rule(respond_rule("Bo", "still here"));
    let (gateway, chat) = recording_gateway(behavior);
    let roster = vec![persona("ann", "Ann", None), persona("bo", "Bo", None)];
    let mut kinds = Vec::new();
    let round = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("hello"),
        fixed_plan(&["ann", "bo"], false),
        RoundSettings::default(),
        &mut |o| kinds.push(o.message.failed),
    )
    .await
    .unwrap();
    assert_eq!(kinds, [true, false]);
    assert!(round.replies[0].failed && round.replies[0].text.is_empty());
    // Bo's request holds only the user turn; the failed reply is not shown
    assert_eq!(chat.requests()[1].turns.len(), 1);
}

#[tokio::test]
async fn every_reply_failing_is_an_error() {
    let r = room();
    let behavior = ScriptedBehavior::new("?")
        .rule(MatchRule::substring("Stage: respond", "").failing(FailKind::Malformed));
    let gateway = crewroom_core::provider::Gateway::scripted(behavior).unwrap();
    let roster = vec![persona("ann", "Ann", None), persona("bo", "Bo", None)];
    let err = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("hello"),
        fixed_plan(&["ann", "bo"], true),
        RoundSettings::default(),
        &mut |_| {},
    )
    .await
    .unwrap_err();
    match err {
        OrchestratorError::AllFailed(round) => assert_eq!(round.replies.len(), 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn unknown_responder_is_rejected() {
    let r = room();
    let gateway = crewroom_core::provider::Gateway::scripted(ScriptedBehavior::new("ok")).unwrap();
    let roster = vec![persona("ann", "Ann", None)];
    let err = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("hello"),
        fixed_plan(&["ghost"], false),
        RoundSettings::default(),
        &mut |_| {},
    )
    .await
    .unwrap_err();
    assert!(matches!(err, OrchestratorError::UnknownAgent(id) if id == "ghost"));
}

#[tokio::test]
async fn retrieval_reads_only_the_agents_own_collection() {
    let r = room();
    let (gateway, chat) = recording_gateway(ScriptedBehavior::new("noted"));
    let mut roster: Vec<AgentPersona> = Vec::new();
    for (id, token) in [("ann", "ANN-SECRET"), ("bo", "BO-SECRET")] {
        r.knowledge.create(id, id, 16).unwrap();
        r.knowledge
            .ingest(
                &gateway,
                id,
                "doc",
                &format!("ladder safety {token}"),
                ChunkParams::default(),
            )
            .await
            .unwrap();
        roster.push(persona(id, &id.to_uppercase(), Some(id)));
    }
    let round = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("ladder safety"),
        fixed_plan(&["ann", "bo"], true),
        RoundSettings::default(),
        &mut |_| {},
    )
    .await
    .unwrap();
    let requests = chat.requests();
    assert!(
        requests[0].system_prompt.contains("ANN-SECRET")
            && !requests[0].system_prompt.contains("BO-SECRET")
    );
    assert!(
        requests[1].system_prompt.contains("BO-SECRET")
            && !requests[1].system_prompt.contains("ANN-SECRET")
    );
    assert_eq!(
        round.per_reply_context[0].injected_chunk_ids,
        vec!["ann:doc:0"]
    );
    assert_eq!(
        round.per_reply_context[1].injected_chunk_ids,
        vec!["bo:doc:0"]
    );
}

#[tokio::test]
async fn baseline_request_has_no_system_prompt() {
    let r = room();
    let (gateway, chat) = recording_gateway(ScriptedBehavior::new("plain answer"));
    let roster = vec![baseline_agent()];
    let plan = build_plan(
        "c-r1",
        vec![RelevanceVerdict {
            agent_id: roster[0].agent_id.clone(),
            respond: true,
            score: 1.0,
            reason: "ungated".into(),
            source: VerdictSource::ModelGate,
        }],
        ModePolicy::Auto,
        1,
    )
    .unwrap();
    let round = execute_round(
        &gateway,
        &r.knowledge,
        &r.clock,
        &roster,
        &[],
        user("What now?"),
        plan,
        RoundSettings::default(),
        &mut |_| {},
    )
    .await
    .unwrap();
    assert_eq!(round.replies[0].text, "plain answer");
    let requests = chat.requests();
    assert_eq!(requests.len(), 1);
    assert_eq!(requests[0].system_prompt, "");
    assert!(round.per_reply_context[0].injected_chunk_ids.is_empty());
}

#[test]
fn library_shuffle_matches_reference_implementation() {
    for seed in [0u64, 1, 42, 7_777, u64::MAX] {
        for n in 0..12 {
            let items: Vec<usize> = (0..n).collect();
            let mut ours = items.clone();
            crewroom_core::orchestrator::seeded_shuffle(&mut ours, seed);
            assert_eq!(ours, reference_shuffle(&items, seed), "seed {seed}, n {n}");
        }
    }
}
