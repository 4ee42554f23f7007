use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn crewroom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crewroom"))
        .args(args)
        .env_remove("CREWROOM_LLM_URL")
        .output()
        .unwrap()
}

fn study(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crewroom-study"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn replay_reproduces_the_golden_transcripts() {
    let replay = root().join("fixtures/replays/alice.replay");
    let text = stdout(&crewroom(&["replay", path(&replay)]));
    let golden =
        std::fs::read_to_string(root().join("fixtures/replays/alice.transcript.txt")).unwrap();
    assert_eq!(text, golden);
    let json = stdout(&crewroom(&[
        "replay",
        path(&replay),
        "--format",
        "structured",
    ]));
    let golden =
        std::fs::read_to_string(root().join("fixtures/replays/alice.transcript.json")).unwrap();
    assert_eq!(json, golden);
}

#[test]
fn presets_install_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let script = root().join("fixtures/replays/room.script.toml");
    let common = [
        "--data-dir",
        path(&data),
        "--mode",
        "scripted",
        "--provider-script",
        path(&script),
    ];
    let mut args = common.to_vec();
    args.extend(["presets", "install"]);
    let listed = stdout(&crewroom(&args));
    assert_eq!(listed.lines().count(), 3);
    for id in ["osh-specialist", "hr-advisor", "worker-peer"] {
        assert!(
            data.join("agents").join(format!("{id}.json")).exists(),
            "{id} persona missing"
        );
        assert!(
            data.join("knowledge").join(format!("{id}.jsonl")).exists(),
            "{id} collection missing"
        );
    }
    // installing twice is a no-op
    assert_eq!(stdout(&crewroom(&args)), listed);

    let notes = dir.path().join("ladders.txt");
    std::fs::write(&notes, "Tie off ladders above the landing.").unwrap();
    let mut ingest = common.to_vec();
    ingest.extend(["ingest", "worker-peer", path(&notes)]);
    assert!(stdout(&crewroom(&ingest)).starts_with("1 chunks added to worker-peer as ladders"));

    let out = crewroom(&["--data-dir", path(&data), "export", "conv-0001"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("conv-0001"));
}

#[test]
fn live_mode_without_configuration_fails_clearly() {
    let dir = tempfile::tempdir().unwrap();
    let out = crewroom(&["--data-dir", path(dir.path()), "presets", "install"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("CREWROOM_LLM_URL"));
}

fn write_sus(dir: &Path, name: &str, rows: &[(&str, [u8; 10])]) -> PathBuf {
    let mut body = String::from("participant,Q1,Q2,Q3,Q4,Q5,Q6,Q7,Q8,Q9,Q10\n");
    for (id, r) in rows {
        let cells: Vec<String> = r.iter().map(u8::to_string).collect();
        body.push_str(&format!("{id},{}\n", cells.join(",")));
    }
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn study_commands() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_sus(
        dir.path(),
        "a.csv",
        &[
            ("p1", [5, 2, 4, 1, 5, 2, 4, 1, 5, 1]),
            ("p2", [3; 10]),
            ("p3", [4, 2, 4, 2, 4, 2, 4, 2, 4, 2]),
        ],
    );
    let scored = stdout(&study(&["--json", "score-sus", path(&a)]));
    let v: serde_json::Value = serde_json::from_str(&scored).unwrap();
    assert_eq!(v["participants"][0]["sus"], 90.0);
    assert_eq!(v["participants"][1]["sus"], 50.0);

    let b = write_sus(
        dir.path(),
        "b.csv",
        &[
            ("p3", [3, 3, 3, 3, 3, 3, 3, 3, 3, 3]),
            ("p1", [4, 2, 4, 2, 4, 2, 4, 2, 4, 2]),
            ("p2", [2, 4, 2, 4, 2, 4, 2, 4, 2, 4]),
        ],
    );
    let compared = stdout(&study(&[
        "--json",
        "compare",
        path(&a),
        path(&b),
        "--metric",
        "sus",
    ]));
    let v: serde_json::Value = serde_json::from_str(&compared).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["test_kind"], "paired_t");

    let alpha = study(&["alpha", path(&a), "--items", "Q1"]);
    assert!(!alpha.status.success());
}
