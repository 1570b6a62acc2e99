use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use park_core::{SessionId, SessionStatus, TaskKind};
use park_service::pipeline::Analyzer;
use park_service::store::{read_manifest, write_manifest, SessionStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn now() -> DateTime<Utc> {
    "2026-02-01T00:00:00Z".parse().unwrap()
}

/// Payload that identifies its writer in every byte.
fn payload(writer: usize, round: usize, len: usize) -> Vec<u8> {
    vec![(writer * 31 + round) as u8; len]
}

#[test]
fn parallel_writers_never_interleave() {
    let tmp = tempfile::tempdir().unwrap();
    let store = Arc::new(SessionStore::new(tmp.path()));
    let ids: Vec<SessionId> = (0..4).map(|_| store.create(None, None, now()).unwrap().session_id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let plans: Vec<(usize, usize)> = (0..16).map(|w| (w % ids.len(), rng.random_range(1_000..200_000))).collect();
    let handles: Vec<_> = plans
        .iter()
        .enumerate()
        .map(|(w, &(session, len))| {
            let (store, id) = (store.clone(), ids[session].clone());
            std::thread::spawn(move || {
                for round in 0..25 {
                    let task = TaskKind::ALL[(w + round) % 6];
                    store.put_artifact(&id, task, &payload(w, round, len), now()).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    for id in &ids {
        let dir = store.session_dir(id);
        let m = read_manifest(&dir).unwrap();
        assert!(m.is_full());
        for name in m.artifacts.values() {
            let bytes = std::fs::read(dir.join(name)).unwrap();
            // whole payload of exactly one writer
            let distinct: BTreeSet<u8> = bytes.iter().copied().collect();
            assert_eq!(distinct.len(), 1, "{name} mixes writers");
            assert!(plans.iter().any(|&(_, len)| len == bytes.len()), "{name} has a torn length");
        }
        // no temp files left behind
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1 + 6);
    }
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

fn golden() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

fn analyzer() -> Analyzer {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    Analyzer::load(&data.join("model.json"), &data.join("resources.json")).unwrap()
}

#[test]
fn interrupted_analysis_reruns_to_the_same_report() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = tmp.path().join("clean");
    copy_dir(&golden(), &clean);
    let reference = analyzer().analyze_dir(&clean).unwrap();

    // state a crash leaves: status Analyzing, a stray temp file, no report
    let crashed = tmp.path().join("crashed");
    copy_dir(&golden(), &crashed);
    let mut m = read_manifest(&crashed).unwrap();
    m.status = SessionStatus::Analyzing;
    write_manifest(&crashed, &m).unwrap();
    std::fs::write(crashed.join(".tmpXYZ"), b"half a rep").unwrap();
    assert_eq!(analyzer().analyze_dir(&crashed).unwrap(), reference);
    assert_eq!(read_manifest(&crashed).unwrap().status, SessionStatus::Complete);
}

#[test]
fn killing_the_cli_mid_analysis_is_recoverable() {
    let tmp = tempfile::tempdir().unwrap();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let reference = {
        let d = tmp.path().join("reference");
        copy_dir(&golden(), &d);
        analyzer().analyze_dir(&d).unwrap()
    };
    for (i, delay_ms) in [0u64, 5, 20, 40, 80, 160].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        copy_dir(&golden(), &dir);
        let mut child = Command::new(env!("CARGO_BIN_EXE_park"))
            .args(["analyze", "--json", "--model"])
            .arg(data.join("model.json"))
            .arg("--resources")
            .arg(data.join("resources.json"))
            .arg(&dir)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .spawn()
            .unwrap();
        std::thread::sleep(Duration::from_millis(delay_ms));
        let _ = child.kill();
        let _ = child.wait();
        let m = read_manifest(&dir).expect("manifest stays readable");
        assert!(matches!(m.status, SessionStatus::Collecting | SessionStatus::Analyzing | SessionStatus::Complete));
        assert_eq!(analyzer().analyze_dir(&dir).unwrap(), reference, "delay {delay_ms} ms");
    }
}
