use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use tempfile::TempDir;

fn roomsynth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roomsynth"))
        .current_dir(dir)
        .env_remove("ROOMSYNTH_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SCENE: &str = r#"{
  "format_version": 1,
  "scene_type": "bedroom",
  "shoebox": {"max_corner": [4.0, 3.5, 2.6]},
  "materials": [
    {"face": "z_min", "ratios": {"carpet": 1.0}},
    {"face": "z_max", "ratios": {"plaster_drywall": 1.0}}
  ],
  "listener": {"position": [2.0, 2.0, 1.2]},
  "sources": [{"position": [1.0, 0.8, 1.4]}]
}"#;

fn assert_error(out: &Output, category: &str) {
    assert!(!out.status.success());
    let text = stderr(out);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.starts_with(&format!("error: {category}: ")), "{text}");
}

#[test]
fn malformed_scene_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_error(&roomsynth(dir.path(), &["synth-rir", "bad.json", "--out", "r.wav"]), "ParseError");
    assert!(!dir.path().join("r.wav").exists());
}

#[test]
fn source_outside_the_room_is_rejected() {
    let dir = TempDir::new().unwrap();
    let scene = SCENE.replace("[1.0, 0.8, 1.4]", "[9.0, 0.8, 1.4]");
    std::fs::write(dir.path().join("s.json"), scene).unwrap();
    assert_error(&roomsynth(dir.path(), &["synth-rir", "s.json", "--out", "r.wav"]), "InvalidScene");
}

#[test]
fn decreasing_timestamps_are_rejected() {
    let dir = TempDir::new().unwrap();
    let stream = r#"{"format_version": 1, "records": [
        {"kind": "scene_type", "time": 1.0, "scene_type": "bedroom"},
        {"kind": "scene_type", "time": 0.5, "scene_type": "outdoor"}]}"#;
    std::fs::write(dir.path().join("s.json"), stream).unwrap();
    let mut writer = hound::WavWriter::create(
        dir.path().join("in.wav"),
        hound::WavSpec { channels: 1, sample_rate: 48000, bits_per_sample: 32, sample_format: hound::SampleFormat::Float },
    )
    .unwrap();
    writer.write_sample(0.5f32).unwrap();
    writer.finalize().unwrap();
    assert_error(&roomsynth(dir.path(), &["replay", "s.json", "in.wav", "--out", "o.wav"]), "StreamOrderError");
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    assert_error(&roomsynth(dir.path(), &["synth-rir", "absent.json", "--out", "r.wav"]), "IoError");
}

#[test]
fn config_from_environment_and_flag_override() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("s.json"), SCENE).unwrap();
    std::fs::write(dir.path().join("run.toml"), "sample_rate = 44100\nrir_seconds = 0.5\n").unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["synth-rir", "s.json", "--out", out];
        args.extend_from_slice(extra);
        let status = Command::new(env!("CARGO_BIN_EXE_roomsynth"))
            .current_dir(dir.path())
            .env("ROOMSYNTH_CONFIG", "run.toml")
            .args(&args)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", stderr(&status));
        hound::WavReader::open(dir.path().join(out)).unwrap()
    };
    let from_env = run(&[], "a.wav");
    assert_eq!(from_env.spec().sample_rate, 44100);
    assert_eq!(from_env.len(), 22050);
    let overridden = run(&["--sample-rate", "96000"], "b.wav");
    assert_eq!(overridden.spec().sample_rate, 96000);
    assert_eq!(overridden.len(), 48000);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("s.json"), SCENE).unwrap();
    std::fs::write(dir.path().join("run.toml"), "sample_rte = 16000\n").unwrap();
    let out = roomsynth(dir.path(), &["--config", "run.toml", "synth-rir", "s.json", "--out", "r.wav"]);
    assert_error(&out, "ParseError");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn same_seed_same_bytes(seed in 0u64..1_000_000, mode in prop::sample::select(vec!["full", "geo_only", "ae_only"])) {
        let dir = TempDir::new().unwrap();
        std::fs::write(dir.path().join("s.json"), SCENE).unwrap();
        std::fs::write(dir.path().join("run.toml"), "rir_seconds = 0.4\n").unwrap();
        let seed = seed.to_string();
        let mut files = Vec::new();
        for out in ["a.wav", "b.wav"] {
            let result = roomsynth(
                dir.path(),
                &["--config", "run.toml", "--seed", &seed, "--mode", mode, "synth-rir", "s.json", "--out", out],
            );
            prop_assert!(result.status.success(), "{}", stderr(&result));
            files.push(std::fs::read(dir.path().join(out)).unwrap());
        }
        prop_assert_eq!(&files[0], &files[1]);
    }
}
