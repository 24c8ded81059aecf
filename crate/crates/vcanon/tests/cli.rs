use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vcanon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcanon")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a small config into `dir` and returns its path.
fn config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        r#"master_seed = 4
out_dir = "out"
pool_size = 3
{extra}

[corpus.synthetic]
speakers = 3
utterances_per_speaker = 2
pool_speakers = 3
utterances_per_pool_speaker = 1
duration_secs = 0.5

[conversion]
k = 2
"#
    );
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = vcanon(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    out
}

fn pipeline(config: &Path) {
    let c = config.to_str().unwrap();
    for step in ["generate", "train-models", "anonymize", "attack"] {
        run_ok(&[step, "--config", c]);
    }
    run_ok(&["report", "--config", c]);
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generate_two_speakers_writes_four_files_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "master_seed = 1\nout_dir = \"out\"\n[corpus.synthetic]\nspeakers = 2\nutterances_per_speaker = 2\npool_speakers = 0\nduration_secs = 0.5\n",
    )
    .unwrap();
    run_ok(&["generate", "--config", path.to_str().unwrap()]);
    let corpus = dir.path().join("out/corpus");
    assert_eq!(fs::read_dir(corpus.join("audio")).unwrap().count(), 4);
    assert!(corpus.join("manifest.csv").is_file());
    let first = files_under(&corpus);
    run_ok(&["generate", "--config", path.to_str().unwrap()]);
    assert_eq!(files_under(&corpus), first);
}

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "");
    pipeline(&c);
    let first = files_under(&dir.path().join("out"));
    assert!(first.iter().any(|(p, _)| p.ends_with("results/plots/vtln_perm_informed.svg")));
    assert!(first.iter().any(|(p, _)| p.ends_with("anonymized/assignment.json")));
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    pipeline(&c);
    assert_eq!(files_under(&dir.path().join("out")), first);
}

#[test]
fn seed_and_out_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "");
    let other = dir.path().join("elsewhere");
    let c = c.to_str().unwrap();
    let o = other.to_str().unwrap();
    run_ok(&["generate", "--config", c, "--out", o]);
    run_ok(&["train-models", "--config", c, "--out", o, "--seed", "9"]);
    run_ok(&["anonymize", "--config", c, "--out", o, "--seed", "9"]);
    let table = fs::read_to_string(other.join("anonymized/assignment.json")).unwrap();
    assert!(table.contains("\"master_seed\": 9"), "{table}");
    assert!(!dir.path().join("out").exists());
    // the table was made with seed 9, so attacking with the config's seed is refused
    let out = vcanon(&["attack", "--config", c, "--out", o]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn voicemask_outside_random_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "converter = \"voice_mask\"\nstrategy = \"const\"");
    let out = vcanon(&["generate", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("random"), "{}", stderr(&out));
}

#[test]
fn informed_attack_without_table_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "");
    let cs = c.to_str().unwrap();
    for step in ["generate", "train-models", "anonymize"] {
        run_ok(&[step, "--config", cs]);
    }
    fs::remove_file(dir.path().join("out/anonymized/assignment.json")).unwrap();
    let out = vcanon(&["attack", "--config", cs]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("assignment"), "{}", stderr(&out));

    // without the informed attacker the same inputs are fine
    let c = config(dir.path(), "attackers = [\"ignorant\", \"semi_informed\"]");
    let out = run_ok(&["attack", "--config", c.to_str().unwrap()]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn report_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "");
    pipeline(&c);
    let results = dir.path().join("out/results");
    let r = results.to_str().unwrap();
    let first = files_under(&results.join("plots"));
    assert_eq!(first.len(), 3);
    run_ok(&["report", r]);
    assert_eq!(files_under(&results.join("plots")), first);
    assert!(fs::read_to_string(results.join("summary.txt")).unwrap().contains("vtln_perm_ignorant"));
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcanon(&["report", dir.path().join("absent").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent"));

    let out = vcanon(&["generate", "--config", dir.path().join("none.toml").to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let c = config(dir.path(), "");
    let out = vcanon(&["anonymize", "--config", c.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("generate"), "{}", stderr(&out));

    fs::write(&c, "master_seed = 1\nout_dir = \"o\"\nunknown_key = 3\n").unwrap();
    assert_eq!(code(&vcanon(&["generate", "--config", c.to_str().unwrap()])), 2);

    assert_eq!(code(&vcanon(&["frobnicate"])), 2);
}

#[test]
fn bad_synthetic_settings_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "master_seed = 1\nout_dir = \"out\"\n[corpus.synthetic]\nspeakers = 2\npool_speakers = 0\nduration_secs = 0.05\n").unwrap();
    let out = vcanon(&["generate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "out_dir = \"out\"\n").unwrap();
    let out = vcanon(&["generate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

#[test]
fn uncreatable_output_directory_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    // a regular file where a directory is needed fails even for privileged users
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, b"").unwrap();
    let c = config(dir.path(), "");
    let out = vcanon(&["generate", "--config", c.to_str().unwrap(), "--out", blocker.join("run").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("blocker"), "{}", stderr(&out));
}

#[test]
fn conversion_failure_exits_3_naming_the_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path(), "converter = \"voice_mask\"\nstrategy = \"random\"");
    let cs = c.to_str().unwrap();
    run_ok(&["generate", "--config", cs]);
    run_ok(&["train-models", "--config", cs]);
    let models = dir.path().join("out/models/target_models.json");
    let text = fs::read_to_string(&models).unwrap();
    // negative spreads decode fine but fail model validation at conversion time
    fs::write(&models, text.replace("\"f0_log_std\": ", "\"f0_log_std\": -")).unwrap();
    let out = vcanon(&["anonymize", "--config", cs]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("converting spk"), "{}", stderr(&out));
}

#[test]
fn attack_where_every_cell_fails_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "master_seed = 1\nout_dir = \"out\"\nconverter = \"identity\"\npool_size = 1\nattackers = [\"ignorant\"]\n\
         [corpus.synthetic]\nspeakers = 1\nutterances_per_speaker = 2\npool_speakers = 1\nutterances_per_pool_speaker = 1\nduration_secs = 0.5\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    for step in ["generate", "train-models", "anonymize"] {
        run_ok(&[step, "--config", p]);
    }
    let out = vcanon(&["attack", "--config", p]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("out/results/results.csv")).unwrap();
    assert!(csv.contains("at least 2 enrolled speakers"), "{csv}");
}
