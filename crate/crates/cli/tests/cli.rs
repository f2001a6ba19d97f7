//! End-to-end checks of the command line contract: subcommand wiring,
//! exit codes, output formats, option precedence and bit-for-bit
//! determinism of repeated invocations.

use std::path::Path;
use std::process::{Command, Output};

use evrep::corpus::{load_corpus, load_labels, CoocStats};
use evrep::eval::{load_hard_sim, load_mcnc, load_transitive};
use evrep::trainer::Checkpoint;

fn evrep_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evrep"))
        .args(args)
        .output()
        .expect("spawning the evrep binary")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        stderr_of(out)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Writes a small generator spec so test corpora stay quick to train on.
fn small_spec(dir: &Path) -> String {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("spec.json");
    std::fs::write(
        &path,
        r#"{"n_clusters":3,"events_per_cluster":40,"docs":150,"events_per_doc":5,"vocab_per_cluster":12,"seed":5}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

/// Generates a small corpus with probe files and returns the data dir.
fn synth_small(dir: &Path) -> String {
    let spec = small_spec(dir);
    let data = dir.join("data").to_str().unwrap().to_string();
    let out = evrep_bin(&[
        "synth", "--spec", &spec, "--out", &data, "--hard-sim", "20", "--transitive", "15",
        "--mcnc", "10", "--quiet",
    ]);
    assert_success(&out);
    data
}

#[test]
fn synth_writes_loadable_corpus_labels_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let data = Path::new(&data);
    let corpus = load_corpus(data.join("corpus.jsonl")).unwrap();
    assert!(corpus.events.len() > 50);
    assert!(!corpus.docs.is_empty());
    let labels = load_labels(data.join("labels.jsonl")).unwrap();
    for (id, _) in corpus.events.iter() {
        assert!(labels.contains_key(&id), "event {id} has no label");
    }
    assert_eq!(load_hard_sim(data.join("hard_sim.jsonl")).unwrap().len(), 20);
    assert_eq!(load_transitive(data.join("transitive.jsonl")).unwrap().len(), 15);
    assert_eq!(load_mcnc(data.join("mcnc.jsonl")).unwrap().len(), 10);
}

#[test]
fn synth_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_small(&dir.path().join("a"));
    let b = synth_small(&dir.path().join("b"));
    for file in ["corpus.jsonl", "labels.jsonl", "hard_sim.jsonl", "mcnc.jsonl"] {
        let left = std::fs::read(Path::new(&a).join(file)).unwrap();
        let right = std::fs::read(Path::new(&b).join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between identical invocations");
    }
}

#[test]
fn cooc_writes_a_loadable_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let corpus = format!("{data}/corpus.jsonl");
    let table = dir.path().join("cooc.json");
    let out = evrep_bin(&["cooc", "--corpus", &corpus, "--out", table.to_str().unwrap()]);
    assert_success(&out);
    let stats = CoocStats::load(&table).unwrap();
    let events = load_corpus(&corpus).unwrap().events.len();
    assert_eq!(stats.n_events(), events);
}

#[test]
fn train_then_eval_roundtrips_through_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let corpus = format!("{data}/corpus.jsonl");
    let run = dir.path().join("run").to_str().unwrap().to_string();
    let out = evrep_bin(&[
        "train", "--corpus", &corpus, "--out", &run, "--steps", "40", "--seed", "3", "--quiet",
    ]);
    assert_success(&out);
    let checkpoint = format!("{run}/checkpoint.json");

    let hard = evrep_bin(&[
        "eval", "--checkpoint", &checkpoint, "--task", "hard", "--data",
        &format!("{data}/hard_sim.jsonl"), "--quiet",
    ]);
    assert_success(&hard);
    let text = stdout_of(&hard);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,value,items,skipped"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0], "hard_similarity");
    let value: f64 = fields[1].parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
    assert_eq!(fields[2], "20");
    assert_eq!(fields[3], "0");

    let csv_copy = dir.path().join("metrics_out.csv");
    let again = evrep_bin(&[
        "eval", "--checkpoint", &checkpoint, "--task", "hard", "--data",
        &format!("{data}/hard_sim.jsonl"), "--out", csv_copy.to_str().unwrap(), "--quiet",
    ]);
    assert_success(&again);
    assert_eq!(std::fs::read_to_string(&csv_copy).unwrap(), stdout_of(&again));

    let trans = evrep_bin(&[
        "eval", "--checkpoint", &checkpoint, "--task", "transitive", "--data",
        &format!("{data}/transitive.jsonl"), "--quiet",
    ]);
    assert_success(&trans);
    assert!(stdout_of(&trans).contains("transitive_similarity,"));

    let mcnc = evrep_bin(&[
        "eval", "--checkpoint", &checkpoint, "--task", "mcnc", "--data",
        &format!("{data}/mcnc.jsonl"), "--aggregation", "last", "--quiet",
    ]);
    assert_success(&mcnc);
    assert!(stdout_of(&mcnc).contains("mcnc_last,"));
}

#[test]
fn exit_codes_follow_the_contract() {
    // Runtime failures: missing input files.
    let out = evrep_bin(&[
        "eval", "--checkpoint", "/nonexistent/ck.json", "--task", "hard", "--data",
        "/nonexistent/items.jsonl",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).starts_with("error:"));
    let out = evrep_bin(&["train", "--corpus", "/nonexistent/c.jsonl", "--out", "/tmp/x"]);
    assert_eq!(code(&out), 2);

    // Usage errors: unknown flags, bad enum values, invalid settings.
    let out = evrep_bin(&["train", "--corpus", "a", "--out", "b", "--frobnicate"]);
    assert_eq!(code(&out), 1);
    assert!(stderr_of(&out).contains("unexpected argument"));
    let out = evrep_bin(&["eval", "--checkpoint", "a", "--task", "bogus", "--data", "b"]);
    assert_eq!(code(&out), 1);
    let out = evrep_bin(&["train", "--corpus", "a", "--out", "b", "--batch-size", "1"]);
    assert_eq!(code(&out), 1);
    assert!(stderr_of(&out).contains("batch_size"));
    let out = evrep_bin(&["sweep", "--param", "tau", "--values", "abc"]);
    assert_eq!(code(&out), 1);
    let out = evrep_bin(&["synth", "--out", "/tmp/x", "--mcnc", "5", "--candidates", "1"]);
    assert_eq!(code(&out), 1);

    // Help and version are not errors.
    assert_eq!(code(&evrep_bin(&["--help"])), 0);
    assert_eq!(code(&evrep_bin(&["eval", "--help"])), 0);
}

#[test]
fn config_file_yields_to_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let corpus = format!("{data}/corpus.jsonl");
    let config = dir.path().join("train.cfg");
    std::fs::write(&config, "steps=9\nd=16\nseed=5\n").unwrap();
    let run = dir.path().join("run").to_str().unwrap().to_string();
    let out = evrep_bin(&[
        "train", "--corpus", &corpus, "--out", &run, "--config", config.to_str().unwrap(),
        "--steps", "4", "--quiet",
    ]);
    assert_success(&out);
    let ckpt = Checkpoint::load(format!("{run}/checkpoint.json")).unwrap();
    assert_eq!(ckpt.step, 4, "explicit --steps must beat the config file");
    assert_eq!(ckpt.config.steps, 4);
    assert_eq!(ckpt.config.d, 16, "config file must beat the default");
    assert_eq!(ckpt.config.seed, 5);
}

#[test]
fn cluster_report_emits_assignment_table_and_pca() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let corpus = format!("{data}/corpus.jsonl");
    let run = dir.path().join("run").to_str().unwrap().to_string();
    assert_success(&evrep_bin(&[
        "train", "--corpus", &corpus, "--out", &run, "--steps", "60", "--prototypes", "4",
        "--quiet",
    ]));
    let pca = dir.path().join("pca.csv");
    let out = evrep_bin(&[
        "cluster-report", "--checkpoint", &format!("{run}/checkpoint.json"), "--corpus", &corpus,
        "--top-k", "3", "--labels", &format!("{data}/labels.jsonl"), "--pca",
        pca.to_str().unwrap(),
    ]);
    assert_success(&out);
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prototype,rank,event_id,score,event"));
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "bad row {line}");
        let proto: usize = fields[0].parse().unwrap();
        assert!(proto < 4);
        let rank: usize = fields[1].parse().unwrap();
        assert!((1..=3).contains(&rank));
        rows += 1;
    }
    assert!(rows > 0 && rows <= 12);
    assert!(stderr_of(&out).contains("purity over"));

    let events = load_corpus(&corpus).unwrap().events.len();
    let pca_text = std::fs::read_to_string(&pca).unwrap();
    let mut pca_lines = pca_text.lines();
    assert_eq!(pca_lines.next(), Some("event_id,x,y,prototype_id"));
    assert_eq!(pca_lines.count(), events);
}

#[test]
fn sweep_emits_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let out = evrep_bin(&[
        "sweep", "--param", "gamma", "--values", "0,1", "--spec", &spec, "--steps", "30",
        "--probes", "20", "--quiet",
    ]);
    assert_success(&out);
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,value,purity,hard_similarity");
    assert_eq!(lines.len(), 3);
    for (line, value) in lines[1..].iter().zip(["0", "1"]) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "gamma");
        assert_eq!(fields[1], value);
        for metric in &fields[2..] {
            let x: f64 = metric.parse().unwrap();
            assert!((0.0..=1.0).contains(&x), "metric {x} out of range");
        }
    }
}

#[test]
fn identical_invocations_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let corpus = format!("{data}/corpus.jsonl");
    let mut artifacts = Vec::new();
    for run in ["one", "two"] {
        let out_dir = dir.path().join(run).to_str().unwrap().to_string();
        let out = evrep_bin(&[
            "train", "--corpus", &corpus, "--out", &out_dir, "--steps", "50", "--seed", "11",
            "--quiet",
        ]);
        assert_success(&out);
        assert!(out.stdout.is_empty());
        assert!(out.stderr.is_empty());
        artifacts.push((
            std::fs::read(format!("{out_dir}/checkpoint.json")).unwrap(),
            std::fs::read(format!("{out_dir}/metrics.csv")).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "checkpoints differ");
    assert_eq!(artifacts[0].1, artifacts[1].1, "metrics logs differ");
}

#[test]
fn environment_variables_do_not_change_behavior() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let mut outputs = Vec::new();
    for env_value in [None, Some("debug"), Some("off")] {
        let out_dir = dir.path().join(format!("{env_value:?}"));
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_evrep"));
        cmd.args([
            "synth", "--spec", &spec, "--out", out_dir.to_str().unwrap(), "--hard-sim", "5",
        ]);
        if let Some(value) = env_value {
            cmd.env("RUST_LOG", value);
        }
        let out = cmd.output().expect("spawning the evrep binary");
        assert_success(&out);
        outputs.push((
            out.stdout,
            out.stderr,
            std::fs::read(out_dir.join("hard_sim.jsonl")).unwrap(),
        ));
    }
    // Same stdout and probe bytes; stderr logging also ignores RUST_LOG,
    // differing only in the printed output directory we chose above.
    for window in outputs.windows(2) {
        assert_eq!(window[0].0, window[1].0);
        assert_eq!(window[0].2, window[1].2);
        let lines = |err: &[u8]| String::from_utf8(err.to_vec()).unwrap().lines().count();
        assert_eq!(lines(&window[0].1), lines(&window[1].1));
    }
}
