//! End-to-end training runs on a small synthetic corpus: loss descent,
//! determinism down to the bytes on disk, checkpoint fidelity, and the
//! unit-norm contract on trained representations.

use evrep::corpus::{generate_synthetic, write_corpus, SynthSpec};
use evrep::encoder::{encode, format_input, EncoderState};
use evrep::losses::PrototypeBank;
use evrep::numerics::Rng;
use evrep::trainer::{train, train_on, Checkpoint, TrainConfig};

fn small_spec() -> SynthSpec {
    SynthSpec {
        n_clusters: 5,
        events_per_cluster: 40,
        docs: 120,
        events_per_doc: 5,
        within_cluster_doc_prob: 0.9,
        vocab_per_cluster: 8,
        seed: 7,
    }
}

fn small_cfg(steps: usize) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.batch_size = 32;
    cfg.steps = steps;
    cfg.d = 16;
    cfg.d_emb = 16;
    cfg.prototypes = 5;
    cfg.seed = 11;
    cfg
}

fn load_csv_column(path: &std::path::Path, col: usize) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,l_cl,l_cp,l_mlm,overall");
    lines
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn loss_descends_over_the_first_two_hundred_steps() {
    let synth = generate_synthetic(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = train_on(&small_cfg(200), &synth.corpus, dir.path()).unwrap();
    assert_eq!(out.steps_run, 200);
    let overall = load_csv_column(&out.metrics_path, 4);
    assert_eq!(overall.len(), 200);
    assert!(overall.iter().all(|x| x.is_finite()));
    let head: f64 = overall[..50].iter().sum::<f64>() / 50.0;
    let tail: f64 = overall[150..].iter().sum::<f64>() / 50.0;
    assert!(
        tail < head,
        "moving average did not descend: first 50 {head}, last 50 {tail}"
    );
}

#[test]
fn identical_runs_write_identical_bytes() {
    let synth = generate_synthetic(&small_spec()).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg = small_cfg(25);
    let a = train_on(&cfg, &synth.corpus, dir_a.path()).unwrap();
    let b = train_on(&cfg, &synth.corpus, dir_b.path()).unwrap();
    assert_eq!(
        std::fs::read(&a.checkpoint_path).unwrap(),
        std::fs::read(&b.checkpoint_path).unwrap()
    );
    assert_eq!(
        std::fs::read(&a.metrics_path).unwrap(),
        std::fs::read(&b.metrics_path).unwrap()
    );
    // A different seed diverges.
    let dir_c = tempfile::tempdir().unwrap();
    let mut other = cfg.clone();
    other.seed = 12;
    let c = train_on(&other, &synth.corpus, dir_c.path()).unwrap();
    assert_ne!(
        std::fs::read(&a.checkpoint_path).unwrap(),
        std::fs::read(&c.checkpoint_path).unwrap()
    );
}

#[test]
fn zero_steps_checkpoints_the_initialization() {
    let synth = generate_synthetic(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(0);
    let out = train_on(&cfg, &synth.corpus, dir.path()).unwrap();
    assert_eq!(out.steps_run, 0);
    assert_eq!(out.checkpoint.step, 0);
    let (vocab, state, bank) = out.checkpoint.restore().unwrap();
    // Rebuild the initialization by the same derivation.
    let mut rng = Rng::new(cfg.seed).split("init");
    let expected: EncoderState<f64> = EncoderState::init(
        vocab.len(),
        cfg.d_emb,
        cfg.d,
        cfg.dropout_rate,
        cfg.normalize,
        &mut rng,
    )
    .unwrap();
    let expected_bank: PrototypeBank<f64> =
        PrototypeBank::init(cfg.prototypes, cfg.d, cfg.temperature, &mut rng).unwrap();
    assert_eq!(state, expected);
    assert_eq!(bank, expected_bank);
    // Metrics file holds only the header.
    assert_eq!(
        std::fs::read_to_string(&out.metrics_path).unwrap(),
        "step,l_cl,l_cp,l_mlm,overall\n"
    );
}

#[test]
fn trained_encodings_and_prototypes_stay_unit_norm() {
    let synth = generate_synthetic(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = train_on(&small_cfg(30), &synth.corpus, dir.path()).unwrap();
    let (vocab, state, bank) = out.checkpoint.restore().unwrap();
    for (_, event) in synth.corpus.events.iter().take(20) {
        let seq = format_input(event, &vocab).unwrap();
        let z = encode(&state, &seq, None).unwrap();
        assert!((z.norm() - 1.0).abs() < 1e-12);
    }
    for j in 0..bank.n_prototypes() {
        let norm: f64 = bank
            .prototypes()
            .row(j)
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn train_reads_a_corpus_file_and_writes_periodic_checkpoints() {
    let synth = generate_synthetic(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    write_corpus(&synth.corpus, &corpus_path).unwrap();
    let mut cfg = small_cfg(10);
    cfg.checkpoint_every = 4;
    let out = train(&cfg, &corpus_path, dir.path().join("run")).unwrap();
    assert!(dir.path().join("run/checkpoint_step4.json").exists());
    assert!(dir.path().join("run/checkpoint_step8.json").exists());
    assert!(!dir.path().join("run/checkpoint_step12.json").exists());
    let mid = Checkpoint::load(dir.path().join("run/checkpoint_step8.json")).unwrap();
    assert_eq!(mid.step, 8);
    let final_ckpt = Checkpoint::load(&out.checkpoint_path).unwrap();
    assert_eq!(final_ckpt.step, 10);
    assert_ne!(mid.encoder.embed, final_ckpt.encoder.embed);
    // The metrics rows carry the step indices in order.
    let steps = load_csv_column(&out.metrics_path, 0);
    assert_eq!(steps, (0..10).map(|s| s as f64).collect::<Vec<_>>());
}

#[test]
fn ablation_objectives_run_end_to_end() {
    let synth = generate_synthetic(&small_spec()).unwrap();
    for objective in ["infonce_only", "margin_only"] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg(8);
        cfg.set("objective", objective).unwrap();
        let out = train_on(&cfg, &synth.corpus, dir.path()).unwrap();
        assert_eq!(out.steps_run, 8);
        let l_cp = load_csv_column(&out.metrics_path, 2);
        assert!(l_cp.iter().all(|&x| x == 0.0), "{objective} trained l_cp");
        let (_, state, _) = out.checkpoint.restore().unwrap();
        assert!(state.is_finite());
    }
}
