use std::path::{Path, PathBuf};

use simtrans_core::harness::{
    ee_over_timeline, load_inputs, prepare_corpus, process_utterance, run, summary_table, HarnessError, PrepareMode,
    RunConfig,
};
use simtrans_core::stream::group_utterances;
use simtrans_core::{EeParams, Policy};

fn talk() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy_talk")
}

#[test]
fn defaults_fill_missing_sections() {
    let cfg = RunConfig::from_toml("[paths]\nstream = \"s\"\nlexicon = \"l\"\n", "/tmp").unwrap();
    assert_eq!(cfg.detector.delta1, 0.7);
    assert_eq!(cfg.detector.delta2, 0.3);
    assert_eq!(cfg.detector.max_dynamic_context, 5);
    assert_eq!(cfg.policy.kind, "context_aware");
    assert_eq!(cfg.metrics.ee_r, 0.3);
    assert!(cfg.normalization.enabled);
    assert_eq!(cfg.resolve(Path::new("s")), Path::new("/tmp/s"));
}

#[test]
fn config_errors_are_classified() {
    let bad = RunConfig::from_toml("[detector]\ndelta1 = \"high\"\n", ".").unwrap_err();
    assert_eq!(bad.exit_code(), 1);
    let mut cfg = RunConfig::load(&talk().join("config.toml")).unwrap();
    cfg.detector.delta2 = 0.9;
    assert!(matches!(load_inputs(&cfg), Err(HarnessError::Config(_))));
    let mut cfg = RunConfig::load(&talk().join("config.toml")).unwrap();
    cfg.policy.kind = "wait_k".into();
    assert!(
        matches!(load_inputs(&cfg), Err(HarnessError::Config(_))),
        "wait_k without k_wait"
    );
    let mut cfg = RunConfig::load(&talk().join("config.toml")).unwrap();
    cfg.paths.lm = Some("lm.txt".into());
    assert!(
        matches!(load_inputs(&cfg), Err(HarnessError::Config(_))),
        "lm and lm_corpus together"
    );
}

#[test]
fn parallel_run_keeps_stream_order() {
    let cfg = RunConfig::load(&talk().join("config.toml")).unwrap();
    let inputs = load_inputs(&cfg).unwrap();
    let report = run(&inputs).unwrap();
    let sequential: Vec<_> = group_utterances(&inputs.events)
        .iter()
        .map(|u| process_utterance(u, &inputs).unwrap())
        .collect();
    assert_eq!(report.utterances, sequential);
    let ids: Vec<&str> = report.utterances.iter().map(|u| u.id.as_str()).collect();
    assert_eq!(ids, ["u01", "u02", "u03", "u04", "u05", "u06"]);
    assert_eq!(report.settings.policy, Policy::ContextAware { k_discard: 1 });
    let table = summary_table(&report);
    assert_eq!(table.lines().count(), 2 + 6 + 2);
    assert!(table.contains("BLEU"));
}

#[test]
fn prepare_statistics() {
    let (records, stats) = prepare_corpus(
        PrepareMode::Partial,
        "a ， b c\nx y\n",
        Some("A , B C\nY X\n"),
        Some("0-0 1-1 2-2 3-3\n0-1 1-0\n"),
    )
    .unwrap();
    // the crossed second pair has no boundary cell at all
    assert_eq!(stats.lines, 2);
    assert_eq!(stats.sub_sentence_splits, 1);
    assert_eq!(stats.segment_splits, 3);
    assert_eq!(records, ["a\tA", "a ，\tA ,", "a ， b\tA , B", "a ， b c\tA , B C"]);

    let bad = prepare_corpus(PrepareMode::Context, "a\n", Some("A\n"), Some("0-7\n")).unwrap_err();
    assert_eq!(bad.exit_code(), 2);
    assert!(prepare_corpus(PrepareMode::Partial, "a\n", None, None).is_err());
}

#[test]
fn timeline_file_efficiency() {
    let rows = ee_over_timeline("x\t9\t8\n\ny\t4\t10\ny\t10\t5\n", EeParams::default()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].ee, 1.0 / 8.0);
    assert_eq!(rows[1].inverse_ee, 5.0);
    assert!(ee_over_timeline("x\t1\t1\ny\t1\t1\nx\t1\t1\n", EeParams::default()).is_err());
    assert!(ee_over_timeline("x\t1\n", EeParams::default()).is_err());
    assert!(ee_over_timeline("x\t1\t0\n", EeParams::default()).is_err());
}
