use proptest::prelude::*;

use simtrans_core::detector::{DetectorConfig, PunctuationScorer};
use simtrans_core::latency::{equilibrium_efficiency, SegmentLengths};
use simtrans_core::policy::{committed_prefix_trace, stable_prefix_trace, translate_stream};
use simtrans_core::stream::{parse_stream, serialize_stream};
use simtrans_core::{EeParams, Policy, ToyLexiconOracle};

const STREAM: &str = "t1\t0\t我们\nt1\t200\t今天\nt1\t400\t，\nt1\t600\t讨论\nt1\t800\t问题\nt1\t1000\t。\nt2\t1500\t谢谢\nt2\t1700\t。\n";

fn oracle() -> ToyLexiconOracle {
    ToyLexiconOracle::parse("我们\twe\n今天\ttoday\n讨论\tdiscuss\n问题\tissues\n谢谢\tthanks\n，\t,\n。\t.\n").unwrap()
}

#[test]
fn stream_to_metrics() {
    let events = parse_stream(STREAM.as_bytes()).unwrap();
    assert_eq!(serialize_stream(&events), STREAM);
    let out = translate_stream(
        &events,
        &DetectorConfig::default(),
        &PunctuationScorer,
        &oracle(),
        Policy::ContextAware { k_discard: 1 },
    )
    .unwrap();
    assert_eq!(out.len(), 2);
    let (id, first) = &out[0];
    assert_eq!(id, "t1");
    assert_eq!(first.committed().join(" "), "we today , discuss issues .");
    // segments (3, 3) then (3, 4) after retracting ","; S(1) = 0.3 * (3 - 3) = 0
    assert_eq!(first.timeline.lengths(), vec![(3, 3), (3, 4)]);
    assert_eq!(first.timeline.retracted_counts(), vec![0, 1]);
    let segs: Vec<SegmentLengths> = first.timeline.lengths().into_iter().map(SegmentLengths::from).collect();
    assert_eq!(equilibrium_efficiency(&segs, EeParams::default()), Ok(0.25));
    assert_eq!(out[1].1.committed().join(" "), "thanks .");
}

fn tokens() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(
        prop::sample::select(vec!["我们", "今天", "讨论", "问题", "谢谢", "，", "。"]),
        1..30,
    )
}

proptest! {
    #[test]
    fn stable_view_only_grows(toks in tokens(), k in 0usize..4) {
        let text: String = toks.iter().enumerate().map(|(i, t)| format!("u\t{}\t{t}\n", i * 10)).collect();
        let events = parse_stream(text.as_bytes()).unwrap();
        let out = translate_stream(&events, &DetectorConfig::default(), &PunctuationScorer, &oracle(), Policy::ContextAware { k_discard: k }).unwrap();
        let t = &out[0].1;
        let stable = stable_prefix_trace(t, k);
        for w in stable.windows(2) {
            prop_assert!(w[1].starts_with(&w[0]));
        }
        let revisable = committed_prefix_trace(&t.timeline);
        prop_assert_eq!(revisable.last().unwrap(), &t.timeline.committed_target);
        prop_assert_eq!(stable.last().unwrap(), &t.timeline.committed_target);
        prop_assert_eq!(t.timeline.source_consumed(), toks.len());
    }
}
