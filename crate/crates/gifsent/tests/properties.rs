mod common;

use std::fs;

use gifsent::corpus_io::{load_corpus, write_corpus, CorpusFormat};
use gifsent::media::extract_frames;
use gifsent::pipeline::{cmd_ingest, cmd_score};
use gifsent::PipelineConfig;
use gifsent_core::corpus::TweetRecord;
use gifsent_core::frames::sample_times;
use gifsent_core::fusion::Sentiment;
use proptest::prelude::*;

fn arb_record() -> impl Strategy<Value = TweetRecord> {
    (
        "[a-z0-9]{1,6}",
        "\\PC{0,40}",
        "[a-z0-9]{1,4}",
        any::<bool>(),
        proptest::option::of("[a-z ]{1,10}"),
        proptest::option::of("[a-z/._]{1,12}"),
    )
        .prop_map(|(tweet, text, gif, pos, cat, media)| TweetRecord {
            record_id: String::new(),
            tweet_id: tweet,
            tweet_text: text,
            gif_id: gif,
            media_path: media,
            induced_label: if pos { Sentiment::Positive } else { Sentiment::Negative },
            reaction_category: cat,
            media_missing: None,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn corpus_round_trips(mut recs in prop::collection::vec(arb_record(), 0..20)) {
        use unicode_normalization::UnicodeNormalization;
        for (i, r) in recs.iter_mut().enumerate() {
            r.record_id = format!("r{i}");
            r.tweet_text = r.tweet_text.nfc().collect();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        write_corpus(&p, &recs).unwrap();
        let loaded = load_corpus(&p, CorpusFormat::Jsonl).unwrap();
        prop_assert!(loaded.rejects.is_empty());
        prop_assert_eq!(loaded.index.records(), &recs[..]);
    }

    #[test]
    fn every_row_is_accepted_or_rejected(labels in prop::collection::vec(0u8..4, 1..30), dup in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let mut body = String::new();
        for (i, l) in labels.iter().enumerate() {
            let id = if dup && i % 5 == 4 { 0 } else { i };
            body.push_str(&format!(
                "{{\"record_id\":\"r{id}\",\"tweet_id\":\"t{i}\",\"tweet_text\":\"x\",\"gif_id\":\"g\",\"induced_label\":{l}}}\n"
            ));
        }
        fs::write(&p, body).unwrap();
        let loaded = load_corpus(&p, CorpusFormat::Jsonl).unwrap();
        prop_assert_eq!(loaded.index.len() + loaded.rejects.len(), labels.len());
    }

    #[test]
    fn decoded_frame_count_matches_duration(delays in prop::collection::vec(2u16..60, 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.gif");
        let frames: Vec<(u8, u16)> = delays.iter().enumerate().map(|(i, &d)| ((i * 40) as u8, d)).collect();
        common::write_gray_gif(&p, 8, 8, &frames);
        let duration = delays.iter().map(|&d| d as u32).sum::<u32>() as f64 / 100.0;
        let set = extract_frames(&p, "a", 0.1).unwrap();
        prop_assert_eq!(set.len(), sample_times(duration, 0.1).unwrap().len());
        for (k, f) in set.frames().iter().enumerate() {
            prop_assert!((f.timestamp - k as f64 * 0.1).abs() < 1e-12);
        }
    }
}

#[test]
fn parallelism_does_not_change_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = common::materialize(dir.path());
    let mut outputs = Vec::new();
    for workers in [1usize, 3, 12] {
        let out_dir = dir.path().join(format!("out{workers}"));
        let config = PipelineConfig::load(
            Some(&cfg_path),
            &[
                ("pipeline.parallelism".into(), workers.to_string()),
                ("pipeline.out_dir".into(), format!("{:?}", out_dir.to_str().unwrap())),
            ],
        )
        .unwrap();
        cmd_ingest(&config).unwrap();
        let s = cmd_score(&config).unwrap();
        outputs.push(fs::read(s.scores).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}
