use lmcf::dataset::{
    load_sequence, read_results, synthesize_sequence, write_results, write_sequence, Frames, GroundTruthPolicy,
    ResultLog, Sequence, SynthSpec,
};
use lmcf::geometry::Rect;
use lmcf::image::Image;
use lmcf::tracker::{track_frames, TrackerConfig};

fn tiny_sequence() -> Sequence {
    let frames = (0..3u8).map(|i| Image::filled(24, 16, [10 * i, 200, 30 + i])).collect();
    Sequence {
        name: "tiny".into(),
        frames: Frames::Memory(frames),
        ground_truth: vec![
            Some(Rect::new(2.0, 3.0, 8.0, 6.0)),
            None,
            Some(Rect::new(4.5, 3.25, 8.0, 6.0)),
        ],
        attributes: vec!["OCC".into(), "SV".into()],
    }
}

#[test]
fn sequence_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seq = tiny_sequence();
    write_sequence(&seq, dir.path()).unwrap();
    let loaded = load_sequence(dir.path(), GroundTruthPolicy::Required).unwrap();
    let back = loaded.sequence;
    assert_eq!(back.len(), 3);
    assert_eq!(back.ground_truth, seq.ground_truth);
    assert_eq!(back.attributes, seq.attributes);
    for i in 0..3 {
        assert_eq!(back.frame(i).unwrap(), seq.frame(i).unwrap(), "frame {i}");
    }
}

#[test]
fn missing_annotations_follow_policy() {
    let dir = tempfile::tempdir().unwrap();
    write_sequence(&tiny_sequence(), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("groundtruth_rect.txt")).unwrap();
    assert!(load_sequence(dir.path(), GroundTruthPolicy::Required).is_err());
    let loaded = load_sequence(dir.path(), GroundTruthPolicy::Optional).unwrap();
    assert!(!loaded.warnings.is_empty());
    assert!(loaded.sequence.ground_truth.iter().all(Option::is_none));
}

#[test]
fn result_log_round_trips_bit_exact() {
    let spec = SynthSpec {
        length: 12,
        ..SynthSpec::translate_fixture(3)
    };
    let seq = synthesize_sequence(&spec).unwrap().sequence;
    let records = track_frames(
        seq.frame_iter(),
        seq.init_box().unwrap(),
        TrackerConfig::default(),
        true,
    )
    .unwrap();
    let log = ResultLog {
        sequence: seq.name.clone(),
        config: TrackerConfig::default(),
        records,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/log.jsonl");
    write_results(&log, &path).unwrap();
    let back = read_results(&path).unwrap();
    assert_eq!(back, log);
    assert!(back.records.iter().all(|r| r.latency_ms.is_some()));
}

#[test]
fn corrupt_result_log_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"format\":\"something-else\",\"version\":1}\n").unwrap();
    assert!(read_results(&path).is_err());
    std::fs::write(&path, "not json\n").unwrap();
    assert!(read_results(&path).is_err());
}
