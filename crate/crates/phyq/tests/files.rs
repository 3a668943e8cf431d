use base64::Engine;
use phyq::files::{
    decode_tensor, generate_task_set, observe, read_run_log, read_task_set, write_task_set, LevelFile, Manifest,
    ObservationFrame, ObservationKind, RunLogWriter, Side, MANIFEST_FILE, TENSOR_SHAPE,
};
use phyq_core::game::{replay, Episode};
use phyq_core::perception::{encode_tensor, symbolize, ScreenMap, SCREEN_HEIGHT, SCREEN_WIDTH};
use phyq_core::score::AttemptRecord;
use phyq_core::taskgen::{catalog, find_template, SplitMode};

fn small_set() -> phyq::files::TaskSet {
    let templates = vec![find_template("3.1").unwrap(), find_template("3.2").unwrap()];
    generate_task_set(&templates, 5, 11).unwrap()
}

#[test]
fn task_set_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let set = small_set();
    write_task_set(dir.path(), &set, &catalog()).unwrap();
    let back = read_task_set(dir.path()).unwrap();
    assert_eq!(back, set);
    for t in &back.tasks {
        assert!(replay(&t.level, &t.reference_solution).unwrap().passed);
    }
}

#[test]
fn same_seed_writes_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_task_set(a.path(), &small_set(), &catalog()).unwrap();
    write_task_set(b.path(), &small_set(), &catalog()).unwrap();
    for entry in walk(a.path()) {
        let rel = entry.strip_prefix(a.path()).unwrap();
        assert_eq!(std::fs::read(&entry).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
    }
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn manifest_tags_follow_the_splits() {
    let dir = tempfile::tempdir().unwrap();
    let set = generate_task_set(&[find_template("3.1").unwrap(), find_template("3.2").unwrap()], 10, 2).unwrap();
    write_task_set(dir.path(), &set, &catalog()).unwrap();
    let m: Manifest = phyq::files::read_json(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.tasks.len(), 20);
    for e in &m.tasks {
        assert_eq!(e.scenario, 3);
        assert_eq!(e.local, if e.index >= 8 { Side::Test } else { Side::Train });
        let broad_train = find_template(&e.template_id).unwrap().broad_train;
        assert_eq!(e.broad, if broad_train { Side::Train } else { Side::Test });
    }
}

#[test]
fn wrong_schema_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let set = small_set();
    let mut f = LevelFile::from_instance(&set.tasks[0]);
    f.schema = "phyq.level/0".into();
    let p = dir.path().join("x.json");
    phyq::files::write_json(&p, &f).unwrap();
    assert!(LevelFile::load(&p).is_err());
}

#[test]
fn observation_frames_decode() {
    let set = small_set();
    let ep = Episode::new(&set.tasks[0].level).unwrap();
    let map = ScreenMap::new(&ep.bounds());
    match observe(ep.world(), &map, ObservationKind::Image).unwrap() {
        ObservationFrame::Image { width, height, png_base64 } => {
            assert_eq!((width, height), (SCREEN_WIDTH, SCREEN_HEIGHT));
            let bytes = base64::engine::general_purpose::STANDARD.decode(png_base64).unwrap();
            let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
            let reader = decoder.read_info().unwrap();
            assert_eq!((reader.info().width as usize, reader.info().height as usize), (width, height));
        }
        other => panic!("{other:?}"),
    }
    match observe(ep.world(), &map, ObservationKind::Tensor).unwrap() {
        ObservationFrame::Tensor { shape, bits_base64 } => {
            assert_eq!(shape, TENSOR_SHAPE);
            let t = decode_tensor(&bits_base64).unwrap();
            assert_eq!(t, encode_tensor(&symbolize(ep.world(), &map)).unwrap());
        }
        other => panic!("{other:?}"),
    }
    let json = serde_json::to_string(&observe(ep.world(), &map, ObservationKind::Symbolic).unwrap()).unwrap();
    let back: ObservationFrame = serde_json::from_str(&json).unwrap();
    assert_eq!(back, ObservationFrame::Symbolic { frame: symbolize(ep.world(), &map) });
}

#[test]
fn run_log_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("log.jsonl");
    let rec = |k| AttemptRecord {
        agent: "random".into(),
        mode: SplitMode::Broad,
        template_id: "4.2".into(),
        task_index: 3,
        attempt_index: k,
        seed: 99 + k as u64,
        passed: k % 2 == 0,
        shots_used: 2,
        wall_time_ms: 1.5,
        decisions: vec![],
    };
    let mut w = RunLogWriter::create(&p).unwrap();
    for k in 0..4 {
        w.append(&rec(k)).unwrap();
    }
    w.flush().unwrap();
    assert_eq!(read_run_log(&p).unwrap(), (0..4).map(rec).collect::<Vec<_>>());
}
