mod common;

use std::fs;
use std::path::Path;

use common::*;
use serde_json::Value;

fn json(out: &std::process::Output) -> Value {
    serde_json::from_str(stdout(out).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn preprocess_nine_images_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("beach");
    write_images(&src, 9, 1);
    let data = tmp.path().join("data");
    let args = [
        "--data-dir",
        data.to_str().unwrap(),
        "preprocess",
        src.to_str().unwrap(),
    ];

    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let set = data.join("sets/beach");
    let thumbs = fs::read_dir(&set)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".thumb.png")
        })
        .count();
    assert_eq!(thumbs, 9);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(set.join("set.json")).unwrap()).unwrap();
    assert_eq!(manifest["set_id"], "beach");
    assert_eq!(manifest["images"].as_array().unwrap().len(), 9);

    let first = read_dir_bytes(&set);
    assert!(run(&args).status.success());
    assert_eq!(first, read_dir_bytes(&set));
}

#[test]
fn preprocess_rejects_seven_images() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_images(&src, 7, 2);
    let out = run(&[
        "--data-dir",
        tmp.path().to_str().unwrap(),
        "preprocess",
        src.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("9"), "{}", stderr(&out));

    let out = run(&[
        "--json",
        "--data-dir",
        tmp.path().to_str().unwrap(),
        "preprocess",
        src.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["code"], "set_size");
}

#[test]
fn builtin_composite_scores_are_finite() {
    let tmp = tempfile::tempdir().unwrap();
    let set = prepared_set(tmp.path(), 3);
    let out = run(&[
        "--json",
        "score",
        set.to_str().unwrap(),
        "--scorer",
        "heuristic.composite",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    let scores = v["scores"].as_object().unwrap();
    assert_eq!(scores.len(), 9);
    assert!(scores.values().all(|s| s.as_f64().unwrap().is_finite()));
    assert!(set.join("scores.heuristic.composite.json").exists());
}

#[test]
fn external_stub_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let set = prepared_set(tmp.path(), 4);
    let nine: Vec<String> = (1..=9).map(|i| i.to_string()).collect();
    let nine: Vec<&str> = nine.iter().map(String::as_str).collect();
    let out = run(&[
        "--json",
        "score",
        set.to_str().unwrap(),
        "--scorer",
        "external:stub",
        "--external-scorer",
        &stub_scorer(&nine),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    for i in 0..9 {
        assert_eq!(v["scores"][format!("img{i}")], (i + 1) as f64);
    }

    let out = run(&[
        "--json",
        "score",
        set.to_str().unwrap(),
        "--scorer",
        "external:short",
        "--external-scorer",
        &stub_scorer(&nine[..8]),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["code"], "incomplete_scores");
    assert!(!set.join("scores.external:short.json").exists());

    let out = run(&[
        "score",
        set.to_str().unwrap(),
        "--scorer",
        "external:fails",
        "--external-scorer",
        "cat >/dev/null; echo boom >&2; exit 3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("boom"), "{}", stderr(&out));
}

#[test]
fn sidecar_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let set = prepared_set(tmp.path(), 5);
    let sidecar = tmp.path().join("scores.jsonl");
    let lines: String = (0..9)
        .map(|i| format!("{{\"id\":\"img{i}\",\"score\":{}}}\n", 9 - i))
        .collect();
    fs::write(&sidecar, lines).unwrap();
    let out = run(&[
        "--json",
        "score",
        set.to_str().unwrap(),
        "--scorer",
        "external:sidecar",
        "--sidecar",
        sidecar.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out)["scores"]["img0"], 9.0);
}

#[test]
fn arrange_places_best_image() {
    let tmp = tempfile::tempdir().unwrap();
    let set = prepared_set(tmp.path(), 6);
    // img4 scores highest.
    let scores = ["3", "1", "7", "2", "9", "5", "4", "8", "6"];
    let s = set.to_str().unwrap();
    let out = run(&[
        "score",
        s,
        "--scorer",
        "external:stub",
        "--external-scorer",
        &stub_scorer(&scores),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    for (strategy, pos, file) in [
        ("center", "P5", "layout.external:stub.center.json"),
        ("sequential", "P1", "layout.external:stub.sequential.json"),
    ] {
        let out = run(&[
            "--json",
            "arrange",
            s,
            "--scorer",
            "external:stub",
            "--strategy",
            strategy,
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert_eq!(json(&out)["placement"][pos], "img4");
        let saved: Value =
            serde_json::from_str(&fs::read_to_string(set.join(file)).unwrap()).unwrap();
        assert_eq!(saved["placement"][pos], "img4");

        let out = run(&[
            "--json",
            "compose",
            s,
            "--scorer",
            "external:stub",
            "--strategy",
            strategy,
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let path = json(&out)["path"].as_str().unwrap().to_string();
        let img = image::open(&path).unwrap();
        assert_eq!((img.width(), img.height()), (900, 900));
    }
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let out = run(&[
        "arrange",
        "somewhere",
        "--scorer",
        "heuristic.composite",
        "--strategy",
        "spiral",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("spiral"));
}

#[test]
fn pipeline_writes_four_composites_per_set() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for k in 0..3 {
        let d = tmp.path().join(format!("in/set{k}"));
        write_images(&d, 9, 10 + k);
        dirs.push(d.to_string_lossy().into_owned());
    }
    let out_dir = tmp.path().join("out");
    let mut args = vec![
        "--json",
        "pipeline",
        "--jobs",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    args.extend(dirs.iter().map(String::as_str));
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out)["sets"].as_array().unwrap().len(), 3);
    for k in 0..3 {
        let set = out_dir.join(format!("set{k}"));
        let composites = fs::read_dir(&set)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with("composite.")
            })
            .count();
        assert_eq!(composites, 4);
        assert!(set.join("quad.json").exists());
    }

    // Build and tally an (empty) study from the pipeline outputs.
    let bundle = tmp.path().join("bundle");
    let out = run(&[
        "--json",
        "study",
        "build",
        "--quads",
        out_dir.to_str().unwrap(),
        "--questionnaires",
        "1",
        "--questions",
        "3",
        "--seed",
        "9",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let media = fs::read_dir(bundle.join("media")).unwrap().count();
    assert_eq!(media, 12);
    let out = run(&["--json", "study", "tally", bundle.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out)["tally"]["total"], 0);
}

/// 250 pipeline-shaped quads with placeholder composites.
fn fake_quads(root: &Path, n: usize) {
    for i in 0..n {
        let dir = root.join(format!("set{i:03}"));
        fs::create_dir_all(&dir).unwrap();
        let mut variants = Vec::new();
        for (scorer, scorer_id) in [
            ("aesthetic", "heuristic.composite"),
            ("content", "heuristic.colorfulness"),
        ] {
            for strategy in ["sequential", "center"] {
                let path = format!("composite.set{i:03}.{scorer_id}.{strategy}.png");
                fs::write(dir.join(&path), format!("{i}-{scorer}-{strategy}")).unwrap();
                variants.push(serde_json::json!({
                    "scorer": scorer, "strategy": strategy, "scorer_id": scorer_id, "path": path,
                }));
            }
        }
        let quad = serde_json::json!({ "set_id": format!("set{i:03}"), "variants": variants });
        fs::write(dir.join("quad.json"), quad.to_string()).unwrap();
    }
}

#[test]
fn study_build_defaults_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let quads = tmp.path().join("quads");
    fake_quads(&quads, 250);
    let build = |out: &str| {
        let out = tmp.path().join(out);
        let o = run(&[
            "study",
            "build",
            "--quads",
            quads.to_str().unwrap(),
            "--study-id",
            "s",
            "--seed",
            "77",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("study.json")).unwrap()
    };
    let a = build("a");
    let b = build("b");
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    let qs = v["questionnaires"].as_array().unwrap();
    assert_eq!(qs.len(), 5);
    assert!(qs
        .iter()
        .all(|q| q["questions"].as_array().unwrap().len() == 50));

    // Too few quads for 5×50.
    let few = tmp.path().join("few");
    fake_quads(&few, 10);
    let out = run(&[
        "--json",
        "study",
        "build",
        "--quads",
        few.to_str().unwrap(),
        "--out",
        tmp.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["code"], "insufficient_sets");
}

#[test]
fn tally_on_fixture() {
    let out = run(&["study", "tally", fixture_dir().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for n in ["628", "599", "585", "438", "2250", "chi-square"] {
        assert!(text.contains(n), "missing {n} in\n{text}");
    }

    let out = run(&[
        "--json",
        "study",
        "tally",
        fixture_dir().join("ballots.jsonl").to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_eq!(v["tally"]["total"], 2250);
    assert_eq!(v["summary"]["degrees_of_freedom"], 3);
}
