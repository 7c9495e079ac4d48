use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boxlens::detector::{SyntheticObject, SyntheticScene};
use boxlens::metrics::MetricReport;
use boxlens::reporting::{RunConfig, RunKind, RunManifest, SaliencyFile, SEED_ENV};

fn boxlens(args: &[&str]) -> Output {
    boxlens_env(args, None)
}

fn boxlens_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_boxlens"));
    cmd.args(args).env_remove(SEED_ENV);
    if let Some(s) = seed {
        cmd.env(SEED_ENV, s);
    }
    cmd.output().unwrap()
}

fn read_report(path: &Path) -> MetricReport {
    MetricReport::read_csv(std::fs::File::open(path).unwrap()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_scene(dir: &Path, objects: Vec<SyntheticObject>) -> String {
    let scene = SyntheticScene::new(48, 40, 3, 0.2, objects);
    let path = dir.join("scene.json");
    std::fs::write(&path, serde_json::to_string_pretty(&scene).unwrap()).unwrap();
    format!("synthetic:{}", path.display())
}

fn two_objects(dir: &Path) -> String {
    write_scene(
        dir,
        vec![
            SyntheticObject::rect(0, [4, 4, 18, 16]).with_color([0.9, 0.4, 0.1]),
            SyntheticObject::rect(2, [26, 18, 44, 36]).with_color([0.2, 0.7, 0.9]),
        ],
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn explain(detector: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["explain", "--detector", detector, "--out", s(out), "--masks", "64"];
    args.extend_from_slice(extra);
    boxlens(&args)
}

fn json_keys(v: &serde_json::Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let Some(map) = v.as_object() {
        for (k, child) in map {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.insert(key.clone());
            json_keys(child, &key, out);
        }
    }
}

#[test]
fn explain_and_evaluate_two_objects() {
    let dir = tempfile::tempdir().unwrap();
    let det = two_objects(dir.path());
    let run = dir.path().join("run");
    let out = explain(&det, &run, &["--method", "drise"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = RunManifest::load(run.join("manifest.json")).unwrap();
    assert_eq!(manifest.kind, RunKind::Explain);
    assert_eq!(manifest.images.len(), 1);
    let targets = &manifest.images[0].targets;
    assert_eq!(targets.len(), 2);
    for t in targets {
        assert_eq!(t.status, "ok");
        let sal = SaliencyFile::read(run.join(t.saliency_file.as_ref().unwrap())).unwrap();
        assert_eq!((sal.width, sal.height), (48, 40));
        assert!(run.join(t.heatmap_file.as_ref().unwrap()).exists());
    }

    let eval = dir.path().join("eval");
    let out = boxlens(&[
        "evaluate",
        "--manifest",
        s(&run.join("manifest.json")),
        "--out",
        s(&eval),
        "--gamma",
        "0.9",
        "--steps",
        "20",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&eval.join("metrics.csv"));
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows.iter().all(|r| r.status == "ok"));
    let m = RunManifest::load(eval.join("metrics_manifest.json")).unwrap();
    assert_eq!(m.kind, RunKind::Evaluate);
    assert_eq!(m.config.metrics.gamma, 0.9);
    assert_eq!(m.config.metrics.steps, 20);
    assert_eq!(m.config.explain, manifest.config.explain);
    assert!(eval.join("metrics.json").exists());
}

#[test]
fn no_detections_gives_header_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let det = write_scene(dir.path(), vec![]);
    let run = dir.path().join("run");
    assert_eq!(code(&explain(&det, &run, &[])), 0);
    let manifest = RunManifest::load(run.join("manifest.json")).unwrap();
    assert!(manifest.images[0].targets.is_empty());

    let eval = dir.path().join("eval");
    let out = boxlens(&["evaluate", "--manifest", s(&run.join("manifest.json")), "--out", s(&eval)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("image_id,"));
    assert!(read_report(&eval.join("metrics.csv")).rows.is_empty());
}

#[test]
fn manifest_records_every_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let det = two_objects(dir.path());
    let run = dir.path().join("run");
    assert_eq!(code(&explain(&det, &run, &["--set", "explain.rise.keep_prob=0.3"])), 0);
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();

    let mut expected = BTreeSet::new();
    json_keys(&serde_json::to_value(RunConfig::default()).unwrap(), "", &mut expected);
    let mut recorded = BTreeSet::new();
    json_keys(&raw["config"], "", &mut recorded);
    assert_eq!(expected, recorded);

    let manifest = RunManifest::load(run.join("manifest.json")).unwrap();
    assert_eq!(manifest.config.explain.rise.keep_prob, 0.3);
    assert_eq!(manifest.config_hash, manifest.config.hash());
    assert_eq!(manifest.config_hash.len(), 64);
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let det = two_objects(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[explain]\nseed = 5\nmasks = 32\n").unwrap();
    let seed_of = |name: &str, extra: &[&str], env: Option<&str>| {
        let run = dir.path().join(name);
        let mut args = vec!["explain", "--detector", &det, "--out", s(&run), "--config", s(&cfg)];
        args.extend_from_slice(extra);
        let out = boxlens_env(&args, env);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let m = RunManifest::load(run.join("manifest.json")).unwrap();
        assert_eq!(m.config.explain.masks, 32);
        m.config.explain.seed
    };
    assert_eq!(seed_of("file", &[], None), 5);
    assert_eq!(seed_of("env", &[], Some("6")), 6);
    assert_eq!(seed_of("set", &["--set", "explain.seed=7"], Some("6")), 7);
    assert_eq!(seed_of("flag", &["--set", "explain.seed=7", "--seed", "8"], Some("6")), 8);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let det = two_objects(dir.path());
    let run = dir.path().join("run");
    let cases: Vec<Vec<&str>> = vec![
        vec!["explain", "--detector", &det, "--out", s(&run), "--method", "gradcam"],
        vec!["explain", "--out", s(&run)],
        vec!["explain", "--detector", &det, "--out", s(&run), "--set", "explain.nope=1"],
        vec!["explain", "--detector", &det, "--out", s(&run), "--threshold", "1.5"],
        vec!["explain", "--detector", "magic:thing", "--out", s(&run)],
        vec!["explain", "--detector", &det, "--out", s(&run), "--target", "1,2,3"],
        vec!["explain", "--detector", &det, "--out", s(&run), "--method", "dsliding", "--set", "explain.sliding.window=8"],
        vec!["evaluate", "--out", s(&run)],
        vec!["report", "--out", s(&run)],
        vec!["explain", "--detector", "synthetic:/nonexistent/scene.json", "--out", s(&run)],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = boxlens(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = boxlens_env(&["explain", "--detector", &det, "--out", s(&run)], Some("not-a-number"));
    assert_eq!(code(&out), 2);
}

#[test]
fn replay_rejects_config_flags() {
    let dir = tempfile::tempdir().unwrap();
    let det = two_objects(dir.path());
    let run = dir.path().join("run");
    assert_eq!(code(&explain(&det, &run, &[])), 0);
    let out = boxlens(&["explain", "--manifest", s(&run.join("manifest.json")), "--out", s(&dir.path().join("again")), "--seed", "3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failing_detector_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img.png");
    SyntheticScene::new(16, 16, 1, 0.5, vec![]).render().save_png(&img).unwrap();
    let out = boxlens(&[
        "explain",
        "--detector",
        "exec:sh -c 'exit 4'",
        "--image",
        s(&img),
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn explicit_target_and_exec_detector() {
    let dir = tempfile::tempdir().unwrap();
    let det = two_objects(dir.path());
    let scene_path = det.trim_start_matches("synthetic:").to_string();
    let img = dir.path().join("scene.png");
    SyntheticScene::load(&scene_path).unwrap().render().save_png(&img).unwrap();
    let exec = format!("exec:{} serve --scene {scene_path}", env!("CARGO_BIN_EXE_boxlens"));
    let run = dir.path().join("run");
    let out = boxlens(&[
        "explain",
        "--detector",
        &exec,
        "--image",
        s(&img),
        "--target",
        "26,18,44,36,2",
        "--method",
        "dsliding",
        "--set",
        "explain.sliding.window=8",
        "--set",
        "explain.sliding.stride=4",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::load(run.join("manifest.json")).unwrap();
    assert!(m.detector.spec.starts_with("exec:"));
    assert!(m.detector.handshake.has_class_probs);
    assert_eq!(m.images[0].targets.len(), 1);
    assert_eq!(m.images[0].targets[0].detection.class_id(), 2);
    let sal = SaliencyFile::read(run.join(m.images[0].targets[0].saliency_file.as_ref().unwrap())).unwrap();
    let at = |x: usize, y: usize| sal.values[y * sal.width as usize + x];
    assert!(at(35, 27) > at(10, 10));
}

#[test]
fn masks_and_report_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let masks = dir.path().join("masks");
    let out = boxlens(&["masks", "--method", "rise", "--masks", "5", "--width", "32", "--height", "24", "--out", s(&masks)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pngs: Vec<PathBuf> = std::fs::read_dir(&masks).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(pngs.len(), 5);
    assert_eq!(image::image_dimensions(&pngs[0]).unwrap(), (32, 24));
    assert_eq!(code(&boxlens(&["masks", "--method", "dmfpp", "--out", s(&masks)])), 2);

    let det = two_objects(dir.path());
    let mut csvs = Vec::new();
    for (i, method) in ["drise", "dsliding"].iter().enumerate() {
        let run = dir.path().join(format!("run{i}"));
        let out = explain(&det, &run, &["--method", method, "--set", "explain.sliding.window=8", "--set", "explain.sliding.stride=4"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let eval = dir.path().join(format!("eval{i}"));
        let out = boxlens(&["evaluate", "--manifest", s(&run.join("manifest.json")), "--out", s(&eval), "--steps", "10"]);
        assert_eq!(code(&out), 0);
        csvs.push(eval.join("metrics.csv"));
    }
    let merged = dir.path().join("merged.csv");
    let json = dir.path().join("merged.json");
    let out = boxlens(&["report", s(&csvs[0]), s(&csvs[1]), "--out", s(&merged), "--json", s(&json)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&merged);
    assert_eq!(report.rows.len(), 4);
    assert_eq!(report.per_class.len(), 2);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!(v.get("overall").is_some());
}
