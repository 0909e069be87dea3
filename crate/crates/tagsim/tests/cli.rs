use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tagsim::manifest::Manifest;

fn tagsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagsim")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = tagsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn manifest(path: &Path) -> Manifest {
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|_| panic!("{} missing", path.display()))).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 8] = ["--users", "400", "--videos", "300", "--tags", "80", "--topics", "8"];

fn small_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    let mut args = vec!["generate", "--seed", "42", "--out", s(&corpus)];
    args.extend(SMALL);
    ok(&args);
    corpus
}

#[test]
fn help_and_usage_errors_have_their_exit_codes() {
    assert_eq!(tagsim(&["--help"]).status.code(), Some(0));
    assert_eq!(tagsim(&["train", "--help"]).status.code(), Some(0));
    assert_eq!(tagsim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tagsim(&["generate", "--no-such-flag", "1"]).status.code(), Some(2));
    assert_eq!(tagsim(&[]).status.code(), Some(2));
}

#[test]
fn pipeline_errors_exit_one_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = tagsim(&["profile", "--corpus", s(&dir.path().join("missing")), "--out", s(&dir.path().join("p.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    // a setting with a bad value is a run error, not a usage error
    let out = tagsim(&["generate", "--out", s(dir.path()), "--drift", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small corpus\nusers = 150\nvideos=120\ntags = 40\ntopics=5\nseed = 5\n").unwrap();
    let out = dir.path().join("c");
    ok(&["generate", "--config", s(&cfg), "--seed", "6", "--out", s(&out)]);
    let m = manifest(&out.join("manifest.json"));
    assert_eq!(m.command, "generate");
    assert_eq!(m.tool, "tagsim");
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.config.get("seed").map(String::as_str), Some("6"));
    assert_eq!(m.config.get("users").map(String::as_str), Some("150"));
    assert_eq!(m.outputs.len(), 6);
    let users = fs::read_to_string(out.join("users.csv")).unwrap();
    assert_eq!(users.lines().count(), 151);
}

#[test]
fn subcommands_chain_and_write_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = small_corpus(d);
    let (prof, samples, model, report, table, rec) =
        (d.join("p.jsonl"), d.join("s.csv"), d.join("m.json"), d.join("r.json"), d.join("t.csv"), d.join("rec.csv"));

    ok(&["profile", "--corpus", s(&corpus), "--kind", "rtp", "--window", "-7:-1", "--out", s(&prof)]);
    let lines: Vec<serde_json::Value> =
        fs::read_to_string(&prof).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 400);
    for l in &lines {
        assert!(l["id"].is_u64() && l["weights"].is_array());
        assert_eq!(l["window"], "-7:-1");
    }

    ok(&["featurize", "--corpus", s(&corpus), "--kind", "ptp", "--pairs", "2000", "--out", s(&samples)]);
    let text = fs::read_to_string(&samples).unwrap();
    assert_eq!(text.lines().count(), 2001);
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        let digits = field.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect::<String>();
        assert!(digits.trim_start_matches('0').len() <= 9, "{field}");
    }

    ok(&["train", "--model", "tree", "--task", "clf", "--in", s(&samples), "--out", s(&model), "--prune-folds", "3"]);
    ok(&["evaluate", "--model", s(&model), "--test", s(&samples), "--task", "clf", "--report", s(&report)]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert!(r["auc"].as_f64().unwrap() > 0.5);
    assert_eq!(tagsim(&["evaluate", "--model", s(&model), "--test", s(&samples), "--task", "reg", "--report", s(&report)]).status.code(), Some(1));

    ok(&["study", "--corpus", s(&corpus), "--kind", "ptp", "--key", "gender", "--pairs", "3000", "--out", s(&table)]);
    let t = fs::read_to_string(&table).unwrap();
    assert!(t.starts_with("kind,key,order,label,mean,count,se\n"));
    assert!(t.contains(",FF,") && t.contains(",MM,"));

    ok(&["recommend", "--corpus", s(&corpus), "--strategy", "popular", "--K", "5,15", "--N", "10..30", "--targets", "60", "--report", s(&rec)]);
    let rows: Vec<String> = fs::read_to_string(&rec).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 6);
    // popularity ignores K: the rows of K=5 and K=15 agree apart from K
    for n in 0..3 {
        let strip = |r: &str| r.split(',').enumerate().filter(|(i, _)| *i != 1).map(|(_, f)| f.to_string()).collect::<Vec<_>>();
        assert_eq!(strip(&rows[n]), strip(&rows[n + 3]));
    }

    for out in [&prof, &samples, &model, &report, &table, &rec] {
        let mut name = out.file_name().unwrap().to_os_string();
        name.push(".manifest.json");
        let m = manifest(&out.with_file_name(name));
        assert_eq!(m.outputs.len(), 1);
        assert!(!m.config.contains_key("out"));
    }
    let m = manifest(&d.join("m.json.manifest.json"));
    assert_eq!(m.inputs[0].file, "s.csv");
    assert_eq!(m.config.get("model").map(String::as_str), Some("tree"));
}

#[test]
fn predicted_strategy_needs_a_matching_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = small_corpus(d);
    let (samples, model, rec) = (d.join("s.csv"), d.join("m.json"), d.join("rec.csv"));
    ok(&["featurize", "--corpus", s(&corpus), "--kind", "rtp", "--pairs", "1500", "--out", s(&samples)]);
    ok(&["train", "--model", "linear", "--task", "reg", "--in", s(&samples), "--out", s(&model)]);
    let base = ["recommend", "--corpus", s(&corpus), "--targets", "40", "--report", s(&rec)];
    let with = |extra: &[&str]| tagsim(&[&base[..], extra].concat());
    assert_eq!(with(&["--strategy", "predicted-rtp"]).status.code(), Some(1));
    assert_eq!(with(&["--strategy", "predicted-ptp", "--model", s(&model)]).status.code(), Some(1));
    assert!(with(&["--strategy", "predicted-rtp", "--model", s(&model)]).status.success());
    assert!(fs::read_to_string(&rec).unwrap().contains("predicted-rtp,15,10,"));
}

fn run_pipeline(out: &Path, threads: &str) {
    let mut args = vec![
        "pipeline",
        "--seed",
        "42",
        "--threads",
        threads,
        "--out",
        s(out),
        "--pairs",
        "3000",
        "--gbdt-trees",
        "8",
        "--forest-trees",
        "6",
        "--cv-folds",
        "3",
        "--prune-folds",
        "3",
        "--rec-targets",
        "80",
        "--rec-candidates",
        "300",
    ];
    args.extend(SMALL);
    ok(&args);
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn small_pipeline_is_identical_across_reruns_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&a, "1");
    run_pipeline(&b, "3");
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    let names: Vec<&str> = ta.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["manifest.json", "report.json", "metrics.csv", "ablation.csv", "study.csv", "rec.csv", "corpus/users.csv"] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    assert_eq!(ta.len(), tb.len());
    for ((na, ba), (nb, bb)) in ta.iter().zip(&tb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs");
    }
    let m = manifest(&a.join("manifest.json"));
    assert_eq!(m.outputs.len(), ta.len() - 1);
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = tagsim(&["pipeline", "--preset", "cluster-scale", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("paper-desk"));
}
