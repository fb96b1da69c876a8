use std::path::Path;
use std::process::{Command, Output};

fn restore(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_restore"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("RESTORE_OUT")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn result(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

const SUBCOMMANDS: [&str; 10] = [
    "dataset-build",
    "dataset-oracle",
    "diversity",
    "train-pairwise",
    "train-cyclegan",
    "grid",
    "eval-fid-diff",
    "eval-pair",
    "bench",
    "report",
];

#[test]
fn help_exits_zero_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in SUBCOMMANDS {
        let o = restore(tmp.path(), &[sub, "--help"]);
        let text = ok(&o);
        assert!(text.contains("Usage"), "{sub}: {text}");
        assert!(text.contains("--out"), "{sub} help lists global flags");
        let short = ok(&restore(tmp.path(), &[sub, "-h"]));
        for line in short.lines().map(str::trim).filter(|l| l.starts_with('-')) {
            assert!(line.split_once("  ").is_some_and(|(_, d)| !d.trim().is_empty()), "{sub}: undocumented {line:?}");
        }
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(restore(tmp.path(), &["dataset-oracle", "--count", "3", "--bogus"]).status.code(), Some(2));
    assert_eq!(restore(tmp.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(restore(tmp.path(), &["grid"]).status.code(), Some(2));
    let o = restore(tmp.path(), &["train-pairwise", "--data", "x", "--set", "novalue"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(restore(tmp.path(), &["eval-fid-diff", "--values", "0.75"]).status.code(), Some(2));
    assert_eq!(restore(tmp.path(), &["bench", "--stub-ms", "1,2,3"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = restore(tmp.path(), &["eval-pair", "--data", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn oracle_dataset_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    let args = ["dataset-oracle", "--count", "6", "--size", "64", "--seed", "7"];
    let line = ok(&restore(&d1, &args));
    assert_eq!(line.lines().count(), 1);
    ok(&restore(&d2, &args));
    let manifest = std::fs::read_to_string(d1.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 7, "header plus one line per pair");
    assert_eq!(manifest, std::fs::read_to_string(d2.join("manifest.jsonl")).unwrap());
    for dir in ["domain_a", "domain_b"] {
        for e in std::fs::read_dir(d1.join(dir)).unwrap() {
            let p = e.unwrap().path();
            let q = d2.join(dir).join(p.file_name().unwrap());
            assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
        }
    }
    assert_eq!(result(&d1)["result"]["pairs"], 6);

    let eval = tmp.path().join("eval");
    let o = ok(&restore(&eval, &["eval-pair", "--data", d1.to_str().unwrap()]));
    assert!(o.contains("6 pairs"));
    let s = result(&eval)["result"]["ssim"].as_f64().unwrap();
    assert!(s > 0.0 && s < 1.0);
}

#[test]
fn grid_replay_picks_bold_cells() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&restore(tmp.path(), &["grid", "--replay", "cyclegan"]));
    let csv = std::fs::read_to_string(tmp.path().join("grid_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,2,0.0001,8,0.72,0.95"), "{csv}");
    ok(&restore(tmp.path(), &["grid", "--replay", "esa"]));
    let csv = std::fs::read_to_string(tmp.path().join("grid_summary.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("1,2,0.0001,8,0.61,0.95"), "{csv}");
}

#[test]
fn fid_diff_from_values() {
    let tmp = tempfile::tempdir().unwrap();
    let line = ok(&restore(tmp.path(), &["eval-fid-diff", "--values", "0.75,0.34"]));
    assert!(line.contains("fid_diff=0.4100"), "{line}");
    let csv = std::fs::read_to_string(tmp.path().join("metrics_report.csv")).unwrap();
    assert!(csv.starts_with("variant,fid_schnell,fid_dev,fid_diff,clip_iqa"));
}

#[test]
fn bench_and_report_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let b = tmp.path().join("bench");
    ok(&restore(&b, &["bench", "--stub-ms", "20,5", "--sizes", "32,64", "--reps", "3"]));
    let csv = std::fs::read_to_string(b.join("timing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");

    let r = tmp.path().join("replay");
    ok(&restore(&r, &["--plots", "bench", "--replay"]));
    assert!(r.join("timing.svg").exists());

    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    ok(&restore(&r1, &["report", "--recorded"]));
    ok(&restore(&r2, &["report", "--recorded"]));
    for f in ["metrics_report.csv", "timing.csv"] {
        assert_eq!(std::fs::read(r1.join(f)).unwrap(), std::fs::read(r2.join(f)).unwrap());
    }
    let empty = tmp.path().join("empty");
    ok(&restore(&empty, &["report"]));
    let csv = std::fs::read_to_string(empty.join("metrics_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    let from = tmp.path().join("from");
    ok(&restore(&from, &["report", "--timing", b.join("result.json").to_str().unwrap()]));
    assert_eq!(std::fs::read_to_string(from.join("timing.csv")).unwrap(), csv_of(&b));
}

fn csv_of(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("timing.csv")).unwrap()
}

#[test]
fn tiny_pairwise_run_writes_run_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&restore(&data, &["dataset-oracle", "--count", "12", "--size", "64", "--seed", "1"]));
    let runs = tmp.path().join("runs");
    let line = ok(&restore(
        &runs,
        &[
            "train-pairwise",
            "--data",
            data.to_str().unwrap(),
            "--set",
            "name=tiny",
            "--set",
            "optim.max_epochs=1",
            "--set",
            "unet.base_channels=4",
            "--set",
            "unet.max_channels=8",
            "--set",
            "split.train=0.6",
            "--set",
            "split.val=0.4",
            "--set",
            "split.test=0.0",
        ],
    ));
    assert!(line.starts_with("pairwise tiny"), "{line}");
    let run = runs.join("tiny");
    for f in ["config.toml", "metrics.csv", "record.json", "result.json", "checkpoints/last.bin", "checkpoints/last.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let eval = tmp.path().join("eval");
    let stem = run.join("checkpoints/last");
    ok(&restore(&eval, &["eval-pair", "--data", data.to_str().unwrap(), "--checkpoint", stem.to_str().unwrap()]));
}
