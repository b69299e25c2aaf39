//! End-to-end checks of the benchmark binary and its file formats.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparserec"))
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        "\npipeline = hsr\nseed = 4\nlambda = 0.001\n\
         dataset.synth.classes = 3\ndataset.synth.per_class = 6\n\
         dataset.synth.height = 20\ndataset.synth.width = 20\n\
         dataset.synth.noise = 0.04\nsplit.train_per_class = 3\n\
         gabor.kernel_size = 9\ngabor.downsample = 2\nreduce.dim = 24\n{extra}"
    );
    let path = dir.join("experiment.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_emits_all_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    for name in ["samples.csv", "summary.txt", "metrics.dat"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(csv.starts_with("sample_id,true,pred,time_s,iters,nnz\n"));
    assert_eq!(csv.lines().count(), 1 + 9); // header + 3 classes x 3 test
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("recognition_rate = "));
    assert!(summary.contains("config.pipeline = hsr"));
    assert!(summary.contains("config.seed = 4"));
}

#[test]
fn seed_override_changes_echo() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "99"])
        .output()
        .unwrap();
    assert!(status.status.success());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("config.seed = 99"));
}

#[test]
fn report_recomputes_rate_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    assert!(bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let run_summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    let want_rate = run_summary
        .lines()
        .find(|l| l.starts_with("recognition_rate = "))
        .unwrap()
        .to_string();

    let output = bin()
        .args(["report", "--csv"])
        .arg(out.join("samples.csv"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(
        text.contains(&want_rate),
        "report `{text}` does not repeat `{want_rate}`"
    );

    let want_confusion: Vec<&str> = run_summary
        .lines()
        .filter(|l| l.starts_with("confusion."))
        .collect();
    for line in want_confusion {
        assert!(text.contains(line), "missing `{line}` in report output");
    }
}

#[test]
fn synth_writes_loadable_tree_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let status = bin()
        .args(["synth", "--out"])
        .arg(&out)
        .args([
            "--classes",
            "2",
            "--per-class",
            "3",
            "--height",
            "12",
            "--width",
            "10",
            "--seed",
            "8",
        ])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("classes = 2"));
    assert!(manifest.contains("seed = 8"));
    let set = sparserec::dataset::load_dataset(&out).unwrap();
    assert_eq!(set.len(), 6);
    assert_eq!(set.dims(), (12, 10));

    // and a run against the on-disk tree works
    let config_text = format!(
        "\npipeline = src\nseed = 4\nlambda = 0.01\ndataset.path = {}\n\
         split.train_per_class = 2\n",
        out.display()
    );
    let config = dir.path().join("disk.cfg");
    std::fs::write(&config, config_text).unwrap();
    let run_out = dir.path().join("runout");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&run_out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

#[test]
fn learn_occ_saves_loadable_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "occlusion.kind = band\nocclusion.fraction = 0.4\nocclusion.fill = random-noise\n\
         occlusion.seed = 2\nocc_dict = learned\nocc_dict.p = 4\nocc_dict.zeta = 0.05\n\
         occ_dict.exemplars = 8\n",
    );
    let out = dir.path().join("occ.bin");
    let status = bin()
        .args(["learn-occ", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let loaded = sparserec::bench::cli::load_occlusion_dictionary(&out).unwrap();
    assert_eq!(loaded.p, 4);
    for a in 0..4 {
        let n = loaded.gamma.column(a).dot(&loaded.gamma.column(a)).sqrt();
        assert!((n - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn bad_config_fails_with_stage_message() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "dataset.path = /definitely/not/here\n").unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("dataset"), "stderr was: {stderr}");
}

#[test]
fn unknown_command_exits_nonzero() {
    let output = bin().arg("frobnicate").output().unwrap();
    assert!(!output.status.success());
    let output = bin().arg("--help").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("usage"));
}
