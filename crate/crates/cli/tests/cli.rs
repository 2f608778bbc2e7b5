use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conceptbench::experiments::read_results_csv;
use conceptbench_cli::{parse_config, RunManifest, RunStatus, FAILED_MARKER};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_conceptbench"));
    c.env("RUST_LOG", "warn");
    c
}

fn smoke() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn only_run_dir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

#[test]
fn experiment_creates_complete_run_directory() {
    let root = tempfile::tempdir().unwrap();
    let out = bin().args(["experiment", "--config"]).arg(smoke()).arg("--out").arg(root.path()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = only_run_dir(root.path());
    let manifest = RunManifest::load(&dir).unwrap();
    assert_eq!(manifest.status, RunStatus::Done);
    assert_eq!(manifest.config_path.as_deref(), Some(smoke().as_path()));
    assert_eq!(manifest.config_sha256.len(), 64);
    assert!(!dir.join(FAILED_MARKER).exists());

    let snapshot = fs::read_to_string(dir.join("config.toml")).unwrap();
    let cfg = parse_config(&snapshot).unwrap();
    assert_eq!(cfg, conceptbench_cli::load_config(&smoke()).unwrap());

    // |grid| * |seeds| * |methods| points, each with several concept rows.
    let rows = read_results_csv(&dir.join("results.csv")).unwrap();
    assert!(rows.len() >= 2 * 1 * 2, "{} rows", rows.len());
    for m in ["cbm", "wvae"] {
        let mut idx: Vec<f64> = rows.iter().filter(|r| r.method == m && r.concept == "average").map(|r| r.index).collect();
        idx.dedup();
        assert_eq!(idx, vec![0.1, 1.0]);
    }
    assert!(dir.join("summary.csv").exists());
    assert!(dir.join("run_result.json").exists());
    assert!(dir.join("plots/data_efficiency__dsprites.png").exists());
    assert!(dir.join("plots/data_efficiency__dsprites.csv").exists());
    let bundles: Vec<_> = fs::read_dir(dir.join("checkpoints")).unwrap().collect();
    assert!(!bundles.is_empty());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("foo.toml", "experiment = \"data_efficiency\"\nfoo = 1\n", "foo"),
        ("frac.toml", "experiment = \"data_efficiency\"\nfractions = [0.5, 1.5]\n", "(0, 1]"),
        ("syntax.toml", "experiment = \"data_efficiency\"\nseeds = [0,\n", "line"),
    ];
    for (name, text, needle) in cases {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        let out = bin().args(["experiment", "--config"]).arg(&p).arg("--out").arg(dir.path().join("runs")).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{name}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
        assert!(!dir.path().join("runs").exists(), "a rejected config must not create a run");
    }
    let out = bin().args(["experiment", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["experiment", "--config"]).arg(smoke()).args(["--out", "x", "--scale", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("results.csv");
    conceptbench::experiments::write_results_csv(&p, &[]).unwrap();
    let out = bin().args(["plot", "--results"]).arg(&p).arg("--out").arg(dir.path().join("plots")).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    let pngs = fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(pngs, 0);
    let out = bin().args(["summarize", "--results"]).arg(dir.path().join("missing.csv")).arg("--out").arg(dir.path().join("s.csv")).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn generate_train_plot_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = bin()
        .args(["generate", "--dataset", "shapes3d_proxy", "--resolution", "32", "--scale", "25", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(data.join("concepts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert_eq!(fs::read_dir(data.join("images")).unwrap().count(), 25);

    let model = dir.path().join("model");
    let out = bin().args(["train", "--method", "cbm", "--seed", "3", "--config"]).arg(smoke()).arg("--out").arg(&model).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(model.join("model.json").exists() && model.join("metrics.json").exists());

    let root = dir.path().join("runs");
    let out = bin().args(["experiment", "--seed", "5", "--config"]).arg(smoke()).arg("--out").arg(&root).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let run = only_run_dir(&root);
    let rows = read_results_csv(&run.join("results.csv")).unwrap();
    assert!(rows.iter().all(|r| r.seed == 5));

    let plots = dir.path().join("plots");
    let out = bin().args(["plot", "--results"]).arg(run.join("results.csv")).arg("--out").arg(&plots).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(plots.join("data_efficiency__dsprites.png").exists());

    let summary = dir.path().join("summary.csv");
    let out = bin()
        .args(["summarize", "--results"])
        .arg(run.join("results.csv"))
        .arg(run.join("results.csv"))
        .arg("--out")
        .arg(&summary)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&summary).unwrap();
    assert!(text.starts_with("experiment,method,dataset,setup,concept,metric,index,n_seeds,median,q1,q3,iqr"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(7) == Some("2")));
}

#[cfg(unix)]
#[test]
fn interrupt_marks_run_failed() {
    use std::time::{Duration, Instant};

    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("slow.toml");
    let text = fs::read_to_string(smoke()).unwrap().replace("epochs = 2", "epochs = 2000");
    fs::write(&cfg, text).unwrap();
    let runs = root.path().join("runs");
    let mut child = bin().args(["experiment", "--config"]).arg(&cfg).arg("--out").arg(&runs).spawn().unwrap();
    let started = Instant::now();
    let dir = loop {
        if let Some(Ok(e)) = fs::read_dir(&runs).ok().and_then(|mut d| d.next()) {
            if e.path().join("manifest.json").exists() {
                break e.path();
            }
        }
        assert!(started.elapsed() < Duration::from_secs(60), "run never started");
        std::thread::sleep(Duration::from_millis(50));
    };
    std::thread::sleep(Duration::from_millis(300));
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    let code = child.wait().unwrap().code();
    assert_eq!(code, Some(2));
    let manifest = RunManifest::load(&dir).unwrap();
    assert_eq!(manifest.status, RunStatus::Failed);
    assert!(dir.join(FAILED_MARKER).exists());
    assert!(!dir.join("summary.csv").exists());
}
