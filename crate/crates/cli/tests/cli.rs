use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pcu(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcu"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        r#"seed = 2
out = "run"
scales = [{{ input = 32, output = 128 }}]

[[datasets]]
name = "toy"
toy = "mixed"
train_models = 2
test_models = 1

[data]
segments = 4

[network]
k_neighbors = 6
embed_width = 8
gcn_widths = [8]
shuffle_width = 8
dense_block = {{ branch_k = [4, 8], layers_per_branch = 1, growth = 4 }}

[train]
epochs = 2
batch_size = 4
{extra}
"#
    );
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn full_pipeline_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    for cmd in ["make-dataset", "train", "eval", "report"] {
        let o = pcu(&[cmd, "--config", &cfg, "--jobs", "2"], dir.path());
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(dir.path().join("run/reports/eval.csv")).unwrap();
    assert!(csv.starts_with("dataset,scale,method,variant,cd_e3,hd_e3,params,model_bytes\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("run/reports/report.md").exists());
}

#[test]
fn method_filter_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = pcu(
        &[
            "make-dataset",
            "--config",
            &cfg,
            "--method",
            "as",
            "--out",
            "other",
            "--seed",
            "9",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir
        .path()
        .join("other/datasets/toy/train/as_32x128/manifest.json")
        .exists());
    assert!(!dir.path().join("other/datasets/toy/train/patch_32x128").exists());
    let manifest = fs::read_to_string(dir.path().join("other/datasets/toy/train/as_32x128/manifest.json")).unwrap();
    assert!(manifest.contains("\"method\": \"as\""));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pcu(&["eval"], dir.path())), 2);
    assert_eq!(code(&pcu(&["eval", "--config", "missing.toml"], dir.path())), 2);
    let cfg = write_config(dir.path(), "").replace("exp.toml", "bad.toml");
    fs::write(
        &cfg,
        fs::read_to_string(dir.path().join("exp.toml"))
            .unwrap()
            .replace("output = 128", "output = 100"),
    )
    .unwrap();
    let o = pcu(&["make-dataset", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("4 x input"));
    assert_eq!(code(&pcu(&["bogus"], dir.path())), 2);
}

#[test]
fn missing_bundles_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(code(&pcu(&["train", "--config", &cfg], dir.path())), 3);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lr = 1e300\ndecay = 0.0\ninit = \"glorot\"");
    assert_eq!(code(&pcu(&["make-dataset", "--config", &cfg], dir.path())), 0);
    let o = pcu(&["train", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
