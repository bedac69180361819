use std::fs;
use std::path::Path;

use pcu_core::harness::{ExperimentConfig, Harness, CSV_HEADER};
use pcu_core::net::Variant;
use pcu_core::Error;

fn config(out: &Path) -> ExperimentConfig {
    let text = format!(
        r#"
seed = 11
out = "{}"
scales = [{{ input = 32, output = 128 }}]
methods = ["patch", "as"]

[[datasets]]
name = "spheres"
toy = "spheres"
train_models = 3
test_models = 2

[[datasets]]
name = "cubes"
toy = "cubes"
train_models = 3
test_models = 2

[data]
segments = 4

[network]
k_neighbors = 6
embed_width = 8
gcn_widths = [8]
shuffle_width = 8
refiner_hidden = 8
dense_block = {{ branch_k = [4, 8], layers_per_branch = 1, growth = 6 }}

[train]
epochs = 2
batch_size = 4
"#,
        out.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    out
}

fn run_all(h: &Harness) {
    h.make_dataset(None).unwrap();
    h.train().unwrap();
    h.eval().unwrap();
}

#[test]
fn builders_produce_matching_sample_counts() {
    let dir = tempfile::tempdir().unwrap();
    let h = Harness::new(config(dir.path())).unwrap();
    let stats = h.make_dataset(None).unwrap();
    assert_eq!(stats.len(), 8);
    for pair in stats.chunks(2) {
        assert_eq!(pair[0].samples, pair[1].samples);
        assert!(pair
            .iter()
            .all(|s| s.consistent && s.input_points == 32 && s.target_points == 128));
    }
    assert_eq!(h.bundle_stats().unwrap(), stats);
}

#[test]
fn end_to_end_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ha = Harness::new(config(a.path())).unwrap();
    let hb = Harness::new(config(b.path())).unwrap();
    run_all(&ha);
    run_all(&hb);
    let files = files_under(a.path());
    assert_eq!(files, files_under(b.path()));
    let mut compared = 0;
    for f in &files {
        // run records and training records carry timestamps and timings
        if f.ends_with(".json") && (f.starts_with("reports") || f.ends_with(".train.json")) {
            continue;
        }
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
        compared += 1;
    }
    assert!(files.iter().any(|f| f.ends_with(".pcuw")));
    assert!(compared > 20);

    let csv = fs::read_to_string(a.path().join("reports/eval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("spheres,32->128,Patch,A,"));
    assert!(rows[1].starts_with("spheres,32->128,AS,A,"));
}

#[test]
fn cross_validation_grid() {
    let dir = tempfile::tempdir().unwrap();
    let h = Harness::new(config(dir.path())).unwrap();
    run_all(&h);
    let eval = h.eval().unwrap();
    let cv = h.cross_val().unwrap();
    assert_eq!(cv.rows.len(), 8);
    let diagonal: Vec<_> = cv
        .rows
        .iter()
        .filter(|r| r.dataset == "spheres->spheres" || r.dataset == "cubes->cubes")
        .collect();
    assert_eq!(diagonal.len(), 4);
    for d in diagonal {
        let test = d.dataset.split("->").next().unwrap();
        let same = eval
            .rows
            .iter()
            .find(|r| r.dataset == test && r.method == d.method)
            .unwrap();
        assert_eq!((same.report.cd, same.report.hd), (d.report.cd, d.report.hd));
    }
    let csv = fs::read_to_string(dir.path().join("reports/cross_val.csv")).unwrap();
    assert!(csv.contains("\nspheres->cubes,32->128,Patch,A,"));
}

#[test]
fn ablation_sweeps_four_variants() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.datasets.truncate(1);
    let h = Harness::new(c).unwrap();
    h.make_dataset(None).unwrap();
    let rec = h.ablate().unwrap();
    assert_eq!(rec.rows.len(), 8);
    let params = |v: Variant| rec.rows.iter().find(|r| r.variant == v).unwrap().params;
    assert!(params(Variant::NoDenseGcn) < params(Variant::Original));
    assert!(params(Variant::Original) < params(Variant::WithRefiner));
    for r in &rec.rows {
        assert_eq!(r.params, h.config.network.with_variant(r.variant).param_count());
        assert_eq!(r.model_bytes, 4 * r.params);
    }
    let md = fs::read_to_string(dir.path().join("reports/ablation.md")).unwrap();
    assert!(md.contains("66.246 MB"));

    // a second sweep reuses the cached weights
    let before = fs::read(dir.path().join("models/spheres/as_32x128_D.pcuw")).unwrap();
    let again = h.ablate().unwrap();
    let lines = |r: &pcu_core::harness::RunRecord| r.rows.iter().map(|x| x.csv_line()).collect::<Vec<_>>();
    assert_eq!(lines(&again), lines(&rec));
    assert_eq!(
        fs::read(dir.path().join("models/spheres/as_32x128_D.pcuw")).unwrap(),
        before
    );

    let report = fs::read_to_string(h.report().unwrap()).unwrap();
    assert!(report.contains("## Ablation") && report.contains("## Bundles"));
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let h = Harness::new(config(dir.path())).unwrap();
    let e = h.train().unwrap_err();
    assert_eq!(e.exit_code(), 3, "{e}");
    h.make_dataset(None).unwrap();
    let e = h.eval().unwrap_err();
    assert!(matches!(e, Error::Infeasible(_)));
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn sample_writes_xyz_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.datasets.truncate(1);
    let files = Harness::new(c).unwrap().sample().unwrap();
    assert_eq!(files.len(), 5);
    let cloud = pcu_core::geometry::read_xyz(&files[0]).unwrap();
    assert_eq!(cloud.len(), 4 * 128);
}

#[test]
fn shipped_config_is_valid() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.datasets.len(), 2);
    assert_eq!(cfg.scales.len(), 2);
    assert!(cfg.eval.merge.is_some());
}
