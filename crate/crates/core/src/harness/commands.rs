use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{hex, ExperimentConfig, Scale, RATIO};
use super::report::{ablation_footnote, render_markdown_table, rows_to_csv};
use crate::dataset::{
    build_dataset, read_bundle, write_bundle, AsSpec, BuildSpec, DatasetBundle, Method, PatchSpec, SourceModel,
};
use crate::error::{Error, Result};
use crate::geometry::{
    random_subsample, read_cloud, read_mesh, sample_mesh_surface, write_xyz, PointCloud, TriangleMesh,
};
use crate::metrics::{evaluate_bundle, BundleEvaluation, EvalOptions, MetricsReport};
use crate::net::{read_weights, train, write_history_csv, write_weights, Init, NetworkConfig, TrainHyper, Variant};
use crate::rng::Rng;
use crate::toy::toy_corpus;

pub const CSV_HEADER: &str = "dataset,scale,method,variant,cd_e3,hd_e3,params,model_bytes";

// Rng child streams, one per purpose.
const STREAM_TOY: u64 = 1;
const STREAM_DENSE: u64 = 2;
const STREAM_BUNDLE: u64 = 3;
const STREAM_TRAIN: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One line of a Table-1-schema report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub scale: Scale,
    pub method: Method,
    pub variant: Variant,
    pub report: MetricsReport,
    pub params: usize,
    pub model_bytes: usize,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.dataset,
            self.scale,
            self.method.label(),
            self.variant,
            self.report.cd_e3(),
            self.report.hd_e3(),
            self.params,
            self.model_bytes
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    /// Weight files used, relative to the output directory.
    pub weights: Vec<String>,
    pub rows: Vec<ResultRow>,
    /// Model-level rows after merging, when a merge policy is configured.
    pub merged_rows: Vec<ResultRow>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub dataset: String,
    pub scale: Scale,
    pub method: Method,
    pub variant: Variant,
    pub weights: String,
    pub network_digest: String,
    pub weights_digest: String,
    pub init: Init,
    pub hyper: TrainHyper,
    pub samples: usize,
    pub first_epoch_loss: Option<f64>,
    pub final_epoch_loss: Option<f64>,
    pub wall_time_s: f64,
}

/// Recounted contents of one bundle directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleStats {
    pub path: String,
    pub method: Method,
    pub samples: usize,
    pub models: usize,
    pub input_points: usize,
    pub target_points: usize,
    /// Every sample has the input and target counts the manifest promises.
    pub consistent: bool,
}

enum RawModel {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn method_index(m: Method) -> u64 {
    Method::ALL.iter().position(|&x| x == m).unwrap() as u64
}

fn variant_index(v: Variant) -> u64 {
    Variant::ALL.iter().position(|&x| x == v).unwrap() as u64
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("record serializes");
    s.push('\n');
    write_text(path, &s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub struct Harness {
    pub config: ExperimentConfig,
}

impl Harness {
    pub fn new(config: ExperimentConfig) -> Result<Harness> {
        config.validate()?;
        Ok(Harness { config })
    }

    pub fn out(&self) -> &Path {
        &self.config.out
    }

    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(self.out())
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }

    pub fn bundle_dir(&self, dataset: &str, split: Split, scale: Scale, method: Method) -> PathBuf {
        self.out()
            .join("datasets")
            .join(dataset)
            .join(split.as_str())
            .join(format!("{}_{}", method.as_str(), scale.tag()))
    }

    pub fn weights_path(&self, dataset: &str, scale: Scale, method: Method, variant: Variant) -> PathBuf {
        self.out()
            .join("models")
            .join(dataset)
            .join(format!("{}_{}_{}.pcuw", method.as_str(), scale.tag(), variant))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out().join("reports")
    }

    fn raw_models(&self, d: usize) -> Result<Vec<(String, RawModel)>> {
        let src = &self.config.datasets[d];
        let wanted = src.train_models + src.test_models;
        if let Some(kind) = src.toy {
            let seed = Rng::new(self.config.seed).child(STREAM_TOY).child(d as u64).next_u64();
            return Ok(toy_corpus(kind, wanted, seed)
                .into_iter()
                .map(|(n, m)| (n, RawModel::Mesh(m)))
                .collect());
        }
        let dir = src.mesh_dir.as_ref().expect("validated");
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension()
                        .and_then(|e| e.to_str())
                        .map(|e| e.to_ascii_lowercase())
                        .as_deref(),
                    Some("off" | "xyz" | "txt" | "ply")
                )
            })
            .collect();
        files.sort();
        if files.len() < wanted {
            return Err(Error::Infeasible(format!(
                "{} holds {} models, dataset '{}' needs {wanted}",
                dir.display(),
                files.len(),
                src.name
            )));
        }
        files
            .into_iter()
            .take(wanted)
            .map(|p| {
                let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let is_mesh = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("off"));
                let m = if is_mesh {
                    RawModel::Mesh(read_mesh(&p)?)
                } else {
                    RawModel::Cloud(read_cloud(&p)?)
                };
                Ok((name, m))
            })
            .collect()
    }

    /// Dense clouds for one split at one scale. Both methods see the same clouds.
    pub fn sources(&self, d: usize, split: Split, scale: Scale) -> Result<Vec<SourceModel>> {
        let src = &self.config.datasets[d];
        let dense = self.config.dense_points(scale);
        let range = match split {
            Split::Train => 0..src.train_models,
            Split::Test => src.train_models..src.train_models + src.test_models,
        };
        let raw = self.raw_models(d)?;
        let root = Rng::new(self.config.seed).child(STREAM_DENSE).child(d as u64);
        range
            .map(|i| {
                let (name, model) = &raw[i];
                let mut rng = root.child(i as u64).child(dense as u64);
                let cloud = match model {
                    RawModel::Mesh(m) => sample_mesh_surface(m, dense, &mut rng)?,
                    RawModel::Cloud(c) => random_subsample(c, dense, &mut rng)?,
                };
                Ok(SourceModel {
                    name: name.clone(),
                    cloud,
                })
            })
            .collect()
    }

    fn build_spec(&self, scale: Scale, method: Method) -> Result<BuildSpec> {
        let k = self.config.data.segments;
        Ok(match method {
            Method::Patch => BuildSpec::Patch(PatchSpec::covering(
                self.config.dense_points(scale),
                scale.input,
                RATIO,
                self.config.data.overlap_factor,
            )?),
            Method::As => BuildSpec::As(AsSpec::new(k * scale.input, k)?),
        })
    }

    /// Build the bundle for one combination without touching the disk.
    pub fn build_bundle(&self, d: usize, split: Split, scale_index: usize, method: Method) -> Result<DatasetBundle> {
        let scale = self.config.scales[scale_index];
        let sources = self.sources(d, split, scale)?;
        let seed = Rng::new(self.config.seed)
            .child(STREAM_BUNDLE)
            .child(d as u64)
            .child(split as u64)
            .child(scale_index as u64)
            .child(method_index(method))
            .next_u64();
        build_dataset(&sources, self.build_spec(scale, method)?, RATIO, seed)
    }

    /// Write the dense clouds as XYZ.
    pub fn sample(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (d, src) in self.config.datasets.iter().enumerate() {
            for split in Split::ALL {
                for &scale in &self.config.scales {
                    for s in self.sources(d, split, scale)? {
                        let path = self
                            .out()
                            .join("samples")
                            .join(&src.name)
                            .join(split.as_str())
                            .join(format!("{}_{}.xyz", s.name, scale.tag()));
                        fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
                        write_xyz(&s.cloud, &path)?;
                        written.push(path);
                    }
                }
            }
        }
        Ok(written)
    }

    /// Build and write every (dataset, split, scale, method) bundle.
    pub fn make_dataset(&self, only: Option<Method>) -> Result<Vec<BundleStats>> {
        let mut stats = Vec::new();
        for (d, src) in self.config.datasets.iter().enumerate() {
            for split in Split::ALL {
                if split == Split::Test && src.test_models == 0 {
                    continue;
                }
                for (si, &scale) in self.config.scales.iter().enumerate() {
                    for &method in self.config.methods.iter().filter(|m| only.is_none_or(|o| o == **m)) {
                        let bundle = self.build_bundle(d, split, si, method)?;
                        let dir = self.bundle_dir(&src.name, split, scale, method);
                        write_bundle(&bundle, &dir)?;
                        stats.push(self.stats_of(&dir)?);
                    }
                }
            }
        }
        Ok(stats)
    }

    fn stats_of(&self, dir: &Path) -> Result<BundleStats> {
        let b = read_bundle(dir)?;
        let consistent = b
            .samples
            .iter()
            .all(|s| s.input.len() == b.input_points() && s.target.len() == b.target_points());
        Ok(BundleStats {
            path: self.rel(dir),
            method: b.method(),
            samples: b.samples.len(),
            models: b.groups_by_model().len(),
            input_points: b.input_points(),
            target_points: b.target_points(),
            consistent,
        })
    }

    /// Recount every bundle written so far.
    pub fn bundle_stats(&self) -> Result<Vec<BundleStats>> {
        let mut stats = Vec::new();
        for src in &self.config.datasets {
            for split in Split::ALL {
                for &scale in &self.config.scales {
                    for &method in &self.config.methods {
                        let dir = self.bundle_dir(&src.name, split, scale, method);
                        if dir.join("manifest.json").exists() {
                            stats.push(self.stats_of(&dir)?);
                        }
                    }
                }
            }
        }
        Ok(stats)
    }

    fn network(&self, variant: Variant) -> NetworkConfig {
        self.config.network.with_variant(variant)
    }

    fn hyper(&self, d: usize, scale_index: usize, method: Method, variant: Variant) -> TrainHyper {
        let mut h = self.config.train.hyper.clone();
        h.seed = Rng::new(self.config.seed)
            .child(STREAM_TRAIN)
            .child(d as u64)
            .child(scale_index as u64)
            .child(method_index(method))
            .child(variant_index(variant))
            .next_u64();
        h
    }

    /// Train one network on its training bundle and write the weight files.
    pub fn train_one(&self, d: usize, scale_index: usize, method: Method, variant: Variant) -> Result<TrainRecord> {
        let name = &self.config.datasets[d].name;
        let scale = self.config.scales[scale_index];
        let bundle = read_bundle(&self.bundle_dir(name, Split::Train, scale, method))?;
        let net = self.network(variant);
        let hyper = self.hyper(d, scale_index, method, variant);
        let start = Instant::now();
        let outcome = train(&net, &bundle, &hyper, self.config.train.init)?;
        let path = self.weights_path(name, scale, method, variant);
        fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
        write_weights(&net, &outcome.weights, &path)?;
        write_history_csv(&outcome.history, &path.with_extension("history.csv"))?;
        let (_, stored) = read_weights(&path)?;
        let record = TrainRecord {
            dataset: name.clone(),
            scale,
            method,
            variant,
            weights: self.rel(&path),
            network_digest: hex(&net.digest()),
            weights_digest: hex(&stored.digest()),
            init: self.config.train.init,
            hyper,
            samples: bundle.samples.len(),
            first_epoch_loss: outcome.history.first().map(|h| h.mean_loss),
            final_epoch_loss: outcome.history.last().map(|h| h.mean_loss),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        write_json(&path.with_extension("train.json"), &record)?;
        Ok(record)
    }

    /// Reuse existing weights when their training record matches the current
    /// configuration, otherwise train.
    pub fn ensure_trained(
        &self,
        d: usize,
        scale_index: usize,
        method: Method,
        variant: Variant,
    ) -> Result<TrainRecord> {
        let name = &self.config.datasets[d].name;
        let path = self.weights_path(name, self.config.scales[scale_index], method, variant);
        if let Ok(rec) = read_json::<TrainRecord>(&path.with_extension("train.json")) {
            if path.exists()
                && rec.network_digest == hex(&self.network(variant).digest())
                && rec.hyper == self.hyper(d, scale_index, method, variant)
                && rec.init == self.config.train.init
            {
                return Ok(rec);
            }
        }
        self.train_one(d, scale_index, method, variant)
    }

    /// Train every configured (dataset, scale, method, variant), one at a time.
    pub fn train(&self) -> Result<Vec<TrainRecord>> {
        let mut out = Vec::new();
        for d in 0..self.config.datasets.len() {
            for si in 0..self.config.scales.len() {
                for &m in &self.config.methods {
                    for &v in &self.config.variants {
                        out.push(self.train_one(d, si, m, v)?);
                    }
                }
            }
        }
        Ok(out)
    }

    fn eval_one(
        &self,
        train_ds: &str,
        test_ds: &str,
        scale: Scale,
        method: Method,
        variant: Variant,
        label: &str,
    ) -> Result<(ResultRow, Option<ResultRow>, BundleEvaluation, PathBuf)> {
        let wpath = self.weights_path(train_ds, scale, method, variant);
        if !wpath.exists() {
            return Err(Error::Infeasible(format!(
                "missing weights {}; run `train` first",
                wpath.display()
            )));
        }
        let (net, weights) = read_weights(&wpath)?;
        let bundle = read_bundle(&self.bundle_dir(test_ds, Split::Test, scale, method))?;
        let options = EvalOptions {
            merge: self.config.eval.merge.clone(),
            per_model: self.config.eval.per_model,
        };
        let ev = evaluate_bundle(&net, &weights, &bundle, &options)?;
        let row = |report: MetricsReport| ResultRow {
            dataset: label.to_string(),
            scale,
            method,
            variant,
            report,
            params: net.param_count(),
            model_bytes: net.model_size_bytes(),
        };
        let merged = ev.merged.clone().map(row);
        Ok((row(ev.per_part.clone()), merged, ev, wpath))
    }

    fn finish(
        &self,
        command: &str,
        stem: &str,
        started: u64,
        rows: Vec<ResultRow>,
        merged: Vec<ResultRow>,
        weights: Vec<String>,
    ) -> Result<RunRecord> {
        let dir = self.reports_dir();
        write_text(&dir.join(format!("{stem}.csv")), &rows_to_csv(&rows))?;
        if !merged.is_empty() {
            write_text(&dir.join(format!("{stem}_merged.csv")), &rows_to_csv(&merged))?;
        }
        let record = RunRecord {
            command: command.into(),
            config_digest: self.config.digest(),
            seed: self.config.seed,
            weights,
            rows,
            merged_rows: merged,
            started_unix: started,
            finished_unix: unix_now(),
        };
        write_json(&dir.join(format!("{stem}.json")), &record)?;
        Ok(record)
    }

    fn write_merged_clouds(
        &self,
        label: &str,
        scale: Scale,
        method: Method,
        variant: Variant,
        ev: &BundleEvaluation,
    ) -> Result<()> {
        for m in &ev.merged_models {
            let path = self
                .reports_dir()
                .join("merged")
                .join(label.replace("->", "_to_"))
                .join(format!("{}_{}_{}", method.as_str(), scale.tag(), variant))
                .join(format!("{}.xyz", m.name));
            fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
            write_xyz(&m.cloud, &path)?;
        }
        Ok(())
    }

    fn evaluate_grid(
        &self,
        pairs: &[(String, String, String)],
        variants: &[Variant],
    ) -> Result<(Vec<ResultRow>, Vec<ResultRow>, Vec<String>)> {
        let (mut rows, mut merged, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for (train_ds, test_ds, label) in pairs {
            for &scale in &self.config.scales {
                for &method in &self.config.methods {
                    for &variant in variants {
                        let (row, m, ev, w) = self.eval_one(train_ds, test_ds, scale, method, variant, label)?;
                        self.write_merged_clouds(label, scale, method, variant, &ev)?;
                        rows.push(row);
                        merged.extend(m);
                        weights.push(self.rel(&w));
                    }
                }
            }
        }
        Ok((rows, merged, weights))
    }

    /// Evaluate each dataset's weights on its own test split.
    pub fn eval(&self) -> Result<RunRecord> {
        let started = unix_now();
        let pairs: Vec<_> = self
            .config
            .datasets
            .iter()
            .map(|d| (d.name.clone(), d.name.clone(), d.name.clone()))
            .collect();
        let (rows, merged, weights) = self.evaluate_grid(&pairs, &self.config.variants)?;
        self.finish("eval", "eval", started, rows, merged, weights)
    }

    /// Evaluate every dataset's weights on every dataset's test split.
    pub fn cross_val(&self) -> Result<RunRecord> {
        if self.config.datasets.len() < 2 {
            return Err(Error::Config("cross-val needs at least two datasets".into()));
        }
        let started = unix_now();
        let mut pairs = Vec::new();
        for a in &self.config.datasets {
            for b in &self.config.datasets {
                pairs.push((a.name.clone(), b.name.clone(), format!("{}->{}", a.name, b.name)));
            }
        }
        let (rows, merged, weights) = self.evaluate_grid(&pairs, &self.config.variants)?;
        self.finish("cross-val", "cross_val", started, rows, merged, weights)
    }

    /// Train (where needed) and evaluate all four variants under every method.
    pub fn ablate(&self) -> Result<RunRecord> {
        let started = unix_now();
        for d in 0..self.config.datasets.len() {
            for si in 0..self.config.scales.len() {
                for &m in &self.config.methods {
                    for v in Variant::ALL {
                        self.ensure_trained(d, si, m, v)?;
                    }
                }
            }
        }
        let pairs: Vec<_> = self
            .config
            .datasets
            .iter()
            .map(|d| (d.name.clone(), d.name.clone(), d.name.clone()))
            .collect();
        let (rows, merged, weights) = self.evaluate_grid(&pairs, &Variant::ALL)?;
        let md = format!(
            "# Ablation\n\n{}\n{}\n",
            render_markdown_table(&rows, true),
            ablation_footnote(&self.config.network)
        );
        write_text(&self.reports_dir().join("ablation.md"), &md)?;
        self.finish("ablate", "ablation", started, rows, merged, weights)
    }

    /// Render every run record found under `reports/` plus bundle statistics.
    pub fn report(&self) -> Result<PathBuf> {
        let dir = self.reports_dir();
        let mut md = String::from("# Results\n\nCD and HD are shown ×10⁻³.\n");
        let sections = [
            ("eval", "Evaluation", false),
            ("eval_merged", "Evaluation, merged models", false),
            ("cross_val", "Cross validation (train->test)", false),
            ("ablation", "Ablation", true),
        ];
        let mut found = 0;
        for (stem, title, with_params) in sections {
            let (file, merged) = match stem.strip_suffix("_merged") {
                Some(base) => (base, true),
                None => (stem, false),
            };
            let path = dir.join(format!("{file}.json"));
            if !path.exists() {
                continue;
            }
            let rec: RunRecord = read_json(&path)?;
            let rows = if merged { &rec.merged_rows } else { &rec.rows };
            if rows.is_empty() {
                continue;
            }
            found += 1;
            md.push_str(&format!("\n## {title}\n\n{}", render_markdown_table(rows, with_params)));
            if stem == "ablation" {
                md.push_str(&format!("\n{}\n", ablation_footnote(&self.config.network)));
            }
        }
        let stats = self.bundle_stats()?;
        if found == 0 && stats.is_empty() {
            return Err(Error::Infeasible(format!(
                "nothing to report under {}",
                self.out().display()
            )));
        }
        if !stats.is_empty() {
            md.push_str("\n## Bundles\n\n| bundle | method | models | samples | input | target | consistent |\n|---|---|---|---|---|---|---|\n");
            for s in &stats {
                md.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} |\n",
                    s.path,
                    s.method.label(),
                    s.models,
                    s.samples,
                    s.input_points,
                    s.target_points,
                    if s.consistent { "yes" } else { "NO" }
                ));
            }
            write_json(&dir.join("bundle_stats.json"), &stats)?;
        }
        let path = dir.join("report.md");
        write_text(&path, &md)?;
        Ok(path)
    }
}
