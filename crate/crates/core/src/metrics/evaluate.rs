use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_pair, MetricsReport};
use crate::dataset::DatasetBundle;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};
use crate::merge::{default_radius, merge_parts, resample_to_target, MergeMode, MergePolicy};
use crate::net::{forward, NetworkConfig, NetworkWeights};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Also merge each model's parts and score the merged cloud.
    pub merge: Option<MergePolicy>,
    /// Aggregate as the mean of per-model means instead of over samples.
    pub per_model: bool,
}

#[derive(Clone, Debug)]
pub struct MergedModel {
    pub name: String,
    pub cloud: PointCloud,
    pub ground_truth: PointCloud,
    pub report: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct BundleEvaluation {
    /// One report per sample, in bundle order, in the model frame.
    pub per_sample: Vec<MetricsReport>,
    pub per_part: MetricsReport,
    pub merged: Option<MetricsReport>,
    pub merged_models: Vec<MergedModel>,
}

/// Forward every sample; predictions stay in each pair's normalized frame.
pub fn predict_bundle(
    config: &NetworkConfig,
    weights: &NetworkWeights,
    bundle: &DatasetBundle,
) -> Result<Vec<PointCloud>> {
    bundle
        .samples
        .par_iter()
        .map(|s| forward(config, weights, &s.input))
        .collect()
}

/// Drop points within `tol` of an earlier point. Used to rebuild a model-level
/// ground truth from overlapping patch targets, whose shared points differ
/// only by rounding of the per-pair frames.
pub fn dedup_points(cloud: &PointCloud, tol: f64) -> PointCloud {
    let index = SpatialIndex::build(cloud);
    let k = cloud.len().min(32);
    let tol2 = tol * tol;
    let mut keep = vec![true; cloud.len()];
    for i in 0..cloud.len() {
        if !keep[i] {
            continue;
        }
        for (d2, j) in index.knn_with_dist2(cloud.get(i), k).expect("k <= len") {
            if d2 > tol2 {
                break;
            }
            if j > i {
                keep[j] = false;
            }
        }
    }
    let kept: Vec<usize> = (0..cloud.len()).filter(|&i| keep[i]).collect();
    cloud.select(&kept)
}

fn aggregate(bundle: &DatasetBundle, reports: &[MetricsReport], per_model: bool) -> Result<MetricsReport> {
    let mean = if per_model {
        let means: Vec<MetricsReport> = bundle
            .groups_by_model()
            .iter()
            .filter_map(|(_, idx)| MetricsReport::mean(&idx.iter().map(|&i| reports[i].clone()).collect::<Vec<_>>()))
            .collect();
        MetricsReport::mean(&means).map(|mut m| {
            m.n_samples = reports.len();
            m
        })
    } else {
        MetricsReport::mean(reports)
    };
    mean.ok_or_else(|| Error::Shape("empty bundle".into()))
}

/// Score a trained network on a bundle, in the ground truth's model frame.
pub fn evaluate_bundle(
    config: &NetworkConfig,
    weights: &NetworkWeights,
    bundle: &DatasetBundle,
    options: &EvalOptions,
) -> Result<BundleEvaluation> {
    if bundle.samples.is_empty() {
        return Err(Error::Shape("empty bundle".into()));
    }
    if config.r != bundle.manifest.r {
        return Err(Error::Config(format!(
            "network ratio {} does not match bundle ratio {}",
            config.r, bundle.manifest.r
        )));
    }
    weights.check_against(config)?;
    let predictions = predict_bundle(config, weights, bundle)?;
    let per_sample: Vec<MetricsReport> = bundle
        .samples
        .par_iter()
        .zip(&predictions)
        .map(|(s, p)| evaluate_pair(&s.transform.invert_cloud(p), &s.target_in_model_frame()))
        .collect::<Result<_>>()?;
    let per_part = aggregate(bundle, &per_sample, options.per_model)?;

    let (merged, merged_models) = match &options.merge {
        None => (None, Vec::new()),
        Some(policy) => {
            policy.validate()?;
            let models: Vec<MergedModel> = bundle
                .groups_by_model()
                .into_par_iter()
                .map(|(name, idx)| merge_model(bundle, &predictions, name, &idx, policy))
                .collect::<Result<_>>()?;
            let reports: Vec<MetricsReport> = models.iter().map(|m| m.report.clone()).collect();
            (MetricsReport::mean(&reports), models)
        }
    };
    Ok(BundleEvaluation {
        per_sample,
        per_part,
        merged,
        merged_models,
    })
}

fn merge_model(
    bundle: &DatasetBundle,
    predictions: &[PointCloud],
    name: String,
    idx: &[usize],
    policy: &MergePolicy,
) -> Result<MergedModel> {
    let targets: Vec<PointCloud> = idx.iter().map(|&i| bundle.samples[i].target_in_model_frame()).collect();
    let union = PointCloud::concat(&targets)?;
    let (lo, hi) = union.bounding_box();
    let ground_truth = dedup_points(&union, 1e-5 * (hi - lo).norm());

    let mut policy = policy.clone();
    if policy.mode == MergeMode::SmoothUnion && policy.radius.is_none() {
        policy.radius = Some(default_radius(&ground_truth)?);
    }
    let parts: Vec<PointCloud> = idx.iter().map(|&i| predictions[i].clone()).collect();
    let transforms: Vec<_> = idx.iter().map(|&i| bundle.samples[i].transform).collect();
    let merged = merge_parts(&parts, &transforms, &policy)?;
    let n = policy.target_count.unwrap_or(ground_truth.len()).min(merged.len());
    let cloud = resample_to_target(&merged, n)?;
    let report = evaluate_pair(&cloud, &ground_truth)?;
    Ok(MergedModel {
        name,
        cloud,
        ground_truth,
        report,
    })
}
