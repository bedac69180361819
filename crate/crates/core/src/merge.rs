//! Reassembling per-part upsampled clouds into one model-level cloud.
//!
//! Overlaps between parts are not recorded at build time. They are found
//! geometrically here: two points from different parts overlap when they are
//! mutual nearest neighbours within the match radius ρ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sample_from, Point3, PointCloud, Similarity, SpatialIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    Union,
    SmoothUnion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergePolicy {
    pub mode: MergeMode,
    /// Weight on the lower-numbered part of each pair.
    pub alpha: f64,
    /// Match radius. `None` means twice the mean nearest-neighbour spacing of
    /// the ground truth, resolved by the caller via [`default_radius`].
    pub radius: Option<f64>,
    /// FPS the merged cloud down to this many points. `None` resamples to the
    /// ground-truth count during evaluation.
    pub target_count: Option<usize>,
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy {
            mode: MergeMode::Union,
            alpha: 0.5,
            radius: None,
            target_count: None,
        }
    }
}

impl MergePolicy {
    pub fn smooth(alpha: f64, radius: f64) -> MergePolicy {
        MergePolicy {
            mode: MergeMode::SmoothUnion,
            alpha,
            radius: Some(radius),
            target_count: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("merge alpha {} outside [0, 1]", self.alpha)));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("merge radius {r} must be positive")));
            }
        }
        Ok(())
    }
}

/// Index pairs `(i in part k, j in part m)` matched across one part boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapRegion {
    pub k: usize,
    pub m: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// Map each part back to the model frame and concatenate.
pub fn union_merge(parts: &[PointCloud], transforms: &[Similarity]) -> Result<PointCloud> {
    if parts.len() != transforms.len() {
        return Err(Error::Shape(format!(
            "{} parts but {} transforms",
            parts.len(),
            transforms.len()
        )));
    }
    let mapped: Vec<PointCloud> = parts.iter().zip(transforms).map(|(p, t)| t.invert_cloud(p)).collect();
    PointCloud::concat(&mapped)
}

/// Mutual nearest neighbours within `radius` among points not yet matched, in
/// ascending `(k, m)` order. Each point joins at most one pair.
pub fn find_overlaps(parts: &[PointCloud], radius: f64) -> Vec<OverlapRegion> {
    let r2 = radius * radius;
    let mut used: Vec<Vec<bool>> = parts.iter().map(|p| vec![false; p.len()]).collect();
    let mut regions = Vec::new();
    for k in 0..parts.len() {
        for m in k + 1..parts.len() {
            let free = |part: usize, used: &[Vec<bool>]| -> Vec<usize> {
                (0..parts[part].len()).filter(|&i| !used[part][i]).collect()
            };
            let fk = free(k, &used);
            let fm = free(m, &used);
            if fk.is_empty() || fm.is_empty() {
                continue;
            }
            let ik = SpatialIndex::from_points(fk.iter().map(|&i| parts[k].get(i)).collect());
            let im = SpatialIndex::from_points(fm.iter().map(|&j| parts[m].get(j)).collect());
            let mut pairs = Vec::new();
            for (a, &i) in fk.iter().enumerate() {
                let (d2, b) = im.nearest(parts[k].get(i));
                if d2 > r2 {
                    continue;
                }
                if ik.nearest(parts[m].get(fm[b])).1 == a {
                    pairs.push((i, fm[b]));
                }
            }
            for &(i, j) in &pairs {
                used[k][i] = true;
                used[m][j] = true;
            }
            if !pairs.is_empty() {
                regions.push(OverlapRegion { k, m, pairs });
            }
        }
    }
    regions
}

/// Replace every matched pair by the single point `α·x_k + (1−α)·x_m`.
///
/// Parts must already share one frame. The blended point takes the position of
/// its `k`-side source in the output and the `m`-side source is dropped, so the
/// result has `Σ|parts| − pairs` points. With no overlaps this is a plain union.
pub fn smooth_overlaps(parts: &[PointCloud], policy: &MergePolicy) -> Result<PointCloud> {
    policy.validate()?;
    let radius = policy
        .radius
        .ok_or_else(|| Error::Config("smooth_overlaps needs a resolved radius".into()))?;
    let a = policy.alpha;
    let mut out: Vec<Vec<Option<Point3>>> = parts
        .iter()
        .map(|p| p.points().iter().map(|&q| Some(q)).collect())
        .collect();
    for region in find_overlaps(parts, radius) {
        for (i, j) in region.pairs {
            let xk = parts[region.k].get(i);
            let xm = parts[region.m].get(j);
            out[region.k][i] = Some(xk * a + xm * (1.0 - a));
            out[region.m][j] = None;
        }
    }
    let points: Vec<Point3> = out.into_iter().flatten().flatten().collect();
    PointCloud::new(points)
}

/// Map parts back to the model frame and combine them according to `policy.mode`.
pub fn merge_parts(parts: &[PointCloud], transforms: &[Similarity], policy: &MergePolicy) -> Result<PointCloud> {
    match policy.mode {
        MergeMode::Union => union_merge(parts, transforms),
        MergeMode::SmoothUnion => {
            if parts.len() != transforms.len() {
                return Err(Error::Shape(format!(
                    "{} parts but {} transforms",
                    parts.len(),
                    transforms.len()
                )));
            }
            let mapped: Vec<PointCloud> = parts.iter().zip(transforms).map(|(p, t)| t.invert_cloud(p)).collect();
            smooth_overlaps(&mapped, policy)
        }
    }
}

/// Twice the mean nearest-neighbour spacing of `cloud`.
pub fn default_radius(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            requested: 2,
            available: cloud.len(),
        });
    }
    let index = SpatialIndex::build(cloud);
    let mut total = 0.0;
    for &p in cloud.points() {
        let nn = index.knn_with_dist2(p, 2)?;
        total += nn[1].0.sqrt();
    }
    Ok(2.0 * total / cloud.len() as f64)
}

/// Farthest-point sample `cloud` down to exactly `n` points, starting at index 0.
pub fn resample_to_target(cloud: &PointCloud, n: usize) -> Result<PointCloud> {
    if n > cloud.len() {
        return Err(Error::TooFewPoints {
            requested: n,
            available: cloud.len(),
        });
    }
    Ok(cloud.select(&farthest_point_sample_from(cloud, n, 0)?))
}
