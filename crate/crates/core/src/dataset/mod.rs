//! Paired (sparse input, dense target) samples under the two input strategies.
//!
//! * **Patch**: farthest-point seeds, each target is the k-NN ball of a seed.
//! * **Average segment (AS)**: a uniform random draw over the whole model,
//!   split by draw order into equal contiguous segments.
//!
//! In both cases the input is a uniform subsample of its target, and each
//! pair is normalized to the unit sphere with the inverse transform kept.

mod build;
mod bundle_io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Similarity};

pub use build::{build_as_pairs, build_dataset, build_patch_pairs, plan_as_targets, plan_patch_targets, SourceModel};
pub use bundle_io::{decode_sample, encode_sample, read_bundle, write_bundle, SAMPLE_MAGIC, SAMPLE_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "patch")]
    Patch,
    #[serde(rename = "as")]
    As,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Patch, Method::As];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Patch => "patch",
            Method::As => "as",
        }
    }

    /// Name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Patch => "Patch",
            Method::As => "AS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "patch" => Ok(Method::Patch),
            "as" | "average-segment" => Ok(Method::As),
            _ => Err(Error::Config(format!("unknown method '{s}' (expected patch|as)"))),
        }
    }
}

/// Patch partition parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    /// Input points per patch (target has `r` times as many).
    pub points_per_patch: usize,
    pub patches_per_model: usize,
    /// Required ratio of summed target sizes to dense size; at least 1.
    pub overlap_factor: f64,
}

impl PatchSpec {
    pub fn new(points_per_patch: usize, patches_per_model: usize, overlap_factor: f64) -> Result<Self> {
        let spec = PatchSpec {
            points_per_patch,
            patches_per_model,
            overlap_factor,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Smallest patch count whose targets sum to at least `overlap_factor * n_dense`.
    pub fn covering(n_dense: usize, points_per_patch: usize, r: usize, overlap_factor: f64) -> Result<Self> {
        let per = (points_per_patch * r) as f64;
        let k = ((overlap_factor * n_dense as f64) / per).ceil().max(1.0) as usize;
        PatchSpec::new(points_per_patch, k, overlap_factor)
    }

    fn validate(&self) -> Result<()> {
        if self.points_per_patch == 0 || self.patches_per_model == 0 {
            return Err(Error::Infeasible("patch size and count must be positive".into()));
        }
        if !(self.overlap_factor >= 1.0) || !self.overlap_factor.is_finite() {
            return Err(Error::Infeasible(format!(
                "overlap factor {} must be a finite value >= 1",
                self.overlap_factor
            )));
        }
        Ok(())
    }
}

/// Average-segment parameters: `M` drawn input points split into `K` segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsSpec {
    pub total_sampled: usize,
    pub segments: usize,
}

impl AsSpec {
    pub fn new(total_sampled: usize, segments: usize) -> Result<Self> {
        if segments == 0 || total_sampled == 0 {
            return Err(Error::Infeasible(
                "segment count and sample size must be positive".into(),
            ));
        }
        if !total_sampled.is_multiple_of(segments) {
            return Err(Error::Infeasible(format!(
                "{segments} segments do not divide {total_sampled} points"
            )));
        }
        Ok(AsSpec {
            total_sampled,
            segments,
        })
    }

    pub fn points_per_segment(&self) -> usize {
        self.total_sampled / self.segments
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum BuildSpec {
    Patch(PatchSpec),
    As(AsSpec),
}

impl BuildSpec {
    pub fn method(&self) -> Method {
        match self {
            BuildSpec::Patch(_) => Method::Patch,
            BuildSpec::As(_) => Method::As,
        }
    }

    /// Input points per sample.
    pub fn input_points(&self) -> usize {
        match self {
            BuildSpec::Patch(p) => p.points_per_patch,
            BuildSpec::As(a) => a.points_per_segment(),
        }
    }

    pub fn samples_per_model(&self) -> usize {
        match self {
            BuildSpec::Patch(p) => p.patches_per_model,
            BuildSpec::As(a) => a.segments,
        }
    }
}

/// One training or evaluation pair, stored in the normalized frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub input: PointCloud,
    pub target: PointCloud,
    /// Maps model coordinates to this pair's frame.
    pub transform: Similarity,
    pub source_model: String,
    pub method: Method,
    /// Patch or segment index within the source model.
    pub part_id: usize,
}

impl PairSample {
    pub fn target_in_model_frame(&self) -> PointCloud {
        self.transform.invert_cloud(&self.target)
    }

    pub fn input_in_model_frame(&self) -> PointCloud {
        self.transform.invert_cloud(&self.input)
    }
}

/// Build parameters shared by all samples of a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub r: usize,
    pub spec: BuildSpec,
    pub seed: u64,
    /// Source model names, in build order.
    pub sources: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub manifest: Manifest,
    pub samples: Vec<PairSample>,
}

impl DatasetBundle {
    pub fn method(&self) -> Method {
        self.manifest.spec.method()
    }

    pub fn input_points(&self) -> usize {
        self.manifest.spec.input_points()
    }

    pub fn target_points(&self) -> usize {
        self.input_points() * self.manifest.r
    }

    /// Sample indices grouped by source model, in first-seen order.
    pub fn groups_by_model(&self) -> Vec<(String, Vec<usize>)> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            match groups.iter_mut().find(|g| g.0 == s.source_model) {
                Some(g) => g.1.push(i),
                None => groups.push((s.source_model.clone(), vec![i])),
            }
        }
        groups
    }
}
