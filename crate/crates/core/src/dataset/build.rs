use rayon::prelude::*;

use super::{AsSpec, BuildSpec, DatasetBundle, Manifest, Method, PairSample, PatchSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    farthest_point_sample, normalize_unit_sphere, random_subsample_indices, PointCloud, SpatialIndex,
};
use crate::rng::Rng;

/// A named dense cloud to build pairs from.
#[derive(Clone, Debug)]
pub struct SourceModel {
    pub name: String,
    pub cloud: PointCloud,
}

/// Dense-cloud indices of every patch target: k-NN balls of size `r·N_k`
/// around `K` farthest-point seeds.
pub fn plan_patch_targets(dense: &PointCloud, spec: &PatchSpec, r: usize, rng: &Rng) -> Result<Vec<Vec<usize>>> {
    let n = dense.len();
    let per_target = spec.points_per_patch * r;
    if r < 1 || per_target > n {
        return Err(Error::Infeasible(format!(
            "patch target of {per_target} points exceeds dense cloud of {n}"
        )));
    }
    if spec.patches_per_model > n {
        return Err(Error::Infeasible(format!(
            "{} patches from {n} points",
            spec.patches_per_model
        )));
    }
    let covered = (spec.patches_per_model * per_target) as f64;
    if covered < spec.overlap_factor * n as f64 {
        return Err(Error::Infeasible(format!(
            "{} patches of {per_target} points cover {covered} < {} x {n}",
            spec.patches_per_model, spec.overlap_factor
        )));
    }
    let seeds = farthest_point_sample(dense, spec.patches_per_model, &mut rng.child(0))?;
    let index = SpatialIndex::build(dense);
    seeds.iter().map(|&s| index.knn(dense.get(s), per_target)).collect()
}

/// Dense-cloud indices of every AS target: `r·M` points drawn without
/// replacement, cut by draw order into `K` contiguous runs.
pub fn plan_as_targets(dense: &PointCloud, spec: &AsSpec, r: usize, rng: &Rng) -> Result<Vec<Vec<usize>>> {
    let n = dense.len();
    let drawn_count = spec.total_sampled * r;
    if r < 1 || drawn_count > n {
        return Err(Error::Infeasible(format!(
            "average segment needs r*M = {drawn_count} points, dense cloud has {n}"
        )));
    }
    let drawn = random_subsample_indices(n, drawn_count, &mut rng.child(0))?;
    let seg = drawn_count / spec.segments;
    Ok(drawn.chunks_exact(seg).map(<[usize]>::to_vec).collect())
}

fn make_pair(
    dense: &PointCloud,
    target_idx: &[usize],
    n_input: usize,
    method: Method,
    part_id: usize,
    source: &str,
    rng: &mut Rng,
) -> Result<PairSample> {
    let (normalized, transform) = normalize_unit_sphere(&dense.select(target_idx))?;
    // stored coordinates are exactly representable in the float32 payload
    let target = PointCloud::new(normalized.points().iter().map(|p| p.to_f32_precision()).collect())?;
    let input_idx = random_subsample_indices(target.len(), n_input, rng)?;
    Ok(PairSample {
        input: target.select(&input_idx),
        target,
        transform,
        source_model: source.to_string(),
        method,
        part_id,
    })
}

fn pairs_from_plan(
    dense: &PointCloud,
    plan: &[Vec<usize>],
    n_input: usize,
    method: Method,
    source: &str,
    rng: &Rng,
) -> Result<Vec<PairSample>> {
    plan.iter()
        .enumerate()
        .map(|(k, idx)| make_pair(dense, idx, n_input, method, k, source, &mut rng.child(k as u64 + 1)))
        .collect()
}

/// Patch pairs for one model.
pub fn build_patch_pairs(
    dense: &PointCloud,
    spec: &PatchSpec,
    r: usize,
    rng: &Rng,
    source: &str,
) -> Result<Vec<PairSample>> {
    let plan = plan_patch_targets(dense, spec, r, rng)?;
    pairs_from_plan(dense, &plan, spec.points_per_patch, Method::Patch, source, rng)
}

/// Average-segment pairs for one model.
pub fn build_as_pairs(dense: &PointCloud, spec: &AsSpec, r: usize, rng: &Rng, source: &str) -> Result<Vec<PairSample>> {
    let plan = plan_as_targets(dense, spec, r, rng)?;
    pairs_from_plan(dense, &plan, spec.points_per_segment(), Method::As, source, rng)
}

/// Build a bundle over many models. Model `i` uses stream `seed.child(i)`, so
/// the result does not depend on thread scheduling.
pub fn build_dataset(sources: &[SourceModel], spec: BuildSpec, r: usize, seed: u64) -> Result<DatasetBundle> {
    if sources.is_empty() {
        return Err(Error::Infeasible("no source models".into()));
    }
    let root = Rng::new(seed);
    let per_model: Vec<Vec<PairSample>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let rng = root.child(i as u64);
            match &spec {
                BuildSpec::Patch(p) => build_patch_pairs(&src.cloud, p, r, &rng, &src.name),
                BuildSpec::As(a) => build_as_pairs(&src.cloud, a, r, &rng, &src.name),
            }
        })
        .collect::<Result<_>>()?;
    Ok(DatasetBundle {
        manifest: Manifest {
            r,
            spec,
            seed,
            sources: sources.iter().map(|s| s.name.clone()).collect(),
        },
        samples: per_model.into_iter().flatten().collect(),
    })
}
