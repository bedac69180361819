use super::{PointCloud, Similarity, TriangleMesh};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Centre a cloud on its centroid and scale it so the farthest point has norm 1.
///
/// Returns the normalized cloud and the transform that produced it; use
/// [`Similarity::invert`] to map back. A cloud of identical points gets scale 1.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> Result<(PointCloud, Similarity)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let centroid = cloud.centroid();
    let radius = cloud
        .points()
        .iter()
        .map(|&p| (p - centroid).norm())
        .fold(0.0, f64::max);
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let t = Similarity { centroid, scale };
    Ok((cloud.transformed(&t), t))
}

/// Area-weighted uniform sampling of `n` points on the mesh surface.
///
/// A triangle is chosen with probability proportional to its area, then a
/// point inside it with barycentric weights `(1 - √u, √u(1 - v), √u·v)`.
pub fn sample_mesh_surface(mesh: &TriangleMesh, n: usize, rng: &mut Rng) -> Result<PointCloud> {
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }
    let last_positive = (0..cumulative.len())
        .rev()
        .find(|&t| mesh.triangle_area(t) > 0.0)
        .unwrap();
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.uniform() * total;
        let t = cumulative.partition_point(|&c| c <= target).min(last_positive);
        let [a, b, c] = mesh.corners(t);
        let su = rng.uniform().sqrt();
        let v = rng.uniform();
        points.push(a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v));
    }
    PointCloud::new(points)
}

/// Farthest point sampling with the first pick drawn uniformly from `rng`.
pub fn farthest_point_sample(cloud: &PointCloud, m: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let first = rng.below(cloud.len());
    farthest_point_sample_from(cloud, m, first)
}

/// Farthest point sampling from a fixed first index.
///
/// Each later pick maximizes the minimum squared distance to those already
/// chosen; ties go to the lowest index.
pub fn farthest_point_sample_from(cloud: &PointCloud, m: usize, first: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m > n {
        return Err(Error::TooFewPoints {
            requested: m,
            available: n,
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if first >= n {
        return Err(Error::Shape(format!("first index {first} out of range for {n} points")));
    }
    let pts = cloud.points();
    let mut min_d = vec![f64::INFINITY; n];
    let mut chosen = Vec::with_capacity(m);
    let mut current = first;
    loop {
        chosen.push(current);
        min_d[current] = f64::NEG_INFINITY;
        if chosen.len() == m {
            break;
        }
        let c = pts[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, d) in min_d.iter_mut().enumerate() {
            if *d == f64::NEG_INFINITY {
                continue;
            }
            let nd = pts[i].dist2(c);
            if nd < *d {
                *d = nd;
            }
            if *d > best_d || best == usize::MAX {
                best_d = *d;
                best = i;
            }
        }
        current = best;
    }
    Ok(chosen)
}

/// `m` distinct indices drawn uniformly without replacement, in draw order.
pub fn random_subsample_indices(n: usize, m: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::TooFewPoints {
            requested: m,
            available: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(m);
    Ok(idx)
}

/// `m` distinct points drawn uniformly without replacement, in draw order.
pub fn random_subsample(cloud: &PointCloud, m: usize, rng: &mut Rng) -> Result<PointCloud> {
    let idx = random_subsample_indices(cloud.len(), m, rng)?;
    Ok(cloud.select(&idx))
}
