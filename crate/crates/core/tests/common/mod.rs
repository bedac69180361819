//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use pcu_core::net::{LayerWeights, Mat};
use pcu_core::{Point3, PointCloud, Rng};

pub fn random_cloud(n: usize, rng: &mut Rng) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                )
            })
            .collect(),
    )
    .unwrap()
}

fn d2(a: Point3, b: Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// All indices sorted by (squared distance, index), first `k`.
pub fn brute_knn(cloud: &PointCloud, q: Point3, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = cloud.points().iter().enumerate().map(|(i, &p)| (d2(p, q), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|c| c.1).collect()
}

/// FPS by recomputing every candidate's minimum distance to the whole
/// selected set at each step.
pub fn brute_fps(cloud: &PointCloud, m: usize, first: usize) -> Vec<usize> {
    let pts = cloud.points();
    let mut chosen = vec![first];
    while chosen.len() < m {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..pts.len() {
            if chosen.contains(&i) {
                continue;
            }
            let md = chosen.iter().map(|&c| d2(pts[i], pts[c])).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bd, _)| md > bd) {
                best = Some((md, i));
            }
        }
        chosen.push(best.unwrap().1);
    }
    chosen
}

fn directed_min(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    a.points()
        .iter()
        .map(|&p| b.points().iter().map(|&q| d2(p, q)).fold(f64::INFINITY, f64::min))
        .collect()
}

pub fn brute_chamfer(p: &PointCloud, g: &PointCloud) -> f64 {
    let a = directed_min(p, g);
    let b = directed_min(g, p);
    a.iter().sum::<f64>() / a.len() as f64 + b.iter().sum::<f64>() / b.len() as f64
}

pub fn brute_hausdorff(p: &PointCloud, g: &PointCloud) -> f64 {
    let a = directed_min(p, g).into_iter().map(f64::sqrt).fold(0.0, f64::max);
    let b = directed_min(g, p).into_iter().map(f64::sqrt).fold(0.0, f64::max);
    a.max(b)
}

pub fn random_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn random_layer(i: usize, o: usize, rng: &mut Rng) -> LayerWeights {
    LayerWeights {
        w: random_mat(i, o, rng).map(|x| x * 0.5),
        b: (0..o).map(|_| rng.normal() * 0.1).collect(),
    }
}

/// `Σ out ⊙ probe`: a linear scalar loss whose gradient w.r.t. `out` is `probe`.
pub fn probe_loss(out: &Mat, probe: &Mat) -> f64 {
    out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compare analytic gradient components with central differences of `f`
/// about `x0`, over components where `|g| > 1e-8`.
pub fn check_gradient(x0: &[f64], analytic: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> GradCheck {
    assert_eq!(x0.len(), analytic.len());
    let mut x = x0.to_vec();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..x.len() {
        x[i] = x0[i] + eps;
        let fp = f(&x);
        x[i] = x0[i] - eps;
        let fm = f(&x);
        x[i] = x0[i];
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        if a.abs().max(numeric.abs()) <= 1e-8 {
            continue;
        }
        checked += 1;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
        worst = worst.max(rel);
    }
    GradCheck {
        max_rel_err: worst,
        checked,
    }
}
