//! Procedural desk-scale corpus: spheres, boxes, cylinders and composites.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, TriangleMesh};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyKind {
    Spheres,
    Cubes,
    Cylinders,
    Composites,
    Mixed,
}

impl FromStr for ToyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spheres" => ToyKind::Spheres,
            "cubes" => ToyKind::Cubes,
            "cylinders" => ToyKind::Cylinders,
            "composites" => ToyKind::Composites,
            "mixed" => ToyKind::Mixed,
            _ => return Err(Error::Config(format!("unknown toy corpus '{s}'"))),
        })
    }
}

impl fmt::Display for ToyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToyKind::Spheres => "spheres",
            ToyKind::Cubes => "cubes",
            ToyKind::Cylinders => "cylinders",
            ToyKind::Composites => "composites",
            ToyKind::Mixed => "mixed",
        })
    }
}

fn mesh(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, triangles).expect("generated mesh indices are in range")
}

/// Latitude-longitude sphere.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    let mut v = vec![Point3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let theta = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = TAU * j as f64 / slices as f64;
            v.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    v.push(Point3::new(0.0, 0.0, -radius));
    let south = v.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    let mut t = Vec::new();
    for j in 0..slices {
        t.push([0, ring(1, j), ring(1, j + 1)]);
        t.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            t.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            t.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    mesh(v, t)
}

/// Axis-aligned box centred at the origin.
pub fn cuboid(half: Point3) -> TriangleMesh {
    let v: Vec<Point3> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            )
        })
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let t = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    mesh(v, t)
}

/// Unit cube `[0,1]³` split into 12 triangles, two per face.
pub fn unit_cube() -> TriangleMesh {
    cuboid(Point3::new(0.5, 0.5, 0.5)).map_vertices(|p| p + Point3::new(0.5, 0.5, 0.5))
}

/// Capped cylinder along z, centred at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let h = height / 2.0;
    let mut v = vec![Point3::new(0.0, 0.0, h), Point3::new(0.0, 0.0, -h)];
    for j in 0..segments {
        let a = TAU * j as f64 / segments as f64;
        v.push(Point3::new(radius * a.cos(), radius * a.sin(), h));
        v.push(Point3::new(radius * a.cos(), radius * a.sin(), -h));
    }
    let top = |j: usize| 2 + 2 * (j % segments);
    let bot = |j: usize| 3 + 2 * (j % segments);
    let mut t = Vec::new();
    for j in 0..segments {
        t.push([0, top(j), top(j + 1)]);
        t.push([1, bot(j + 1), bot(j)]);
        t.push([top(j), bot(j), bot(j + 1)]);
        t.push([top(j), bot(j + 1), top(j + 1)]);
    }
    mesh(v, t)
}

fn rotation(rng: &mut Rng) -> impl Fn(Point3) -> Point3 {
    // random unit quaternion
    let (a, b, c, d) = (rng.normal(), rng.normal(), rng.normal(), rng.normal());
    let n = (a * a + b * b + c * c + d * d).sqrt();
    let (w, x, y, z) = (a / n, b / n, c / n, d / n);
    move |p: Point3| {
        Point3::new(
            (1.0 - 2.0 * (y * y + z * z)) * p.x + 2.0 * (x * y - w * z) * p.y + 2.0 * (x * z + w * y) * p.z,
            2.0 * (x * y + w * z) * p.x + (1.0 - 2.0 * (x * x + z * z)) * p.y + 2.0 * (y * z - w * x) * p.z,
            2.0 * (x * z - w * y) * p.x + 2.0 * (y * z + w * x) * p.y + (1.0 - 2.0 * (x * x + y * y)) * p.z,
        )
    }
}

fn random_sphere(rng: &mut Rng) -> TriangleMesh {
    let r = rng.uniform_in(0.6, 1.4);
    let (sx, sy) = (rng.uniform_in(0.7, 1.3), rng.uniform_in(0.7, 1.3));
    uv_sphere(r, 16, 24).map_vertices(|p| Point3::new(p.x * sx, p.y * sy, p.z))
}

fn random_cube(rng: &mut Rng) -> TriangleMesh {
    let half = Point3::new(
        rng.uniform_in(0.4, 1.2),
        rng.uniform_in(0.4, 1.2),
        rng.uniform_in(0.4, 1.2),
    );
    cuboid(half)
}

fn random_cylinder(rng: &mut Rng) -> TriangleMesh {
    cylinder(rng.uniform_in(0.3, 0.9), rng.uniform_in(0.8, 2.4), 32)
}

fn random_composite(rng: &mut Rng) -> TriangleMesh {
    match rng.below(3) {
        // dumbbell: two spheres on a bar
        0 => {
            let gap = rng.uniform_in(1.2, 2.0);
            let r = rng.uniform_in(0.4, 0.7);
            let mut m = uv_sphere(r, 12, 18).map_vertices(|p| p + Point3::new(0.0, 0.0, gap));
            m.merge(&uv_sphere(r, 12, 18).map_vertices(|p| p - Point3::new(0.0, 0.0, gap)));
            m.merge(&cylinder(r * 0.35, 2.0 * gap, 16));
            m
        }
        // box with a sphere on top
        1 => {
            let h = rng.uniform_in(0.4, 0.8);
            let mut m = cuboid(Point3::new(h * 1.5, h * 1.5, h));
            let r = rng.uniform_in(0.4, 0.7);
            m.merge(&uv_sphere(r, 12, 18).map_vertices(|p| p + Point3::new(0.0, 0.0, h + r * 0.8)));
            m
        }
        // L-shaped pair of boxes
        _ => {
            let a = rng.uniform_in(0.3, 0.5);
            let l = rng.uniform_in(1.0, 1.6);
            let mut m = cuboid(Point3::new(l, a, a));
            m.merge(&cuboid(Point3::new(a, l, a)).map_vertices(|p| p + Point3::new(l - a, l - a, 0.0)));
            m
        }
    }
}

/// `count` named meshes of the given kind, deterministic in `seed`.
pub fn toy_corpus(kind: ToyKind, count: usize, seed: u64) -> Vec<(String, TriangleMesh)> {
    let root = Rng::new(seed);
    (0..count)
        .map(|i| {
            let mut rng = root.child(i as u64);
            let pick = match kind {
                ToyKind::Mixed => [
                    ToyKind::Spheres,
                    ToyKind::Cubes,
                    ToyKind::Cylinders,
                    ToyKind::Composites,
                ][i % 4],
                k => k,
            };
            let (name, m) = match pick {
                ToyKind::Spheres => ("sphere", random_sphere(&mut rng)),
                ToyKind::Cubes => ("cube", random_cube(&mut rng)),
                ToyKind::Cylinders => ("cylinder", random_cylinder(&mut rng)),
                _ => ("composite", random_composite(&mut rng)),
            };
            let rot = rotation(&mut rng);
            (format!("{name}_{i:03}"), m.map_vertices(rot))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn areas_are_sane() {
        assert!((unit_cube().surface_area() - 6.0).abs() < 1e-12);
        let s = uv_sphere(1.0, 32, 48).surface_area();
        assert!((s - 4.0 * PI).abs() < 0.05 * 4.0 * PI);
        let c = cylinder(1.0, 2.0, 64).surface_area();
        assert!((c - 6.0 * PI).abs() < 0.02 * 6.0 * PI);
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = toy_corpus(ToyKind::Mixed, 8, 3);
        let b = toy_corpus(ToyKind::Mixed, 8, 3);
        assert_eq!(a, b);
        assert!(a.iter().all(|(_, m)| m.surface_area() > 0.0));
        assert_eq!(a[3].0, "composite_003");
    }
}
