//! Point cloud and mesh primitives, spatial indexing and sampling.

mod io;
mod kdtree;
mod sampling;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    format_xyz, parse_off, parse_ply_binary, parse_xyz, read_cloud, read_mesh, read_off, read_ply_binary, read_xyz,
    write_xyz,
};
pub use kdtree::SpatialIndex;
pub use sampling::{
    farthest_point_sample, farthest_point_sample_from, normalize_unit_sphere, random_subsample,
    random_subsample_indices, sample_mesh_surface,
};

/// A point in 3D, stored in 64-bit reals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Squared Euclidean distance. Every distance comparison in the crate goes
    /// through this one expression so index and brute-force paths agree bit for bit.
    #[inline]
    pub fn dist2(self, o: Point3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Round each coordinate to the nearest `f32`.
    pub fn to_f32_precision(self) -> Point3 {
        Point3::new(self.x as f32 as f64, self.y as f32 as f64, self.z as f32 as f64)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Ordered sequence of points. Order matters: segment membership in the
/// average-segment builder is defined by position in the sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    /// Build a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(PointCloud { points })
    }

    /// Build without checks. Caller guarantees the invariants.
    pub(crate) fn from_vec_unchecked(points: Vec<Point3>) -> Self {
        debug_assert!(points.iter().all(|p| p.is_finite()));
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn get(&self, i: usize) -> Point3 {
        self.points[i]
    }

    /// Points at the given indices, in index order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud::from_vec_unchecked(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len() as f64;
        let s = self.points.iter().fold(Point3::ORIGIN, |acc, &p| acc + p);
        s * (1.0 / n)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    pub fn bounding_box_volume(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let d = hi - lo;
        d.x * d.y * d.z
    }

    /// Apply a transform to every point.
    pub fn transformed(&self, t: &Similarity) -> PointCloud {
        PointCloud::from_vec_unchecked(self.points.iter().map(|&p| t.apply(p)).collect())
    }

    /// Concatenate clouds in order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud>) -> Result<PointCloud> {
        let points: Vec<Point3> = parts.into_iter().flat_map(|c| c.points.iter().copied()).collect();
        PointCloud::new(points)
    }

    /// Every point repeated `r` times consecutively (row `r*i + j` is point `i`).
    pub fn duplicated(&self, r: usize) -> PointCloud {
        let mut out = Vec::with_capacity(self.len() * r);
        for &p in &self.points {
            out.extend(std::iter::repeat_n(p, r));
        }
        PointCloud::from_vec_unchecked(out)
    }
}

/// Uniform scale about a centre: `apply(p) = (p - centre) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub centroid: Point3,
    pub scale: f64,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        centroid: Point3::ORIGIN,
        scale: 1.0,
    };

    pub fn apply(&self, p: Point3) -> Point3 {
        let d = p - self.centroid;
        Point3::new(d.x / self.scale, d.y / self.scale, d.z / self.scale)
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        p * self.scale + self.centroid
    }

    pub fn invert_cloud(&self, c: &PointCloud) -> PointCloud {
        PointCloud::from_vec_unchecked(c.points().iter().map(|&p| self.invert(p)).collect())
    }
}

/// Indexed triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidMesh(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        Ok(TriangleMesh { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Append another mesh's geometry.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
    }

    /// Map vertices through `f`.
    pub fn map_vertices(&self, f: impl Fn(Point3) -> Point3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&p| f(p)).collect(),
            triangles: self.triangles.clone(),
        }
    }
}
