use super::matrix::Mat;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};

/// Directed k-NN graph with self-loops and uniform row weights `1/(k+1)`.
///
/// Row `i` lists node `i` first, followed by its `k` nearest other nodes in
/// ascending distance (ties by index).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphAdjacency {
    k: usize,
    neighbors: Vec<usize>,
}

impl GraphAdjacency {
    /// Self-loop only (`k = 0`): aggregation is the identity.
    pub fn self_loops(n: usize) -> GraphAdjacency {
        GraphAdjacency {
            k: 0,
            neighbors: (0..n).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len() / (self.k + 1)
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.neighbors[i * (self.k + 1)..(i + 1) * (self.k + 1)]
    }

    pub fn weight(&self) -> f64 {
        1.0 / (self.k + 1) as f64
    }

    /// Dense `n × n` form of the normalized adjacency.
    pub fn to_dense(&self) -> Mat {
        let n = self.n_nodes();
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for &j in self.row(i) {
                a.set(i, j, a.get(i, j) + self.weight());
            }
        }
        a
    }

    /// `Â · h`.
    pub fn aggregate(&self, h: &Mat) -> Mat {
        assert_eq!(h.rows(), self.n_nodes(), "aggregate rows");
        let w = self.weight();
        let mut out = Mat::zeros(h.rows(), h.cols());
        for i in 0..self.n_nodes() {
            let o = out.row_mut(i);
            for &j in self.row(i) {
                for (a, &x) in o.iter_mut().zip(h.row(j)) {
                    *a += x;
                }
            }
            for a in o.iter_mut() {
                *a *= w;
            }
        }
        out
    }

    /// `Âᵀ · g`.
    pub fn aggregate_transpose(&self, g: &Mat) -> Mat {
        assert_eq!(g.rows(), self.n_nodes(), "aggregate_transpose rows");
        let w = self.weight();
        let mut out = Mat::zeros(g.rows(), g.cols());
        for i in 0..self.n_nodes() {
            let gi: Vec<f64> = g.row(i).iter().map(|x| x * w).collect();
            for &j in self.row(i) {
                for (a, &x) in out.row_mut(j).iter_mut().zip(&gi) {
                    *a += x;
                }
            }
        }
        out
    }
}

/// k-NN graph over the cloud's points. Requires `k < N`.
pub fn build_adjacency(cloud: &PointCloud, k: usize) -> Result<GraphAdjacency> {
    let n = cloud.len();
    if k >= n {
        return Err(Error::Shape(format!("k = {k} neighbours needs more than {n} points")));
    }
    let index = SpatialIndex::build(cloud);
    let mut neighbors = Vec::with_capacity(n * (k + 1));
    for i in 0..n {
        neighbors.push(i);
        let near = index.knn(cloud.get(i), k + 1)?;
        neighbors.extend(near.into_iter().filter(|&j| j != i).take(k));
    }
    Ok(GraphAdjacency { k, neighbors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| Point3::new(x, 0.0, 0.0)).collect()).unwrap()
    }

    #[test]
    fn collinear_rows() {
        let a = build_adjacency(&line(&[0.0, 1.0, 2.5]), 1).unwrap();
        assert_eq!(a.row(0), &[0, 1]);
        assert_eq!(a.row(2), &[2, 1]);
        let d = a.to_dense();
        for i in 0..3 {
            assert!((d.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_points_keep_self_first() {
        let a = build_adjacency(&line(&[0.0, 0.0, 0.0, 5.0]), 2).unwrap();
        assert_eq!(a.row(1), &[1, 0, 2]);
        assert_eq!(a.row(1).len(), 3);
    }

    #[test]
    fn k_must_be_below_n() {
        assert!(build_adjacency(&line(&[0.0, 1.0]), 2).is_err());
    }

    #[test]
    fn transpose_matches_dense() {
        let a = build_adjacency(&line(&[0.0, 1.0, 3.0, 3.5, 7.0]), 2).unwrap();
        let g = Mat::from_fn(5, 2, |i, j| (i * 3 + j) as f64 - 4.0);
        let dense = a.to_dense();
        let expected = dense.t_matmul(&g);
        let got = a.aggregate_transpose(&g);
        for (x, y) in got.data().iter().zip(expected.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
