use std::cmp::Ordering;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Balanced k-d tree over a point cloud. Immutable after construction.
///
/// Query results are exactly the brute-force answer: candidates are ordered
/// by `(squared distance, point index)`, so equal distances resolve to the
/// lowest index.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn key_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.0)
    }

    fn offer(&mut self, cand: (f64, usize)) {
        if self.full() && !key_less(cand, *self.items.last().unwrap()) {
            return;
        }
        let pos = self.items.partition_point(|&c| key_less(c, cand));
        self.items.insert(pos, cand);
        if self.items.len() > self.k {
            self.items.pop();
        }
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> SpatialIndex {
        Self::from_points(cloud.points().to_vec())
    }

    pub(crate) fn from_points(points: Vec<Point3>) -> SpatialIndex {
        let mut index = SpatialIndex {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        if !index.points.is_empty() {
            let n = index.points.len();
            index.build_node(0, n);
        }
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a].coord(axis).total_cmp(&points[b].coord(axis)).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]].coord(axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.points[i].to_array();
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| {
                (hi[a] - lo[a])
                    .partial_cmp(&(hi[b] - lo[b]))
                    .unwrap_or(Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point3 {
        self.points[i]
    }

    /// Indices of the `k` nearest points, ascending by distance, ties by index.
    pub fn knn(&self, query: Point3, k: usize) -> Result<Vec<usize>> {
        Ok(self.knn_with_dist2(query, k)?.into_iter().map(|(_, i)| i).collect())
    }

    /// Like [`knn`](Self::knn) but also returns squared distances.
    pub fn knn_with_dist2(&self, query: Point3, k: usize) -> Result<Vec<(f64, usize)>> {
        if k > self.len() {
            return Err(Error::TooFewPoints {
                requested: k,
                available: self.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut cands = Candidates {
            k,
            items: Vec::with_capacity(k + 1),
        };
        self.search(0, query, &mut cands);
        Ok(cands.items)
    }

    /// Nearest point as `(squared distance, index)`. Panics on an empty index.
    pub fn nearest(&self, query: Point3) -> (f64, usize) {
        assert!(!self.is_empty(), "nearest() on empty index");
        let mut cands = Candidates {
            k: 1,
            items: Vec::with_capacity(2),
        };
        self.search(0, query, &mut cands);
        cands.items[0]
    }

    fn search(&self, node: usize, q: Point3, cands: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    cands.offer((self.points[i].dist2(q), i));
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q.coord(axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, cands);
                // equal bound is still searched: a tie may carry a lower index
                if !cands.full() || diff * diff <= cands.worst() {
                    self.search(far, q, cands);
                }
            }
        }
    }
}
