//! Upsampler weights, forward pass and analytic backward pass.
//!
//! Pipeline for an input of `N` points:
//!
//! 1. embedding: point-wise layer on `[x_i, mean_j(x_j) - x_i]` over the k-NN graph
//! 2. graph layers `σ(Â·H·W + b)`
//! 3. Inception DenseGCN block (variants A and C)
//! 4. NodeShuffle to `r·N` feature rows
//! 5. linear coordinate head: offsets added to the duplicated input points
//! 6. refiner residual head (variants C and D)

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{LayerRole, NetworkConfig};
use super::graph::{build_adjacency, GraphAdjacency};
use super::layers::{
    affine_backward, affine_forward, dense_backward, dense_forward, gcn_backward, gcn_forward, head_forward,
    refiner_backward_cached, refiner_forward, shuffle_backward, shuffle_forward, AffineCache, DenseBlockWeights,
    DenseCache, LayerWeights, RefinerCache, RefinerWeights,
};
use super::loss::chamfer_loss_grad;
use super::matrix::Mat;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::rng::Rng;

/// How to initialize a fresh network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Glorot-uniform weights everywhere, zero biases.
    Glorot,
    /// Glorot everywhere except the layers producing coordinate offsets,
    /// which start at zero, so the untrained output is the input repeated `r` times.
    ZeroHead,
}

/// Every trainable parameter of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    pub embed: LayerWeights,
    pub gcn: Vec<LayerWeights>,
    pub dense: Option<DenseBlockWeights>,
    pub expand: LayerWeights,
    pub head: LayerWeights,
    pub refiner: Option<RefinerWeights>,
}

impl NetworkWeights {
    /// All-zero weights shaped for `config`.
    pub fn zeros(config: &NetworkConfig) -> NetworkWeights {
        Self::from_shapes(config, LayerWeights::zeros)
    }

    pub fn init(config: &NetworkConfig, init: Init, seed: u64) -> NetworkWeights {
        let root = Rng::new(seed);
        let mut counter = 0u64;
        let mut w = Self::from_shapes(config, |i, o| {
            counter += 1;
            LayerWeights::glorot(i, o, &mut root.child(counter))
        });
        if init == Init::ZeroHead {
            w.head = LayerWeights::zeros(w.head.in_channels(), 3);
            if let Some(r) = &mut w.refiner {
                r.out = LayerWeights::zeros(r.out.in_channels(), 3);
            }
        }
        w
    }

    fn from_shapes(config: &NetworkConfig, mut make: impl FnMut(usize, usize) -> LayerWeights) -> NetworkWeights {
        let shapes = config.layer_shapes();
        let mut embed = None;
        let mut gcn = Vec::new();
        let mut branches: Vec<Vec<LayerWeights>> = Vec::new();
        let mut reduce = None;
        let mut expand = None;
        let mut head = None;
        let mut ref_hidden = None;
        let mut ref_out = None;
        for (role, i, o) in shapes {
            let lw = make(i, o);
            match role {
                LayerRole::Embed => embed = Some(lw),
                LayerRole::Gcn(_) => gcn.push(lw),
                LayerRole::Dense { branch, .. } => {
                    if branches.len() <= branch {
                        branches.push(Vec::new());
                    }
                    branches[branch].push(lw);
                }
                LayerRole::Reduce => reduce = Some(lw),
                LayerRole::Expand => expand = Some(lw),
                LayerRole::Head => head = Some(lw),
                LayerRole::RefinerHidden => ref_hidden = Some(lw),
                LayerRole::RefinerOut => ref_out = Some(lw),
            }
        }
        NetworkWeights {
            embed: embed.unwrap(),
            gcn,
            dense: reduce.map(|reduce| DenseBlockWeights {
                branches,
                reduce: Some(reduce),
            }),
            expand: expand.unwrap(),
            head: head.unwrap(),
            refiner: ref_hidden
                .zip(ref_out)
                .map(|(hidden, out)| RefinerWeights { hidden, out }),
        }
    }

    /// Layers in canonical order (matches [`NetworkConfig::layer_shapes`]).
    pub fn layers(&self) -> Vec<&LayerWeights> {
        let mut v = vec![&self.embed];
        v.extend(&self.gcn);
        if let Some(d) = &self.dense {
            v.extend(d.layers());
        }
        v.push(&self.expand);
        v.push(&self.head);
        if let Some(r) = &self.refiner {
            v.push(&r.hidden);
            v.push(&r.out);
        }
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut LayerWeights> {
        let mut v = vec![&mut self.embed];
        v.extend(self.gcn.iter_mut());
        if let Some(d) = &mut self.dense {
            v.extend(d.branches.iter_mut().flatten());
            v.extend(d.reduce.as_mut());
        }
        v.push(&mut self.expand);
        v.push(&mut self.head);
        if let Some(r) = &mut self.refiner {
            v.push(&mut r.hidden);
            v.push(&mut r.out);
        }
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Flat parameter vector in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers().into_iter().flat_map(|l| l.params()).collect()
    }

    /// Overwrite parameters from a flat vector in canonical order.
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.param_count()
            )));
        }
        let mut it = values.iter();
        for l in self.layers_mut() {
            for p in l.params_mut() {
                *p = *it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn from_flat(config: &NetworkConfig, values: &[f64]) -> Result<NetworkWeights> {
        let mut w = NetworkWeights::zeros(config);
        w.set_flat(values)?;
        Ok(w)
    }

    /// Check every layer shape against `config`.
    pub fn check_against(&self, config: &NetworkConfig) -> Result<()> {
        let shapes = config.layer_shapes();
        let layers = self.layers();
        let ok = shapes.len() == layers.len()
            && shapes
                .iter()
                .zip(&layers)
                .all(|(&(_, i, o), l)| l.in_channels() == i && l.out_channels() == o && l.b.len() == o);
        if !ok {
            return Err(Error::Shape("weights do not match network configuration".into()));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &NetworkWeights) {
        for (a, b) in self.layers_mut().into_iter().zip(other.layers()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in self.layers_mut() {
            for p in l.params_mut() {
                *p *= s;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    /// SHA-256 over the little-endian bytes of every parameter.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for v in self.to_flat() {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Graphs a forward pass needs, built once from the input coordinates.
#[derive(Clone, Debug)]
pub struct GraphSet {
    base: GraphAdjacency,
    branches: Vec<GraphAdjacency>,
}

impl GraphSet {
    pub fn build(config: &NetworkConfig, input: &PointCloud) -> Result<GraphSet> {
        let k_max = config.max_k();
        if input.len() <= k_max {
            return Err(Error::Shape(format!(
                "input of {} points is too small for k = {k_max}",
                input.len()
            )));
        }
        let base = build_adjacency(input, config.k_neighbors)?;
        let branches = if config.variant.has_dense_block() {
            config
                .dense_block
                .branch_k
                .iter()
                .map(|&k| {
                    if k == config.k_neighbors {
                        Ok(base.clone())
                    } else {
                        build_adjacency(input, k)
                    }
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(GraphSet { base, branches })
    }

    pub fn base(&self) -> &GraphAdjacency {
        &self.base
    }

    pub fn branches(&self) -> Vec<&GraphAdjacency> {
        self.branches.iter().collect()
    }
}

pub(crate) fn cloud_to_mat(c: &PointCloud) -> Mat {
    Mat::from_vec(c.len(), 3, c.points().iter().flat_map(|p| p.to_array()).collect())
}

pub(crate) fn mat_to_cloud(m: &Mat) -> Result<PointCloud> {
    PointCloud::new(
        (0..m.rows())
            .map(|i| {
                let r = m.row(i);
                Point3::new(r[0], r[1], r[2])
            })
            .collect(),
    )
    .map_err(|_| Error::Numeric("network produced non-finite coordinates".into()))
}

fn duplicate_rows(m: &Mat, r: usize) -> Mat {
    let mut out = Mat::zeros(m.rows() * r, m.cols());
    for i in 0..m.rows() {
        for j in 0..r {
            out.row_mut(i * r + j).copy_from_slice(m.row(i));
        }
    }
    out
}

struct Tape {
    embed: AffineCache,
    gcn: Vec<AffineCache>,
    dense: Option<DenseCache>,
    shuffle: AffineCache,
    shuffled: Mat,
    head: AffineCache,
    refiner: Option<RefinerCache>,
}

fn forward_tape(
    config: &NetworkConfig,
    w: &NetworkWeights,
    input: &PointCloud,
    graphs: &GraphSet,
) -> Result<(Mat, Tape)> {
    let act = config.activation();
    let x = cloud_to_mat(input);
    let rel = {
        let mut m = graphs.base.aggregate(&x);
        for (a, b) in m.data_mut().iter_mut().zip(x.data()) {
            *a -= b;
        }
        m
    };
    let (mut h, embed) = affine_forward(Mat::hconcat(&[&x, &rel]), &w.embed, act);
    let mut gcn = Vec::with_capacity(w.gcn.len());
    for lw in &w.gcn {
        let (out, c) = gcn_forward(&graphs.base, &h, lw, act)?;
        gcn.push(c);
        h = out;
    }
    let dense = match &w.dense {
        Some(dw) => {
            let (out, c) = dense_forward(&graphs.branches(), &graphs.base, &h, dw, act)?;
            h = out;
            Some(c)
        }
        None => None,
    };
    let (shuffled, shuffle) = shuffle_forward(&graphs.base, &h, &w.expand, config.r, act)?;
    let base = duplicate_rows(&x, config.r);
    let (coarse, head) = head_forward(&shuffled, &base, &w.head)?;
    let (out, refiner) = match &w.refiner {
        Some(rw) => {
            let (out, c) = refiner_forward(&shuffled, &coarse, rw, act)?;
            (out, Some(c))
        }
        None => (coarse, None),
    };
    Ok((
        out,
        Tape {
            embed,
            gcn,
            dense,
            shuffle,
            shuffled,
            head,
            refiner,
        },
    ))
}

fn backward_tape(
    config: &NetworkConfig,
    w: &NetworkWeights,
    graphs: &GraphSet,
    tape: &Tape,
    d_out: &Mat,
) -> NetworkWeights {
    let act = config.activation();
    let (refiner_grad, d_shuffled_ref, d_coarse) = match (&w.refiner, &tape.refiner) {
        (Some(rw), Some(c)) => {
            let (g, df, dc) = refiner_backward_cached(c, rw, act, d_out);
            (Some(g), Some(df), dc)
        }
        _ => (None, None, d_out.clone()),
    };
    let (head_grad, mut d_shuffled) =
        affine_backward(&tape.head, &w.head, super::layers::Activation::Identity, &d_coarse);
    if let Some(df) = d_shuffled_ref {
        d_shuffled.add_assign(&df);
    }
    debug_assert_eq!(d_shuffled.shape(), tape.shuffled.shape());
    let (expand_grad, mut d_h) = shuffle_backward(&graphs.base, &tape.shuffle, &w.expand, config.r, act, &d_shuffled);
    let dense_grad = match (&w.dense, &tape.dense) {
        (Some(dw), Some(c)) => {
            let (g, d) = dense_backward(&graphs.branches(), &graphs.base, c, dw, act, &d_h);
            d_h = d;
            Some(g)
        }
        _ => None,
    };
    let mut gcn_grads = vec![None; w.gcn.len()];
    for i in (0..w.gcn.len()).rev() {
        let (g, d) = gcn_backward(&graphs.base, &tape.gcn[i], &w.gcn[i], act, &d_h);
        gcn_grads[i] = Some(g);
        d_h = d;
    }
    let (embed_grad, _) = affine_backward(&tape.embed, &w.embed, act, &d_h);
    NetworkWeights {
        embed: embed_grad,
        gcn: gcn_grads.into_iter().map(Option::unwrap).collect(),
        dense: dense_grad,
        expand: expand_grad,
        head: head_grad,
        refiner: refiner_grad,
    }
}

fn check(config: &NetworkConfig, w: &NetworkWeights) -> Result<()> {
    config.validate()?;
    w.check_against(config)
}

/// Upsample `input` to `r·N` points.
pub fn forward(config: &NetworkConfig, w: &NetworkWeights, input: &PointCloud) -> Result<PointCloud> {
    check(config, w)?;
    let graphs = GraphSet::build(config, input)?;
    forward_with_graphs(config, w, input, &graphs)
}

pub fn forward_with_graphs(
    config: &NetworkConfig,
    w: &NetworkWeights,
    input: &PointCloud,
    graphs: &GraphSet,
) -> Result<PointCloud> {
    let (out, _) = forward_tape(config, w, input, graphs)?;
    mat_to_cloud(&out)
}

/// Chamfer loss of `forward(input)` against `target` and its gradient with
/// respect to every weight. Nearest-neighbour assignments are held fixed
/// for the evaluation (the usual subgradient of the min).
pub fn backward(
    config: &NetworkConfig,
    w: &NetworkWeights,
    input: &PointCloud,
    target: &PointCloud,
) -> Result<(f64, NetworkWeights)> {
    check(config, w)?;
    let graphs = GraphSet::build(config, input)?;
    backward_with_graphs(config, w, input, target, &graphs)
}

pub fn backward_with_graphs(
    config: &NetworkConfig,
    w: &NetworkWeights,
    input: &PointCloud,
    target: &PointCloud,
    graphs: &GraphSet,
) -> Result<(f64, NetworkWeights)> {
    let (out, tape) = forward_tape(config, w, input, graphs)?;
    let pred = mat_to_cloud(&out)?;
    let (loss, d_out) = chamfer_loss_grad(&pred, target)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok((loss, backward_tape(config, w, graphs, &tape, &d_out)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            k_neighbors: 3,
            embed_width: 4,
            gcn_widths: vec![4],
            dense_block: super::super::config::DenseBlockConfig {
                branch_k: vec![2, 3],
                layers_per_branch: 2,
                growth: 3,
            },
            shuffle_width: 4,
            refiner_hidden: 5,
            ..NetworkConfig::default()
        }
    }

    fn cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = Rng::new(seed);
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.normal(), rng.normal(), rng.normal()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn flat_roundtrip_and_counts() {
        for v in super::super::config::Variant::ALL {
            let c = tiny().with_variant(v);
            let w = NetworkWeights::init(&c, Init::Glorot, 3);
            assert_eq!(w.param_count(), c.param_count());
            let back = NetworkWeights::from_flat(&c, &w.to_flat()).unwrap();
            assert_eq!(back, w);
        }
    }

    #[test]
    fn zero_head_duplicates_input() {
        for v in super::super::config::Variant::ALL {
            let c = tiny().with_variant(v);
            let w = NetworkWeights::init(&c, Init::ZeroHead, 1);
            let x = cloud(10, 2);
            assert_eq!(forward(&c, &w, &x).unwrap(), x.duplicated(4));
        }
    }

    #[test]
    fn mismatched_weights_rejected() {
        let a = tiny();
        let w = NetworkWeights::init(
            &a.with_variant(super::super::config::Variant::NoDenseGcn),
            Init::Glorot,
            0,
        );
        assert!(matches!(forward(&a, &w, &cloud(10, 1)), Err(Error::Shape(_))));
    }

    #[test]
    fn too_small_input_rejected() {
        let c = tiny();
        let w = NetworkWeights::init(&c, Init::Glorot, 0);
        assert!(forward(&c, &w, &cloud(3, 1)).is_err());
    }
}
