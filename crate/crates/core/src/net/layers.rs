//! Network layers with hand-written backward passes.
//!
//! Every layer is an affine map `x·W + b` followed by an activation, where
//! `x` is either the node features themselves (point-wise layers) or their
//! neighbourhood mean `Â·h` (graph layers). Public `*_backward` functions
//! recompute the forward pass and return parameter and input gradients for
//! an upstream gradient `d_out`.

use serde::{Deserialize, Serialize};

use super::graph::GraphAdjacency;
use super::matrix::Mat;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slope", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
        }
    }

    /// Derivative at pre-activation `x` (the left branch at 0).
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
        }
    }
}

/// `in × out` weight matrix plus bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl LayerWeights {
    pub fn zeros(in_channels: usize, out_channels: usize) -> LayerWeights {
        LayerWeights {
            w: Mat::zeros(in_channels, out_channels),
            b: vec![0.0; out_channels],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_channels: usize, out_channels: usize, rng: &mut Rng) -> LayerWeights {
        let limit = (6.0 / (in_channels + out_channels) as f64).sqrt();
        LayerWeights {
            w: Mat::from_fn(in_channels, out_channels, |_, _| rng.uniform_in(-limit, limit)),
            b: vec![0.0; out_channels],
        }
    }

    pub fn in_channels(&self) -> usize {
        self.w.rows()
    }

    pub fn out_channels(&self) -> usize {
        self.w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.b.len()
    }

    /// Parameters in canonical order: `W` row-major, then bias.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w.data().iter().chain(&self.b).copied()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.w.data_mut().iter_mut().chain(self.b.iter_mut())
    }

    pub fn add_assign(&mut self, other: &LayerWeights) {
        self.w.add_assign(&other.w);
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
    }

    fn check_input(&self, cols: usize, what: &str) -> Result<()> {
        if cols != self.in_channels() {
            return Err(Error::Shape(format!(
                "{what}: input has {cols} channels, layer expects {}",
                self.in_channels()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct AffineCache {
    input: Mat,
    pre: Mat,
}

pub(crate) fn affine_forward(input: Mat, w: &LayerWeights, act: Activation) -> (Mat, AffineCache) {
    let mut pre = input.matmul(&w.w);
    pre.add_row_vector(&w.b);
    let out = pre.map(|x| act.apply(x));
    (out, AffineCache { input, pre })
}

pub(crate) fn affine_backward(
    cache: &AffineCache,
    w: &LayerWeights,
    act: Activation,
    d_out: &Mat,
) -> (LayerWeights, Mat) {
    let mut d_pre = d_out.clone();
    if act != Activation::Identity {
        for (d, &z) in d_pre.data_mut().iter_mut().zip(cache.pre.data()) {
            *d *= act.derivative(z);
        }
    }
    let grad = LayerWeights {
        w: cache.input.t_matmul(&d_pre),
        b: d_pre.col_sums(),
    };
    let d_input = d_pre.matmul_t(&w.w);
    (grad, d_input)
}

fn check_nodes(adj: &GraphAdjacency, h: &Mat) -> Result<()> {
    if adj.n_nodes() != h.rows() {
        return Err(Error::Shape(format!(
            "adjacency has {} nodes, features have {}",
            adj.n_nodes(),
            h.rows()
        )));
    }
    Ok(())
}

pub(crate) fn gcn_forward(
    adj: &GraphAdjacency,
    h: &Mat,
    w: &LayerWeights,
    act: Activation,
) -> Result<(Mat, AffineCache)> {
    check_nodes(adj, h)?;
    w.check_input(h.cols(), "gcn layer")?;
    Ok(affine_forward(adj.aggregate(h), w, act))
}

pub(crate) fn gcn_backward(
    adj: &GraphAdjacency,
    cache: &AffineCache,
    w: &LayerWeights,
    act: Activation,
    d_out: &Mat,
) -> (LayerWeights, Mat) {
    let (grad, d_agg) = affine_backward(cache, w, act, d_out);
    (grad, adj.aggregate_transpose(&d_agg))
}

/// Graph convolution `σ(Â·h·W + b)`.
pub fn gcn_layer(adj: &GraphAdjacency, h: &Mat, w: &LayerWeights, act: Activation) -> Result<Mat> {
    Ok(gcn_forward(adj, h, w, act)?.0)
}

pub fn gcn_layer_backward(
    adj: &GraphAdjacency,
    h: &Mat,
    w: &LayerWeights,
    act: Activation,
    d_out: &Mat,
) -> Result<(LayerWeights, Mat)> {
    let (_, cache) = gcn_forward(adj, h, w, act)?;
    Ok(gcn_backward(adj, &cache, w, act, d_out))
}

/// Point-wise layer `σ(h·W + b)`.
pub fn pointwise_layer(h: &Mat, w: &LayerWeights, act: Activation) -> Result<Mat> {
    w.check_input(h.cols(), "point-wise layer")?;
    Ok(affine_forward(h.clone(), w, act).0)
}

/// Weights of a multi-branch densely connected GCN block.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlockWeights {
    /// `branches[b][l]` takes the concatenation of the block input and the
    /// outputs of layers `0..l` of branch `b`.
    pub branches: Vec<Vec<LayerWeights>>,
    /// Width reduction over the concatenated branch outputs; without it the
    /// block returns the concatenation.
    pub reduce: Option<LayerWeights>,
}

impl DenseBlockWeights {
    pub fn layers(&self) -> impl Iterator<Item = &LayerWeights> {
        self.branches.iter().flatten().chain(self.reduce.as_ref())
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(LayerWeights::param_count).sum()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct DenseCache {
    branches: Vec<Vec<(AffineCache, Vec<usize>)>>,
    reduce: Option<AffineCache>,
}

pub(crate) fn dense_forward(
    branch_adjs: &[&GraphAdjacency],
    reduce_adj: &GraphAdjacency,
    h: &Mat,
    w: &DenseBlockWeights,
    act: Activation,
) -> Result<(Mat, DenseCache)> {
    if branch_adjs.len() != w.branches.len() || w.branches.is_empty() {
        return Err(Error::Shape(format!(
            "{} adjacencies for {} branches",
            branch_adjs.len(),
            w.branches.len()
        )));
    }
    let mut outputs = Vec::new();
    let mut caches = Vec::with_capacity(w.branches.len());
    for (adj, layers) in branch_adjs.iter().zip(&w.branches) {
        if layers.is_empty() {
            return Err(Error::Shape("dense branch without layers".into()));
        }
        let mut pieces = vec![h.clone()];
        let mut bc = Vec::with_capacity(layers.len());
        for lw in layers {
            let widths: Vec<usize> = pieces.iter().map(Mat::cols).collect();
            let input = Mat::hconcat(&pieces.iter().collect::<Vec<_>>());
            let (y, c) = gcn_forward(adj, &input, lw, act)?;
            pieces.push(y);
            bc.push((c, widths));
        }
        outputs.extend(pieces.into_iter().skip(1));
        caches.push(bc);
    }
    let cat = Mat::hconcat(&outputs.iter().collect::<Vec<_>>());
    match &w.reduce {
        Some(rw) => {
            let (out, c) = gcn_forward(reduce_adj, &cat, rw, act)?;
            Ok((
                out,
                DenseCache {
                    branches: caches,
                    reduce: Some(c),
                },
            ))
        }
        None => Ok((
            cat,
            DenseCache {
                branches: caches,
                reduce: None,
            },
        )),
    }
}

pub(crate) fn dense_backward(
    branch_adjs: &[&GraphAdjacency],
    reduce_adj: &GraphAdjacency,
    cache: &DenseCache,
    w: &DenseBlockWeights,
    act: Activation,
    d_out: &Mat,
) -> (DenseBlockWeights, Mat) {
    let (reduce_grad, d_cat) = match (&w.reduce, &cache.reduce) {
        (Some(rw), Some(c)) => {
            let (g, d) = gcn_backward(reduce_adj, c, rw, act, d_out);
            (Some(g), d)
        }
        _ => (None, d_out.clone()),
    };
    let out_widths: Vec<usize> = w
        .branches
        .iter()
        .flat_map(|layers| layers.iter().map(LayerWeights::out_channels))
        .collect();
    let mut d_outputs = d_cat.hsplit(&out_widths).into_iter();
    let mut d_h = Mat::zeros(d_out.rows(), w.branches[0][0].in_channels());
    let mut branch_grads = Vec::with_capacity(w.branches.len());
    for ((adj, layers), bc) in branch_adjs.iter().zip(&w.branches).zip(&cache.branches) {
        let mut d_pieces = vec![Mat::zeros(d_h.rows(), d_h.cols())];
        d_pieces.extend(d_outputs.by_ref().take(layers.len()));
        let mut grads = vec![None; layers.len()];
        for l in (0..layers.len()).rev() {
            let (c, widths) = &bc[l];
            let (g, d_in) = gcn_backward(adj, c, &layers[l], act, &d_pieces[l + 1]);
            for (dp, part) in d_pieces.iter_mut().zip(d_in.hsplit(widths)) {
                dp.add_assign(&part);
            }
            grads[l] = Some(g);
        }
        d_h.add_assign(&d_pieces[0]);
        branch_grads.push(grads.into_iter().map(Option::unwrap).collect());
    }
    (
        DenseBlockWeights {
            branches: branch_grads,
            reduce: reduce_grad,
        },
        d_h,
    )
}

/// Multi-branch densely connected GCN block.
///
/// Branch `b` runs its layers over `branch_adjs[b]`; the concatenated branch
/// outputs are reduced by a final graph layer over `reduce_adj`.
pub fn inception_densegcn(
    branch_adjs: &[&GraphAdjacency],
    reduce_adj: &GraphAdjacency,
    h: &Mat,
    w: &DenseBlockWeights,
    act: Activation,
) -> Result<Mat> {
    Ok(dense_forward(branch_adjs, reduce_adj, h, w, act)?.0)
}

pub fn inception_densegcn_backward(
    branch_adjs: &[&GraphAdjacency],
    reduce_adj: &GraphAdjacency,
    h: &Mat,
    w: &DenseBlockWeights,
    act: Activation,
    d_out: &Mat,
) -> Result<(DenseBlockWeights, Mat)> {
    let (_, cache) = dense_forward(branch_adjs, reduce_adj, h, w, act)?;
    Ok(dense_backward(branch_adjs, reduce_adj, &cache, w, act, d_out))
}

/// Periodic shuffle `(N, r·C′) → (r·N, C′)`: output row `r·i + j` holds
/// channels `j·C′ .. (j+1)·C′` of input row `i`.
pub fn periodic_shuffle(h: Mat, r: usize) -> Result<Mat> {
    if r == 0 || !h.cols().is_multiple_of(r) {
        return Err(Error::Shape(format!("{} channels not divisible by r = {r}", h.cols())));
    }
    let (n, c) = h.shape();
    // row-major layout already matches
    Ok(h.reshape(n * r, c / r))
}

pub(crate) fn periodic_unshuffle(h: Mat, r: usize) -> Mat {
    let (n, c) = h.shape();
    h.reshape(n / r, c * r)
}

pub(crate) fn shuffle_forward(
    adj: &GraphAdjacency,
    h: &Mat,
    expand: &LayerWeights,
    r: usize,
    act: Activation,
) -> Result<(Mat, AffineCache)> {
    if r == 0 || !expand.out_channels().is_multiple_of(r) {
        return Err(Error::Shape(format!(
            "expansion width {} not divisible by r = {r}",
            expand.out_channels()
        )));
    }
    let (e, c) = gcn_forward(adj, h, expand, act)?;
    Ok((periodic_shuffle(e, r)?, c))
}

pub(crate) fn shuffle_backward(
    adj: &GraphAdjacency,
    cache: &AffineCache,
    expand: &LayerWeights,
    r: usize,
    act: Activation,
    d_out: &Mat,
) -> (LayerWeights, Mat) {
    gcn_backward(adj, cache, expand, act, &periodic_unshuffle(d_out.clone(), r))
}

/// NodeShuffle: graph layer expanding `C → r·C′`, then periodic shuffle.
pub fn node_shuffle(h: &Mat, expand: &LayerWeights, adj: &GraphAdjacency, r: usize, act: Activation) -> Result<Mat> {
    Ok(shuffle_forward(adj, h, expand, r, act)?.0)
}

pub fn node_shuffle_backward(
    h: &Mat,
    expand: &LayerWeights,
    adj: &GraphAdjacency,
    r: usize,
    act: Activation,
    d_out: &Mat,
) -> Result<(LayerWeights, Mat)> {
    let (_, cache) = shuffle_forward(adj, h, expand, r, act)?;
    Ok(shuffle_backward(adj, &cache, expand, r, act, d_out))
}

/// Linear coordinate head: `base + features·W + b`, where `base` holds the
/// duplicated input coordinates.
pub fn coordinate_head(features: &Mat, base: &Mat, w: &LayerWeights) -> Result<Mat> {
    Ok(head_forward(features, base, w)?.0)
}

pub(crate) fn head_forward(features: &Mat, base: &Mat, w: &LayerWeights) -> Result<(Mat, AffineCache)> {
    w.check_input(features.cols(), "coordinate head")?;
    if w.out_channels() != 3 || base.shape() != (features.rows(), 3) {
        return Err(Error::Shape(
            "coordinate head must map to 3 channels per output row".into(),
        ));
    }
    let (mut off, c) = affine_forward(features.clone(), w, Activation::Identity);
    off.add_assign(base);
    Ok((off, c))
}

/// Returns `(weight grad, feature grad)`; the gradient w.r.t. `base` is `d_out` itself.
pub fn coordinate_head_backward(
    features: &Mat,
    base: &Mat,
    w: &LayerWeights,
    d_out: &Mat,
) -> Result<(LayerWeights, Mat)> {
    let (_, cache) = head_forward(features, base, w)?;
    Ok(affine_backward(&cache, w, Activation::Identity, d_out))
}

/// Two-layer point-wise residual head on `[features, coarse coordinates]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinerWeights {
    pub hidden: LayerWeights,
    pub out: LayerWeights,
}

#[derive(Clone, Debug)]
pub(crate) struct RefinerCache {
    hidden: AffineCache,
    out: AffineCache,
    feature_width: usize,
}

pub(crate) fn refiner_forward(
    features: &Mat,
    coarse: &Mat,
    w: &RefinerWeights,
    act: Activation,
) -> Result<(Mat, RefinerCache)> {
    let input = Mat::hconcat(&[features, coarse]);
    w.hidden.check_input(input.cols(), "refiner")?;
    w.out.check_input(w.hidden.out_channels(), "refiner output")?;
    if w.out.out_channels() != 3 {
        return Err(Error::Shape("refiner must predict 3 offsets".into()));
    }
    let (h, hc) = affine_forward(input, &w.hidden, act);
    let (mut off, oc) = affine_forward(h, &w.out, Activation::Identity);
    off.add_assign(coarse);
    Ok((
        off,
        RefinerCache {
            hidden: hc,
            out: oc,
            feature_width: features.cols(),
        },
    ))
}

pub(crate) fn refiner_backward_cached(
    cache: &RefinerCache,
    w: &RefinerWeights,
    act: Activation,
    d_out: &Mat,
) -> (RefinerWeights, Mat, Mat) {
    let (g_out, d_h) = affine_backward(&cache.out, &w.out, Activation::Identity, d_out);
    let (g_hidden, d_in) = affine_backward(&cache.hidden, &w.hidden, act, &d_h);
    let mut parts = d_in.hsplit(&[cache.feature_width, 3]).into_iter();
    let d_features = parts.next().unwrap();
    let mut d_coarse = parts.next().unwrap();
    d_coarse.add_assign(d_out);
    (
        RefinerWeights {
            hidden: g_hidden,
            out: g_out,
        },
        d_features,
        d_coarse,
    )
}

/// Refined coordinates `coarse + out(σ(hidden([features, coarse])))`.
pub fn refiner(features: &Mat, coarse: &Mat, w: &RefinerWeights, act: Activation) -> Result<Mat> {
    Ok(refiner_forward(features, coarse, w, act)?.0)
}

/// Returns `(weight grads, feature grad, coarse-coordinate grad)`.
pub fn refiner_backward(
    features: &Mat,
    coarse: &Mat,
    w: &RefinerWeights,
    act: Activation,
    d_out: &Mat,
) -> Result<(RefinerWeights, Mat, Mat)> {
    let (_, cache) = refiner_forward(features, coarse, w, act)?;
    Ok(refiner_backward_cached(&cache, w, act, d_out))
}
