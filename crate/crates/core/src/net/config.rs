use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::Activation;
use crate::error::{Error, Result};

/// Architecture variants of the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Full backbone with the Inception DenseGCN block.
    #[serde(rename = "A")]
    Original,
    /// Without the DenseGCN block.
    #[serde(rename = "B")]
    NoDenseGcn,
    /// Full backbone plus refiner head.
    #[serde(rename = "C")]
    WithRefiner,
    /// Without DenseGCN, with refiner.
    #[serde(rename = "D")]
    NoDenseGcnWithRefiner,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Original,
        Variant::NoDenseGcn,
        Variant::WithRefiner,
        Variant::NoDenseGcnWithRefiner,
    ];

    pub fn has_dense_block(self) -> bool {
        matches!(self, Variant::Original | Variant::WithRefiner)
    }

    pub fn has_refiner(self) -> bool {
        matches!(self, Variant::WithRefiner | Variant::NoDenseGcnWithRefiner)
    }

    pub fn letter(self) -> &'static str {
        match self {
            Variant::Original => "A",
            Variant::NoDenseGcn => "B",
            Variant::WithRefiner => "C",
            Variant::NoDenseGcnWithRefiner => "D",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Variant::Original => "PU-GCN",
            Variant::NoDenseGcn => "w/o Inception DenseGCN",
            Variant::WithRefiner => "w/ Refiner",
            Variant::NoDenseGcnWithRefiner => "w/ Refiner w/o Inception DenseGCN",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Variant::Original),
            "B" => Ok(Variant::NoDenseGcn),
            "C" => Ok(Variant::WithRefiner),
            "D" => Ok(Variant::NoDenseGcnWithRefiner),
            _ => Err(Error::Config(format!("unknown variant '{s}' (expected A|B|C|D)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenseBlockConfig {
    /// Neighbourhood size of each branch.
    pub branch_k: Vec<usize>,
    pub layers_per_branch: usize,
    /// Output width of every layer inside a branch.
    pub growth: usize,
}

impl Default for DenseBlockConfig {
    fn default() -> Self {
        DenseBlockConfig {
            branch_k: vec![8, 16],
            layers_per_branch: 2,
            growth: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub variant: Variant,
    /// Upsampling ratio.
    pub r: usize,
    /// Neighbourhood size of the main graph.
    pub k_neighbors: usize,
    /// Width of the relative-position embedding layer.
    pub embed_width: usize,
    /// Widths of the graph layers after the embedding.
    pub gcn_widths: Vec<usize>,
    pub dense_block: DenseBlockConfig,
    /// Per-point feature width after NodeShuffle.
    pub shuffle_width: usize,
    pub refiner_hidden: usize,
    pub leaky_slope: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            variant: Variant::Original,
            r: 4,
            k_neighbors: 16,
            embed_width: 32,
            gcn_widths: vec![32],
            dense_block: DenseBlockConfig::default(),
            shuffle_width: 32,
            refiner_hidden: 32,
            leaky_slope: 0.2,
        }
    }
}

/// Where a layer sits in the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerRole {
    Embed,
    Gcn(usize),
    Dense { branch: usize, layer: usize },
    Reduce,
    Expand,
    Head,
    RefinerHidden,
    RefinerOut,
}

/// One layer's `(role, in_channels, out_channels)`.
pub type LayerShape = (LayerRole, usize, usize);

impl NetworkConfig {
    pub fn with_variant(&self, variant: Variant) -> NetworkConfig {
        NetworkConfig {
            variant,
            ..self.clone()
        }
    }

    pub fn activation(&self) -> Activation {
        Activation::LeakyRelu(self.leaky_slope)
    }

    /// Width of the features entering NodeShuffle.
    pub fn feature_width(&self) -> usize {
        *self.gcn_widths.last().unwrap_or(&self.embed_width)
    }

    /// Largest neighbourhood any layer uses; inputs need more points than this.
    pub fn max_k(&self) -> usize {
        let mut k = self.k_neighbors;
        if self.variant.has_dense_block() {
            k = k.max(self.dense_block.branch_k.iter().copied().max().unwrap_or(0));
        }
        k
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.r < 2 {
            return bad("upsampling ratio must be at least 2");
        }
        if self.k_neighbors == 0 {
            return bad("k_neighbors must be positive");
        }
        if self.embed_width == 0 || self.gcn_widths.contains(&0) || self.shuffle_width == 0 {
            return bad("layer widths must be positive");
        }
        if self.variant.has_dense_block() {
            let d = &self.dense_block;
            if d.branch_k.is_empty() || d.branch_k.contains(&0) || d.layers_per_branch == 0 || d.growth == 0 {
                return bad("dense block needs at least one branch with positive k, layers and growth");
            }
        }
        if self.variant.has_refiner() && self.refiner_hidden == 0 {
            return bad("refiner hidden width must be positive");
        }
        if !(self.leaky_slope.is_finite()) {
            return bad("leaky slope must be finite");
        }
        Ok(())
    }

    /// All layer shapes in canonical parameter order.
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut out = vec![(LayerRole::Embed, 6, self.embed_width)];
        let mut width = self.embed_width;
        for (i, &w) in self.gcn_widths.iter().enumerate() {
            out.push((LayerRole::Gcn(i), width, w));
            width = w;
        }
        if self.variant.has_dense_block() {
            let d = &self.dense_block;
            for b in 0..d.branch_k.len() {
                for l in 0..d.layers_per_branch {
                    out.push((LayerRole::Dense { branch: b, layer: l }, width + l * d.growth, d.growth));
                }
            }
            let cat = d.branch_k.len() * d.layers_per_branch * d.growth;
            out.push((LayerRole::Reduce, cat, width));
        }
        out.push((LayerRole::Expand, width, self.r * self.shuffle_width));
        out.push((LayerRole::Head, self.shuffle_width, 3));
        if self.variant.has_refiner() {
            out.push((LayerRole::RefinerHidden, self.shuffle_width + 3, self.refiner_hidden));
            out.push((LayerRole::RefinerOut, self.refiner_hidden, 3));
        }
        out
    }

    /// Number of weight layers.
    pub fn layer_count(&self) -> usize {
        self.layer_shapes().len()
    }

    /// Exact trainable parameter count.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(_, i, o)| i * o + o).sum()
    }

    /// Parameters of the Inception DenseGCN block (0 when absent).
    pub fn dense_block_params(&self) -> usize {
        self.layer_shapes()
            .iter()
            .filter(|(r, _, _)| matches!(r, LayerRole::Dense { .. } | LayerRole::Reduce))
            .map(|&(_, i, o)| i * o + o)
            .sum()
    }

    /// Parameters of the refiner head (0 when absent).
    pub fn refiner_params(&self) -> usize {
        self.layer_shapes()
            .iter()
            .filter(|(r, _, _)| matches!(r, LayerRole::RefinerHidden | LayerRole::RefinerOut))
            .map(|&(_, i, o)| i * o + o)
            .sum()
    }

    /// On-disk parameter bytes (float32).
    pub fn model_size_bytes(&self) -> usize {
        self.param_count() * 4
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }
}
