//! Bottleneck linear networks: architecture, initialization, forwards.
//!
//! A network is a cascade of `B` wide blocks joined through narrow
//! bottleneck layers. Block `b` maps dimension `d_{b-1}` to `d_b` through
//! `L_b` layers of hidden width `m`, each layer scaled by the inverse
//! square root of its fan-in. Weights are drawn i.i.d. standard normal.
//!
//! With the identity activation the output is linear in every single
//! weight matrix ("slot"), which the derivative machinery in [`crate::deriv`]
//! exploits. The tanh variant applies tanh after each hidden layer inside a
//! block (not at block outputs) and is supported for forward evaluation
//! only.

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm, scale, FactoredMatrix, Matrix};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Cap on the total layer count; the substitution expansion enumerates
/// `2^P` slot subsets.
pub const MAX_TOTAL_LAYERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}

/// One weight matrix position in the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    /// Block index, 0-based.
    pub block: usize,
    /// Layer index inside the block, 0-based.
    pub layer: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    /// Forward scaling of this layer: inverse square root of fan-in.
    pub fn scale(&self) -> f64 {
        1.0 / (self.cols as f64).sqrt()
    }
}

/// Architecture: block count, per-block depths, bottleneck widths, hidden
/// width, activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Number of blocks `B` (there are `B-1` bottlenecks).
    pub blocks: usize,
    /// Per-block layer counts `L_1..L_B`.
    pub depths: Vec<usize>,
    /// Interface dimensions `d_0..d_B` (input, bottlenecks, output).
    pub widths: Vec<usize>,
    /// Hidden width `m`.
    pub hidden: usize,
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn new(
        depths: Vec<usize>,
        widths: Vec<usize>,
        hidden: usize,
        activation: Activation,
    ) -> Result<Self> {
        let blocks = depths.len();
        if blocks == 0 {
            return Err(Error::InvalidConfig("at least one block required".into()));
        }
        if widths.len() != blocks + 1 {
            return Err(Error::InvalidConfig(format!(
                "widths must have {} entries (blocks + 1), got {}",
                blocks + 1,
                widths.len()
            )));
        }
        if depths.iter().any(|&l| l == 0) || widths.iter().any(|&d| d == 0) || hidden == 0 {
            return Err(Error::InvalidConfig(
                "all dimensions must be positive".into(),
            ));
        }
        let total: usize = depths.iter().sum();
        if total > MAX_TOTAL_LAYERS {
            return Err(Error::Budget(format!(
                "total layer count {total} exceeds the substitution budget {MAX_TOTAL_LAYERS}"
            )));
        }
        Ok(Self {
            blocks,
            depths,
            widths,
            hidden,
            activation,
        })
    }

    /// The 4-layer single-bottleneck architecture: depths (2, 2), interface
    /// dims (d, r, k).
    pub fn single_bottleneck(
        d: usize,
        r: usize,
        k: usize,
        m: usize,
        activation: Activation,
    ) -> Result<Self> {
        Self::new(vec![2, 2], vec![d, r, k], m, activation)
    }

    pub fn with_hidden(&self, m: usize) -> Self {
        let mut s = self.clone();
        s.hidden = m;
        s
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Total layer count `P = Σ L_b`.
    pub fn total_layers(&self) -> usize {
        self.depths.iter().sum()
    }

    pub fn slot_count(&self) -> usize {
        self.total_layers()
    }

    /// Slots in chain order (input side first).
    pub fn slots(&self) -> Vec<Slot> {
        let mut out = Vec::with_capacity(self.slot_count());
        for (b, &depth) in self.depths.iter().enumerate() {
            for l in 0..depth {
                out.push(self.slot_at(b, l));
            }
        }
        out
    }

    fn slot_at(&self, block: usize, layer: usize) -> Slot {
        let depth = self.depths[block];
        let rows = if layer == depth - 1 {
            self.widths[block + 1]
        } else {
            self.hidden
        };
        let cols = if layer == 0 {
            self.widths[block]
        } else {
            self.hidden
        };
        Slot {
            block,
            layer,
            rows,
            cols,
        }
    }

    /// Flat slot index of `(block, layer)`.
    pub fn slot_index(&self, block: usize, layer: usize) -> Result<usize> {
        if block >= self.blocks || layer >= self.depths[block] {
            return Err(Error::DimensionMismatch(format!(
                "no slot ({block}, {layer}) in this architecture"
            )));
        }
        Ok(self.depths[..block].iter().sum::<usize>() + layer)
    }

    pub fn slot(&self, index: usize) -> Slot {
        let mut rem = index;
        for (b, &depth) in self.depths.iter().enumerate() {
            if rem < depth {
                return self.slot_at(b, rem);
            }
            rem -= depth;
        }
        panic!("slot index {index} out of range");
    }

    /// True when `layer` is a hidden layer of its block (tanh is applied
    /// after hidden layers only).
    fn is_hidden_layer(&self, block: usize, layer: usize) -> bool {
        layer + 1 < self.depths[block]
    }

    pub fn is_single_bottleneck(&self) -> bool {
        self.blocks == 2 && self.depths == [2, 2]
    }
}

/// Fixed network input with its norm cached.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector {
    data: Vec<f64>,
    norm: f64,
}

impl InputVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || data.iter().any(|x| !x.is_finite()) {
            return Err(Error::DimensionMismatch(
                "input must be non-empty and finite".into(),
            ));
        }
        let norm = norm(&data);
        Ok(Self { data, norm })
    }

    /// `scale * e_1` in dimension `dim`.
    pub fn basis(dim: usize, scale: f64) -> Self {
        let mut data = vec![0.0; dim];
        data[0] = scale;
        Self {
            data,
            norm: scale.abs(),
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Whether the input is a (positive) multiple of the first basis vector.
    pub fn is_axis_aligned(&self) -> bool {
        self.data[0] > 0.0 && self.data[1..].iter().all(|&x| x == 0.0)
    }
}

/// Tangent in weight space: anything that can stand in for a slot matrix.
pub trait Tangent {
    fn spec(&self) -> &NetworkSpec;
    fn slot_matvec(&self, slot: usize, v: &[f64]) -> Vec<f64>;
    fn slot_rmatvec(&self, slot: usize, u: &[f64]) -> Vec<f64>;
    fn slot_norm(&self, slot: usize) -> f64;
}

/// Full weight tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    spec: NetworkSpec,
    mats: Vec<Matrix>,
}

impl WeightSet {
    /// NTK initialization: every entry i.i.d. standard normal, with each
    /// matrix generated from a substream keyed by `(seed, block, layer)`.
    pub fn init(spec: &NetworkSpec, seed: u64) -> WeightSet {
        let mats = spec
            .slots()
            .iter()
            .map(|s| {
                let mut rs = rng::stream(seed, &[0x11a7, s.block as u64, s.layer as u64]);
                Matrix::standard_normal(s.rows, s.cols, &mut rs)
            })
            .collect();
        WeightSet {
            spec: spec.clone(),
            mats,
        }
    }

    pub fn from_matrices(spec: &NetworkSpec, mats: Vec<Matrix>) -> Result<WeightSet> {
        let slots = spec.slots();
        if mats.len() != slots.len() {
            return Err(Error::DimensionMismatch("wrong matrix count".into()));
        }
        for (m, s) in mats.iter().zip(&slots) {
            if m.rows() != s.rows || m.cols() != s.cols {
                return Err(Error::DimensionMismatch(format!(
                    "slot ({}, {}) expects {}x{}, got {}x{}",
                    s.block,
                    s.layer,
                    s.rows,
                    s.cols,
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.is_finite() {
                return Err(Error::DimensionMismatch("non-finite weight entry".into()));
            }
        }
        Ok(WeightSet {
            spec: spec.clone(),
            mats,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn matrix(&self, slot: usize) -> &Matrix {
        &self.mats[slot]
    }

    pub fn matrix_mut(&mut self, slot: usize) -> &mut Matrix {
        &mut self.mats[slot]
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.mats
    }

    /// `self + t * delta`, materialized.
    pub fn offset(&self, delta: &Direction, t: f64) -> Result<WeightSet> {
        if delta.spec() != &self.spec {
            return Err(Error::SpecMismatch(
                "direction built for a different spec".into(),
            ));
        }
        let mats = self
            .mats
            .iter()
            .zip(delta.matrices())
            .map(|(w, d)| w.add_scaled(t, d))
            .collect();
        Ok(WeightSet {
            spec: self.spec.clone(),
            mats,
        })
    }

    pub fn scaled(&self, c: f64) -> WeightSet {
        WeightSet {
            spec: self.spec.clone(),
            mats: self.mats.iter().map(|m| m.scaled(c)).collect(),
        }
    }

    /// Forward pass `g(W; x)`.
    pub fn forward(&self, x: &InputVector) -> Result<Vec<f64>> {
        if x.dim() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input dim {} does not match d_0 = {}",
                x.dim(),
                self.spec.input_dim()
            )));
        }
        let mut v = x.data().to_vec();
        for (idx, slot) in self.spec.slots().iter().enumerate() {
            v = self.mats[idx].matvec(&v);
            scale(&mut v, slot.scale());
            if self.spec.activation == Activation::Tanh
                && self.spec.is_hidden_layer(slot.block, slot.layer)
            {
                for e in &mut v {
                    *e = e.tanh();
                }
            }
        }
        Ok(v)
    }

    /// Forward pass of a single block (a wide network on its own), viewing
    /// `input` as the block's input.
    pub fn forward_block(&self, block: usize, input: &[f64]) -> Result<Vec<f64>> {
        if block >= self.spec.blocks {
            return Err(Error::DimensionMismatch(format!("no block {block}")));
        }
        let first = self.spec.slot_index(block, 0)?;
        let mats: Vec<&Matrix> = (0..self.spec.depths[block])
            .map(|l| &self.mats[first + l])
            .collect();
        wnn_forward(&mats, input, self.spec.activation)
    }

    /// Scalar forward for single-output specs.
    pub fn forward_scalar(&self, x: &InputVector) -> Result<f64> {
        let out = self.forward(x)?;
        if out.len() != 1 {
            return Err(Error::Unsupported(
                "scalar forward requires output dim 1".into(),
            ));
        }
        Ok(out[0])
    }
}

/// Forward pass of a stand-alone wide network given its layer matrices in
/// chain order. Layer scaling is the inverse square root of each matrix's
/// column count; tanh (when selected) is applied after every layer except
/// the last.
pub fn wnn_forward(mats: &[&Matrix], x: &[f64], activation: Activation) -> Result<Vec<f64>> {
    let mut v = x.to_vec();
    for (i, m) in mats.iter().enumerate() {
        if m.cols() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer {i} expects input of length {}, got {}",
                m.cols(),
                v.len()
            )));
        }
        v = m.matvec(&v);
        scale(&mut v, 1.0 / (m.cols() as f64).sqrt());
        if activation == Activation::Tanh && i + 1 < mats.len() {
            for e in &mut v {
                *e = e.tanh();
            }
        }
    }
    Ok(v)
}

/// Weight-space direction with per-matrix Frobenius norms cached.
#[derive(Debug, Clone)]
pub struct Direction {
    spec: NetworkSpec,
    mats: Vec<Matrix>,
    norms: Vec<f64>,
}

impl Direction {
    /// Gaussian direction rescaled so every matrix has Frobenius norm
    /// exactly `per_matrix_norm`; the point `W + direction` then sits on the
    /// boundary of the per-matrix ball of that radius.
    pub fn sample(spec: &NetworkSpec, seed: u64, per_matrix_norm: f64) -> Direction {
        let mats: Vec<Matrix> = spec
            .slots()
            .iter()
            .map(|s| {
                let mut rs = rng::stream(seed, &[0xd15c, s.block as u64, s.layer as u64]);
                let mut m = Matrix::standard_normal(s.rows, s.cols, &mut rs);
                let n = m.frobenius();
                if n > 0.0 && per_matrix_norm > 0.0 {
                    m.scale_in_place(per_matrix_norm / n);
                } else {
                    m.scale_in_place(0.0);
                }
                m
            })
            .collect();
        Direction::from_matrices_unchecked(spec.clone(), mats)
    }

    pub fn zero(spec: &NetworkSpec) -> Direction {
        let mats = spec
            .slots()
            .iter()
            .map(|s| Matrix::zeros(s.rows, s.cols))
            .collect();
        Direction::from_matrices_unchecked(spec.clone(), mats)
    }

    pub fn from_matrices(spec: &NetworkSpec, mats: Vec<Matrix>) -> Result<Direction> {
        let ws = WeightSet::from_matrices(spec, mats)?;
        Ok(Direction::from_matrices_unchecked(ws.spec, ws.mats))
    }

    fn from_matrices_unchecked(spec: NetworkSpec, mats: Vec<Matrix>) -> Direction {
        let norms = mats.iter().map(|m| m.frobenius()).collect();
        Direction { spec, mats, norms }
    }

    /// Difference of two weight sets, `w - base`.
    pub fn between(base: &WeightSet, w: &WeightSet) -> Result<Direction> {
        if base.spec() != w.spec() {
            return Err(Error::SpecMismatch(
                "weight sets have different specs".into(),
            ));
        }
        let mats = w
            .matrices()
            .iter()
            .zip(base.matrices())
            .map(|(a, b)| a.add_scaled(-1.0, b))
            .collect();
        Ok(Direction::from_matrices_unchecked(base.spec.clone(), mats))
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn matrix(&self, slot: usize) -> &Matrix {
        &self.mats[slot]
    }

    /// Cached per-matrix Frobenius norms.
    pub fn slot_norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn scaled(&self, c: f64) -> Direction {
        let mats = self.mats.iter().map(|m| m.scaled(c)).collect();
        Direction::from_matrices_unchecked(self.spec.clone(), mats)
    }

    /// Zero out every slot outside the given blocks.
    pub fn restricted_to_blocks(&self, blocks: &[usize]) -> Direction {
        let mats = self
            .spec
            .slots()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if blocks.contains(&s.block) {
                    self.mats[i].clone()
                } else {
                    Matrix::zeros(s.rows, s.cols)
                }
            })
            .collect();
        Direction::from_matrices_unchecked(self.spec.clone(), mats)
    }

    /// Normalized inner product between two directions (cosine in the full
    /// tuple space).
    pub fn cosine(&self, other: &Direction) -> f64 {
        let mut ip = 0.0;
        for (a, b) in self.mats.iter().zip(&other.mats) {
            ip += a.inner(b);
        }
        let na: f64 = self.norms.iter().map(|n| n * n).sum::<f64>().sqrt();
        let nb: f64 = other.norms.iter().map(|n| n * n).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            ip / (na * nb)
        }
    }
}

impl Tangent for Direction {
    fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn slot_matvec(&self, slot: usize, v: &[f64]) -> Vec<f64> {
        self.mats[slot].matvec(v)
    }

    fn slot_rmatvec(&self, slot: usize, u: &[f64]) -> Vec<f64> {
        self.mats[slot].rmatvec(u)
    }

    fn slot_norm(&self, slot: usize) -> f64 {
        self.norms[slot]
    }
}

/// Direction kept as per-slot low-rank factor sums; used by the sweep
/// maximizer so deep specs never materialize m×m tangents.
#[derive(Debug, Clone)]
pub struct FactoredDirection {
    spec: NetworkSpec,
    slots: Vec<FactoredMatrix>,
}

impl FactoredDirection {
    pub fn new(spec: NetworkSpec, slots: Vec<FactoredMatrix>) -> Self {
        Self { spec, slots }
    }

    pub fn slot(&self, slot: usize) -> &FactoredMatrix {
        &self.slots[slot]
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut FactoredMatrix {
        &mut self.slots[slot]
    }

    pub fn to_dense(&self) -> Direction {
        let mats = self.slots.iter().map(|f| f.to_dense()).collect();
        Direction::from_matrices_unchecked(self.spec.clone(), mats)
    }
}

impl Tangent for FactoredDirection {
    fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn slot_matvec(&self, slot: usize, v: &[f64]) -> Vec<f64> {
        self.slots[slot].matvec(v)
    }

    fn slot_rmatvec(&self, slot: usize, u: &[f64]) -> Vec<f64> {
        self.slots[slot].rmatvec(u)
    }

    fn slot_norm(&self, slot: usize) -> f64 {
        self.slots[slot].frobenius()
    }
}

/// True iff every matrix of `w` is within Frobenius distance `radius` of
/// `center` (boundary included).
pub fn ball_contains(center: &WeightSet, w: &WeightSet, radius: f64) -> Result<bool> {
    if center.spec() != w.spec() {
        return Err(Error::SpecMismatch(
            "weight sets have different specs".into(),
        ));
    }
    for (a, b) in center.matrices().iter().zip(w.matrices()) {
        if a.add_scaled(-1.0, b).frobenius() > radius {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Scalar forward `g(W + tΔ; x)` without materializing the offset weights.
/// Identity activation only.
pub fn forward_line<T: Tangent>(w: &WeightSet, delta: &T, t: f64, x: &InputVector) -> Result<f64> {
    if w.spec().activation != Activation::Identity {
        return Err(Error::Unsupported(
            "line forwards require the identity activation".into(),
        ));
    }
    if delta.spec() != w.spec() {
        return Err(Error::SpecMismatch(
            "direction built for a different spec".into(),
        ));
    }
    let mut v = x.data().to_vec();
    for (idx, slot) in w.spec().slots().iter().enumerate() {
        let mut wv = w.matrix(idx).matvec(&v);
        if t != 0.0 {
            let dv = delta.slot_matvec(idx, &v);
            axpy(&mut wv, t, &dv);
        }
        scale(&mut wv, slot.scale());
        v = wv;
    }
    if v.len() != 1 {
        return Err(Error::Unsupported(
            "line forwards require output dim 1".into(),
        ));
    }
    Ok(v[0])
}

/// Scalar forward with the slots selected by `mask` replaced by the
/// corresponding tangent slots. Identity activation only.
pub fn forward_masked<T: Tangent>(
    w: &WeightSet,
    delta: &T,
    mask: u32,
    x: &InputVector,
) -> Result<f64> {
    if w.spec().activation != Activation::Identity {
        return Err(Error::Unsupported(
            "substitution forwards require the identity activation".into(),
        ));
    }
    let mut v = x.data().to_vec();
    for (idx, slot) in w.spec().slots().iter().enumerate() {
        let mut next = if mask >> idx & 1 == 1 {
            delta.slot_matvec(idx, &v)
        } else {
            w.matrix(idx).matvec(&v)
        };
        scale(&mut next, slot.scale());
        v = next;
    }
    if v.len() != 1 {
        return Err(Error::Unsupported(
            "substitution forwards require output dim 1".into(),
        ));
    }
    Ok(v[0])
}

// ---------------------------------------------------------------------------
// Weight container format
// ---------------------------------------------------------------------------

/// JSON sidecar written next to a weight container.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightSidecar {
    pub blocks: usize,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub hidden: usize,
    pub activation: Activation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl WeightSidecar {
    pub fn spec(&self) -> Result<NetworkSpec> {
        NetworkSpec::new(
            self.depths.clone(),
            self.widths.clone(),
            self.hidden,
            self.activation,
        )
    }
}

fn activation_tag(a: Activation) -> u32 {
    match a {
        Activation::Identity => 0,
        Activation::Tanh => 1,
    }
}

/// Write the flat binary container: spec fields as little-endian u32
/// (B, depths, widths, m, activation tag), then every matrix as f64
/// little-endian in (block, layer) order, row-major.
pub fn save_weights(w: &WeightSet, path: &Path) -> Result<()> {
    let spec = w.spec();
    let mut buf: Vec<u8> = Vec::new();
    let mut push = |v: u32| buf.extend_from_slice(&v.to_le_bytes());
    push(spec.blocks as u32);
    for &l in &spec.depths {
        push(l as u32);
    }
    for &d in &spec.widths {
        push(d as u32);
    }
    push(spec.hidden as u32);
    push(activation_tag(spec.activation));
    for m in w.matrices() {
        for x in m.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let tmp = path.with_extension("bin.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<WeightSet> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take_u32 = |pos: &mut usize| -> Result<u32> {
        if *pos + 4 > bytes.len() {
            return Err(Error::Format("truncated header".into()));
        }
        let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
        *pos += 4;
        Ok(v)
    };
    let blocks = take_u32(&mut pos)? as usize;
    if blocks == 0 || blocks > MAX_TOTAL_LAYERS {
        return Err(Error::Format(format!("implausible block count {blocks}")));
    }
    let depths: Vec<usize> = (0..blocks)
        .map(|_| take_u32(&mut pos).map(|v| v as usize))
        .collect::<Result<_>>()?;
    let widths: Vec<usize> = (0..blocks + 1)
        .map(|_| take_u32(&mut pos).map(|v| v as usize))
        .collect::<Result<_>>()?;
    let hidden = take_u32(&mut pos)? as usize;
    let act = match take_u32(&mut pos)? {
        0 => Activation::Identity,
        1 => Activation::Tanh,
        other => return Err(Error::Format(format!("unknown activation tag {other}"))),
    };
    let spec = NetworkSpec::new(depths, widths, hidden, act)?;
    let mut mats = Vec::with_capacity(spec.slot_count());
    for s in spec.slots() {
        let count = s.rows * s.cols;
        if pos + 8 * count > bytes.len() {
            return Err(Error::Format("truncated matrix data".into()));
        }
        let data: Vec<f64> = bytes[pos..pos + 8 * count]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += 8 * count;
        mats.push(Matrix::from_vec(s.rows, s.cols, data));
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes after matrix data".into()));
    }
    WeightSet::from_matrices(&spec, mats)
}

pub fn save_sidecar(spec: &NetworkSpec, seed: Option<u64>, path: &Path) -> Result<()> {
    let sidecar = WeightSidecar {
        blocks: spec.blocks,
        depths: spec.depths.clone(),
        widths: spec.widths.clone(),
        hidden: spec.hidden,
        activation: spec.activation,
        seed,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, json.as_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Convenience alias used throughout the harness.
pub type SharedWeights = Arc<WeightSet>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_spec(act: Activation) -> NetworkSpec {
        NetworkSpec::single_bottleneck(1, 1, 1, 1, act).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 32, Activation::Identity).unwrap();
        let a = WeightSet::init(&spec, 42);
        let b = WeightSet::init(&spec, 42);
        assert_eq!(a, b);
        let c = WeightSet::init(&spec, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn scalar_network_forward() {
        // all dims 1, weights 2, x = 3: every scale is 1, so g = 2^4 * 3
        let spec = scalar_spec(Activation::Identity);
        let mats = (0..4).map(|_| Matrix::from_vec(1, 1, vec![2.0])).collect();
        let w = WeightSet::from_matrices(&spec, mats).unwrap();
        let x = InputVector::new(vec![3.0]).unwrap();
        assert_eq!(w.forward_scalar(&x).unwrap(), 48.0);
    }

    #[test]
    fn two_layer_scalar_wnn() {
        let m1 = Matrix::from_vec(1, 1, vec![2.0]);
        let m2 = Matrix::from_vec(1, 1, vec![2.0]);
        let out = wnn_forward(&[&m1, &m2], &[3.0], Activation::Identity).unwrap();
        assert_eq!(out, vec![12.0]);
    }

    #[test]
    fn tanh_applies_to_hidden_layers_only() {
        let m1 = Matrix::from_vec(1, 1, vec![2.0]);
        let m2 = Matrix::from_vec(1, 1, vec![3.0]);
        let out = wnn_forward(&[&m1, &m2], &[0.5], Activation::Tanh).unwrap();
        assert_relative_eq!(out[0], 3.0 * (1.0f64).tanh(), max_relative = 1e-15);
        // in a cascade the bottleneck value itself is not activated
        let spec = scalar_spec(Activation::Tanh);
        let mats = vec![
            Matrix::from_vec(1, 1, vec![2.0]),
            Matrix::from_vec(1, 1, vec![3.0]),
            Matrix::from_vec(1, 1, vec![1.5]),
            Matrix::from_vec(1, 1, vec![0.5]),
        ];
        let w = WeightSet::from_matrices(&spec, mats).unwrap();
        let x = InputVector::new(vec![0.5]).unwrap();
        let z = 3.0 * (1.0f64).tanh();
        let expect = 0.5 * (1.5 * z).tanh();
        assert_relative_eq!(w.forward_scalar(&x).unwrap(), expect, max_relative = 1e-15);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let spec = NetworkSpec::single_bottleneck(3, 2, 1, 16, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 5);
        let x = InputVector::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w.forward_scalar(&x).unwrap(), 0.0);
    }

    #[test]
    fn cascade_equals_block_composition() {
        let spec = NetworkSpec::single_bottleneck(1, 1, 1, 10_000, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 9);
        let x = InputVector::new(vec![1.25]).unwrap();
        let z = w.forward_block(0, x.data()).unwrap();
        let out = w.forward_block(1, &z).unwrap();
        assert_eq!(w.forward(&x).unwrap(), out);
    }

    #[test]
    fn moments_of_initialization() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 512, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 1);
        for m in w.matrices() {
            let n = m.data().len() as f64;
            let mean: f64 = m.data().iter().sum::<f64>() / n;
            let var: f64 = m
                .data()
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean} too far from 0");
            assert!((var - 1.0).abs() < 0.1, "variance {var} too far from 1");
        }
    }

    #[test]
    fn substreams_are_uncorrelated() {
        let spec =
            NetworkSpec::new(vec![3, 2], vec![512, 1, 1], 512, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 0);
        // two m x m matrices from different (b, l) substreams
        let a = w.matrix(0);
        let b = w.matrix(1);
        let corr = a.inner(b) / (a.frobenius() * b.frobenius());
        assert!(corr.abs() < 0.05, "cross-correlation {corr} too large");
    }

    #[test]
    fn direction_norms_are_exact() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 64, Activation::Identity).unwrap();
        let d = Direction::sample(&spec, 3, 1.0);
        for n in d.slot_norms() {
            assert_relative_eq!(*n, 1.0, max_relative = 1e-12);
        }
        let z = Direction::sample(&spec, 3, 0.0);
        for n in z.slot_norms() {
            assert_eq!(*n, 0.0);
        }
    }

    #[test]
    fn random_directions_nearly_orthogonal() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 256, Activation::Identity).unwrap();
        let a = Direction::sample(&spec, 1, 1.0);
        let b = Direction::sample(&spec, 2, 1.0);
        assert!(a.cosine(&b).abs() < 0.1);
    }

    #[test]
    fn ball_boundary_is_included() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 32, Activation::Identity).unwrap();
        let center = WeightSet::init(&spec, 7);
        assert!(ball_contains(&center, &center, 0.0).unwrap());
        let d = Direction::sample(&spec, 8, 2.0);
        let moved = center.offset(&d, 1.0).unwrap();
        assert!(!ball_contains(&center, &moved, 1.0).unwrap());
        let onb = center.offset(&d.scaled(0.5), 1.0).unwrap();
        assert!(ball_contains(&center, &onb, 1.0 + 1e-12).unwrap());
    }

    #[test]
    fn forward_line_matches_materialized_offset() {
        let spec = NetworkSpec::new(vec![2, 3], vec![3, 2, 1], 24, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 11);
        let d = Direction::sample(&spec, 12, 1.0);
        let x = InputVector::new(vec![0.5, -1.0, 2.0]).unwrap();
        for &t in &[-1.0, -0.25, 0.0, 0.7, 1.0] {
            let fast = forward_line(&w, &d, t, &x).unwrap();
            let slow = w.offset(&d, t).unwrap().forward_scalar(&x).unwrap();
            assert_relative_eq!(fast, slow, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn single_slot_line_is_affine() {
        let spec = NetworkSpec::single_bottleneck(2, 1, 1, 64, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 21);
        let x = InputVector::new(vec![1.0, -0.5]).unwrap();
        for slot in 0..4 {
            let block = spec.slot(slot).block;
            let full = Direction::sample(&spec, 100 + slot as u64, 1.0);
            let mut mats: Vec<Matrix> = spec
                .slots()
                .iter()
                .map(|s| Matrix::zeros(s.rows, s.cols))
                .collect();
            mats[slot] = full.matrix(slot).clone();
            let d = Direction::from_matrices(&spec, mats).unwrap();
            assert_eq!(spec.slot(slot).block, block);
            let f = |t: f64| forward_line(&w, &d, t, &x).unwrap();
            let (f0, f1) = (f(0.0), f(1.0));
            let predicted = f0 + (f1 - f0) * 0.37;
            let actual = f(0.37);
            let scale = f0.abs().max(f1.abs()).max(1e-12);
            assert!(
                (predicted - actual).abs() / scale < 1e-10,
                "slot {slot} not affine: {predicted} vs {actual}"
            );
        }
    }

    #[test]
    fn homogeneous_of_total_degree() {
        let spec = NetworkSpec::new(vec![2, 2], vec![2, 1, 1], 48, Activation::Identity).unwrap();
        let w = WeightSet::init(&spec, 31);
        let x = InputVector::new(vec![0.3, 0.9]).unwrap();
        let p = spec.total_layers() as i32;
        let c: f64 = 1.37;
        let lhs = w.scaled(c).forward_scalar(&x).unwrap();
        let rhs = c.powi(p) * w.forward_scalar(&x).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn container_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("bottlenet-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = NetworkSpec::new(vec![2, 2], vec![3, 2, 2], 16, Activation::Tanh).unwrap();
        let w = WeightSet::init(&spec, 77);
        let path = dir.join("weights.bin");
        save_weights(&w, &path).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(w, loaded);
        save_sidecar(&spec, Some(77), &dir.join("weights.json")).unwrap();
        let sidecar: WeightSidecar =
            serde_json::from_slice(&std::fs::read(dir.join("weights.json")).unwrap()).unwrap();
        assert_eq!(sidecar.spec().unwrap(), spec);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn budget_cap_enforced() {
        let err = NetworkSpec::new(vec![9, 9], vec![1, 1, 1], 4, Activation::Identity);
        assert!(matches!(err, Err(Error::Budget(_))));
    }
}
