//! Block networks: new trainable neurons laterally wired into frozen base
//! networks.
//!
//! A block has up to three hidden layers of sizes `h1`, `h2`, `h3`. Block
//! layer 1 reads the raw image. Block layer `d` (d = 2, 3) reads the block
//! layer below it, when present, concatenated with the depth `d - 1` hidden
//! activations of every base model, in base order. A zero width removes that
//! block layer; the next one then reads only the base activations at its
//! depth. The single logistic output reads block layer 3. Base outputs and
//! base third-layer activations are never consumed, and base parameters are
//! never updated.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::kv::{join, KvError, KvMap};
use crate::linalg::{MatRef, Matrix};
use crate::model_io::{decode_layers, encode_layers, parameter_digest, ModelIoError};
use crate::net::{output_delta, Activation, DenseLayer, Gradients, LayerSpec, NetError, Network};
use crate::rng::Rng;
use crate::stimulus::Task;
use crate::train::{train, Examples, Model, TrainConfig, TrainError, TrainLog};

pub const CONTAINER_MAGIC: &[u8; 4] = b"BNBC";
pub const CONTAINER_VERSION: u16 = 1;
/// Hidden layers a base network must have.
pub const BASE_HIDDEN_LAYERS: usize = 3;
const FEATURE_CHUNK: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum BlockError {
    #[error("a block network needs at least one base model")]
    NoBases,
    #[error("invalid block spec: {0}")]
    InvalidSpec(String),
    #[error("base {index} takes {found} inputs, expected {expected}")]
    IncompatibleInput {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("base {index} must have exactly {BASE_HIDDEN_LAYERS} hidden layers")]
    BaseShape { index: usize },
    #[error("base {index} does not match the digest recorded in the block file")]
    BaseMismatch { index: usize },
    #[error("block file lists {expected} bases, {found} supplied")]
    BaseCount { expected: usize, found: usize },
    #[error("bad container magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("block file truncated")]
    Truncated,
    #[error("stored block layers do not match the wiring of {0}")]
    LayerLayout(BlockSpec),
    #[error("descriptor: {0}")]
    Descriptor(#[from] KvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Block widths `BA-h1-h2-h3`; zero marks a removed layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockSpec {
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
}

impl BlockSpec {
    pub const BA_0_50_50: BlockSpec = BlockSpec { h1: 0, h2: 50, h3: 50 };
    pub const BA_0_0_50: BlockSpec = BlockSpec { h1: 0, h2: 0, h3: 50 };

    pub fn new(h1: usize, h2: usize, h3: usize) -> Result<Self, BlockError> {
        let spec = Self { h1, h2, h3 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        if self.h3 == 0 {
            return Err(BlockError::InvalidSpec(format!(
                "{self}: the output attaches to block layer 3, which cannot be empty"
            )));
        }
        if self.h1 > 0 && self.h2 == 0 {
            return Err(BlockError::InvalidSpec(format!(
                "{self}: block layer 1 would feed nothing"
            )));
        }
        Ok(())
    }

    pub fn widths(&self) -> [usize; 3] {
        [self.h1, self.h2, self.h3]
    }
}

impl fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BA-{}-{}-{}", self.h1, self.h2, self.h3)
    }
}

impl FromStr for BlockSpec {
    type Err = BlockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body.strip_prefix("BA-").unwrap_or(body);
        let parts: Vec<&str> = body.split('-').collect();
        let bad = || BlockError::InvalidSpec(format!("cannot parse {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut w = [0usize; 3];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        BlockSpec::new(w[0], w[1], w[2])
    }
}

/// A trained network used as a frozen feature source.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    pub task: Task,
    network: Arc<Network>,
}

impl BaseModel {
    /// Takes ownership of `network` and freezes every layer.
    pub fn new(task: Task, mut network: Network) -> Self {
        network.set_frozen(true);
        Self {
            task,
            network: Arc::new(network),
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn digest(&self) -> [u8; 32] {
        parameter_digest(self.network.layers())
    }

    /// Widths of the first two hidden layers, the only ones a block reads.
    fn lateral_widths(&self) -> [usize; 2] {
        let h = self.network.hidden_widths();
        [h[0], h[1]]
    }
}

/// Trainable parameter count of a block over `m` identical bases with hidden
/// widths `base_widths`, in closed form.
pub fn block_param_count(spec: BlockSpec, m: usize, base_widths: [usize; 3], input_width: usize) -> usize {
    let mut total = 0;
    let mut prev = 0;
    if spec.h1 > 0 {
        total += spec.h1 * (input_width + 1);
        prev = spec.h1;
    }
    if spec.h2 > 0 {
        total += spec.h2 * (prev + m * base_widths[0] + 1);
        prev = spec.h2;
    } else {
        prev = 0;
    }
    total += spec.h3 * (prev + m * base_widths[1] + 1);
    total + spec.h3 + 1
}

/// Inputs consumed by a block head for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralBatch {
    /// Raw images; present only when block layer 1 exists.
    pub raw: Option<Matrix>,
    /// Concatenated base activations at depth 1 and depth 2.
    pub lateral: [Matrix; 2],
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    batch: LateralBatch,
    pre_activations: Vec<Matrix>,
    activations: Vec<Matrix>,
}

impl HeadCache {
    /// Pre-activations of each head layer, output last.
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }
}

/// The trainable part of a block network: hidden block layers then the output.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHead {
    spec: BlockSpec,
    raw_width: usize,
    lateral_widths: [usize; 2],
    /// Depth (1..=3) of each hidden block layer, bottom-up.
    depths: Vec<usize>,
    layers: Vec<DenseLayer>,
}

impl BlockHead {
    fn layer_specs(spec: BlockSpec, raw_width: usize, lateral_widths: [usize; 2]) -> (Vec<usize>, Vec<LayerSpec>) {
        let mut depths = Vec::new();
        let mut specs = Vec::new();
        let mut prev = 0;
        for (i, &h) in spec.widths().iter().enumerate() {
            let depth = i + 1;
            if h == 0 {
                prev = 0;
                continue;
            }
            let ext = if depth == 1 {
                raw_width
            } else {
                lateral_widths[depth - 2]
            };
            depths.push(depth);
            specs.push(LayerSpec::new(prev + ext, h, Activation::Rectifier));
            prev = h;
        }
        specs.push(LayerSpec::new(spec.h3, 1, Activation::Logistic));
        (depths, specs)
    }

    fn init(spec: BlockSpec, raw_width: usize, lateral_widths: [usize; 2], seed: u64) -> Self {
        let (depths, specs) = Self::layer_specs(spec, raw_width, lateral_widths);
        let mut rng = Rng::new(seed);
        Self {
            spec,
            raw_width,
            lateral_widths,
            depths,
            layers: specs.into_iter().map(|s| DenseLayer::init(s, &mut rng)).collect(),
        }
    }

    fn from_layers(
        spec: BlockSpec,
        raw_width: usize,
        lateral_widths: [usize; 2],
        layers: Vec<DenseLayer>,
    ) -> Result<Self, BlockError> {
        let (depths, specs) = Self::layer_specs(spec, raw_width, lateral_widths);
        let shapes_ok = layers.len() == specs.len()
            && layers.iter().zip(&specs).all(|(l, s)| {
                l.spec() == *s && l.weights.len() == s.input_width * s.output_width && l.biases.len() == s.output_width
            });
        if !shapes_ok {
            return Err(BlockError::LayerLayout(spec));
        }
        Ok(Self {
            spec,
            raw_width,
            lateral_widths,
            depths,
            layers,
        })
    }

    pub fn spec(&self) -> BlockSpec {
        self.spec
    }

    fn external<'a>(&self, batch: &'a LateralBatch, depth: usize) -> MatRef<'a> {
        if depth == 1 {
            batch
                .raw
                .as_ref()
                .expect("raw input present when block layer 1 exists")
                .view()
        } else {
            batch.lateral[depth - 2].view()
        }
    }

    /// Column blocks feeding hidden layer `j`: the block layer below (if
    /// wired) followed by the external input at that depth.
    fn parts<'a>(&self, j: usize, batch: &'a LateralBatch, acts: &'a [Matrix]) -> Vec<MatRef<'a>> {
        let depth = self.depths[j];
        let mut parts = Vec::with_capacity(2);
        if j > 0 && self.depths[j - 1] == depth - 1 {
            parts.push(acts[j - 1].view());
        }
        parts.push(self.external(batch, depth));
        parts
    }

    fn check_batch(&self, batch: &LateralBatch) -> Result<(), NetError> {
        let rows = batch.lateral[0].rows;
        for (m, &w) in batch.lateral.iter().zip(&self.lateral_widths) {
            if m.cols != w {
                return Err(NetError::ShapeMismatch {
                    expected: w,
                    found: m.cols,
                });
            }
            if m.rows != rows {
                return Err(NetError::ShapeMismatch {
                    expected: rows,
                    found: m.rows,
                });
            }
        }
        if self.spec.h1 > 0 {
            match &batch.raw {
                Some(raw) if raw.cols == self.raw_width && raw.rows == rows => {}
                Some(raw) => {
                    return Err(NetError::ShapeMismatch {
                        expected: self.raw_width,
                        found: raw.cols,
                    })
                }
                None => {
                    return Err(NetError::ShapeMismatch {
                        expected: self.raw_width,
                        found: 0,
                    })
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, batch: &LateralBatch) -> Result<(Vec<f64>, HeadCache), NetError> {
        self.check_batch(batch)?;
        let n_hidden = self.depths.len();
        let mut pre = Vec::with_capacity(n_hidden + 1);
        let mut acts: Vec<Matrix> = Vec::with_capacity(n_hidden + 1);
        for j in 0..n_hidden {
            let (z, a) = self.layers[j].forward_parts(&self.parts(j, batch, &acts));
            pre.push(z);
            acts.push(a);
        }
        let (z, a) = self.layers[n_hidden].forward_parts(&[acts[n_hidden - 1].view()]);
        let probs = a.data.clone();
        pre.push(z);
        acts.push(a);
        Ok((
            probs,
            HeadCache {
                batch: batch.clone(),
                pre_activations: pre,
                activations: acts,
            },
        ))
    }

    pub fn backward(&self, cache: &HeadCache, labels: &[u8]) -> Result<Gradients, NetError> {
        let n_hidden = self.depths.len();
        if cache.activations.len() != n_hidden + 1 {
            return Err(NetError::ShapeMismatch {
                expected: n_hidden + 1,
                found: cache.activations.len(),
            });
        }
        for (l, a) in self.layers.iter().zip(&cache.activations) {
            if l.output_width != a.cols {
                return Err(NetError::ShapeMismatch {
                    expected: l.output_width,
                    found: a.cols,
                });
            }
        }
        let probs = &cache.activations[n_hidden].data;
        if probs.len() != labels.len() {
            return Err(NetError::ShapeMismatch {
                expected: probs.len(),
                found: labels.len(),
            });
        }

        let mut grads: Vec<Option<LayerGrad>> = vec![None; n_hidden + 1];
        let out = &self.layers[n_hidden];
        let dz_out = output_delta(probs, labels);
        grads[n_hidden] = Some(out.param_grad(&[cache.activations[n_hidden - 1].view()], &dz_out));
        let mut da = out.input_grad(&dz_out, 0, out.input_width);

        for j in (0..n_hidden).rev() {
            let layer = &self.layers[j];
            let dz = layer.delta(&cache.pre_activations[j], &cache.activations[j], &da);
            let parts = self.parts(j, &cache.batch, &cache.activations);
            grads[j] = Some(layer.param_grad(&parts, &dz));
            if parts.len() == 2 {
                da = layer.input_grad(&dz, 0, parts[0].cols());
            } else {
                break;
            }
        }
        Ok(Gradients { layers: grads })
    }
}

use crate::net::LayerGrad;

impl Model for BlockHead {
    type Batch = LateralBatch;
    type Cache = HeadCache;

    fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    fn forward_batch(&self, batch: &LateralBatch) -> Result<(Vec<f64>, HeadCache), NetError> {
        self.forward(batch)
    }

    fn backward_batch(&self, cache: &HeadCache, labels: &[u8]) -> Result<Gradients, NetError> {
        self.backward(cache, labels)
    }
}

/// Frozen bases plus a trainable block head.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNetwork {
    bases: Vec<BaseModel>,
    head: BlockHead,
}

/// Intermediates of [`forward_block`].
#[derive(Debug, Clone)]
pub struct BlockCache {
    pub head: HeadCache,
}

fn check_bases(bases: &[BaseModel]) -> Result<(usize, [usize; 2]), BlockError> {
    let first = bases.first().ok_or(BlockError::NoBases)?;
    let input_width = first.network().input_width();
    let mut lateral = [0usize; 2];
    for (index, b) in bases.iter().enumerate() {
        if b.network().layers().len() != BASE_HIDDEN_LAYERS + 1 {
            return Err(BlockError::BaseShape { index });
        }
        let found = b.network().input_width();
        if found != input_width {
            return Err(BlockError::IncompatibleInput {
                index,
                expected: input_width,
                found,
            });
        }
        let w = b.lateral_widths();
        lateral[0] += w[0];
        lateral[1] += w[1];
    }
    Ok((input_width, lateral))
}

/// Wires a fresh block onto `bases`. Block parameters are initialized from
/// `seed` as in [`crate::net::init_network`].
pub fn compose(bases: &[BaseModel], spec: BlockSpec, seed: u64) -> Result<BlockNetwork, BlockError> {
    spec.validate()?;
    let (input_width, lateral) = check_bases(bases)?;
    Ok(BlockNetwork {
        bases: bases.to_vec(),
        head: BlockHead::init(spec, input_width, lateral, seed),
    })
}

impl BlockNetwork {
    pub fn bases(&self) -> &[BaseModel] {
        &self.bases
    }

    pub fn head(&self) -> &BlockHead {
        &self.head
    }

    pub fn spec(&self) -> BlockSpec {
        self.head.spec
    }

    pub fn input_width(&self) -> usize {
        self.head.raw_width
    }

    /// Brute-force count of trainable parameters.
    pub fn trainable_params(&self) -> usize {
        self.head
            .layers
            .iter()
            .filter(|l| !l.frozen)
            .map(DenseLayer::param_count)
            .sum()
    }

    /// Base activations (and raw input, when used) for a batch of images.
    pub fn lateral_batch(&self, images: &Matrix) -> Result<LateralBatch, NetError> {
        let lateral = lateral_activations(&self.bases, images)?;
        Ok(LateralBatch {
            raw: (self.head.spec.h1 > 0).then(|| images.clone()),
            lateral,
        })
    }

    /// Replaces the trainable head, keeping the bases.
    pub fn with_head(&self, head: BlockHead) -> Result<Self, BlockError> {
        if head.raw_width != self.head.raw_width || head.lateral_widths != self.head.lateral_widths {
            return Err(BlockError::LayerLayout(head.spec));
        }
        Ok(Self {
            bases: self.bases.clone(),
            head,
        })
    }
}

fn lateral_activations(bases: &[BaseModel], images: &Matrix) -> Result<[Matrix; 2], NetError> {
    let mut per_base = Vec::with_capacity(bases.len());
    for b in bases {
        per_base.push(b.network().hidden_activations(images, 2)?);
    }
    let mut out = [0usize, 1].map(|d| {
        let width = per_base.iter().map(|h| h[d].cols).sum();
        Matrix::zeros(images.rows, width)
    });
    for (d, m) in out.iter_mut().enumerate() {
        let mut col = 0;
        for h in &per_base {
            m.set_columns(col, &h[d]);
            col += h[d].cols;
        }
    }
    Ok(out)
}

pub fn forward_block(bn: &BlockNetwork, images: &Matrix) -> Result<(Vec<f64>, BlockCache), NetError> {
    let batch = bn.lateral_batch(images)?;
    let (probs, head) = bn.head.forward(&batch)?;
    Ok((probs, BlockCache { head }))
}

impl Model for BlockNetwork {
    type Batch = Matrix;
    type Cache = BlockCache;

    fn layers(&self) -> &[DenseLayer] {
        &self.head.layers
    }

    fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.head.layers
    }

    fn forward_batch(&self, batch: &Matrix) -> Result<(Vec<f64>, BlockCache), NetError> {
        forward_block(self, batch)
    }

    fn backward_batch(&self, cache: &BlockCache, labels: &[u8]) -> Result<Gradients, NetError> {
        self.head.backward(&cache.head, labels)
    }
}

/// Base activations for every example of a dataset, computed once so block
/// training never re-runs the frozen bases.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralFeatures {
    pub lateral: [Matrix; 2],
}

impl LateralFeatures {
    pub fn extract(bases: &[BaseModel], dataset: &Dataset) -> Result<Self, BlockError> {
        let (_, widths) = check_bases(bases)?;
        let mut lateral = widths.map(|w| Matrix::zeros(dataset.len(), w));
        let rows: Vec<usize> = (0..dataset.len()).collect();
        for chunk in rows.chunks(FEATURE_CHUNK) {
            let acts = lateral_activations(bases, &dataset.gather(chunk))?;
            for (dst, src) in lateral.iter_mut().zip(&acts) {
                let start = chunk[0] * dst.cols;
                dst.data[start..start + src.data.len()].copy_from_slice(&src.data);
            }
        }
        Ok(Self { lateral })
    }

    /// Joins per-base features column-wise, in the given base order.
    pub fn concat(parts: &[&LateralFeatures]) -> Self {
        let rows = parts.first().map_or(0, |p| p.lateral[0].rows);
        let lateral = [0usize, 1].map(|d| {
            let width = parts.iter().map(|p| p.lateral[d].cols).sum();
            let mut m = Matrix::zeros(rows, width);
            let mut col = 0;
            for p in parts {
                assert_eq!(p.lateral[d].rows, rows, "feature row counts differ");
                m.set_columns(col, &p.lateral[d]);
                col += p.lateral[d].cols;
            }
            m
        });
        Self { lateral }
    }

    /// Training view pairing these features with the dataset's images.
    pub fn examples<'a>(&'a self, dataset: &'a Dataset, spec: BlockSpec) -> BlockExamples<'a> {
        BlockExamples {
            dataset,
            features: self,
            use_raw: spec.h1 > 0,
        }
    }
}

pub struct BlockExamples<'a> {
    dataset: &'a Dataset,
    features: &'a LateralFeatures,
    use_raw: bool,
}

impl Examples for BlockExamples<'_> {
    type Batch = LateralBatch;

    fn labels(&self) -> &[u8] {
        self.dataset.labels()
    }

    fn gather(&self, rows: &[usize]) -> LateralBatch {
        LateralBatch {
            raw: self.use_raw.then(|| self.dataset.gather(rows)),
            lateral: [
                self.features.lateral[0].select_rows(rows),
                self.features.lateral[1].select_rows(rows),
            ],
        }
    }
}

/// Trains only the block parameters using precomputed base features.
pub fn train_block_with(
    bn: &BlockNetwork,
    dataset: &Dataset,
    features: &LateralFeatures,
    config: &TrainConfig,
) -> Result<(BlockNetwork, TrainLog), BlockError> {
    let examples = features.examples(dataset, bn.spec());
    let (head, log) = train(&bn.head, &examples, config)?;
    Ok((bn.with_head(head)?, log))
}

/// Trains only the block parameters; base networks are left untouched.
pub fn train_block(
    bn: &BlockNetwork,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(BlockNetwork, TrainLog), BlockError> {
    let features = LateralFeatures::extract(&bn.bases, dataset)?;
    train_block_with(bn, dataset, &features, config)
}

/// Serializes the block head behind a header recording base tasks and digests.
pub fn encode_block(bn: &BlockNetwork) -> Result<Vec<u8>, BlockError> {
    let spec = bn.spec();
    let mut out = Vec::new();
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    for w in spec.widths() {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.push(u8::try_from(bn.bases.len()).map_err(|_| BlockError::InvalidSpec("too many bases".into()))?);
    for b in &bn.bases {
        out.push(b.task.id());
        out.extend_from_slice(&b.digest());
    }
    out.extend_from_slice(&encode_layers(&bn.head.layers)?);
    Ok(out)
}

/// Rebuilds a block network over `bases`, refusing bases whose parameters
/// differ from the ones it was trained with.
pub fn decode_block(bytes: &[u8], bases: &[BaseModel]) -> Result<BlockNetwork, BlockError> {
    let take = |from: usize, n: usize| bytes.get(from..from + n).ok_or(BlockError::Truncated);
    let magic: [u8; 4] = take(0, 4)?.try_into().expect("4 bytes");
    if &magic != CONTAINER_MAGIC {
        return Err(BlockError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(take(4, 2)?.try_into().expect("2 bytes"));
    if version != CONTAINER_VERSION {
        return Err(BlockError::UnsupportedVersion(version));
    }
    let mut w = [0usize; 3];
    for (i, slot) in w.iter_mut().enumerate() {
        *slot = u32::from_le_bytes(take(6 + 4 * i, 4)?.try_into().expect("4 bytes")) as usize;
    }
    let spec = BlockSpec::new(w[0], w[1], w[2])?;
    let count = usize::from(take(18, 1)?[0]);
    if count != bases.len() {
        return Err(BlockError::BaseCount {
            expected: count,
            found: bases.len(),
        });
    }
    let mut pos = 19;
    for (index, base) in bases.iter().enumerate() {
        let task = take(pos, 1)?[0];
        let digest = take(pos + 1, 32)?;
        if task != base.task.id() || digest != base.digest() {
            return Err(BlockError::BaseMismatch { index });
        }
        pos += 33;
    }
    let (layers, used) = decode_layers(&bytes[pos..])?;
    if pos + used != bytes.len() {
        return Err(BlockError::Truncated);
    }
    let (input_width, lateral) = check_bases(bases)?;
    Ok(BlockNetwork {
        bases: bases.to_vec(),
        head: BlockHead::from_layers(spec, input_width, lateral, layers)?,
    })
}

pub fn save_block(bn: &BlockNetwork, path: impl AsRef<Path>) -> Result<(), BlockError> {
    fs::write(path, encode_block(bn)?)?;
    Ok(())
}

pub fn load_block(path: impl AsRef<Path>, bases: &[BaseModel]) -> Result<BlockNetwork, BlockError> {
    decode_block(&fs::read(path)?, bases)
}

/// Text description from which a composition can be rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionDescriptor {
    pub spec: BlockSpec,
    pub base_tasks: Vec<Task>,
    pub base_paths: Vec<PathBuf>,
    pub seed: u64,
}

impl CompositionDescriptor {
    pub fn to_text(&self) -> String {
        let mut kv = KvMap::default();
        kv.set("block", self.spec);
        kv.set("base_tasks", join(&self.base_tasks));
        kv.set(
            "bases",
            self.base_paths
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.set("seed", self.seed);
        kv.to_text()
    }

    pub fn parse(text: &str) -> Result<Self, BlockError> {
        let kv = KvMap::parse(text)?;
        kv.only(&["block", "base_tasks", "bases", "seed"])?;
        let spec: BlockSpec = kv
            .raw("block")
            .ok_or_else(|| KvError::Missing("block".into()))?
            .parse()?;
        let base_tasks: Vec<Task> = kv.list("base_tasks")?;
        let base_paths: Vec<PathBuf> = kv.list("bases")?;
        if base_tasks.len() != base_paths.len() {
            return Err(BlockError::InvalidSpec(format!(
                "{} base tasks but {} base paths",
                base_tasks.len(),
                base_paths.len()
            )));
        }
        Ok(Self {
            spec,
            base_tasks,
            base_paths,
            seed: kv.required("seed")?,
        })
    }

    /// Loads the listed base models and composes a fresh block over them.
    pub fn build(&self) -> Result<BlockNetwork, BlockError> {
        let bases = self.load_bases()?;
        compose(&bases, self.spec, self.seed)
    }

    pub fn load_bases(&self) -> Result<Vec<BaseModel>, BlockError> {
        self.base_tasks
            .iter()
            .zip(&self.base_paths)
            .map(|(&task, path)| Ok(BaseModel::new(task, crate::model_io::load_model(path)?)))
            .collect()
    }
}
