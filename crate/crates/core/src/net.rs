//! Dense feed-forward networks with a single logistic output unit.

use crate::dataset::Dataset;
use crate::linalg::{gemm, MatMut, MatRef, Matrix};
use crate::rng::Rng;

/// Lower/upper clamp applied to probabilities inside the loss.
pub const PROB_CLAMP: f64 = 1e-12;
const EVAL_BATCH: usize = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("network needs at least one layer")]
    Empty,
    #[error("layer {index} has zero width")]
    ZeroWidth { index: usize },
    #[error("layer {index} expects {expected} inputs but previous layer emits {found}")]
    NonChaining {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("final layer must be a single logistic unit")]
    BadOutput,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("gradient set does not match the trainable layers")]
    GradientLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Rectifier,
    Logistic,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Rectifier => 0,
            Activation::Logistic => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Rectifier),
            1 => Some(Activation::Logistic),
            _ => None,
        }
    }

    pub fn apply(self, z: f64) -> f64 {
        match self {
            // NaN passes through so divergence stays visible.
            Activation::Rectifier => {
                if z < 0.0 {
                    0.0
                } else {
                    z
                }
            }
            Activation::Logistic => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Self {
        Self {
            input_width,
            output_width,
            activation,
        }
    }
}

/// Rectifier hidden layers over `input_width` inputs, then one logistic output.
pub fn mlp_specs(input_width: usize, hidden: &[usize]) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input_width;
    for &h in hidden {
        specs.push(LayerSpec::new(prev, h, Activation::Rectifier));
        prev = h;
    }
    specs.push(LayerSpec::new(prev, 1, Activation::Logistic));
    specs
}

/// Weights are `output_width x input_width`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub frozen: bool,
}

impl DenseLayer {
    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: LayerSpec, rng: &mut Rng) -> Self {
        let bound = (6.0 / (spec.input_width + spec.output_width) as f64).sqrt();
        let weights = (0..spec.input_width * spec.output_width)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        Self {
            input_width: spec.input_width,
            output_width: spec.output_width,
            activation: spec.activation,
            weights,
            biases: vec![0.0; spec.output_width],
            frozen: false,
        }
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            input_width: spec.input_width,
            output_width: spec.output_width,
            activation: spec.activation,
            weights: vec![0.0; spec.input_width * spec.output_width],
            biases: vec![0.0; spec.output_width],
            frozen: false,
        }
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.input_width, self.output_width, self.activation)
    }

    pub fn param_count(&self) -> usize {
        self.output_width * (self.input_width + 1)
    }

    pub fn weight_view(&self) -> MatRef<'_> {
        MatRef::row_major(&self.weights, self.output_width, self.input_width)
    }

    /// Affine map plus activation over an input split into column blocks
    /// `parts`, which together span `input_width` columns in order.
    pub(crate) fn forward_parts(&self, parts: &[MatRef<'_>]) -> (Matrix, Matrix) {
        let batch = parts.first().map_or(0, |p| p.rows());
        let mut z = Matrix::zeros(batch, self.output_width);
        for r in 0..batch {
            z.row_mut(r).copy_from_slice(&self.biases);
        }
        let mut offset = 0;
        for part in parts {
            let w = part.cols();
            let block = self.weight_view().columns(offset, offset + w);
            gemm(1.0, *part, block.t(), 1.0, z.view_mut());
            offset += w;
        }
        assert_eq!(offset, self.input_width, "input parts do not span the layer");
        let act = self.activation;
        let a = Matrix::from_vec(batch, self.output_width, z.data.iter().map(|&v| act.apply(v)).collect());
        (z, a)
    }

    /// Gradient of the loss w.r.t. the pre-activation, from the gradient
    /// w.r.t. the activation.
    pub(crate) fn delta(&self, z: &Matrix, a: &Matrix, grad_a: &Matrix) -> Matrix {
        let act = self.activation;
        let data = z
            .data
            .iter()
            .zip(&a.data)
            .zip(&grad_a.data)
            .map(|((&zv, &av), &g)| g * act.derivative(zv, av))
            .collect();
        Matrix::from_vec(z.rows, z.cols, data)
    }

    /// Parameter gradient for pre-activation delta `dz`.
    pub(crate) fn param_grad(&self, parts: &[MatRef<'_>], dz: &Matrix) -> LayerGrad {
        let mut grad = LayerGrad {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.output_width],
        };
        let mut offset = 0;
        for part in parts {
            let w = part.cols();
            let out = MatMut::strided(
                &mut grad.weights,
                self.output_width,
                self.input_width,
                self.input_width,
                1,
            )
            .columns(offset, offset + w);
            gemm(1.0, dz.view().t(), *part, 0.0, out);
            offset += w;
        }
        for r in 0..dz.rows {
            for (b, &d) in grad.biases.iter_mut().zip(dz.row(r)) {
                *b += d;
            }
        }
        grad
    }

    /// Gradient w.r.t. input columns `c0..c1`.
    pub(crate) fn input_grad(&self, dz: &Matrix, c0: usize, c1: usize) -> Matrix {
        let mut out = Matrix::zeros(dz.rows, c1 - c0);
        gemm(1.0, dz.view(), self.weight_view().columns(c0, c1), 0.0, out.view_mut());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Per-layer gradients; frozen layers hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerGrad>>,
}

impl Gradients {
    /// Number of layers that received a gradient.
    pub fn len(&self) -> usize {
        self.layers.iter().filter(|g| g.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries flattened, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| g.weights.iter().chain(&g.biases).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, NetError> {
        validate_chain(&layers.iter().map(DenseLayer::spec).collect::<Vec<_>>())?;
        for l in &layers {
            if l.weights.len() != l.input_width * l.output_width || l.biases.len() != l.output_width {
                return Err(NetError::ShapeMismatch {
                    expected: l.param_count(),
                    found: l.weights.len() + l.biases.len(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.output_width)
            .collect()
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        for l in &mut self.layers {
            l.frozen = frozen;
        }
    }

    /// Activations of the first `depth` layers for a batch.
    pub fn hidden_activations(&self, batch: &Matrix, depth: usize) -> Result<Vec<Matrix>, NetError> {
        check_width(self.input_width(), batch.cols)?;
        let mut out: Vec<Matrix> = Vec::with_capacity(depth);
        for layer in &self.layers[..depth.min(self.layers.len())] {
            let input = out.last().unwrap_or(batch);
            let (_, a) = layer.forward_parts(&[input.view()]);
            out.push(a);
        }
        Ok(out)
    }
}

fn check_width(expected: usize, found: usize) -> Result<(), NetError> {
    if expected == found {
        Ok(())
    } else {
        Err(NetError::ShapeMismatch { expected, found })
    }
}

fn validate_chain(specs: &[LayerSpec]) -> Result<(), NetError> {
    if specs.is_empty() {
        return Err(NetError::Empty);
    }
    for (index, s) in specs.iter().enumerate() {
        if s.input_width == 0 || s.output_width == 0 {
            return Err(NetError::ZeroWidth { index });
        }
        if index > 0 && specs[index - 1].output_width != s.input_width {
            return Err(NetError::NonChaining {
                index,
                expected: s.input_width,
                found: specs[index - 1].output_width,
            });
        }
    }
    let last = specs.last().expect("non-empty");
    if last.output_width != 1 || last.activation != Activation::Logistic {
        return Err(NetError::BadOutput);
    }
    Ok(())
}

pub fn init_network(specs: &[LayerSpec], seed: u64) -> Result<Network, NetError> {
    validate_chain(specs)?;
    let mut rng = Rng::new(seed);
    Ok(Network {
        layers: specs.iter().map(|&s| DenseLayer::init(s, &mut rng)).collect(),
    })
}

/// Intermediates kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Matrix,
    pub pre_activations: Vec<Matrix>,
    pub activations: Vec<Matrix>,
}

pub fn forward(net: &Network, batch: &Matrix) -> Result<(Vec<f64>, ForwardCache), NetError> {
    check_width(net.input_width(), batch.cols)?;
    let mut pre = Vec::with_capacity(net.layers.len());
    let mut post: Vec<Matrix> = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let input = post.last().unwrap_or(batch);
        let (z, a) = layer.forward_parts(&[input.view()]);
        pre.push(z);
        post.push(a);
    }
    let probs = post.last().expect("non-empty").data.clone();
    Ok((
        probs,
        ForwardCache {
            input: batch.clone(),
            pre_activations: pre,
            activations: post,
        },
    ))
}

/// Binary cross-entropy with the probability clamped away from 0 and 1.
pub fn loss(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn mean_loss(probs: &[f64], labels: &[u8]) -> f64 {
    probs.iter().zip(labels).map(|(&p, &y)| loss(p, y)).sum::<f64>() / probs.len() as f64
}

/// Gradient of the mean loss w.r.t. the output pre-activation (sigmoid + BCE).
pub(crate) fn output_delta(probs: &[f64], labels: &[u8]) -> Matrix {
    let n = probs.len() as f64;
    Matrix::from_vec(
        probs.len(),
        1,
        probs
            .iter()
            .zip(labels)
            .map(|(&p, &y)| (p - f64::from(y)) / n)
            .collect(),
    )
}

/// Exact gradients of the mean batch loss for every non-frozen layer.
pub fn backward(net: &Network, cache: &ForwardCache, labels: &[u8]) -> Result<Gradients, NetError> {
    let n_layers = net.layers.len();
    if cache.activations.len() != n_layers || cache.pre_activations.len() != n_layers {
        return Err(NetError::ShapeMismatch {
            expected: n_layers,
            found: cache.activations.len(),
        });
    }
    for (layer, a) in net.layers.iter().zip(&cache.activations) {
        check_width(layer.output_width, a.cols)?;
    }
    check_width(cache.input.rows, labels.len())?;

    let mut grads: Vec<Option<LayerGrad>> = vec![None; n_layers];
    let Some(lowest) = net.layers.iter().position(|l| !l.frozen) else {
        return Ok(Gradients { layers: grads });
    };

    let probs = &cache.activations[n_layers - 1].data;
    let mut dz = output_delta(probs, labels);
    for l in (lowest..n_layers).rev() {
        let layer = &net.layers[l];
        let input = if l == 0 {
            &cache.input
        } else {
            &cache.activations[l - 1]
        };
        if !layer.frozen {
            grads[l] = Some(layer.param_grad(&[input.view()], &dz));
        }
        if l > lowest {
            let da = layer.input_grad(&dz, 0, layer.input_width);
            let below = &net.layers[l - 1];
            dz = below.delta(&cache.pre_activations[l - 1], &cache.activations[l - 1], &da);
        }
    }
    Ok(Gradients { layers: grads })
}

/// Total weights and biases.
pub fn param_count(net: &Network) -> usize {
    net.layers.iter().map(DenseLayer::param_count).sum()
}

/// Percentage of examples whose thresholded prediction disagrees with the
/// label. `prob >= 0.5` predicts label 1.
pub fn error_pct(probs: &[f64], labels: &[u8]) -> f64 {
    let wrong = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| u8::from(p >= 0.5) != y)
        .count();
    100.0 * wrong as f64 / labels.len() as f64
}

pub fn predict(net: &Network, batch: &Matrix) -> Result<Vec<f64>, NetError> {
    forward(net, batch).map(|(p, _)| p)
}

/// Test error percentage over a whole dataset.
pub fn evaluate(net: &Network, dataset: &Dataset) -> Result<f64, NetError> {
    let mut probs = Vec::with_capacity(dataset.len());
    let idx: Vec<usize> = (0..dataset.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        probs.extend(predict(net, &dataset.gather(chunk))?);
    }
    Ok(error_pct(&probs, dataset.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_scratch_shapes() {
        let net = init_network(&mlp_specs(1024, &[200, 100, 50]), 1).unwrap();
        let shapes: Vec<(usize, usize)> = net.layers().iter().map(|l| (l.output_width, l.input_width)).collect();
        assert_eq!(shapes, vec![(200, 1024), (100, 200), (50, 100), (1, 50)]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_network(&mlp_specs(1024, &[200, 100, 50]), 7).unwrap();
        let b = init_network(&mlp_specs(1024, &[200, 100, 50]), 7).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 1224.0).sqrt();
        assert!((bound - 0.0700).abs() < 1e-4);
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
        assert!(a.layers().iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn chain_errors() {
        let bad = [
            LayerSpec::new(4, 3, Activation::Rectifier),
            LayerSpec::new(2, 1, Activation::Logistic),
        ];
        assert_eq!(
            init_network(&bad, 0),
            Err(NetError::NonChaining {
                index: 1,
                expected: 2,
                found: 3
            })
        );
        assert_eq!(init_network(&[], 0), Err(NetError::Empty));
        let no_output = [LayerSpec::new(4, 2, Activation::Logistic)];
        assert_eq!(init_network(&no_output, 0), Err(NetError::BadOutput));
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut net = init_network(&mlp_specs(3, &[4]), 0).unwrap();
        for l in net.layers_mut() {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 5.0, 0.3, 0.0, 9.0]);
        let (p, _) = forward(&net, &x).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn hand_computed_chain() {
        let mut net = init_network(&mlp_specs(1, &[1]), 0).unwrap();
        net.layers_mut()[0].weights = vec![1.0];
        net.layers_mut()[1].weights = vec![0.75];
        let (p, cache) = forward(&net, &Matrix::from_vec(1, 1, vec![2.0])).unwrap();
        assert_eq!(cache.activations[0].data, vec![2.0]);
        assert!((p[0] - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = init_network(&mlp_specs(3, &[2]), 0).unwrap();
        assert_eq!(
            forward(&net, &Matrix::zeros(1, 4)).unwrap_err(),
            NetError::ShapeMismatch { expected: 3, found: 4 }
        );
    }

    #[test]
    fn loss_values() {
        assert!((loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(0.9, 0) - std::f64::consts::LN_10).abs() < 1e-12);
        assert!(loss(1.0 - 1e-15, 1) < 1e-11);
        assert!(loss(0.0, 1).is_finite());
    }

    #[test]
    fn fully_frozen_has_no_gradients() {
        let mut net = init_network(&mlp_specs(3, &[2]), 0).unwrap();
        net.set_frozen(true);
        let x = Matrix::from_vec(1, 3, vec![0.1, 0.2, 0.3]);
        let (_, cache) = forward(&net, &x).unwrap();
        assert!(backward(&net, &cache, &[1]).unwrap().is_empty());
    }

    #[test]
    fn partially_frozen_skips_frozen_layers() {
        let mut net = init_network(&mlp_specs(3, &[4, 2]), 5).unwrap();
        net.layers_mut()[1].frozen = true;
        let x = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, 0.9, 0.1, 0.4]);
        let (_, cache) = forward(&net, &x).unwrap();
        let g = backward(&net, &cache, &[1, 0]).unwrap();
        assert!(g.layers[0].is_some() && g.layers[1].is_none() && g.layers[2].is_some());
    }

    #[test]
    fn duplicated_example_has_same_mean_gradient() {
        let net = init_network(&mlp_specs(3, &[4]), 5).unwrap();
        let one = Matrix::from_vec(1, 3, vec![0.4, 0.7, 0.1]);
        let two = Matrix::from_vec(2, 3, vec![0.4, 0.7, 0.1, 0.4, 0.7, 0.1]);
        let (_, c1) = forward(&net, &one).unwrap();
        let (_, c2) = forward(&net, &two).unwrap();
        let g1 = backward(&net, &c1, &[1]).unwrap().flatten();
        let g2 = backward(&net, &c2, &[1, 1]).unwrap().flatten();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn param_counts() {
        let small = init_network(&mlp_specs(1024, &[60, 40, 20]), 0).unwrap();
        assert_eq!(param_count(&small), 64_781);
        let big = init_network(&mlp_specs(1024, &[200, 100, 50]), 0).unwrap();
        assert_eq!(param_count(&big), 230_201);
        let tiny = init_network(&mlp_specs(1, &[1]), 0).unwrap();
        assert_eq!(param_count(&tiny), 4);
    }

    #[test]
    fn threshold_ties_predict_one() {
        assert_eq!(error_pct(&[0.5, 0.5, 0.5, 0.5], &[0, 1, 0, 1]), 50.0);
        assert_eq!(error_pct(&[0.2, 0.8], &[0, 1]), 0.0);
    }
}
