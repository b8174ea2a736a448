//! Mini-batch SGD with momentum, plateau learning-rate decay and early stopping.

use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::linalg::Matrix;
use crate::net::{
    backward, error_pct, forward, mean_loss, DenseLayer, ForwardCache, Gradients, LayerGrad, NetError, Network,
};
use crate::rng::{mix, Rng};

const SPLIT_STREAM: u64 = 0x5B11;
const SHUFFLE_STREAM: u64 = 0x5B12;
const EVAL_BATCH: usize = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("training set needs at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Share of the training set held out for early stopping.
    pub validation_fraction: f64,
    /// Non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// Multiplier applied to the learning rate on a validation plateau.
    pub lr_decay: f64,
    /// Non-improving epochs before the learning rate decays.
    pub lr_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            max_epochs: 100,
            validation_fraction: 0.1,
            patience: 10,
            lr_decay: 0.5,
            lr_patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad("validation_fraction must lie in (0, 0.5]");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

/// A model whose dense layers are updated by SGD. Frozen layers are skipped.
pub trait Model: Clone {
    type Batch;
    type Cache;

    fn layers(&self) -> &[DenseLayer];
    fn layers_mut(&mut self) -> &mut [DenseLayer];
    fn forward_batch(&self, batch: &Self::Batch) -> Result<(Vec<f64>, Self::Cache), NetError>;
    fn backward_batch(&self, cache: &Self::Cache, labels: &[u8]) -> Result<Gradients, NetError>;
}

/// Indexable labeled examples that assemble model-ready batches.
pub trait Examples {
    type Batch;

    fn labels(&self) -> &[u8];
    fn gather(&self, rows: &[usize]) -> Self::Batch;

    fn len(&self) -> usize {
        self.labels().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Model for Network {
    type Batch = Matrix;
    type Cache = ForwardCache;

    fn layers(&self) -> &[DenseLayer] {
        Network::layers(self)
    }

    fn layers_mut(&mut self) -> &mut [DenseLayer] {
        Network::layers_mut(self)
    }

    fn forward_batch(&self, batch: &Matrix) -> Result<(Vec<f64>, ForwardCache), NetError> {
        forward(self, batch)
    }

    fn backward_batch(&self, cache: &ForwardCache, labels: &[u8]) -> Result<Gradients, NetError> {
        backward(self, cache, labels)
    }
}

impl Examples for Dataset {
    type Batch = Matrix;

    fn labels(&self) -> &[u8] {
        Dataset::labels(self)
    }

    fn gather(&self, rows: &[usize]) -> Matrix {
        Dataset::gather(self, rows)
    }
}

/// Plain feature rows with labels, for toy problems and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct InMemory {
    pub inputs: Matrix,
    pub labels: Vec<u8>,
}

impl Examples for InMemory {
    type Batch = Matrix;

    fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn gather(&self, rows: &[usize]) -> Matrix {
        self.inputs.select_rows(rows)
    }
}

/// Momentum buffers mirroring the trainable layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub layers: Vec<Option<LayerGrad>>,
}

impl Velocity {
    pub fn zeros(layers: &[DenseLayer]) -> Self {
        Self {
            layers: layers
                .iter()
                .map(|l| {
                    (!l.frozen).then(|| LayerGrad {
                        weights: vec![0.0; l.weights.len()],
                        biases: vec![0.0; l.biases.len()],
                    })
                })
                .collect(),
        }
    }
}

/// `v <- momentum * v - lr * g; theta <- theta + v` on every trainable layer.
pub fn sgd_step(
    layers: &mut [DenseLayer],
    grads: &Gradients,
    velocity: &mut Velocity,
    lr: f64,
    momentum: f64,
) -> Result<(), NetError> {
    if grads.layers.len() != layers.len() || velocity.layers.len() != layers.len() {
        return Err(NetError::GradientLayout);
    }
    for ((layer, g), v) in layers.iter().zip(&grads.layers).zip(&velocity.layers) {
        match (layer.frozen, g, v) {
            (true, None, None) => {}
            (false, Some(g), Some(v))
                if g.weights.len() == layer.weights.len()
                    && g.biases.len() == layer.biases.len()
                    && v.weights.len() == layer.weights.len()
                    && v.biases.len() == layer.biases.len() => {}
            _ => return Err(NetError::GradientLayout),
        }
    }
    for ((layer, g), v) in layers.iter_mut().zip(&grads.layers).zip(&mut velocity.layers) {
        if let (Some(g), Some(v)) = (g, v) {
            update(&mut layer.weights, &mut v.weights, &g.weights, lr, momentum);
            update(&mut layer.biases, &mut v.biases, &g.biases, lr, momentum);
        }
    }
    Ok(())
}

fn update(theta: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, momentum: f64) {
    for ((t, v), &g) in theta.iter_mut().zip(v.iter_mut()).zip(g) {
        *v = momentum * *v - lr * g;
        *t += *v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_error_pct: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_error_pct: f64,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_error_pct,lr\n");
        for r in &self.epochs {
            writeln!(out, "{},{:.6},{:.4},{}", r.epoch, r.train_loss, r.val_error_pct, r.lr).expect("write to string");
        }
        out
    }
}

/// Error percentage of `model` on the given rows of `data`.
pub fn error_on<M, E>(model: &M, data: &E, rows: &[usize]) -> Result<f64, NetError>
where
    M: Model,
    E: Examples<Batch = M::Batch>,
{
    let mut probs = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(EVAL_BATCH) {
        probs.extend(model.forward_batch(&data.gather(chunk))?.0);
    }
    let labels: Vec<u8> = rows.iter().map(|&i| data.labels()[i]).collect();
    Ok(error_pct(&probs, &labels))
}

/// Error percentage over every example.
pub fn error_on_all<M, E>(model: &M, data: &E) -> Result<f64, NetError>
where
    M: Model,
    E: Examples<Batch = M::Batch>,
{
    let rows: Vec<usize> = (0..data.len()).collect();
    error_on(model, data, &rows)
}

/// Fits `model` on `data`, returning the parameters from the epoch with the
/// lowest held-out validation error.
pub fn train<M, E>(model: &M, data: &E, config: &TrainConfig) -> Result<(M, TrainLog), TrainError>
where
    M: Model,
    E: Examples<Batch = M::Batch>,
{
    config.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(TrainError::TooFewExamples(n));
    }

    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(mix(config.seed, SPLIT_STREAM)).shuffle(&mut order);
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_rows, train_rows) = order.split_at(n_val);
    let val_rows = val_rows.to_vec();
    let mut train_rows = train_rows.to_vec();

    let mut shuffler = Rng::new(mix(config.seed, SHUFFLE_STREAM));
    let mut current = model.clone();
    let mut velocity = Velocity::zeros(current.layers());
    let mut lr = config.learning_rate;

    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_error_pct: error_on(&current, data, &val_rows)?,
    };
    let mut best = current.clone();
    let mut since_best = 0usize;
    let mut since_decay = 0usize;

    for epoch in 1..=config.max_epochs {
        shuffler.shuffle(&mut train_rows);
        let mut loss_sum = 0.0;
        for chunk in train_rows.chunks(config.batch_size) {
            let batch = data.gather(chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let (probs, cache) = current.forward_batch(&batch)?;
            loss_sum += mean_loss(&probs, &labels) * chunk.len() as f64;
            let grads = current.backward_batch(&cache, &labels)?;
            sgd_step(current.layers_mut(), &grads, &mut velocity, lr, config.momentum)?;
        }
        let train_loss = loss_sum / train_rows.len() as f64;
        let params_finite = current
            .layers()
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()));
        if !train_loss.is_finite() || !params_finite {
            return Err(TrainError::Diverged { epoch });
        }

        let val_error_pct = error_on(&current, data, &val_rows)?;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_error_pct,
            lr,
        });

        if val_error_pct < log.best_val_error_pct {
            log.best_val_error_pct = val_error_pct;
            log.best_epoch = epoch;
            best = current.clone();
            since_best = 0;
            since_decay = 0;
        } else {
            since_best += 1;
            since_decay += 1;
            if since_best > config.patience {
                break;
            }
            if since_decay >= config.lr_patience {
                lr *= config.lr_decay;
                since_decay = 0;
            }
        }
    }
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_network, mlp_specs, Activation, LayerSpec};

    fn scalar_layer() -> Vec<DenseLayer> {
        vec![DenseLayer::zeros(LayerSpec::new(1, 1, Activation::Logistic))]
    }

    fn unit_grad() -> Gradients {
        Gradients {
            layers: vec![Some(LayerGrad {
                weights: vec![1.0],
                biases: vec![0.0],
            })],
        }
    }

    #[test]
    fn plain_step() {
        let mut layers = scalar_layer();
        let mut v = Velocity::zeros(&layers);
        sgd_step(&mut layers, &unit_grad(), &mut v, 0.1, 0.0).unwrap();
        assert!((layers[0].weights[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn momentum_unrolls() {
        let mut layers = scalar_layer();
        let mut v = Velocity::zeros(&layers);
        sgd_step(&mut layers, &unit_grad(), &mut v, 0.1, 0.9).unwrap();
        sgd_step(&mut layers, &unit_grad(), &mut v, 0.1, 0.9).unwrap();
        assert!((layers[0].weights[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn mismatched_gradients_rejected() {
        let mut layers = scalar_layer();
        let mut v = Velocity::zeros(&layers);
        let empty = Gradients { layers: vec![None] };
        assert_eq!(
            sgd_step(&mut layers, &empty, &mut v, 0.1, 0.0),
            Err(NetError::GradientLayout)
        );
    }

    #[test]
    fn frozen_layer_untouched_by_steps() {
        let mut net = init_network(&mlp_specs(2, &[3]), 1).unwrap();
        net.layers_mut()[0].frozen = true;
        let before = net.layers()[0].clone();
        let x = Matrix::from_vec(2, 2, vec![0.3, 0.9, 0.8, 0.1]);
        let mut v = Velocity::zeros(net.layers());
        for _ in 0..100 {
            let (_, cache) = forward(&net, &x).unwrap();
            let g = backward(&net, &cache, &[1, 0]).unwrap();
            sgd_step(net.layers_mut(), &g, &mut v, 0.5, 0.9).unwrap();
        }
        assert_eq!(net.layers()[0], before);
        assert_ne!(
            net.layers()[1].weights,
            init_network(&mlp_specs(2, &[3]), 1).unwrap().layers()[1].weights
        );
    }

    fn separable_toy(n: usize) -> InMemory {
        let mut rng = Rng::new(3);
        let mut data = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let a = rng.uniform(0.0, 1.0);
            let b = rng.uniform(0.0, 1.0);
            // label 1 iff pixel 0 exceeds pixel 1 by a margin
            let (a, b) = if label == 1 {
                (a.max(b) + 0.2, a.min(b))
            } else {
                (a.min(b), a.max(b) + 0.2)
            };
            data.extend([a, b]);
            labels.push(label);
        }
        InMemory {
            inputs: Matrix::from_vec(n, 2, data),
            labels,
        }
    }

    #[test]
    fn separable_toy_reaches_zero_error() {
        let data = separable_toy(400);
        let net = init_network(&mlp_specs(2, &[4]), 9).unwrap();
        let config = TrainConfig {
            learning_rate: 0.1,
            batch_size: 16,
            max_epochs: 200,
            patience: 200,
            seed: 4,
            ..TrainConfig::default()
        };
        let (trained, log) = train(&net, &data, &config).unwrap();
        assert_eq!(log.best_val_error_pct, 0.0);
        assert_eq!(error_on_all(&trained, &data).unwrap(), 0.0);
    }

    #[test]
    fn zero_patience_stops_at_first_plateau() {
        let data = separable_toy(200);
        let net = init_network(&mlp_specs(2, &[4]), 9).unwrap();
        let config = TrainConfig {
            learning_rate: 0.1,
            patience: 0,
            max_epochs: 500,
            seed: 1,
            ..TrainConfig::default()
        };
        let (_, log) = train(&net, &data, &config).unwrap();
        let last = log.epochs.last().unwrap();
        assert!(last.epoch < 500);
        assert!(last.val_error_pct >= log.best_val_error_pct);
        // Every earlier epoch improved on its predecessor.
        for pair in log.epochs[..log.epochs.len() - 1].windows(2) {
            assert!(pair[1].val_error_pct < pair[0].val_error_pct);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable_toy(120);
        let net = init_network(&mlp_specs(2, &[5]), 2).unwrap();
        let config = TrainConfig {
            max_epochs: 5,
            seed: 8,
            ..TrainConfig::default()
        };
        let (a, la) = train(&net, &data, &config).unwrap();
        let (b, lb) = train(&net, &data, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(la.to_csv(), lb.to_csv());
    }

    #[test]
    fn divergence_reported() {
        let data = separable_toy(64);
        let mut net = init_network(&mlp_specs(2, &[4]), 2).unwrap();
        net.layers_mut()[0].weights[0] = f64::NAN;
        let err = train(&net, &data, &TrainConfig::default()).unwrap_err();
        assert_eq!(err, TrainError::Diverged { epoch: 1 });
    }

    #[test]
    fn log_csv_header() {
        let data = separable_toy(40);
        let net = init_network(&mlp_specs(2, &[3]), 2).unwrap();
        let (_, log) = train(
            &net,
            &data,
            &TrainConfig {
                max_epochs: 2,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let csv = log.to_csv();
        assert!(csv.starts_with("epoch,train_loss,val_error_pct,lr\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(TrainError::InvalidConfig(_))));
        let bad = TrainConfig {
            validation_fraction: 0.6,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
