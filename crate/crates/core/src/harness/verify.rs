//! Invariant checks that need no long training: gradient exactness, the
//! freeze law and parameter counts.

use crate::block::{block_param_count, compose, forward_block, train_block, BaseModel, BlockNetwork, BlockSpec};
use crate::dataset::build_dataset;
use crate::gradcheck::{check_gradients, GradCheckReport, DEFAULT_STEP};
use crate::linalg::Matrix;
use crate::model_io::{encode_network, parameter_digest};
use crate::net::{forward, init_network, mean_loss, mlp_specs, param_count, Network};
use crate::rng::{mix, Rng};
use crate::stimulus::Task;
use crate::train::{Model, TrainConfig};

use super::config::{BASE_WIDTHS, SMALL_WIDTHS};
use super::experiment::HarnessError;

/// Largest width used by the random gradient-check models.
pub const MAX_CHECK_WIDTH: usize = 16;
/// Hidden pre-activations closer than this to the rectifier kink are redrawn,
/// so central differences never straddle it.
pub const KINK_MARGIN: f64 = 1e-3;
const MAX_BATCH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSuite {
    pub networks: usize,
    pub blocks: usize,
    pub parameters_checked: usize,
    pub max_relative_error: f64,
    pub worst: String,
}

fn random_widths(rng: &mut Rng, depth: usize) -> Vec<usize> {
    (0..depth)
        .map(|_| 1 + rng.below(MAX_CHECK_WIDTH as u64) as usize)
        .collect()
}

fn random_batch(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
}

fn random_labels(rng: &mut Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.coin())).collect()
}

fn clear_of_kinks(pre_activations: &[Matrix]) -> bool {
    pre_activations
        .iter()
        .all(|z| z.data.iter().all(|v| v.abs() >= KINK_MARGIN))
}

fn check_model<M: Model>(model: &M, batch: &M::Batch, labels: &[u8]) -> GradCheckReport {
    let (_, cache) = model.forward_batch(batch).expect("shapes agree");
    let analytic = model.backward_batch(&cache, labels).expect("shapes agree");
    check_gradients(model, &analytic, DEFAULT_STEP, |m| {
        mean_loss(&m.forward_batch(batch).expect("shapes agree").0, labels)
    })
}

fn random_network_case(rng: &mut Rng) -> (Network, Matrix, Vec<u8>) {
    // Dead units can pin a pre-activation at exactly zero, so a failed draw
    // replaces the whole case rather than just the batch.
    loop {
        let input = 1 + rng.below(MAX_CHECK_WIDTH as u64) as usize;
        let depth = 1 + rng.below(3) as usize;
        let widths = random_widths(rng, depth);
        let net = init_network(&mlp_specs(input, &widths), rng.next_u64()).expect("valid widths");
        let rows = 1 + rng.below(MAX_BATCH as u64) as usize;
        let x = random_batch(rng, rows, input);
        let (_, cache) = forward(&net, &x).expect("shapes agree");
        let hidden = &cache.pre_activations[..cache.pre_activations.len() - 1];
        if clear_of_kinks(hidden) {
            let labels = random_labels(rng, rows);
            return (net, x, labels);
        }
    }
}

fn random_block_spec(rng: &mut Rng) -> BlockSpec {
    loop {
        let mut w = [0usize; 3];
        for slot in &mut w {
            *slot = if rng.coin() {
                0
            } else {
                1 + rng.below(MAX_CHECK_WIDTH as u64) as usize
            };
        }
        if let Ok(spec) = BlockSpec::new(w[0], w[1], w[2]) {
            return spec;
        }
    }
}

fn random_block_case(rng: &mut Rng) -> (BlockNetwork, Matrix, Vec<u8>) {
    loop {
        let input = 1 + rng.below(MAX_CHECK_WIDTH as u64) as usize;
        let m = 1 + rng.below(4) as usize;
        let bases: Vec<BaseModel> = (0..m)
            .map(|i| {
                let widths = random_widths(rng, 3);
                let net = init_network(&mlp_specs(input, &widths), rng.next_u64()).expect("valid widths");
                BaseModel::new(Task::ALL[i], net)
            })
            .collect();
        let bn = compose(&bases, random_block_spec(rng), rng.next_u64()).expect("valid composition");
        let rows = 1 + rng.below(MAX_BATCH as u64) as usize;
        let x = random_batch(rng, rows, input);
        let (_, cache) = forward_block(&bn, &x).expect("shapes agree");
        let pre = cache.head.pre_activations();
        if clear_of_kinks(&pre[..pre.len() - 1]) {
            let labels = random_labels(rng, rows);
            return (bn, x, labels);
        }
    }
}

/// Finite-difference check of `networks` random plain networks and `blocks`
/// random block compositions, all widths at most [`MAX_CHECK_WIDTH`].
pub fn gradient_suite(networks: usize, blocks: usize, seed: u64) -> GradientSuite {
    let mut suite = GradientSuite {
        networks,
        blocks,
        parameters_checked: 0,
        max_relative_error: 0.0,
        worst: String::new(),
    };
    let record = |suite: &mut GradientSuite, report: GradCheckReport, what: String| {
        suite.parameters_checked += report.checked;
        if report.max_relative_error > suite.max_relative_error || report.max_relative_error.is_nan() {
            suite.max_relative_error = report.max_relative_error;
            suite.worst = what;
        }
    };
    let mut rng = Rng::new(mix(seed, 0x6C));
    for i in 0..networks {
        let (net, x, labels) = random_network_case(&mut rng);
        let report = check_model(&net, &x, &labels);
        record(&mut suite, report, format!("network {i}"));
    }
    for i in 0..blocks {
        let (bn, x, labels) = random_block_case(&mut rng);
        let report = check_model(&bn, &x, &labels);
        record(&mut suite, report, format!("block {i} ({})", bn.spec()));
    }
    suite
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreezeRun {
    pub spec: BlockSpec,
    pub bases: usize,
    pub digests_unchanged: bool,
    pub bytes_unchanged: bool,
    /// Epochs of block training performed.
    pub epochs: usize,
}

/// Trains `runs` small blocks and compares every base before and after.
pub fn freeze_suite(runs: usize, seed: u64) -> Result<Vec<FreezeRun>, HarnessError> {
    let mut rng = Rng::new(mix(seed, 0xF2));
    let specs = [
        BlockSpec::BA_0_50_50,
        BlockSpec::BA_0_0_50,
        BlockSpec { h1: 8, h2: 8, h3: 8 },
    ];
    let mut out = Vec::with_capacity(runs);
    for r in 0..runs {
        let m = 1 + r % 5;
        let target = Task::ALL[5 - (r % 6).min(5)];
        let base_tasks: Vec<Task> = Task::ALL.into_iter().filter(|&t| t != target).take(m).collect();
        let bases: Vec<BaseModel> = base_tasks
            .iter()
            .map(|&t| {
                let widths = [12, 8, 6];
                BaseModel::new(
                    t,
                    init_network(&mlp_specs(crate::raster::PIXELS, &widths), rng.next_u64()).expect("valid"),
                )
            })
            .collect();
        let before: Vec<([u8; 32], Vec<u8>)> = bases
            .iter()
            .map(|b| (b.digest(), encode_network(b.network())))
            .collect();
        let spec = specs[r % specs.len()];
        let bn = compose(&bases, spec, rng.next_u64())?;
        let data = build_dataset(target, 48, rng.next_u64())?;
        let config = TrainConfig {
            max_epochs: 3,
            batch_size: 16,
            seed: rng.next_u64(),
            ..TrainConfig::default()
        };
        let (trained, log) = train_block(&bn, &data, &config)?;
        let after: Vec<([u8; 32], Vec<u8>)> = trained
            .bases()
            .iter()
            .map(|b| (parameter_digest(b.network().layers()), encode_network(b.network())))
            .collect();
        out.push(FreezeRun {
            spec,
            bases: m,
            digests_unchanged: before.iter().zip(&after).all(|(a, b)| a.0 == b.0),
            bytes_unchanged: before.iter().zip(&after).all(|(a, b)| a.1 == b.1),
            epochs: log.epochs.len(),
        });
    }
    Ok(out)
}

/// (name, closed-form count, count from the instantiated model).
pub fn parameter_counts() -> Result<Vec<(String, usize, usize)>, HarnessError> {
    let mut out = Vec::new();
    let small = init_network(&mlp_specs(crate::raster::PIXELS, &SMALL_WIDTHS), 0)?;
    let closed_small = {
        let mut prev = crate::raster::PIXELS;
        let mut total = 0;
        for w in SMALL_WIDTHS.iter().chain(&[1]) {
            total += w * (prev + 1);
            prev = *w;
        }
        total
    };
    out.push(("NN-60-40-20".to_string(), closed_small, param_count(&small)));
    let conditions = [
        (BlockSpec::BA_0_50_50, 4usize),
        (BlockSpec::BA_0_50_50, 5),
        (BlockSpec::BA_0_0_50, 4),
        (BlockSpec::BA_0_0_50, 5),
    ];
    for (spec, m) in conditions {
        let bases: Vec<BaseModel> = (0..m)
            .map(|i| {
                Ok(BaseModel::new(
                    Task::ALL[i],
                    init_network(&mlp_specs(crate::raster::PIXELS, &BASE_WIDTHS), i as u64)?,
                ))
            })
            .collect::<Result<_, HarnessError>>()?;
        let bn = compose(&bases, spec, 0)?;
        out.push((
            format!("{spec} m={m}"),
            block_param_count(spec, m, BASE_WIDTHS, crate::raster::PIXELS),
            bn.trainable_params(),
        ));
    }
    Ok(out)
}
