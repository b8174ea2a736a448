//! Repeated training runs over fixed datasets, with caching shared by the
//! table and sweep drivers.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::block::{compose, train_block_with, BaseModel, BlockError, BlockNetwork, BlockSpec, LateralFeatures};
use crate::dataset::{build_dataset, Dataset, DatasetError};
use crate::model_io::{load_model, ModelIoError};
use crate::net::{evaluate, init_network, mlp_specs, NetError, Network};
use crate::raster::PIXELS;
use crate::rng::mix;
use crate::stimulus::Task;
use crate::train::{error_on_all, train, TrainConfig, TrainError, TrainLog};

use super::config::{
    check_admissible, data_seed, default_train_config, rep_seed, test_seed, Architecture, ConfigError,
    ExperimentConfig, Scale, BASE_WIDTHS, DEFAULT_REPETITIONS, DEFAULT_TEST_SIZE,
};

const INIT_STREAM: u64 = 0x1217;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error("base model file {0} not found")]
    MissingBase(PathBuf),
    #[error("nothing to report")]
    EmptyReport,
    #[error("{0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Test errors of one experiment over its repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Test error percentage of each repetition, in repetition order.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub best: f64,
    pub worst: f64,
    pub trainable_params: usize,
    pub wall_seconds: f64,
}

impl ExperimentResult {
    pub fn from_errors(errors: Vec<f64>, trainable_params: usize, wall_seconds: f64) -> Self {
        assert!(!errors.is_empty(), "at least one repetition");
        let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Summation rounding can push the mean of equal values past them.
        let mean = (errors.iter().sum::<f64>() / errors.len() as f64).clamp(best, worst);
        Self {
            errors,
            mean,
            best,
            worst,
            trainable_params,
            wall_seconds,
        }
    }

    /// Equality of every reported number, ignoring wall-clock time.
    pub fn same_numbers(&self, other: &Self) -> bool {
        self.errors == other.errors && self.trainable_params == other.trainable_params
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Scratch(Network),
    Block(BlockNetwork),
}

/// Result plus the trained models and logs of every repetition.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub result: ExperimentResult,
    pub models: Vec<TrainedModel>,
    pub logs: Vec<TrainLog>,
}

#[derive(Debug, Clone)]
pub struct LabSettings {
    pub master_seed: u64,
    pub repetitions: usize,
    pub test_size: usize,
    pub train: TrainConfig,
    /// Progress lines on stderr.
    pub verbose: bool,
}

impl Default for LabSettings {
    fn default() -> Self {
        Self {
            master_seed: 0,
            repetitions: DEFAULT_REPETITIONS,
            test_size: DEFAULT_TEST_SIZE,
            train: default_train_config(),
            verbose: false,
        }
    }
}

struct SplitFeatures {
    train: LateralFeatures,
    test: LateralFeatures,
}

type ScratchKey = (Task, Vec<usize>, usize);
type BlockKey = (Task, BlockSpec, Vec<Task>, usize);

/// Memoizing experiment runner. Datasets depend only on (task, size) and the
/// master seed; the base model of a task is repetition 0 of its scratch
/// reference network.
pub struct Lab {
    settings: LabSettings,
    scale: Scale,
    datasets: BTreeMap<(Task, usize), Arc<Dataset>>,
    tests: BTreeMap<Task, Arc<Dataset>>,
    scratch: BTreeMap<ScratchKey, Arc<ExperimentRun>>,
    blocks: BTreeMap<BlockKey, ExperimentResult>,
    bases: BTreeMap<Task, BaseModel>,
    features: BTreeMap<(Task, Task, usize), Arc<SplitFeatures>>,
}

impl Lab {
    pub fn new(settings: LabSettings, scale: Scale) -> Self {
        Self {
            settings,
            scale,
            datasets: BTreeMap::new(),
            tests: BTreeMap::new(),
            scratch: BTreeMap::new(),
            blocks: BTreeMap::new(),
            bases: BTreeMap::new(),
            features: BTreeMap::new(),
        }
    }

    pub fn settings(&self) -> &LabSettings {
        &self.settings
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    fn note(&self, msg: impl FnOnce() -> String) {
        if self.settings.verbose {
            eprintln!("[lab] {}", msg());
        }
    }

    pub fn dataset(&mut self, task: Task, n: usize) -> Result<Arc<Dataset>, HarnessError> {
        if let Some(d) = self.datasets.get(&(task, n)) {
            return Ok(d.clone());
        }
        self.note(|| format!("generating {n} {task} examples"));
        let d = Arc::new(build_dataset(task, n, data_seed(self.settings.master_seed, task))?);
        self.datasets.insert((task, n), d.clone());
        Ok(d)
    }

    pub fn test_set(&mut self, task: Task) -> Result<Arc<Dataset>, HarnessError> {
        if let Some(d) = self.tests.get(&task) {
            return Ok(d.clone());
        }
        let n = self.settings.test_size;
        let d = Arc::new(build_dataset(task, n, test_seed(self.settings.master_seed, task))?);
        self.tests.insert(task, d.clone());
        Ok(d)
    }

    fn rep_config(&self, rep: usize) -> TrainConfig {
        TrainConfig {
            seed: rep_seed(self.settings.master_seed, rep),
            ..self.settings.train.clone()
        }
    }

    /// Scratch network of hidden `widths` trained on `n` examples of `task`.
    pub fn scratch_run(&mut self, task: Task, widths: &[usize], n: usize) -> Result<Arc<ExperimentRun>, HarnessError> {
        let key = (task, widths.to_vec(), n);
        if let Some(r) = self.scratch.get(&key) {
            return Ok(r.clone());
        }
        let data = self.dataset(task, n)?;
        let test = self.test_set(task)?;
        let specs = mlp_specs(PIXELS, widths);
        let start = Instant::now();
        let configs: Vec<TrainConfig> = (0..self.settings.repetitions).map(|r| self.rep_config(r)).collect();
        let runs: Vec<(Network, TrainLog, f64)> = configs
            .par_iter()
            .map(|cfg| -> Result<_, HarnessError> {
                let net = init_network(&specs, mix(cfg.seed, INIT_STREAM))?;
                let (trained, log) = train(&net, data.as_ref(), cfg)?;
                let err = evaluate(&trained, &test)?;
                Ok((trained, log, err))
            })
            .collect::<Result<_, _>>()?;
        let params = crate::net::param_count(&runs[0].0);
        let errors = runs.iter().map(|r| r.2).collect();
        let result = ExperimentResult::from_errors(errors, params, start.elapsed().as_secs_f64());
        self.note(|| {
            format!(
                "{task} {} n={n}: {:.2} ({:.2}-{:.2})",
                Architecture::Scratch {
                    widths: widths.to_vec()
                }
                .name(),
                result.mean,
                result.best,
                result.worst
            )
        });
        let (models, logs) = runs.into_iter().map(|(m, l, _)| (TrainedModel::Scratch(m), l)).unzip();
        let run = Arc::new(ExperimentRun { result, models, logs });
        self.scratch.insert(key, run.clone());
        Ok(run)
    }

    pub fn scratch(&mut self, task: Task, widths: &[usize], n: usize) -> Result<ExperimentResult, HarnessError> {
        Ok(self.scratch_run(task, widths, n)?.result.clone())
    }

    /// The NN-200-100-50 reference result at this lab's scratch training size.
    pub fn reference(&mut self, task: Task) -> Result<ExperimentResult, HarnessError> {
        let n = self.scale.scratch_size();
        self.scratch(task, &BASE_WIDTHS, n)
    }

    /// The NN-200-100-50 reference trained on `n` examples.
    pub fn reference_at(&mut self, task: Task, n: usize) -> Result<ExperimentResult, HarnessError> {
        self.scratch(task, &BASE_WIDTHS, n)
    }

    /// Uses `base` as the frozen model for its task instead of training one.
    pub fn set_base(&mut self, base: BaseModel) {
        self.features.retain(|k, _| k.0 != base.task);
        self.bases.insert(base.task, base);
    }

    pub fn base(&mut self, task: Task) -> Result<BaseModel, HarnessError> {
        if let Some(b) = self.bases.get(&task) {
            return Ok(b.clone());
        }
        let n = self.scale.scratch_size();
        let run = self.scratch_run(task, &BASE_WIDTHS, n)?;
        let TrainedModel::Scratch(net) = &run.models[0] else {
            unreachable!("scratch runs hold plain networks")
        };
        let base = BaseModel::new(task, net.clone());
        self.bases.insert(task, base.clone());
        Ok(base)
    }

    fn base_features(&mut self, base: Task, target: Task, n: usize) -> Result<Arc<SplitFeatures>, HarnessError> {
        if let Some(f) = self.features.get(&(base, target, n)) {
            return Ok(f.clone());
        }
        let model = self.base(base)?;
        let data = self.dataset(target, n)?;
        let test = self.test_set(target)?;
        let f = Arc::new(SplitFeatures {
            train: LateralFeatures::extract(std::slice::from_ref(&model), &data)?,
            test: LateralFeatures::extract(std::slice::from_ref(&model), &test)?,
        });
        self.features.insert((base, target, n), f.clone());
        Ok(f)
    }

    /// Drops cached base activations; they dominate memory during sweeps.
    pub fn release_features(&mut self) {
        self.features.clear();
    }

    /// Block `spec` over the bases of `base_tasks` (in that order), trained
    /// on `n` examples of `task`.
    pub fn block_run(
        &mut self,
        task: Task,
        spec: BlockSpec,
        base_tasks: &[Task],
        n: usize,
    ) -> Result<ExperimentRun, HarnessError> {
        check_admissible(task, base_tasks)?;
        let bases = base_tasks
            .iter()
            .map(|&t| self.base(t))
            .collect::<Result<Vec<_>, _>>()?;
        let per_base = base_tasks
            .iter()
            .map(|&b| self.base_features(b, task, n))
            .collect::<Result<Vec<_>, _>>()?;
        let train_f = LateralFeatures::concat(&per_base.iter().map(|f| &f.train).collect::<Vec<_>>());
        let test_f = LateralFeatures::concat(&per_base.iter().map(|f| &f.test).collect::<Vec<_>>());
        let data = self.dataset(task, n)?;
        let test = self.test_set(task)?;

        let start = Instant::now();
        let configs: Vec<TrainConfig> = (0..self.settings.repetitions).map(|r| self.rep_config(r)).collect();
        let runs: Vec<(BlockNetwork, TrainLog, f64)> = configs
            .par_iter()
            .map(|cfg| -> Result<_, HarnessError> {
                let bn = compose(&bases, spec, mix(cfg.seed, INIT_STREAM))?;
                let (trained, log) = train_block_with(&bn, &data, &train_f, cfg)?;
                let err = error_on_all(trained.head(), &test_f.examples(&test, spec))?;
                Ok((trained, log, err))
            })
            .collect::<Result<_, _>>()?;
        let params = runs[0].0.trainable_params();
        let errors = runs.iter().map(|r| r.2).collect();
        let result = ExperimentResult::from_errors(errors, params, start.elapsed().as_secs_f64());
        self.note(|| {
            let names: Vec<String> = base_tasks.iter().map(ToString::to_string).collect();
            format!(
                "{task} {spec} ({}) n={n}: {:.2} ({:.2}-{:.2})",
                names.join("+"),
                result.mean,
                result.best,
                result.worst
            )
        });
        let (models, logs) = runs.into_iter().map(|(m, l, _)| (TrainedModel::Block(m), l)).unzip();
        Ok(ExperimentRun { result, models, logs })
    }

    pub fn block(
        &mut self,
        task: Task,
        spec: BlockSpec,
        base_tasks: &[Task],
        n: usize,
    ) -> Result<ExperimentResult, HarnessError> {
        let key = (task, spec, base_tasks.to_vec(), n);
        if let Some(r) = self.blocks.get(&key) {
            return Ok(r.clone());
        }
        let result = self.block_run(task, spec, base_tasks, n)?.result;
        self.blocks.insert(key, result.clone());
        Ok(result)
    }
}

/// Runs one configured experiment. Block mode loads its bases from the
/// configured files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, HarnessError> {
    run_experiment_with(config, false)
}

pub fn run_experiment_with(config: &ExperimentConfig, verbose: bool) -> Result<ExperimentRun, HarnessError> {
    config.validate()?;
    let settings = LabSettings {
        master_seed: config.master_seed,
        repetitions: config.repetitions,
        test_size: config.test_size,
        train: config.train.clone(),
        verbose,
    };
    let mut lab = Lab::new(settings, Scale::FULL);
    match &config.arch {
        Architecture::Scratch { widths } => {
            let run = lab.scratch_run(config.task, widths, config.train_size)?;
            Ok(ExperimentRun::clone(&run))
        }
        Architecture::Block { spec, base_tasks } => {
            for (&task, path) in base_tasks.iter().zip(&config.base_models) {
                if !path.is_file() {
                    return Err(HarnessError::MissingBase(path.clone()));
                }
                lab.set_base(BaseModel::new(task, load_model(path)?));
            }
            lab.block_run(config.task, *spec, base_tasks, config.train_size)
        }
    }
}
