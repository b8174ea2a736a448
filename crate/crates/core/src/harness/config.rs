//! Experiment configuration, desk/full scaling and seed derivation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use crate::block::BlockSpec;
use crate::kv::{join, KvError, KvMap};
use crate::rng::mix;
use crate::stimulus::Task;
use crate::train::TrainConfig;

/// Training-set size of the scratch reference networks at full scale.
pub const SCRATCH_FULL_SIZE: usize = 350_000;
/// Training-set size of block networks at full scale.
pub const BLOCK_FULL_SIZE: usize = 200_000;
pub const DEFAULT_TEST_SIZE: usize = 10_000;
pub const DEFAULT_REPETITIONS: usize = 3;
pub const FULL_REPETITIONS: usize = 5;
pub const DEFAULT_SCALE: f64 = 0.1;
/// Hidden widths of base models and of the scratch reference network.
pub const BASE_WIDTHS: [usize; 3] = [200, 100, 50];
pub const SMALL_WIDTHS: [usize; 3] = [60, 40, 20];

const DATA_DOMAIN: u64 = 0xDA7A;
const TEST_STREAM: u64 = 0x7E57;
const REP_DOMAIN: u64 = 0x4E9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("scale must lie in (0, 1], got {0}")]
    Scale(f64),
    #[error("block on {task} cannot use a base trained on the same task")]
    Inadmissible { task: Task },
    #[error("{0}")]
    Invalid(String),
}

/// Fraction of the full dataset sizes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Scale(f64);

impl Scale {
    pub const FULL: Scale = Scale(1.0);
    pub const DESK: Scale = Scale(DEFAULT_SCALE);

    pub fn new(s: f64) -> Result<Self, ConfigError> {
        if s > 0.0 && s <= 1.0 {
            Ok(Self(s))
        } else {
            Err(ConfigError::Scale(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn of(self, full: usize) -> usize {
        (self.0 * full as f64).round() as usize
    }

    pub fn scratch_size(self) -> usize {
        self.of(SCRATCH_FULL_SIZE)
    }

    pub fn block_size(self) -> usize {
        self.of(BLOCK_FULL_SIZE)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Seed of the training set for `task`; shared by every architecture and
/// repetition so only the initialization varies between repetitions.
pub fn data_seed(master: u64, task: Task) -> u64 {
    mix(mix(master, DATA_DOMAIN), u64::from(task.id()))
}

/// Seed of the held-out test set for `task`, disjoint from [`data_seed`].
pub fn test_seed(master: u64, task: Task) -> u64 {
    mix(data_seed(master, task), TEST_STREAM)
}

/// Seed driving initialization, validation split and shuffling of one repetition.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    mix(mix(master, REP_DOMAIN), rep as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    Scratch { widths: Vec<usize> },
    Block { spec: BlockSpec, base_tasks: Vec<Task> },
}

impl Architecture {
    pub fn name(&self) -> String {
        match self {
            Architecture::Scratch { widths } => format!(
                "NN-{}",
                widths.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
            ),
            Architecture::Block { spec, .. } => spec.to_string(),
        }
    }
}

/// Fails when a block would be trained on a task one of its bases learned.
pub fn check_admissible(task: Task, base_tasks: &[Task]) -> Result<(), ConfigError> {
    if base_tasks.contains(&task) {
        Err(ConfigError::Inadmissible { task })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub arch: Architecture,
    /// Base model files, in `base_tasks` order (block mode only).
    pub base_models: Vec<PathBuf>,
    pub train_size: usize,
    pub test_size: usize,
    pub repetitions: usize,
    pub train: TrainConfig,
    pub master_seed: u64,
}

const KEYS: &[&str] = &[
    "mode",
    "task",
    "net",
    "block",
    "base_tasks",
    "base_models",
    "base_dir",
    "train_size",
    "test_size",
    "repetitions",
    "seed",
    "lr",
    "momentum",
    "batch_size",
    "max_epochs",
    "validation_fraction",
    "patience",
    "lr_decay",
    "lr_patience",
];

impl ExperimentConfig {
    pub fn scratch(task: Task, widths: &[usize], train_size: usize) -> Self {
        Self {
            task,
            arch: Architecture::Scratch {
                widths: widths.to_vec(),
            },
            base_models: Vec::new(),
            train_size,
            test_size: DEFAULT_TEST_SIZE,
            repetitions: DEFAULT_REPETITIONS,
            train: default_train_config(),
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.repetitions == 0 {
            return invalid("repetitions must be at least 1".into());
        }
        if self.train_size < 2 {
            return invalid(format!("train_size must be at least 2, got {}", self.train_size));
        }
        if self.test_size == 0 {
            return invalid("test_size must be at least 1".into());
        }
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        match &self.arch {
            Architecture::Scratch { widths } => {
                if widths.is_empty() || widths.contains(&0) {
                    return invalid("net widths must be non-empty and positive".into());
                }
            }
            Architecture::Block { spec, base_tasks } => {
                spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if base_tasks.is_empty() {
                    return invalid("block mode needs base_tasks".into());
                }
                if base_tasks.iter().collect::<BTreeSet<_>>().len() != base_tasks.len() {
                    return invalid("base_tasks contains duplicates".into());
                }
                check_admissible(self.task, base_tasks)?;
                if self.base_models.len() != base_tasks.len() {
                    return invalid(format!(
                        "{} base_tasks but {} base model files",
                        base_tasks.len(),
                        self.base_models.len()
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let kv = KvMap::parse(text)?;
        kv.only(KEYS)?;
        let task: Task = kv.required("task")?;
        let mode: String = kv.required("mode")?;
        let (arch, base_models) = match mode.as_str() {
            "scratch" => {
                let widths = if kv.contains("net") {
                    kv.list("net")?
                } else {
                    BASE_WIDTHS.to_vec()
                };
                (Architecture::Scratch { widths }, Vec::new())
            }
            "block" => {
                let spec: BlockSpec = kv
                    .raw("block")
                    .ok_or_else(|| KvError::Missing("block".into()))?
                    .parse()
                    .map_err(|e: crate::block::BlockError| ConfigError::Invalid(e.to_string()))?;
                let base_tasks: Vec<Task> = kv.list("base_tasks")?;
                let base_models: Vec<PathBuf> = match (kv.contains("base_models"), kv.raw("base_dir")) {
                    (true, None) => kv.list("base_models")?,
                    (false, Some(dir)) => base_tasks.iter().map(|t| base_path(dir, *t)).collect(),
                    _ => {
                        return Err(ConfigError::Invalid(
                            "block mode needs exactly one of base_models or base_dir".into(),
                        ))
                    }
                };
                (Architecture::Block { spec, base_tasks }, base_models)
            }
            other => return Err(ConfigError::Invalid(format!("unknown mode {other:?}"))),
        };
        let defaults = default_train_config();
        let train = TrainConfig {
            learning_rate: kv.optional("lr")?.unwrap_or(defaults.learning_rate),
            momentum: kv.optional("momentum")?.unwrap_or(defaults.momentum),
            batch_size: kv.optional("batch_size")?.unwrap_or(defaults.batch_size),
            max_epochs: kv.optional("max_epochs")?.unwrap_or(defaults.max_epochs),
            validation_fraction: kv
                .optional("validation_fraction")?
                .unwrap_or(defaults.validation_fraction),
            patience: kv.optional("patience")?.unwrap_or(defaults.patience),
            lr_decay: kv.optional("lr_decay")?.unwrap_or(defaults.lr_decay),
            lr_patience: kv.optional("lr_patience")?.unwrap_or(defaults.lr_patience),
            seed: 0,
        };
        let config = Self {
            task,
            arch,
            base_models,
            train_size: kv.required("train_size")?,
            test_size: kv.optional("test_size")?.unwrap_or(DEFAULT_TEST_SIZE),
            repetitions: kv.optional("repetitions")?.unwrap_or(DEFAULT_REPETITIONS),
            train,
            master_seed: kv.optional("seed")?.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }

    /// Every setting spelled out, so the text alone reproduces the run.
    pub fn to_text(&self) -> String {
        let mut kv = KvMap::default();
        kv.set("task", self.task);
        match &self.arch {
            Architecture::Scratch { widths } => {
                kv.set("mode", "scratch");
                kv.set("net", join(widths));
            }
            Architecture::Block { spec, base_tasks } => {
                kv.set("mode", "block");
                kv.set("block", spec);
                kv.set("base_tasks", join(base_tasks));
                kv.set(
                    "base_models",
                    self.base_models
                        .iter()
                        .map(|p| p.display().to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
        }
        kv.set("train_size", self.train_size);
        kv.set("test_size", self.test_size);
        kv.set("repetitions", self.repetitions);
        kv.set("seed", self.master_seed);
        kv.set("lr", self.train.learning_rate);
        kv.set("momentum", self.train.momentum);
        kv.set("batch_size", self.train.batch_size);
        kv.set("max_epochs", self.train.max_epochs);
        kv.set("validation_fraction", self.train.validation_fraction);
        kv.set("patience", self.train.patience);
        kv.set("lr_decay", self.train.lr_decay);
        kv.set("lr_patience", self.train.lr_patience);
        kv.to_text()
    }
}

/// Conventional file name of the base model for `task` inside `dir`.
pub fn base_path(dir: impl Into<PathBuf>, task: Task) -> PathBuf {
    dir.into().join(format!("{task}.bnmd"))
}

/// Optimizer settings used by the harness unless overridden.
pub fn default_train_config() -> TrainConfig {
    TrainConfig::default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_sizes() {
        assert_eq!(Scale::DESK.scratch_size(), 35_000);
        assert_eq!(Scale::DESK.block_size(), 20_000);
        assert_eq!(Scale::FULL.block_size(), 200_000);
        assert_eq!(Scale::new(0.25).unwrap().scratch_size(), 87_500);
        assert!(Scale::new(0.0).is_err());
        assert!(Scale::new(1.5).is_err());
    }

    #[test]
    fn seeds_are_separated() {
        let mut seen = BTreeSet::new();
        for t in Task::ALL {
            assert!(seen.insert(data_seed(7, t)));
            assert!(seen.insert(test_seed(7, t)));
        }
        for r in 0..6 {
            assert!(seen.insert(rep_seed(7, r)));
        }
        assert_ne!(data_seed(7, Task::AngCrs), data_seed(8, Task::AngCrs));
    }

    #[test]
    fn parse_scratch_and_round_trip() {
        let c = ExperimentConfig::parse(
            "mode=scratch\ntask=blt_srp\nnet=60,40,20\ntrain_size=500\nrepetitions=2\nseed=9\n",
        )
        .unwrap();
        assert_eq!(
            c.arch,
            Architecture::Scratch {
                widths: vec![60, 40, 20]
            }
        );
        assert_eq!(c.test_size, DEFAULT_TEST_SIZE);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn parse_block_with_base_dir() {
        let c = ExperimentConfig::parse(
            "mode=block\ntask=blt_srp\nblock=BA-0-50-50\nbase_tasks=ang_crs,crs_ncrs\nbase_dir=bases\ntrain_size=100\n",
        )
        .unwrap();
        assert_eq!(
            c.base_models,
            vec![
                PathBuf::from("bases/ang_crs.bnmd"),
                PathBuf::from("bases/crs_ncrs.bnmd")
            ]
        );
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_overlap_and_bad_keys() {
        let overlap = "mode=block\ntask=blt_srp\nblock=BA-0-0-50\nbase_tasks=blt_srp\nbase_dir=b\ntrain_size=100\n";
        assert_eq!(
            ExperimentConfig::parse(overlap),
            Err(ConfigError::Inadmissible { task: Task::BltSrp })
        );
        assert!(matches!(
            ExperimentConfig::parse("mode=scratch\ntask=blt_srp\ntrain_size=10\nbogus=1\n"),
            Err(ConfigError::Kv(KvError::Unknown(_)))
        ));
        assert!(ExperimentConfig::parse("mode=scratch\ntask=blt_srp\ntrain_size=10\nrepetitions=0\n").is_err());
    }
}
