//! Share of block networks beating the scratch reference, as a function of
//! the number of base models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::block::BlockSpec;
use crate::rng::{mix, Rng};
use crate::stimulus::Task;

use super::config::ConfigError;
use super::experiment::{HarnessError, Lab};
use super::report::plot_data;
use super::tables::BLOCK_COLUMNS;

const SWEEP_DOMAIN: u64 = 0x5EE9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base_counts: Vec<usize>,
    pub samples: usize,
    pub kinds: Vec<BlockSpec>,
}

impl SweepConfig {
    pub fn new(base_counts: Vec<usize>, samples: usize) -> Self {
        Self {
            base_counts,
            samples,
            kinds: BLOCK_COLUMNS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.base_counts.is_empty() || self.samples == 0 || self.kinds.is_empty() {
            return Err(ConfigError::Invalid(
                "sweep needs base counts, samples and kinds".into(),
            ));
        }
        if let Some(&m) = self.base_counts.iter().find(|&&m| m == 0 || m >= Task::ALL.len()) {
            return Err(ConfigError::Invalid(format!(
                "base count {m} leaves no admissible task (use 1..={})",
                Task::ALL.len() - 1
            )));
        }
        Ok(())
    }
}

/// One block network compared against the scratch reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub m: usize,
    pub bases: Vec<Task>,
    pub target: Task,
    pub kind: BlockSpec,
    pub block_mean: f64,
    pub scratch_mean: f64,
}

impl Comparison {
    /// Strictly lower mean error; ties do not count.
    pub fn outperforms(&self) -> bool {
        self.block_mean < self.scratch_mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub m: usize,
    pub subsets: usize,
    /// (kind, wins, comparisons).
    pub per_kind: Vec<(BlockSpec, usize, usize)>,
}

impl SweepPoint {
    pub fn wins(&self) -> usize {
        self.per_kind.iter().map(|k| k.1).sum()
    }

    pub fn total(&self) -> usize {
        self.per_kind.iter().map(|k| k.2).sum()
    }

    /// Pooled outperformance fraction in [0, 1].
    pub fn fraction(&self) -> f64 {
        fraction(self.wins(), self.total())
    }

    pub fn kind_fraction(&self, kind: BlockSpec) -> Option<f64> {
        self.per_kind.iter().find(|k| k.0 == kind).map(|k| fraction(k.1, k.2))
    }
}

fn fraction(wins: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        wins as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub comparisons: Vec<Comparison>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn point(&self, m: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.m == m)
    }

    /// One row per base count and kind, plus a pooled row.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("m,subsets,arch,comparisons,wins,percent\n");
        for p in &self.points {
            for &(kind, wins, total) in &p.per_kind {
                writeln!(
                    out,
                    "{},{},{kind},{total},{wins},{:.1}",
                    p.m,
                    p.subsets,
                    100.0 * fraction(wins, total)
                )
                .expect("string write");
            }
            writeln!(
                out,
                "{},{},pooled,{},{},{:.1}",
                p.m,
                p.subsets,
                p.total(),
                p.wins(),
                100.0 * p.fraction()
            )
            .expect("string write");
        }
        out
    }

    pub fn comparisons_csv(&self) -> String {
        let mut out = String::from("m,bases,target,arch,block_mean,scratch_mean,outperforms\n");
        for c in &self.comparisons {
            let bases: Vec<String> = c.bases.iter().map(ToString::to_string).collect();
            writeln!(
                out,
                "{},{},{},{},{:.1},{:.1},{}",
                c.m,
                bases.join("+"),
                c.target,
                c.kind,
                c.block_mean,
                c.scratch_mean,
                u8::from(c.outperforms())
            )
            .expect("string write");
        }
        out
    }

    /// `(m, percent)` pairs for `kind`, or pooled over kinds when `None`.
    pub fn plot_data(&self, kind: Option<BlockSpec>) -> Result<String, HarnessError> {
        let points: Vec<(usize, f64)> = self
            .points
            .iter()
            .map(|p| {
                let f = match kind {
                    Some(k) => p.kind_fraction(k).unwrap_or(0.0),
                    None => p.fraction(),
                };
                (p.m, 100.0 * f)
            })
            .collect();
        plot_data(&points)
    }
}

/// All `m`-element subsets of the six tasks, in lexicographic order.
pub fn task_subsets(m: usize) -> Vec<Vec<Task>> {
    fn rec(start: usize, m: usize, cur: &mut Vec<Task>, out: &mut Vec<Vec<Task>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..Task::ALL.len() {
            cur.push(Task::ALL[i]);
            rec(i + 1, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, &mut Vec::new(), &mut out);
    out
}

/// Up to `samples` distinct random subsets of size `m`, returned in
/// lexicographic order, plus a warning when fewer exist.
pub fn sample_subsets(m: usize, samples: usize, seed: u64) -> (Vec<Vec<Task>>, Option<String>) {
    let mut all = task_subsets(m);
    let warning = (all.len() < samples).then(|| {
        format!(
            "only {} distinct {m}-base subsets exist; using all of them instead of {samples}",
            all.len()
        )
    });
    Rng::new(mix(mix(seed, SWEEP_DOMAIN), m as u64)).shuffle(&mut all);
    all.truncate(samples);
    all.sort();
    (all, warning)
}

/// Trains every sampled block on every admissible task and compares it with
/// a scratch NN-200-100-50 trained on the same examples.
pub fn run_sweep(lab: &mut Lab, config: &SweepConfig) -> Result<SweepResult, HarnessError> {
    config.validate()?;
    let seed = lab.settings().master_seed;
    let n = lab.scale().block_size();

    let mut warnings = Vec::new();
    let mut chosen: Vec<(usize, Vec<Vec<Task>>)> = Vec::new();
    for &m in &config.base_counts {
        let (subsets, warning) = sample_subsets(m, config.samples, seed);
        if let Some(w) = warning {
            if lab.settings().verbose {
                eprintln!("warning: {w}");
            }
            warnings.push(w);
        }
        chosen.push((m, subsets));
    }

    // Grouped by target so only one task's base activations are cached at a time.
    let mut means: BTreeMap<(Task, BlockSpec, Vec<Task>), f64> = BTreeMap::new();
    for target in Task::ALL {
        for (_, subsets) in &chosen {
            for bases in subsets.iter().filter(|b| !b.contains(&target)) {
                for &kind in &config.kinds {
                    let r = lab.block(target, kind, bases, n)?;
                    means.insert((target, kind, bases.clone()), r.mean);
                }
            }
        }
        lab.release_features();
    }

    let mut points = Vec::new();
    let mut comparisons = Vec::new();
    for (m, subsets) in &chosen {
        let mut per_kind: Vec<(BlockSpec, usize, usize)> = config.kinds.iter().map(|&k| (k, 0, 0)).collect();
        for bases in subsets {
            for target in Task::ALL.into_iter().filter(|t| !bases.contains(t)) {
                let scratch_mean = lab.reference_at(target, n)?.mean;
                for (slot, &kind) in per_kind.iter_mut().zip(&config.kinds) {
                    let c = Comparison {
                        m: *m,
                        bases: bases.clone(),
                        target,
                        kind,
                        block_mean: means[&(target, kind, bases.clone())],
                        scratch_mean,
                    };
                    slot.1 += usize::from(c.outperforms());
                    slot.2 += 1;
                    comparisons.push(c);
                }
            }
        }
        points.push(SweepPoint {
            m: *m,
            subsets: subsets.len(),
            per_kind,
        });
    }
    Ok(SweepResult {
        points,
        comparisons,
        warnings,
    })
}
