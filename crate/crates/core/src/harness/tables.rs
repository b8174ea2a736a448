//! The three result tables: scratch references, four-base blocks and
//! five-base blocks.

use std::fmt;
use std::str::FromStr;

use crate::block::BlockSpec;
use crate::stimulus::Task;

use super::config::{ConfigError, BASE_WIDTHS, SMALL_WIDTHS};
use super::experiment::{HarnessError, Lab};
use super::report::{Cell, ResultRow, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableId {
    /// Scratch NN-200-100-50 and NN-60-40-20 on every task.
    Scratch,
    /// Blocks over four bases.
    FourBases,
    /// Blocks over the five bases of the other tasks.
    FiveBases,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::Scratch, TableId::FourBases, TableId::FiveBases];

    pub fn number(self) -> u8 {
        match self {
            TableId::Scratch => 1,
            TableId::FourBases => 2,
            TableId::FiveBases => 3,
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for TableId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(TableId::Scratch),
            "2" => Ok(TableId::FourBases),
            "3" => Ok(TableId::FiveBases),
            other => Err(ConfigError::Invalid(format!("unknown table {other:?}"))),
        }
    }
}

/// A block condition: target task and its bases, in wiring order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub task: Task,
    pub bases: Vec<Task>,
}

impl Condition {
    pub fn label(&self) -> String {
        let names: Vec<String> = self.bases.iter().map(ToString::to_string).collect();
        format!("{} ({})", self.task, names.join("+"))
    }
}

/// Block conditions over four bases, in table order.
pub fn four_base_conditions() -> Vec<Condition> {
    use Task::*;
    let row = |task, bases: [Task; 4]| Condition {
        task,
        bases: bases.to_vec(),
    };
    vec![
        row(AngCrs, [AngTriLn, CrsNcrs, BltSrp, BltSrpLn]),
        row(AngCrs, [AngTriLn, AngCrsLn, CrsNcrs, BltSrpLn]),
        row(AngCrs, [AngTriLn, CrsNcrs, BltSrpLn, AngCrsLn]),
        row(AngCrsLn, [AngTriLn, CrsNcrs, BltSrpLn, AngCrs]),
        row(AngCrsLn, [AngTriLn, CrsNcrs, BltSrp, BltSrpLn]),
        row(BltSrp, [AngCrs, AngTriLn, CrsNcrs, BltSrpLn]),
        row(BltSrp, [AngCrsLn, AngTriLn, CrsNcrs, AngCrs]),
        row(BltSrpLn, [AngCrsLn, AngTriLn, CrsNcrs, AngCrs]),
        row(BltSrpLn, [AngCrs, AngTriLn, CrsNcrs, AngCrsLn]),
    ]
}

/// Each task over the bases of all other tasks, in table order.
pub fn five_base_conditions() -> Vec<Condition> {
    use Task::*;
    [AngCrs, AngCrsLn, BltSrp, BltSrpLn, CrsNcrs, AngTriLn]
        .into_iter()
        .map(|task| Condition {
            task,
            bases: Task::ALL.into_iter().filter(|&t| t != task).collect(),
        })
        .collect()
}

pub const BLOCK_COLUMNS: [BlockSpec; 2] = [BlockSpec::BA_0_50_50, BlockSpec::BA_0_0_50];

fn scratch_name(widths: &[usize]) -> String {
    super::config::Architecture::Scratch {
        widths: widths.to_vec(),
    }
    .name()
}

/// Runs every row of a table. Block entries are flagged when their mean test
/// error is no worse than the NN-200-100-50 reference on the same task; the
/// reference is appended as the last column.
pub fn run_table(lab: &mut Lab, id: TableId) -> Result<ResultTable, HarnessError> {
    match id {
        TableId::Scratch => {
            let n = lab.scale().scratch_size();
            let mut rows = Vec::new();
            for (i, task) in Task::ALL.into_iter().enumerate() {
                let big = lab.scratch(task, &BASE_WIDTHS, n)?;
                let small = lab.scratch(task, &SMALL_WIDTHS, n)?;
                rows.push(ResultRow {
                    id: i,
                    condition: task.to_string(),
                    cells: vec![Cell::new(&big, None), Cell::new(&small, None)],
                });
            }
            Ok(ResultTable {
                columns: vec![scratch_name(&BASE_WIDTHS), scratch_name(&SMALL_WIDTHS)],
                rows,
            })
        }
        TableId::FourBases | TableId::FiveBases => {
            let conditions = if id == TableId::FourBases {
                four_base_conditions()
            } else {
                five_base_conditions()
            };
            let n = lab.scale().block_size();
            let mut rows = Vec::new();
            let mut current_target = None;
            for (i, c) in conditions.iter().enumerate() {
                if current_target != Some(c.task) {
                    lab.release_features();
                    current_target = Some(c.task);
                }
                let reference = lab.reference(c.task)?;
                let mut cells = Vec::new();
                for spec in BLOCK_COLUMNS {
                    let r = lab.block(c.task, spec, &c.bases, n)?;
                    cells.push(Cell::new(&r, Some(r.mean <= reference.mean)));
                }
                cells.push(Cell::new(&reference, None));
                rows.push(ResultRow {
                    id: i,
                    condition: c.label(),
                    cells,
                });
            }
            lab.release_features();
            let mut columns: Vec<String> = BLOCK_COLUMNS.iter().map(ToString::to_string).collect();
            columns.push(scratch_name(&BASE_WIDTHS));
            Ok(ResultTable { columns, rows })
        }
    }
}
