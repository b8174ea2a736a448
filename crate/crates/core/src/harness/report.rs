//! CSV result tables and plot-data files. Every number is printed with one
//! decimal, except parameter counts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiment::{ExperimentResult, HarnessError};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub best: f64,
    pub worst: f64,
    pub params: usize,
    /// Whether this entry is at least as good as the reference; `None` for
    /// columns without a comparison.
    pub flag: Option<bool>,
}

impl Cell {
    pub fn new(r: &ExperimentResult, flag: Option<bool>) -> Self {
        Self {
            mean: r.mean,
            best: r.best,
            worst: r.worst,
            params: r.trainable_params,
            flag,
        }
    }

    /// `mean(best-worst)`.
    pub fn summary(&self) -> String {
        format!("{:.1}({:.1}-{:.1})", self.mean, self.best, self.worst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub id: usize,
    pub condition: String,
    pub cells: Vec<Cell>,
}

/// One row per condition, one column group per architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    fn flagged(&self, col: usize) -> bool {
        self.rows.iter().any(|r| r.cells[col].flag.is_some())
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        if self.rows.is_empty() || self.columns.is_empty() {
            return Err(HarnessError::EmptyReport);
        }
        let mut out = String::from("row,condition");
        for (c, name) in self.columns.iter().enumerate() {
            write!(out, ",{name}_mean,{name}_best,{name}_worst,{name}_params").expect("string write");
            if self.flagged(c) {
                write!(out, ",{name}_flag").expect("string write");
            }
        }
        out.push('\n');
        for row in &self.rows {
            if row.cells.len() != self.columns.len() || row.condition.contains([',', '\n']) {
                return Err(HarnessError::Report(format!("malformed row {}", row.id)));
            }
            write!(out, "{},{}", row.id, row.condition).expect("string write");
            for (c, cell) in row.cells.iter().enumerate() {
                write!(
                    out,
                    ",{:.1},{:.1},{:.1},{}",
                    cell.mean, cell.best, cell.worst, cell.params
                )
                .expect("string write");
                if self.flagged(c) {
                    out.push_str(if cell.flag == Some(true) { ",1" } else { ",0" });
                }
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Inverse of [`ResultTable::to_csv`] up to the printed precision.
    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let bad = |m: &str| HarnessError::Report(format!("table csv: {m}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split(',').collect();
        if header.len() < 2 || header[0] != "row" || header[1] != "condition" {
            return Err(bad("header"));
        }
        let mut columns = Vec::new();
        let mut has_flag = Vec::new();
        let mut i = 2;
        while i < header.len() {
            let name = header[i]
                .strip_suffix("_mean")
                .ok_or_else(|| bad("expected a _mean column"))?;
            for (k, suffix) in ["_best", "_worst", "_params"].iter().enumerate() {
                if header.get(i + 1 + k) != Some(&format!("{name}{suffix}").as_str()) {
                    return Err(bad("column group"));
                }
            }
            i += 4;
            let flag = header.get(i) == Some(&format!("{name}_flag").as_str());
            if flag {
                i += 1;
            }
            columns.push(name.to_string());
            has_flag.push(flag);
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("number"));
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != header.len() {
                return Err(bad("field count"));
            }
            let mut cells = Vec::new();
            let mut j = 2;
            for &flag in &has_flag {
                let params = f[j + 3].parse().map_err(|_| bad("params"))?;
                let mut cell = Cell {
                    mean: num(f[j])?,
                    best: num(f[j + 1])?,
                    worst: num(f[j + 2])?,
                    params,
                    flag: None,
                };
                j += 4;
                if flag {
                    cell.flag = Some(match f[j] {
                        "1" => true,
                        "0" => false,
                        _ => return Err(bad("flag")),
                    });
                    j += 1;
                }
                cells.push(cell);
            }
            rows.push(ResultRow {
                id: f[0].parse().map_err(|_| bad("row id"))?,
                condition: f[1].to_string(),
                cells,
            });
        }
        Ok(Self { columns, rows })
    }
}

/// Writes `text` to `path`; refuses empty payloads without touching the disk.
pub fn write_report(path: impl AsRef<Path>, text: &str) -> Result<(), HarnessError> {
    if text.lines().nth(1).is_none() {
        return Err(HarnessError::EmptyReport);
    }
    if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// `x y` pairs, one per line, for external plotting.
pub fn plot_data(points: &[(usize, f64)]) -> Result<String, HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    let mut out = String::from("# m percent\n");
    for (m, y) in points {
        writeln!(out, "{m} {y:.1}").expect("string write");
    }
    Ok(out)
}
