//! Optimizer × step-size comparison grids.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, OptimizerConfig};
use super::runner::{run_with, RunOutput};
use super::trace::{write_trace, Status};

#[derive(Debug)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub optimizer: OptimizerConfig,
    pub outcome: Result<RunOutput>,
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CompareOutput {
    pub cells: Vec<Cell>,
    pub table: String,
}

impl CompareOutput {
    /// Exit status: 2 if any cell failed with an error, 1 if every cell
    /// diverged, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        let status = |c: &Cell| match &c.outcome {
            Ok(o) => o.summary.status,
            Err(_) => Status::Error,
        };
        if self.cells.iter().any(|c| status(c) == Status::Error) {
            2
        } else if self.cells.iter().all(|c| status(c) == Status::Diverge) {
            1
        } else {
            0
        }
    }
}

/// Four significant digits, switching to scientific notation outside `[1e-3, 1e5)`.
pub fn format_loss(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{x:.3e}")
    } else {
        let decimals = (3 - a.log10().floor() as i32).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

fn cell_label(c: &Cell) -> String {
    match &c.outcome {
        Ok(o) if o.summary.status == Status::Diverge => "diverge".into(),
        Ok(o) if o.summary.status == Status::Error => "error".into(),
        Ok(o) => format_loss(o.summary.final_loss),
        Err(_) => "error".into(),
    }
}

fn render_table(cfg: &CompareConfigView, cells: &[Cell]) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["optimizer".to_string()];
    header.extend(cfg.step_sizes.iter().map(|s| format!("dt={s}")));
    rows.push(header);
    for (i, name) in cfg.row_names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..cfg.step_sizes.len()).map(|j| {
            cells
                .iter()
                .find(|c| c.row == i && c.col == j)
                .map(cell_label)
                .unwrap_or_default()
        }));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out.push_str(line.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let sep: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&sep.join("-|-"));
            out.push('\n');
        }
    }
    out
}

struct CompareConfigView<'a> {
    step_sizes: &'a [f64],
    row_names: Vec<String>,
}

/// Run every (optimizer, step size) cell of `cfg.compare` in parallel.
/// Traces go to `out_dir/<optimizer>_dt<step>.csv` (or `.json`) when an
/// output directory is configured, with `summary.txt` beside them.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareOutput> {
    cfg.validate()?;
    let cmp = cfg
        .compare
        .as_ref()
        .ok_or_else(|| Error::Config("[compare] section is required".into()))?;
    let names: Vec<&str> = cmp.optimizers.iter().map(|o| o.name.as_str()).collect();
    let row_names: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if names.iter().filter(|m| *m == n).count() > 1 {
                format!("{n}#{}", i + 1)
            } else {
                n.to_string()
            }
        })
        .collect();
    let ext = match cfg.output.format {
        super::config::TraceFormat::Csv => "csv",
        super::config::TraceFormat::Json => "json",
    };
    let jobs: Vec<(usize, usize, OptimizerConfig)> = cmp
        .optimizers
        .iter()
        .enumerate()
        .flat_map(|(i, o)| {
            cmp.step_sizes
                .iter()
                .enumerate()
                .map(move |(j, &lr)| (i, j, OptimizerConfig { lr, ..o.clone() }))
        })
        .collect();
    let cells: Vec<Cell> = jobs
        .into_par_iter()
        .map(|(row, col, optimizer)| {
            let outcome = run_with(cfg, &optimizer);
            let mut trace_path = None;
            let outcome = match (outcome, &cmp.out_dir) {
                (Ok(out), Some(dir)) => {
                    let path = dir.join(format!(
                        "{}_dt{}.{ext}",
                        row_names[row].replace('#', "-"),
                        optimizer.lr
                    ));
                    let written = write_trace(&out.records, &path, cfg.output.format);
                    trace_path = Some(path);
                    written.map(|_| out)
                }
                (o, _) => o,
            };
            Cell {
                row,
                col,
                optimizer,
                outcome,
                trace_path,
            }
        })
        .collect();
    let view = CompareConfigView {
        step_sizes: &cmp.step_sizes,
        row_names,
    };
    let table = render_table(&view, &cells);
    if let Some(dir) = &cmp.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("summary.txt");
        fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    }
    Ok(CompareOutput { cells, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_formatting() {
        assert_eq!(format_loss(0.71418), "0.7142");
        assert_eq!(format_loss(50.0), "50.00");
        assert_eq!(format_loss(15198.08), "15198");
        assert_eq!(format_loss(2.264e-18), "2.264e-18");
    }
}
