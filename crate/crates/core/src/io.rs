//! Versioned CSV output and the matching readers.
//!
//! Every file starts with the line `# lvctl-csv v1`, followed by a header row.
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the written values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::comparison::ConstraintReport;
use crate::discretization::Grid;
use crate::elliptic::SteadyPair;
use crate::error::{Error, Result};
use crate::optimal_control::{FeasibilityProbe, IterationLog};
use crate::parabolic::{ControlSet, Trajectory};

pub const CSV_VERSION_LINE: &str = "# lvctl-csv v1";

/// Float display that round-trips exactly: plain decimals in `[1e-4, 1e15)`,
/// scientific notation outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// In-memory table: column names and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|s| s.to_string()).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidInput(format!("no column `{name}`")))
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[k].parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("row {i}: `{}` is not a number in `{name}`", r[k]))
                })
            })
            .collect()
    }

    pub fn write_to(&self, out: impl Write) -> Result<()> {
        let mut out = out;
        writeln!(out, "{CSV_VERSION_LINE}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut input = input;
        let mut first = String::new();
        input.read_line(&mut first)?;
        if first.trim_end() != CSV_VERSION_LINE {
            return Err(Error::InvalidInput(format!(
                "missing `{CSV_VERSION_LINE}` header (found `{}`)",
                first.trim_end()
            )));
        }
        let mut r = csv::Reader::from_reader(input);
        let columns = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
        }
        Ok(Table { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_from(BufReader::new(f))
    }
}

/// Long format `t, x, u, v` over the stored snapshots.
pub fn trajectory_table(grid: &Grid, traj: &Trajectory) -> Table {
    let mut t = Table::new(&["t", "x", "u", "v"]);
    for s in &traj.states {
        for i in 0..grid.n() {
            t.push([Num(s.t), Num(grid.x(i)), Num(s.u[i]), Num(s.v[i])]);
        }
    }
    t
}

pub fn steady_table(grid: &Grid, s: &SteadyPair) -> Table {
    let mut t = Table::new(&["x", "u", "v"]);
    for i in 0..grid.n() {
        t.push([Num(grid.x(i)), Num(s.u[i]), Num(s.v[i])]);
    }
    t
}

pub fn constraint_table(traj: &Trajectory, report: &ConstraintReport) -> Table {
    let mut t = Table::new(&[
        "t",
        "min_u",
        "max_u",
        "min_v",
        "max_v",
        "u_nonnegative",
        "u_below_cap",
        "v_nonnegative",
        "v_below_cap",
    ]);
    for (b, f) in traj.constraint_report.iter().zip(&report.steps) {
        t.push([
            Num(b.t).to_string(),
            Num(b.min_u).to_string(),
            Num(b.max_u).to_string(),
            Num(b.min_v).to_string(),
            Num(b.max_v).to_string(),
            f.u_nonnegative.to_string(),
            f.u_below_cap.to_string(),
            f.v_nonnegative.to_string(),
            f.v_below_cap.to_string(),
        ]);
    }
    t
}

/// Which phase a control step belongs to, for phase-annotated output.
pub type PhaseOf<'a> = Option<&'a dyn Fn(usize) -> u8>;

/// `t, cu_left, cu_right, cv_left, cv_right` at the start of each step.
pub fn boundary_control_table(ctrl: &ControlSet, t0: f64, dt: f64, phase: PhaseOf) -> Table {
    let mut cols = vec!["t", "cu_left", "cu_right", "cv_left", "cv_right"];
    if phase.is_some() {
        cols.push("phase");
    }
    let mut t = Table::new(&cols);
    for k in 0..ctrl.n_steps() {
        let (a, b, c, d) = ctrl.boundary_at(k);
        let mut row = vec![
            Num(t0 + k as f64 * dt).to_string(),
            Num(a).to_string(),
            Num(b).to_string(),
            Num(c).to_string(),
            Num(d).to_string(),
        ];
        if let Some(f) = phase {
            row.push(f(k).to_string());
        }
        t.push(row);
    }
    t
}

/// `t, x, h` over the control support.
pub fn interior_control_table(ctrl: &ControlSet, grid: &Grid, t0: f64, dt: f64, phase: PhaseOf) -> Table {
    let mut cols = vec!["t", "x", "h"];
    if phase.is_some() {
        cols.push("phase");
    }
    let mut t = Table::new(&cols);
    for k in 0..ctrl.n_steps() {
        for (j, h) in ctrl.h_at(k).iter().enumerate() {
            let mut row = vec![
                Num(t0 + k as f64 * dt).to_string(),
                Num(grid.x(ctrl.support.start + j)).to_string(),
                Num(*h).to_string(),
            ];
            if let Some(f) = phase {
                row.push(f(k).to_string());
            }
            t.push(row);
        }
    }
    t
}

pub fn convergence_table(log: &[IterationLog]) -> Table {
    let mut t = Table::new(&["iter", "objective", "terminal_distance", "step_size"]);
    for l in log {
        t.push([
            l.iter.to_string(),
            Num(l.objective).to_string(),
            Num(l.terminal_distance).to_string(),
            Num(l.step_size).to_string(),
        ]);
    }
    t
}

pub fn probe_table(probes: &[FeasibilityProbe]) -> Table {
    let mut t = Table::new(&["horizon", "feasible", "terminal_distance", "iterations"]);
    for p in probes {
        t.push([
            Num(p.horizon).to_string(),
            p.feasible.to_string(),
            Num(p.terminal_distance).to_string(),
            p.iterations.to_string(),
        ]);
    }
    t
}
