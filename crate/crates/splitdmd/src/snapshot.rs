//! Space-by-time snapshot data and its on-disk containers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ks::KsConfig;

/// Relative tolerance for the uniform-spacing check on the time grid.
const UNIFORM_SPACING_RTOL: f64 = 1e-9;

/// A real-valued space x time data grid: rows are spatial nodes, columns are
/// snapshots at uniformly spaced times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMatrix {
    /// m x n values, row i = spatial node i, column k = snapshot at `t_grid[k]`.
    pub values: Array2<f64>,
    /// Ascending spatial grid in [0, 1), length m.
    pub x_grid: Vec<f64>,
    /// Ascending, uniformly spaced time grid, length n.
    pub t_grid: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(values: Array2<f64>, x_grid: Vec<f64>, t_grid: Vec<f64>) -> Result<Self> {
        let snap = Self {
            values,
            x_grid,
            t_grid,
        };
        snap.validate()?;
        Ok(snap)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.values.dim();
        if self.x_grid.len() != m {
            return Err(Error::Shape(format!(
                "x_grid has {} entries but values has {} rows",
                self.x_grid.len(),
                m
            )));
        }
        if self.t_grid.len() != n {
            return Err(Error::Shape(format!(
                "t_grid has {} entries but values has {} columns",
                self.t_grid.len(),
                n
            )));
        }
        if n < 1 {
            return Err(Error::Shape("snapshot matrix has no columns".into()));
        }
        if !self.x_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Shape("x_grid is not strictly ascending".into()));
        }
        if n > 1 {
            let dt = self.t_grid[1] - self.t_grid[0];
            if dt <= 0.0 {
                return Err(Error::Shape("t_grid is not strictly ascending".into()));
            }
            for w in self.t_grid.windows(2) {
                let step = w[1] - w[0];
                if (step - dt).abs() > UNIFORM_SPACING_RTOL * dt.abs() {
                    return Err(Error::Shape(format!(
                        "t_grid spacing is not uniform: {} vs {}",
                        step, dt
                    )));
                }
            }
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::Shape("values contain non-finite entries".into()));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.values.ncols()
    }

    /// Snapshot spacing; requires at least two columns.
    pub fn dt(&self) -> Result<f64> {
        if self.t_grid.len() < 2 {
            return Err(Error::Shape(
                "need at least two snapshots to define dt".into(),
            ));
        }
        Ok(self.t_grid[1] - self.t_grid[0])
    }

    /// Indices of the snapshot columns with time in the closed interval [t_a, t_b].
    pub fn columns_in(&self, t_a: f64, t_b: f64) -> Result<std::ops::Range<usize>> {
        if t_a >= t_b {
            return Err(Error::Domain(format!(
                "invalid subinterval: t_a = {t_a} must be < t_b = {t_b}"
            )));
        }
        // Half-spacing slack so boundary columns on split lines land in both
        // adjacent subintervals despite roundoff.
        let slack = if self.t_grid.len() > 1 {
            0.5 * (self.t_grid[1] - self.t_grid[0]) * 1e-9
        } else {
            0.0
        };
        let start = self.t_grid.partition_point(|&t| t < t_a - slack);
        let end = self.t_grid.partition_point(|&t| t <= t_b + slack);
        if start >= end {
            return Err(Error::EmptyInterval { t_a, t_b });
        }
        Ok(start..end)
    }

    /// Owned copy of the columns with time in [t_a, t_b] (closed on both ends).
    pub fn time_slice(&self, t_a: f64, t_b: f64) -> Result<SnapshotMatrix> {
        let range = self.columns_in(t_a, t_b)?;
        Ok(SnapshotMatrix {
            values: self.values.slice(s![.., range.clone()]).to_owned(),
            x_grid: self.x_grid.clone(),
            t_grid: self.t_grid[range].to_vec(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Self-describing container pairing a snapshot matrix with the configuration
/// that generated it (when known).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotContainer {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<KsConfig>,
    #[serde(flatten)]
    pub snapshot: SnapshotMatrix,
}

pub const SNAPSHOT_FORMAT: &str = "splitdmd-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

impl SnapshotContainer {
    pub fn new(snapshot: SnapshotMatrix, config: Option<KsConfig>) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            config,
            snapshot,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let container: SnapshotContainer = serde_json::from_reader(BufReader::new(file))?;
        if container.format != SNAPSHOT_FORMAT {
            return Err(Error::Format(format!(
                "unexpected container format {:?}",
                container.format
            )));
        }
        container.snapshot.validate()?;
        Ok(container)
    }
}

/// Writes the snapshot as CSV: first row is the time grid, first column the
/// spatial grid, and the top-left cell is blank.
pub fn write_csv<W: Write>(snap: &SnapshotMatrix, mut out: W) -> Result<()> {
    let mut header = String::new();
    for t in &snap.t_grid {
        header.push(',');
        header.push_str(&format!("{t}"));
    }
    writeln!(out, "{header}")?;
    for (i, x) in snap.x_grid.iter().enumerate() {
        let mut line = format!("{x}");
        for k in 0..snap.num_snapshots() {
            line.push(',');
            line.push_str(&format!("{}", snap.values[(i, k)]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses the CSV layout produced by [`write_csv`].
pub fn read_csv<R: std::io::BufRead>(reader: R) -> Result<SnapshotMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty snapshot CSV".into()))??;
    let t_grid: Vec<f64> = header
        .split(',')
        .skip(1)
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad time value {s:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    let mut x_grid = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let x = fields
            .next()
            .ok_or_else(|| Error::Format("missing x value".into()))?;
        x_grid.push(
            x.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad x value {x:?}: {e}")))?,
        );
        let row: Vec<f64> = fields
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad data value {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != t_grid.len() {
            return Err(Error::Format(format!(
                "row has {} values, expected {}",
                row.len(),
                t_grid.len()
            )));
        }
        rows.push(row);
    }
    let m = rows.len();
    let n = t_grid.len();
    let mut values = Array2::zeros((m, n));
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            values[(i, k)] = *v;
        }
    }
    SnapshotMatrix::new(values, x_grid, t_grid)
}
