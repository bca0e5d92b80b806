//! Piecewise decomposition: segment the horizon, fit one model per
//! subinterval, and assemble the full-horizon reconstruction.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmd::{error_report, exact_dmd, reconstruct_real, DmdModel, DmdModelFile, ErrorReport};
use crate::error::{Error, Result};
use crate::nsplit::{robust_split, NsplitConfig, SplitSet};
use crate::optdmd::{optdmd, VarproConfig};
use crate::snapshot::SnapshotMatrix;

/// Which per-piece fit the driver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    StandardDmd,
    OptimizedDmd,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::StandardDmd => f.write_str("dmd"),
            FitMethod::OptimizedDmd => f.write_str("od"),
        }
    }
}

/// Where the split lines come from.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// Run the consensus segmentation with this configuration.
    Auto(NsplitConfig),
    /// Use these lines verbatim.
    Explicit(SplitSet),
}

/// A sequence of per-subinterval models covering the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDmdModel {
    pub splits: SplitSet,
    /// One model per subinterval, in time order.
    pub pieces: Vec<DmdModel>,
    pub method: FitMethod,
    pub rank: usize,
    /// Sum of per-piece fit times plus segmentation time.
    pub total_fit_time_seconds: f64,
    /// Time spent choosing the split lines (zero for explicit splits).
    pub segmentation_seconds: f64,
}

impl SplitDmdModel {
    /// Index of the piece owning time `t` (left-closed subintervals; the
    /// final time belongs to the last piece).
    pub fn piece_index(&self, t: f64) -> Result<usize> {
        let lines = self.splits.lines();
        let t0 = self.splits.start();
        let t_end = self.splits.end();
        if t < t0 || t > t_end {
            return Err(Error::Domain(format!(
                "t = {t} is outside the modeled horizon [{t0}, {t_end}]"
            )));
        }
        // partition_point gives the count of lines <= t; the piece to the
        // right of line k starts at index k.
        let idx = lines.partition_point(|&l| l <= t);
        Ok(idx.saturating_sub(1).min(self.pieces.len() - 1))
    }
}

/// Moves every interior line by `shift_seconds`, keeping the endpoints.
pub fn shift_splits(splits: &SplitSet, shift_seconds: f64) -> Result<SplitSet> {
    let shifted: Vec<f64> = splits
        .interior()
        .iter()
        .map(|&t| t + shift_seconds)
        .collect();
    SplitSet::from_interior(splits.start(), splits.end(), &shifted).map_err(|_| {
        Error::Domain(format!(
            "shift of {shift_seconds} pushes a split line out of order or outside the horizon"
        ))
    })
}

fn fit_piece(
    block: &SnapshotMatrix,
    left_endpoint: f64,
    rank: usize,
    method: FitMethod,
    od_cfg: &VarproConfig,
) -> Result<(DmdModel, f64)> {
    let started = Instant::now();
    let model = match method {
        FitMethod::StandardDmd => exact_dmd(block, rank)?,
        FitMethod::OptimizedDmd => optdmd(block, rank, None, od_cfg)?.model,
    };
    let elapsed = started.elapsed().as_secs_f64();
    // Blocks usually start on the split line; when an explicit line falls
    // between snapshots, rebase so reconstruction anchors at the subinterval.
    let model = if model.t_start != left_endpoint {
        model.rebase(left_endpoint)
    } else {
        model
    };
    Ok((model, elapsed))
}

/// Segments the data (or takes the given lines), fits one model per
/// subinterval, and reports the assembly error over the full horizon.
///
/// Every subinterval must hold at least `rank + 1` snapshot columns; the
/// boundary column on a split line belongs to both adjacent fits, while the
/// assembled reconstruction evaluates each time with the piece owning it
/// (left-closed).
pub fn split_dmd(
    z: &SnapshotMatrix,
    rank: usize,
    method: FitMethod,
    split_spec: &SplitSpec,
    od_cfg: &VarproConfig,
    parallel: bool,
) -> Result<(SplitDmdModel, ErrorReport)> {
    z.validate()?;
    let t0 = z.t_grid[0];
    let t_end = *z.t_grid.last().unwrap();

    let seg_started = Instant::now();
    let splits = match split_spec {
        SplitSpec::Auto(cfg) => robust_split(z, cfg)?,
        SplitSpec::Explicit(s) => {
            if s.start() != t0 || s.end() != t_end {
                return Err(Error::Domain(format!(
                    "split endpoints [{}, {}] do not match the data horizon [{t0}, {t_end}]",
                    s.start(),
                    s.end()
                )));
            }
            s.clone()
        }
    };
    let segmentation_seconds = match split_spec {
        SplitSpec::Auto(_) => seg_started.elapsed().as_secs_f64(),
        SplitSpec::Explicit(_) => 0.0,
    };

    // Cut the blocks up front so infeasible subintervals fail before any fit.
    let mut blocks = Vec::with_capacity(splits.num_subintervals());
    for k in 1..=splits.num_subintervals() {
        let (a, b) = splits.subinterval(k);
        let block = z.time_slice(a, b)?;
        if block.num_snapshots() < rank + 1 {
            return Err(Error::Config(format!(
                "subinterval [{a}, {b}] holds {} snapshot columns but rank {rank} needs at \
                 least {}; raise the length tolerance or lower the rank",
                block.num_snapshots(),
                rank + 1
            )));
        }
        blocks.push((a, block));
    }

    let fits: Vec<(DmdModel, f64)> = if parallel {
        blocks
            .par_iter()
            .map(|(a, block)| fit_piece(block, *a, rank, method, od_cfg))
            .collect::<Result<_>>()?
    } else {
        blocks
            .iter()
            .map(|(a, block)| fit_piece(block, *a, rank, method, od_cfg))
            .collect::<Result<_>>()?
    };

    let mut pieces = Vec::with_capacity(fits.len());
    let mut fit_time = 0.0;
    for (model, secs) in fits {
        pieces.push(model);
        fit_time += secs;
    }

    let model = SplitDmdModel {
        splits,
        pieces,
        method,
        rank,
        total_fit_time_seconds: fit_time + segmentation_seconds,
        segmentation_seconds,
    };
    let zhat = reconstruct_split(&model, &z.t_grid)?;
    let report = error_report(z, &zhat, model.total_fit_time_seconds)?;
    Ok((model, report))
}

/// Evaluates the piecewise model: each time is reconstructed by the piece
/// owning its subinterval, and the real part is returned.
pub fn reconstruct_split(model: &SplitDmdModel, t_grid: &[f64]) -> Result<Array2<f64>> {
    let m = model
        .pieces
        .first()
        .ok_or_else(|| Error::Shape("piecewise model has no pieces".into()))?
        .modes
        .nrows();
    let mut out = Array2::zeros((m, t_grid.len()));
    // Group consecutive times owned by the same piece into one evaluation.
    let mut start = 0;
    while start < t_grid.len() {
        let piece = model.piece_index(t_grid[start])?;
        let mut end = start + 1;
        while end < t_grid.len() && model.piece_index(t_grid[end])? == piece {
            end += 1;
        }
        let chunk = reconstruct_real(&model.pieces[piece], &t_grid[start..end]);
        for (offset, col) in (start..end).enumerate() {
            for i in 0..m {
                out[(i, col)] = chunk[(i, offset)];
            }
        }
        start = end;
    }
    Ok(out)
}

/// Serialized piecewise model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDmdModelFile {
    pub format: String,
    pub version: u32,
    pub splits: SplitSet,
    pub method: FitMethod,
    pub rank: usize,
    pub total_fit_time_seconds: f64,
    pub segmentation_seconds: f64,
    pub pieces: Vec<DmdModelFile>,
}

pub const SPLIT_MODEL_FORMAT: &str = "splitdmd-split-model";

impl From<&SplitDmdModel> for SplitDmdModelFile {
    fn from(model: &SplitDmdModel) -> Self {
        Self {
            format: SPLIT_MODEL_FORMAT.to_string(),
            version: 1,
            splits: model.splits.clone(),
            method: model.method,
            rank: model.rank,
            total_fit_time_seconds: model.total_fit_time_seconds,
            segmentation_seconds: model.segmentation_seconds,
            pieces: model.pieces.iter().map(DmdModelFile::from).collect(),
        }
    }
}

impl SplitDmdModelFile {
    pub fn into_model(self) -> Result<SplitDmdModel> {
        if self.format != SPLIT_MODEL_FORMAT {
            return Err(Error::Format(format!(
                "unexpected model format {:?}",
                self.format
            )));
        }
        let pieces: Vec<DmdModel> = self
            .pieces
            .into_iter()
            .map(DmdModelFile::into_model)
            .collect::<Result<_>>()?;
        if pieces.len() != self.splits.num_subintervals() {
            return Err(Error::Format(format!(
                "{} pieces for {} subintervals",
                pieces.len(),
                self.splits.num_subintervals()
            )));
        }
        Ok(SplitDmdModel {
            splits: self.splits,
            pieces,
            method: self.method,
            rank: self.rank,
            total_fit_time_seconds: self.total_fit_time_seconds,
            segmentation_seconds: self.segmentation_seconds,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}
