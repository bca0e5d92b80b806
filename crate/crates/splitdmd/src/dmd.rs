//! Exact dynamic mode decomposition: a rank-r linear evolution operator fitted
//! to snapshot pairs, plus reconstruction and the error metrics reported by
//! the experiment harness.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_real, lstsq_c, thin_svd, thin_svd_c};
use crate::snapshot::SnapshotMatrix;

/// Relative threshold below which singular values do not count toward the
/// numerical rank of the snapshot matrix.
const RANK_RTOL: f64 = 1e-12;

/// Relative threshold for the full-column-rank check on the mode matrix.
const MODE_RANK_RTOL: f64 = 1e-10;

/// Discrete eigenvalues at or below this magnitude have no principal-branch
/// logarithm worth trusting and are rejected.
const EIG_MAGNITUDE_FLOOR: f64 = 1e-14;

/// Rank-r decomposition of one time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdModel {
    pub rank: usize,
    /// m x r complex mode matrix; columns are spatial modes.
    pub modes: Array2<Complex64>,
    /// Continuous-time eigenvalues, `log(lambda) / dt` on the principal branch.
    pub cont_eigs: Vec<Complex64>,
    /// Projection coefficients solving `modes * b =` first snapshot column.
    pub amplitudes: Vec<Complex64>,
    /// Snapshot spacing the model was fitted at.
    pub dt: f64,
    /// Interval origin for reconstruction.
    pub t_start: f64,
}

impl DmdModel {
    /// Moves the reconstruction origin, rescaling the amplitudes so that the
    /// reconstructed trajectory is unchanged.
    pub fn rebase(&self, new_t_start: f64) -> DmdModel {
        let shift = new_t_start - self.t_start;
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(&self.cont_eigs)
            .map(|(b, w)| b * (w * shift).exp())
            .collect();
        DmdModel {
            amplitudes,
            t_start: new_t_start,
            ..self.clone()
        }
    }
}

/// Fit-quality metrics for a reconstruction against the source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Spatial 2-norm of the residual at the final snapshot time.
    pub final_residual_2norm: f64,
    /// `|Z - Zhat|_F / |Z|_F`.
    pub rel_frobenius: f64,
    pub wall_time_seconds: f64,
}

/// Exact DMD of a snapshot matrix at rank `r`.
///
/// `X` and `Y` are the leading and trailing column blocks, `X ~ U S V^T` is
/// truncated at rank `r`, the projected operator `U^T Y V S^-1` supplies the
/// eigenpairs, and the modes are `Y V S^-1 W`.
pub fn exact_dmd(z: &SnapshotMatrix, r: usize) -> Result<DmdModel> {
    z.validate()?;
    let (m, n) = z.values.dim();
    if n < 2 {
        return Err(Error::Shape(format!(
            "exact DMD needs at least 2 snapshot columns, got {n}"
        )));
    }
    if r == 0 {
        return Err(Error::Domain("rank must be positive".into()));
    }
    let max_rank = m.min(n - 1);
    if r > max_rank {
        return Err(Error::Rank {
            requested: r,
            achievable: max_rank,
        });
    }
    let dt = z.dt()?;
    let x = z.values.slice(s![.., ..n - 1]).to_owned();
    let y = z.values.slice(s![.., 1..]).to_owned();

    let (u, sigma, v) = thin_svd(&x)?;
    let num_rank = sigma.iter().filter(|&&s| s > sigma[0] * RANK_RTOL).count();
    if r > num_rank {
        return Err(Error::Rank {
            requested: r,
            achievable: num_rank,
        });
    }
    let ur = u.slice(s![.., ..r]).to_owned();
    let vr = v.slice(s![.., ..r]).to_owned();
    let sr_inv = Array1::from_iter(sigma.iter().take(r).map(|s| 1.0 / s));

    // y_vs = Y V S^-1, reused for both the projected operator and the modes.
    let mut y_vs = y.dot(&vr);
    for (j, col) in y_vs.columns_mut().into_iter().enumerate() {
        let mut col = col;
        col *= sr_inv[j];
    }
    let a_tilde = ur.t().dot(&y_vs);

    let (lambdas, eigvecs) = eig_real(&a_tilde)?;
    let good = lambdas
        .iter()
        .filter(|l| l.norm() > EIG_MAGNITUDE_FLOOR)
        .count();
    if good < r {
        return Err(Error::Rank {
            requested: r,
            achievable: good,
        });
    }
    let cont_eigs: Vec<Complex64> = lambdas.iter().map(|l| l.ln() / dt).collect();

    let y_vs_c = y_vs.mapv(|v| Complex64::new(v, 0.0));
    let modes = y_vs_c.dot(&eigvecs);

    let (_, mode_sigma, _) = thin_svd_c(&modes)?;
    if mode_sigma[r - 1] <= mode_sigma[0] * MODE_RANK_RTOL {
        let numeric = mode_sigma
            .iter()
            .filter(|&&s| s > mode_sigma[0] * MODE_RANK_RTOL)
            .count();
        return Err(Error::Rank {
            requested: r,
            achievable: numeric,
        });
    }

    let z0 = Array2::from_shape_fn((m, 1), |(i, _)| Complex64::new(z.values[(i, 0)], 0.0));
    let b = lstsq_c(&modes, &z0);
    let amplitudes = (0..r).map(|j| b[(j, 0)]).collect();

    Ok(DmdModel {
        rank: r,
        modes,
        cont_eigs,
        amplitudes,
        dt,
        t_start: z.t_grid[0],
    })
}

/// Evaluates the model on a time grid: column k is
/// `modes * (amplitudes .* exp(cont_eigs * (t_k - t_start)))`.
pub fn reconstruct(model: &DmdModel, t_grid: &[f64]) -> Array2<Complex64> {
    let r = model.rank;
    let mut dynamics = Array2::zeros((r, t_grid.len()));
    for (k, &t) in t_grid.iter().enumerate() {
        let elapsed = t - model.t_start;
        for j in 0..r {
            dynamics[(j, k)] = model.amplitudes[j] * (model.cont_eigs[j] * elapsed).exp();
        }
    }
    model.modes.dot(&dynamics)
}

/// Real part of [`reconstruct`], for comparison with real snapshot data.
pub fn reconstruct_real(model: &DmdModel, t_grid: &[f64]) -> Array2<f64> {
    reconstruct(model, t_grid).mapv(|v| v.re)
}

/// Residual metrics of a reconstruction; `wall_time` is passed through.
pub fn error_report(z: &SnapshotMatrix, zhat: &Array2<f64>, wall_time: f64) -> Result<ErrorReport> {
    if z.values.dim() != zhat.dim() {
        return Err(Error::Shape(format!(
            "data is {:?} but reconstruction is {:?}",
            z.values.dim(),
            zhat.dim()
        )));
    }
    let n = z.values.ncols();
    let mut final_sq = 0.0;
    for i in 0..z.values.nrows() {
        let d = z.values[(i, n - 1)] - zhat[(i, n - 1)];
        final_sq += d * d;
    }
    let diff_sq: f64 = z
        .values
        .iter()
        .zip(zhat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let z_sq: f64 = z.values.iter().map(|v| v * v).sum();
    let rel_frobenius = if z_sq > 0.0 {
        (diff_sq / z_sq).sqrt()
    } else if diff_sq == 0.0 {
        0.0
    } else {
        return Err(Error::Domain(
            "relative error is undefined for all-zero data".into(),
        ));
    };
    Ok(ErrorReport {
        final_residual_2norm: final_sq.sqrt(),
        rel_frobenius,
        wall_time_seconds: wall_time,
    })
}

/// Serialized form of a [`DmdModel`] with the complex content stored as
/// separate real and imaginary planes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmdModelFile {
    pub format: String,
    pub version: u32,
    pub rank: usize,
    pub dt: f64,
    pub t_start: f64,
    pub modes_re: Vec<Vec<f64>>,
    pub modes_im: Vec<Vec<f64>>,
    pub eigs_re: Vec<f64>,
    pub eigs_im: Vec<f64>,
    pub amplitudes_re: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
}

pub const MODEL_FORMAT: &str = "splitdmd-model";
pub const MODEL_VERSION: u32 = 1;

impl From<&DmdModel> for DmdModelFile {
    fn from(model: &DmdModel) -> Self {
        let rows = |plane: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            model
                .modes
                .rows()
                .into_iter()
                .map(|row| row.iter().map(plane).collect())
                .collect()
        };
        DmdModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            rank: model.rank,
            dt: model.dt,
            t_start: model.t_start,
            modes_re: rows(|c| c.re),
            modes_im: rows(|c| c.im),
            eigs_re: model.cont_eigs.iter().map(|c| c.re).collect(),
            eigs_im: model.cont_eigs.iter().map(|c| c.im).collect(),
            amplitudes_re: model.amplitudes.iter().map(|c| c.re).collect(),
            amplitudes_im: model.amplitudes.iter().map(|c| c.im).collect(),
        }
    }
}

impl DmdModelFile {
    pub fn into_model(self) -> Result<DmdModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "unexpected model format {:?}",
                self.format
            )));
        }
        let m = self.modes_re.len();
        if self.modes_im.len() != m {
            return Err(Error::Format("mode planes disagree on row count".into()));
        }
        let r = self.rank;
        let mut modes = Array2::zeros((m, r));
        for (i, (re_row, im_row)) in self.modes_re.iter().zip(&self.modes_im).enumerate() {
            if re_row.len() != r || im_row.len() != r {
                return Err(Error::Format("mode row length does not match rank".into()));
            }
            for j in 0..r {
                modes[(i, j)] = Complex64::new(re_row[j], im_row[j]);
            }
        }
        if self.eigs_re.len() != r || self.eigs_im.len() != r {
            return Err(Error::Format("eigenvalue count does not match rank".into()));
        }
        if self.amplitudes_re.len() != r || self.amplitudes_im.len() != r {
            return Err(Error::Format("amplitude count does not match rank".into()));
        }
        Ok(DmdModel {
            rank: r,
            modes,
            cont_eigs: self
                .eigs_re
                .iter()
                .zip(&self.eigs_im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
            amplitudes: self
                .amplitudes_re
                .iter()
                .zip(&self.amplitudes_im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
            dt: self.dt,
            t_start: self.t_start,
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
