//! Optimized DMD: nonlinear least-squares fitting of complex exponentials to
//! snapshot data, with the linear coefficients eliminated by variable
//! projection and the continuous eigenvalues optimized by a damped
//! Levenberg-Marquardt iteration.
//!
//! The objective is `F(alpha) = 1/2 |Y - Psi(alpha) B(alpha)|_F^2` over the
//! time-major design matrix `Psi(alpha)[k, j] = exp(alpha_j tau_k)`, with
//! `B(alpha)` always the exact linear least-squares minimizer. Real and
//! imaginary parts of each eigenvalue are treated as independent real
//! unknowns, and the Jacobian carries the Golub-Pereyra projector correction.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::dmd::{error_report, DmdModel, ErrorReport};
use crate::error::{Error, Result};
use crate::snapshot::SnapshotMatrix;

/// Relative singular-value floor for the design-matrix pseudo-inverse.
const PROJECTOR_RTOL: f64 = 1e-12;

/// Gradient threshold (scaled by `1 + F`) below which the returned iterate
/// counts as a stationary point; anything above sets the stagnation flag.
const STATIONARY_GRAD_TOL: f64 = 1e-6;

/// `Re(alpha)` is clamped to this multiple of `1 / t_span` to keep
/// `exp(alpha * t)` representable during the iteration.
const REAL_PART_CLAMP_SCALE: f64 = 10.0;

/// Damping schedule and stopping rules for the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarproConfig {
    pub max_iters: usize,
    /// Stop when `|R|_F <= tol_residual * (1 + |Y|_F)`.
    pub tol_residual: f64,
    /// Stop when an accepted step decreases the objective by less than this
    /// relative amount.
    pub tol_decrease: f64,
    pub lambda_init: f64,
    /// Multiplier applied to the damping after an accepted step; in (0, 1).
    pub lambda_down: f64,
    /// Multiplier applied after a rejected step; > 1.
    pub lambda_up: f64,
    /// Damping beyond this aborts the iteration with a stagnation report.
    pub max_lambda: f64,
}

impl Default for VarproConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol_residual: 1e-10,
            tol_decrease: 1e-10,
            lambda_init: 1.0,
            lambda_down: 1.0 / 3.0,
            lambda_up: 3.0,
            max_lambda: 1e12,
        }
    }
}

impl VarproConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.tol_residual > 0.0) || !(self.tol_decrease > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.lambda_init > 0.0) || !(self.max_lambda > 0.0) {
            return Err(Error::Config("damping parameters must be positive".into()));
        }
        if !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return Err(Error::Config("lambda_down must lie in (0, 1)".into()));
        }
        if !(self.lambda_up > 1.0) {
            return Err(Error::Config("lambda_up must exceed 1".into()));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    ResidualTolerance,
    DecreaseTolerance,
    MaxIterations,
    DampingOverflow,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::ResidualTolerance => "residual_tolerance",
            StopReason::DecreaseTolerance => "decrease_tolerance",
            StopReason::MaxIterations => "max_iterations",
            StopReason::DampingOverflow => "damping_overflow",
        };
        f.write_str(s)
    }
}

/// One row of the per-iteration diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    pub iteration: usize,
    pub lambda: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptdmdDiagnostics {
    pub stop: StopReason,
    pub iterations: usize,
    /// Set when the returned point is not stationary to working tolerance.
    pub stagnated: bool,
    /// Set when the real-part clamp activated during the iteration.
    pub clamped: bool,
    /// Set when the design matrix went rank-deficient and the regularized
    /// pseudo-inverse path was taken.
    pub projector_regularized: bool,
    pub trace: Vec<IterTrace>,
}

pub struct OptdmdFit {
    pub model: DmdModel,
    pub report: ErrorReport,
    pub diagnostics: OptdmdDiagnostics,
}

/// The projected least-squares functional for a fixed data matrix, exposed
/// for gradient checking and reuse across iterations.
pub struct VarproProblem {
    /// Snapshot times relative to the interval origin.
    taus: Vec<f64>,
    /// Transposed data: rows are times, columns are spatial nodes.
    data_t: Mat<Complex64>,
    rank: usize,
    data_norm: f64,
}

struct Evaluation {
    objective: f64,
    residual_norm: f64,
    /// r x m linear coefficients.
    b: Mat<Complex64>,
    /// n_t x m projected residual.
    residual: Mat<Complex64>,
    /// n_t x r: columns `(I - P) d_j`.
    u_cols: Mat<Complex64>,
    /// n_t x r: columns of `(Psi^+)^H`.
    v_cols: Mat<Complex64>,
    /// r x m: rows `d_j^H R`.
    w_rows: Mat<Complex64>,
    rank_deficient: bool,
}

impl VarproProblem {
    pub fn new(z: &SnapshotMatrix, rank: usize) -> Result<Self> {
        z.validate()?;
        let (m, n) = z.values.dim();
        if rank == 0 {
            return Err(Error::Domain("rank must be positive".into()));
        }
        if n < rank + 1 {
            return Err(Error::Shape(format!(
                "need at least {} snapshot columns for rank {}, got {}",
                rank + 1,
                rank,
                n
            )));
        }
        let t0 = z.t_grid[0];
        let taus: Vec<f64> = z.t_grid.iter().map(|&t| t - t0).collect();
        let data_t = Mat::from_fn(n, m, |k, i| Complex64::new(z.values[(i, k)], 0.0));
        let data_norm = z.frobenius_norm();
        Ok(Self {
            taus,
            data_t,
            rank,
            data_norm,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_times(&self) -> usize {
        self.taus.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.data_t.ncols()
    }

    pub fn data_norm(&self) -> f64 {
        self.data_norm
    }

    pub fn time_span(&self) -> f64 {
        *self.taus.last().unwrap()
    }

    fn design_matrix(&self, alpha: &[Complex64]) -> Mat<Complex64> {
        Mat::from_fn(self.taus.len(), self.rank, |k, j| {
            (alpha[j] * self.taus[k]).exp()
        })
    }

    fn evaluate(&self, alpha: &[Complex64]) -> Result<Evaluation> {
        let n_t = self.taus.len();
        let m = self.data_t.ncols();
        let r = self.rank;
        let psi = self.design_matrix(alpha);
        let svd = psi
            .thin_svd()
            .map_err(|e| Error::Shape(format!("design-matrix svd failed: {e:?}")))?;
        let s0 = svd.S()[0].re.max(f64::MIN_POSITIVE);
        let kept = (0..r)
            .take_while(|&i| svd.S()[i].re > s0 * PROJECTOR_RTOL)
            .count()
            .max(1);
        let rank_deficient = kept < r;
        let u = svd.U().subcols(0, kept);
        let v = svd.V().subcols(0, kept);

        // B = V S^-1 U^H Y, with the pseudo-inverse truncated at `kept`.
        let uh_y = u.adjoint() * &self.data_t;
        let mut s_inv_uh_y = uh_y;
        for i in 0..kept {
            let inv = 1.0 / svd.S()[i].re;
            for c in 0..m {
                s_inv_uh_y[(i, c)] *= inv;
            }
        }
        let b = v * &s_inv_uh_y;
        let residual = &self.data_t - &psi * &b;

        let mut obj = 0.0;
        for c in 0..m {
            for k in 0..n_t {
                obj += residual[(k, c)].norm_sqr();
            }
        }
        let residual_norm = obj.sqrt();
        let objective = 0.5 * obj;
        if !objective.is_finite() {
            return Err(Error::Init(
                "objective is not finite at the evaluation point".into(),
            ));
        }

        // d_j = tau .* psi_j, assembled as a matrix.
        let d = Mat::from_fn(n_t, r, |k, j| psi[(k, j)] * self.taus[k]);
        // u_cols = (I - U U^H) D.
        let uh_d = u.adjoint() * &d;
        let u_cols = &d - u * &uh_d;
        // v_cols = U S^-1 V^H (columns indexed by j).
        let mut s_inv_vh = v.adjoint().to_owned();
        for i in 0..kept {
            let inv = 1.0 / svd.S()[i].re;
            for j in 0..r {
                s_inv_vh[(i, j)] *= inv;
            }
        }
        let v_cols = u * &s_inv_vh;
        // w_rows = D^H R.
        let w_rows = d.adjoint() * &residual;

        Ok(Evaluation {
            objective,
            residual_norm,
            b,
            residual,
            u_cols,
            v_cols,
            w_rows,
            rank_deficient,
        })
    }

    pub fn objective(&self, alpha: &[Complex64]) -> Result<f64> {
        Ok(self.evaluate(alpha)?.objective)
    }

    /// Real-stacked residual vector (all real parts, then all imaginary
    /// parts, row-major over the time-by-space residual).
    pub fn residual_real(&self, alpha: &[Complex64]) -> Result<Array1<f64>> {
        let ev = self.evaluate(alpha)?;
        Ok(self.stack_residual(&ev))
    }

    fn stack_residual(&self, ev: &Evaluation) -> Array1<f64> {
        let n_t = self.taus.len();
        let m = self.data_t.ncols();
        let n = n_t * m;
        let mut out = Array1::zeros(2 * n);
        for k in 0..n_t {
            for c in 0..m {
                out[k * m + c] = ev.residual[(k, c)].re;
                out[n + k * m + c] = ev.residual[(k, c)].im;
            }
        }
        out
    }

    /// Dense real Jacobian of the real-stacked residual with respect to the
    /// interleaved parameters `[Re a_0, Im a_0, Re a_1, ...]`. Each complex
    /// column carries the projector correction alongside the direct term:
    /// `-((I-P) d_j b_j + (Psi^+)^H d_j^H R)` for the real direction and the
    /// `+-i`-twisted combination for the imaginary one.
    pub fn jacobian_dense(&self, alpha: &[Complex64]) -> Result<Array2<f64>> {
        let ev = self.evaluate(alpha)?;
        Ok(self.assemble_jacobian(&ev))
    }

    fn assemble_jacobian(&self, ev: &Evaluation) -> Array2<f64> {
        let n_t = self.taus.len();
        let m = self.data_t.ncols();
        let r = self.rank;
        let n = n_t * m;
        let mut jac = Array2::zeros((2 * n, 2 * r));
        for j in 0..r {
            for (p, (phi, chi)) in [
                (Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0)),
                (Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)),
            ]
            .iter()
            .enumerate()
            {
                let col = 2 * j + p;
                for k in 0..n_t {
                    for c in 0..m {
                        let val = phi * ev.u_cols[(k, j)] * ev.b[(j, c)]
                            + chi * ev.v_cols[(k, j)] * ev.w_rows[(j, c)];
                        jac[(k * m + c, col)] = val.re;
                        jac[(n + k * m + c, col)] = val.im;
                    }
                }
            }
        }
        jac
    }
}

/// Solves the damped normal equations `(G + lambda diag(G)) d = -grad`.
/// A singular damped matrix is reported so the caller can raise the damping.
pub fn lm_step_normal(
    gram: &Array2<f64>,
    grad: &Array1<f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    let n = grad.len();
    let damped = Mat::from_fn(n, n, |i, j| {
        let base = gram[(i, j)];
        if i == j {
            // Keep the system nonsingular when a diagonal entry underflows.
            base + lambda * base.max(f64::MIN_POSITIVE)
        } else {
            base
        }
    });
    let llt = Llt::new(damped.as_ref(), Side::Lower)
        .map_err(|_| Error::Domain("damped normal matrix is not positive definite".into()))?;
    let rhs = Mat::from_fn(n, 1, |i, _| -grad[i]);
    let sol = llt.solve(&rhs);
    Ok(Array1::from_shape_fn(n, |i| sol[(i, 0)]))
}

/// Levenberg-Marquardt step from an explicit Jacobian and residual.
pub fn lm_step(jac: &Array2<f64>, residual: &Array1<f64>, lambda: f64) -> Result<Array1<f64>> {
    if jac.nrows() != residual.len() {
        return Err(Error::Shape(format!(
            "jacobian has {} rows but residual has {} entries",
            jac.nrows(),
            residual.len()
        )));
    }
    let gram = jac.t().dot(jac);
    let grad = jac.t().dot(residual);
    lm_step_normal(&gram, &grad, lambda)
}

/// Optimized DMD of a snapshot matrix at rank `r`.
///
/// When `init` is absent the continuous eigenvalues of [`crate::exact_dmd`]
/// seed the iteration. The best iterate is always returned; stagnation is
/// reported through the diagnostics rather than an error.
pub fn optdmd(
    z: &SnapshotMatrix,
    r: usize,
    init: Option<&[Complex64]>,
    cfg: &VarproConfig,
) -> Result<OptdmdFit> {
    cfg.validate()?;
    let started = Instant::now();
    let problem = VarproProblem::new(z, r)?;
    let mut alpha: Vec<Complex64> = match init {
        Some(a) => {
            if a.len() != r {
                return Err(Error::Shape(format!(
                    "init has {} eigenvalues, expected {}",
                    a.len(),
                    r
                )));
            }
            a.to_vec()
        }
        None => crate::dmd::exact_dmd(z, r)?.cont_eigs,
    };

    let clamp = REAL_PART_CLAMP_SCALE / problem.time_span();
    let mut clamped = clamp_real_parts(&mut alpha, clamp);

    let mut ev = problem
        .evaluate(&alpha)
        .map_err(|e| Error::Init(format!("initial evaluation failed: {e}")))?;
    let mut projector_regularized = ev.rank_deficient;
    let mut lambda = cfg.lambda_init;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let residual_target = cfg.tol_residual * (1.0 + problem.data_norm());

    let stop = 'outer: loop {
        if ev.residual_norm <= residual_target {
            break StopReason::ResidualTolerance;
        }
        if iterations >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        iterations += 1;

        // One dense Jacobian per iteration; damping retries reuse its
        // normal-equation factors.
        let jac = problem.assemble_jacobian(&ev);
        let rho = problem.stack_residual(&ev);
        let gram = jac.t().dot(&jac);
        let grad = jac.t().dot(&rho);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

        // Retry with increased damping until a step decreases the objective.
        loop {
            if lambda > cfg.max_lambda {
                break 'outer StopReason::DampingOverflow;
            }
            let step = match lm_step_normal(&gram, &grad, lambda) {
                Ok(step) => step,
                Err(_) => {
                    lambda *= cfg.lambda_up;
                    continue;
                }
            };
            let mut candidate = alpha.clone();
            for j in 0..r {
                candidate[j] += Complex64::new(step[2 * j], step[2 * j + 1]);
            }
            clamped |= clamp_real_parts(&mut candidate, clamp);
            let cand_ev = match problem.evaluate(&candidate) {
                Ok(e) => e,
                Err(_) => {
                    trace.push(IterTrace {
                        iteration: iterations,
                        lambda,
                        objective: ev.objective,
                        grad_norm,
                        accepted: false,
                    });
                    lambda *= cfg.lambda_up;
                    continue;
                }
            };
            if cand_ev.objective < ev.objective {
                let decrease = ev.objective - cand_ev.objective;
                let rel_decrease = decrease / ev.objective.max(f64::MIN_POSITIVE);
                alpha = candidate;
                projector_regularized |= cand_ev.rank_deficient;
                ev = cand_ev;
                lambda = (lambda * cfg.lambda_down).max(f64::MIN_POSITIVE);
                trace.push(IterTrace {
                    iteration: iterations,
                    lambda,
                    objective: ev.objective,
                    grad_norm,
                    accepted: true,
                });
                if rel_decrease < cfg.tol_decrease {
                    break 'outer StopReason::DecreaseTolerance;
                }
                break;
            }
            trace.push(IterTrace {
                iteration: iterations,
                lambda,
                objective: cand_ev.objective,
                grad_norm,
                accepted: false,
            });
            lambda *= cfg.lambda_up;
        }
    };

    // Final stationarity assessment at the returned iterate.
    let final_jac = problem.assemble_jacobian(&ev);
    let final_rho = problem.stack_residual(&ev);
    let final_grad = final_jac.t().dot(&final_rho);
    let final_grad_norm = final_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let stagnated = final_grad_norm > STATIONARY_GRAD_TOL * (1.0 + ev.objective)
        && stop != StopReason::ResidualTolerance;

    let model = model_from_solution(z, &alpha, &ev.b)?;
    let wall = started.elapsed().as_secs_f64();
    let zhat = crate::dmd::reconstruct_real(&model, &z.t_grid);
    let report = error_report(z, &zhat, wall)?;

    Ok(OptdmdFit {
        model,
        report,
        diagnostics: OptdmdDiagnostics {
            stop,
            iterations,
            stagnated,
            clamped,
            projector_regularized,
            trace,
        },
    })
}

fn clamp_real_parts(alpha: &mut [Complex64], clamp: f64) -> bool {
    let mut any = false;
    for a in alpha {
        if a.re > clamp {
            *a = Complex64::new(clamp, a.im);
            any = true;
        }
    }
    any
}

/// Builds the interval model from the optimized eigenvalues and linear
/// coefficients: mode j is the normalized j-th row of B, with the norm moved
/// into the amplitude.
fn model_from_solution(
    z: &SnapshotMatrix,
    alpha: &[Complex64],
    b: &Mat<Complex64>,
) -> Result<DmdModel> {
    let r = alpha.len();
    let m = b.ncols();
    let mut modes = Array2::zeros((m, r));
    let mut amplitudes = Vec::with_capacity(r);
    for j in 0..r {
        let norm: f64 = (0..m).map(|c| b[(j, c)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in 0..m {
                modes[(c, j)] = b[(j, c)] / norm;
            }
            amplitudes.push(Complex64::new(norm, 0.0));
        } else {
            amplitudes.push(Complex64::default());
        }
    }
    Ok(DmdModel {
        rank: r,
        modes,
        cont_eigs: alpha.to_vec(),
        amplitudes,
        dt: z.dt()?,
        t_start: z.t_grid[0],
    })
}
