//! Piecewise dynamic mode decomposition for snapshot data whose coherent
//! structures change over time.
//!
//! The crate bundles:
//! - a Kuramoto-Sivashinsky snapshot generator ([`ks`]),
//! - exact DMD with reconstruction and error metrics ([`dmd`]),
//! - optimized DMD via variable-projection Levenberg-Marquardt ([`optdmd`]),
//! - recursive range-based time segmentation ([`nsplit`]),
//! - a driver fitting one model per subinterval ([`split`]).

mod linalg;

pub mod dmd;
pub mod error;
pub mod ks;
pub mod nsplit;
pub mod optdmd;
pub mod snapshot;
pub mod split;

pub use dmd::{error_report, exact_dmd, reconstruct, reconstruct_real, DmdModel, ErrorReport};
pub use error::{Error, Result};
pub use ks::{initial_condition, initial_profile, nondimensionalize, simulate_ks, KsConfig, KsSim};


pub use nsplit::{
    delta_test, epsilon_test, n_split, robust_split, robust_split_detailed, subinterval_range,
    NsplitConfig, NsplitOutcome, ProbeRecord, RobustSplitReport, SplitSet,
};
pub use optdmd::{lm_step, optdmd, IterTrace, OptdmdDiagnostics, OptdmdFit, StopReason, VarproConfig, VarproProblem};
pub use snapshot::{SnapshotContainer, SnapshotMatrix};
pub use split::{
    reconstruct_split, shift_splits, split_dmd, FitMethod, SplitDmdModel, SplitDmdModelFile,
    SplitSpec,
};

