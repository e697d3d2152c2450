//! Dynamic blind source extraction with a convexly blended mixing vector.
//!
//! The crate covers the mixing/demixing model, the Fisher information of the
//! separating-vector parameters, Cramer-Rao-induced bounds on the mean
//! interference-to-signal ratio (CRIB) for the convex model, the free
//! per-block (CSV) model and block-wise static extraction, plus a simulator
//! and a maximum-likelihood extractor used to check the bounds empirically.

pub mod error;
pub mod fim;
pub mod ggd;
pub mod mle;
pub mod model;
pub mod numerics;
mod serde_complex;
pub mod simulate;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
pub use fim::{crib_model, CribResult, CribSetup, FimBlocks, ModelKind, SourceProfile};
pub use ggd::GgdParams;
pub use model::{BlendingSchedule, MixingPath, SeparatingVector};
pub use numerics::{BlockPartition, CMatrix, CVector, C64};
pub use mle::{fit, FitOptions, FitReport, ThetaCvx};
pub use simulate::{generate, Dataset, MixtureConfig};
pub use sweep::{run_sweep, ResultRow, SweepSpec};
pub use validation::{run_suite, Suite, SuiteReport};
