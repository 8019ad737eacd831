//! Joint active-user detection, channel estimation, and data detection (JACD)
//! for grant-free massive access in cell-free systems.
//!
//! The crate is organized around a box-constrained forward-backward splitting
//! solver and the simulation machinery needed to evaluate it:
//!
//! - [`scenario`] synthesizes cell-free mMTC problem instances (geometry,
//!   fading, pilots, activity, data, received signal) from a config and a seed.
//! - [`objective`] and [`prox`] hold the math core: the smooth objective and
//!   its gradient, and the two proximal operators (group shrinkage for channel
//!   blocks, box-constrained group shrinkage for data rows).
//! - [`solver`] is the FBS iteration engine with backtracking and optional
//!   Barzilai-Borwein steps, plus activity detection and symbol hardening.
//! - [`baselines`] implements the comparison schemes: pilot-only AUD-CE
//!   followed by zero-forcing detection, and JACD without data sparsity.
//! - [`metrics`] computes UMR, NMSE, ASER, and CSER.
//! - [`oracle`] holds independent reference implementations (numeric
//!   minimizers, finite differences) used by self-tests; they deliberately
//!   avoid the closed forms used by the production code paths.

pub mod baselines;
pub mod linalg;
pub mod matio;
pub mod metrics;
pub mod objective;
pub mod oracle;
pub mod prox;
pub mod rng;
pub mod scenario;
pub mod solver;

pub use num_complex::Complex64;

pub use metrics::TrialMetrics;
pub use scenario::{GroundTruth, ReceivedSignal, ScenarioConfig};
pub use solver::{Estimate, SolverConfig};
