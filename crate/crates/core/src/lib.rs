//! Laboratory for the sparse integer least squares problem (SILS):
//!
//! ```text
//! minimise (1/n)‖Mx − b‖²   over x ∈ {0, ±1}^d with ‖x‖₀ = σ
//! ```
//!
//! The crate bundles a brute-force oracle, an ℓ₁-augmented semidefinite
//! relaxation solved by two-block ADMM, dual-certificate construction and
//! verification for the family of sufficient recovery conditions, synthetic
//! data models, Lasso / Dantzig-selector baselines, the exact-cover hardness
//! reduction and a deterministic experiment harness.

pub mod baselines;
pub mod certificates;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod generators;
pub mod hardness;
pub mod instance;
pub mod linalg;
pub mod rng;
pub mod sdp;

pub use error::{Result, SilsError};
pub use instance::{GroundTruth, MetricsRow, SilsInstance, SparseSignVector};
