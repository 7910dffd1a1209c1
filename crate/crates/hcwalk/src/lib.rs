//! Effective limit models of symmetric random walks in high-contrast
//! periodic environments.
//!
//! The crate turns a periodic environment description (fast jump weights
//! `p0`, contrast couplings `v`) into the effective model of its diffusive
//! limit — per-component diffusion matrices, jump intensities, and the
//! embedded jump chain — and provides simulators and comparison statistics
//! for both the microscale walk and the limit hybrid diffusion/jump process.

pub mod analysis;
pub mod connectivity;
pub mod corrector;
pub mod environment;
pub mod geometry;
pub mod lemma;
pub mod linalg;
pub mod presets;
pub mod simulate;
pub mod solver;
pub mod stats;
pub mod testfn;

pub use connectivity::LiftVerdict;
pub use corrector::{solve_effective_model, CorrectorSet, EffectiveModel};
pub use environment::{validate_spec, Environment, EnvironmentSpec, ValidationReport};
pub use geometry::TorusGeometry;
pub use lemma::{lemma_residual, LemmaReport};
pub use simulate::{
    limit_expectation, run_limit, run_walk, semigroup_apply, RngStream, Trajectory,
};
pub use testfn::{TestFn, TestTuple};
