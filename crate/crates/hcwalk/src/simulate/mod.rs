//! Trajectory sampling for the microscale walk and the limit hybrid process,
//! plus the exact matrix-power semigroup on a finite window.

mod limit;
mod semigroup;
mod walk;

pub use limit::{limit_expectation, limit_positions_at, run_limit, sample_jump_chain};
pub use semigroup::{semigroup_apply, two_time_product, SemigroupField};
pub use walk::{run_walk, walk_positions_at, WalkSampler};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("eps = {eps} is outside (0, {eps_max}]")]
    EpsOutOfRange { eps: f64, eps_max: f64 },
    #[error("window radius {radius} is too small; exactness needs at least {required}")]
    WindowTooSmall { radius: f64, required: f64 },
    #[error("test tuple has unbounded support; no exact window exists")]
    UnboundedSupport,
    #[error("need at least {min} paths, got {got}")]
    TooFewPaths { min: usize, got: usize },
    #[error("{0}")]
    BadModel(String),
}

/// Seed plus stream id; one stream per trajectory makes runs reproducible
/// independently of how work is scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream with an offset id under the same seed.
    pub fn offset(&self, delta: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Microscale { eps: f64 },
    Limit,
}

/// Time-stamped sequence of (position, component label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State at time `t`: the last recorded state with time <= t.
    pub fn state_at(&self, t: f64) -> (&[f64], usize) {
        let idx = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&(t + 1e-12)).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        (&self.positions[idx], self.labels[idx])
    }
}

/// Number of discrete steps a microscale run of horizon `t` performs.
pub fn steps_for(t: f64, eps: f64) -> usize {
    (t / (eps * eps) + 1e-9).floor() as usize
}
