//! Microscale random walk on the scaled lattice.

use rand::Rng;

use super::{steps_for, RngStream, SimError, Trajectory, TrajectoryKind};
use crate::environment::Environment;

/// Per-cell CDF tables over the stored offsets plus the stay-put bucket,
/// built once per contrast parameter.
pub struct WalkSampler<'e> {
    env: &'e Environment,
    eps: f64,
    /// per cell: cumulative probabilities aligned with the stored row;
    /// anything above the last entry means "stay".
    cdf: Vec<Vec<f64>>,
}

impl<'e> WalkSampler<'e> {
    pub fn new(env: &'e Environment, eps: f64) -> Result<Self, SimError> {
        if !(eps > 0.0) || eps > env.eps_max() + 1e-12 {
            return Err(SimError::EpsOutOfRange {
                eps,
                eps_max: env.eps_max(),
            });
        }
        let cell_count = env.geometry().cell_count();
        let mut cdf = Vec::with_capacity(cell_count);
        for cell in 0..cell_count {
            let mut acc = 0.0f64;
            let mut row = Vec::with_capacity(env.row(cell).len());
            for e in env.row(cell) {
                let p = (e.p0 + eps * eps * e.v).max(0.0);
                acc += p;
                row.push(acc);
            }
            // total mass including the stay-put weight; renormalize so the
            // final bucket closes at exactly 1
            let diag = (env.p0_diag(cell) + eps * eps * env.v_diag(cell)).max(0.0);
            let total = acc + diag;
            for c in row.iter_mut() {
                *c /= total;
            }
            cdf.push(row);
        }
        Ok(WalkSampler { env, eps, cdf })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// One step from the lattice point `x` (unscaled), in place.
    pub fn step<R: Rng + ?Sized>(&self, x: &mut Vec<i64>, rng: &mut R) {
        let cell = self.env.geometry().cell_index(x);
        let u: f64 = rng.random();
        let row = &self.cdf[cell];
        let idx = row.partition_point(|&c| c < u);
        if idx < row.len() {
            let offset = &self.env.row(cell)[idx].offset;
            for (xi, oi) in x.iter_mut().zip(offset) {
                *xi += oi;
            }
        }
        // else: stay put
    }
}

/// Simulate the scaled walk from the lattice point `start` (unscaled
/// coordinates) for `floor(t / eps^2)` steps, recording every step.
pub fn run_walk(
    env: &Environment,
    eps: f64,
    t_final: f64,
    start: &[i64],
    stream: RngStream,
) -> Result<Trajectory, SimError> {
    let sampler = WalkSampler::new(env, eps)?;
    let steps = steps_for(t_final, eps);
    let mut rng = stream.rng();
    let mut x = start.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut labels = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        times.push(n as f64 * eps * eps);
        positions.push(x.iter().map(|&c| eps * c as f64).collect());
        labels.push(env.component_index(&x));
        if n < steps {
            sampler.step(&mut x, &mut rng);
        }
    }
    Ok(Trajectory {
        kind: TrajectoryKind::Microscale { eps },
        times,
        positions,
        labels,
    })
}

/// Positions and labels of one walk at the requested times only
/// (memory-light variant for large Monte Carlo runs). Times must be
/// nondecreasing.
pub fn walk_positions_at(
    env: &Environment,
    eps: f64,
    times: &[f64],
    start: &[i64],
    stream: RngStream,
) -> Result<Vec<(Vec<f64>, usize)>, SimError> {
    let sampler = WalkSampler::new(env, eps)?;
    let mut rng = stream.rng();
    let mut x = start.to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut step = 0usize;
    for &t in times {
        let target = steps_for(t, eps);
        while step < target {
            sampler.step(&mut x, &mut rng);
            step += 1;
        }
        out.push((
            x.iter().map(|&c| eps * c as f64).collect(),
            env.component_index(&x),
        ));
    }
    Ok(out)
}
