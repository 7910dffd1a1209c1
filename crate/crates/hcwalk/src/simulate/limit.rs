//! Event-driven simulation of the limit hybrid process: exponential holding
//! times between label jumps, Brownian motion with per-component covariance
//! `2 Theta` while the label is fast, frozen position while it is astral.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use super::{RngStream, SimError, Trajectory, TrajectoryKind};
use crate::corrector::EffectiveModel;
use crate::linalg::{self, Matrix};
use crate::stats::McEstimate;
use crate::testfn::TestTuple;

/// Shared sampling tables: Cholesky factors of `2 Theta_i` and per-row jump
/// CDFs of the embedded chain.
pub struct LimitSampler<'m> {
    model: &'m EffectiveModel,
    /// lower-triangular factor L with L L^T = 2 Theta_i, per fast component
    chol: Vec<Matrix>,
    jump_cdf: Vec<Vec<f64>>,
}

impl<'m> LimitSampler<'m> {
    pub fn new(model: &'m EffectiveModel) -> Result<Self, SimError> {
        let mut chol = Vec::with_capacity(model.n_fast);
        for (i, theta) in model.theta.iter().enumerate() {
            let doubled = theta.scale(2.0);
            let l = linalg::cholesky_lower(&doubled).ok_or_else(|| {
                SimError::BadModel(format!("2*theta[{i}] is not positive definite"))
            })?;
            chol.push(l);
        }
        let k = model.n_labels();
        let mut jump_cdf = Vec::with_capacity(k);
        for i in 0..k {
            if model.lambda[i] <= 0.0 {
                return Err(SimError::BadModel(format!("lambda[{i}] must be positive")));
            }
            let mut acc = 0.0;
            let row: Vec<f64> = (0..k)
                .map(|j| {
                    acc += model.mu[(i, j)];
                    acc
                })
                .collect();
            jump_cdf.push(row);
        }
        Ok(LimitSampler {
            model,
            chol,
            jump_cdf,
        })
    }

    fn holding_time<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> f64 {
        Exp::new(self.model.lambda[label]).unwrap().sample(rng)
    }

    pub fn sample_jump<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.jump_cdf[label];
        row.partition_point(|&c| c < u).min(row.len() - 1)
    }

    /// Brownian increment over `dt` for a fast label, added in place.
    fn diffuse<R: Rng + ?Sized>(&self, label: usize, dt: f64, x: &mut [f64], rng: &mut R) {
        debug_assert!(self.model.is_fast_label(label));
        let d = x.len();
        let l = &self.chol[label];
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = dt.sqrt();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            x[i] += s * acc;
        }
    }
}

/// Simulate the limit process from `(x0, k0)` up to `t_final`, recording the
/// state at time zero, every event time, every grid time, and `t_final`.
///
/// Grid values are exact: Brownian increments are sampled per sub-interval
/// between recording points, never interpolated.
pub fn run_limit(
    model: &EffectiveModel,
    start: (&[f64], usize),
    t_final: f64,
    grid: &[f64],
    stream: RngStream,
) -> Result<Trajectory, SimError> {
    let sampler = LimitSampler::new(model)?;
    let mut rng = stream.rng();
    let (x0, k0) = start;
    assert_eq!(x0.len(), model.dim);
    assert!(k0 < model.n_labels());

    let mut x = x0.to_vec();
    let mut label = k0;
    let mut t = 0.0f64;
    let mut times = vec![0.0];
    let mut positions = vec![x.clone()];
    let mut labels = vec![label];
    let mut grid_iter = grid.iter().copied().filter(|&g| g > 0.0 && g <= t_final);
    let mut next_grid = grid_iter.next();

    let advance = |x: &mut Vec<f64>,
                       label: usize,
                       from: f64,
                       to: f64,
                       rng: &mut rand_chacha::ChaCha8Rng| {
        if to > from && model.is_fast_label(label) {
            sampler.diffuse(label, to - from, x, rng);
        }
    };

    loop {
        let hold = sampler.holding_time(label, &mut rng);
        let event_time = t + hold;
        // record grid points inside the holding interval
        while let Some(g) = next_grid {
            if g >= event_time.min(t_final) {
                break;
            }
            advance(&mut x, label, t, g, &mut rng);
            t = g;
            times.push(t);
            positions.push(x.clone());
            labels.push(label);
            next_grid = grid_iter.next();
        }
        if event_time >= t_final {
            advance(&mut x, label, t, t_final, &mut rng);
            t = t_final;
            if times.last().map(|&lt| lt < t_final).unwrap_or(true) {
                times.push(t);
                positions.push(x.clone());
                labels.push(label);
            }
            break;
        }
        advance(&mut x, label, t, event_time, &mut rng);
        t = event_time;
        label = sampler.sample_jump(label, &mut rng);
        times.push(t);
        positions.push(x.clone());
        labels.push(label);
    }

    Ok(Trajectory {
        kind: TrajectoryKind::Limit,
        times,
        positions,
        labels,
    })
}

/// States of one limit path at the requested (sorted) times.
pub fn limit_positions_at(
    model: &EffectiveModel,
    start: (&[f64], usize),
    times: &[f64],
    stream: RngStream,
) -> Result<Vec<(Vec<f64>, usize)>, SimError> {
    let t_final = times.last().copied().unwrap_or(0.0);
    let traj = run_limit(model, start, t_final.max(1e-12), times, stream)?;
    Ok(times
        .iter()
        .map(|&t| {
            let (p, k) = traj.state_at(t);
            (p.to_vec(), k)
        })
        .collect())
}

/// Sample `n_jumps` transitions of the embedded jump chain, returning the
/// visited label sequence (length `n_jumps + 1`).
pub fn sample_jump_chain(
    model: &EffectiveModel,
    start_label: usize,
    n_jumps: usize,
    stream: RngStream,
) -> Result<Vec<usize>, SimError> {
    let sampler = LimitSampler::new(model)?;
    let mut rng = stream.rng();
    let mut seq = Vec::with_capacity(n_jumps + 1);
    let mut label = start_label;
    seq.push(label);
    for _ in 0..n_jumps {
        label = sampler.sample_jump(label, &mut rng);
        seq.push(label);
    }
    Ok(seq)
}

/// Monte Carlo estimate of `E[F(X(t))]` for the limit process, with a 99%
/// normal-approximation confidence half-width. Paths are parallelized over
/// stream ids with a deterministic reduction order.
pub fn limit_expectation(
    model: &EffectiveModel,
    tuple: &TestTuple,
    start: (&[f64], usize),
    t: f64,
    n_paths: usize,
    stream: RngStream,
) -> Result<McEstimate, SimError> {
    if n_paths < 100 {
        return Err(SimError::TooFewPaths {
            min: 100,
            got: n_paths,
        });
    }
    let (x0, k0) = start;
    if t == 0.0 {
        let v = tuple.eval(x0, k0);
        return Ok(McEstimate {
            mean: v,
            std_error: 0.0,
            n: n_paths,
        });
    }
    let x0 = x0.to_vec();
    let samples: Result<Vec<f64>, SimError> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let states = limit_positions_at(model, (&x0, k0), &[t], stream.offset(i as u64))?;
            let (p, k) = &states[0];
            Ok(tuple.eval(p, *k))
        })
        .collect();
    Ok(McEstimate::from_samples(&samples?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::solve_effective_model;
    use crate::environment::Environment;
    use crate::presets;
    use crate::stats;

    fn one_dimensional_model() -> EffectiveModel {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        solve_effective_model(&env).unwrap().0
    }

    /// Fast-only model: one label, self-loop forbidden by lambda > 0, so use
    /// two fast components with tiny cross rate to emulate pure diffusion.
    fn pure_diffusion_model(theta: f64) -> EffectiveModel {
        EffectiveModel {
            dim: 1,
            n_fast: 2,
            n_astral: 0,
            component_sizes: vec![1, 1],
            theta: vec![
                Matrix::from_flat(1, vec![theta]),
                Matrix::from_flat(1, vec![theta]),
            ],
            alpha: Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            lambda: vec![1.0, 1.0],
            mu: Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        }
    }

    #[test]
    fn astral_holding_freezes_position() {
        let model = one_dimensional_model();
        for s in 0..200 {
            let traj = run_limit(&model, (&[0.5], 1), 2.0, &[], RngStream::new(13, s)).unwrap();
            for w in 0..traj.len() - 1 {
                if traj.labels[w] == 1 {
                    assert_eq!(traj.positions[w], traj.positions[w + 1]);
                }
            }
        }
    }

    #[test]
    fn short_horizon_before_first_event_stays_put() {
        let model = one_dimensional_model();
        // the first Exp(2) draw under this seed exceeds the horizon
        let stream = RngStream::new(99, 0);
        let mut rng = stream.rng();
        let sampler = LimitSampler::new(&model).unwrap();
        let first_hold = sampler.holding_time(1, &mut rng);
        let t_final = first_hold * 0.5;
        let traj = run_limit(&model, (&[0.0], 1), t_final, &[], stream).unwrap();
        assert!(traj.labels.iter().all(|&k| k == 1));
        assert!(traj.positions.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn diffusion_variance_matches_two_theta_t() {
        // both labels diffuse with the same theta, so the label dynamics do
        // not disturb the variance: Var(X_t) = 2 theta t exactly
        let theta = 1.7;
        let model = pure_diffusion_model(theta);
        let t = 0.8;
        let n = 40_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let s =
                    limit_positions_at(&model, (&[0.0], 0), &[t], RngStream::new(21, i)).unwrap();
                s[0].0[0]
            })
            .collect();
        let mean = stats::mean(&samples);
        let var = stats::variance(&samples);
        let expect = 2.0 * theta * t;
        // variance of the sample variance for a Gaussian: 2 sigma^4 / (n-1)
        let sd_var = (2.0 * expect * expect / (n as f64 - 1.0)).sqrt();
        assert!(mean.abs() < 4.0 * (expect / n as f64).sqrt(), "mean {mean}");
        assert!((var - expect).abs() < 4.0 * sd_var, "var {var} vs {expect}");
    }

    #[test]
    fn expectation_of_constant_is_exact() {
        let model = one_dimensional_model();
        let tuple = TestTuple::constant(2, 2.5);
        let est =
            limit_expectation(&model, &tuple, (&[0.0], 0), 1.0, 500, RngStream::new(3, 0)).unwrap();
        assert_eq!(est.mean, 2.5);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn expectation_at_time_zero_is_pointwise() {
        let model = one_dimensional_model();
        let tuple = TestTuple::gaussian(2, 1);
        let est =
            limit_expectation(&model, &tuple, (&[0.3], 0), 0.0, 100, RngStream::new(3, 0)).unwrap();
        assert_eq!(est.mean, (-0.09f64).exp());
        assert!(limit_expectation(&model, &tuple, (&[0.0], 0), 1.0, 50, RngStream::new(3, 0))
            .is_err());
    }

    #[test]
    fn gaussian_expectation_matches_heat_kernel() {
        // pure diffusion: X_t ~ N(0, 2 theta t);
        // E[exp(-X^2 / w)] = (1 + 2 sigma^2 / w)^(-1/2)
        let theta = 1.0;
        let model = pure_diffusion_model(theta);
        let t = 0.5;
        let tuple = TestTuple::new(
            "gauss",
            vec![
                crate::testfn::TestFn::Gaussian {
                    center: vec![0.0],
                    width: 1.0,
                },
                crate::testfn::TestFn::Gaussian {
                    center: vec![0.0],
                    width: 1.0,
                },
            ],
        );
        let est = limit_expectation(&model, &tuple, (&[0.0], 0), t, 100_000, RngStream::new(8, 0))
            .unwrap();
        let sigma_sq = 2.0 * theta * t;
        let exact = (1.0 + 2.0 * sigma_sq).powf(-0.5);
        assert!(
            (est.mean - exact).abs() < est.three_sigma(),
            "mean {} vs exact {exact} (3se {})",
            est.mean,
            est.three_sigma()
        );
    }

    #[test]
    fn reproducible_across_thread_pools() {
        let model = one_dimensional_model();
        let tuple = TestTuple::gaussian(2, 1);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                limit_expectation(&model, &tuple, (&[0.0], 0), 0.7, 2000, RngStream::new(5, 0))
                    .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }
}
