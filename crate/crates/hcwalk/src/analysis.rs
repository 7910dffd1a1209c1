//! Quantitative comparison of the microscale walk against the limit process,
//! and derived statistics of trajectory sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrector::EffectiveModel;
use crate::environment::Environment;
use crate::linalg::{self, Matrix};
use crate::simulate::{
    limit_expectation, limit_positions_at, semigroup_apply, walk_positions_at, RngStream,
    SimError, Trajectory,
};
use crate::stats::{self, McEstimate};
use crate::testfn::TestTuple;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("jump chain is reducible; the stationary law is not unique")]
    ReducibleChain,
    #[error("stationary solve failed: {0}")]
    SingularBalance(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

// ---------------------------------------------------------------------------
// Stationary law of the jump chain
// ---------------------------------------------------------------------------

/// Stationary probability vector of the continuous-time jump chain:
/// solves `pi Q = 0`, `sum pi = 1` with `Q = alpha` off-diagonal and
/// `Q_kk = -lambda(k)`.
pub fn stationary_k(model: &EffectiveModel) -> Result<Vec<f64>, AnalysisError> {
    let k = model.n_labels();
    // irreducibility: mutual reachability through positive intensities
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in 0..k {
                let w = if forward {
                    model.alpha[(u, v)]
                } else {
                    model.alpha[(v, u)]
                };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count
    };
    if reach(true) != k || reach(false) != k {
        return Err(AnalysisError::ReducibleChain);
    }

    // A = Q^T with the last balance equation replaced by normalization
    let mut a = Matrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = if i == j {
                -model.lambda[j]
            } else {
                model.alpha[(j, i)]
            };
        }
    }
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; k];
    b[k - 1] = 1.0;
    let pi = linalg::lu_solve(&a, &b)
        .ok_or_else(|| AnalysisError::SingularBalance("balance matrix is singular".into()))?;
    Ok(pi)
}

// ---------------------------------------------------------------------------
// Trajectory statistics
// ---------------------------------------------------------------------------

/// Time-weighted fraction spent in each label. Limit trajectories weight by
/// exact inter-record intervals; microscale records are step-spaced so the
/// same rule weights each step by eps^2.
pub fn occupation_fractions(trajectories: &[Trajectory], n_labels: usize) -> Vec<f64> {
    assert!(!trajectories.is_empty(), "no trajectories");
    let mut weight = vec![0.0f64; n_labels];
    for traj in trajectories {
        for i in 0..traj.len().saturating_sub(1) {
            weight[traj.labels[i]] += traj.times[i + 1] - traj.times[i];
        }
    }
    let total: f64 = weight.iter().sum();
    if total > 0.0 {
        for w in weight.iter_mut() {
            *w /= total;
        }
    }
    weight
}

/// Mean squared displacement from the start point at each grid time.
pub fn msd(trajectories: &[Trajectory], grid: &[f64]) -> Vec<f64> {
    assert!(!trajectories.is_empty(), "no trajectories");
    let mut out = vec![0.0f64; grid.len()];
    for traj in trajectories {
        let x0 = &traj.positions[0];
        for (gi, &t) in grid.iter().enumerate() {
            let (x, _) = traj.state_at(t);
            let d2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
            out[gi] += d2;
        }
    }
    for v in out.iter_mut() {
        *v /= trajectories.len() as f64;
    }
    out
}

/// Pooled increment statistics over all inter-record intervals that start in
/// `label`: sums of outer products, of interval lengths, and of squared
/// interval lengths (for estimator variances).
#[derive(Debug, Clone)]
pub struct IncrementStats {
    pub dim: usize,
    pub count: usize,
    pub sum_outer: Matrix,
    pub sum_dt: f64,
    pub sum_dt_sq: f64,
}

pub fn pooled_increments(trajectories: &[Trajectory], label: usize, dim: usize) -> IncrementStats {
    let mut stats = IncrementStats {
        dim,
        count: 0,
        sum_outer: Matrix::zeros(dim),
        sum_dt: 0.0,
        sum_dt_sq: 0.0,
    };
    for traj in trajectories {
        for i in 0..traj.len().saturating_sub(1) {
            if traj.labels[i] != label {
                continue;
            }
            let dt = traj.times[i + 1] - traj.times[i];
            if dt <= 0.0 {
                continue;
            }
            let a = &traj.positions[i];
            let b = &traj.positions[i + 1];
            for r in 0..dim {
                for c in 0..dim {
                    stats.sum_outer[(r, c)] += (b[r] - a[r]) * (b[c] - a[c]);
                }
            }
            stats.sum_dt += dt;
            stats.sum_dt_sq += dt * dt;
            stats.count += 1;
        }
    }
    stats
}

impl IncrementStats {
    /// Empirical covariance per unit time.
    pub fn covariance_rate(&self) -> Matrix {
        self.sum_outer.scale(1.0 / self.sum_dt)
    }

    /// Entrywise z-scores of the pooled sums against a Gaussian covariance
    /// rate `c` (increments over dt have covariance `c * dt`; the variance of
    /// a product of jointly Gaussian coordinates follows Isserlis' identity).
    pub fn z_scores_against(&self, c: &Matrix) -> Matrix {
        let d = self.dim;
        let mut z = Matrix::zeros(d);
        for r in 0..d {
            for s in 0..d {
                let var_sum =
                    self.sum_dt_sq * (c[(r, r)] * c[(s, s)] + c[(r, s)] * c[(r, s)]);
                let sd = var_sum.sqrt().max(1e-300);
                z[(r, s)] = (self.sum_outer[(r, s)] - c[(r, s)] * self.sum_dt) / sd;
            }
        }
        z
    }

    /// Trace slope `sum |dx|^2 / sum dt` and the z-score against `trace(c)`.
    pub fn trace_slope(&self, c: &Matrix) -> (f64, f64) {
        let d = self.dim;
        let slope: f64 = (0..d).map(|i| self.sum_outer[(i, i)]).sum::<f64>() / self.sum_dt;
        let trace: f64 = (0..d).map(|i| c[(i, i)]).sum();
        // Var(|dx|^2) = 2 tr((c dt)^2)
        let mut tr_c2 = 0.0;
        for r in 0..d {
            for s in 0..d {
                tr_c2 += c[(r, s)] * c[(s, r)];
            }
        }
        let var_sum = 2.0 * tr_c2 * self.sum_dt_sq;
        let z = ((0..d).map(|i| self.sum_outer[(i, i)]).sum::<f64>() - trace * self.sum_dt)
            / var_sum.sqrt().max(1e-300);
        (slope, z)
    }
}

/// Transition counts between labels along recorded trajectories (every label
/// change is one jump; grid records with unchanged labels are skipped).
pub fn count_jump_transitions(trajectories: &[Trajectory], n_labels: usize) -> Matrix {
    let mut counts = Matrix::zeros(n_labels);
    for traj in trajectories {
        for i in 0..traj.len().saturating_sub(1) {
            let (a, b) = (traj.labels[i], traj.labels[i + 1]);
            if a != b {
                counts[(a, b)] += 1.0;
            }
        }
    }
    counts
}

/// Counts from an embedded-chain label sequence.
pub fn count_sequence_transitions(seq: &[usize], n_labels: usize) -> Matrix {
    let mut counts = Matrix::zeros(n_labels);
    for w in seq.windows(2) {
        counts[(w[0], w[1])] += 1.0;
    }
    counts
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiSquaredReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n_jumps: usize,
}

/// Pearson chi-squared test of observed jump transitions against the rows of
/// `mu`, conditioning on per-state totals.
pub fn jump_chain_chi_squared(counts: &Matrix, mu: &Matrix) -> ChiSquaredReport {
    let k = mu.n();
    let mut statistic = 0.0;
    let mut dof = 0usize;
    let mut n_jumps = 0usize;
    let mut impossible = false;
    for from in 0..k {
        let row_total: f64 = (0..k).map(|j| counts[(from, j)]).sum();
        n_jumps += row_total as usize;
        if row_total == 0.0 {
            continue;
        }
        let mut support = 0usize;
        for to in 0..k {
            let expected = row_total * mu[(from, to)];
            if mu[(from, to)] > 0.0 {
                support += 1;
                let diff = counts[(from, to)] - expected;
                statistic += diff * diff / expected;
            } else if counts[(from, to)] > 0.0 {
                impossible = true;
            }
        }
        dof += support.saturating_sub(1);
    }
    let p_value = if impossible || dof == 0 {
        if impossible {
            0.0
        } else {
            1.0
        }
    } else {
        stats::chi_squared_survival(dof, statistic)
    };
    ChiSquaredReport {
        statistic,
        dof,
        p_value,
        n_jumps,
    }
}

// ---------------------------------------------------------------------------
// Two-time product statistics
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of `E[F(X(t1)) G(X(t2))]` for the microscale walk.
pub fn two_time_mc_micro(
    env: &Environment,
    eps: f64,
    f: &TestTuple,
    g: &TestTuple,
    t1: f64,
    t2: f64,
    start: &[i64],
    n_paths: usize,
    stream: RngStream,
) -> Result<McEstimate, AnalysisError> {
    let times = [t1, t2];
    let start = start.to_vec();
    let samples: Result<Vec<f64>, SimError> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let states = walk_positions_at(env, eps, &times, &start, stream.offset(i as u64))?;
            Ok(f.eval(&states[0].0, states[0].1) * g.eval(&states[1].0, states[1].1))
        })
        .collect();
    Ok(McEstimate::from_samples(&samples?))
}

/// Monte Carlo estimate of `E[F(X(t1)) G(X(t2))]` for the limit process.
pub fn two_time_mc_limit(
    model: &EffectiveModel,
    f: &TestTuple,
    g: &TestTuple,
    t1: f64,
    t2: f64,
    start: (&[f64], usize),
    n_paths: usize,
    stream: RngStream,
) -> Result<McEstimate, AnalysisError> {
    let times = [t1, t2];
    let x0 = start.0.to_vec();
    let k0 = start.1;
    let samples: Result<Vec<f64>, SimError> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let states = limit_positions_at(model, (&x0, k0), &times, stream.offset(i as u64))?;
            Ok(f.eval(&states[0].0, states[0].1) * g.eval(&states[1].0, states[1].1))
        })
        .collect();
    Ok(McEstimate::from_samples(&samples?))
}

// ---------------------------------------------------------------------------
// Finite-dimensional-distribution comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareConfig {
    pub eps_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// Start cell of the walk in unscaled lattice coordinates; the limit
    /// start is the origin with this cell's label.
    pub start_cell: Vec<i64>,
    /// Largest window (in lattice sites) the exact semigroup route may use
    /// before falling back to Monte Carlo.
    pub window_budget: usize,
}

impl CompareConfig {
    pub fn new(env: &Environment) -> Self {
        CompareConfig {
            eps_list: vec![0.4, 0.2, 0.1],
            t_list: vec![0.25, 0.5],
            n_paths: 20_000,
            seed: 1,
            start_cell: env.base_cell(),
            window_budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FddCell {
    pub tuple: String,
    pub t: f64,
    pub eps: f64,
    pub micro_mean: f64,
    pub micro_half_width: f64,
    pub micro_exact: bool,
    pub limit_mean: f64,
    pub limit_half_width: f64,
    pub discrepancy: f64,
    /// Combined three-sigma band of the two estimates.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendSummary {
    pub tuple: String,
    pub t: f64,
    pub eps_list: Vec<f64>,
    pub discrepancies: Vec<f64>,
    /// Every discrepancy is below its predecessor plus the combined noise
    /// band (the monotone-trend test).
    pub decreasing_within_band: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cells: Vec<FddCell>,
    pub trends: Vec<TrendSummary>,
    /// "consistent with convergence" | "inconsistent" | "insufficient data"
    pub verdict: String,
}

/// Compare expectations of the microscale walk and the limit process over a
/// grid of (test tuple, time, contrast) cells, and summarize the discrepancy
/// trend along the contrast list.
pub fn compare_fdd(
    env: &Environment,
    model: &EffectiveModel,
    tuples: &[TestTuple],
    cfg: &CompareConfig,
) -> Result<ComparisonReport, AnalysisError> {
    let mut eps_list = cfg.eps_list.clone();
    eps_list.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let start = &cfg.start_cell;
    let limit_x0 = vec![0.0; env.dim()];
    let limit_k0 = env.component_index(start);
    let mut next_stream: u64 = 0;
    let mut alloc = |n: usize| {
        let s = RngStream::new(cfg.seed, next_stream);
        next_stream += n as u64;
        s
    };

    let mut cells = Vec::new();
    let mut trends = Vec::new();
    for tuple in tuples {
        for &t in &cfg.t_list {
            let limit_est = limit_expectation(
                model,
                tuple,
                (&limit_x0, limit_k0),
                t,
                cfg.n_paths,
                alloc(cfg.n_paths),
            )?;
            let mut trend_eps = Vec::new();
            let mut trend_disc = Vec::new();
            let mut trend_tol = Vec::new();
            for &eps in &eps_list {
                let (micro_mean, micro_se, micro_exact) =
                    match exact_window_radius(env, tuple, t, eps, cfg.window_budget) {
                        Some(radius) => {
                            let field = semigroup_apply(env, eps, tuple, t, radius)?;
                            let v = field
                                .value_at(start)
                                .expect("start cell inside exact window");
                            (v, 0.0, true)
                        }
                        None => {
                            let stream = alloc(cfg.n_paths);
                            let times = [t];
                            let samples: Result<Vec<f64>, SimError> = (0..cfg.n_paths)
                                .into_par_iter()
                                .map(|i| {
                                    let states = walk_positions_at(
                                        env,
                                        eps,
                                        &times,
                                        start,
                                        stream.offset(i as u64),
                                    )?;
                                    Ok(tuple.eval(&states[0].0, states[0].1))
                                })
                                .collect();
                            let est = McEstimate::from_samples(&samples?);
                            (est.mean, est.std_error, false)
                        }
                    };
                let discrepancy = (micro_mean - limit_est.mean).abs();
                let tolerance =
                    3.0 * (micro_se * micro_se + limit_est.std_error * limit_est.std_error).sqrt();
                trend_eps.push(eps);
                trend_disc.push(discrepancy);
                trend_tol.push(tolerance);
                cells.push(FddCell {
                    tuple: tuple.name.clone(),
                    t,
                    eps,
                    micro_mean,
                    micro_half_width: stats::Z_99 * micro_se,
                    micro_exact,
                    limit_mean: limit_est.mean,
                    limit_half_width: limit_est.half_width_99(),
                    discrepancy,
                    tolerance,
                });
            }
            if trend_eps.len() >= 3 {
                let mut ok = true;
                for i in 1..trend_disc.len() {
                    let band = (trend_tol[i - 1] * trend_tol[i - 1]
                        + trend_tol[i] * trend_tol[i])
                        .sqrt();
                    if trend_disc[i] > trend_disc[i - 1] + band {
                        ok = false;
                    }
                }
                trends.push(TrendSummary {
                    tuple: tuple.name.clone(),
                    t,
                    eps_list: trend_eps,
                    discrepancies: trend_disc,
                    decreasing_within_band: ok,
                });
            }
        }
    }
    let verdict = if trends.is_empty() {
        "insufficient data".to_string()
    } else if trends.iter().all(|t| t.decreasing_within_band) {
        "consistent with convergence".to_string()
    } else {
        "inconsistent".to_string()
    };
    Ok(ComparisonReport {
        cells,
        trends,
        verdict,
    })
}

/// Radius of the smallest exact semigroup window, if it fits the site
/// budget. `None` means fall back to Monte Carlo.
fn exact_window_radius(
    env: &Environment,
    tuple: &TestTuple,
    t: f64,
    eps: f64,
    budget: usize,
) -> Option<f64> {
    let support = tuple.support_radius()?;
    let steps = crate::simulate::steps_for(t, eps);
    let radius = support + env.c1() as f64 * steps as f64 * eps + eps;
    let n_max = (radius / eps).floor() as i64;
    let side = 2 * n_max + 1;
    let sites = (side as f64).powi(env.dim() as i32);
    if sites <= budget as f64 {
        Some(radius)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::solve_effective_model;
    use crate::presets;
    use crate::simulate::run_limit;

    fn model_1d() -> (Environment, EffectiveModel) {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        let (model, _) = solve_effective_model(&env).unwrap();
        (env, model)
    }

    #[test]
    fn stationary_two_state_closed_form() {
        let (_, model) = model_1d();
        let pi = stationary_k(&model).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        assert!((pi[1] - 0.5).abs() < 1e-12);

        // general 2-state closed form: pi = (a10, a01) / (a01 + a10)
        let m = EffectiveModel {
            dim: 1,
            n_fast: 1,
            n_astral: 1,
            component_sizes: vec![1],
            theta: vec![Matrix::from_flat(1, vec![1.0])],
            alpha: Matrix::from_rows(&[vec![0.0, 3.0], vec![0.5, 0.0]]),
            lambda: vec![3.0, 0.5],
            mu: Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        };
        let pi = stationary_k(&m).unwrap();
        assert!((pi[0] - 0.5 / 3.5).abs() < 1e-12);
        assert!((pi[1] - 3.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_is_scale_invariant_and_balanced() {
        let env = Environment::from_spec(&presets::three_cell_component()).unwrap();
        let (model, _) = solve_effective_model(&env).unwrap();
        let pi = stationary_k(&model).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pi.iter().all(|&p| p >= -1e-12));
        // residual of the balance equations
        let k = model.n_labels();
        for j in 0..k {
            let mut acc = -pi[j] * model.lambda[j];
            for i in 0..k {
                if i != j {
                    acc += pi[i] * model.alpha[(i, j)];
                }
            }
            assert!(acc.abs() < 1e-10, "balance residual {acc} at {j}");
        }
        // doubling all rates leaves pi unchanged
        let scaled = EffectiveModel {
            alpha: model.alpha.scale(2.0),
            lambda: model.lambda.iter().map(|l| 2.0 * l).collect(),
            ..model.clone()
        };
        let pi2 = stationary_k(&scaled).unwrap();
        for (a, b) in pi.iter().zip(&pi2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reducible_chain_is_reported() {
        let m = EffectiveModel {
            dim: 1,
            n_fast: 2,
            n_astral: 0,
            component_sizes: vec![1, 1],
            theta: vec![
                Matrix::from_flat(1, vec![1.0]),
                Matrix::from_flat(1, vec![1.0]),
            ],
            // state 1 never sends mass back
            alpha: Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]),
            lambda: vec![1.0, 1.0],
            mu: Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]),
        };
        assert!(matches!(
            stationary_k(&m),
            Err(AnalysisError::ReducibleChain)
        ));
    }

    #[test]
    fn frozen_trajectory_occupies_one_label() {
        let (_, model) = model_1d();
        // start astral with a horizon shorter than the first event
        let traj = Trajectory {
            kind: crate::simulate::TrajectoryKind::Limit,
            times: vec![0.0, 1.0],
            positions: vec![vec![0.0], vec![0.0]],
            labels: vec![1, 1],
        };
        let occ = occupation_fractions(&[traj], model.n_labels());
        assert_eq!(occ, vec![0.0, 1.0]);
    }

    #[test]
    fn occupation_matches_stationary_on_long_runs() {
        let (_, model) = model_1d();
        let trajs: Vec<Trajectory> = (0..400)
            .map(|i| {
                run_limit(&model, (&[0.0], 0), 50.0, &[], RngStream::new(23, i)).unwrap()
            })
            .collect();
        let occ = occupation_fractions(&trajs, model.n_labels());
        let pi = stationary_k(&model).unwrap();
        // crude 3-sigma band from per-trajectory fluctuation of the fraction
        let fracs: Vec<f64> = trajs
            .iter()
            .map(|t| occupation_fractions(std::slice::from_ref(t), 2)[0])
            .collect();
        let se = (stats::variance(&fracs) / fracs.len() as f64).sqrt();
        assert!(
            (occ[0] - pi[0]).abs() < 3.0 * se + 1e-3,
            "occ {} vs pi {} (se {se})",
            occ[0],
            pi[0]
        );
    }

    #[test]
    fn msd_of_frozen_model_is_zero() {
        let traj = Trajectory {
            kind: crate::simulate::TrajectoryKind::Limit,
            times: vec![0.0, 0.5, 1.0],
            positions: vec![vec![1.0], vec![1.0], vec![1.0]],
            labels: vec![1, 1, 1],
        };
        let curve = msd(&[traj], &[0.25, 0.5, 1.0]);
        assert!(curve.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chi_squared_accepts_true_mu_and_rejects_wrong_mu() {
        let (_, model) = model_1d();
        let seq =
            crate::simulate::sample_jump_chain(&model, 0, 20_000, RngStream::new(31, 0)).unwrap();
        let counts = count_sequence_transitions(&seq, model.n_labels());
        let report = jump_chain_chi_squared(&counts, &model.mu);
        assert!(report.p_value > 0.01, "p = {}", report.p_value);

        // a wrong chain: three states, biased rows
        let mu3 = Matrix::from_rows(&[
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ]);
        let model3 = EffectiveModel {
            dim: 1,
            n_fast: 1,
            n_astral: 2,
            component_sizes: vec![1],
            theta: vec![Matrix::from_flat(1, vec![1.0])],
            alpha: Matrix::from_rows(&[
                vec![0.0, 0.8, 0.2],
                vec![0.5, 0.0, 0.5],
                vec![0.5, 0.5, 0.0],
            ]),
            lambda: vec![1.0, 1.0, 1.0],
            mu: Matrix::from_rows(&[
                vec![0.0, 0.8, 0.2],
                vec![0.5, 0.0, 0.5],
                vec![0.5, 0.5, 0.0],
            ]),
        };
        let seq =
            crate::simulate::sample_jump_chain(&model3, 0, 20_000, RngStream::new(32, 0)).unwrap();
        let counts = count_sequence_transitions(&seq, 3);
        let report = jump_chain_chi_squared(&counts, &mu3);
        assert!(report.p_value < 1e-6, "p = {}", report.p_value);
    }

    #[test]
    fn constant_tuple_discrepancy_is_exactly_zero() {
        let (env, model) = model_1d();
        let cfg = CompareConfig {
            eps_list: vec![0.4, 0.2],
            t_list: vec![0.3],
            n_paths: 200,
            seed: 5,
            start_cell: vec![0],
            window_budget: 0, // force the Monte Carlo route
        };
        let tuple = TestTuple::constant(2, 1.0);
        let report = compare_fdd(&env, &model, &[tuple], &cfg).unwrap();
        for cell in &report.cells {
            assert_eq!(cell.discrepancy, 0.0);
        }
        assert_eq!(report.verdict, "insufficient data");
    }

    #[test]
    fn time_zero_point_mass_is_exact() {
        let (env, model) = model_1d();
        let cfg = CompareConfig {
            eps_list: vec![0.2],
            t_list: vec![0.0],
            n_paths: 100,
            seed: 5,
            start_cell: vec![0],
            window_budget: 1_000_000,
        };
        let tuple = TestTuple::gaussian(2, 1);
        let report = compare_fdd(&env, &model, &[tuple], &cfg).unwrap();
        assert_eq!(report.cells[0].discrepancy, 0.0);
        assert!(report.cells[0].micro_exact);
    }
}
