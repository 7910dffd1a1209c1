//! Correctors on the periodicity cell and the effective model they define.
//!
//! Three families of singular systems are solved per fast component:
//! the vector corrector `h` (drift compensation), the matrix corrector `g`
//! (second-order term), and the scalar correctors `q` (one per coupled
//! label). Averaging the corrected second-order flux over a component gives
//! its effective diffusion matrix; averaging the contrast couplings gives the
//! transition intensities of the limit jump chain.

use serde::{Deserialize, Serialize};

use crate::connectivity::LiftVerdict;
use crate::environment::Environment;
use crate::linalg::{self, Matrix};
use crate::solver::{solve_singular, ComponentSystem, SolveError};

/// Sup-norm residual target for the corrector solves.
pub const SOLVER_TOL: f64 = 1e-12;
/// Orthogonality (Fredholm) tolerance for singular right-hand sides.
pub const FREDHOLM_TOL: f64 = 1e-10;

/// Solved corrector fields. Values are indexed `[component][field][local
/// cell]` with cells in the order of `SitePartition::component_cells`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectorSet {
    /// Vector corrector: `h[comp][dir][local]`.
    pub h: Vec<Vec<Vec<f64>>>,
    /// Matrix corrector: `g[comp][row * d + col][local]`.
    pub g: Vec<Vec<Vec<f64>>>,
    /// Scalar correctors per target label: `q[comp][label][local]`; the
    /// component's own label column is identically zero.
    pub q: Vec<Vec<Vec<f64>>>,
    pub residuals: CorrectorResiduals,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectorResiduals {
    /// `[comp][dir]` sup-norm defect of the h-equation.
    pub h: Vec<Vec<f64>>,
    /// `[comp][row * d + col]` sup-norm defect of the g-equation.
    pub g: Vec<Vec<f64>>,
    /// `[comp][label]` sup-norm defect of the q-equation.
    pub q: Vec<Vec<f64>>,
    /// Largest |mean| of any right-hand side passed to the singular solver.
    pub fredholm_defect: f64,
}

impl CorrectorResiduals {
    pub fn max(&self) -> f64 {
        let m = |vv: &Vec<Vec<f64>>| {
            vv.iter()
                .flat_map(|v| v.iter().cloned())
                .fold(0.0, f64::max)
        };
        m(&self.h).max(m(&self.g)).max(m(&self.q))
    }
}

/// Effective diffusion matrix of one component, kept in both the raw
/// (component-averaged flux) and symmetrized forms. Only the symmetric part
/// enters the limit generator; the raw form is what the g-equation needs.
#[derive(Debug, Clone)]
pub struct Theta {
    pub raw: Matrix,
    pub sym: Matrix,
    pub min_eigenvalue: f64,
}

/// The limit model: diffusion matrices per fast component and the jump chain
/// between component labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub dim: usize,
    pub n_fast: usize,
    pub n_astral: usize,
    pub component_sizes: Vec<usize>,
    /// Symmetrized positive definite diffusion matrices, one per component.
    pub theta: Vec<Matrix>,
    /// Transition intensities, zero diagonal.
    pub alpha: Matrix,
    /// Total jump intensity per label.
    pub lambda: Vec<f64>,
    /// Embedded jump chain; every row sums to one.
    pub mu: Matrix,
}

impl EffectiveModel {
    pub fn n_labels(&self) -> usize {
        self.n_fast + self.n_astral
    }

    pub fn is_fast_label(&self, label: usize) -> bool {
        label < self.n_fast
    }

    pub fn label_name(&self, label: usize) -> String {
        if label < self.n_fast {
            format!("fast:{}", label + 1)
        } else {
            format!("astral:{}", label - self.n_fast + 1)
        }
    }

    /// Structural sanity of a deserialized model.
    pub fn validate(&self) -> Result<(), String> {
        let k = self.n_labels();
        if self.theta.len() != self.n_fast {
            return Err("theta count does not match n_fast".into());
        }
        for (i, th) in self.theta.iter().enumerate() {
            if th.n() != self.dim {
                return Err(format!("theta[{i}] has wrong dimension"));
            }
            let eig = linalg::sym_eigenvalues(th);
            if eig[0] <= 0.0 {
                return Err(format!("theta[{i}] is not positive definite"));
            }
        }
        if self.alpha.n() != k || self.mu.n() != k || self.lambda.len() != k {
            return Err("rate table dimensions are inconsistent".into());
        }
        for i in 0..k {
            if self.lambda[i] <= 0.0 {
                return Err(format!("lambda[{i}] must be positive"));
            }
            let row_sum: f64 = (0..k).map(|j| self.mu[(i, j)]).sum();
            if (row_sum - 1.0).abs() > 1e-9 {
                return Err(format!("mu row {i} sums to {row_sum}"));
            }
        }
        Ok(())
    }
}

fn component_systems(env: &Environment) -> Result<Vec<ComponentSystem>, SolveError> {
    let verdicts = env.lift_connectivity();
    for (component, verdict) in verdicts.iter().enumerate() {
        if *verdict != LiftVerdict::ConnectedUnbounded {
            return Err(SolveError::BadComponent {
                component,
                verdict: *verdict,
            });
        }
    }
    Ok((0..env.partition().n_fast)
        .map(|c| ComponentSystem::from_environment(env, c))
        .collect())
}

/// Solve the drift-compensation equation per component and direction.
/// Returns zero-mean fields `h[comp][dir][local]` and their residuals.
pub fn solve_h(env: &Environment) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>), SolveError> {
    let systems = component_systems(env)?;
    let d = env.dim();
    let mut h = Vec::new();
    let mut residuals = Vec::new();
    for (comp, sys) in systems.iter().enumerate() {
        let cells = &env.partition().component_cells[comp];
        let mut fields = Vec::with_capacity(d);
        let mut res = Vec::with_capacity(d);
        for dir in 0..d {
            let drift: Vec<f64> = cells
                .iter()
                .map(|&c| {
                    env.row(c)
                        .iter()
                        .map(|e| e.p0 * e.offset[dir] as f64)
                        .sum::<f64>()
                })
                .collect();
            let u = solve_singular(sys, &drift, SOLVER_TOL, FREDHOLM_TOL)?;
            res.push(h_equation_residual(env, comp, dir, &u));
            fields.push(u);
        }
        h.push(fields);
        residuals.push(res);
    }
    Ok((h, residuals))
}

/// Defect of the h-equation evaluated directly from the jump table.
fn h_equation_residual(env: &Environment, comp: usize, dir: usize, field: &[f64]) -> f64 {
    let cells = &env.partition().component_cells[comp];
    let local = |cell: usize| env.partition().local_index[cell];
    let mut sup = 0.0f64;
    for (i, &cell) in cells.iter().enumerate() {
        let mut acc = 0.0;
        for e in env.row(cell) {
            if e.p0 == 0.0 {
                continue;
            }
            acc += e.p0 * (e.offset[dir] as f64 + field[local(e.target)] - field[i]);
        }
        sup = sup.max(acc.abs());
    }
    sup
}

/// Corrected second-order flux at one cell:
/// `Phi(h)(y) = sum_xi p_xi(y) xi (x) (xi/2 + h(y+xi))`,
/// with `h` the per-direction fields of the cell's component.
pub fn phi_matrix(env: &Environment, h: &[Vec<f64>], cell: usize) -> Matrix {
    let d = env.dim();
    let local = |c: usize| env.partition().local_index[c];
    let mut phi = Matrix::zeros(d);
    for e in env.row(cell) {
        if e.p0 == 0.0 {
            continue;
        }
        let t = local(e.target);
        for k in 0..d {
            for m in 0..d {
                phi[(k, m)] +=
                    e.p0 * e.offset[k] as f64 * (0.5 * e.offset[m] as f64 + h[m][t]);
            }
        }
    }
    phi
}

/// Effective diffusion matrices: component average of the corrected flux,
/// symmetrized, with positive definiteness verified.
pub fn compute_theta(env: &Environment, h: &[Vec<Vec<f64>>]) -> Result<Vec<Theta>, SolveError> {
    let mut out = Vec::new();
    for comp in 0..env.partition().n_fast {
        let cells = &env.partition().component_cells[comp];
        let mut raw = Matrix::zeros(env.dim());
        for &cell in cells {
            raw.add_assign(&phi_matrix(env, &h[comp], cell));
        }
        let raw = raw.scale(1.0 / cells.len() as f64);
        let sym = raw.symmetrized();
        let eig = linalg::sym_eigenvalues(&sym);
        if eig[0] <= 0.0 {
            return Err(SolveError::NotPositiveDefinite {
                component: comp,
                min_eig: eig[0],
            });
        }
        out.push(Theta {
            raw,
            sym,
            min_eigenvalue: eig[0],
        });
    }
    Ok(out)
}

/// Independent route to the quadratic form of Theta:
/// `(Theta eta, eta) = 1/(2|B|) sum_{y,xi} p_xi(y) ((xi + h(y+xi) - h(y)) . eta)^2`.
pub fn theta_quadratic_form_direct(
    env: &Environment,
    h: &[Vec<Vec<f64>>],
    comp: usize,
    eta: &[f64],
) -> f64 {
    let cells = &env.partition().component_cells[comp];
    let local = |c: usize| env.partition().local_index[c];
    let d = env.dim();
    let mut acc = 0.0;
    for (i, &cell) in cells.iter().enumerate() {
        for e in env.row(cell) {
            if e.p0 == 0.0 {
                continue;
            }
            let t = local(e.target);
            let mut dot = 0.0;
            for m in 0..d {
                dot += (e.offset[m] as f64 + h[comp][m][t] - h[comp][m][i]) * eta[m];
            }
            acc += e.p0 * dot * dot;
        }
    }
    acc / (2.0 * cells.len() as f64)
}

/// Solve the second corrector equation entrywise:
/// `(P0 - I) g_km = Theta_km - Phi(h)_km` with the raw (unsymmetrized) Theta,
/// whose definition makes the right-hand side mean-free.
pub fn solve_g(
    env: &Environment,
    h: &[Vec<Vec<f64>>],
    theta: &[Theta],
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>), SolveError> {
    let systems = component_systems(env)?;
    let d = env.dim();
    let mut g = Vec::new();
    let mut residuals = Vec::new();
    for (comp, sys) in systems.iter().enumerate() {
        let cells = &env.partition().component_cells[comp];
        let phis: Vec<Matrix> = cells
            .iter()
            .map(|&c| phi_matrix(env, &h[comp], c))
            .collect();
        let mut fields = Vec::with_capacity(d * d);
        let mut res = Vec::with_capacity(d * d);
        for k in 0..d {
            for m in 0..d {
                // (I - P0) g = Phi - Theta, sign-flipped form of the equation
                let b: Vec<f64> = phis
                    .iter()
                    .map(|phi| phi[(k, m)] - theta[comp].raw[(k, m)])
                    .collect();
                let u = solve_singular(sys, &b, SOLVER_TOL, FREDHOLM_TOL)?;
                res.push(sys.residual(&u, &b));
                fields.push(u);
            }
        }
        g.push(fields);
        residuals.push(res);
    }
    Ok((g, residuals))
}

/// Solve the coupling correctors: for every component `i` and every other
/// label `j`, `(P0 - I) q = v_j - alpha_ij` where `v_j(y)` is the total
/// contrast weight from `y` into the orbit of label `j` and `alpha_ij` is its
/// component average. Returns fields, residuals, and the worst Fredholm
/// defect (which is zero by construction up to rounding).
pub fn solve_q(
    env: &Environment,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>, f64), SolveError> {
    let systems = component_systems(env)?;
    let n_labels = env.n_labels();
    let mut q = Vec::new();
    let mut residuals = Vec::new();
    let mut fredholm: f64 = 0.0;
    for (comp, sys) in systems.iter().enumerate() {
        let cells = &env.partition().component_cells[comp];
        let mut fields = Vec::with_capacity(n_labels);
        let mut res = Vec::with_capacity(n_labels);
        for label in 0..n_labels {
            if label == comp {
                fields.push(vec![0.0; cells.len()]);
                res.push(0.0);
                continue;
            }
            let v_row: Vec<f64> = cells
                .iter()
                .map(|&c| env.coupling_to_label(c, label))
                .collect();
            let alpha = v_row.iter().sum::<f64>() / cells.len() as f64;
            // (I - P0) q = alpha - v_j
            let b: Vec<f64> = v_row.iter().map(|v| alpha - v).collect();
            fredholm = fredholm.max((b.iter().sum::<f64>() / b.len() as f64).abs());
            let u = solve_singular(sys, &b, SOLVER_TOL, FREDHOLM_TOL)?;
            res.push(sys.residual(&u, &b));
            fields.push(u);
        }
        q.push(fields);
        residuals.push(res);
    }
    Ok((q, residuals, fredholm))
}

/// Assemble the full rate table: intensities, total rates, and the embedded
/// jump chain.
pub fn compute_rates(env: &Environment) -> Result<(Matrix, Vec<f64>, Matrix), SolveError> {
    let alpha = env.alpha_table();
    let k = env.n_labels();
    let mut lambda = vec![0.0; k];
    let mut mu = Matrix::zeros(k);
    for i in 0..k {
        lambda[i] = (0..k).map(|j| alpha[(i, j)]).sum();
        if lambda[i] <= 0.0 {
            return Err(SolveError::BadRates(format!(
                "lambda({}) = {} is not positive",
                env.partition().label_name(i),
                lambda[i]
            )));
        }
        for j in 0..k {
            mu[(i, j)] = alpha[(i, j)] / lambda[i];
        }
    }
    Ok((alpha, lambda, mu))
}

/// Run the whole corrector pipeline and assemble the effective model.
pub fn solve_effective_model(
    env: &Environment,
) -> Result<(EffectiveModel, CorrectorSet), SolveError> {
    let (h, h_res) = solve_h(env)?;
    let theta = compute_theta(env, &h)?;
    let (g, g_res) = solve_g(env, &h, &theta)?;
    let (q, q_res, fredholm) = solve_q(env)?;
    let (alpha, lambda, mu) = compute_rates(env)?;
    let model = EffectiveModel {
        dim: env.dim(),
        n_fast: env.partition().n_fast,
        n_astral: env.partition().n_astral,
        component_sizes: env
            .partition()
            .component_cells
            .iter()
            .map(Vec::len)
            .collect(),
        theta: theta.iter().map(|t| t.sym.clone()).collect(),
        alpha,
        lambda,
        mu,
    };
    let correctors = CorrectorSet {
        h,
        g,
        q,
        residuals: CorrectorResiduals {
            h: h_res,
            g: g_res,
            q: q_res,
            fredholm_defect: fredholm,
        },
    };
    Ok((model, correctors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn env(spec: &crate::environment::EnvironmentSpec) -> Environment {
        Environment::from_spec(spec).unwrap()
    }

    #[test]
    fn one_dimensional_hand_values() {
        let env = env(&presets::one_dimensional());
        let (model, correctors) = solve_effective_model(&env).unwrap();
        // symmetric jumps: h, g, q all vanish
        assert!(correctors.h[0][0].iter().all(|&x| x.abs() < 1e-14));
        assert!(correctors.g[0][0].iter().all(|&x| x.abs() < 1e-14));
        for field in &correctors.q[0] {
            assert!(field.iter().all(|&x| x.abs() < 1e-14));
        }
        assert!((model.theta[0][(0, 0)] - 2.0).abs() < 1e-12);
        assert!((model.lambda[0] - 2.0).abs() < 1e-12);
        assert!((model.lambda[1] - 2.0).abs() < 1e-12);
        assert!((model.mu[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((model.mu[(1, 0)] - 1.0).abs() < 1e-12);
        assert!(correctors.residuals.max() < 1e-12);
        assert!(correctors.residuals.fredholm_defect < 1e-10);
    }

    #[test]
    fn two_component_thetas() {
        let env = env(&presets::two_component());
        let (model, _) = solve_effective_model(&env).unwrap();
        assert_eq!(model.n_fast, 2);
        assert_eq!(model.n_astral, 2);
        assert!((model.theta[0][(0, 0)] - 8.0).abs() < 1e-12);
        assert!((model.theta[1][(0, 0)] - 8.0).abs() < 1e-12);
        // decoupled components: no fast-fast intensity
        assert_eq!(model.alpha[(0, 1)], 0.0);
        assert_eq!(model.alpha[(1, 0)], 0.0);
        for i in 0..4 {
            assert!((model.lambda[i] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn three_cell_component_correctors() {
        let env = env(&presets::three_cell_component());
        let (h, res) = solve_h(&env).unwrap();
        let expected = [-9.0 / 13.0, 2.0 / 13.0, 7.0 / 13.0];
        for (a, e) in h[0][0].iter().zip(expected) {
            assert!((a - e).abs() < 1e-11);
        }
        assert!(res[0][0] < 1e-12);
        let theta = compute_theta(&env, &h).unwrap();
        assert!((theta[0].sym[(0, 0)] - 43.2 / 39.0).abs() < 1e-12);
        // quadratic-form route agrees
        let qf = theta_quadratic_form_direct(&env, &h, 0, &[1.0]);
        assert!((qf - theta[0].sym[(0, 0)]).abs() < 1e-11);
        // g is nontrivial here and satisfies its equation
        let (g, g_res) = solve_g(&env, &h, &theta).unwrap();
        assert!(g[0][0].iter().any(|&x| x.abs() > 1e-3));
        assert!(g_res[0][0] < 1e-12);
        // mean of Phi equals raw Theta by construction
        let cells = &env.partition().component_cells[0];
        let mean_phi: f64 = cells
            .iter()
            .map(|&c| phi_matrix(&env, &h[0], c)[(0, 0)])
            .sum::<f64>()
            / cells.len() as f64;
        assert!((mean_phi - theta[0].raw[(0, 0)]).abs() < 1e-13);
    }

    #[test]
    fn q_vanishes_for_constant_coupling() {
        // in the 1-d example v(., astral) is constant over the single-cell
        // component, so q = 0; same for the two-component preset
        let env = env(&presets::two_component());
        let (q, res, fredholm) = solve_q(&env).unwrap();
        for comp in &q {
            for field in comp {
                assert!(field.iter().all(|&x| x.abs() < 1e-14));
            }
        }
        assert!(fredholm < 1e-14);
        assert!(res.iter().flatten().all(|&r| r < 1e-12));
    }

    #[test]
    fn gauge_shift_leaves_theta_invariant() {
        let base = env(&presets::three_cell_component());
        let (mut h, _) = solve_h(&base).unwrap();
        let theta0 = compute_theta(&base, &h).unwrap();
        for x in h[0][0].iter_mut() {
            *x += 5.0;
        }
        let theta1 = compute_theta(&base, &h).unwrap();
        assert!(theta0[0].sym.max_abs_diff(&theta1[0].sym) < 1e-12);
    }

    #[test]
    fn reflection_leaves_theta_invariant() {
        // relabeling y -> -y maps the jump table onto itself with offsets
        // negated; Theta is a sum over all (y, xi) pairs and cannot change
        let spec = presets::three_cell_component();
        let mut reflected = crate::environment::EnvironmentSpec::new(spec.period.clone());
        for s in &spec.sites {
            let coord: Vec<i64> = s.coord.iter().map(|&c| -c).collect();
            reflected = reflected.site(&coord, &s.class);
        }
        for e in &spec.edges {
            let from: Vec<i64> = e.from.iter().map(|&c| -c).collect();
            let offset: Vec<i64> = e.offset.iter().map(|&c| -c).collect();
            reflected = reflected.edge(&from, &offset, e.p0, e.v);
        }
        let env_a = env(&spec);
        let env_b = env(&reflected);
        let (ha, _) = solve_h(&env_a).unwrap();
        let (hb, _) = solve_h(&env_b).unwrap();
        let ta = compute_theta(&env_a, &ha).unwrap();
        let tb = compute_theta(&env_b, &hb).unwrap();
        assert!(ta[0].sym.max_abs_diff(&tb[0].sym) < 1e-11);
    }
}
