//! Singular linear systems on a fast component.
//!
//! The quotient transition matrix P of a component is symmetric and
//! stochastic, so `A = I - P` is positive semidefinite with kernel spanned by
//! the constants (the component is connected). Consistent systems `A u = b`
//! with `b` orthogonal to constants are solved by conjugate gradients on the
//! complement of the kernel; the returned solution carries the zero-mean
//! gauge.

use thiserror::Error;

use crate::environment::Environment;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("right-hand side is not orthogonal to constants (defect {defect:e})")]
    FredholmDefect { defect: f64 },
    #[error("conjugate gradients stalled at residual {residual:e} (tolerance {tol:e})")]
    NotConverged { residual: f64, tol: f64 },
    #[error("effective matrix for component {component} is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { component: usize, min_eig: f64 },
    #[error("fast component {component} is not connected and unbounded: {verdict:?}")]
    BadComponent {
        component: usize,
        verdict: crate::connectivity::LiftVerdict,
    },
    #[error("rate table invalid: {0}")]
    BadRates(String),
}

/// Quotient operator of one fast component, rows merged by target cell.
pub struct ComponentSystem {
    n: usize,
    /// per local cell: (local target, p0 weight), diagonal included
    rows: Vec<Vec<(usize, f64)>>,
}

impl ComponentSystem {
    pub fn from_environment(env: &Environment, component: usize) -> Self {
        let cells = &env.partition().component_cells[component];
        let n = cells.len();
        let local = |cell: usize| env.partition().local_index[cell];
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for &cell in cells {
            let mut merged: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            for e in env.row(cell) {
                if e.p0 == 0.0 {
                    continue;
                }
                *merged.entry(local(e.target)).or_insert(0.0) += e.p0;
            }
            *merged.entry(local(cell)).or_insert(0.0) += env.p0_diag(cell);
            rows.push(merged.into_iter().collect());
        }
        ComponentSystem { n, rows }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// out = (I - P) u
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = u[i];
            for &(j, w) in row {
                acc -= w * u[j];
            }
            out[i] = acc;
        }
    }

    /// sup-norm of (I - P) u - b
    pub fn residual(&self, u: &[f64], b: &[f64]) -> f64 {
        let mut out = vec![0.0; self.n];
        self.apply(u, &mut out);
        out.iter()
            .zip(b)
            .map(|(a, bb)| (a - bb).abs())
            .fold(0.0, f64::max)
    }
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Solve `(I - P) u = b` with the zero-mean gauge.
///
/// `b` must be orthogonal to constants up to `fredholm_tol`; it is projected
/// exactly before the iteration starts.
pub fn solve_singular(
    sys: &ComponentSystem,
    b: &[f64],
    tol: f64,
    fredholm_tol: f64,
) -> Result<Vec<f64>, SolveError> {
    let n = sys.len();
    assert_eq!(b.len(), n);
    let defect = (b.iter().sum::<f64>() / n as f64).abs();
    if defect > fredholm_tol {
        return Err(SolveError::FredholmDefect { defect });
    }
    let mut rhs = b.to_vec();
    project_mean_zero(&mut rhs);

    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = 20 * n + 200;
    for _ in 0..max_iter {
        let sup = r.iter().cloned().map(f64::abs).fold(0.0, f64::max);
        if sup <= tol {
            project_mean_zero(&mut x);
            return Ok(x);
        }
        sys.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project_mean_zero(&mut r);
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let residual = r.iter().cloned().map(f64::abs).fold(0.0, f64::max);
    if residual <= tol {
        project_mean_zero(&mut x);
        return Ok(x);
    }
    Err(SolveError::NotConverged { residual, tol })
}
