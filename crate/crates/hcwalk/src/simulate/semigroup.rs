//! Exact matrix-power semigroup on a finite lattice window.
//!
//! Under the finite jump range, `T_eps^n (pi_eps F)` at points within the
//! window is exact (no truncation error) as soon as the window contains the
//! support of `F` inflated by `n * c1` lattice steps: everything outside is
//! identically zero, so reading zeros past the boundary is not an
//! approximation.

use super::{steps_for, SimError};
use crate::environment::Environment;
use crate::testfn::TestTuple;

/// Function values on the lattice box `|n_i| <= n_max` (unscaled lattice
/// coordinates; the spatial position of `n` is `eps * n`).
#[derive(Debug, Clone)]
pub struct SemigroupField {
    pub eps: f64,
    pub steps: usize,
    pub n_max: i64,
    pub dim: usize,
    pub values: Vec<f64>,
    /// Window sup equals the global sup (support plus propagation margin fit
    /// inside the window).
    pub exact: bool,
}

impl SemigroupField {
    fn flat_index(&self, n: &[i64]) -> Option<usize> {
        let side = (2 * self.n_max + 1) as usize;
        let mut idx = 0usize;
        for &c in n {
            if c.abs() > self.n_max {
                return None;
            }
            idx = idx * side + (c + self.n_max) as usize;
        }
        Some(idx)
    }

    pub fn value_at(&self, n: &[i64]) -> Option<f64> {
        self.flat_index(n).map(|i| self.values[i])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().cloned().map(f64::abs).fold(0.0, f64::max)
    }

    /// Error unless the window guarantees exact values.
    pub fn expect_exact(self, radius: f64, required: f64) -> Result<Self, SimError> {
        if self.exact {
            Ok(self)
        } else {
            Err(SimError::WindowTooSmall { radius, required })
        }
    }
}

struct Window {
    dim: usize,
    n_max: i64,
    side: usize,
    cells: Vec<usize>,
}

impl Window {
    fn new(env: &Environment, n_max: i64) -> Self {
        let dim = env.dim();
        let side = (2 * n_max + 1) as usize;
        let total = side.pow(dim as u32);
        let mut cells = Vec::with_capacity(total);
        let mut point = vec![-n_max; dim];
        for _ in 0..total {
            cells.push(env.geometry().cell_index(&point));
            Self::advance(&mut point, n_max);
        }
        Window {
            dim,
            n_max,
            side,
            cells,
        }
    }

    // odometer matching the row-major flat order (last axis fastest)
    fn advance(point: &mut [i64], n_max: i64) {
        for axis in (0..point.len()).rev() {
            point[axis] += 1;
            if point[axis] <= n_max {
                return;
            }
            point[axis] = -n_max;
        }
    }

    fn for_each_point(&self, mut f: impl FnMut(usize, &[i64])) {
        let mut point = vec![-self.n_max; self.dim];
        for flat in 0..self.cells.len() {
            f(flat, &point);
            Self::advance(&mut point, self.n_max);
        }
    }
}

/// One application of the scaled transition operator over the window,
/// reading zeros outside.
fn apply_transition(
    env: &Environment,
    window: &Window,
    eps: f64,
    values: &[f64],
    out: &mut [f64],
) {
    let n_max = window.n_max;
    let side = window.side as i64;
    let dim = window.dim;
    window.for_each_point(|flat, point| {
        let cell = window.cells[flat];
        let mut acc =
            (env.p0_diag(cell) + eps * eps * env.v_diag(cell)) * values[flat];
        'entries: for e in env.row(cell) {
            let p = e.p0 + eps * eps * e.v;
            if p == 0.0 {
                continue;
            }
            let mut nflat = 0i64;
            for a in 0..dim {
                let c = point[a] + e.offset[a];
                if c.abs() > n_max {
                    continue 'entries;
                }
                nflat = nflat * side + (c + n_max);
            }
            acc += p * values[nflat as usize];
        }
        out[flat] = acc;
    });
}

/// Compute `T_eps^{floor(t / eps^2)} (pi_eps F)` on the window
/// `|eps n_i| <= radius`. The `exact` flag records whether the window
/// contains the tuple support plus the propagation margin.
pub fn semigroup_apply(
    env: &Environment,
    eps: f64,
    tuple: &TestTuple,
    t: f64,
    radius: f64,
) -> Result<SemigroupField, SimError> {
    if !(eps > 0.0) || eps > env.eps_max() + 1e-12 {
        return Err(SimError::EpsOutOfRange {
            eps,
            eps_max: env.eps_max(),
        });
    }
    assert_eq!(tuple.n_labels(), env.n_labels());
    let steps = steps_for(t, eps);
    let n_max = (radius / eps).floor() as i64;
    let window = Window::new(env, n_max);
    let exact = tuple
        .support_radius()
        .map(|s| radius >= s + env.c1() as f64 * steps as f64 * eps)
        .unwrap_or(false);

    let mut values = vec![0.0; window.cells.len()];
    window.for_each_point(|flat, point| {
        let x: Vec<f64> = point.iter().map(|&c| eps * c as f64).collect();
        let label = env.component_index(point);
        values[flat] = tuple.eval(&x, label);
    });
    let mut scratch = vec![0.0; values.len()];
    for _ in 0..steps {
        apply_transition(env, &window, eps, &values, &mut scratch);
        std::mem::swap(&mut values, &mut scratch);
    }
    Ok(SemigroupField {
        eps,
        steps,
        n_max,
        dim: window.dim,
        values,
        exact,
    })
}

/// Exact two-time expectation `E[F(X(t1)) G(X(t2))]` for the walk started at
/// the lattice point `start`, by two nested semigroup applications.
pub fn two_time_product(
    env: &Environment,
    eps: f64,
    f: &TestTuple,
    g: &TestTuple,
    t1: f64,
    t2: f64,
    radius: f64,
    start: &[i64],
) -> Result<f64, SimError> {
    assert!(t2 >= t1);
    if !(eps > 0.0) || eps > env.eps_max() + 1e-12 {
        return Err(SimError::EpsOutOfRange {
            eps,
            eps_max: env.eps_max(),
        });
    }
    let steps1 = steps_for(t1, eps);
    let steps2 = steps_for(t2, eps);
    let n_max = (radius / eps).floor() as i64;
    let window = Window::new(env, n_max);

    // inner expectation: u = T^{n2 - n1} (pi G)
    let mut u = vec![0.0; window.cells.len()];
    window.for_each_point(|flat, point| {
        let x: Vec<f64> = point.iter().map(|&c| eps * c as f64).collect();
        u[flat] = g.eval(&x, env.component_index(point));
    });
    let mut scratch = vec![0.0; u.len()];
    for _ in 0..(steps2 - steps1) {
        apply_transition(env, &window, eps, &u, &mut scratch);
        std::mem::swap(&mut u, &mut scratch);
    }
    // pointwise product with pi F, then n1 more steps
    window.for_each_point(|flat, point| {
        let x: Vec<f64> = point.iter().map(|&c| eps * c as f64).collect();
        u[flat] *= f.eval(&x, env.component_index(point));
    });
    for _ in 0..steps1 {
        apply_transition(env, &window, eps, &u, &mut scratch);
        std::mem::swap(&mut u, &mut scratch);
    }
    let field = SemigroupField {
        eps,
        steps: steps2,
        n_max,
        dim: window.dim,
        values: u,
        exact: true,
    };
    Ok(field.value_at(start).expect("start inside window"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;
    use crate::presets;
    use crate::simulate::RngStream;
    use crate::testfn::TestTuple;

    fn env_1d() -> Environment {
        Environment::from_spec(&presets::one_dimensional()).unwrap()
    }

    #[test]
    fn zero_steps_returns_restriction() {
        let env = env_1d();
        let tuple = TestTuple::gaussian(2, 1);
        let field = semigroup_apply(&env, 0.2, &tuple, 0.0, 9.0).unwrap();
        assert_eq!(field.steps, 0);
        assert!(field.exact);
        for n in [-3i64, 0, 7] {
            let x = 0.2 * n as f64;
            let expect = tuple.eval(&[x], env.component_index(&[n]));
            assert_eq!(field.value_at(&[n]).unwrap(), expect);
        }
    }

    #[test]
    fn constants_are_preserved_in_the_interior() {
        let env = env_1d();
        let tuple = TestTuple::constant(2, 1.0);
        let eps = 0.5;
        let field = semigroup_apply(&env, eps, &tuple, 1.0, 20.0).unwrap();
        assert!(!field.exact); // unbounded support: flag must say so
        let steps = field.steps as i64;
        let margin = env.c1() * steps;
        let interior = field.n_max - margin;
        for n in -interior..=interior {
            let v = field.value_at(&[n]).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "value {v} at {n}");
        }
    }

    #[test]
    fn contraction_in_sup_norm() {
        let env = env_1d();
        let tuple = TestTuple::gaussian(2, 1);
        let field = semigroup_apply(&env, 0.2, &tuple, 0.5, 14.0).unwrap();
        assert!(field.exact);
        assert!(field.sup_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn matches_monte_carlo_at_the_base_point() {
        let env = env_1d();
        let tuple = TestTuple::gaussian(2, 1);
        let eps = 0.2;
        let t = 0.5;
        let field = semigroup_apply(&env, eps, &tuple, t, 12.0).unwrap();
        let exact = field.value_at(&[0]).unwrap();
        let n = 40_000usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let states = crate::simulate::walk_positions_at(
                    &env,
                    eps,
                    &[t],
                    &[0],
                    RngStream::new(17, i as u64),
                )
                .unwrap();
                let (p, k) = &states[0];
                tuple.eval(p, *k)
            })
            .collect();
        let est = crate::stats::McEstimate::from_samples(&samples);
        assert!(
            (est.mean - exact).abs() < est.three_sigma(),
            "mc {} vs exact {exact} (3se {})",
            est.mean,
            est.three_sigma()
        );
    }

    #[test]
    fn two_time_product_reduces_to_single_time() {
        let env = env_1d();
        let f = TestTuple::constant(2, 1.0);
        let g = TestTuple::gaussian(2, 1);
        let eps = 0.2;
        let t = 0.4;
        let joint = two_time_product(&env, eps, &f, &g, 0.0, t, 12.0, &[0]).unwrap();
        let single = semigroup_apply(&env, eps, &g, t, 12.0)
            .unwrap()
            .value_at(&[0])
            .unwrap();
        assert!((joint - single).abs() < 1e-12);
    }
}
