//! Residual harness for the generator approximation.
//!
//! Given a smooth test tuple `F`, the corrected lattice function `F_eps`
//! (leading term plus corrector expansions on fast cells, plain entries on
//! astral cells) is compared under the exact discrete generator
//! `L_eps = eps^-2 (T_eps - I)` against the analytic limit generator
//! `L = Theta : Hess + jump part`, in sup norm over a lattice window.

use crate::corrector::{CorrectorSet, EffectiveModel};
use crate::environment::Environment;
use crate::testfn::TestTuple;

#[derive(Debug, Clone)]
pub struct LemmaReport {
    /// Sup-norm of `L_eps F_eps - pi_eps L F` over the window.
    pub sup_residual: f64,
    /// Lattice point attaining the sup (unscaled coordinates).
    pub argmax: Vec<i64>,
    /// Whether the window covers the tuple support plus one jump margin, so
    /// the window sup equals the sup over the whole lattice.
    pub window_adequate: bool,
}

/// The corrected lattice function `F_eps` at the lattice point `n`
/// (unscaled; the spatial position is `eps * n`).
pub fn f_eps_at(
    env: &Environment,
    correctors: &CorrectorSet,
    tuple: &TestTuple,
    eps: f64,
    n: &[i64],
) -> f64 {
    let cell = env.geometry().cell_index(n);
    let label = env.component_index(n);
    let x: Vec<f64> = n.iter().map(|&c| eps * c as f64).collect();
    if !env.partition().is_fast_label(label) {
        return tuple.eval(&x, label);
    }
    let comp = label;
    let local = env.partition().local_index[cell];
    let d = env.dim();
    let f = &tuple.fns[label];
    let mut value = f.eval(&x);
    let grad = f.grad(&x);
    for dir in 0..d {
        value += eps * grad[dir] * correctors.h[comp][dir][local];
    }
    let hess = f.hessian(&x);
    for k in 0..d {
        for m in 0..d {
            value += eps * eps * hess[(k, m)] * correctors.g[comp][k * d + m][local];
        }
    }
    let fx = f.eval(&x);
    for (j, field) in correctors.q[comp].iter().enumerate() {
        if j == comp {
            continue;
        }
        value += eps * eps * field[local] * (fx - tuple.eval(&x, j));
    }
    value
}

/// Exact discrete generator applied to `F_eps` at lattice point `n`.
fn l_eps_f_eps(
    env: &Environment,
    correctors: &CorrectorSet,
    tuple: &TestTuple,
    eps: f64,
    n: &[i64],
) -> f64 {
    let cell = env.geometry().cell_index(n);
    let here = f_eps_at(env, correctors, tuple, eps, n);
    let mut acc = 0.0;
    for e in env.row(cell) {
        let p = e.p0 + eps * eps * e.v;
        if p == 0.0 {
            continue;
        }
        let m: Vec<i64> = n.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
        acc += p * (f_eps_at(env, correctors, tuple, eps, &m) - here);
    }
    acc / (eps * eps)
}

/// The limit generator applied to `F` at position `x` with label `k`:
/// diffusion part on fast labels plus the jump part everywhere.
pub fn limit_generator(model: &EffectiveModel, tuple: &TestTuple, x: &[f64], label: usize) -> f64 {
    let mut acc = 0.0;
    if model.is_fast_label(label) {
        let hess = tuple.fns[label].hessian(x);
        acc += model.theta[label].frobenius_dot(&hess);
    }
    let fk = tuple.eval(x, label);
    for j in 0..model.n_labels() {
        if j == label {
            continue;
        }
        acc += model.alpha[(label, j)] * (tuple.eval(x, j) - fk);
    }
    acc
}

/// Sup-norm residual of the generator approximation over the lattice window
/// `|eps * n_i| <= radius`.
pub fn lemma_residual(
    env: &Environment,
    correctors: &CorrectorSet,
    model: &EffectiveModel,
    tuple: &TestTuple,
    eps: f64,
    radius: f64,
) -> LemmaReport {
    assert!(eps > 0.0, "eps must be positive");
    assert_eq!(tuple.n_labels(), env.n_labels(), "tuple/label mismatch");
    let d = env.dim();
    let n_max = (radius / eps).floor() as i64;
    let window_adequate = match tuple.support_radius() {
        Some(s) => radius >= s + env.c1() as f64 * eps,
        None => false,
    };

    let mut sup = 0.0f64;
    let mut argmax = vec![0i64; d];
    let mut point = vec![-n_max; d];
    loop {
        let x: Vec<f64> = point.iter().map(|&c| eps * c as f64).collect();
        let label = env.component_index(&point);
        let lhs = l_eps_f_eps(env, correctors, tuple, eps, &point);
        let rhs = limit_generator(model, tuple, &x, label);
        let diff = (lhs - rhs).abs();
        if diff > sup {
            sup = diff;
            argmax = point.clone();
        }
        // advance the odometer
        let mut axis = 0;
        loop {
            point[axis] += 1;
            if point[axis] <= n_max {
                break;
            }
            point[axis] = -n_max;
            axis += 1;
            if axis == d {
                return LemmaReport {
                    sup_residual: sup,
                    argmax,
                    window_adequate,
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::solve_effective_model;
    use crate::presets;
    use crate::testfn::{TestFn, TestTuple};

    #[test]
    fn constants_are_annihilated() {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        let (model, correctors) = solve_effective_model(&env).unwrap();
        let tuple = TestTuple::constant(env.n_labels(), 3.0);
        let report = lemma_residual(&env, &correctors, &model, &tuple, 0.2, 4.0);
        assert!(report.sup_residual < 1e-12, "sup {}", report.sup_residual);
        assert!(!report.window_adequate); // constants have no support radius
    }

    #[test]
    fn residual_decays_on_the_one_dimensional_example() {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        let (model, correctors) = solve_effective_model(&env).unwrap();
        let tuple = TestTuple::gaussian(env.n_labels(), env.dim());
        let r = 8.0;
        let res: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&eps| {
                lemma_residual(&env, &correctors, &model, &tuple, eps, r).sup_residual
            })
            .collect();
        assert!(res[0] > res[1] && res[1] > res[2], "not decreasing: {res:?}");
    }

    #[test]
    fn linear_tuple_sees_only_corrector_order_terms() {
        // globally linear identical entries: the limit generator is zero and
        // the discrete side is O(eps), driven by the contrast couplings
        let env = Environment::from_spec(&presets::three_cell_component()).unwrap();
        let (model, correctors) = solve_effective_model(&env).unwrap();
        let f = TestFn::Linear {
            gradient: vec![1.0],
        };
        let tuple = TestTuple::new("linear", vec![f.clone(), f.clone(), f.clone(), f]);
        let r1 = lemma_residual(&env, &correctors, &model, &tuple, 0.1, 3.0);
        let r2 = lemma_residual(&env, &correctors, &model, &tuple, 0.05, 3.0);
        assert!(r1.sup_residual < 2.0);
        assert!(r2.sup_residual < 0.62 * r1.sup_residual + 1e-9);
    }
}
