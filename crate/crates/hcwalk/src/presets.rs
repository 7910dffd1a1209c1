//! Ready-made environments: small worked examples used across the test
//! suites and the CLI documentation, plus a seeded random generator of valid
//! environments for fuzzing the solvers.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::environment::EnvironmentSpec;

/// d = 1, period 2, one fast cell (0) with jumps of +-2 and one astral cell
/// (1). Contrast couplings of weight 1 between neighbours, balanced by
/// negative v on the fast links so that eps_max = sqrt(1/2).
///
/// Effective quantities: Theta = 2, alpha = lambda = (2, 2), mu off-diagonal 1.
pub fn one_dimensional() -> EnvironmentSpec {
    EnvironmentSpec::new(vec![2])
        .site(&[0], "fast:1")
        .site(&[1], "astral")
        .edge(&[0], &[2], 0.5, -1.0)
        .edge(&[0], &[-2], 0.5, -1.0)
        .symmetric_edge(&[0], &[1], 0.0, 1.0)
        .symmetric_edge(&[0], &[-1], 0.0, 1.0)
}

/// Two decoupled copies of the one-dimensional example on period 4:
/// fast components {0} and {2} with jumps of +-4, astral cells 1 and 3.
/// Theta^1 = Theta^2 = 8; the full 4x4 rate table has lambda = 2 everywhere.
pub fn two_component() -> EnvironmentSpec {
    EnvironmentSpec::new(vec![4])
        .site(&[0], "fast:1")
        .site(&[1], "astral")
        .site(&[2], "fast:2")
        .site(&[3], "astral")
        .edge(&[0], &[4], 0.5, -1.0)
        .edge(&[0], &[-4], 0.5, -1.0)
        .edge(&[2], &[4], 0.5, -1.0)
        .edge(&[2], &[-4], 0.5, -1.0)
        .symmetric_edge(&[0], &[1], 0.0, 1.0)
        .symmetric_edge(&[0], &[-1], 0.0, 1.0)
        .symmetric_edge(&[2], &[1], 0.0, 1.0)
        .symmetric_edge(&[2], &[-1], 0.0, 1.0)
}

/// d = 2, period (2,2), one fast cell at the origin with axis jumps of
/// length 2 (Theta = identity), three astral cells each coupled to the fast
/// orbit with weight 0.5 per direction.
pub fn two_dimensional() -> EnvironmentSpec {
    EnvironmentSpec::new(vec![2, 2])
        .site(&[0, 0], "fast:1")
        .site(&[0, 1], "astral")
        .site(&[1, 0], "astral")
        .site(&[1, 1], "astral")
        .edge(&[0, 0], &[2, 0], 0.25, -0.75)
        .edge(&[0, 0], &[-2, 0], 0.25, -0.75)
        .edge(&[0, 0], &[0, 2], 0.25, -0.75)
        .edge(&[0, 0], &[0, -2], 0.25, -0.75)
        .symmetric_edge(&[0, 0], &[0, 1], 0.0, 0.5)
        .symmetric_edge(&[0, 0], &[0, -1], 0.0, 0.5)
        .symmetric_edge(&[0, 0], &[1, 0], 0.0, 0.5)
        .symmetric_edge(&[0, 0], &[-1, 0], 0.0, 0.5)
        .symmetric_edge(&[0, 0], &[1, 1], 0.0, 0.5)
        .symmetric_edge(&[0, 0], &[-1, -1], 0.0, 0.5)
}

/// d = 1, period 6, a three-cell fast component {0,1,2} with asymmetric jump
/// weights. All three correctors are nontrivial here:
/// h = (-9/13, 2/13, 7/13) on the component and Phi(h) is non-constant.
pub fn three_cell_component() -> EnvironmentSpec {
    EnvironmentSpec::new(vec![6])
        .site(&[0], "fast:1")
        .site(&[1], "fast:1")
        .site(&[2], "fast:1")
        .site(&[3], "astral")
        .site(&[4], "astral")
        .site(&[5], "astral")
        // fast skeleton: 0 - 1 - 2 - (6 = 0 + period)
        .symmetric_edge(&[0], &[1], 0.3, -0.2)
        .symmetric_edge(&[1], &[1], 0.4, 0.0)
        .symmetric_edge(&[2], &[4], 0.2, 0.0)
        // contrast couplings into the astral sites (non-constant over B)
        .symmetric_edge(&[0], &[3], 0.0, 0.6)
        .symmetric_edge(&[1], &[3], 0.0, 0.4)
        .symmetric_edge(&[2], &[3], 0.0, 0.5)
        .symmetric_edge(&[0], &[-2], 0.0, 0.3)
        .symmetric_edge(&[1], &[4], 0.0, 0.2)
        .symmetric_edge(&[2], &[2], 0.0, 0.1)
        // astral-astral coupling
        .symmetric_edge(&[3], &[1], 0.0, 0.25)
}

/// Deterministic random valid environment, d in {1, 2}, cell count <= 36.
///
/// Construction guarantees validity: each fast component gets a connecting
/// chain plus full-period axis jumps (voltage lattice = Z^d), row sums are
/// scaled below 1, and every astral site is coupled to a fast component.
pub fn randomized(seed: u64) -> EnvironmentSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = if rng.random_bool(0.5) { 1 } else { 2 };
    let period: Vec<i64> = if dim == 1 {
        vec![rng.random_range(3..=8)]
    } else {
        vec![rng.random_range(2..=4), rng.random_range(2..=4)]
    };
    let geometry = crate::geometry::TorusGeometry::new(period.clone()).unwrap();
    let cell_count = geometry.cell_count();

    // shuffle cells, split into fast components and astral sites
    let mut cells: Vec<usize> = (0..cell_count).collect();
    cells.shuffle(&mut rng);
    let n_fast = if cell_count >= 5 && rng.random_bool(0.4) { 2 } else { 1 };
    let max_fast_cells = cell_count - 1; // at least one astral site
    let mut sizes = vec![1usize; n_fast];
    let mut budget = max_fast_cells - n_fast;
    for s in sizes.iter_mut() {
        let extra = rng.random_range(0..=budget.min(3));
        *s += extra;
        budget -= extra;
    }
    let mut spec = EnvironmentSpec::new(period.clone());
    let mut comp_cells: Vec<Vec<usize>> = Vec::new();
    let mut cursor = 0usize;
    for (i, &size) in sizes.iter().enumerate() {
        let chunk: Vec<usize> = cells[cursor..cursor + size].to_vec();
        cursor += size;
        for &c in &chunk {
            spec = spec.site(&geometry.cell_coord(c), &format!("fast:{}", i + 1));
        }
        comp_cells.push(chunk);
    }
    let astral: Vec<usize> = cells[cursor..].to_vec();
    for &c in &astral {
        spec = spec.site(&geometry.cell_coord(c), "astral");
    }

    // dedup keys for both directions of a symmetric pair
    let mut used: std::collections::BTreeSet<(usize, Vec<i64>)> = std::collections::BTreeSet::new();
    let reserve = |geometry: &crate::geometry::TorusGeometry,
                       used: &mut std::collections::BTreeSet<(usize, Vec<i64>)>,
                       from: &[i64],
                       offset: &[i64]| {
        let from_cell = geometry.cell_index(from);
        let to: Vec<i64> = from.iter().zip(offset).map(|(f, o)| f + o).collect();
        let to_cell = geometry.cell_index(&to);
        let back: Vec<i64> = offset.iter().map(|o| -o).collect();
        let k1 = (from_cell, offset.to_vec());
        let k2 = (to_cell, back);
        if used.contains(&k1) || used.contains(&k2) {
            false
        } else {
            used.insert(k1);
            used.insert(k2);
            true
        }
    };

    // fast skeletons: weights first, scaled into row budgets afterwards
    let mut p_edges: Vec<(Vec<i64>, Vec<i64>, f64)> = Vec::new(); // (from, offset, weight)
    for chunk in &comp_cells {
        for w in chunk.windows(2) {
            let from = geometry.cell_coord(w[0]);
            let to = geometry.cell_coord(w[1]);
            let offset: Vec<i64> = to.iter().zip(&from).map(|(t, f)| t - f).collect();
            if reserve(&geometry, &mut used, &from, &offset) {
                p_edges.push((from, offset, rng.random_range(0.2..1.0)));
            }
        }
        // full-period axis loops anchor the voltage lattice at Z^d
        let anchor = geometry.cell_coord(chunk[0]);
        for axis in 0..dim {
            let mut offset = vec![0i64; dim];
            offset[axis] = period[axis];
            if reserve(&geometry, &mut used, &anchor, &offset) {
                p_edges.push((anchor.clone(), offset, rng.random_range(0.2..1.0)));
            }
        }
        // occasional extra chord
        if chunk.len() >= 2 && rng.random_bool(0.5) {
            let a = chunk[rng.random_range(0..chunk.len())];
            let b = chunk[rng.random_range(0..chunk.len())];
            let from = geometry.cell_coord(a);
            let to = geometry.cell_coord(b);
            let mut offset: Vec<i64> = to.iter().zip(&from).map(|(t, f)| t - f).collect();
            let axis = rng.random_range(0..dim);
            let sign: i64 = if rng.random_bool(0.5) { 1 } else { -1 };
            offset[axis] += sign * period[axis];
            if offset.iter().any(|&o| o != 0) && reserve(&geometry, &mut used, &from, &offset) {
                p_edges.push((from, offset, rng.random_range(0.2..1.0)));
            }
        }
    }
    // scale so that every row keeps positive stay-put mass
    let mut row_load = vec![0.0f64; cell_count];
    for (from, offset, w) in &p_edges {
        row_load[geometry.cell_index(from)] += w;
        let to: Vec<i64> = from.iter().zip(offset).map(|(f, o)| f + o).collect();
        row_load[geometry.cell_index(&to)] += w;
    }
    let max_load = row_load.iter().cloned().fold(0.0, f64::max).max(1e-9);
    let scale = 0.85 / max_load;
    for (from, offset, w) in &p_edges {
        spec = spec.symmetric_edge(from, offset, w * scale, 0.0);
    }

    // contrast couplings: every astral site to one cell of every component
    for &a in &astral {
        let ac = geometry.cell_coord(a);
        for chunk in &comp_cells {
            let f = chunk[rng.random_range(0..chunk.len())];
            let fc = geometry.cell_coord(f);
            let offset: Vec<i64> = fc.iter().zip(&ac).map(|(t, s)| t - s).collect();
            if reserve(&geometry, &mut used, &ac, &offset) {
                spec = spec.symmetric_edge(&ac, &offset, 0.0, rng.random_range(0.5..1.5));
            }
        }
        // occasional astral-astral link
        if astral.len() >= 2 && rng.random_bool(0.3) {
            let b = astral[rng.random_range(0..astral.len())];
            if b != a {
                let bc = geometry.cell_coord(b);
                let offset: Vec<i64> = bc.iter().zip(&ac).map(|(t, s)| t - s).collect();
                if reserve(&geometry, &mut used, &ac, &offset) {
                    spec = spec.symmetric_edge(&ac, &offset, 0.0, rng.random_range(0.2..0.8));
                }
            }
        }
    }
    spec
}
