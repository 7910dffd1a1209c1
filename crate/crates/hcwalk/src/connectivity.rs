//! Connectivity analysis of periodic lifts.
//!
//! A fast component is a set of torus cells with jump edges between them.
//! Its periodic lift lives on the full lattice; whether that lift is one
//! unbounded connected set is decided exactly on the quotient: the quotient
//! graph must be connected and the integer lattice generated by the cycle
//! translations (voltages) must be all of Z^d. A spanning tree assigns each
//! cell a potential in Z^d; every edge then contributes the cycle voltage
//! `phi(from) + translation(edge) - phi(to)`.

use crate::environment::{JumpEntry, SiteClass, SitePartition};
use crate::geometry::TorusGeometry;
use serde::{Deserialize, Serialize};

/// Verdict for one fast component's periodic lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiftVerdict {
    /// Quotient connected and cycle-voltage lattice equal to Z^d.
    ConnectedUnbounded,
    /// All cycle voltages vanish: the lift splits into bounded pieces.
    Bounded,
    /// Quotient disconnected or the voltage lattice is a proper sublattice:
    /// the lift splits into several (possibly unbounded) pieces.
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LatticeClass {
    Zero,
    Proper,
    Full,
}

/// Classify the integer lattice spanned by `generators` inside Z^d:
/// zero, a proper sublattice, or all of Z^d. Exact integer arithmetic
/// (unimodular row operations preserve the lattice and the determinant).
fn lattice_class(generators: &[Vec<i64>], dim: usize) -> LatticeClass {
    let mut rows: Vec<Vec<i128>> = generators
        .iter()
        .filter(|g| g.iter().any(|&x| x != 0))
        .map(|g| g.iter().map(|&x| x as i128).collect())
        .collect();
    if rows.is_empty() {
        return LatticeClass::Zero;
    }
    let mut rank = 0usize;
    let mut det: i128 = 1;
    for col in 0..dim {
        // gcd-eliminate column `col` below the current pivot row
        loop {
            let mut nonzero: Vec<usize> = (rank..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nonzero.is_empty() {
                break;
            }
            if nonzero.len() == 1 {
                rows.swap(rank, nonzero[0]);
                break;
            }
            // reduce the larger entry by the smaller
            nonzero.sort_by_key(|&r| rows[r][col].abs());
            let (small, big) = (nonzero[0], nonzero[1]);
            let q = rows[big][col] / rows[small][col];
            for c in 0..dim {
                let sub = q * rows[small][c];
                rows[big][c] -= sub;
            }
        }
        if rank < rows.len() && rows[rank][col] != 0 {
            det = det.saturating_mul(rows[rank][col]);
            rank += 1;
            if rank == dim {
                break;
            }
        }
    }
    if rank < dim {
        LatticeClass::Proper
    } else if det.abs() == 1 {
        LatticeClass::Full
    } else {
        LatticeClass::Proper
    }
}

/// Quotient-graph analysis of one edge set over a cell subset.
/// Edges are `(from_cell, offset, to_cell)` with both endpoints in `cells`.
fn analyze(
    geometry: &TorusGeometry,
    cells: &[usize],
    edges: &[(usize, Vec<i64>, usize)],
) -> (bool, LatticeClass) {
    let dim = geometry.dim();
    if cells.is_empty() {
        return (true, LatticeClass::Zero);
    }
    let mut local = vec![usize::MAX; geometry.cell_count()];
    for (i, &c) in cells.iter().enumerate() {
        local[c] = i;
    }
    // BFS on the quotient, assigning lattice potentials along a tree
    let mut potential: Vec<Option<Vec<i64>>> = vec![None; cells.len()];
    potential[0] = Some(vec![0; dim]);
    let mut queue = std::collections::VecDeque::from([0usize]);
    // translation per directed edge, indexed by edge list position
    let translations: Vec<Vec<i64>> = edges
        .iter()
        .map(|(from, offset, _)| geometry.translation(&geometry.cell_coord(*from), offset))
        .collect();
    let mut edge_at: Vec<Vec<(usize, bool)>> = vec![Vec::new(); cells.len()]; // (edge idx, forward)
    for (i, (from, _, to)) in edges.iter().enumerate() {
        edge_at[local[*from]].push((i, true));
        edge_at[local[*to]].push((i, false));
    }
    while let Some(u) = queue.pop_front() {
        for &(ei, forward) in &edge_at[u] {
            let (from, _, to) = &edges[ei];
            let (a, b) = if forward {
                (local[*from], local[*to])
            } else {
                (local[*to], local[*from])
            };
            debug_assert_eq!(a, u);
            if potential[b].is_none() {
                let t = &translations[ei];
                let pa = potential[a].as_ref().unwrap();
                let pb: Vec<i64> = if forward {
                    pa.iter().zip(t).map(|(x, y)| x + y).collect()
                } else {
                    pa.iter().zip(t).map(|(x, y)| x - y).collect()
                };
                potential[b] = Some(pb);
                queue.push_back(b);
            }
        }
    }
    let connected = potential.iter().all(Option::is_some);
    if !connected {
        return (false, LatticeClass::Zero);
    }
    // cycle voltages of every edge (tree edges contribute zero)
    let mut voltages: Vec<Vec<i64>> = Vec::new();
    for (i, (from, _, to)) in edges.iter().enumerate() {
        let pa = potential[local[*from]].as_ref().unwrap();
        let pb = potential[local[*to]].as_ref().unwrap();
        let t = &translations[i];
        let voltage: Vec<i64> = pa
            .iter()
            .zip(t)
            .zip(pb)
            .map(|((a, tr), b)| a + tr - b)
            .collect();
        if voltage.iter().any(|&x| x != 0) {
            voltages.push(voltage);
        }
    }
    (true, lattice_class(&voltages, dim))
}

/// Decide, for every fast component, whether its periodic lift is one
/// unbounded connected set. Only entries with `p0 > 0` between cells of the
/// same component count as edges.
pub fn lift_connectivity(
    geometry: &TorusGeometry,
    partition: &SitePartition,
    rows: &[Vec<JumpEntry>],
) -> Vec<LiftVerdict> {
    let mut verdicts = Vec::with_capacity(partition.n_fast);
    for comp in 0..partition.n_fast {
        let cells = &partition.component_cells[comp];
        let mut edges = Vec::new();
        for &cell in cells {
            for e in &rows[cell] {
                if e.p0 > crate::environment::WEIGHT_TOL
                    && partition.class_of_cell[e.target] == SiteClass::Fast(comp)
                {
                    edges.push((cell, e.offset.clone(), e.target));
                }
            }
        }
        let (connected, class) = analyze(geometry, cells, &edges);
        let verdict = if !connected {
            LiftVerdict::Disconnected
        } else {
            match class {
                LatticeClass::Full => LiftVerdict::ConnectedUnbounded,
                LatticeClass::Zero => LiftVerdict::Bounded,
                LatticeClass::Proper => LiftVerdict::Disconnected,
            }
        };
        verdicts.push(verdict);
    }
    verdicts
}

/// Irreducibility of the full walk on the lattice: the quotient graph over
/// all cells with `p0 > 0` or `v != 0` edges must be connected and its cycle
/// voltages must span Z^d.
pub fn walk_irreducible(geometry: &TorusGeometry, rows: &[Vec<JumpEntry>]) -> bool {
    let cells: Vec<usize> = (0..geometry.cell_count()).collect();
    let mut edges = Vec::new();
    for (cell, row) in rows.iter().enumerate() {
        for e in row {
            if e.p0 > crate::environment::WEIGHT_TOL
                || e.v.abs() > crate::environment::WEIGHT_TOL
            {
                edges.push((cell, e.offset.clone(), e.target));
            }
        }
    }
    if edges.is_empty() {
        return false;
    }
    let (connected, class) = analyze(geometry, &cells, &edges);
    connected && class == LatticeClass::Full
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Environment, EnvironmentSpec};
    use crate::presets;

    #[test]
    fn one_dimensional_lift_is_connected() {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        assert_eq!(env.lift_connectivity(), vec![LiftVerdict::ConnectedUnbounded]);
    }

    #[test]
    fn no_jumps_is_bounded() {
        // fast cell with no off-diagonal p0: the lift is a single point per
        // period copy
        let spec = EnvironmentSpec::new(vec![2])
            .site(&[0], "fast:1")
            .site(&[1], "astral")
            .symmetric_edge(&[0], &[1], 0.0, 1.0)
            .symmetric_edge(&[1], &[1], 0.0, 1.0);
        let env = Environment::from_spec_unchecked(&spec).unwrap();
        assert_eq!(env.lift_connectivity(), vec![LiftVerdict::Bounded]);
    }

    #[test]
    fn sublattice_jumps_disconnect() {
        // jumps of +-4 on period 2: voltage lattice 2Z, lift splits in two
        let spec = EnvironmentSpec::new(vec![2])
            .site(&[0], "fast:1")
            .site(&[1], "astral")
            .edge(&[0], &[4], 0.5, 0.0)
            .edge(&[0], &[-4], 0.5, 0.0)
            .symmetric_edge(&[0], &[1], 0.0, 1.0)
            .symmetric_edge(&[1], &[1], 0.0, 1.0);
        let env = Environment::from_spec_unchecked(&spec).unwrap();
        assert_eq!(env.lift_connectivity(), vec![LiftVerdict::Disconnected]);
    }

    #[test]
    fn axis_only_jumps_in_2d_disconnect() {
        // d = 2, period (2,2), one fast cell, jumps +-(2,0) only:
        // H = Z x {0}, vertical copies never meet
        let spec = EnvironmentSpec::new(vec![2, 2])
            .site(&[0, 0], "fast:1")
            .site(&[0, 1], "astral")
            .site(&[1, 0], "astral")
            .site(&[1, 1], "astral")
            .edge(&[0, 0], &[2, 0], 0.5, 0.0)
            .edge(&[0, 0], &[-2, 0], 0.5, 0.0)
            .symmetric_edge(&[0, 0], &[0, 1], 0.0, 1.0)
            .symmetric_edge(&[1, 0], &[0, 1], 0.0, 1.0)
            .symmetric_edge(&[1, 1], &[0, 1], 0.0, 1.0);
        let env = Environment::from_spec_unchecked(&spec).unwrap();
        assert_eq!(env.lift_connectivity(), vec![LiftVerdict::Disconnected]);
    }

    #[test]
    fn two_dimensional_preset_is_connected() {
        let env = Environment::from_spec(&presets::two_dimensional()).unwrap();
        assert_eq!(env.lift_connectivity(), vec![LiftVerdict::ConnectedUnbounded]);
    }

    #[test]
    fn lattice_class_cases() {
        assert_eq!(lattice_class(&[], 2), LatticeClass::Zero);
        assert_eq!(lattice_class(&[vec![0, 0]], 2), LatticeClass::Zero);
        assert_eq!(lattice_class(&[vec![1, 0]], 2), LatticeClass::Proper);
        assert_eq!(
            lattice_class(&[vec![1, 0], vec![0, 1]], 2),
            LatticeClass::Full
        );
        assert_eq!(
            lattice_class(&[vec![2, 0], vec![0, 1]], 2),
            LatticeClass::Proper
        );
        // gcd combinations: (2) and (3) generate Z
        assert_eq!(lattice_class(&[vec![2], vec![3]], 1), LatticeClass::Full);
        assert_eq!(lattice_class(&[vec![2], vec![4]], 1), LatticeClass::Proper);
        // (1,1) and (1,-1) generate an index-2 sublattice of Z^2
        assert_eq!(
            lattice_class(&[vec![1, 1], vec![1, -1]], 2),
            LatticeClass::Proper
        );
    }
}
