//! Discrete torus geometry: the periodicity cell and reductions of lattice
//! points onto it.

use serde::{Deserialize, Serialize};

/// The periodicity cell, identified with a d-dimensional discrete torus.
///
/// Cells are indexed linearly in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGeometry {
    dim: usize,
    period: Vec<i64>,
    cell_count: usize,
}

impl TorusGeometry {
    pub fn new(period: Vec<i64>) -> Result<Self, String> {
        if period.is_empty() {
            return Err("period must have at least one entry".into());
        }
        if period.iter().any(|&p| p < 1) {
            return Err(format!("period entries must be >= 1, got {:?}", period));
        }
        let cell_count = period.iter().map(|&p| p as usize).product();
        Ok(TorusGeometry {
            dim: period.len(),
            period,
            cell_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> &[i64] {
        &self.period
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    /// Euclidean (non-negative) remainder of each coordinate modulo the period.
    pub fn reduce(&self, x: &[i64]) -> Vec<i64> {
        debug_assert_eq!(x.len(), self.dim);
        x.iter()
            .zip(&self.period)
            .map(|(&xi, &p)| xi.rem_euclid(p))
            .collect()
    }

    /// Linear index of the cell containing the lattice point `x`.
    pub fn cell_index(&self, x: &[i64]) -> usize {
        debug_assert_eq!(x.len(), self.dim);
        let mut idx = 0usize;
        for (&xi, &p) in x.iter().zip(&self.period) {
            idx = idx * p as usize + xi.rem_euclid(p) as usize;
        }
        idx
    }

    /// Canonical coordinate of a cell (entries in `[0, period)`).
    pub fn cell_coord(&self, mut index: usize) -> Vec<i64> {
        debug_assert!(index < self.cell_count);
        let mut coord = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            let p = self.period[axis] as usize;
            coord[axis] = (index % p) as i64;
            index /= p;
        }
        coord
    }

    /// Number of whole periods crossed when stepping from the canonical
    /// representative of `from` by `offset`. The result `t` satisfies
    /// `from + offset = reduce(from + offset) + t * period` componentwise.
    pub fn translation(&self, from: &[i64], offset: &[i64]) -> Vec<i64> {
        debug_assert_eq!(from.len(), self.dim);
        debug_assert_eq!(offset.len(), self.dim);
        from.iter()
            .zip(offset)
            .zip(&self.period)
            .map(|((&f, &o), &p)| (f + o).div_euclid(p))
            .collect()
    }

    /// Squared Euclidean length of an integer offset.
    pub fn offset_norm_sq(offset: &[i64]) -> i64 {
        offset.iter().map(|&o| o * o).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = TorusGeometry::new(vec![3, 4]).unwrap();
        assert_eq!(g.cell_count(), 12);
        for i in 0..12 {
            let c = g.cell_coord(i);
            assert_eq!(g.cell_index(&c), i);
        }
    }

    #[test]
    fn reduce_negative() {
        let g = TorusGeometry::new(vec![2]).unwrap();
        assert_eq!(g.reduce(&[-3]), vec![1]);
        assert_eq!(g.reduce(&[4]), vec![0]);
    }

    #[test]
    fn translation_counts_periods() {
        let g = TorusGeometry::new(vec![4]).unwrap();
        assert_eq!(g.translation(&[2], &[3]), vec![1]);
        assert_eq!(g.translation(&[0], &[-1]), vec![-1]);
        assert_eq!(g.translation(&[1], &[2]), vec![0]);
    }

    #[test]
    fn rejects_bad_period() {
        assert!(TorusGeometry::new(vec![]).is_err());
        assert!(TorusGeometry::new(vec![2, 0]).is_err());
    }
}
