use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cell::MAX_DIM;

/// A multi-index `β ∈ Nⁿ` for `n ≤ 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    orders: [u32; MAX_DIM],
    dim: usize,
}

impl MultiIndex {
    pub fn new(orders: &[u32]) -> Self {
        assert!(orders.len() <= MAX_DIM, "multi-index longer than {MAX_DIM}");
        let mut o = [0; MAX_DIM];
        o[..orders.len()].copy_from_slice(orders);
        Self {
            orders: o,
            dim: orders.len(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn unit(dim: usize, j: usize) -> Self {
        let mut m = Self::zero(dim);
        m.orders[j] = 1;
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn orders(&self) -> &[u32] {
        &self.orders[..self.dim]
    }

    #[inline]
    pub fn get(&self, j: usize) -> u32 {
        self.orders[j]
    }

    /// `|β|`.
    #[inline]
    pub fn order(&self) -> usize {
        self.orders().iter().map(|&v| v as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.order() == 0
    }

    pub fn with(&self, j: usize, value: u32) -> Self {
        let mut m = *self;
        m.orders[j] = value;
        m
    }

    pub fn add(&self, other: &MultiIndex) -> Self {
        let mut m = *self;
        for j in 0..self.dim {
            m.orders[j] += other.orders[j];
        }
        m
    }

    /// The axis list obtained by repeating axis `j` `β_j` times,
    /// e.g. `(2,1)` gives `[0, 0, 1]`.
    pub fn axes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.order());
        for j in 0..self.dim {
            for _ in 0..self.orders[j] {
                out.push(j);
            }
        }
        out
    }

    /// `ξ^β` for a real vector `ξ`.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        let mut p = 1.0;
        for j in 0..self.dim {
            p *= xi[j].powi(self.orders[j] as i32);
        }
        p
    }

    /// All multi-indices of dimension `dim` with `|β| = order`.
    pub fn of_order(dim: usize, order: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; dim];
        fn rec(j: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if j + 1 == cur.len() {
                cur[j] = left as u32;
                out.push(MultiIndex::new(cur));
                return;
            }
            for v in (0..=left).rev() {
                cur[j] = v as u32;
                rec(j + 1, left - v, cur, out);
            }
        }
        rec(0, order, &mut cur, &mut out);
        out
    }

    /// All multi-indices with `|β| ≤ max_order`, by increasing order.
    pub fn up_to(dim: usize, max_order: usize) -> Vec<MultiIndex> {
        (0..=max_order)
            .flat_map(|k| Self::of_order(dim, k))
            .collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.orders().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(MultiIndex::of_order(2, 2).len(), 3);
        assert_eq!(MultiIndex::of_order(3, 2).len(), 6);
        assert_eq!(MultiIndex::of_order(3, 3).len(), 10);
        assert_eq!(MultiIndex::up_to(3, 3).len(), 20);
        assert_eq!(MultiIndex::up_to(2, 3).len(), 10);
    }

    #[test]
    fn axes_and_display() {
        let b = MultiIndex::new(&[2, 1]);
        assert_eq!(b.axes(), vec![0, 0, 1]);
        assert_eq!(b.order(), 3);
        assert_eq!(b.to_string(), "(2,1)");
        assert_eq!(MultiIndex::unit(3, 2).orders(), &[0, 0, 1]);
        assert_eq!(b.monomial(&[2.0, 3.0]), 12.0);
    }
}
