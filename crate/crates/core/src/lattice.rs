//! Integer lattice points and the finite cubic windows the solver works on.
//!
//! Truncation windows are ℓ∞ balls `|q|∞ ≤ bound`; every analytic weight
//! (norms, decay envelopes, smoothness sums) uses the ℓ¹ length `|q|₁`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i32>);

impl LatticePoint {
    pub fn zero(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize, sign: i32) -> Self {
        let mut v = vec![0; dim];
        v[axis] = sign;
        LatticePoint(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn l1(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn linf(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// `ω·q`.
    pub fn dot(&self, omega: &[f64]) -> f64 {
        self.0.iter().zip(omega).map(|(&c, &w)| c as f64 * w).sum()
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }
}

impl From<Vec<i32>> for LatticePoint {
    fn from(v: Vec<i32>) -> Self {
        LatticePoint(v)
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The cube `{q : |q|∞ ≤ bound}` with a dense, lexicographic indexing.
///
/// Index `i` corresponds to the mixed-radix digits `q_k + bound`, with the
/// last axis varying fastest. The window is symmetric, so `index(-q)` is
/// `len() - 1 - index(q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeWindow {
    dim: usize,
    bound: u32,
}

impl LatticeWindow {
    pub fn new(dim: usize, bound: u32) -> Self {
        assert!(dim > 0, "lattice dimension must be positive");
        LatticeWindow { dim, bound }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> u32 {
        self.bound
    }

    fn side(&self) -> usize {
        2 * self.bound as usize + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, q: &LatticePoint) -> bool {
        q.dim() == self.dim && q.linf() <= self.bound
    }

    pub fn index(&self, q: &LatticePoint) -> Option<usize> {
        if !self.contains(q) {
            return None;
        }
        let side = self.side();
        Some(q.0.iter().fold(0usize, |acc, &c| acc * side + (c + self.bound as i32) as usize))
    }

    pub fn point(&self, mut index: usize) -> LatticePoint {
        let side = self.side();
        let mut v = vec![0i32; self.dim];
        for k in (0..self.dim).rev() {
            v[k] = (index % side) as i32 - self.bound as i32;
            index /= side;
        }
        LatticePoint(v)
    }

    pub fn zero_index(&self) -> usize {
        self.len() / 2
    }

    /// Index of `-q` given the index of `q`.
    pub fn mirror(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Every lattice point with `0 < |q|₁ ≤ radius`, in lexicographic order.
pub fn l1_ball_points(dim: usize, radius: u32) -> Vec<LatticePoint> {
    let mut out = Vec::new();
    let mut cur = vec![0i32; dim];
    fn rec(axis: usize, budget: i32, cur: &mut Vec<i32>, out: &mut Vec<LatticePoint>) {
        if axis == cur.len() {
            if cur.iter().any(|&c| c != 0) {
                out.push(LatticePoint(cur.clone()));
            }
            return;
        }
        for c in -budget..=budget {
            cur[axis] = c;
            rec(axis + 1, budget - c.abs(), cur, out);
        }
        cur[axis] = 0;
    }
    rec(0, radius as i32, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_index_roundtrip_and_mirror() {
        let w = LatticeWindow::new(3, 2);
        assert_eq!(w.len(), 125);
        for i in 0..w.len() {
            let q = w.point(i);
            assert_eq!(w.index(&q), Some(i));
            assert_eq!(w.index(&-&q), Some(w.mirror(i)));
        }
        assert!(w.point(w.zero_index()).is_zero());
    }

    #[test]
    fn norms() {
        let q = LatticePoint(vec![3, -4, 1]);
        assert_eq!(q.l1(), 8);
        assert_eq!(q.linf(), 4);
        assert_eq!(q.dot(&[1.0, 0.5, 2.0]), 3.0);
    }

    #[test]
    fn l1_ball_counts() {
        // |q|₁ ≤ r in Z²: 2r(r+1) nonzero points
        assert_eq!(l1_ball_points(2, 5).len(), 60);
        assert_eq!(l1_ball_points(1, 3).len(), 6);
        assert!(l1_ball_points(3, 2).iter().all(|q| q.l1() <= 2 && !q.is_zero()));
    }
}
