//! Sets of ordered index pairs over an `n × n` grid.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

/// A set of ordered pairs `(i, j)` with `i, j < n`, stored as a dense bitmap.
///
/// Masks in this crate are dense (a few percent missing at most), so a flat
/// boolean grid beats any sparse structure for both lookup and iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    n: usize,
    bits: Vec<bool>,
    len: usize,
}

impl PairSet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
            len: 0,
        }
    }

    /// Every off-diagonal ordered pair.
    pub fn off_diagonal(n: usize) -> Self {
        let mut set = Self::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    set.insert(i, j);
                }
            }
        }
        set
    }

    pub fn from_pairs<I>(n: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = Self::empty(n);
        for (i, j) in pairs {
            set.insert(i, j);
        }
        set
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    /// Inserts `(i, j)`; returns `true` if it was not already present.
    ///
    /// Panics if either index is out of range.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        assert!(i < self.n && j < self.n, "pair ({i}, {j}) out of range for n = {}", self.n);
        let slot = &mut self.bits[i * self.n + j];
        if *slot {
            false
        } else {
            *slot = true;
            self.len += 1;
            true
        }
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        let slot = &mut self.bits[i * self.n + j];
        if *slot {
            *slot = false;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    /// Pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n, k % n))
    }

    pub fn intersection(&self, other: &PairSet) -> PairSet {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &PairSet) -> PairSet {
        self.zip_with(other, |a, b| a || b)
    }

    /// Pairs in `self` that are not in `other`.
    pub fn difference(&self, other: &PairSet) -> PairSet {
        self.zip_with(other, |a, b| a && !b)
    }

    fn zip_with(&self, other: &PairSet, f: impl Fn(bool, bool) -> bool) -> PairSet {
        assert_eq!(self.n, other.n, "pair sets over different dimensions");
        let bits: Vec<bool> = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let len = bits.iter().filter(|&&b| b).count();
        PairSet { n: self.n, bits, len }
    }

    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.bits[i * self.n..(i + 1) * self.n].iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for (_, j) in self.iter() {
            counts[j] += 1;
        }
        counts
    }

    /// `true` if `(j, i)` is present whenever `(i, j)` is.
    pub fn is_symmetric(&self) -> bool {
        self.iter().all(|(i, j)| self.contains(j, i))
    }

    /// 0/1 indicator matrix.
    pub fn indicator(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if self.contains(i, j) { 1.0 } else { 0.0 })
    }

    /// `P_E(m)`: keeps entries of `m` on the set, zeroes the rest.
    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.shape(), (self.n, self.n));
        DMatrix::from_fn(self.n, self.n, |i, j| if self.contains(i, j) { m[(i, j)] } else { 0.0 })
    }
}
