
use rand::Rng;

use crate::graph_store::NodeId;

/// Row-major `rows x cols` table of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "table data has the wrong length");
        Self { rows, cols, data }
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..=1.0) * scale).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in 0..self.rows {
            axpy(&mut mean, 1.0, self.row(r));
        }
        mean.iter_mut().for_each(|x| *x /= self.rows as f64);
        mean
    }

    /// Row-wise concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Table) -> Table {
        assert_eq!(self.rows, other.rows);
        let mut out = Table::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            let row = out.row_mut(r);
            row[..self.cols].copy_from_slice(self.row(r));
            row[self.cols..].copy_from_slice(other.row(r));
        }
        out
    }

    pub fn dot_rows(&self, a: usize, b: usize) -> f64 {
        dot(self.row(a), self.row(b))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Gradient rows keyed by node; rows never touched are absent.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    cols: usize,
    /// Position of each row's block in `data`, `ABSENT` if untouched.
    slots: Vec<u32>,
    data: Vec<f64>,
}

const ABSENT: u32 = u32::MAX;

impl SparseGrad {
    pub fn new(cols: usize) -> Self {
        Self { cols, slots: Vec::new(), data: Vec::new() }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_mut(&mut self, r: NodeId) -> &mut [f64] {
        if r >= self.slots.len() {
            self.slots.resize(r + 1, ABSENT);
        }
        if self.slots[r] == ABSENT {
            self.slots[r] = (self.data.len() / self.cols.max(1)) as u32;
            self.data.resize(self.data.len() + self.cols, 0.0);
        }
        let start = self.slots[r] as usize * self.cols;
        &mut self.data[start..start + self.cols]
    }

    /// `grad[r] += alpha * x`.
    pub fn add(&mut self, r: NodeId, alpha: f64, x: &[f64]) {
        axpy(self.row_mut(r), alpha, x);
    }

    pub fn get(&self, r: NodeId) -> Option<&[f64]> {
        match self.slots.get(r) {
            Some(&s) if s != ABSENT => {
                let start = s as usize * self.cols;
                Some(&self.data[start..start + self.cols])
            }
            _ => None,
        }
    }

    /// Touched rows in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        (0..self.slots.len()).filter_map(move |r| self.get(r).map(|g| (r, g)))
    }

    pub fn touched(&self) -> usize {
        self.data.len() / self.cols.max(1)
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Dense copy with `n` rows.
    pub fn to_table(&self, n: usize) -> Table {
        let mut t = Table::zeros(n, self.cols);
        for (r, v) in self.iter() {
            t.row_mut(r).copy_from_slice(v);
        }
        t
    }
}

impl PartialEq for SparseGrad {
    fn eq(&self, other: &Self) -> bool {
        self.cols == other.cols && self.iter().eq(other.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_concat() {
        let a = Table::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Table::from_vec(2, 1, vec![5.0, 6.0]);
        let c = a.hconcat(&b);
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(a.dot_rows(0, 1), 11.0);
        assert_eq!(a.column_mean(), vec![2.0, 3.0]);
    }

    #[test]
    fn sparse_grad_accumulates() {
        let mut g = SparseGrad::new(2);
        g.add(3, 2.0, &[1.0, 1.0]);
        g.add(3, 1.0, &[0.5, 0.0]);
        assert_eq!(g.get(3), Some(&[2.5, 2.0][..]));
        assert_eq!(g.touched(), 1);
        assert!(g.get(0).is_none());
    }
}
