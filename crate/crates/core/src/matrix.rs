use std::ops::{Index, IndexMut};

/// Dense row-major square matrix indexed by (state, message).
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(k: usize) -> Self {
        Self::filled(k, 0.0)
    }

    pub fn filled(k: usize, value: f64) -> Self {
        SquareMatrix {
            k,
            data: vec![value; k * k],
        }
    }

    /// Builds a matrix from row-major data; `None` if the length is not a square.
    pub fn from_vec(k: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == k * k).then_some(SquareMatrix { k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return None;
        }
        Some(SquareMatrix {
            k,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(k * k);
        for x in 0..k {
            for m in 0..k {
                data.push(f(x, m));
            }
        }
        SquareMatrix { k, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.k..(x + 1) * self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
        let k = self.k;
        &mut self.data[x * k..(x + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &SquareMatrix) -> f64 {
        sup_distance(&self.data, &other.data)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Returns a copy with columns permuted: column `m` of the result is column `perm[m]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> SquareMatrix {
        SquareMatrix::from_fn(self.k, |x, m| self[(x, perm[m])])
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (x, m): (usize, usize)) -> &f64 {
        &self.data[x * self.k + m]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (x, m): (usize, usize)) -> &mut f64 {
        &mut self.data[x * self.k + m]
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
