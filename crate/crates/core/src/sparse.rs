//! Compressed sparse row matrices.
//!
//! Used for the normalized adjacency; implements [`LinearMap`] so sparse
//! propagation participates in gradient recording.

use rayon::prelude::*;

use crate::scalar::Scalar;
use crate::tensor::LinearMap;

#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Build from (row, col, value) triplets. Triplets must be unique;
    /// they are sorted internally.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, T)>) -> Self {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        debug_assert!(entries.windows(2).all(|w| (w[0].0, w[0].1) != (w[1].0, w[1].1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(i, j, v) in &entries {
            debug_assert!(i < rows && j < cols);
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let start = self.indptr[i];
        let end = self.indptr[i + 1];
        match self.indices[start..end].binary_search(&j) {
            Ok(k) => self.values[start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (s, e) = (self.indptr[i], self.indptr[i + 1]);
            self.indices[s..e]
                .iter()
                .zip(&self.values[s..e])
                .map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows * self.cols];
        for (i, j, v) in self.iter() {
            out[i * self.cols + j] = v;
        }
        out
    }

    /// `out = A * x`, with `x` dense `cols x d` row-major.
    pub fn mul_dense(&self, x: &[T], d: usize, out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols * d);
        debug_assert_eq!(out.len(), self.rows * d);
        let compute_row = |i: usize, orow: &mut [T]| {
            orow.fill(T::zero());
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let xrow = &x[j * d..(j + 1) * d];
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o = *o + v * xv;
                }
            }
        };
        if self.nnz() * d < (1 << 20) {
            for (i, orow) in out.chunks_mut(d).enumerate() {
                compute_row(i, orow);
            }
        } else {
            out.par_chunks_mut(d)
                .enumerate()
                .for_each(|(i, orow)| compute_row(i, orow));
        }
    }

    /// `out = Aᵀ * g`, with `g` dense `rows x d` row-major.
    pub fn mul_transpose_dense(&self, g: &[T], d: usize, out: &mut [T]) {
        debug_assert_eq!(g.len(), self.rows * d);
        debug_assert_eq!(out.len(), self.cols * d);
        out.fill(T::zero());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let grow = &g[i * d..(i + 1) * d];
            for (&j, &v) in cols.iter().zip(vals) {
                let orow = &mut out[j * d..(j + 1) * d];
                for (o, &gv) in orow.iter_mut().zip(grow) {
                    *o = *o + v * gv;
                }
            }
        }
    }
}

impl<T: Scalar> LinearMap<T> for CsrMatrix<T> {
    fn out_rows(&self) -> usize {
        self.rows
    }

    fn in_rows(&self) -> usize {
        self.cols
    }

    fn apply_to(&self, x: &[T], cols: usize, out: &mut [T]) {
        self.mul_dense(x, cols, out);
    }

    fn apply_transpose_to(&self, g: &[T], cols: usize, out: &mut [T]) {
        self.mul_transpose_dense(g, cols, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_products() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, 1.0f64), (0, 2, 2.0), (1, 1, -1.0)],
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.to_dense(), vec![1.0, 0.0, 2.0, 0.0, -1.0, 0.0]);

        // x: 3x2
        let x = [1.0, 10.0, 2.0, 20.0, 3.0, 30.0];
        let mut out = [0.0; 4];
        m.mul_dense(&x, 2, &mut out);
        assert_eq!(out, [7.0, 70.0, -2.0, -20.0]);

        // g: 2x1 -> Aᵀ g : 3x1
        let g = [1.0, 2.0];
        let mut out = [0.0; 3];
        m.mul_transpose_dense(&g, 1, &mut out);
        assert_eq!(out, [1.0, -2.0, 2.0]);
    }
}
