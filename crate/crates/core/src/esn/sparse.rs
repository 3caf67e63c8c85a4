//! Compressed sparse row storage for the recurrent weight matrix.

use super::EsnError;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate positions are rejected; explicit zeros are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(u32, u32, f64)>,
    ) -> Result<Self, EsnError> {
        triplets.retain(|t| t.2 != 0.0);
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut prev: Option<(u32, u32)> = None;
        for &(r, c, v) in &triplets {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(EsnError::Format(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if prev == Some((r, c)) {
                return Err(EsnError::Format(format!("duplicate entry ({r}, {c})")));
            }
            prev = Some((r, c));
            row_ptr[r as usize + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from a dense row-major buffer.
    pub fn from_dense(n_rows: usize, n_cols: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), n_rows * n_cols);
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let v = dense[i * n_cols + j];
                if v != 0.0 {
                    col_idx.push(j as u32);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Fraction of entries that are exactly zero.
    pub fn zero_fraction(&self) -> f64 {
        let total = (self.n_rows * self.n_cols) as f64;
        if total == 0.0 {
            return 0.0;
        }
        1.0 - self.nnz() as f64 / total
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i as u32, self.col_idx[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for (i, j, v) in self.triplets() {
            out[i as usize * self.n_cols + j as usize] = v;
        }
        out
    }

    /// `out = self · x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        for (i, o) in out.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for (c, v) in self.col_idx[lo..hi].iter().zip(&self.values[lo..hi]) {
                acc += v * x[*c as usize];
            }
            *o = acc;
        }
    }

    /// Multiplies `batch` column vectors at once. `x` is `n_cols × batch` and
    /// `out` is `n_rows × batch`, both row-major. Each column is accumulated in
    /// the same order as [`mul_vec_into`](Self::mul_vec_into), so the results
    /// are bitwise identical to `batch` separate products.
    pub fn mul_batch_into(&self, x: &[f64], batch: usize, out: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols * batch);
        assert_eq!(out.len(), self.n_rows * batch);
        const LANES: usize = 8;
        let full = batch / LANES * LANES;
        for i in 0..self.n_rows {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            let cols = &self.col_idx[range.clone()];
            let vals = &self.values[range];
            let row_out = &mut out[i * batch..(i + 1) * batch];
            // lanes stay in registers while the row is swept; each lane sums
            // in the same order as `mul_vec_into`
            for b0 in (0..full).step_by(LANES) {
                let mut acc = [0.0f64; LANES];
                for (&c, &v) in cols.iter().zip(vals) {
                    let xs: &[f64; LANES] = x[c as usize * batch + b0..][..LANES].try_into().unwrap();
                    for l in 0..LANES {
                        acc[l] += v * xs[l];
                    }
                }
                row_out[b0..b0 + LANES].copy_from_slice(&acc);
            }
            for b in full..batch {
                let mut acc = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v * x[c as usize * batch + b];
                }
                row_out[b] = acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_round_trip() {
        let m = CsrMatrix::from_triplets(3, 4, vec![(2, 1, 5.0), (0, 3, -1.0), (0, 0, 2.0), (1, 2, 0.0)])
            .unwrap();
        assert_eq!(m.nnz(), 3);
        let t: Vec<_> = m.triplets().collect();
        assert_eq!(t, vec![(0, 0, 2.0), (0, 3, -1.0), (2, 1, 5.0)]);
        assert_eq!(CsrMatrix::from_dense(3, 4, &m.to_dense()), m);
        assert!((m.zero_fraction() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (1, 0, 2.0)]).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let dense: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 0.0 } else { (i as f64).sin() }).collect();
        let m = CsrMatrix::from_dense(5, 6, &dense);
        let xs: Vec<Vec<f64>> = (0..3).map(|b| (0..6).map(|j| ((b * 7 + j) as f64).cos()).collect()).collect();
        let mut packed = vec![0.0; 18];
        for (b, x) in xs.iter().enumerate() {
            for j in 0..6 {
                packed[j * 3 + b] = x[j];
            }
        }
        let mut out = vec![0.0; 15];
        m.mul_batch_into(&packed, 3, &mut out);
        for (b, x) in xs.iter().enumerate() {
            let mut single = vec![0.0; 5];
            m.mul_vec_into(x, &mut single);
            for i in 0..5 {
                assert_eq!(single[i].to_bits(), out[i * 3 + b].to_bits());
            }
        }
    }
}
