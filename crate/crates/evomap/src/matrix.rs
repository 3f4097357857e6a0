//! Minimal dense row-major matrix. Just enough surface for the pipeline; no
//! linear-algebra crate is worth the dependency for what this needs.

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from row slices. All rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Replaces each row with the result of `f(i)`, computed in parallel when a
    /// rayon pool is active. Row order in the output is always index order, so
    /// results do not depend on the thread count.
    pub fn from_computed_rows<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize) -> Vec<f64> + Sync + Send,
    {
        use rayon::prelude::*;
        let computed: Vec<Vec<f64>> = (0..rows).into_par_iter().map(f).collect();
        let mut data = Vec::with_capacity(rows * cols);
        for row in &computed {
            assert_eq!(row.len(), cols);
            data.extend_from_slice(row);
        }
        Self { rows, cols, data }
    }

    /// Runs `f` over every row in parallel. Rows are disjoint, so the result
    /// cannot depend on scheduling.
    pub fn for_each_row_mut<F>(&mut self, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        use rayon::prelude::*;
        self.data
            .par_chunks_mut(self.cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }

    /// Maps each row to a value and reduces the results in index order, so
    /// floating-point sums are identical for any thread count.
    pub fn fold_rows<F>(&self, f: F) -> f64
    where
        F: Fn(usize, &[f64]) -> f64 + Sync,
    {
        use rayon::prelude::*;
        let partials: Vec<f64> = self
            .data
            .par_chunks(self.cols)
            .enumerate()
            .map(|(i, row)| f(i, row))
            .collect();
        partials.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_get_set() {
        let mut m = Matrix::zeros(3, 2);
        m.set(2, 1, 7.5);
        assert_eq!(m.get(2, 1), 7.5);
        assert_eq!(m.row(2), &[0.0, 7.5]);
    }

    #[test]
    fn from_rows_matches_layout() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.column(1), vec![2.0, 4.0]);
        assert_eq!(m.sum(), 10.0);
    }

    #[test]
    fn computed_rows_are_in_index_order() {
        let m = Matrix::from_computed_rows(4, 3, |i| vec![i as f64; 3]);
        for i in 0..4 {
            assert!(m.row(i).iter().all(|&v| v == i as f64));
        }
    }
}
