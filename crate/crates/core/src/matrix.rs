//! Dense row-major matrices and the (X, Y, Z) dataset triple.
//!
//! This is deliberately minimal: the estimators in this crate only need
//! row access, column stacking, and row subsetting. Anything fancier
//! lives in `linalg`.

use crate::float::Float;

/// Shape disagreement between two containers that must line up.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dimension mismatch in {context}: expected {expected}, got {got}")]
pub struct DimensionMismatch {
    pub context: &'static str,
    pub expected: usize,
    pub got: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self, DimensionMismatch> {
        if data.len() != rows * cols {
            return Err(DimensionMismatch {
                context: "matrix buffer length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self, DimensionMismatch> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(DimensionMismatch { context: "row length", expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Single-column matrix from a vector.
    pub fn column(values: Vec<F>) -> Self {
        Self { rows: values.len(), cols: 1, data: values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: F) {
        self.data[i * self.cols + j] = value;
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn col_vec(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Stacks matrices side by side. All inputs must have equal row counts.
    pub fn hstack(parts: &[&Matrix<F>]) -> Result<Self, DimensionMismatch> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let mut cols = 0;
        for m in parts {
            if m.rows != rows {
                return Err(DimensionMismatch { context: "hstack row count", expected: rows, got: m.rows });
            }
            cols += m.cols;
        }
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            let dst = out.row_mut(i);
            let mut offset = 0;
            for m in parts {
                dst[offset..offset + m.cols].copy_from_slice(m.row(i));
                offset += m.cols;
            }
        }
        Ok(out)
    }

    /// New matrix containing the given rows, in the given order.
    pub fn take_rows(&self, indices: &[usize]) -> Self {
        let mut out = Self::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// Splits into the first `n` rows and the remainder.
    pub fn split_rows(&self, n: usize) -> (Self, Self) {
        let head = Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        };
        let tail = Self {
            rows: self.rows - n,
            cols: self.cols,
            data: self.data[n * self.cols..].to_vec(),
        };
        (head, tail)
    }

    /// Same shape, every entry zero.
    pub fn zeroed_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    pub fn column_mean(&self, j: usize) -> F {
        if self.rows == 0 {
            return F::zero();
        }
        let mut s = F::zero();
        for i in 0..self.rows {
            s += self.get(i, j);
        }
        s / F::cast(self.rows)
    }

    /// Population (1/n) standard deviation of a column.
    pub fn column_std(&self, j: usize) -> F {
        if self.rows == 0 {
            return F::zero();
        }
        let mean = self.column_mean(j);
        let mut s = F::zero();
        for i in 0..self.rows {
            let d = self.get(i, j) - mean;
            s += d * d;
        }
        (s / F::cast(self.rows)).sqrt()
    }
}

/// One sample of (X, Y, Z) rows; the three blocks always have the same
/// number of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    x: Matrix<F>,
    y: Matrix<F>,
    z: Matrix<F>,
}

impl<F: Float> Dataset<F> {
    pub fn new(x: Matrix<F>, y: Matrix<F>, z: Matrix<F>) -> Result<Self, DimensionMismatch> {
        if y.rows() != x.rows() {
            return Err(DimensionMismatch { context: "dataset y rows", expected: x.rows(), got: y.rows() });
        }
        if z.rows() != x.rows() {
            return Err(DimensionMismatch { context: "dataset z rows", expected: x.rows(), got: z.rows() });
        }
        Ok(Self { x, y, z })
    }

    pub fn x(&self) -> &Matrix<F> {
        &self.x
    }

    pub fn y(&self) -> &Matrix<F> {
        &self.y
    }

    pub fn z(&self) -> &Matrix<F> {
        &self.z
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    /// `[X | Z]` feature block, the design for models that see both.
    pub fn xz(&self) -> Matrix<F> {
        Matrix::hstack(&[&self.x, &self.z]).expect("dataset blocks share row counts")
    }

    /// `[0 | Z]`: X columns replaced by zeros, same width as [`Self::xz`].
    pub fn xz_with_x_zeroed(&self) -> Matrix<F> {
        Matrix::hstack(&[&self.x.zeroed_like(), &self.z]).expect("dataset blocks share row counts")
    }

    /// Splits into (first `n` rows, remainder), preserving order.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let (xa, xb) = self.x.split_rows(n);
        let (ya, yb) = self.y.split_rows(n);
        let (za, zb) = self.z.split_rows(n);
        (
            Self { x: xa, y: ya, z: za },
            Self { x: xb, y: yb, z: zb },
        )
    }

    pub fn take_rows(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.take_rows(indices),
            y: self.y.take_rows(indices),
            z: self.z.take_rows(indices),
        }
    }

    /// Replaces the Y block (same row count required).
    pub fn with_y(&self, y: Matrix<F>) -> Result<Self, DimensionMismatch> {
        Self::new(self.x.clone(), y, self.z.clone())
    }

    /// Replaces the Z block (same row count required).
    pub fn with_z(&self, z: Matrix<F>) -> Result<Self, DimensionMismatch> {
        Self::new(self.x.clone(), self.y.clone(), z)
    }

    /// Replaces the X block (same row count required).
    pub fn with_x(&self, x: Matrix<F>) -> Result<Self, DimensionMismatch> {
        Self::new(x, self.y.clone(), self.z.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hstack_concatenates_rows() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::column(vec![9.0, 8.0]);
        let c = Matrix::hstack(&[&a, &b]).unwrap();
        assert_eq!(c.row(0), &[1.0, 2.0, 9.0]);
        assert_eq!(c.row(1), &[3.0, 4.0, 8.0]);
    }

    #[test]
    fn hstack_rejects_row_mismatch() {
        let a = Matrix::<f64>::zeros(2, 1);
        let b = Matrix::<f64>::zeros(3, 1);
        assert!(Matrix::hstack(&[&a, &b]).is_err());
    }

    #[test]
    fn dataset_validates_row_counts() {
        let x = Matrix::<f64>::zeros(3, 1);
        let y = Matrix::<f64>::zeros(3, 1);
        let z = Matrix::<f64>::zeros(2, 2);
        assert!(Dataset::new(x, y, z).is_err());
    }

    #[test]
    fn split_preserves_order() {
        let x = Matrix::column(vec![0.0, 1.0, 2.0, 3.0]);
        let ds = Dataset::new(x.clone(), x.clone(), x).unwrap();
        let (head, tail) = ds.split_at(1);
        assert_eq!(head.n_rows(), 1);
        assert_eq!(tail.n_rows(), 3);
        assert_eq!(head.x().get(0, 0), 0.0);
        assert_eq!(tail.x().get(0, 0), 1.0);
        assert_eq!(tail.x().get(2, 0), 3.0);
    }

    #[test]
    fn zeroed_xz_keeps_width() {
        let x = Matrix::from_rows(&[vec![5.0, 6.0]]).unwrap();
        let y = Matrix::column(vec![1.0]);
        let z = Matrix::column(vec![2.0]);
        let ds = Dataset::new(x, y, z).unwrap();
        assert_eq!(ds.xz().row(0), &[5.0, 6.0, 2.0]);
        assert_eq!(ds.xz_with_x_zeroed().row(0), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn column_stats() {
        let m = Matrix::<f64>::column(vec![1.0, 2.0, 3.0, 4.0]);
        assert!((m.column_mean(0) - 2.5).abs() < 1e-12);
        let sd = m.column_std(0);
        assert!((sd - (1.25f64).sqrt()).abs() < 1e-12, "sd {sd}");
    }
}
