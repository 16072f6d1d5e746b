use std::fmt;
use std::ops::{Index, IndexMut};

use super::{GfError, Gf256};

/// Dense row-major matrix over GF(2^8).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Gf256>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![Gf256::ZERO; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Matrix {
        let mut m = Matrix::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = Gf256::ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Gf256>) -> Result<Matrix, GfError> {
        if data.len() != rows * cols {
            return Err(GfError::Dimension(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from byte rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Matrix {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend(r.iter().copied().map(Gf256));
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Gf256] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Gf256] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[Gf256] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// New matrix made of the given columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m[(i, j)] = self[(i, c)];
            }
        }
        m
    }

    /// Matrix product over the field.
    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix, GfError> {
        if self.cols != rhs.rows {
            return Err(GfError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(l, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Gf256]) -> Result<Vec<Gf256>, GfError> {
        if self.cols != v.len() {
            return Err(GfError::Dimension(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| *a * *b).sum())
            .collect())
    }

    /// Inverse by Gauss-Jordan elimination. A singular input yields
    /// `GfError::Singular`.
    pub fn invert(&self) -> Result<Matrix, GfError> {
        if !self.is_square() {
            return Err(GfError::Dimension(format!(
                "cannot invert non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut work = self.clone();
        let mut out = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !work[(r, col)].is_zero())
                .ok_or(GfError::Singular)?;
            work.swap_rows(col, pivot);
            out.swap_rows(col, pivot);
            let scale = work[(col, col)].inv()?;
            work.scale_row(col, scale);
            out.scale_row(col, scale);
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = work[(r, col)];
                if !f.is_zero() {
                    work.add_scaled_row(col, r, f);
                    out.add_scaled_row(col, r, f);
                }
            }
        }
        Ok(out)
    }

    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let Some(pivot) = (rank..self.rows).find(|&r| !work[(r, col)].is_zero()) else {
                continue;
            };
            work.swap_rows(rank, pivot);
            let scale = work[(rank, col)].inv().expect("pivot is nonzero");
            work.scale_row(rank, scale);
            for r in rank + 1..self.rows {
                let f = work[(r, col)];
                if !f.is_zero() {
                    work.add_scaled_row(rank, r, f);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Solves `self * x = b` for square nonsingular `self`.
    pub fn solve(&self, b: &[Gf256]) -> Result<Vec<Gf256>, GfError> {
        if !self.is_square() || b.len() != self.rows {
            return Err(GfError::Dimension(format!(
                "cannot solve {}x{} system with rhs of length {}",
                self.rows,
                self.cols,
                b.len()
            )));
        }
        let n = self.rows;
        let mut work = self.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !work[(r, col)].is_zero())
                .ok_or(GfError::Singular)?;
            work.swap_rows(col, pivot);
            rhs.swap(col, pivot);
            let scale = work[(col, col)].inv()?;
            work.scale_row(col, scale);
            rhs[col] *= scale;
            for r in 0..n {
                if r != col {
                    let f = work[(r, col)];
                    if !f.is_zero() {
                        work.add_scaled_row(col, r, f);
                        let d = f * rhs[col];
                        rhs[r] += d;
                    }
                }
            }
        }
        Ok(rhs)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn scale_row(&mut self, r: usize, c: Gf256) {
        for x in self.row_mut(r) {
            *x *= c;
        }
    }

    /// row[dst] += f * row[src]
    fn add_scaled_row(&mut self, src: usize, dst: usize, f: Gf256) {
        for j in 0..self.cols {
            let v = f * self.data[src * self.cols + j];
            self.data[dst * self.cols + j] += v;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Gf256;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Gf256 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Gf256 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for x in self.row(i) {
                write!(f, " {x}")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
