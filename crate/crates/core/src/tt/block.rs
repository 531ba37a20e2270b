use faer::MatRef;

use crate::linalg::{view, ZERO};
use crate::{Error, Result, C64};

/// Order-3 TT block of shape `(left, mode, right)`, stored column-major
/// (left index fastest) so both unfoldings are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Block3 {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<C64>,
}

impl Block3 {
    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self { left, mode, right, data: vec![ZERO; left * mode * right] }
    }

    pub fn from_vec(left: usize, mode: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != left * mode * right {
            return Err(Error::ShapeMismatch(format!(
                "block ({left}, {mode}, {right}) needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Self { left, mode, right, data })
    }

    pub fn from_fn(left: usize, mode: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(left * mode * right);
        for b in 0..right {
            for i in 0..mode {
                for a in 0..left {
                    data.push(f(a, i, b));
                }
            }
        }
        Self { left, mode, right, data }
    }

    pub(crate) fn from_mat(left: usize, mode: usize, right: usize, m: MatRef<'_, C64>) -> Self {
        debug_assert_eq!(m.nrows() * m.ncols(), left * mode * right);
        Self { left, mode, right, data: crate::linalg::to_vec(m) }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }

    #[inline]
    pub fn left_rank(&self) -> usize {
        self.left
    }

    #[inline]
    pub fn mode_size(&self) -> usize {
        self.mode
    }

    #[inline]
    pub fn right_rank(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> C64 {
        self.data[a + self.left * (i + self.mode * b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: C64) {
        self.data[a + self.left * (i + self.mode * b)] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.data)
    }

    /// `(left·mode) × right` view.
    pub(crate) fn left_unfolding(&self) -> MatRef<'_, C64> {
        view(&self.data, self.left * self.mode, self.right)
    }

    /// `left × (mode·right)` view.
    pub(crate) fn right_unfolding(&self) -> MatRef<'_, C64> {
        view(&self.data, self.left, self.mode * self.right)
    }

    /// `left × right` matrix at fixed mode index.
    pub fn slice(&self, i: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.left * self.right);
        for b in 0..self.right {
            let start = self.left * (i + self.mode * b);
            out.extend_from_slice(&self.data[start..start + self.left]);
        }
        out
    }

    /// Contracts the mode index against `weights`, giving a `left × right` matrix.
    pub(crate) fn contract_mode(&self, weights: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.left * self.right];
        for b in 0..self.right {
            for (i, w) in weights.iter().enumerate() {
                if *w == ZERO {
                    continue;
                }
                let start = self.left * (i + self.mode * b);
                for a in 0..self.left {
                    out[a + self.left * b] += w * self.data[start + a];
                }
            }
        }
        out
    }

    /// Swaps the rank indices: `(right, mode, left)`.
    pub(crate) fn transposed(&self) -> Block3 {
        Block3::from_fn(self.right, self.mode, self.left, |b, i, a| self.get(a, i, b))
    }

    /// `m · block` contracting the left rank (m is `k × left`).
    pub(crate) fn left_mul(&self, m: MatRef<'_, C64>) -> Block3 {
        let k = m.nrows();
        let data = crate::linalg::mul(m, self.right_unfolding());
        Block3 { left: k, mode: self.mode, right: self.right, data }
    }

    /// `block · m` contracting the right rank (m is `right × k`).
    pub(crate) fn right_mul(&self, m: MatRef<'_, C64>) -> Block3 {
        let k = m.ncols();
        let data = crate::linalg::mul(self.left_unfolding(), m);
        Block3 { left: self.left, mode: self.mode, right: k, data }
    }

    pub(crate) fn scale(&mut self, a: C64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }
}

/// Order-4 operator block of shape `(left, rows, cols, right)`, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Block4 {
    left: usize,
    rows: usize,
    cols: usize,
    right: usize,
    data: Vec<C64>,
}

impl Block4 {
    pub fn zeros(left: usize, rows: usize, cols: usize, right: usize) -> Self {
        Self { left, rows, cols, right, data: vec![ZERO; left * rows * cols * right] }
    }

    pub fn from_fn(
        left: usize,
        rows: usize,
        cols: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> C64,
    ) -> Self {
        let mut data = Vec::with_capacity(left * rows * cols * right);
        for b in 0..right {
            for j in 0..cols {
                for i in 0..rows {
                    for a in 0..left {
                        data.push(f(a, i, j, b));
                    }
                }
            }
        }
        Self { left, rows, cols, right, data }
    }

    /// Block with a single rank pair whose slice is the `rows × cols` matrix `m`
    /// given row-major.
    pub fn from_matrix(rows: usize, cols: usize, m: &[C64]) -> Self {
        Self::from_fn(1, rows, cols, 1, |_, i, j, _| m[i * cols + j])
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.left, self.rows, self.cols, self.right)
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, j: usize, b: usize) -> C64 {
        self.data[a + self.left * (i + self.rows * (j + self.cols * b))]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, j: usize, b: usize, v: C64) {
        self.data[a + self.left * (i + self.rows * (j + self.cols * b))] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Reinterprets the block as an order-3 block with fused mode `i + rows·j`.
    pub(crate) fn as_block3(&self) -> Block3 {
        Block3::from_vec(self.left, self.rows * self.cols, self.right, self.data.clone()).expect("consistent sizes")
    }

    pub(crate) fn from_block3(b: Block3, rows: usize, cols: usize) -> Self {
        let (left, _, right) = b.shape();
        Self { left, rows, cols, right, data: b.into_data() }
    }

    pub(crate) fn transposed(&self) -> Block4 {
        Block4::from_fn(self.right, self.rows, self.cols, self.left, |b, i, j, a| self.get(a, i, j, b))
    }

    /// Hermitian adjoint of the physical indices.
    pub(crate) fn adjoint(&self) -> Block4 {
        Block4::from_fn(self.left, self.cols, self.rows, self.right, |a, i, j, b| self.get(a, j, i, b).conj())
    }

    pub(crate) fn scale(&mut self, a: C64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }

    /// Matrix slice `(rows × cols)` for a fixed rank pair, column-major.
    pub(crate) fn rank_slice(&self, a: usize, b: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(a, i, j, b));
            }
        }
        out
    }
}
