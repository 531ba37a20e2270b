use faer::Mat;

use super::{Block3, Block4, TruncationPolicy, TtVector, DEFAULT_DENSE_LIMIT};
use crate::linalg::{ONE, ZERO};
use crate::{Error, Result, C64};

/// Tensor-train operator (MPO) with blocks `A_k(α, i, j, β)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TtOperator {
    blocks: Vec<Block4>,
}

impl TtOperator {
    pub fn new(blocks: Vec<Block4>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::ShapeMismatch("an operator needs at least one block".into()));
        }
        if blocks[0].shape().0 != 1 || blocks[blocks.len() - 1].shape().3 != 1 {
            return Err(Error::ShapeMismatch("operator boundary ranks must be 1".into()));
        }
        for (k, w) in blocks.windows(2).enumerate() {
            if w[0].shape().3 != w[1].shape().0 {
                return Err(Error::ShapeMismatch(format!("operator rank mismatch at bond {}", k + 1)));
            }
        }
        Ok(Self { blocks })
    }

    pub fn identity(modes: &[usize]) -> Self {
        let blocks = modes
            .iter()
            .map(|&n| Block4::from_fn(1, n, n, 1, |_, i, j, _| if i == j { ONE } else { ZERO }))
            .collect();
        Self { blocks }
    }

    /// Rank-one operator `m_1 ⊗ ⋯ ⊗ m_D` from square row-major matrices.
    pub fn product(factors: &[(usize, Vec<C64>)]) -> Result<Self> {
        let blocks = factors
            .iter()
            .map(|(n, m)| {
                if m.len() != n * n {
                    return Err(Error::ShapeMismatch(format!("factor of length {} is not {n}×{n}", m.len())));
                }
                Ok(Block4::from_matrix(*n, *n, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    #[inline]
    pub fn ndim(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block4] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &Block4 {
        &self.blocks[k]
    }

    pub fn row_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.shape().1).collect()
    }

    pub fn col_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.shape().2).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.blocks.iter().map(|b| b.shape().0).collect();
        r.push(1);
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    fn as_vector(&self) -> TtVector {
        TtVector::new(self.blocks.iter().map(Block4::as_block3).collect()).expect("operator chain is valid")
    }

    fn from_vector(v: TtVector, rows: &[usize], cols: &[usize]) -> Self {
        let blocks = v
            .into_blocks()
            .into_iter()
            .zip(rows.iter().zip(cols))
            .map(|(b, (&n, &m))| Block4::from_block3(b, n, m))
            .collect();
        Self { blocks }
    }

    /// `a·A + B`; ranks add.
    pub fn add_scaled(a: C64, x: &TtOperator, y: &TtOperator) -> Result<TtOperator> {
        if x.row_sizes() != y.row_sizes() || x.col_sizes() != y.col_sizes() {
            return Err(Error::ShapeMismatch("operator mode sizes differ".into()));
        }
        let v = TtVector::axpy(a, &x.as_vector(), &y.as_vector())?;
        Ok(Self::from_vector(v, &x.row_sizes(), &x.col_sizes()))
    }

    pub fn add(&self, other: &TtOperator) -> Result<TtOperator> {
        Self::add_scaled(ONE, self, other)
    }

    pub fn scaled(&self, a: C64) -> TtOperator {
        let mut out = self.clone();
        out.blocks[0].scale(a);
        out
    }

    /// Rounds the operator as a vector in the fused `(row, col)` modes.
    pub fn round(&self, policy: &TruncationPolicy) -> TtOperator {
        let v = self.as_vector().round(policy);
        Self::from_vector(v, &self.row_sizes(), &self.col_sizes())
    }

    pub fn adjoint(&self) -> TtOperator {
        Self { blocks: self.blocks.iter().map(Block4::adjoint).collect() }
    }

    /// `self ⊗ other` with the modes of `other` appended.
    pub fn kron(&self, other: &TtOperator) -> TtOperator {
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        Self { blocks }
    }

    /// Exact matrix-by-vector product; ranks multiply.
    pub fn apply(&self, x: &TtVector) -> Result<TtVector> {
        if self.col_sizes() != x.mode_sizes() {
            return Err(Error::ShapeMismatch(format!(
                "operator columns {:?} vs vector modes {:?}",
                self.col_sizes(),
                x.mode_sizes()
            )));
        }
        let blocks = self.blocks.iter().zip(x.blocks()).map(|(a, xb)| apply_block(a, xb)).collect();
        TtVector::new(blocks)
    }

    /// Dense matrix (row-major mode ordering on rows and columns).
    pub fn to_dense(&self) -> Result<Mat<C64>> {
        let rows: usize = self.row_sizes().iter().product();
        let cols: usize = self.col_sizes().iter().product();
        if rows * cols > DEFAULT_DENSE_LIMIT {
            return Err(Error::DenseLimit { size: rows * cols, limit: DEFAULT_DENSE_LIMIT });
        }
        let fused: Vec<usize> = self.blocks.iter().map(|b| b.shape().1 * b.shape().2).collect();
        let flat = self.as_vector().to_dense()?;
        let rs = self.row_sizes();
        let cs = self.col_sizes();
        let mut out = Mat::zeros(rows, cols);
        let d = self.ndim();
        let mut q = vec![0usize; d];
        for value in flat {
            let (mut r, mut c) = (0, 0);
            for k in 0..d {
                r = r * rs[k] + q[k] % rs[k];
                c = c * cs[k] + q[k] / rs[k];
            }
            out[(r, c)] = value;
            for k in (0..d).rev() {
                q[k] += 1;
                if q[k] < fused[k] {
                    break;
                }
                q[k] = 0;
            }
        }
        Ok(out)
    }

    /// TT decomposition of a dense matrix (row-major, mode ordering as in
    /// [`TtOperator::to_dense`]).
    pub fn from_dense(m: &Mat<C64>, rows: &[usize], cols: &[usize], policy: &TruncationPolicy) -> Result<Self> {
        let nr: usize = rows.iter().product();
        let nc: usize = cols.iter().product();
        if rows.len() != cols.len() || m.nrows() != nr || m.ncols() != nc {
            return Err(Error::ShapeMismatch(format!(
                "{}×{} matrix vs modes {rows:?}×{cols:?}",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = rows.len();
        let fused: Vec<usize> = rows.iter().zip(cols).map(|(a, b)| a * b).collect();
        let mut flat = Vec::with_capacity(nr * nc);
        let mut q = vec![0usize; d];
        for _ in 0..nr * nc {
            let (mut r, mut c) = (0, 0);
            for k in 0..d {
                r = r * rows[k] + q[k] % rows[k];
                c = c * cols[k] + q[k] / rows[k];
            }
            flat.push(m[(r, c)]);
            for k in (0..d).rev() {
                q[k] += 1;
                if q[k] < fused[k] {
                    break;
                }
                q[k] = 0;
            }
        }
        let v = TtVector::from_dense(&flat, &fused, policy)?;
        Ok(Self::from_vector(v, rows, cols))
    }
}

fn apply_block(a: &Block4, x: &Block3) -> Block3 {
    let (ra, n, m, rb) = a.shape();
    let (xa, _, xb) = x.shape();
    let mut out = Block3::zeros(ra * xa, n, rb * xb);
    let data = out.data_mut();
    let ld = ra * xa;
    for beta in 0..rb {
        for j in 0..m {
            for i in 0..n {
                for alpha in 0..ra {
                    let c = a.get(alpha, i, j, beta);
                    if c == ZERO {
                        continue;
                    }
                    for b in 0..xb {
                        let col = i + n * (beta + rb * b);
                        for p in 0..xa {
                            data[alpha + ra * p + ld * col] += c * x.get(p, j, b);
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::tt::vector::gauss;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n * n).map(|_| C64::new(gauss(rng), gauss(rng))).collect()
    }

    fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        Mat::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |i, j| {
            a[(i / b.nrows(), j / b.ncols())] * b[(i % b.nrows(), j % b.ncols())]
        })
    }

    fn mat(n: usize, m: &[C64]) -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| m[i * n + j])
    }

    #[test]
    fn identity_densifies_to_identity() {
        let id = TtOperator::identity(&[2, 3, 2]).to_dense().unwrap();
        assert_eq!(id, Mat::from_fn(12, 12, |i, j| if i == j { ONE } else { ZERO }));
    }

    #[test]
    fn product_operator_is_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(2, &mut rng);
        let b = random_matrix(3, &mut rng);
        let op = TtOperator::product(&[(2, a.clone()), (3, b.clone())]).unwrap();
        let dense = op.to_dense().unwrap();
        let expect = kron(&mat(2, &a), &mat(3, &b));
        assert!((&dense - &expect).norm_l2() < 1e-14);
    }

    #[test]
    fn apply_matches_dense_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = TtOperator::product(&[(2, random_matrix(2, &mut rng)), (2, random_matrix(2, &mut rng))]).unwrap();
        let b = TtOperator::product(&[(2, random_matrix(2, &mut rng)), (2, random_matrix(2, &mut rng))]).unwrap();
        let op = a.add(&b).unwrap();
        let x = TtVector::random(&[2, 2], 2, &mut rng);
        let y = op.apply(&x).unwrap().to_dense().unwrap();
        let dense = op.to_dense().unwrap();
        let xd = x.to_dense().unwrap();
        for i in 0..4 {
            let e: C64 = (0..4).map(|j| dense[(i, j)] * xd[j]).sum();
            assert!((e - y[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mat::from_fn(8, 8, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
        let op = TtOperator::from_dense(&m, &[2, 2, 2], &[2, 2, 2], &TruncationPolicy::new(1e-13).unwrap()).unwrap();
        assert!((&op.to_dense().unwrap() - &m).norm_l2() < 1e-12 * m.norm_l2());
    }

    #[test]
    fn adjoint_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = Mat::from_fn(4, 4, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
        let op = TtOperator::from_dense(&m, &[2, 2], &[2, 2], &TruncationPolicy::default()).unwrap();
        let adj = op.adjoint().to_dense().unwrap();
        assert!((&adj - &m.adjoint().to_owned()).norm_l2() < 1e-12);
    }
}
