use rand::Rng;

use super::frame::{left_env_vec, Env};
use super::{Block3, Gauge, TruncationPolicy, DEFAULT_DENSE_LIMIT};
use crate::linalg::{self, svd_truncate, view, ONE, ZERO};
use crate::{Error, Result, C64};

/// Tensor-train vector `x(i_1, …, i_D) = X_1[i_1] ⋯ X_D[i_D]` with unit
/// boundary ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct TtVector {
    blocks: Vec<Block3>,
    gauge: Gauge,
}

/// What rounding threw away.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundingReport {
    /// Upper bound on `‖round(x) − x‖ / ‖x‖` accumulated from discarded singular values.
    pub relative_error: f64,
    /// True if the rank cap, not the tolerance, decided at least one bond.
    pub cap_binding: bool,
}

impl TtVector {
    pub fn new(blocks: Vec<Block3>) -> Result<Self> {
        check_chain(&blocks)?;
        Ok(Self { blocks, gauge: Gauge::NONE })
    }

    pub(crate) fn from_parts(blocks: Vec<Block3>, gauge: Gauge) -> Self {
        debug_assert!(check_chain(&blocks).is_ok());
        Self { blocks, gauge }
    }

    pub fn zeros(modes: &[usize]) -> Self {
        let blocks = modes.iter().map(|&n| Block3::zeros(1, n, 1)).collect();
        Self { blocks, gauge: Gauge::NONE }
    }

    /// Rank-one Kronecker product `f_1 ⊗ ⋯ ⊗ f_D`.
    pub fn product(factors: &[Vec<C64>]) -> Self {
        let blocks = factors
            .iter()
            .map(|f| Block3::from_vec(1, f.len(), 1, f.clone()).expect("rank-one block"))
            .collect();
        Self { blocks, gauge: Gauge::NONE }
    }

    /// Random Gaussian blocks with the given interior rank.
    pub fn random<R: Rng + ?Sized>(modes: &[usize], rank: usize, rng: &mut R) -> Self {
        let d = modes.len();
        let blocks = modes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let l = if k == 0 { 1 } else { rank };
                let r = if k + 1 == d { 1 } else { rank };
                Block3::from_fn(l, n, r, |_, _, _| C64::new(gauss(rng), gauss(rng)))
            })
            .collect();
        Self { blocks, gauge: Gauge::NONE }
    }

    #[inline]
    pub fn ndim(&self) -> usize {
        self.blocks.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.mode_size()).collect()
    }

    /// `r_0, …, r_D`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.blocks.iter().map(|b| b.left_rank()).collect();
        r.push(self.blocks.last().map_or(1, |b| b.right_rank()));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn blocks(&self) -> &[Block3] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &Block3 {
        &self.blocks[k]
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn into_blocks(self) -> Vec<Block3> {
        self.blocks
    }

    /// Number of stored complex entries.
    pub fn storage(&self) -> usize {
        self.blocks.iter().map(|b| b.data().len()).sum()
    }

    fn check_modes(&self, other: &TtVector) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::ShapeMismatch(format!(
                "mode sizes {:?} vs {:?}",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }

    /// TT-SVD of a dense row-major array.
    pub fn from_dense(x: &[C64], modes: &[usize], policy: &TruncationPolicy) -> Result<Self> {
        let total: usize = modes.iter().product();
        if modes.is_empty() || total != x.len() {
            return Err(Error::ShapeMismatch(format!("array of length {} vs modes {modes:?}", x.len())));
        }
        let d = modes.len();
        let nrm = linalg::norm(x);
        if nrm == 0.0 {
            return Ok(Self::zeros(modes));
        }
        let delta = policy.bond_threshold(nrm, d);
        // column-major over modes so each unfolding is a plain view
        let mut rest = reorder(x, modes, true);
        let mut blocks = Vec::with_capacity(d);
        let mut left = 1;
        let mut discarded2 = 0.0;
        for &n in &modes[..d - 1] {
            let rows = left * n;
            let cols = rest.len() / rows;
            let t = svd_truncate(view(&rest, rows, cols), delta, policy.max_rank)?;
            discarded2 += t.discarded * t.discarded;
            let r = t.rank();
            blocks.push(Block3::from_mat(left, n, r, t.u.as_ref()));
            rest = linalg::to_vec(t.s_vh().as_ref());
            left = r;
        }
        blocks.push(Block3::from_vec(left, modes[d - 1], 1, rest)?);
        let achieved = discarded2.sqrt() / nrm;
        if let Some(cap) = policy.max_rank {
            if achieved > policy.tolerance * (1.0 + 1e-12) {
                return Err(Error::RankCap { cap, tolerance: policy.tolerance, achieved });
            }
        }
        Ok(Self { blocks, gauge: Gauge::pivot(d - 1, d) })
    }

    pub fn to_dense(&self) -> Result<Vec<C64>> {
        self.to_dense_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<Vec<C64>> {
        let modes = self.mode_sizes();
        let size: usize = modes.iter().product();
        if size > limit {
            return Err(Error::DenseLimit { size, limit });
        }
        // accumulate column-major over modes: index p + P·(i + n·b)
        let mut acc = vec![ONE];
        let mut prefix = 1;
        for b in &self.blocks {
            let (l, n, r) = b.shape();
            acc = linalg::mul(view(&acc, prefix, l), b.right_unfolding());
            prefix *= n;
            debug_assert_eq!(acc.len(), prefix * r);
        }
        Ok(reorder(&acc, &modes, false))
    }

    /// `a·x + y` by block concatenation; interior ranks add.
    pub fn axpy(a: C64, x: &TtVector, y: &TtVector) -> Result<TtVector> {
        x.check_modes(y)?;
        let d = x.ndim();
        if d == 1 {
            let data = x.blocks[0].data().iter().zip(y.blocks[0].data()).map(|(p, q)| a * p + q).collect();
            return Ok(Self { blocks: vec![Block3::from_vec(1, x.blocks[0].mode_size(), 1, data)?], gauge: Gauge::NONE });
        }
        let mut blocks = Vec::with_capacity(d);
        for k in 0..d {
            let (xl, n, xr) = x.blocks[k].shape();
            let (yl, _, yr) = y.blocks[k].shape();
            let (l, r) = match k {
                0 => (1, xr + yr),
                _ if k == d - 1 => (xl + yl, 1),
                _ => (xl + yl, xr + yr),
            };
            let xs = if k == 0 { a } else { ONE };
            let mut blk = Block3::zeros(l, n, r);
            for i in 0..n {
                for bx in 0..xr {
                    for ax in 0..xl {
                        blk.set(ax, i, bx, xs * x.blocks[k].get(ax, i, bx));
                    }
                }
                let (ao, bo) = match k {
                    0 => (0, xr),
                    _ if k == d - 1 => (xl, 0),
                    _ => (xl, xr),
                };
                for by in 0..yr {
                    for ay in 0..yl {
                        blk.set(ao + ay, i, bo + by, y.blocks[k].get(ay, i, by));
                    }
                }
            }
            blocks.push(blk);
        }
        Ok(Self { blocks, gauge: Gauge::NONE })
    }

    /// `a·x`, applied to the pivot block when one exists so the gauge survives.
    pub fn scaled(&self, a: C64) -> TtVector {
        let mut out = self.clone();
        let k = self.gauge.centre(self.ndim()).unwrap_or(0);
        out.blocks[k].scale(a);
        out
    }

    /// Euclidean inner product `conj(self) · other`.
    pub fn dot(&self, other: &TtVector) -> Result<C64> {
        self.check_modes(other)?;
        let mut env = Env::unit();
        for (x, y) in self.blocks.iter().zip(&other.blocks) {
            env = left_env_vec(&env, x, y);
        }
        Ok(env.data[0])
    }

    pub fn norm(&self) -> f64 {
        if let Some(k) = self.gauge.centre(self.ndim()) {
            return self.blocks[k].norm();
        }
        self.dot(self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Mixed-canonical form around `pivot`: blocks left of it left-orthonormal,
    /// blocks right of it right-orthonormal. Already-orthonormal blocks are kept.
    pub fn orthogonalize(&self, pivot: usize) -> TtVector {
        let d = self.ndim();
        assert!(pivot < d, "pivot {pivot} out of range for {d} blocks");
        let mut blocks = self.blocks.clone();
        let start = self.gauge.left.min(pivot);
        for k in start..pivot {
            let (l, n, _) = blocks[k].shape();
            let (q, r) = linalg::qr(blocks[k].left_unfolding());
            let rank = q.ncols();
            blocks[k] = Block3::from_mat(l, n, rank, q.as_ref());
            blocks[k + 1] = blocks[k + 1].left_mul(r.as_ref());
        }
        let stop = (d - self.gauge.right.min(d - 1 - pivot)).max(pivot + 1);
        for k in (pivot + 1..stop).rev() {
            let (_, n, r) = blocks[k].shape();
            let (q, rr) = linalg::qr(blocks[k].right_unfolding().adjoint().to_owned().as_ref());
            let rank = q.ncols();
            blocks[k] = Block3::from_mat(rank, n, r, q.adjoint().to_owned().as_ref());
            blocks[k - 1] = blocks[k - 1].right_mul(rr.adjoint().to_owned().as_ref());
        }
        Self { blocks, gauge: Gauge::pivot(pivot, d) }
    }

    pub fn round(&self, policy: &TruncationPolicy) -> TtVector {
        self.round_with_report(policy).0
    }

    /// SVD rounding: right-orthogonalise, then truncate left to right with the
    /// per-bond threshold. The result is centred on the last block.
    pub fn round_with_report(&self, policy: &TruncationPolicy) -> (TtVector, RoundingReport) {
        let d = self.ndim();
        let mut x = self.orthogonalize(0);
        let nrm = x.blocks[0].norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return (
                Self { blocks: Self::zeros(&self.mode_sizes()).blocks, gauge: Gauge::pivot(d - 1, d) },
                RoundingReport { relative_error: 0.0, cap_binding: false },
            );
        }
        let delta = policy.bond_threshold(nrm, d);
        let mut discarded2 = 0.0;
        let mut cap_binding = false;
        for k in 0..d - 1 {
            let (l, n, _) = x.blocks[k].shape();
            let t = svd_truncate(x.blocks[k].left_unfolding(), delta, policy.max_rank).expect("svd of finite block");
            if t.discarded > delta * (1.0 + 1e-12) {
                cap_binding = true;
            }
            discarded2 += t.discarded * t.discarded;
            x.blocks[k] = Block3::from_mat(l, n, t.rank(), t.u.as_ref());
            x.blocks[k + 1] = x.blocks[k + 1].left_mul(t.s_vh().as_ref());
        }
        x.gauge = Gauge::pivot(d - 1, d);
        (x, RoundingReport { relative_error: discarded2.sqrt() / nrm, cap_binding })
    }

    /// Kronecker product `self ⊗ other` (modes of `other` appended).
    pub fn kron(&self, other: &TtVector) -> TtVector {
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        Self { blocks, gauge: Gauge::NONE }
    }

    /// Contracts mode `k` against `weights` and absorbs the resulting matrix
    /// into a neighbour, removing the mode.
    pub fn contract_mode(&self, k: usize, weights: &[C64]) -> Result<TtVector> {
        let d = self.ndim();
        if d < 2 {
            return Err(Error::InvalidArgument("cannot remove the only mode".into()));
        }
        if k >= d || weights.len() != self.blocks[k].mode_size() {
            return Err(Error::ShapeMismatch(format!("contracting mode {k} with {} weights", weights.len())));
        }
        let (l, _, r) = self.blocks[k].shape();
        let m = self.blocks[k].contract_mode(weights);
        let mut blocks = self.blocks.clone();
        blocks.remove(k);
        if k == 0 {
            blocks[0] = blocks[0].left_mul(view(&m, l, r));
        } else {
            blocks[k - 1] = blocks[k - 1].right_mul(view(&m, l, r));
        }
        Ok(Self { blocks, gauge: Gauge::NONE })
    }

    /// Fixes mode `k` at index `i`.
    pub fn slice_mode(&self, k: usize, i: usize) -> Result<TtVector> {
        let n = self.blocks.get(k).map(|b| b.mode_size()).unwrap_or(0);
        if i >= n {
            return Err(Error::InvalidArgument(format!("index {i} out of range for mode {k} of size {n}")));
        }
        let mut w = vec![ZERO; n];
        w[i] = ONE;
        self.contract_mode(k, &w)
    }

    /// Replaces the gauge-carrying data by an equivalent train whose blocks are
    /// transformed by `f`; used for index permutations within modes.
    pub fn map_blocks(&self, f: impl Fn(usize, &Block3) -> Block3) -> Result<TtVector> {
        let blocks = self.blocks.iter().enumerate().map(|(k, b)| f(k, b)).collect();
        Self::new(blocks)
    }
}

impl TtVector {
    /// Frobenius distance computed in TT arithmetic.
    pub fn distance(&self, other: &TtVector) -> Result<f64> {
        let diff = TtVector::axpy(-ONE, other, self)?;
        Ok(diff.orthogonalize(0).blocks[0].norm())
    }
}

fn check_chain(blocks: &[Block3]) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::ShapeMismatch("a tensor train needs at least one block".into()));
    }
    if blocks[0].left_rank() != 1 || blocks[blocks.len() - 1].right_rank() != 1 {
        return Err(Error::ShapeMismatch("boundary ranks must be 1".into()));
    }
    for (k, w) in blocks.windows(2).enumerate() {
        if w[0].right_rank() != w[1].left_rank() {
            return Err(Error::ShapeMismatch(format!(
                "rank mismatch at bond {}: {} vs {}",
                k + 1,
                w[0].right_rank(),
                w[1].left_rank()
            )));
        }
    }
    Ok(())
}

/// Converts between row-major (first mode slowest) and column-major (first
/// mode fastest) flattenings.
pub(crate) fn reorder(x: &[C64], modes: &[usize], to_col_major: bool) -> Vec<C64> {
    let d = modes.len();
    if d <= 1 {
        return x.to_vec();
    }
    let mut out = vec![ZERO; x.len()];
    let mut idx = vec![0usize; d];
    // strides
    let mut row_stride = vec![1usize; d];
    let mut col_stride = vec![1usize; d];
    for k in (0..d - 1).rev() {
        row_stride[k] = row_stride[k + 1] * modes[k + 1];
    }
    for k in 1..d {
        col_stride[k] = col_stride[k - 1] * modes[k - 1];
    }
    for _ in 0..x.len() {
        let (mut r, mut c) = (0, 0);
        for k in 0..d {
            r += idx[k] * row_stride[k];
            c += idx[k] * col_stride[k];
        }
        if to_col_major {
            out[c] = x[r];
        } else {
            out[r] = x[c];
        }
        // odometer over row-major order
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < modes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

pub(crate) fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
