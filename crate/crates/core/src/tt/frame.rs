//! Frame (environment) contractions for alternating TT algorithms.
//!
//! An environment at bond `k` holds the partial contraction of `bra^* · A · ket`
//! over blocks `0..k` (left) or `k..D` (right), stored as a three-index array
//! `(bra rank, operator rank, ket rank)` with the bra index fastest.

use faer::Mat;

use super::{Block3, Block4, TtOperator, TtVector};
use crate::linalg::{gemm, mul, view, view_mut, ONE, ZERO};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct Env {
    pub bra: usize,
    pub op: usize,
    pub ket: usize,
    pub data: Vec<C64>,
}

impl Env {
    pub fn unit() -> Self {
        Env { bra: 1, op: 1, ket: 1, data: vec![ONE] }
    }

    #[inline]
    pub fn get(&self, a: usize, alpha: usize, b: usize) -> C64 {
        self.data[a + self.bra * (alpha + self.op * b)]
    }
}

/// Operator block reordered into the `(α + R·j) × (i + n·β)` matrix used by
/// the contraction kernels.
#[derive(Clone, Debug)]
pub struct PackedOp {
    left: usize,
    rows: usize,
    cols: usize,
    right: usize,
    data: Vec<C64>,
}

impl PackedOp {
    pub fn new(a: &Block4) -> Self {
        let (ra, n, m, rb) = a.shape();
        let mut data = vec![ZERO; ra * m * n * rb];
        let ld = ra * m;
        for beta in 0..rb {
            for j in 0..m {
                for i in 0..n {
                    for alpha in 0..ra {
                        data[alpha + ra * j + ld * (i + n * beta)] = a.get(alpha, i, j, beta);
                    }
                }
            }
        }
        Self { left: ra, rows: n, cols: m, right: rb, data }
    }

    /// Packs the rank-transposed block, used for right-to-left contractions.
    pub fn new_transposed(a: &Block4) -> Self {
        Self::new(&a.transposed())
    }

    fn mat(&self) -> faer::MatRef<'_, C64> {
        view(&self.data, self.left * self.cols, self.rows * self.right)
    }
}

/// `T2[a', i, β, b] = Σ_{α, j} (E·X)[a', α, j, b] A[α, i, j, β]`, stored with
/// `a'` fastest; shared by environment updates and local products.
fn contract_left(env: &Env, op: &PackedOp, ket: &Block3) -> Vec<C64> {
    let (kl, m, kr) = ket.shape();
    debug_assert_eq!(env.ket, kl);
    debug_assert_eq!(env.op, op.left);
    debug_assert_eq!(op.cols, m);
    let b = env.bra;
    // T1[a', α, j, b] = Σ_a E[a', α, a] X[a, j, b]
    let t1 = mul(view(&env.data, b * env.op, kl), ket.right_unfolding());
    let inner = op.left * m;
    let outer = op.rows * op.right;
    let mut t2 = vec![ZERO; b * outer * kr];
    for col in 0..kr {
        let src = view(&t1[col * b * inner..(col + 1) * b * inner], b, inner);
        let dst = view_mut(&mut t2[col * b * outer..(col + 1) * b * outer], b, outer);
        gemm(dst, src, op.mat(), false);
    }
    t2
}

pub fn left_env_step(env: &Env, bra: &Block3, op: &PackedOp, ket: &Block3) -> Env {
    let t2 = contract_left(env, op, ket);
    let (bl, n, br) = bra.shape();
    let kr = ket.right_rank();
    let data = mul(bra.left_unfolding().adjoint(), view(&t2, bl * n, op.right * kr));
    Env { bra: br, op: op.right, ket: kr, data }
}

/// Right-to-left update; `op` must be packed with [`PackedOp::new_transposed`].
pub fn right_env_step(env: &Env, bra: &Block3, op: &PackedOp, ket: &Block3) -> Env {
    left_env_step(env, &bra.transposed(), op, &ket.transposed())
}

/// Vector-only environment `(bra, 1, ket)`.
pub fn left_env_vec(env: &Env, bra: &Block3, ket: &Block3) -> Env {
    let (kl, n, kr) = ket.shape();
    let t = mul(view(&env.data, env.bra, kl), ket.right_unfolding());
    let br = bra.right_rank();
    let data = mul(bra.left_unfolding().adjoint(), view(&t, env.bra * n, kr));
    Env { bra: br, op: 1, ket: kr, data }
}

pub fn right_env_vec(env: &Env, bra: &Block3, ket: &Block3) -> Env {
    left_env_vec(env, &bra.transposed(), &ket.transposed())
}

/// Local operator application `y = (L ⊗ A_k ⊗ R) x` with `x` shaped like a
/// block of ranks `(left.ket, cols, right.ket)`. The result has ranks
/// `(left.bra, rows, right.bra)`.
pub fn local_apply(left: &Env, op: &PackedOp, right: &Env, x: &[C64]) -> Vec<C64> {
    let ket = Block3::from_vec(left.ket, op.cols, right.ket, x.to_vec()).expect("local vector shape");
    let t2 = contract_left(left, op, &ket);
    let rows = left.bra * op.rows;
    let mut y = vec![ZERO; rows * right.bra];
    // y[a' i, b'] = Σ_{β, b} T2[a' i, β b] R[b', β, b]
    gemm(
        view_mut(&mut y, rows, right.bra),
        view(&t2, rows, op.right * right.ket),
        view(&right.data, right.bra, right.op * right.ket).transpose(),
        false,
    );
    y
}

/// Projection of a TT block `f_k` through vector environments.
pub fn local_project(left: &Env, f: &Block3, right: &Env) -> Vec<C64> {
    let (fl, n, fr) = f.shape();
    let t = mul(view(&left.data, left.bra, fl), f.right_unfolding());
    let mut y = vec![ZERO; left.bra * n * right.bra];
    gemm(
        view_mut(&mut y, left.bra * n, right.bra),
        view(&t, left.bra * n, fr),
        view(&right.data, right.bra, fr).transpose(),
        false,
    );
    y
}

/// Dense local matrix `Σ_{α,β} L_α ⊗ A_{αβ} ⊗ R_β` in the block index order
/// `a + B·(i + n·b)`.
pub fn local_matrix(left: &Env, a: &Block4, right: &Env) -> Mat<C64> {
    let (ra, n, m, rb) = a.shape();
    let (lb, lk) = (left.bra, left.ket);
    let (rbr, rk) = (right.bra, right.ket);
    let nrows = lb * n * rbr;
    let (crows, ccols) = (n * rbr, m * rk);
    let mut out = vec![ZERO; nrows * lk * ccols];
    let mut c = vec![ZERO; crows * ccols];
    for alpha in 0..ra {
        // C_α[(i, b'), (j, b)] = Σ_β A[α, i, j, β] R[b', β, b]
        c.fill(ZERO);
        for beta in 0..rb {
            for j in 0..m {
                for i in 0..n {
                    let av = a.get(alpha, i, j, beta);
                    if av == ZERO {
                        continue;
                    }
                    for b in 0..rk {
                        let dst = &mut c[i + crows * (j + m * b)..];
                        for bp in 0..rbr {
                            dst[n * bp] += av * right.get(bp, beta, b);
                        }
                    }
                }
            }
        }
        // out += C_α ⊗ L_α
        let l = &left.data[lb * alpha..];
        for (cc, ccol) in c.chunks_exact(crows).enumerate() {
            for ak in 0..lk {
                let lcol = &l[lb * left.op * ak..][..lb];
                let col = &mut out[(ak + lk * cc) * nrows..][..nrows];
                for (rr, &cv) in ccol.iter().enumerate() {
                    if cv == ZERO {
                        continue;
                    }
                    for (z, &lv) in col[lb * rr..lb * (rr + 1)].iter_mut().zip(lcol) {
                        *z += cv * lv;
                    }
                }
            }
        }
    }
    view(&out, nrows, lk * ccols).to_owned()
}

/// Reduced (Galerkin) system at block `k`: `B = X_{≠k}^† A X_{≠k}` and
/// `g = X_{≠k}^† f`.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub matrix: Mat<C64>,
    pub rhs: Vec<C64>,
    /// Shape `(left rank, mode, right rank)` of the unknown block.
    pub shape: (usize, usize, usize),
}

/// Builds the reduced system for block `k`. The frame `x` must be in
/// mixed-canonical form centred on `k`.
pub fn frame_reduce(a: &TtOperator, f: &TtVector, x: &TtVector, k: usize) -> Result<ReducedSystem> {
    let d = x.ndim();
    if k >= d || a.ndim() != d || f.ndim() != d {
        return Err(Error::ShapeMismatch(format!("block {k} of trains with {d} blocks")));
    }
    if !x.gauge().is_centred_at(k, d) {
        let g = x.gauge();
        let block = if g.left < k { g.left } else { d - 1 - g.right };
        return Err(Error::NotOrthogonal { block, pivot: k });
    }
    let mut left = Env::unit();
    let mut left_f = Env::unit();
    for p in 0..k {
        left = left_env_step(&left, x.block(p), &PackedOp::new(a.block(p)), x.block(p));
        left_f = left_env_vec(&left_f, x.block(p), f.block(p));
    }
    let mut right = Env::unit();
    let mut right_f = Env::unit();
    for p in (k + 1..d).rev() {
        right = right_env_step(&right, x.block(p), &PackedOp::new_transposed(a.block(p)), x.block(p));
        right_f = right_env_vec(&right_f, x.block(p), f.block(p));
    }
    let matrix = local_matrix(&left, a.block(k), &right);
    let rhs = local_project(&left_f, f.block(k), &right_f);
    Ok(ReducedSystem { matrix, rhs, shape: (left.bra, a.block(k).shape().1, right.bra) })
}
