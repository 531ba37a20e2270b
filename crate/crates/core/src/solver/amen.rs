//! Single-site alternating solver with residual enrichment (AMEn).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SolveReport, SolverOptions, SweepRecord};
use faer::Mat;

use crate::linalg::{self, gmres, mul, norm, qr, solve_dense, solve_least_squares, svd_truncate, view, KroneckerInverse, ZERO};
use crate::tt::frame::{
    left_env_step, left_env_vec, local_apply, local_matrix, local_project, right_env_step, right_env_vec, Env,
    PackedOp,
};
use crate::tt::{Block3, Gauge, TtOperator, TtVector};
use crate::{Error, Result, C64};

const GMRES_RESTART: usize = 40;
const GMRES_MAX_ITER: usize = 600;
/// Bond truncation inside sweeps is this much tighter than the output
/// policy; truncating at exactly the solve tolerance leaves a residual floor
/// just above it.
const SWEEP_TRUNCATION_MARGIN: f64 = 0.1;

/// Solves `A x = f` in TT format starting from `x0`.
///
/// Sweeps alternate left-to-right and right-to-left. Each visit of block `k`
/// solves the Galerkin system in the current frame, truncates the solution
/// and, when moving on, enriches the bond with a low-rank residual direction
/// tracked by an auxiliary TT `z`. The solve stops once the largest local
/// residual of a half-sweep drops below `opts.tolerance`.
///
/// Non-convergence is not an error here: the best iterate is returned and
/// `report.converged` is false.
pub fn amen_solve(a: &TtOperator, f: &TtVector, x0: &TtVector, opts: &SolverOptions) -> Result<(TtVector, SolveReport)> {
    amen_solve_preconditioned(a, f, x0, opts, None)
}

/// [`amen_solve`] with a rank-one operator `p ≈ a` whose local projections
/// precondition the iterative local solves.
pub(crate) fn amen_solve_preconditioned(
    a: &TtOperator,
    f: &TtVector,
    x0: &TtVector,
    opts: &SolverOptions,
    p: Option<&TtOperator>,
) -> Result<(TtVector, SolveReport)> {
    opts.validate()?;
    let modes = f.mode_sizes();
    if a.row_sizes() != modes || a.col_sizes() != modes || x0.mode_sizes() != modes {
        return Err(Error::ShapeMismatch(format!(
            "operator {:?}×{:?}, rhs {:?}, guess {:?}",
            a.row_sizes(),
            a.col_sizes(),
            modes,
            x0.mode_sizes()
        )));
    }
    if let Some(p) = p {
        if p.max_rank() != 1 || p.row_sizes() != modes || p.col_sizes() != modes {
            return Err(Error::InvalidArgument("preconditioner must be a rank-one operator of matching shape".into()));
        }
    }
    let d = modes.len();
    let fnorm = f.norm();
    if fnorm == 0.0 {
        let report = SolveReport { converged: true, sweeps: 0, residual: 0.0, true_residual: Some(0.0), history: vec![] };
        return Ok((TtVector::zeros(&modes), report));
    }
    let mut state = Sweeper::new(a, f, x0, opts, p);
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut half = 0;
    while half < 2 * opts.max_sweeps {
        let forward = half % 2 == 0;
        residual = if forward { state.forward()? } else { state.backward()? };
        half += 1;
        history.push(SweepRecord { half_sweep: half, forward, residual, max_rank: state.max_rank() });
        log::trace!("amen half-sweep {half}: residual {residual:.3e}, max rank {}", state.max_rank());
        if residual <= opts.tolerance {
            converged = true;
            break;
        }
    }
    let pivot = if half % 2 == 1 { d - 1 } else { 0 };
    let x = TtVector::from_parts(state.x, Gauge::pivot(pivot, d)).round(&opts.truncation);
    let true_residual = if opts.verify_residual {
        let r = TtVector::axpy(C64::new(-1.0, 0.0), &a.apply(&x)?, f)?;
        Some(r.orthogonalize(0).block(0).norm() / fnorm)
    } else {
        None
    };
    let report = SolveReport { converged, sweeps: half.div_ceil(2), residual, true_residual, history };
    Ok((x, report))
}

struct Sweeper<'a> {
    f: &'a TtVector,
    opts: &'a SolverOptions,
    a_blocks: Vec<crate::tt::Block4>,
    packed: Vec<PackedOp>,
    packed_t: Vec<PackedOp>,
    x: Vec<Block3>,
    z: Vec<Block3>,
    // environments indexed by bond 0..=d
    xax_l: Vec<Env>,
    xax_r: Vec<Env>,
    xf_l: Vec<Env>,
    xf_r: Vec<Env>,
    zax_l: Vec<Env>,
    zax_r: Vec<Env>,
    zf_l: Vec<Env>,
    zf_r: Vec<Env>,
    // rank-one preconditioner: site factors and x-frame projections
    p_sites: Vec<Mat<C64>>,
    p_packed: Vec<PackedOp>,
    p_packed_t: Vec<PackedOp>,
    p_l: Vec<Env>,
    p_r: Vec<Env>,
    rng: ChaCha8Rng,
}

impl<'a> Sweeper<'a> {
    fn new(a: &'a TtOperator, f: &'a TtVector, x0: &TtVector, opts: &'a SolverOptions, p: Option<&TtOperator>) -> Self {
        let d = f.ndim();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let x = x0.orthogonalize(0).into_blocks();
        let kick = opts.enrichment_rank;
        let z = if kick > 0 {
            TtVector::random(&f.mode_sizes(), kick, &mut rng).orthogonalize(0).into_blocks()
        } else {
            Vec::new()
        };
        let a_blocks = a.blocks().to_vec();
        let packed = a_blocks.iter().map(PackedOp::new).collect();
        let packed_t = a_blocks.iter().map(PackedOp::new_transposed).collect();
        let p_blocks = p.map(|p| p.blocks().to_vec()).unwrap_or_default();
        let p_sites = p_blocks
            .iter()
            .map(|b| {
                let (_, n, m, _) = b.shape();
                view(&b.rank_slice(0, 0), n, m).to_owned()
            })
            .collect();
        let p_packed = p_blocks.iter().map(PackedOp::new).collect();
        let p_packed_t = p_blocks.iter().map(PackedOp::new_transposed).collect();
        let unit = vec![Env::unit(); d + 1];
        let mut s = Sweeper {
            f,
            opts,
            a_blocks,
            packed,
            packed_t,
            x,
            z,
            xax_l: unit.clone(),
            xax_r: unit.clone(),
            xf_l: unit.clone(),
            xf_r: unit.clone(),
            zax_l: unit.clone(),
            zax_r: unit.clone(),
            zf_l: unit.clone(),
            zf_r: unit.clone(),
            p_sites,
            p_packed,
            p_packed_t,
            p_l: unit.clone(),
            p_r: unit,
            rng,
        };
        for k in (1..d).rev() {
            s.update_right(k);
        }
        s
    }

    fn kick(&self) -> usize {
        self.opts.enrichment_rank
    }

    fn max_rank(&self) -> usize {
        self.x.iter().map(|b| b.right_rank()).max().unwrap_or(1)
    }

    fn update_left(&mut self, k: usize) {
        let (x, f) = (&self.x[k], self.f.block(k));
        self.xax_l[k + 1] = left_env_step(&self.xax_l[k], x, &self.packed[k], x);
        self.xf_l[k + 1] = left_env_vec(&self.xf_l[k], x, f);
        if !self.p_sites.is_empty() {
            self.p_l[k + 1] = left_env_step(&self.p_l[k], x, &self.p_packed[k], x);
        }
        if self.kick() > 0 {
            let z = &self.z[k];
            self.zax_l[k + 1] = left_env_step(&self.zax_l[k], z, &self.packed[k], x);
            self.zf_l[k + 1] = left_env_vec(&self.zf_l[k], z, f);
        }
    }

    fn update_right(&mut self, k: usize) {
        let (x, f) = (&self.x[k], self.f.block(k));
        self.xax_r[k] = right_env_step(&self.xax_r[k + 1], x, &self.packed_t[k], x);
        self.xf_r[k] = right_env_vec(&self.xf_r[k + 1], x, f);
        if !self.p_sites.is_empty() {
            self.p_r[k] = right_env_step(&self.p_r[k + 1], x, &self.p_packed_t[k], x);
        }
        if self.kick() > 0 {
            let z = &self.z[k];
            self.zax_r[k] = right_env_step(&self.zax_r[k + 1], z, &self.packed_t[k], x);
            self.zf_r[k] = right_env_vec(&self.zf_r[k + 1], z, f);
        }
    }

    /// Solves the local system at `k` in place; returns the residual of the
    /// incoming block.
    fn solve_local(&mut self, k: usize) -> Result<f64> {
        let (l, n, r) = self.x[k].shape();
        let rhs = local_project(&self.xf_l[k], self.f.block(k), &self.xf_r[k + 1]);
        let apply = |v: &[C64]| local_apply(&self.xax_l[k], &self.packed[k], &self.xax_r[k + 1], v);
        let ax = apply(self.x[k].data());
        let gnorm = norm(&rhs);
        let scale = if gnorm > 0.0 { gnorm } else { norm(&ax).max(f64::MIN_POSITIVE) };
        let res = ax.iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt() / scale;
        if res <= self.opts.local_tolerance {
            return Ok(res);
        }
        let size = l * n * r;
        let sol = if size <= self.opts.dense_local_limit {
            let b = local_matrix(&self.xax_l[k], &self.a_blocks[k], &self.xax_r[k + 1]);
            solve_dense(b.as_ref(), &rhs)
                // the Galerkin projection of a non-normal system can be singular
                .or_else(|| solve_least_squares(b.as_ref(), &rhs))
                .ok_or(Error::LocalBreakdown { block: k })?
        } else {
            let kron = (!self.p_sites.is_empty()).then(|| {
                let (pl, pr) = (&self.p_l[k], &self.p_r[k + 1]);
                KroneckerInverse::new(
                    view(&pl.data, pl.bra, pl.ket),
                    self.p_sites[k].as_ref(),
                    view(&pr.data, pr.bra, pr.ket),
                )
            });
            let out = gmres(
                apply,
                |v: &[C64]| kron.as_ref().and_then(|p| p.apply(v)).unwrap_or_else(|| v.to_vec()),
                &rhs,
                self.x[k].data(),
                self.opts.local_tolerance,
                GMRES_RESTART,
                GMRES_MAX_ITER,
            );
            log::trace!("block {k}: gmres {} iterations, residual {:.2e}", out.iterations, out.relative_residual);
            if !out.relative_residual.is_finite() {
                return Err(Error::LocalBreakdown { block: k });
            }
            out.x
        };
        self.x[k] = Block3::from_vec(l, n, r, sol)?;
        Ok(res)
    }

    fn truncation_threshold(&self, block_norm: f64) -> f64 {
        SWEEP_TRUNCATION_MARGIN * self.opts.truncation.bond_threshold(block_norm, self.x.len())
    }

    fn forward(&mut self) -> Result<f64> {
        let d = self.x.len();
        let mut worst: f64 = 0.0;
        for k in 0..d {
            worst = worst.max(self.solve_local(k)?);
            if k + 1 == d {
                break;
            }
            let (l, n, r) = self.x[k].shape();
            let xnorm = self.x[k].norm();
            let t = svd_truncate(self.x[k].left_unfolding(), self.truncation_threshold(xnorm), self.opts.truncation.max_rank)?;
            let rk = t.rank();
            let sv = t.s_vh();
            let mut u = linalg::to_vec(t.u.as_ref());
            if self.kick() > 0 {
                let xt = Block3::from_vec(l, n, r, mul(t.u.as_ref(), sv.as_ref()))?;
                // new residual basis block for z
                let zrhs = local_project(&self.zf_l[k], self.f.block(k), &self.zf_r[k + 1]);
                let zax = local_apply(&self.zax_l[k], &self.packed[k], &self.zax_r[k + 1], xt.data());
                let zl = self.zf_l[k].bra;
                let zr = self.zf_r[k + 1].bra;
                let crz: Vec<C64> = zrhs.iter().zip(&zax).map(|(p, q)| p - q).collect();
                let basis = self.dominant_columns(&crz, zl * n, zr);
                let kz = basis.len() / (zl * n);
                self.z[k] = Block3::from_vec(zl, n, kz, basis)?;
                // enrichment directions for x
                let rhs = local_project(&self.xf_l[k], self.f.block(k), &self.zf_r[k + 1]);
                let ax = local_apply(&self.xax_l[k], &self.packed[k], &self.zax_r[k + 1], xt.data());
                u.extend(rhs.iter().zip(&ax).map(|(p, q)| p - q));
            }
            let cols = u.len() / (l * n);
            let (q, rfac) = qr(view(&u, l * n, cols));
            let rnew = q.ncols();
            // next block ← R[:, :rk] · S·Vh · X_{k+1}
            let coupling = mul(rfac.as_ref().subcols(0, rk), sv.as_ref());
            self.x[k] = Block3::from_mat(l, n, rnew, q.as_ref());
            self.x[k + 1] = self.x[k + 1].left_mul(view(&coupling, rnew, r));
            self.update_left(k);
        }
        Ok(worst)
    }

    fn backward(&mut self) -> Result<f64> {
        let d = self.x.len();
        let mut worst: f64 = 0.0;
        for k in (0..d).rev() {
            worst = worst.max(self.solve_local(k)?);
            if k == 0 {
                break;
            }
            let (l, n, r) = self.x[k].shape();
            let xnorm = self.x[k].norm();
            let t =
                svd_truncate(self.x[k].right_unfolding(), self.truncation_threshold(xnorm), self.opts.truncation.max_rank)?;
            let rk = t.rank();
            let us = t.u_s();
            // rows of the right factor, stored as columns of its adjoint
            let mut vt = linalg::to_vec(t.vh.adjoint().to_owned().as_ref());
            if self.kick() > 0 {
                let xt = Block3::from_vec(l, n, r, mul(us.as_ref(), t.vh.as_ref()))?;
                let zrhs = local_project(&self.zf_l[k], self.f.block(k), &self.zf_r[k + 1]);
                let zax = local_apply(&self.zax_l[k], &self.packed[k], &self.zax_r[k + 1], xt.data());
                let zl = self.zf_l[k].bra;
                let zr = self.zf_r[k + 1].bra;
                let crz: Vec<C64> = zrhs.iter().zip(&zax).map(|(p, q)| p - q).collect();
                // right singular vectors via the adjoint
                let crz_h = linalg::to_vec(view(&crz, zl, n * zr).adjoint().to_owned().as_ref());
                let basis = self.dominant_columns(&crz_h, n * zr, zl);
                let kz = basis.len() / (n * zr);
                let zb = view(&basis, n * zr, kz).adjoint().to_owned();
                self.z[k] = Block3::from_mat(kz, n, zr, zb.as_ref());
                let rhs = local_project(&self.zf_l[k], self.f.block(k), &self.xf_r[k + 1]);
                let ax = local_apply(&self.zax_l[k], &self.packed[k], &self.xax_r[k + 1], xt.data());
                let crs: Vec<C64> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
                vt.extend(linalg::to_vec(view(&crs, zl, n * r).adjoint().to_owned().as_ref()));
            }
            let cols = vt.len() / (n * r);
            let (q, rfac) = qr(view(&vt, n * r, cols));
            let rnew = q.ncols();
            // previous block ← X_{k-1} · (U·S) · R[:, :rk]^†
            let rh = rfac.as_ref().subcols(0, rk).adjoint().to_owned();
            let coupling = mul(us.as_ref(), rh.as_ref());
            self.x[k] = Block3::from_mat(rnew, n, r, q.adjoint().to_owned().as_ref());
            self.x[k - 1] = self.x[k - 1].right_mul(view(&coupling, l, rnew));
            self.update_right(k);
        }
        Ok(worst)
    }

    /// Orthonormal basis (column-major, `rows × k`) for the `kick` dominant
    /// left singular directions of `m`; random directions stand in when `m`
    /// vanishes.
    fn dominant_columns(&mut self, m: &[C64], rows: usize, cols: usize) -> Vec<C64> {
        let kick = self.kick().min(rows).min(cols.max(1));
        let mnorm = norm(m);
        let owned;
        let src = if mnorm > 0.0 && mnorm.is_finite() {
            m
        } else {
            owned = (0..rows * kick)
                .map(|_| C64::new(crate::tt::gauss(&mut self.rng), crate::tt::gauss(&mut self.rng)))
                .collect::<Vec<_>>();
            &owned[..]
        };
        let c = src.len() / rows;
        match svd_truncate(view(src, rows, c), 0.0, Some(kick)) {
            Ok(t) => linalg::to_vec(t.u.as_ref()),
            Err(_) => {
                let mut e = vec![ZERO; rows * kick];
                for j in 0..kick {
                    e[j * rows + j] = C64::new(1.0, 0.0);
                }
                e
            }
        }
    }
}
