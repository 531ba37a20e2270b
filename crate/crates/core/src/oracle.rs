//! Dense reference implementations for small chains.
//!
//! Everything here works with explicit `2^d × 2^d` matrices and is independent
//! of the TT machinery, apart from [`density_to_tt_order`] which permutes a
//! density matrix into the fused-site ordering used by TT vectors so the two
//! can be compared entry by entry.

use faer::prelude::*;
use faer::Mat;

use crate::linalg::{ONE, ZERO};
use crate::spin::{ControlAxis, ProductStateSpec, Spin, SpinChainSpec};
use crate::{Error, Result, C64};

/// Largest chain handled densely.
pub const DENSE_SITE_LIMIT: usize = 6;

pub type DenseMatrix = Mat<C64>;

fn check_sites(d: usize) -> Result<()> {
    if d == 0 || d > DENSE_SITE_LIMIT {
        return Err(Error::DenseLimit { size: 1usize << (2 * d.min(31)), limit: 1 << (2 * DENSE_SITE_LIMIT) });
    }
    Ok(())
}

pub fn identity(n: usize) -> DenseMatrix {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn pauli(axis: ControlAxis) -> DenseMatrix {
    let i = C64::new(0.0, 1.0);
    match axis {
        ControlAxis::X => Mat::from_fn(2, 2, |r, c| if r != c { ONE } else { ZERO }),
        ControlAxis::Y => Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => ZERO,
        }),
        ControlAxis::Z => Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => ONE,
            (1, 1) => -ONE,
            _ => ZERO,
        }),
    }
}

pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `m` on `site` (1-based) of a `d`-site chain, identity elsewhere.
pub fn site_operator(d: usize, site: usize, m: &DenseMatrix) -> DenseMatrix {
    let mut acc = identity(1);
    for k in 1..=d {
        acc = if k == site { kron(&acc, m) } else { kron(&acc, &identity(2)) };
    }
    acc
}

/// Heisenberg Hamiltonian summed term by term from Kronecker products.
pub fn heisenberg_hamiltonian(spec: &SpinChainSpec) -> Result<DenseMatrix> {
    let d = spec.sites;
    if d > 12 {
        return Err(Error::DenseLimit { size: 1 << d, limit: 1 << 12 });
    }
    let n = 1usize << d;
    let mut h = Mat::<C64>::zeros(n, n);
    for (j, axis) in [(spec.jx, ControlAxis::X), (spec.jy, ControlAxis::Y), (spec.jz, ControlAxis::Z)] {
        if j == 0.0 {
            continue;
        }
        let p = pauli(axis);
        for k in 1..d {
            let term = &site_operator(d, k, &p) * &site_operator(d, k + 1, &p);
            h += &term * faer::Scale(C64::new(j, 0.0));
        }
    }
    Ok(h)
}

pub fn control_hamiltonians(spec: &SpinChainSpec) -> Vec<DenseMatrix> {
    spec.controls.iter().map(|c| site_operator(spec.sites, c.site, &pauli(c.axis))).collect()
}

pub fn product_state(spec: &ProductStateSpec) -> Vec<C64> {
    let mut psi = vec![ONE];
    for s in &spec.spins {
        let site = match s {
            Spin::Up => [ONE, ZERO],
            Spin::Down => [ZERO, ONE],
        };
        psi = psi.iter().flat_map(|a| site.iter().map(move |b| a * b)).collect();
    }
    psi
}

pub fn pure_density(psi: &[C64]) -> DenseMatrix {
    Mat::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj())
}

/// Permutes `ρ[I, J]` into the TT ordering with fused digits `2·i_k + j_k`.
pub fn density_to_tt_order(rho: &DenseMatrix) -> Vec<C64> {
    let n = rho.nrows();
    let d = n.trailing_zeros() as usize;
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            out[tt_index(i, j, d)] = rho[(i, j)];
        }
    }
    out
}

pub fn tt_order_to_density(v: &[C64]) -> Result<DenseMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n * n != v.len() || !n.is_power_of_two() {
        return Err(Error::ShapeMismatch(format!("{} entries are not a 4^d density", v.len())));
    }
    let d = n.trailing_zeros() as usize;
    Ok(Mat::from_fn(n, n, |i, j| v[tt_index(i, j, d)]))
}

fn tt_index(i: usize, j: usize, d: usize) -> usize {
    let mut q = 0;
    for k in (0..d).rev() {
        let (ik, jk) = ((i >> k) & 1, (j >> k) & 1);
        q = 4 * q + 2 * ik + jk;
    }
    q
}

/// `vec(Hρ − ρH)` as a matrix acting on TT-ordered vectors.
pub fn commutator_superoperator(h: &DenseMatrix) -> Result<DenseMatrix> {
    let n = h.nrows();
    let d = n.trailing_zeros() as usize;
    check_sites(d)?;
    let mut s = Mat::<C64>::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = tt_index(i, j, d);
            for k in 0..n {
                // (Hρ)_{ij} = Σ_k H_ik ρ_kj ; (ρH)_{ij} = Σ_k ρ_ik H_kj
                s[(row, tt_index(k, j, d))] += h[(i, k)];
                s[(row, tt_index(i, k, d))] -= h[(k, j)];
            }
        }
    }
    Ok(s)
}

pub fn frobenius(a: &DenseMatrix) -> f64 {
    a.norm_l2()
}

/// `Re tr(T† ρ)`.
pub fn dense_fidelity(rho: &DenseMatrix, target: &DenseMatrix) -> f64 {
    overlap(target, rho).re
}

/// `tr(A† B)`.
pub fn overlap(a: &DenseMatrix, b: &DenseMatrix) -> C64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

fn one_norm(a: &DenseMatrix) -> f64 {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by degree-13 Padé approximation with scaling and squaring.
pub fn expm(a: &DenseMatrix) -> DenseMatrix {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = C64::new(0.5f64.powi(s), 0.0);
    let a = a * faer::Scale(scale);
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let sc = |c: f64| faer::Scale(C64::new(c, 0.0));
    let u_inner = &a6 * &(&(&a6 * sc(B[13]) + &a4 * sc(B[11])) + &a2 * sc(B[9]))
        + &a6 * sc(B[7])
        + &a4 * sc(B[5])
        + &a2 * sc(B[3])
        + &id * sc(B[1]);
    let u = &a * &u_inner;
    let v = &a6 * &(&(&a6 * sc(B[12]) + &a4 * sc(B[10])) + &a2 * sc(B[8]))
        + &a6 * sc(B[6])
        + &a4 * sc(B[4])
        + &a2 * sc(B[2])
        + &id * sc(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `exp(−iτH)`.
pub fn propagator(h: &DenseMatrix, tau: f64) -> DenseMatrix {
    expm(&(h * faer::Scale(C64::new(0.0, -tau))))
}

/// `ρ(t_n) = U_n ⋯ U_1 ρ_0 U_1† ⋯ U_n†` for piecewise-constant Hamiltonians.
/// This equals applying `exp(−iτĤ̂)` per interval to the vectorised state.
pub fn dense_propagate(hams: &[DenseMatrix], rho0: &DenseMatrix, tau: f64) -> Vec<DenseMatrix> {
    let mut rho = rho0.clone();
    hams.iter()
        .map(|h| {
            let u = propagator(h, tau);
            rho = &(&u * &rho) * u.adjoint();
            rho.clone()
        })
        .collect()
}

/// Liouville-space propagation `exp(−iτĤ̂) vec(ρ)` in TT ordering; only for
/// cross-checking [`dense_propagate`] on tiny chains.
pub fn dense_propagate_superoperator(hams: &[DenseMatrix], rho0: &[C64], tau: f64) -> Result<Vec<Vec<C64>>> {
    let mut v = Mat::from_fn(rho0.len(), 1, |i, _| rho0[i]);
    let mut out = Vec::with_capacity(hams.len());
    for h in hams {
        let q = propagator(&commutator_superoperator(h)?, tau);
        v = &q * &v;
        out.push((0..v.nrows()).map(|i| v[(i, 0)]).collect());
    }
    Ok(out)
}

/// Hilbert-space drift and control Hamiltonians.
#[derive(Clone, Debug)]
pub struct DenseModel {
    pub drift: DenseMatrix,
    pub controls: Vec<DenseMatrix>,
}

impl DenseModel {
    pub fn from_spec(spec: &SpinChainSpec) -> Result<Self> {
        spec.validate()?;
        check_sites(spec.sites)?;
        Ok(Self { drift: heisenberg_hamiltonian(spec)?, controls: control_hamiltonians(spec) })
    }

    pub fn hamiltonian(&self, amplitudes: &[f64]) -> DenseMatrix {
        let mut h = self.drift.clone();
        for (c, hk) in amplitudes.iter().zip(&self.controls) {
            h += hk * faer::Scale(C64::new(*c, 0.0));
        }
        h
    }

    pub fn hamiltonians(&self, amplitudes: &[Vec<f64>]) -> Vec<DenseMatrix> {
        amplitudes.iter().map(|c| self.hamiltonian(c)).collect()
    }

    /// Final fidelity `Re tr(ρ_T† ρ(T))` for a pulse.
    pub fn fidelity(&self, amplitudes: &[Vec<f64>], tau: f64, rho0: &DenseMatrix, target: &DenseMatrix) -> f64 {
        let traj = dense_propagate(&self.hamiltonians(amplitudes), rho0, tau);
        dense_fidelity(traj.last().unwrap_or(rho0), target)
    }
}

/// Central finite differences of the final fidelity.
pub fn dense_gradient_fd(
    model: &DenseModel,
    amplitudes: &[Vec<f64>],
    tau: f64,
    rho0: &DenseMatrix,
    target: &DenseMatrix,
    delta: f64,
) -> Vec<Vec<f64>> {
    let mut grad = vec![vec![0.0; model.controls.len()]; amplitudes.len()];
    let mut work = amplitudes.to_vec();
    for n in 0..amplitudes.len() {
        for k in 0..model.controls.len() {
            let c = amplitudes[n][k];
            work[n][k] = c + delta;
            let fp = model.fidelity(&work, tau, rho0, target);
            work[n][k] = c - delta;
            let fm = model.fidelity(&work, tau, rho0, target);
            work[n][k] = c;
            grad[n][k] = (fp - fm) / (2.0 * delta);
        }
    }
    grad
}

/// Adjoint gradient: backward costates `λ_n = U_{n+1}† ⋯ U_N† ρ_T U_N ⋯`, and
/// the exact derivative of each interval propagator from the block
/// exponential `exp([[X, E], [0, X]])`.
pub fn dense_adjoint_gradient(
    model: &DenseModel,
    amplitudes: &[Vec<f64>],
    tau: f64,
    rho0: &DenseMatrix,
    target: &DenseMatrix,
) -> Vec<Vec<f64>> {
    let hams = model.hamiltonians(amplitudes);
    let us: Vec<DenseMatrix> = hams.iter().map(|h| propagator(h, tau)).collect();
    let nint = hams.len();
    let mut lambda = vec![target.clone(); nint + 1];
    for n in (0..nint).rev() {
        lambda[n] = &(us[n].adjoint() * &lambda[n + 1]) * &us[n];
    }
    let dim = rho0.nrows();
    let mut rho = rho0.clone();
    let mut grad = vec![vec![0.0; model.controls.len()]; nint];
    for n in 0..nint {
        let x = &hams[n] * faer::Scale(C64::new(0.0, -tau));
        for (k, hk) in model.controls.iter().enumerate() {
            let e = hk * faer::Scale(C64::new(0.0, -tau));
            let big = Mat::from_fn(2 * dim, 2 * dim, |i, j| match (i < dim, j < dim) {
                (true, true) => x[(i, j)],
                (false, false) => x[(i - dim, j - dim)],
                (true, false) => e[(i, j - dim)],
                (false, true) => ZERO,
            });
            let ex = expm(&big);
            let du = Mat::from_fn(dim, dim, |i, j| ex[(i, j + dim)]);
            let drho = &(&(&du * &rho) * us[n].adjoint()) + &(&(&us[n] * &rho) * du.adjoint());
            grad[n][k] = overlap(&lambda[n + 1], &drho).re;
        }
        rho = &(&us[n] * &rho) * us[n].adjoint();
    }
    grad
}

/// Outcome of the dense GRAPE reference.
#[derive(Clone, Debug)]
pub struct DenseGrapeOutcome {
    pub amplitudes: Vec<Vec<f64>>,
    pub infidelity: f64,
    pub iterations: usize,
}

/// Plain adaptive-step gradient ascent with dense propagators; mirrors the
/// TT optimiser's acceptance rule.
#[allow(clippy::too_many_arguments)]
pub fn dense_grape_optimize(
    model: &DenseModel,
    initial: &[Vec<f64>],
    tau: f64,
    rho0: &DenseMatrix,
    target: &DenseMatrix,
    step: f64,
    max_iterations: usize,
    target_infidelity: f64,
) -> DenseGrapeOutcome {
    let infid = |amps: &[Vec<f64>]| {
        let traj = dense_propagate(&model.hamiltonians(amps), rho0, tau);
        1.0 - overlap(target, traj.last().unwrap_or(rho0)).norm()
    };
    let mut amps = initial.to_vec();
    let mut f = model.fidelity(&amps, tau, rho0, target);
    let mut grad = dense_adjoint_gradient(model, &amps, tau, rho0, target);
    let mut eps = step;
    let mut it = 0;
    while it < max_iterations && infid(&amps) > target_infidelity && eps > 1e-12 {
        it += 1;
        let trial: Vec<Vec<f64>> =
            amps.iter().zip(&grad).map(|(c, g)| c.iter().zip(g).map(|(c, g)| c + eps * g).collect()).collect();
        let ft = model.fidelity(&trial, tau, rho0, target);
        if ft > f {
            amps = trial;
            f = ft;
            grad = dense_adjoint_gradient(model, &amps, tau, rho0, target);
            eps *= 1.5;
        } else {
            eps *= 0.5;
        }
    }
    DenseGrapeOutcome { infidelity: infid(&amps), amplitudes: amps, iterations: it }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
        (a - b).norm_l2() <= tol * (1.0 + b.norm_l2())
    }

    #[test]
    fn expm_of_zero_and_diagonal() {
        assert!(close(&expm(&Mat::zeros(3, 3)), &identity(3), 1e-15));
        let a = Mat::from_fn(2, 2, |i, j| if i == j { C64::new(i as f64 + 1.0, 0.5) } else { ZERO });
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(1.0, 0.5).exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - C64::new(2.0, 0.5).exp()).norm() < 1e-12);
    }

    #[test]
    fn expm_of_large_rotation() {
        // exp(-iθσx) = cos θ I − i sin θ σx, θ large enough to force squaring
        let theta = 37.3;
        let e = propagator(&pauli(ControlAxis::X), theta);
        let expect = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(theta.cos(), 0.0)
            } else {
                C64::new(0.0, -theta.sin())
            }
        });
        assert!(close(&e, &expect, 1e-12));
    }

    #[test]
    fn singlet_triplet_spectrum() {
        let j = 1.3;
        let spec = SpinChainSpec::xxx(2, j);
        let h = heisenberg_hamiltonian(&spec).unwrap();
        let mut ev: Vec<f64> = h.self_adjoint_eigenvalues(faer::Side::Lower).unwrap().into_iter().collect();
        ev.sort_by(f64::total_cmp);
        let expect = [-3.0 * j, j, j, j];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_spin_phase() {
        // ρ = |+⟩⟨+|, H = cσz: ρ_01(t) = ½ e^{-2ict}
        let c = 0.7;
        let t = 0.3;
        let h = &pauli(ControlAxis::Z) * faer::Scale(C64::new(c, 0.0));
        let rho0 = Mat::from_fn(2, 2, |_, _| C64::new(0.5, 0.0));
        let rho = dense_propagate(&[h], &rho0, t).pop().unwrap();
        assert!((rho[(0, 1)] - C64::new(0.0, -2.0 * c * t).exp() * 0.5).norm() < 1e-14);
        assert!((rho[(1, 0)] - C64::new(0.0, 2.0 * c * t).exp() * 0.5).norm() < 1e-14);
    }

    #[test]
    fn hilbert_and_liouville_propagation_agree() {
        let spec = SpinChainSpec::xxx(2, 1.0);
        let model = DenseModel::from_spec(&spec).unwrap();
        let hams = model.hamiltonians(&[vec![0.3], vec![-0.2]]);
        let rho0 = pure_density(&product_state(&ProductStateSpec::single_up(2, 1)));
        let a = dense_propagate(&hams, &rho0, 0.1);
        let b = dense_propagate_superoperator(&hams, &density_to_tt_order(&rho0), 0.1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(close(x, &tt_order_to_density(y).unwrap(), 1e-13));
            assert!((frobenius(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_agree() {
        let mut spec = SpinChainSpec::xxx(3, 1.0);
        spec.controls.push(crate::spin::ControlSpec { site: 2, axis: ControlAxis::X });
        let model = DenseModel::from_spec(&spec).unwrap();
        let amps = vec![vec![0.4, -0.1], vec![-0.3, 0.2], vec![0.1, 0.5]];
        let rho0 = pure_density(&product_state(&ProductStateSpec::single_up(3, 1)));
        let target = pure_density(&product_state(&ProductStateSpec::single_up(3, 3)));
        let fd1 = dense_gradient_fd(&model, &amps, 0.2, &rho0, &target, 1e-4);
        let fd2 = dense_gradient_fd(&model, &amps, 0.2, &rho0, &target, 5e-5);
        let adj = dense_adjoint_gradient(&model, &amps, 0.2, &rho0, &target);
        for n in 0..3 {
            for k in 0..2 {
                let e1 = (fd1[n][k] - adj[n][k]).abs();
                let e2 = (fd2[n][k] - adj[n][k]).abs();
                assert!(e2 < 1e-8, "{e2}");
                // second-order: halving δ cuts the error about four times
                assert!(e2 <= 0.5 * e1 || e1 < 1e-10, "{e1} {e2}");
            }
        }
    }

    #[test]
    fn zero_sensitivity_gradient() {
        // single σz control on a diagonal state with no drift
        let spec = SpinChainSpec { sites: 2, jx: 0.0, jy: 0.0, jz: 0.0, controls: SpinChainSpec::xxx(2, 0.0).controls };
        let model = DenseModel::from_spec(&spec).unwrap();
        let rho0 = pure_density(&product_state(&ProductStateSpec::single_up(2, 1)));
        let g = dense_gradient_fd(&model, &[vec![0.3], vec![0.1]], 0.1, &rho0, &rho0, 1e-5);
        assert!(g.iter().flatten().all(|v| v.abs() < 1e-10));
        let g = dense_adjoint_gradient(&model, &[vec![0.3], vec![0.1]], 0.1, &rho0, &rho0);
        assert!(g.iter().flatten().all(|v| v.abs() < 1e-12));
    }
}
