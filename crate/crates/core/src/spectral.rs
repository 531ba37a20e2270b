//! Chebyshev collocation in time on a single control interval.
//!
//! Unknowns live on the Chebyshev-Gauss-Lobatto nodes of `(0, τ]`; the value at
//! `t = 0` is the known initial state and is folded into the right-hand side.

use crate::linalg::ONE;
use crate::tt::{Block4, TtOperator, TtVector};
use crate::{Error, Result, C64};

pub const DEFAULT_ORDER: usize = 8;
pub const MAX_ORDER: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    tau: f64,
    /// `t_0 = 0, t_1, …, t_M = τ`.
    points: Vec<f64>,
    /// Differentiation matrix on all `M + 1` points, row-major.
    full: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(order: usize, tau: f64) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidArgument(format!("spectral order {order} not in 1..={MAX_ORDER}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("interval length {tau} must be positive")));
        }
        let m = order;
        let mut points: Vec<f64> =
            (0..=m).map(|j| 0.5 * tau * (1.0 - (j as f64 * std::f64::consts::PI / m as f64).cos())).collect();
        points[0] = 0.0;
        points[m] = tau;
        let weights = barycentric_weights(&points);
        let n = m + 1;
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (weights[j] / weights[i]) / (points[i] - points[j]);
                    full[i * n + j] = v;
                    diag -= v;
                }
            }
            full[i * n + i] = diag;
        }
        Ok(Self { tau, points, full })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.points.len() - 1
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Unknown nodes `τ_1 < … < τ_M = τ`.
    pub fn nodes(&self) -> &[f64] {
        &self.points[1..]
    }

    /// `S`, the `M × M` block acting on the unknowns, row-major.
    pub fn differentiation(&self) -> Vec<f64> {
        let n = self.points.len();
        let m = n - 1;
        let mut s = Vec::with_capacity(m * m);
        for i in 1..n {
            s.extend_from_slice(&self.full[i * n + 1..(i + 1) * n]);
        }
        s
    }

    /// `S·1`, the weights of the initial value.
    pub fn initial_weights(&self) -> Vec<f64> {
        let n = self.points.len();
        (1..n).map(|i| -self.full[i * n]).collect()
    }

    /// Lagrange weights evaluating the degree-`M` interpolant at `t`; the
    /// first entry multiplies the initial value.
    pub fn interpolation_weights(&self, t: f64) -> Vec<f64> {
        lagrange_weights(&self.points, t)
    }

    /// Weights that predict the value at `τ` from `{0, τ_1, …, τ_{M−1}}`.
    pub fn extrapolation_weights(&self) -> Vec<f64> {
        let m = self.order();
        lagrange_weights(&self.points[..m], self.tau)
    }
}

fn barycentric_weights(points: &[f64]) -> Vec<f64> {
    // closed form for Gauss-Lobatto points: (−1)^j δ_j, halved at the ends
    let m = points.len() - 1;
    (0..=m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

pub(crate) fn lagrange_weights(points: &[f64], t: f64) -> Vec<f64> {
    (0..points.len())
        .map(|j| {
            points
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, &p)| (t - p) / (points[j] - p))
                .product()
        })
        .collect()
}

/// Space-time system `A ρ̄ = f` with `A = iĤ̂ ⊗ I_M + I ⊗ S` and
/// `f = ρ(0) ⊗ (S·1)`; the time mode is appended last.
pub fn assemble_time_system(grid: &SpectralGrid, hsup: &TtOperator, rho0: &TtVector) -> Result<(TtOperator, TtVector)> {
    if hsup.col_sizes() != rho0.mode_sizes() || hsup.row_sizes() != hsup.col_sizes() {
        return Err(Error::ShapeMismatch(format!(
            "generator modes {:?} vs state modes {:?}",
            hsup.col_sizes(),
            rho0.mode_sizes()
        )));
    }
    let m = grid.order();
    let s: Vec<C64> = grid.differentiation().into_iter().map(|v| C64::new(v, 0.0)).collect();
    let time_id = TtOperator::identity(&[m]);
    let time_s = TtOperator::new(vec![Block4::from_matrix(m, m, &s)])?;
    let spatial = hsup.scaled(C64::new(0.0, 1.0)).kron(&time_id);
    let temporal = TtOperator::identity(&hsup.row_sizes()).kron(&time_s);
    let a = spatial.add(&temporal)?;
    let s0: Vec<C64> = grid.initial_weights().into_iter().map(|v| C64::new(v, 0.0)).collect();
    let f = rho0.kron(&TtVector::product(&[s0]));
    Ok((a, f))
}

/// Rank-one part `I ⊗ S` of the time system, dominant for short intervals.
pub(crate) fn time_preconditioner(grid: &SpectralGrid, modes: &[usize]) -> Result<TtOperator> {
    let m = grid.order();
    let s: Vec<C64> = grid.differentiation().into_iter().map(|v| C64::new(v, 0.0)).collect();
    Ok(TtOperator::identity(modes).kron(&TtOperator::new(vec![Block4::from_matrix(m, m, &s)])?))
}

/// Constant-in-time initial guess `ρ(0) ⊗ 1_M`.
pub(crate) fn constant_guess(grid: &SpectralGrid, rho0: &TtVector) -> TtVector {
    rho0.kron(&TtVector::product(&[vec![ONE; grid.order()]]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_is_implicit_euler() {
        let g = SpectralGrid::new(1, 0.25).unwrap();
        assert_eq!(g.nodes(), &[0.25]);
        assert!((g.differentiation()[0] - 4.0).abs() < 1e-14);
        assert!((g.initial_weights()[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn paper_grid_nodes() {
        let g = SpectralGrid::new(8, 0.01).unwrap();
        let n = g.nodes();
        assert_eq!(n.len(), 8);
        assert!(n[0] > 0.0);
        assert!(n.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(n[7], 0.01);
    }

    #[test]
    fn differentiates_low_degree_polynomials_exactly() {
        for m in 1..=MAX_ORDER {
            let g = SpectralGrid::new(m, 0.7).unwrap();
            let s = g.differentiation();
            let s0 = g.initial_weights();
            for deg in 1..=m {
                // p(t) = t^deg, p(0) = 0
                let p: Vec<f64> = g.nodes().iter().map(|t| t.powi(deg as i32)).collect();
                for i in 0..m {
                    let dp: f64 = (0..m).map(|j| s[i * m + j] * p[j]).sum();
                    let expect = deg as f64 * g.nodes()[i].powi(deg as i32 - 1);
                    assert!((dp - expect).abs() < 1e-8 * (1.0 + expect.abs()), "m={m} deg={deg}");
                }
            }
            // S·1 = s0 and the row-sum identity with L'_0
            let n = m + 1;
            for i in 0..m {
                let row: f64 = s[i * m..(i + 1) * m].iter().sum();
                assert!((row - s0[i]).abs() < 1e-12 * (1.0 + row.abs()));
                assert!((g.full[(i + 1) * n] + row).abs() < 1e-12 * (1.0 + row.abs()));
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = SpectralGrid::new(6, 2.0).unwrap();
        let w = g.interpolation_weights(0.3);
        let mut pts = vec![0.0];
        pts.extend_from_slice(g.nodes());
        let v: f64 = w.iter().zip(&pts).map(|(w, t)| w * t.powi(5)).sum();
        assert!((v - 0.3f64.powi(5)).abs() < 1e-12);
        let e = g.extrapolation_weights();
        assert_eq!(e.len(), 6);
        let v: f64 = e.iter().zip(&pts).map(|(w, t)| w * t.powi(4)).sum();
        assert!((v - 16.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralGrid::new(0, 1.0).is_err());
        assert!(SpectralGrid::new(17, 1.0).is_err());
        assert!(SpectralGrid::new(4, 0.0).is_err());
        assert!(SpectralGrid::new(4, -1.0).is_err());
    }
}
