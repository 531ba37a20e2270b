//! TT linear solver and the interval time stepper built on it.

mod amen;

pub use amen::amen_solve;
use amen::amen_solve_preconditioned;

use crate::spectral::{assemble_time_system, constant_guess, time_preconditioner, SpectralGrid};
use crate::tt::{TruncationPolicy, TtOperator, TtVector};
use crate::{Error, Result, C64};

/// Relative Frobenius-norm drift above which a step is rejected instead of
/// renormalised.
pub const NORM_DRIFT_LIMIT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop once every local residual of a half-sweep is below this.
    pub tolerance: f64,
    /// Full (forward + backward) sweeps.
    pub max_sweeps: usize,
    /// Rank of the residual used for basis enrichment; 0 gives plain ALS.
    pub enrichment_rank: usize,
    pub truncation: TruncationPolicy,
    /// Relative tolerance of iterative local solves.
    pub local_tolerance: f64,
    /// Local systems up to this many unknowns are solved densely.
    pub dense_local_limit: usize,
    /// Evaluate `‖f − Ax‖ / ‖f‖` in TT arithmetic after the solve.
    pub verify_residual: bool,
    /// Seed of the random initial residual basis.
    pub seed: u64,
}

impl SolverOptions {
    /// Options with solve and truncation tolerance both set to `tol`.
    pub fn with_tolerance(tol: f64) -> Result<Self> {
        let o = Self {
            tolerance: tol,
            local_tolerance: 0.1 * tol,
            truncation: TruncationPolicy::new(tol)?,
            ..Self::default()
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("solve tolerance {} must be positive", self.tolerance)));
        }
        if !(self.local_tolerance > 0.0 && self.local_tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("local tolerance {} must be positive", self.local_tolerance)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("at least one sweep is required".into()));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_sweeps: 20,
            enrichment_rank: 4,
            truncation: TruncationPolicy { tolerance: 1e-8, max_rank: None },
            local_tolerance: 1e-9,
            dense_local_limit: 256,
            verify_residual: false,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRecord {
    pub half_sweep: usize,
    pub forward: bool,
    /// Largest local residual met during the half-sweep.
    pub residual: f64,
    pub max_rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub sweeps: usize,
    /// Largest local residual of the final half-sweep.
    pub residual: f64,
    /// `‖f − Ax‖ / ‖f‖` when requested.
    pub true_residual: Option<f64>,
    pub history: Vec<SweepRecord>,
}

/// Result of one interval.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Space-time solution with the time mode last.
    pub trajectory: TtVector,
    /// State at the end of the interval, renormalised.
    pub state: TtVector,
    /// Relative gap between the end value and its extrapolation from the
    /// lower-degree sub-grid.
    pub error_estimate: f64,
    /// Relative Frobenius-norm drift before renormalisation.
    pub norm_drift: f64,
    pub report: SolveReport,
}

/// Propagates `ρ_in` over one interval of constant generator `hsup`
/// (`dρ/dt = −i Ĥ̂ ρ`). `warm` is an optional space-time initial guess.
pub fn tamen_step(
    hsup: &TtOperator,
    rho_in: &TtVector,
    grid: &SpectralGrid,
    opts: &SolverOptions,
    warm: Option<&TtVector>,
) -> Result<StepOutput> {
    let (trajectory, report) = space_time_solve(hsup, rho_in, grid, opts, warm)?;
    let time_mode = trajectory.ndim() - 1;
    let m = grid.order();
    let end = trajectory.slice_mode(time_mode, m - 1)?.round(&opts.truncation);
    let n_in = rho_in.norm();
    let n_out = end.norm();
    let norm_drift = if n_in > 0.0 { (n_out - n_in).abs() / n_in } else { n_out };
    if norm_drift >= NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift: norm_drift });
    }
    let state = if n_out > 0.0 { end.scaled(C64::new(n_in / n_out, 0.0)) } else { end };
    let w = grid.extrapolation_weights();
    let mut c: Vec<C64> = w[1..].iter().map(|v| C64::new(-v, 0.0)).collect();
    c.push(C64::new(1.0, 0.0));
    let gap = TtVector::axpy(C64::new(-w[0], 0.0), rho_in, &trajectory.contract_mode(time_mode, &c)?)?;
    let error_estimate = if n_in > 0.0 { gap.orthogonalize(0).block(0).norm() / n_in } else { 0.0 };
    Ok(StepOutput { trajectory, state, error_estimate, norm_drift, report })
}

/// Space-time solution of one interval without post-processing; fails if the
/// sweeps do not converge.
pub(crate) fn space_time_solve(
    hsup: &TtOperator,
    rho_in: &TtVector,
    grid: &SpectralGrid,
    opts: &SolverOptions,
    warm: Option<&TtVector>,
) -> Result<(TtVector, SolveReport)> {
    let (a, f) = assemble_time_system(grid, hsup, rho_in)?;
    let x0 = match warm {
        Some(w) if w.mode_sizes() == f.mode_sizes() => w.clone(),
        _ => constant_guess(grid, rho_in),
    };
    let p = time_preconditioner(grid, &rho_in.mode_sizes())?;
    let (trajectory, report) = amen_solve_preconditioned(&a, &f, &x0, opts, Some(&p))?;
    if !report.converged {
        return Err(Error::NotConverged { sweeps: report.sweeps, residual: report.residual, tolerance: opts.tolerance });
    }
    Ok((trajectory, report))
}

/// Chains [`tamen_step`] over intervals; returns `ρ(t_1), …, ρ(t_N)`. Each
/// interval is warm-started from the previous space-time solution.
pub fn propagate(
    hsups: &[TtOperator],
    rho0: &TtVector,
    grid: &SpectralGrid,
    opts: &SolverOptions,
) -> Result<Vec<TtVector>> {
    if hsups.is_empty() {
        return Err(Error::InvalidArgument("no intervals to propagate".into()));
    }
    let mut out: Vec<TtVector> = Vec::with_capacity(hsups.len());
    let mut warm: Option<TtVector> = None;
    for (n, h) in hsups.iter().enumerate() {
        let rho = out.last().unwrap_or(rho0);
        match tamen_step(h, rho, grid, opts, warm.as_ref()) {
            Ok(step) => {
                warm = Some(step.trajectory);
                out.push(step.state);
            }
            Err(e) => {
                return Err(Error::Propagation { interval: n, partial: out, source: Box::new(e) });
            }
        }
    }
    Ok(out)
}
