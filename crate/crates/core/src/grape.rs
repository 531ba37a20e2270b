//! Gradient ascent pulse engineering on TT-propagated density matrices.
//!
//! One iteration is a backward sweep for the costates `λ(t_n)`, then a
//! forward sweep over the coupled state/sensitivity system which yields the
//! states `ρ(t_n)` and the gradient together. Trial steps are judged with the
//! backward sweep alone: `Re⟨λ(t_0), ρ_0⟩` equals the fidelity, so a rejected
//! step costs one plain propagation.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::solver::{self, space_time_solve, SolverOptions, NORM_DRIFT_LIMIT};
use crate::spectral::{SpectralGrid, DEFAULT_ORDER};
use crate::spin::SpinModel;
use crate::tt::TtVector;
use crate::{Error, Result, C64};

/// Piecewise-constant control amplitudes `c[n][k]` on intervals of length `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    tau: f64,
    amplitudes: Vec<Vec<f64>>,
}

impl PulseSequence {
    pub fn new(tau: f64, amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("interval length {tau} must be positive")));
        }
        let Some(first) = amplitudes.first() else {
            return Err(Error::InvalidArgument("a pulse needs at least one interval".into()));
        };
        let k = first.len();
        for (n, row) in amplitudes.iter().enumerate() {
            if row.len() != k {
                return Err(Error::ShapeMismatch(format!("interval {n} has {} amplitudes, expected {k}", row.len())));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite amplitude on interval {n}")));
            }
        }
        Ok(Self { tau, amplitudes })
    }

    pub fn zeros(intervals: usize, controls: usize, tau: f64) -> Result<Self> {
        Self::new(tau, vec![vec![0.0; controls]; intervals])
    }

    /// Uniform amplitudes in `[−scale, scale]`.
    pub fn random(intervals: usize, controls: usize, tau: f64, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..intervals).map(|_| (0..controls).map(|_| rng.gen_range(-scale..=scale)).collect()).collect();
        Self::new(tau, amps)
    }

    pub fn intervals(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn controls(&self) -> usize {
        self.amplitudes[0].len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn duration(&self) -> f64 {
        self.tau * self.intervals() as f64
    }

    pub fn amplitudes(&self) -> &[Vec<f64>] {
        &self.amplitudes
    }

    pub fn interval(&self, n: usize) -> &[f64] {
        &self.amplitudes[n]
    }

    /// `c + ε·g`.
    pub fn stepped(&self, gradient: &[Vec<f64>], eps: f64) -> Result<Self> {
        if gradient.len() != self.intervals() || gradient.iter().any(|g| g.len() != self.controls()) {
            return Err(Error::ShapeMismatch("gradient shape differs from the pulse".into()));
        }
        let amps = self
            .amplitudes
            .iter()
            .zip(gradient)
            .map(|(c, g)| c.iter().zip(g).map(|(c, g)| c + eps * g).collect())
            .collect();
        Self::new(self.tau, amps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrapeOptions {
    pub initial_step: f64,
    pub growth: f64,
    pub shrink: f64,
    /// Trial steps, accepted or not.
    pub max_iterations: usize,
    pub target_infidelity: f64,
    /// Give up once the step falls below this.
    pub min_step: f64,
    /// Collocation order of every interval.
    pub order: usize,
    /// Wall-clock budget checked before each trial step.
    pub time_limit: Option<Duration>,
    pub solver: SolverOptions,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-2,
            growth: 1.5,
            shrink: 0.5,
            max_iterations: 100,
            target_infidelity: 1e-3,
            min_step: 1e-12,
            order: DEFAULT_ORDER,
            time_limit: None,
            solver: SolverOptions::default(),
        }
    }
}

impl GrapeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.growth > 1.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step factors need growth > 1 > shrink > 0, got {} and {}",
                self.growth, self.shrink
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidArgument(format!("initial step {} must be positive", self.initial_step)));
        }
        if self.target_infidelity.is_nan() || self.target_infidelity < 0.0 {
            return Err(Error::InvalidArgument("target infidelity must be non-negative".into()));
        }
        self.solver.validate()
    }
}

/// One line of the optimisation log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrapeRecord {
    pub iteration: usize,
    pub accepted: bool,
    /// Seconds since the optimiser started.
    pub wall_time: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    /// Step size used by this trial.
    pub step: f64,
    /// Largest TT rank among the states propagated for this record.
    pub max_rank: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrapeTrace {
    pub records: Vec<GrapeRecord>,
}

impl GrapeTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &GrapeRecord> {
        self.records.iter().filter(|r| r.accepted)
    }
}

/// Receives every record as soon as it is produced.
pub trait GrapeSink {
    fn record(&mut self, record: &GrapeRecord);
}

impl<F: FnMut(&GrapeRecord)> GrapeSink for F {
    fn record(&mut self, record: &GrapeRecord) {
        self(record)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    MaxIterations,
    StepUnderflow,
    TimeLimit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::TargetReached => "target infidelity reached",
            Termination::MaxIterations => "iteration limit reached",
            Termination::StepUnderflow => "step size underflow",
            Termination::TimeLimit => "time limit reached",
        })
    }
}

#[derive(Clone, Debug)]
pub struct GrapeOutcome {
    /// Best (last accepted) pulse.
    pub pulse: PulseSequence,
    pub fidelity: f64,
    pub infidelity: f64,
    pub trace: GrapeTrace,
    pub termination: Termination,
}

/// States, gradient and fidelity of one forward sweep.
#[derive(Clone, Debug)]
pub struct GradientPass {
    /// `ρ(t_1), …, ρ(t_N)`.
    pub states: Vec<TtVector>,
    /// `∂F/∂c[n][k]`.
    pub gradient: Vec<Vec<f64>>,
    pub fidelity: f64,
    pub max_rank: usize,
}

/// `Re⟨ρ_T, ρ⟩`.
pub fn fidelity(rho: &TtVector, target: &TtVector) -> Result<f64> {
    Ok(target.dot(rho)?.re)
}

/// `1 − |⟨ρ_T, ρ⟩|`.
pub fn infidelity(rho: &TtVector, target: &TtVector) -> Result<f64> {
    Ok(1.0 - target.dot(rho)?.norm())
}

fn check_pulse(pulse: &PulseSequence, model: &SpinModel, grid: &SpectralGrid) -> Result<()> {
    if pulse.controls() != model.num_controls() {
        return Err(Error::ShapeMismatch(format!(
            "pulse has {} controls, model {}",
            pulse.controls(),
            model.num_controls()
        )));
    }
    if (grid.tau() - pulse.tau()).abs() > 1e-12 * pulse.tau() {
        return Err(Error::InvalidArgument(format!("grid interval {} differs from pulse interval {}", grid.tau(), pulse.tau())));
    }
    Ok(())
}

/// Costates `λ(t_0), …, λ(t_N)` (index `n` holds `λ(t_n)`), with
/// `λ(t_N) = ρ_T` and `λ(t_{n−1}) = exp(iτĤ̂_n) λ(t_n)`.
pub fn backward_pass(
    pulse: &PulseSequence,
    model: &SpinModel,
    target: &TtVector,
    grid: &SpectralGrid,
    opts: &SolverOptions,
) -> Result<Vec<TtVector>> {
    check_pulse(pulse, model, grid)?;
    let n = pulse.intervals();
    let mut out = vec![target.clone(); n + 1];
    let mut warm: Option<TtVector> = None;
    for m in (0..n).rev() {
        // the adjoint interval map is forward evolution under −Ĥ̂
        let h = model.generator(pulse.interval(m))?.scaled(C64::new(-1.0, 0.0));
        let step = solver::tamen_step(&h, &out[m + 1], grid, opts, warm.as_ref())
            .map_err(|e| e.at_interval(m))?;
        out[m] = step.state;
        warm = Some(step.trajectory);
    }
    Ok(out)
}

/// Forward sweep over the coupled system `d/dt [∂ρ; ρ] = −i[[Ĥ̂, Ĥ̂_k], [0, Ĥ̂]] [∂ρ; ρ]`
/// started from `[0; ρ(t_{n−1})]` on every interval, giving
/// `∂F/∂c[n][k] = Re⟨λ(t_n), ∂ρ(t_n)/∂c[n][k]⟩`.
pub fn forward_gradient_pass(
    pulse: &PulseSequence,
    model: &SpinModel,
    rho0: &TtVector,
    lambdas: &[TtVector],
    grid: &SpectralGrid,
    opts: &SolverOptions,
) -> Result<GradientPass> {
    check_pulse(pulse, model, grid)?;
    let n = pulse.intervals();
    if lambdas.len() != n + 1 {
        return Err(Error::ShapeMismatch(format!("{} costates for {n} intervals", lambdas.len())));
    }
    let k = model.num_controls();
    let mut selector = vec![C64::new(0.0, 0.0); k + 1];
    selector[k] = C64::new(1.0, 0.0);
    let selector = TtVector::product(&[selector]);
    let mut states: Vec<TtVector> = Vec::with_capacity(n);
    let mut gradient = Vec::with_capacity(n);
    let mut max_rank = rho0.max_rank();
    let mut warm: Option<TtVector> = None;
    for m in 0..n {
        let at = |e: Error| e.at_interval(m);
        let rho_in = states.last().unwrap_or(rho0);
        let stacked = selector.kron(rho_in);
        let h = model.augmented_generator(pulse.interval(m)).map_err(at)?;
        let (traj, _) = space_time_solve(&h, &stacked, grid, opts, warm.as_ref()).map_err(at)?;
        let end = traj.slice_mode(traj.ndim() - 1, grid.order() - 1).map_err(at)?;
        let rho = end.slice_mode(0, k).map_err(at)?.round(&opts.truncation);
        let (n_in, n_out) = (rho_in.norm(), rho.norm());
        let drift = if n_in > 0.0 { (n_out - n_in).abs() / n_in } else { n_out };
        if drift >= NORM_DRIFT_LIMIT {
            return Err(at(Error::NormDrift { drift }));
        }
        let rho = if n_out > 0.0 { rho.scaled(C64::new(n_in / n_out, 0.0)) } else { rho };
        let mut g = Vec::with_capacity(k);
        for c in 0..k {
            let sens = end.slice_mode(0, c).map_err(at)?;
            g.push(lambdas[m + 1].dot(&sens).map_err(at)?.re);
        }
        max_rank = max_rank.max(rho.max_rank());
        gradient.push(g);
        states.push(rho);
        warm = Some(traj);
    }
    let fidelity = fidelity(states.last().unwrap_or(rho0), &lambdas[n])?;
    Ok(GradientPass { states, gradient, fidelity, max_rank })
}

/// Fidelity of a pulse from its costates alone: `⟨λ(t_0), ρ_0⟩ = ⟨ρ_T, ρ(T)⟩`.
fn dual_overlap(lambdas: &[TtVector], rho0: &TtVector) -> Result<C64> {
    lambdas[0].dot(rho0)
}

fn max_rank(states: &[TtVector]) -> usize {
    states.iter().map(TtVector::max_rank).max().unwrap_or(1)
}

/// Adaptive-step gradient ascent on `F`. A trial `c + εG` is accepted iff its
/// fidelity strictly exceeds the current one; `ε` then grows, otherwise it
/// shrinks and the pulse is kept. A trial whose propagation fails is treated
/// as an overstep.
pub fn grape_optimize(
    pulse0: &PulseSequence,
    model: &SpinModel,
    rho0: &TtVector,
    target: &TtVector,
    opts: &GrapeOptions,
) -> Result<GrapeOutcome> {
    grape_optimize_with_sink(pulse0, model, rho0, target, opts, &mut |_: &GrapeRecord| {})
}

pub fn grape_optimize_with_sink(
    pulse0: &PulseSequence,
    model: &SpinModel,
    rho0: &TtVector,
    target: &TtVector,
    opts: &GrapeOptions,
    sink: &mut dyn GrapeSink,
) -> Result<GrapeOutcome> {
    opts.validate()?;
    let start = Instant::now();
    let grid = SpectralGrid::new(opts.order, pulse0.tau())?;
    let mut trace = GrapeTrace::default();
    let mut emit = |trace: &mut GrapeTrace, rec: GrapeRecord| {
        sink.record(&rec);
        trace.records.push(rec);
    };

    let mut pulse = pulse0.clone();
    let lambdas = backward_pass(&pulse, model, target, &grid, &opts.solver)?;
    let mut overlap = dual_overlap(&lambdas, rho0)?;
    let mut pass = forward_gradient_pass(&pulse, model, rho0, &lambdas, &grid, &opts.solver)?;
    let mut eps = opts.initial_step;
    emit(
        &mut trace,
        GrapeRecord {
            iteration: 0,
            accepted: true,
            wall_time: start.elapsed().as_secs_f64(),
            fidelity: overlap.re,
            infidelity: 1.0 - overlap.norm(),
            step: eps,
            max_rank: pass.max_rank.max(max_rank(&lambdas)),
        },
    );
    let mut iteration = 0;
    let termination = loop {
        if 1.0 - overlap.norm() <= opts.target_infidelity {
            break Termination::TargetReached;
        }
        if iteration >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        if eps < opts.min_step {
            break Termination::StepUnderflow;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            break Termination::TimeLimit;
        }
        iteration += 1;
        let candidate = pulse.stepped(&pass.gradient, eps)?;
        let trial = backward_pass(&candidate, model, target, &grid, &opts.solver)
            .and_then(|l| dual_overlap(&l, rho0).map(|o| (l, o)));
        let (trial_lambdas, trial_overlap) = match trial {
            Ok(t) => t,
            Err(e @ (Error::Interval { .. } | Error::NotConverged { .. } | Error::NormDrift { .. })) => {
                log::warn!("trial step {eps:.3e} failed to propagate: {e}");
                emit(
                    &mut trace,
                    GrapeRecord {
                        iteration,
                        accepted: false,
                        wall_time: start.elapsed().as_secs_f64(),
                        fidelity: f64::NAN,
                        infidelity: f64::NAN,
                        step: eps,
                        max_rank: 0,
                    },
                );
                eps *= opts.shrink;
                continue;
            }
            Err(e) => return Err(e),
        };
        let accepted = trial_overlap.re > overlap.re;
        let mut rank = max_rank(&trial_lambdas);
        if accepted {
            pass = forward_gradient_pass(&candidate, model, rho0, &trial_lambdas, &grid, &opts.solver)?;
            rank = rank.max(pass.max_rank);
            pulse = candidate;
            overlap = trial_overlap;
        }
        emit(
            &mut trace,
            GrapeRecord {
                iteration,
                accepted,
                wall_time: start.elapsed().as_secs_f64(),
                fidelity: trial_overlap.re,
                infidelity: 1.0 - trial_overlap.norm(),
                step: eps,
                max_rank: rank,
            },
        );
        log::info!(
            "grape {iteration}: {} F = {:.10}, step {eps:.3e}",
            if accepted { "accepted" } else { "rejected" },
            trial_overlap.re
        );
        eps *= if accepted { opts.growth } else { opts.shrink };
    };
    Ok(GrapeOutcome { pulse, fidelity: overlap.re, infidelity: 1.0 - overlap.norm(), trace, termination })
}
