use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use ttgrape_core::spin::{build_pure_density_tt, trace};
use ttgrape_core::{
    fidelity, grape_optimize_with_sink, infidelity, tamen_step, GrapeRecord, PulseSequence, SpectralGrid, SpinModel,
    TtVector, C64,
};

use crate::artifacts::{self, convergence_row, num, CsvWriter, PULSE_FILE, SUMMARY_FILE};
use crate::{CliError, ExperimentConfig, Mode, PulseInit};

/// Outcome of a run, appended to the echoed config in the summary file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub termination: String,
    pub final_fidelity: f64,
    pub final_infidelity: f64,
    pub iterations: usize,
    pub accepted: usize,
    pub wall_seconds: f64,
}

/// Runs the configured experiment, writing artifacts into `config.output`.
/// Rows are flushed as they are produced, so a failed run leaves its partial
/// convergence or trajectory file and a summary naming the failure.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    config.validate()?;
    let dir = config.output.as_path();
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let start = Instant::now();
    let mut summary = RunSummary {
        mode: config.mode,
        termination: String::new(),
        final_fidelity: f64::NAN,
        final_infidelity: f64::NAN,
        iterations: 0,
        accepted: 0,
        wall_seconds: 0.0,
    };
    let result = match config.mode {
        Mode::Propagate => propagate(config, dir, &mut summary),
        Mode::Optimize => optimize(config, dir, &mut summary),
    };
    summary.wall_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        summary.termination = format!("failed: {e}");
    }
    write_summary(config, &summary)?;
    result.map(|_| summary)
}

fn initial_pulse(config: &ExperimentConfig, controls: usize) -> Result<PulseSequence, CliError> {
    let n = config.intervals()?;
    let p = &config.pulse;
    let pulse = match (&p.file, p.init) {
        (Some(path), _) => artifacts::read_pulse(path, p.tau, controls)?,
        (None, PulseInit::Zero) => PulseSequence::zeros(n, controls, p.tau)?,
        (None, PulseInit::Random) => PulseSequence::random(n, controls, p.tau, p.scale, p.seed)?,
    };
    if pulse.intervals() != n {
        return Err(CliError::Invalid {
            key: "pulse.file".into(),
            message: format!("{} intervals in file, {n} configured", pulse.intervals()),
        });
    }
    Ok(pulse)
}

fn optimize(config: &ExperimentConfig, dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let model = SpinModel::from_spec(&config.chain())?;
    let rho0 = build_pure_density_tt(&config.initial_state())?;
    let target = build_pure_density_tt(&config.target_state())?;
    let pulse = initial_pulse(config, model.num_controls())?;
    let opts = config.grape_options()?;

    let mut conv = artifacts::convergence_writer(dir)?;
    let mut io_error = None;
    let mut sink = |r: &GrapeRecord| {
        log::info!(
            "iteration {} {}: infidelity {:.6e}, step {:.3e}, rank {}",
            r.iteration,
            if r.accepted { "accepted" } else { "rejected" },
            r.infidelity,
            r.step,
            r.max_rank
        );
        if io_error.is_none() {
            io_error = conv.row(convergence_row(r)).err();
        }
    };
    let outcome = grape_optimize_with_sink(&pulse, &model, &rho0, &target, &opts, &mut sink)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    artifacts::write_pulse(&dir.join(PULSE_FILE), &outcome.pulse)?;
    summary.termination = outcome.termination.to_string();
    summary.final_fidelity = outcome.fidelity;
    summary.final_infidelity = outcome.infidelity;
    summary.iterations = outcome.trace.records.len().saturating_sub(1);
    summary.accepted = outcome.trace.accepted().count().saturating_sub(1);
    Ok(())
}

/// `⟨σz_k⟩` functionals, one per site.
fn sz_functionals(sites: usize) -> Vec<TtVector> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    (0..sites)
        .map(|k| {
            TtVector::product(
                &(0..sites)
                    .map(|s| if s == k { vec![one, zero, zero, -one] } else { vec![one, zero, zero, one] })
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

fn trajectory_row(
    t: f64,
    rho: &TtVector,
    target: &TtVector,
    sz: &[TtVector],
) -> Result<Vec<String>, CliError> {
    let mut row = vec![num(t), num(trace(rho)?.re), num(rho.norm()), num(fidelity(rho, target)?), rho.max_rank().to_string()];
    for w in sz {
        row.push(num(w.dot(rho)?.re));
    }
    Ok(row)
}

fn propagate(config: &ExperimentConfig, dir: &Path, summary: &mut RunSummary) -> Result<(), CliError> {
    let model = SpinModel::from_spec(&config.chain())?;
    let rho0 = build_pure_density_tt(&config.initial_state())?;
    let target = build_pure_density_tt(&config.target_state())?;
    let pulse = initial_pulse(config, model.num_controls())?;
    artifacts::write_pulse(&dir.join(PULSE_FILE), &pulse)?;
    let grid = SpectralGrid::new(config.solver.order, pulse.tau())?;
    let opts = config.solver_options()?;
    let sz = sz_functionals(config.model.sites);

    let mut out: CsvWriter = artifacts::trajectory_writer(dir, config.model.sites)?;
    out.row(trajectory_row(0.0, &rho0, &target, &sz)?)?;
    let mut rho = rho0;
    let mut warm: Option<TtVector> = None;
    for n in 0..pulse.intervals() {
        let h = model.generator(pulse.interval(n))?;
        let step = tamen_step(&h, &rho, &grid, &opts, warm.as_ref())
            .map_err(|e| CliError::Core(ttgrape_core::Error::Interval { interval: n, source: Box::new(e) }))?;
        log::debug!("interval {n}: {} sweeps, error estimate {:.2e}", step.report.sweeps, step.error_estimate);
        rho = step.state;
        warm = Some(step.trajectory);
        out.row(trajectory_row((n + 1) as f64 * pulse.tau(), &rho, &target, &sz)?)?;
        summary.iterations = n + 1;
    }
    summary.termination = "propagated".into();
    summary.final_fidelity = fidelity(&rho, &target)?;
    summary.final_infidelity = infidelity(&rho, &target)?;
    Ok(())
}

fn write_summary(config: &ExperimentConfig, summary: &RunSummary) -> Result<(), CliError> {
    let path = config.output.join(SUMMARY_FILE);
    let body = toml::to_string(summary).expect("summary serialises");
    let text = format!("{}\n[summary]\n{body}", config.emit());
    fs::write(&path, text).map_err(CliError::io(&path))
}
